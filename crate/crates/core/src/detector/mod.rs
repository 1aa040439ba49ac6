//! Subarray expectation-propagation detector.
//!
//! Each subarray (or each secondary block inside a subarray) turns the
//! central estimate into a Gaussian prior, forms the local LMMSE belief and
//! returns the extrinsic part of that belief. The central module combines the
//! extrinsic messages by precision and applies the constellation prior. Means
//! travel in the unscaled form `p = η r`, so no stage divides by `η`.

mod central;
mod local;
mod run;

pub use central::{
    compute_llr, cpm_denoise, cpm_mrc, hard_decisions, pam_posterior, Combined, Contribution, Denoised,
};
pub use local::{
    direct_sigma, lpm_extrinsic, lpm_lmmse, lpm_prior, rank_one_sigma, recursive_sigma, Block, Extrinsic,
    Inversion, Lmmse, Prior,
};
pub use run::{detect, run_ep, run_hierarchical, run_one_feedforward, OneFeedforward};

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::analysis::Residuals;
use crate::error::{check_dim, invalid, Result};
use crate::linalg::{CMatrix, CVector};
use crate::partition::{Hierarchy, SubarrayPartition, TrimmedPartition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Full,
    Trimmed,
    Hierarchical { secondary_size: usize },
    /// One iteration, one feedforward.
    OneShot,
    /// Local detection to convergence in every subarray, then one combine.
    LocalEpThenMrc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub max_iters: usize,
    /// Weight of the new extrinsic message; 1 disables damping.
    pub damping: f64,
    pub precision_floor: f64,
    pub inversion: Inversion,
    pub mode: Mode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_iters: 6,
            damping: 1.0,
            precision_floor: 1e-9,
            inversion: Inversion::Auto,
            mode: Mode::Full,
        }
    }
}

impl DetectorConfig {
    pub fn trimmed() -> Self {
        Self {
            max_iters: 3,
            mode: Mode::Trimmed,
            ..Self::default()
        }
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_inversion(mut self, inversion: Inversion) -> Self {
        self.inversion = inversion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("at least one iteration is required"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping must lie in (0, 1]"));
        }
        if !(self.precision_floor > 0.0) {
            return Err(invalid("precision floor must be positive"));
        }
        Ok(())
    }
}

/// Users a subarray observes and the row blocks it processes independently.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    /// Ascending global user indices; the block columns follow this order.
    pub users: Vec<usize>,
    pub blocks: Vec<Block>,
}

/// Everything the detector needs about one received vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    n_users: usize,
    noise_var: f64,
    subarrays: Vec<LocalModel>,
    /// `(subarray, local index)` pairs per user, ascending in subarray.
    serving: Vec<Vec<(usize, usize)>>,
    trimmed: bool,
}

impl Problem {
    /// Full subarray model: every subarray observes every user.
    pub fn full(y: &CVector, h: &CMatrix, part: &SubarrayPartition, noise_var: f64) -> Result<Self> {
        check_dim("received vector", h.nrows(), y.len())?;
        check_dim("partition rows", h.nrows(), part.n_antennas())?;
        let k = h.ncols();
        let subarrays = (0..part.n_subarrays())
            .map(|c| {
                Ok(LocalModel {
                    users: (0..k).collect(),
                    blocks: alloc::vec![Block::new(part.block(h, c), part.segment(y, c))?],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(k, noise_var, subarrays, false)
    }

    /// Trimmed subarray model built from a [`TrimmedPartition`].
    pub fn trimmed(y: &CVector, tp: &TrimmedPartition, noise_var: f64) -> Result<Self> {
        check_dim("received vector", tp.base.n_antennas(), y.len())?;
        let subarrays = (0..tp.base.n_subarrays())
            .map(|c| {
                let blocks = if tp.served[c].is_empty() {
                    Vec::new()
                } else {
                    alloc::vec![Block::new(tp.trimmed_h[c].clone(), tp.base.segment(y, c))?]
                };
                Ok(LocalModel {
                    users: tp.served[c].clone(),
                    blocks,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(tp.n_users(), noise_var, subarrays, true)
    }

    fn assemble(n_users: usize, noise_var: f64, subarrays: Vec<LocalModel>, trimmed: bool) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(invalid("noise variance must be positive"));
        }
        let mut serving = alloc::vec![Vec::new(); n_users];
        for (c, sub) in subarrays.iter().enumerate() {
            for (local, &u) in sub.users.iter().enumerate() {
                if u >= n_users {
                    return Err(invalid("served user index out of range"));
                }
                serving[u].push((c, local));
            }
            for b in &sub.blocks {
                check_dim("block columns", sub.users.len(), b.n_users())?;
            }
        }
        Ok(Self {
            n_users,
            noise_var,
            subarrays,
            serving,
            trimmed,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn subarrays(&self) -> &[LocalModel] {
        &self.subarrays
    }

    pub fn serving(&self) -> &[Vec<(usize, usize)>] {
        &self.serving
    }

    pub fn is_trimmed(&self) -> bool {
        self.trimmed
    }

    pub fn n_blocks(&self) -> usize {
        self.subarrays.iter().map(|s| s.blocks.len()).sum()
    }

    /// Splits every subarray's rows into secondary blocks.
    pub fn split(&self, hierarchy: &Hierarchy) -> Result<Self> {
        check_dim("hierarchy subarrays", self.subarrays.len(), hierarchy.secondary.len())?;
        let mut subarrays = Vec::with_capacity(self.subarrays.len());
        for (sub, secondary) in self.subarrays.iter().zip(&hierarchy.secondary) {
            let blocks = match sub.blocks.as_slice() {
                [] => Vec::new(),
                [block] => {
                    check_dim("secondary rows", block.n_rows(), secondary.n_antennas())?;
                    (0..secondary.n_subarrays())
                        .map(|s| block.sub_block(secondary.offsets()[s], secondary.sizes()[s]))
                        .collect::<Result<Vec<_>>>()?
                }
                _ => return Err(invalid("problem is already split into secondary blocks")),
            };
            subarrays.push(LocalModel {
                users: sub.users.clone(),
                blocks,
            });
        }
        Self::assemble(self.n_users, self.noise_var, subarrays, self.trimmed)
    }

    /// Splits every subarray into secondary blocks of `secondary_size` rows.
    pub fn split_uniform(&self, secondary_size: usize) -> Result<Self> {
        let secondary = self
            .subarrays
            .iter()
            .map(|s| {
                let rows = s.blocks.iter().map(Block::n_rows).sum::<usize>();
                if rows == 0 {
                    SubarrayPartition::from_sizes(alloc::vec![secondary_size.max(1)])
                } else {
                    crate::partition::partition_uniform(rows, secondary_size)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.split(&Hierarchy { secondary })
    }

    /// Subarray `c` alone, as a full model over its own served users.
    pub fn local(&self, c: usize) -> Result<Self> {
        let sub = &self.subarrays[c];
        let k = sub.users.len();
        if k == 0 {
            return Err(invalid("subarray serves no users"));
        }
        let local = LocalModel {
            users: (0..k).collect(),
            blocks: sub.blocks.clone(),
        };
        Self::assemble(k, self.noise_var, alloc::vec![local], false)
    }
}

/// Iteration variables of one row block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    /// Prior precision `τ` and mean `γ` of the last iteration.
    pub tau: f64,
    pub gamma: CVector,
    /// Extrinsic precision `η` and unscaled mean `p = η r`.
    pub eta: f64,
    pub p: CVector,
    /// Posterior precision `ω` and mean `x̂` of the local LMMSE belief.
    pub omega: f64,
    pub xhat: CVector,
}

impl BlockState {
    fn initial(k: usize, e_x: f64) -> Self {
        Self {
            tau: 1.0 / e_x,
            gamma: CVector::zeros(k),
            eta: 0.0,
            p: CVector::zeros(k),
            omega: 1.0 / e_x,
            xhat: CVector::zeros(k),
        }
    }

    /// Extrinsic mean `r = p / η`.
    pub fn extrinsic_mean(&self) -> CVector {
        &self.p / crate::linalg::c64(self.eta, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubarrayState {
    pub users: Vec<usize>,
    pub blocks: Vec<BlockState>,
    /// Subarray-level extrinsic: precision and unscaled mean summed over blocks.
    pub eta: f64,
    pub p: CVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpState {
    pub subarrays: Vec<SubarrayState>,
    pub tau0: Vec<f64>,
    /// `Σ_c η_c r_c` per user before division by `τ₀`.
    pub p0: CVector,
    pub gamma0: CVector,
    pub omega0: f64,
    pub xhat0: CVector,
    pub v0: Vec<f64>,
    pub iteration: usize,
    /// Whether every subarray observes every user (scalar `τ₀`).
    pub full_model: bool,
}

impl EpState {
    pub fn initial(problem: &Problem, e_x: f64) -> Self {
        let k = problem.n_users();
        Self {
            subarrays: problem
                .subarrays()
                .iter()
                .map(|s| SubarrayState {
                    users: s.users.clone(),
                    blocks: s.blocks.iter().map(|_| BlockState::initial(s.users.len(), e_x)).collect(),
                    eta: 0.0,
                    p: CVector::zeros(s.users.len()),
                })
                .collect(),
            tau0: alloc::vec![0.0; k],
            p0: CVector::zeros(k),
            gamma0: CVector::zeros(k),
            omega0: 1.0 / e_x,
            xhat0: CVector::zeros(k),
            v0: alloc::vec![e_x; k],
            iteration: 0,
            full_model: !problem.is_trimmed()
                && problem.subarrays().iter().all(|s| s.users.len() == k),
        }
    }

    /// `[x̂₀]` restricted to the given users.
    pub fn restricted_xhat0(&self, users: &[usize]) -> CVector {
        if users.len() == self.xhat0.len() {
            self.xhat0.clone()
        } else {
            CVector::from_iterator(users.len(), users.iter().map(|&u| self.xhat0[u]))
        }
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&SubarrayState, &BlockState)> {
        self.subarrays.iter().flat_map(|s| s.blocks.iter().map(move |b| (s, b)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub tau0: Vec<f64>,
    pub gamma0: CVector,
    pub omega0: f64,
    /// Precision floors and caps applied during this iteration.
    pub floor_events: usize,
    pub residuals: Residuals,
}

impl IterationRecord {
    pub fn tau0_mean(&self) -> f64 {
        self.tau0.iter().sum::<f64>() / self.tau0.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutput {
    pub gamma0: CVector,
    pub tau0: Vec<f64>,
    pub xhat0: CVector,
    pub v0: Vec<f64>,
    pub omega0: f64,
    pub hard_symbols: Vec<usize>,
    /// `K x bits_per_symbol`, positive favours bit 0.
    pub llrs: DMatrix<f64>,
    pub trace: Vec<IterationRecord>,
    pub state: EpState,
    pub floor_events: usize,
}

impl DetectionOutput {
    pub fn tau0_mean(&self) -> f64 {
        self.tau0.iter().sum::<f64>() / self.tau0.len() as f64
    }
}
