//! Subarray partitions, trimmed per-subarray channels and secondary splits.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::error::{check_dim, invalid, Result};
use crate::linalg::{CMatrix, CVector};

/// Contiguous split of `N` antenna rows into subarrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubarrayPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl SubarrayPartition {
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(invalid("subarray sizes must be non-empty and positive"));
        }
        let offsets = sizes
            .iter()
            .scan(0, |acc, &s| {
                let start = *acc;
                *acc += s;
                Some(start)
            })
            .collect();
        Ok(Self { sizes, offsets })
    }

    pub fn n_subarrays(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn rows(&self, c: usize) -> Range<usize> {
        self.offsets[c]..self.offsets[c] + self.sizes[c]
    }

    pub fn block(&self, h: &CMatrix, c: usize) -> CMatrix {
        h.rows(self.offsets[c], self.sizes[c]).into_owned()
    }

    pub fn segment(&self, y: &CVector, c: usize) -> CVector {
        y.rows(self.offsets[c], self.sizes[c]).into_owned()
    }
}

/// `C = n / subarray_size` equal contiguous blocks.
pub fn partition_uniform(n: usize, subarray_size: usize) -> Result<SubarrayPartition> {
    if subarray_size == 0 || n == 0 || !n.is_multiple_of(subarray_size) {
        return Err(invalid(format!(
            "subarray size {subarray_size} does not divide {n} antennas"
        )));
    }
    SubarrayPartition::from_sizes(alloc::vec![subarray_size; n / subarray_size])
}

/// Per-subarray served-user sets and the induced trimmed channel blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedPartition {
    pub base: SubarrayPartition,
    /// `K_c`: ascending user indices served by each subarray.
    pub served: Vec<Vec<usize>>,
    /// `N_c x K_c` column selections of each `H_c`.
    pub trimmed_h: Vec<CMatrix>,
    /// `C_k`: ascending subarray indices serving each user.
    pub serving_of_user: Vec<Vec<usize>>,
    /// Users whose channel column was identically zero.
    pub zero_energy_users: Vec<usize>,
}

impl TrimmedPartition {
    pub fn n_users(&self) -> usize {
        self.serving_of_user.len()
    }

    pub fn served_counts(&self) -> Vec<usize> {
        self.served.iter().map(Vec::len).collect()
    }
}

impl fmt::Display for TrimmedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# subarrays={} users={}",
            self.base.n_subarrays(),
            self.n_users()
        )?;
        for (c, users) in self.served.iter().enumerate() {
            let rows = self.base.rows(c);
            write!(f, "subarray {c} rows {}..{} served {}:", rows.start, rows.end, users.len())?;
            for u in users {
                write!(f, " {u}")?;
            }
            writeln!(f)?;
        }
        if !self.zero_energy_users.is_empty() {
            write!(f, "# zero-energy users:")?;
            for u in &self.zero_energy_users {
                write!(f, " {u}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Energy of user `k` on each subarray, `‖H_c[:, k]‖²`.
pub fn subarray_energies(h: &CMatrix, part: &SubarrayPartition, k: usize) -> Vec<f64> {
    (0..part.n_subarrays())
        .map(|c| part.rows(c).map(|i| h[(i, k)].norm_sqr()).sum())
        .collect()
}

/// Smallest set of subarrays, taken in descending energy order (ties to the
/// lower index), whose cumulative energy reaches `threshold` of the total.
pub fn select_serving(energies: &[f64], threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]).then(a.cmp(&b)));
    // summing in selection order makes the full prefix reach the total exactly
    let total: f64 = order.iter().map(|&c| energies[c]).sum();
    if total <= 0.0 {
        return alloc::vec![order[0]];
    }
    let target = threshold * total;
    let mut acc = 0.0;
    let mut chosen = Vec::new();
    for &c in &order {
        chosen.push(c);
        acc += energies[c];
        if acc >= target {
            break;
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Keeps, for every user, the minimal energy prefix of subarrays that carries
/// `power_threshold` of its received energy.
pub fn trim(h: &CMatrix, part: &SubarrayPartition, power_threshold: f64) -> Result<TrimmedPartition> {
    if !(power_threshold > 0.0 && power_threshold <= 1.0) {
        return Err(invalid(format!("power threshold {power_threshold} outside (0, 1]")));
    }
    check_dim("channel rows", part.n_antennas(), h.nrows())?;
    let k = h.ncols();
    let n_sub = part.n_subarrays();
    let mut serving_of_user = Vec::with_capacity(k);
    let mut zero_energy_users = Vec::new();
    let mut served = alloc::vec![Vec::new(); n_sub];
    for user in 0..k {
        let energies = subarray_energies(h, part, user);
        if energies.iter().all(|&e| e <= 0.0) {
            zero_energy_users.push(user);
        }
        let chosen = select_serving(&energies, power_threshold);
        for &c in &chosen {
            served[c].push(user);
        }
        serving_of_user.push(chosen);
    }
    let trimmed_h = served
        .iter()
        .enumerate()
        .map(|(c, users)| {
            let block = part.block(h, c);
            CMatrix::from_fn(block.nrows(), users.len(), |i, j| block[(i, users[j])])
        })
        .collect();
    Ok(TrimmedPartition {
        base: part.clone(),
        served,
        trimmed_h,
        serving_of_user,
        zero_energy_users,
    })
}

/// Secondary row split inside each subarray, with offsets relative to the
/// subarray's first row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    pub secondary: Vec<SubarrayPartition>,
}

impl Hierarchy {
    pub fn secondary_counts(&self) -> Vec<usize> {
        self.secondary.iter().map(SubarrayPartition::n_subarrays).collect()
    }

    pub fn is_flat(&self) -> bool {
        self.secondary.iter().all(|s| s.n_subarrays() == 1)
    }
}

pub fn split_hierarchy(part: &SubarrayPartition, secondary_size: usize) -> Result<Hierarchy> {
    let secondary = part
        .sizes()
        .iter()
        .map(|&n_c| partition_uniform(n_c, secondary_size))
        .collect::<Result<Vec<_>>>()?;
    Ok(Hierarchy { secondary })
}
