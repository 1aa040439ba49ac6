//! Constellations, channel generation and the transmit/receive model.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{check_dim, invalid, Result};
use crate::linalg::{c64, psd_sqrt, CMatrix, CVector, C64};
use crate::rng::{complex_gaussian, stream_rng, CHANNEL_STREAM, TRANSMIT_STREAM};

/// Square QAM alphabet with unit average energy and Gray labels per PAM axis.
///
/// Point `p = i_re * side + i_im` sits at `levels[i_re] + j * levels[i_im]`.
/// Its label packs the in-phase Gray code into the high half of the bits and
/// the quadrature Gray code into the low half; bit 0 is the most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
    labels: Vec<u32>,
    bits_per_symbol: u32,
    avg_energy: f64,
    levels: Vec<f64>,
    level_labels: Vec<u32>,
    spacing: f64,
}

#[inline]
fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

/// Builds a square QAM constellation of the given order (4, 16, 64 or 256).
pub fn make_qam(order: usize) -> Result<Constellation> {
    if !matches!(order, 4 | 16 | 64 | 256) {
        return Err(invalid(format!(
            "QAM order {order} is not a supported square constellation (4, 16, 64, 256)"
        )));
    }
    let bits_per_symbol = order.trailing_zeros();
    let half_bits = bits_per_symbol / 2;
    let side = 1usize << half_bits;
    // mean of (2i - side + 1)^2 over one axis is (side^2 - 1) / 3; two axes
    let raw_energy = 2.0 * ((side * side - 1) as f64) / 3.0;
    let scale = 1.0 / raw_energy.sqrt();
    let levels: Vec<f64> = (0..side)
        .map(|i| (2.0 * i as f64 - side as f64 + 1.0) * scale)
        .collect();
    let level_labels: Vec<u32> = (0..side as u32).map(gray).collect();

    let mut points = Vec::with_capacity(order);
    let mut labels = Vec::with_capacity(order);
    for (ir, &re) in levels.iter().enumerate() {
        for (ii, &im) in levels.iter().enumerate() {
            points.push(c64(re, im));
            labels.push((level_labels[ir] << half_bits) | level_labels[ii]);
        }
    }
    let avg_energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;

    Ok(Constellation {
        points,
        labels,
        bits_per_symbol,
        avg_energy,
        levels,
        level_labels,
        spacing: 2.0 * scale,
    })
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol as usize
    }

    /// Bits carried by each PAM axis.
    pub fn bits_per_axis(&self) -> usize {
        self.bits_per_symbol as usize / 2
    }

    pub fn avg_energy(&self) -> f64 {
        self.avg_energy
    }

    /// PAM levels of one axis in ascending order.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Gray label of each PAM level.
    pub fn level_labels(&self) -> &[u32] {
        &self.level_labels
    }

    pub fn side(&self) -> usize {
        self.levels.len()
    }

    /// Bit `b` (0 = most significant) of the label of point `p`.
    pub fn bit(&self, p: usize, b: usize) -> u8 {
        let shift = self.bits_per_symbol as usize - 1 - b;
        ((self.labels[p] >> shift) & 1) as u8
    }

    fn nearest_level(&self, v: f64) -> usize {
        let side = self.levels.len();
        let pos = ((v - self.levels[0]) / self.spacing).round();
        if pos <= 0.0 {
            0
        } else if pos >= (side - 1) as f64 {
            side - 1
        } else {
            pos as usize
        }
    }

    /// Index of the constellation point closest to `z`.
    pub fn nearest(&self, z: C64) -> usize {
        self.nearest_level(z.re) * self.side() + self.nearest_level(z.im)
    }
}

/// Geometry of a linear array with users at a common vertical offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub array_len_m: f64,
    pub vertical_m: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            array_len_m: 250.0,
            vertical_m: 25.0,
        }
    }
}

impl ArrayGeometry {
    /// Antennas are uniformly spaced and include both array ends.
    pub fn antenna_position(&self, i: usize, n: usize) -> f64 {
        if n <= 1 {
            0.0
        } else {
            self.array_len_m * i as f64 / (n - 1) as f64
        }
    }

    /// Users sit at the centres of `k` equal segments of the array.
    pub fn user_position(&self, j: usize, k: usize) -> f64 {
        self.array_len_m * (j as f64 + 0.5) / k as f64
    }

    pub fn distance(&self, antenna_pos: f64, user_pos: f64) -> f64 {
        let dx = antenna_pos - user_pos;
        (dx * dx + self.vertical_m * self.vertical_m).sqrt()
    }

    /// `D[i][j] = 1 / d_ij`.
    pub fn large_scale_matrix(&self, n: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, k, |i, j| {
            1.0 / self.distance(self.antenna_position(i, n), self.user_position(j, k))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Iid,
    /// Receive correlation `Σ_R[i][j] = κ^|i-j|`.
    Correlated { kappa: f64 },
    NonStationary(ArrayGeometry),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_antennas: usize,
    pub n_users: usize,
    pub noise_var: f64,
    pub constellation: Constellation,
    pub channel_model: ChannelModel,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_antennas < self.n_users {
            return Err(invalid(format!(
                "need N >= K >= 1, got N={} K={}",
                self.n_antennas, self.n_users
            )));
        }
        if !(self.noise_var > 0.0) {
            return Err(invalid("noise variance must be positive"));
        }
        match self.channel_model {
            ChannelModel::Correlated { kappa } if !(0.0..1.0).contains(&kappa) => {
                Err(invalid(format!("correlation coefficient {kappa} outside [0, 1)")))
            }
            ChannelModel::NonStationary(g) if !(g.array_len_m > 0.0 && g.vertical_m > 0.0) => {
                Err(invalid("array length and vertical distance must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub model: ChannelModel,
}

/// `Σ_R[i][j] = κ^|i-j|` for an `n`-element array.
pub fn correlation_matrix(n: usize, kappa: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| kappa.powi(i.abs_diff(j) as i32))
}

/// Draws an `N x K` channel. Small-scale fading has i.i.d. `CN(0, 1/K)` entries
/// drawn in row-major order, so every model shares the same fading draws for a
/// given seed.
pub fn gen_channel(config: &SystemConfig, seed: u64) -> Result<ChannelRealization> {
    config.validate()?;
    let (n, k) = (config.n_antennas, config.n_users);
    let mut rng = stream_rng(seed, CHANNEL_STREAM);
    let var = 1.0 / k as f64;
    let mut h_r = CMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            h_r[(i, j)] = complex_gaussian(&mut rng, var);
        }
    }
    let h = match config.channel_model {
        ChannelModel::Iid => h_r,
        // Σ_R = I exactly, so its root is the identity
        ChannelModel::Correlated { kappa: 0.0 } => h_r,
        ChannelModel::Correlated { kappa } => {
            let root = psd_sqrt(&correlation_matrix(n, kappa)).map(|v| c64(v, 0.0));
            root * h_r
        }
        ChannelModel::NonStationary(geometry) => {
            let d = geometry.large_scale_matrix(n, k);
            CMatrix::from_fn(n, k, |i, j| h_r[(i, j)] * d[(i, j)])
        }
    };
    Ok(ChannelRealization {
        h,
        model: config.channel_model,
    })
}

/// Expected received energy per antenna summed over users, `(1/N) Σ_ij E|H_ij|²`.
///
/// Equals 1 for the i.i.d. and correlated models.
pub fn expected_row_energy(model: &ChannelModel, n: usize, k: usize) -> f64 {
    match model {
        ChannelModel::Iid | ChannelModel::Correlated { .. } => 1.0,
        ChannelModel::NonStationary(g) => {
            let d = g.large_scale_matrix(n, k);
            d.iter().map(|v| v * v).sum::<f64>() / (k as f64 * n as f64)
        }
    }
}

/// `σ² = E_x · h_energy / 10^(snr_db / 10)`.
pub fn snr_to_noise_var(snr_db: f64, h_column_energy: f64, e_x: f64) -> f64 {
    e_x * h_column_energy / 10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionInstance {
    pub x: CVector,
    /// Constellation index of each user's symbol.
    pub symbols: Vec<usize>,
    /// `K x bits_per_symbol` transmitted bits, row-major.
    pub tx_bits: Vec<u8>,
    pub bits_per_symbol: usize,
    pub y: CVector,
    pub noise: CVector,
}

impl TransmissionInstance {
    pub fn bit(&self, user: usize, b: usize) -> u8 {
        self.tx_bits[user * self.bits_per_symbol + b]
    }
}

/// Draws uniform symbols and `CN(0, σ²)` noise and forms `y = H x + n`.
///
/// Symbols are drawn before noise from the same stream, so two calls that
/// differ only in `noise_var` share symbols and noise shape.
pub fn transmit(
    channel: &ChannelRealization,
    constellation: &Constellation,
    noise_var: f64,
    seed: u64,
) -> Result<TransmissionInstance> {
    if !(noise_var >= 0.0) {
        return Err(invalid("noise variance must be non-negative"));
    }
    let (n, k) = channel.h.shape();
    let mut rng = stream_rng(seed, TRANSMIT_STREAM);
    let order = constellation.order();
    let symbols: Vec<usize> = (0..k).map(|_| rng.random_range(0..order)).collect();
    let x = CVector::from_iterator(k, symbols.iter().map(|&s| constellation.points()[s]));
    let m = constellation.bits_per_symbol();
    let mut tx_bits = Vec::with_capacity(k * m);
    for &s in &symbols {
        tx_bits.extend((0..m).map(|b| constellation.bit(s, b)));
    }
    let noise = CVector::from_iterator(n, (0..n).map(|_| complex_gaussian(&mut rng, noise_var)));
    let y = receive(&channel.h, &x, &noise)?;
    Ok(TransmissionInstance {
        x,
        symbols,
        tx_bits,
        bits_per_symbol: m,
        y,
        noise,
    })
}

/// `y = H x + n`.
pub fn receive(h: &CMatrix, x: &CVector, noise: &CVector) -> Result<CVector> {
    check_dim("transmit vector", h.ncols(), x.len())?;
    check_dim("noise vector", h.nrows(), noise.len())?;
    Ok(h * x + noise)
}
