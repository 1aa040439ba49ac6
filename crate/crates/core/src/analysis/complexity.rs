//! Operation and fronthaul counts per detection.

use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Alg1Full,
    Alg1Trimmed,
    OneFfFull,
    OneFfTrimmed,
    Centralized,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Alg1Full,
        Scenario::Alg1Trimmed,
        Scenario::OneFfFull,
        Scenario::OneFfTrimmed,
        Scenario::Centralized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Alg1Full => "alg1-full",
            Scenario::Alg1Trimmed => "alg1-trimmed",
            Scenario::OneFfFull => "oneff-full",
            Scenario::OneFfTrimmed => "oneff-trimmed",
            Scenario::Centralized => "centralized",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| invalid(alloc::format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityParams {
    /// Antennas per subarray, or all antennas for the centralized detector.
    pub antennas: u64,
    pub users: u64,
    /// Users served by one subarray in the trimmed model.
    pub served_users: u64,
    pub subarrays: u64,
    pub iters: u64,
    pub qam_order: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub mults: u128,
    pub exps: u128,
    pub trans: u128,
}

impl OpCounts {
    fn new(mults: u128, exps: u128, trans: u128) -> Self {
        Self { mults, exps, trans }
    }
}

/// Counts for one local module and for the combiner. The centralized
/// detector has no local modules; its work is reported under `cpm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityReport {
    pub scenario: Scenario,
    pub lpm: OpCounts,
    pub cpm: OpCounts,
}

impl ComplexityReport {
    pub fn total(&self) -> OpCounts {
        OpCounts::new(
            self.lpm.mults + self.cpm.mults,
            self.lpm.exps + self.cpm.exps,
            self.lpm.trans + self.cpm.trans,
        )
    }
}

pub fn complexity_count(scenario: Scenario, p: &ComplexityParams) -> Result<ComplexityReport> {
    let widen = |v: u64| v as u128;
    let (n, k, c, t, q) = (
        widen(p.antennas),
        widen(p.users),
        widen(p.subarrays),
        widen(p.iters),
        widen(p.qam_order),
    );
    if n == 0 || k == 0 || c == 0 || t == 0 || q == 0 {
        return Err(invalid("complexity parameters must be positive"));
    }
    let local_k = match scenario {
        Scenario::Alg1Trimmed | Scenario::OneFfTrimmed => {
            if p.served_users == 0 || p.served_users > p.users {
                return Err(invalid("served users must lie in 1..=users"));
            }
            widen(p.served_users)
        }
        _ => k,
    };
    let kl = local_k;
    let report = match scenario {
        Scenario::Alg1Full | Scenario::Alg1Trimmed => ComplexityReport {
            scenario,
            lpm: OpCounts::new(8 * n * t * kl * (kl + 1) + 6 * t * kl * (kl + 2), 0, t * (2 * kl + 1)),
            cpm: OpCounts::new(
                c * t * (1 + 2 * k) + k * (t - 1) * (7 * q + 2),
                k * q * (t - 1),
                (2 * k + 1) * (t - 1),
            ),
        },
        Scenario::OneFfFull | Scenario::OneFfTrimmed => ComplexityReport {
            scenario,
            lpm: OpCounts::new(
                t * kl * (8 * n * (kl + 1) + 2 * (4 * kl + 3)) + kl * (t - 1) * (7 * q + 6),
                kl * t * q,
                2 * kl + 1,
            ),
            cpm: OpCounts::new(c * (1 + 2 * k), 0, 0),
        },
        Scenario::Centralized => ComplexityReport {
            scenario,
            lpm: OpCounts::default(),
            cpm: OpCounts::new(
                t * k * (8 * n * (k + 1) + 2 * (4 * k + 3)) + k * (t - 1) * (7 * q + 6),
                k * q * (t - 1),
                0,
            ),
        },
    };
    Ok(report)
}
