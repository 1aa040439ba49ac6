//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. List-valued keys take
//! comma-separated values. Unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use epdetect_core::detector::{DetectorConfig, Mode};
use epdetect_core::harness::RunSpec;
use epdetect_core::model::{make_qam, ArrayGeometry, ChannelModel, SystemConfig};

use crate::error::{Result, SimError};

pub const KEYS: [&str; 16] = [
    "n",
    "k",
    "qam",
    "channel",
    "kappa",
    "array_len_m",
    "vertical_m",
    "subarray_size",
    "trim_threshold",
    "secondary_size",
    "mode",
    "iters",
    "damping",
    "snr_db_list",
    "trials",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Iid,
    Corr,
    NonStat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Full,
    Trimmed,
    Hier,
    OneShot,
    LocalEp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub qam: usize,
    pub channel: ChannelKind,
    pub kappa: f64,
    pub array_len_m: f64,
    pub vertical_m: f64,
    pub subarray_sizes: Vec<usize>,
    pub trim_threshold: Option<f64>,
    pub secondary_size: Option<usize>,
    pub mode: ModeKind,
    /// Reported iterations; the last one is the iteration budget.
    pub iters: Vec<usize>,
    pub damping: f64,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

struct Entry {
    line: usize,
    value: String,
}

struct Parser<'a> {
    origin: &'a str,
    entries: BTreeMap<String, Entry>,
}

impl Parser<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> SimError {
        SimError::Config {
            path: self.origin.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn scalar<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .parse()
            .map(Some)
            .map_err(|_| self.err(e.line, format!("invalid value `{}` for `{key}`", e.value)))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        let items = e
            .value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| self.err(e.line, format!("invalid list item `{}` for `{key}`", s.trim())))
            })
            .collect::<Result<Vec<T>>>()?;
        Ok(Some(items))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.scalar(key)?
            .ok_or_else(|| self.err(0, format!("missing required key `{key}`")))
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SimError::Config {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut p = Parser {
            origin,
            entries: BTreeMap::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(p.err(line, format!("expected `key = value`, found `{content}`")));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(p.err(line, format!("unknown key `{key}`")));
            }
            if p.entries.contains_key(key) {
                return Err(p.err(line, format!("duplicate key `{key}`")));
            }
            p.entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }

        let channel = match p.scalar::<String>("channel")?.as_deref() {
            None | Some("iid") => ChannelKind::Iid,
            Some("corr") => ChannelKind::Corr,
            Some("nonstat") => ChannelKind::NonStat,
            Some(other) => return Err(p.err(p.line_of("channel"), format!("unknown channel `{other}`"))),
        };
        let mode = match p.scalar::<String>("mode")?.as_deref() {
            None | Some("full") => ModeKind::Full,
            Some("trimmed") => ModeKind::Trimmed,
            Some("hier") => ModeKind::Hier,
            Some("oneshot") => ModeKind::OneShot,
            Some("local_ep") => ModeKind::LocalEp,
            Some(other) => return Err(p.err(p.line_of("mode"), format!("unknown mode `{other}`"))),
        };
        let n: usize = p.required("n")?;
        let trim_threshold = p.scalar("trim_threshold")?;
        let default_iters = match (mode, trim_threshold.is_some()) {
            (ModeKind::OneShot, _) => 1,
            (_, true) => 3,
            (_, false) => 6,
        };
        let cfg = SimConfig {
            n,
            k: p.required("k")?,
            qam: p.scalar("qam")?.unwrap_or(16),
            channel,
            kappa: p.scalar("kappa")?.unwrap_or(0.0),
            array_len_m: p.scalar("array_len_m")?.unwrap_or(ArrayGeometry::default().array_len_m),
            vertical_m: p.scalar("vertical_m")?.unwrap_or(ArrayGeometry::default().vertical_m),
            subarray_sizes: p.list("subarray_size")?.unwrap_or_else(|| vec![n]),
            trim_threshold,
            secondary_size: p.scalar("secondary_size")?,
            mode,
            iters: p.list("iters")?.unwrap_or_else(|| vec![default_iters]),
            damping: p.scalar("damping")?.unwrap_or(1.0),
            snr_db: p
                .list("snr_db_list")?
                .ok_or_else(|| p.err(0, "missing required key `snr_db_list`"))?,
            trials: p.scalar("trials")?.unwrap_or(2000),
            seed: p.scalar("seed")?.unwrap_or(0),
        };
        if (mode == ModeKind::Hier) != cfg.secondary_size.is_some() {
            return Err(p.err(
                p.line_of("secondary_size").max(p.line_of("mode")),
                "`secondary_size` is required by, and only allowed with, mode = hier",
            ));
        }
        if mode == ModeKind::OneShot && cfg.iters != [1] {
            return Err(p.err(p.line_of("iters"), "mode = oneshot runs exactly one iteration"));
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<SystemConfig> {
        let channel_model = match self.channel {
            ChannelKind::Iid => ChannelModel::Iid,
            ChannelKind::Corr => ChannelModel::Correlated { kappa: self.kappa },
            ChannelKind::NonStat => ChannelModel::NonStationary(ArrayGeometry {
                array_len_m: self.array_len_m,
                vertical_m: self.vertical_m,
            }),
        };
        let system = SystemConfig {
            n_antennas: self.n,
            n_users: self.k,
            noise_var: 1.0,
            constellation: make_qam(self.qam)?,
            channel_model,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn detector(&self) -> DetectorConfig {
        let mode = match self.mode {
            ModeKind::Full => Mode::Full,
            ModeKind::Trimmed => Mode::Trimmed,
            ModeKind::Hier => Mode::Hierarchical {
                secondary_size: self.secondary_size.unwrap_or(1),
            },
            ModeKind::OneShot => Mode::OneShot,
            ModeKind::LocalEp => Mode::LocalEpThenMrc,
        };
        DetectorConfig {
            max_iters: self.iters.last().copied().unwrap_or(1),
            damping: self.damping,
            mode,
            ..DetectorConfig::default()
        }
    }

    pub fn run_spec(&self) -> Result<RunSpec> {
        let spec = RunSpec {
            system: self.system()?,
            subarray_sizes: self.subarray_sizes.clone(),
            trim_threshold: self.trim_threshold,
            detector: self.detector(),
            snr_db: self.snr_db.clone(),
            checkpoints: self.iters.clone(),
            n_trials: self.trials,
            base_seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "n = 64\nk = 16\nsnr_db_list = 0, 5\n";

    #[test]
    fn defaults_fill_in() {
        let c = SimConfig::parse(BASE, "t").unwrap();
        assert_eq!(c.qam, 16);
        assert_eq!(c.subarray_sizes, vec![64]);
        assert_eq!(c.iters, vec![6]);
        assert_eq!(c.snr_db, vec![0.0, 5.0]);
        assert_eq!(c.mode, ModeKind::Full);
        c.run_spec().unwrap();
    }

    #[test]
    fn comments_and_lists() {
        let text = format!("# sweep\n{BASE}subarray_size = 2,4 # two sizes\niters = 1, 4, 6\nchannel = corr\nkappa = 0.5\n");
        let c = SimConfig::parse(&text, "t").unwrap();
        assert_eq!(c.subarray_sizes, vec![2, 4]);
        assert_eq!(c.iters, vec![1, 4, 6]);
        assert_eq!(c.channel, ChannelKind::Corr);
        assert_eq!(c.run_spec().unwrap().detector.max_iters, 6);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = SimConfig::parse(&format!("{BASE}snr = 3\n"), "cfg").unwrap_err();
        assert_eq!(err.to_string(), "cfg:4: unknown key `snr`");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        for extra in [
            "n = 32\n",
            "mode = sideways\n",
            "qam = many\n",
            "mode = hier\n",
            "secondary_size = 2\n",
            "just words\n",
            "mode = oneshot\niters = 3\n",
        ] {
            assert!(SimConfig::parse(&format!("{BASE}{extra}"), "t").is_err(), "{extra}");
        }
        assert!(SimConfig::parse("n = 4\nk = 2\n", "t").is_err());
    }

    #[test]
    fn trimmed_defaults_to_three_iterations() {
        let c = SimConfig::parse(&format!("{BASE}mode = trimmed\ntrim_threshold = 0.9\nchannel = nonstat\n"), "t").unwrap();
        assert_eq!(c.iters, vec![3]);
        let spec = c.run_spec().unwrap();
        assert_eq!(spec.trim_threshold, Some(0.9));
    }
}
