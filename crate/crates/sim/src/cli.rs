use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use epdetect_core::analysis::{complexity_count, evolve, ComplexityParams, EigenSpectrum, OpCounts, Scenario};
use epdetect_core::detector::detect;
use epdetect_core::harness::{build_problem, run_sweep, RunSpec};
use epdetect_core::model::{gen_channel, transmit};
use epdetect_core::partition::{partition_uniform, trim};
use epdetect_core::rng::trial_seed;

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::exec::RayonExecutor;
use crate::output::{write_channel, write_evolution, write_metrics, write_trace, DumpFormat};

#[derive(Debug, Parser)]
#[command(name = "epdetect", version, about = "Distributed EP detection experiments")]
pub struct Cli {
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpArg {
    Csv,
    Bin,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo sweep described by a config file; writes metrics CSV.
    Simulate { config: PathBuf },
    /// Predicted per-iteration noise power for one channel draw.
    Evolve {
        config: PathBuf,
        /// SNR in dB; defaults to the first entry of snr_db_list.
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Operation and transfer counts for one detection.
    Complexity {
        #[arg(long)]
        scenario: String,
        /// Antennas per subarray, or all antennas for `centralized`.
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        /// Users served per subarray (trimmed scenarios); defaults to k.
        #[arg(long)]
        kc: Option<u64>,
        /// Number of subarrays.
        #[arg(long, default_value_t = 1)]
        c: u64,
        #[arg(long, default_value_t = 1)]
        t: u64,
        #[arg(long, default_value_t = 16)]
        qam: u64,
    },
    /// Per-iteration trace of a single realization.
    Trace {
        config: PathBuf,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Also write the channel matrix here.
        #[arg(long)]
        dump_channel: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = DumpArg::Csv)]
        dump_format: DumpArg,
        /// Also write the served-user summary of the trimmed model here.
        #[arg(long)]
        partition_summary: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| SimError::io(path, e))
}

fn emit<F>(out: Option<&Path>, stdout: &mut dyn Write, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::result::Result<(), csv::Error>,
{
    let path = out.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    let wrap = |source| SimError::Csv {
        path: path.clone(),
        source,
    };
    match out {
        Some(p) => {
            let mut f = create(p)?;
            write(&mut f).map_err(wrap)
        }
        None => write(stdout).map_err(wrap),
    }
}

/// Loads and validates a config file; inconsistent settings are input errors.
fn load(config: &Path, seed: Option<u64>) -> Result<(SimConfig, RunSpec)> {
    let mut cfg = SimConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let spec = cfg.run_spec().map_err(|e| SimError::Config {
        path: config.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    Ok((cfg, spec))
}

fn executor(threads: usize) -> Result<RayonExecutor> {
    RayonExecutor::new(threads).map_err(|e| SimError::Usage(format!("cannot start {threads} threads: {e}")))
}

fn counts_line(label: &str, c: &OpCounts) -> String {
    format!("{label}: Mult={} Exp={} Trans={}", c.mults, c.exps, c.trans)
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate { config } => {
            let (_, spec) = load(&config, cli.seed)?;
            let rows = run_sweep(&spec, &executor(cli.threads)?)?;
            emit(out, stdout, |w| write_metrics(&rows, w))
        }
        Command::Evolve { config, snr } => {
            let (cfg, spec) = load(&config, cli.seed)?;
            let noise_var = spec.noise_var(snr.unwrap_or(spec.snr_db[0]));
            let channel = gen_channel(&spec.system, trial_seed(spec.base_seed, 0))?;
            let part = partition_uniform(cfg.n, spec.subarray_sizes[0])?;
            let spectra = EigenSpectrum::from_channel(&channel.h, &part)?;
            let state = evolve(&spectra, noise_var, &spec.system.constellation, spec.max_iters())?;
            emit(out, stdout, |w| write_evolution(&state, w))
        }
        Command::Complexity {
            scenario,
            n,
            k,
            kc,
            c,
            t,
            qam,
        } => {
            let scenario: Scenario = scenario.parse().map_err(|e: epdetect_core::Error| SimError::Usage(e.to_string()))?;
            let params = ComplexityParams {
                antennas: n,
                users: k,
                served_users: kc.unwrap_or(k),
                subarrays: c,
                iters: t,
                qam_order: qam,
            };
            let r = complexity_count(scenario, &params).map_err(|e| SimError::Usage(e.to_string()))?;
            let text = format!(
                "scenario: {}\n{}\n{}\n{}\n",
                r.scenario,
                counts_line("lpm", &r.lpm),
                counts_line("cpm", &r.cpm),
                counts_line("total", &r.total())
            );
            match out {
                Some(p) => create(p)?
                    .write_all(text.as_bytes())
                    .map_err(|e| SimError::io(p, e)),
                None => stdout.write_all(text.as_bytes()).map_err(|e| SimError::io("<stdout>", e)),
            }
        }
        Command::Trace {
            config,
            snr,
            trial,
            dump_channel,
            dump_format,
            partition_summary,
        } => {
            let (cfg, spec) = load(&config, cli.seed)?;
            let seed = trial_seed(spec.base_seed, trial);
            let noise_var = spec.noise_var(snr.unwrap_or(spec.snr_db[0]));
            let channel = gen_channel(&spec.system, seed)?;
            let tx = transmit(&channel, &spec.system.constellation, noise_var, seed)?;
            let size = spec.subarray_sizes[0];
            if let Some(path) = dump_channel {
                let format = match dump_format {
                    DumpArg::Csv => DumpFormat::Csv,
                    DumpArg::Bin => DumpFormat::Binary,
                };
                write_channel(&channel.h, format, create(&path)?).map_err(|e| SimError::io(&path, e))?;
            }
            if let Some(path) = partition_summary {
                let threshold = spec.trim_threshold.unwrap_or(1.0);
                let tp = trim(&channel.h, &partition_uniform(cfg.n, size)?, threshold)?;
                create(&path)?
                    .write_all(tp.to_string().as_bytes())
                    .map_err(|e| SimError::io(&path, e))?;
            }
            let problem = build_problem(&channel.h, &tx.y, noise_var, size, spec.trim_threshold)?;
            let exec = executor(cli.threads)?;
            let result = detect(&problem, &spec.system.constellation, &spec.detector, &exec)?;
            emit(out, stdout, |w| write_trace(&result, Some(&tx.x), w))
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
