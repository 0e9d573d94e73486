//! Resolved subcommand configs, their execution, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use faeq_core::alphabet::quantize_input;
use faeq_core::ber::{
    ber_sweep, curve_label, datapath_consistency, Datapath, EqualizerKind, InputScale, SweepConfig,
};
use faeq_core::bitsim::{mac_equalize, ppac_equalize, ppac_load, BetaMode, MacArrayConfig};
use faeq_core::fame::{fame_fbs_design, flmmse_design, FbsConfig, StepRule};
use faeq_core::hwcost::{explore, reference_calibration, CalibrationSet};
use faeq_core::io::{
    ber_curve_csv, channel_from_json, channel_to_json, consistency_csv, cost_table_csv, equalizer_from_json,
    equalizer_to_json, SampleFile,
};
use faeq_core::selftest::{run_all, SelftestOptions};
use faeq_core::sysmodel::{generate_rayleigh_channel, Modulation};
use faeq_core::ComplexMatrix;

/// Bad command line or config contents; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn write_output(dir: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> anyhow::Result<()> {
    fs::write(dir.join(name), contents).with_context(|| format!("writing {name}"))?;
    outputs.push(name.to_string());
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Flmmse,
    Fame,
}

#[derive(Args, Debug)]
pub struct FbsArgs {
    /// FBS iterations per user.
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Scale/quantize alternations per projection.
    #[arg(long, default_value_t = 3)]
    alternations: usize,
    /// Fixed FBS step size instead of the inverse Lipschitz constant.
    #[arg(long)]
    step: Option<f64>,
}

impl FbsArgs {
    fn resolve(&self) -> FbsConfig {
        FbsConfig {
            max_iters: self.max_iters,
            step: self.step.map_or(StepRule::InverseLipschitz, StepRule::Fixed),
            proj_alternations: self.alternations,
            keep_best: true,
        }
    }
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Channel JSON (`B`, `U`, `H` as rows of [re, im]); without it a
    /// Rayleigh channel is drawn from --seed.
    #[arg(long)]
    channel: Option<PathBuf>,
    /// Antennas (must match the channel file if both are given).
    #[arg(long = "B")]
    antennas: Option<usize>,
    /// Users (must match the channel file if both are given).
    #[arg(long = "U")]
    users: Option<usize>,
    /// Alphabet resolution in bits.
    #[arg(long = "K", default_value_t = 1)]
    bits: u32,
    #[arg(long, value_enum, default_value_t = Method::Fame)]
    method: Method,
    /// Symbol energy.
    #[arg(long, default_value_t = 1.0)]
    es: f64,
    /// Noise variance per antenna.
    #[arg(long, default_value_t = 0.0, conflicts_with = "snr_db")]
    n0: f64,
    /// Es/N0 in dB, instead of --n0.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[command(flatten)]
    fbs: FbsArgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub channel: Option<PathBuf>,
    #[serde(rename = "B")]
    pub antennas: Option<usize>,
    #[serde(rename = "U")]
    pub users: Option<usize>,
    #[serde(rename = "K")]
    pub bits: u32,
    pub method: Method,
    pub es: f64,
    pub n0: f64,
    pub fbs: FbsConfig,
    pub seed: u64,
}

impl DesignArgs {
    pub fn resolve(&self, seed: u64) -> anyhow::Result<DesignConfig> {
        if self.channel.is_none() && (self.antennas.is_none() || self.users.is_none()) {
            return Err(usage("design needs --channel or both --B and --U"));
        }
        let n0 = match self.snr_db {
            Some(snr) => self.es * 10f64.powf(-snr / 10.0),
            None => self.n0,
        };
        Ok(DesignConfig {
            channel: self.channel.clone(),
            antennas: self.antennas,
            users: self.users,
            bits: self.bits,
            method: self.method,
            es: self.es,
            n0,
            fbs: self.fbs.resolve(),
            seed,
        })
    }
}

impl DesignConfig {
    fn execute(&self, dir: &Path) -> anyhow::Result<Outcome> {
        let mut outputs = Vec::new();
        let h: ComplexMatrix = match &self.channel {
            Some(path) => {
                let h = channel_from_json(&read(path)?)?;
                if self.antennas.is_some_and(|b| b != h.rows()) || self.users.is_some_and(|u| u != h.cols()) {
                    return Err(usage(format!(
                        "channel file is {}x{} but --B/--U say {}x{}",
                        h.rows(),
                        h.cols(),
                        self.antennas.unwrap_or(h.rows()),
                        self.users.unwrap_or(h.cols())
                    )));
                }
                h
            }
            None => {
                let (b, u) = (self.antennas.unwrap_or(0), self.users.unwrap_or(0));
                let h = generate_rayleigh_channel(b, u, self.seed)?;
                write_output(dir, "channel.json", &channel_to_json(&h)?, &mut outputs)?;
                h
            }
        };
        let fae = match self.method {
            Method::Flmmse => flmmse_design(&h, self.es, self.n0, self.bits)?,
            Method::Fame => fame_fbs_design(&h, self.es, self.n0, self.bits, &self.fbs)?,
        };
        write_output(dir, "equalizer.json", &equalizer_to_json(&fae)?, &mut outputs)?;
        println!("mse = {:e}", fae.mse(&h, self.es, self.n0)?);
        Ok(Outcome::ok(outputs))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatapathChoice {
    Float,
    Ppac,
    Mac,
}

fn parse_beta_mode(s: &str) -> Result<BetaMode, String> {
    match s.split_once(':') {
        None if s == "float" => Ok(BetaMode::Float),
        Some(("fixed", f)) => f
            .parse()
            .map(BetaMode::Fixed)
            .map_err(|_| format!("bad fraction bits in '{s}'")),
        _ => Err(format!("expected 'float' or 'fixed:F', got '{s}'")),
    }
}

#[derive(Args, Debug)]
pub struct EqualizeArgs {
    /// Equalizer JSON written by `design`.
    #[arg(long)]
    equalizer: PathBuf,
    /// Sample JSON: `B` and `y`, a list of received vectors of [re, im].
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, value_enum, default_value_t = DatapathChoice::Ppac)]
    datapath: DatapathChoice,
    /// Input resolution in bits.
    #[arg(long = "L", default_value_t = 7)]
    input_bits: u32,
    /// MAC units per user.
    #[arg(long = "M", default_value_t = 1)]
    m: usize,
    /// Fixed input quantization step.
    #[arg(long, conflicts_with = "loading")]
    scale: Option<f64>,
    /// Input step as `loading * rms(y) / 2^(L-1)` over all samples.
    #[arg(long, default_value_t = 3.0)]
    loading: f64,
    /// `float` or `fixed:F` for F fractional bits.
    #[arg(long, value_parser = parse_beta_mode, default_value = "float")]
    beta_mode: BetaMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualizeConfig {
    pub equalizer: PathBuf,
    pub samples: PathBuf,
    pub datapath: DatapathChoice,
    #[serde(rename = "L")]
    pub input_bits: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub scale: InputScale,
    pub beta_mode: BetaMode,
}

impl EqualizeArgs {
    pub fn resolve(&self) -> anyhow::Result<EqualizeConfig> {
        Ok(EqualizeConfig {
            equalizer: self.equalizer.clone(),
            samples: self.samples.clone(),
            datapath: self.datapath,
            input_bits: self.input_bits,
            m: self.m,
            scale: match self.scale {
                Some(s) => InputScale::Fixed(s),
                None => InputScale::RmsLoading(self.loading),
            },
            beta_mode: self.beta_mode,
        })
    }
}

#[derive(Serialize)]
struct EqualizeOutput {
    datapath: DatapathChoice,
    #[serde(rename = "L")]
    input_bits: Option<u32>,
    #[serde(rename = "M")]
    m: Option<usize>,
    input_step: Option<f64>,
    cycles_per_vector: Option<u64>,
    total_cycles: Option<u64>,
    s_hat: Vec<Vec<[f64; 2]>>,
}

impl EqualizeConfig {
    fn execute(&self, dir: &Path) -> anyhow::Result<Outcome> {
        let fae = equalizer_from_json(&read(&self.equalizer)?)?;
        let samples: SampleFile = serde_json::from_str(&read(&self.samples)?)
            .with_context(|| format!("parsing {}", self.samples.display()))?;
        if samples.antennas != fae.antennas() {
            bail!("samples have B={} but the equalizer has B={}", samples.antennas, fae.antennas());
        }
        let ys = samples.vectors()?;
        let mut s_hat = Vec::with_capacity(ys.len());
        let mut cycles = None;
        let mut step = None;
        if self.datapath == DatapathChoice::Float {
            let vh = fae.vh();
            for y in &ys {
                s_hat.push(vh.matvec(y)?);
            }
        } else {
            let l = self.input_bits;
            let st = match self.scale {
                InputScale::Fixed(s) => s,
                InputScale::RmsLoading(sigmas) => {
                    let n = (2 * ys.len() * fae.antennas()).max(1) as f64;
                    let rms = (ys.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / n).sqrt();
                    let st = sigmas * rms / (1u64 << (l - 1)) as f64;
                    if st > 0.0 {
                        st
                    } else {
                        1.0
                    }
                }
            };
            step = Some(st);
            let arr = ppac_load(&fae);
            let mac = MacArrayConfig::new(self.m, fae.antennas(), fae.users());
            for y in &ys {
                let (re, im) = quantize_input(y, l, st)?;
                let (s, report) = match self.datapath {
                    DatapathChoice::Ppac => ppac_equalize(&arr, fae.beta(), &re, &im, l, self.beta_mode)?,
                    _ => mac_equalize(&fae, &re, &im, l, mac.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?, self.beta_mode)?,
                };
                cycles = Some(report.cycles);
                s_hat.push(s.into_iter().map(|z| z * st).collect());
            }
        }
        let out = EqualizeOutput {
            datapath: self.datapath,
            input_bits: step.map(|_| self.input_bits),
            m: (self.datapath == DatapathChoice::Mac).then_some(self.m),
            input_step: step,
            cycles_per_vector: cycles,
            total_cycles: cycles.map(|c| c * ys.len() as u64),
            s_hat: s_hat
                .iter()
                .map(|v: &Vec<Complex<f64>>| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        let mut outputs = Vec::new();
        write_output(dir, "equalized.json", &serde_json::to_string_pretty(&out)?, &mut outputs)?;
        Ok(Outcome::ok(outputs))
    }
}

fn parse_equalizer(s: &str) -> Result<EqualizerKind, String> {
    s.parse().map_err(|e: faeq_core::Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct BerArgs {
    #[arg(long = "B", default_value_t = 32)]
    antennas: usize,
    #[arg(long = "U", default_value_t = 4)]
    users: usize,
    /// `qpsk` or `16qam`.
    #[arg(long, default_value = "16qam")]
    modulation: Modulation,
    /// `lmmse`, `flmmse:K` or `fame:K`; repeat or comma-separate for
    /// several curves. L-MMSE always runs on the float datapath.
    #[arg(long, value_delimiter = ',', value_parser = parse_equalizer, default_value = "lmmse")]
    equalizer: Vec<EqualizerKind>,
    #[arg(long, value_enum, default_value_t = DatapathChoice::Float)]
    datapath: DatapathChoice,
    #[arg(long = "L", default_value_t = 7)]
    input_bits: u32,
    #[arg(long = "M", default_value_t = 1)]
    m: usize,
    /// Input step as `loading * rms(y) / 2^(L-1)` per trial.
    #[arg(long, default_value_t = 3.0)]
    loading: f64,
    /// Es/N0 points in dB, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    snr_db: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    min_errors: u64,
    #[arg(long, default_value_t = 10_000)]
    max_trials: u64,
    #[arg(long, default_value_t = 64)]
    vectors_per_trial: usize,
    /// Also compare each bit-exact curve against the float datapath.
    #[arg(long)]
    consistency: bool,
    #[command(flatten)]
    fbs: FbsArgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerConfig {
    pub sweeps: Vec<SweepConfig>,
    #[serde(default)]
    pub consistency: bool,
}

impl BerArgs {
    pub fn resolve(&self, seed: u64) -> anyhow::Result<BerConfig> {
        let datapath = match self.datapath {
            DatapathChoice::Float => Datapath::Float,
            DatapathChoice::Ppac => Datapath::Ppac {
                input_bits: self.input_bits,
                scale: InputScale::RmsLoading(self.loading),
            },
            DatapathChoice::Mac => Datapath::Mac {
                input_bits: self.input_bits,
                scale: InputScale::RmsLoading(self.loading),
                m: self.m,
            },
        };
        let sweeps = self
            .equalizer
            .iter()
            .map(|&eq| {
                let mut cfg = SweepConfig::new(self.antennas, self.users, self.modulation, eq, self.snr_db.clone());
                cfg.datapath = if eq == EqualizerKind::Lmmse { Datapath::Float } else { datapath };
                cfg.min_errors = self.min_errors;
                cfg.max_trials = self.max_trials;
                cfg.vectors_per_trial = self.vectors_per_trial;
                cfg.fbs = self.fbs.resolve();
                cfg.seed = seed;
                cfg
            })
            .collect();
        Ok(BerConfig {
            sweeps,
            consistency: self.consistency,
        })
    }
}

impl BerConfig {
    fn execute(&self, dir: &Path) -> anyhow::Result<Outcome> {
        if self.sweeps.is_empty() {
            return Err(usage("no sweeps configured"));
        }
        let mut outputs = Vec::new();
        for cfg in &self.sweeps {
            let curve = ber_sweep(cfg)?;
            write_output(dir, &format!("ber_{}.csv", curve.label), &ber_curve_csv(&curve)?, &mut outputs)?;
            for p in &curve.points {
                println!("{} snr_dB={} ber={:e} stderr={:e}", curve.label, p.snr_db, p.ber, p.stderr);
            }
            if self.consistency && cfg.datapath != Datapath::Float {
                let report = datapath_consistency(cfg)?;
                write_output(
                    dir,
                    &format!("consistency_{}.csv", curve_label(cfg)),
                    &consistency_csv(&report)?,
                    &mut outputs,
                )?;
            }
        }
        Ok(Outcome::ok(outputs))
    }
}

#[derive(Args, Debug)]
pub struct HwArgs {
    /// Calibration JSON; the built-in reference set when omitted.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Target throughputs in vectors/s, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "2e9")]
    target: Vec<f64>,
    #[arg(long = "K", value_delimiter = ',', default_value = "1,2,3")]
    bits: Vec<u32>,
    #[arg(long = "L", value_delimiter = ',', default_value = "4,7")]
    input_bits: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwConfig {
    pub calibration: Option<PathBuf>,
    pub targets_vectors_per_s: Vec<f64>,
    #[serde(rename = "K")]
    pub bits: Vec<u32>,
    #[serde(rename = "L")]
    pub input_bits: Vec<u32>,
}

impl HwArgs {
    pub fn resolve(&self) -> anyhow::Result<HwConfig> {
        if self.target.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(usage("--target values must be positive"));
        }
        Ok(HwConfig {
            calibration: self.calibration.clone(),
            targets_vectors_per_s: self.target.clone(),
            bits: self.bits.clone(),
            input_bits: self.input_bits.clone(),
        })
    }
}

impl HwConfig {
    fn execute(&self, dir: &Path) -> anyhow::Result<Outcome> {
        let set = match &self.calibration {
            Some(path) => CalibrationSet::from_json(&read(path)?)
                .with_context(|| format!("loading calibration {}", path.display()))?,
            None => reference_calibration(),
        };
        let rows = explore(&set, &self.targets_vectors_per_s, &self.bits, &self.input_bits)?;
        let mut outputs = Vec::new();
        write_output(dir, "hw_cost.csv", &cost_table_csv(&rows)?, &mut outputs)?;
        for r in &rows {
            println!(
                "{} K={} L={} M={}: {} instances, {:.3} mm2, {:.3} W at {:e} vectors/s",
                r.variant,
                r.bits,
                r.input_bits,
                r.m,
                r.cost.instances,
                r.cost.total_area_mm2,
                r.cost.total_power_w,
                r.target_vectors_per_s
            );
        }
        Ok(Outcome::ok(outputs))
    }
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Small sample sizes; exercises the checks without acceptance power.
    #[arg(long)]
    smoke: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestConfig {
    pub options: SelftestOptions,
}

impl SelftestArgs {
    pub fn resolve(&self, seed: Option<u64>) -> SelftestConfig {
        let mut options = if self.smoke {
            SelftestOptions::smoke()
        } else {
            SelftestOptions::default()
        };
        if let Some(seed) = seed {
            options.seed = seed;
        }
        SelftestConfig { options }
    }
}

#[derive(Serialize)]
struct SelftestRecord<'a> {
    id: u32,
    name: &'a str,
    passed: bool,
    summary: &'a str,
}

impl SelftestConfig {
    fn execute(&self, dir: &Path) -> anyhow::Result<Outcome> {
        let results = run_all(&self.options);
        for r in &results {
            println!("{r}");
        }
        // timings are left out so reruns are byte-identical
        let records: Vec<SelftestRecord> = results
            .iter()
            .map(|r| SelftestRecord {
                id: r.id,
                name: r.name,
                passed: r.passed,
                summary: &r.summary,
            })
            .collect();
        let mut outputs = Vec::new();
        write_output(dir, "selftest.json", &serde_json::to_string_pretty(&records)?, &mut outputs)?;
        Ok(Outcome {
            outputs,
            success: results.iter().all(|r| r.passed),
        })
    }
}

pub struct Outcome {
    pub outputs: Vec<String>,
    pub success: bool,
}

impl Outcome {
    fn ok(outputs: Vec<String>) -> Self {
        Self { outputs, success: true }
    }
}

/// A fully resolved invocation.
#[derive(Clone, Debug, PartialEq)]
pub enum Job {
    Design(DesignConfig),
    Equalize(EqualizeConfig),
    Ber(BerConfig),
    Hw(HwConfig),
    Selftest(SelftestConfig),
}

impl Job {
    pub fn command(&self) -> &'static str {
        match self {
            Job::Design(_) => "design",
            Job::Equalize(_) => "equalize",
            Job::Ber(_) => "ber",
            Job::Hw(_) => "hw",
            Job::Selftest(_) => "selftest",
        }
    }

    pub fn from_config(command: &str, config: serde_json::Value) -> anyhow::Result<Self> {
        let bad = |e: serde_json::Error| usage(format!("invalid '{command}' config: {e}"));
        Ok(match command {
            "design" => Job::Design(serde_json::from_value(config).map_err(bad)?),
            "equalize" => Job::Equalize(serde_json::from_value(config).map_err(bad)?),
            "ber" => Job::Ber(serde_json::from_value(config).map_err(bad)?),
            "hw" => Job::Hw(serde_json::from_value(config).map_err(bad)?),
            "selftest" => Job::Selftest(serde_json::from_value(config).map_err(bad)?),
            other => return Err(usage(format!("unknown command '{other}' in config"))),
        })
    }

    pub fn seed(&self) -> u64 {
        match self {
            Job::Design(c) => c.seed,
            Job::Ber(c) => c.sweeps.first().map_or(0, |s| s.seed),
            Job::Selftest(c) => c.options.seed,
            Job::Equalize(_) | Job::Hw(_) => 0,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Job::Design(c) => c.seed = seed,
            Job::Ber(c) => c.sweeps.iter_mut().for_each(|s| s.seed = seed),
            Job::Selftest(c) => c.options.seed = seed,
            Job::Equalize(_) | Job::Hw(_) => {}
        }
    }

    fn config_value(&self) -> serde_json::Result<serde_json::Value> {
        match self {
            Job::Design(c) => serde_json::to_value(c),
            Job::Equalize(c) => serde_json::to_value(c),
            Job::Ber(c) => serde_json::to_value(c),
            Job::Hw(c) => serde_json::to_value(c),
            Job::Selftest(c) => serde_json::to_value(c),
        }
    }

    pub fn execute(&self, dir: &Path) -> anyhow::Result<Outcome> {
        match self {
            Job::Design(c) => c.execute(dir),
            Job::Equalize(c) => c.execute(dir),
            Job::Ber(c) => c.execute(dir),
            Job::Hw(c) => c.execute(dir),
            Job::Selftest(c) => c.execute(dir),
        }
    }
}

/// Written next to every output; `faeq --config <manifest>` replays it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(job: &Job, outputs: Vec<String>) -> anyhow::Result<Self> {
        Ok(Self {
            command: job.command().to_string(),
            config: job.config_value()?,
            seed: job.seed(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
        })
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
