//! Monte-Carlo uncoded bit-error-rate sweeps.
//!
//! Every trial draws a fresh i.i.d. Rayleigh channel, designs the selected
//! equalizer for it and pushes a block of random symbol vectors through the
//! chosen datapath. Trials are seeded by `(seed, snr index, trial index)` and
//! run in fixed-size batches, so results do not depend on the thread count.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::quantize_input;
use crate::bitsim::{mac_equalize, ppac_equalize, ppac_load, BetaMode, MacArrayConfig};
use crate::fame::{fame_fbs_design, flmmse_design, FbsConfig};
use crate::rng::derive_seed;
use crate::sysmodel::{
    complex_gaussian, lmmse_equalizer, random_symbols, rayleigh_from_rng, Constellation, Modulation,
};
use crate::{seeded_rng, ComplexMatrix, Error, FiniteAlphabetEqualizer, Result};

/// Trials evaluated between two checks of the stopping rule.
pub const BATCH_TRIALS: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EqualizerKind {
    Lmmse,
    Flmmse {
        #[serde(rename = "K")]
        bits: u32,
    },
    FameFbs {
        #[serde(rename = "K")]
        bits: u32,
    },
}

impl EqualizerKind {
    pub fn label(&self) -> String {
        match self {
            Self::Lmmse => "lmmse".into(),
            Self::Flmmse { bits } => format!("flmmse_k{bits}"),
            Self::FameFbs { bits } => format!("fame_fbs_k{bits}"),
        }
    }
}

impl std::str::FromStr for EqualizerKind {
    type Err = Error;

    /// `lmmse`, `flmmse:K` or `fame:K`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, bits) = match s.split_once(':') {
            Some((n, k)) => (
                n,
                Some(k.parse::<u32>().map_err(|_| Error::InvalidArgument(format!("bad resolution in '{s}'")))?),
            ),
            None => (s, None),
        };
        match (name.to_ascii_lowercase().as_str(), bits) {
            ("lmmse", None) => Ok(Self::Lmmse),
            ("flmmse", Some(bits)) => Ok(Self::Flmmse { bits }),
            ("fame" | "fame_fbs" | "fame-fbs", Some(bits)) => Ok(Self::FameFbs { bits }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown equalizer '{s}' (expected lmmse, flmmse:K or fame:K)"
            ))),
        }
    }
}

/// How the input quantizer step is chosen for bit-exact datapaths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum InputScale {
    /// `sigmas * rms(y) / 2^(L-1)`, with the rms over the real and
    /// imaginary parts of the trial's received block.
    RmsLoading(f64),
    /// Fixed quantization step.
    Fixed(f64),
}

impl Default for InputScale {
    fn default() -> Self {
        Self::RmsLoading(3.0)
    }
}

impl InputScale {
    fn step(&self, rms: f64, l: u32) -> f64 {
        match *self {
            Self::RmsLoading(sigmas) => sigmas * rms / (1u64 << (l - 1)) as f64,
            Self::Fixed(step) => step,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Datapath {
    Float,
    Ppac {
        #[serde(rename = "L")]
        input_bits: u32,
        #[serde(default)]
        scale: InputScale,
    },
    Mac {
        #[serde(rename = "L")]
        input_bits: u32,
        #[serde(default)]
        scale: InputScale,
        #[serde(rename = "M")]
        m: usize,
    },
}

impl Datapath {
    fn is_bit_exact(&self) -> bool {
        !matches!(self, Self::Float)
    }
}

/// BER sweep parameters. SNR is Es/N0 in dB with Es = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(rename = "B")]
    pub antennas: usize,
    #[serde(rename = "U")]
    pub users: usize,
    pub modulation: Modulation,
    pub equalizer: EqualizerKind,
    pub datapath: Datapath,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_trials")]
    pub max_trials: u64,
    /// Symbol vectors sent through each channel draw.
    #[serde(default = "default_vectors")]
    pub vectors_per_trial: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fbs: FbsConfig,
}

fn default_min_errors() -> u64 {
    200
}

fn default_max_trials() -> u64 {
    10_000
}

fn default_vectors() -> usize {
    64
}

impl SweepConfig {
    pub fn new(antennas: usize, users: usize, modulation: Modulation, equalizer: EqualizerKind, snr_db: Vec<f64>) -> Self {
        Self {
            antennas,
            users,
            modulation,
            equalizer,
            datapath: Datapath::Float,
            snr_db,
            min_errors: default_min_errors(),
            max_trials: default_max_trials(),
            vectors_per_trial: default_vectors(),
            seed: 0,
            fbs: FbsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.antennas < self.users {
            return Err(Error::InvalidDimensions(format!(
                "need B >= U >= 1, got B={}, U={}",
                self.antennas, self.users
            )));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("SNR list must be nonempty and finite".into()));
        }
        if self.min_errors == 0 || self.max_trials == 0 || self.vectors_per_trial == 0 {
            return Err(Error::InvalidArgument(
                "min_errors, max_trials and vectors_per_trial must be at least 1".into(),
            ));
        }
        self.fbs.validate()?;
        if let EqualizerKind::Flmmse { bits } | EqualizerKind::FameFbs { bits } = self.equalizer {
            crate::alphabet::check_alphabet_bits(bits)?;
        }
        match self.datapath {
            Datapath::Float => {}
            Datapath::Ppac { input_bits, scale } | Datapath::Mac { input_bits, scale, .. } => {
                if self.equalizer == EqualizerKind::Lmmse {
                    return Err(Error::InvalidArgument(
                        "bit-exact datapaths need a finite-alphabet equalizer".into(),
                    ));
                }
                crate::alphabet::check_input_bits(input_bits)?;
                let ok = match scale {
                    InputScale::RmsLoading(v) | InputScale::Fixed(v) => v > 0.0 && v.is_finite(),
                };
                if !ok {
                    return Err(Error::InvalidArgument("input scale must be positive".into()));
                }
            }
        }
        if let Datapath::Mac { m, .. } = self.datapath {
            MacArrayConfig::new(m, self.antennas, self.users)?;
        }
        Ok(())
    }

    fn bits_per_trial(&self) -> u64 {
        (self.vectors_per_trial * self.users * Constellation::new(self.modulation).bits_per_symbol) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub stderr: f64,
}

impl BerPoint {
    fn new(snr_db: f64, trials: u64, bits: u64, bit_errors: u64) -> Self {
        let ber = if bits == 0 { 0.0 } else { bit_errors as f64 / bits as f64 };
        Self {
            snr_db,
            trials,
            bits,
            bit_errors,
            ber,
            stderr: binomial_stderr(ber, bits),
        }
    }
}

fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub label: String,
    pub points: Vec<BerPoint>,
}

/// One equalized block from a trial.
struct TrialOutcome {
    bit_errors: Vec<u64>,
    /// Largest per-vector `||s_a - s_b||/||s_b||` between datapath 1 and 0.
    max_rel_dev: f64,
    sum_sq_dev: f64,
    sum_sq_ref: f64,
}

enum Designed {
    Linear(ComplexMatrix),
    Finite(FiniteAlphabetEqualizer),
}

fn design(cfg: &SweepConfig, h: &ComplexMatrix, n0: f64) -> Result<Designed> {
    Ok(match cfg.equalizer {
        EqualizerKind::Lmmse => Designed::Linear(lmmse_equalizer(h, n0)?),
        EqualizerKind::Flmmse { bits } => Designed::Finite(flmmse_design(h, 1.0, n0, bits)?),
        EqualizerKind::FameFbs { bits } => Designed::Finite(fame_fbs_design(h, 1.0, n0, bits, &cfg.fbs)?),
    })
}

fn equalize_block(eq: &Designed, datapath: &Datapath, ys: &[Vec<Complex<f64>>], rms: f64) -> Result<Vec<Vec<Complex<f64>>>> {
    match (eq, datapath) {
        (Designed::Linear(wh), Datapath::Float) => ys.iter().map(|y| wh.matvec(y)).collect(),
        (Designed::Finite(fae), Datapath::Float) => {
            let vh = fae.vh();
            ys.iter().map(|y| vh.matvec(y)).collect()
        }
        (Designed::Finite(fae), Datapath::Ppac { input_bits, scale }) => {
            let arr = ppac_load(fae);
            let step = scale.step(rms, *input_bits);
            ys.iter()
                .map(|y| {
                    let (re, im) = quantize_input(y, *input_bits, step)?;
                    let (s, _) = ppac_equalize(&arr, fae.beta(), &re, &im, *input_bits, BetaMode::Float)?;
                    Ok(s.into_iter().map(|z| z * step).collect())
                })
                .collect()
        }
        (Designed::Finite(fae), Datapath::Mac { input_bits, scale, m }) => {
            let mac = MacArrayConfig::new(*m, fae.antennas(), fae.users())?;
            let step = scale.step(rms, *input_bits);
            ys.iter()
                .map(|y| {
                    let (re, im) = quantize_input(y, *input_bits, step)?;
                    let (s, _) = mac_equalize(fae, &re, &im, *input_bits, &mac, BetaMode::Float)?;
                    Ok(s.into_iter().map(|z| z * step).collect())
                })
                .collect()
        }
        (Designed::Linear(_), _) => Err(Error::InvalidArgument(
            "bit-exact datapaths need a finite-alphabet equalizer".into(),
        )),
    }
}

fn run_trial(cfg: &SweepConfig, constellation: &Constellation, snr_index: usize, trial: u64, datapaths: &[Datapath]) -> Result<TrialOutcome> {
    let mut rng = seeded_rng(derive_seed(cfg.seed, &[snr_index as u64, trial]));
    let n0 = 10f64.powf(-cfg.snr_db[snr_index] / 10.0);
    let h: ComplexMatrix = rayleigh_from_rng(cfg.antennas, cfg.users, &mut rng)?;
    let mut labels = Vec::with_capacity(cfg.vectors_per_trial);
    let mut ys = Vec::with_capacity(cfg.vectors_per_trial);
    let mut energy = 0.0;
    for _ in 0..cfg.vectors_per_trial {
        let (l, s) = random_symbols(&mut rng, constellation, cfg.users, 1.0);
        let mut y = h.matvec(&s)?;
        for yi in &mut y {
            *yi += complex_gaussian(&mut rng, n0);
            energy += yi.norm_sqr();
        }
        labels.push(l);
        ys.push(y);
    }
    let rms = (energy / (2 * cfg.antennas * cfg.vectors_per_trial) as f64).sqrt();
    let eq = design(cfg, &h, n0)?;
    let outputs: Vec<Vec<Vec<Complex<f64>>>> = datapaths
        .iter()
        .map(|dp| equalize_block(&eq, dp, &ys, rms))
        .collect::<Result<_>>()?;
    let bit_errors = outputs
        .iter()
        .map(|shat| {
            shat.iter()
                .zip(&labels)
                .flat_map(|(sv, lv)| sv.iter().zip(lv))
                .map(|(z, &truth)| (constellation.nearest_label(*z) ^ truth).count_ones() as u64)
                .sum()
        })
        .collect();
    let (mut max_rel_dev, mut sum_sq_dev, mut sum_sq_ref) = (0.0f64, 0.0, 0.0);
    if outputs.len() > 1 {
        for (a, b) in outputs[1].iter().zip(&outputs[0]) {
            let dev: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
            let reference: f64 = b.iter().map(|y| y.norm_sqr()).sum();
            if reference > 0.0 {
                max_rel_dev = max_rel_dev.max((dev / reference).sqrt());
            }
            sum_sq_dev += dev;
            sum_sq_ref += reference;
        }
    }
    Ok(TrialOutcome {
        bit_errors,
        max_rel_dev,
        sum_sq_dev,
        sum_sq_ref,
    })
}

/// Counters accumulated over the trials of one SNR point.
struct PointTally {
    trials: u64,
    bit_errors: Vec<u64>,
    max_rel_dev: f64,
    sum_sq_dev: f64,
    sum_sq_ref: f64,
}

fn run_point(cfg: &SweepConfig, snr_index: usize, datapaths: &[Datapath]) -> Result<PointTally> {
    let constellation = Constellation::new(cfg.modulation);
    let mut tally = PointTally {
        trials: 0,
        bit_errors: vec![0; datapaths.len()],
        max_rel_dev: 0.0,
        sum_sq_dev: 0.0,
        sum_sq_ref: 0.0,
    };
    // stop on the reference datapath's count, or the worst of them
    while tally.trials < cfg.max_trials && tally.bit_errors.iter().copied().min().unwrap_or(0) < cfg.min_errors {
        let end = (tally.trials + BATCH_TRIALS).min(cfg.max_trials);
        let outcomes: Vec<TrialOutcome> = (tally.trials..end)
            .into_par_iter()
            .map(|t| run_trial(cfg, &constellation, snr_index, t, datapaths))
            .collect::<Result<_>>()?;
        for o in outcomes {
            for (acc, e) in tally.bit_errors.iter_mut().zip(&o.bit_errors) {
                *acc += e;
            }
            tally.max_rel_dev = tally.max_rel_dev.max(o.max_rel_dev);
            tally.sum_sq_dev += o.sum_sq_dev;
            tally.sum_sq_ref += o.sum_sq_ref;
        }
        tally.trials = end;
    }
    Ok(tally)
}

/// Runs the sweep and returns one point per SNR value.
pub fn ber_sweep(cfg: &SweepConfig) -> Result<BerCurve> {
    cfg.validate()?;
    let per_trial = cfg.bits_per_trial();
    let points = (0..cfg.snr_db.len())
        .map(|i| {
            let t = run_point(cfg, i, &[cfg.datapath])?;
            Ok(BerPoint::new(cfg.snr_db[i], t.trials, t.trials * per_trial, t.bit_errors[0]))
        })
        .collect::<Result<_>>()?;
    Ok(BerCurve {
        label: curve_label(cfg),
        points,
    })
}

pub fn curve_label(cfg: &SweepConfig) -> String {
    let dp = match cfg.datapath {
        Datapath::Float => "float".to_string(),
        Datapath::Ppac { input_bits, .. } => format!("ppac_l{input_bits}"),
        Datapath::Mac { input_bits, m, .. } => format!("mac_l{input_bits}_m{m}"),
    };
    format!("{}_{}", cfg.equalizer.label(), dp)
}

/// Float-versus-bit-exact comparison at one SNR point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bits: u64,
    pub float: BerPoint,
    pub bit_exact: BerPoint,
    /// `BER(bit-exact) - BER(float)`.
    pub ber_delta: f64,
    /// Standard error of the delta, treating the two estimates as independent.
    pub delta_stderr: f64,
    pub max_rel_deviation: f64,
    pub rms_rel_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub label: String,
    pub points: Vec<ConsistencyPoint>,
}

/// Sends identical trials through the float datapath and the configured
/// bit-exact one, reporting the BER difference and the deviation of the
/// equalizer outputs.
pub fn datapath_consistency(cfg: &SweepConfig) -> Result<ConsistencyReport> {
    cfg.validate()?;
    if !cfg.datapath.is_bit_exact() {
        return Err(Error::InvalidArgument("consistency check needs a bit-exact datapath".into()));
    }
    let per_trial = cfg.bits_per_trial();
    let points = (0..cfg.snr_db.len())
        .map(|i| {
            let t = run_point(cfg, i, &[Datapath::Float, cfg.datapath])?;
            let bits = t.trials * per_trial;
            let float = BerPoint::new(cfg.snr_db[i], t.trials, bits, t.bit_errors[0]);
            let bit_exact = BerPoint::new(cfg.snr_db[i], t.trials, bits, t.bit_errors[1]);
            Ok(ConsistencyPoint {
                snr_db: cfg.snr_db[i],
                trials: t.trials,
                bits,
                float,
                bit_exact,
                ber_delta: bit_exact.ber - float.ber,
                delta_stderr: float.stderr.hypot(bit_exact.stderr),
                max_rel_deviation: t.max_rel_dev,
                rms_rel_deviation: if t.sum_sq_ref > 0.0 {
                    (t.sum_sq_dev / t.sum_sq_ref).sqrt()
                } else {
                    0.0
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConsistencyReport {
        label: curve_label(cfg),
        points,
    })
}
