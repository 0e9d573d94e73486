//! File formats: JSON for channels, equalizers and sample vectors, CSV for
//! BER curves and cost tables.
//!
//! Complex numbers are `[re, im]` pairs and matrices are lists of rows.
//! Every numeric CSV column with a physical unit carries it in the header.

use serde::{Deserialize, Serialize};

use crate::ber::{BerCurve, ConsistencyReport};
use crate::hwcost::CostRow;
use crate::{Complex, ComplexMatrix, Error, FiniteAlphabetEqualizer, Result};

type Pair = [f64; 2];

fn pair(z: Complex<f64>) -> Pair {
    [z.re, z.im]
}

fn unpair(p: Pair) -> Complex<f64> {
    Complex::new(p[0], p[1])
}

/// Channel file: `H` as `B` rows of `U` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    #[serde(rename = "B")]
    pub antennas: usize,
    #[serde(rename = "U")]
    pub users: usize,
    #[serde(rename = "H")]
    pub h: Vec<Vec<Pair>>,
}

impl ChannelFile {
    pub fn from_matrix(h: &ComplexMatrix) -> Self {
        Self {
            antennas: h.rows(),
            users: h.cols(),
            h: (0..h.rows()).map(|r| h.row(r).iter().map(|&z| pair(z)).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.h.len() != self.antennas || self.h.iter().any(|r| r.len() != self.users) {
            return Err(Error::Malformed(format!(
                "channel must have B={} rows of U={} entries",
                self.antennas, self.users
            )));
        }
        let data = self.h.iter().flatten().map(|&p| unpair(p)).collect();
        ComplexMatrix::from_row_major(self.antennas, self.users, data)
    }
}

pub fn channel_to_json(h: &ComplexMatrix) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ChannelFile::from_matrix(h))?)
}

pub fn channel_from_json(text: &str) -> Result<ComplexMatrix> {
    serde_json::from_str::<ChannelFile>(text)?.to_matrix()
}

/// Equalizer file: `x` holds the `U` vectors `x_u` (so `X^H` row `u` is
/// `conj(x_u)`) and `beta` the per-user scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualizerFile {
    #[serde(rename = "B")]
    pub antennas: usize,
    #[serde(rename = "U")]
    pub users: usize,
    #[serde(rename = "K")]
    pub bits: u32,
    pub x: Vec<Vec<[i32; 2]>>,
    pub beta: Vec<Pair>,
}

impl EqualizerFile {
    pub fn from_equalizer(fae: &FiniteAlphabetEqualizer) -> Self {
        Self {
            antennas: fae.antennas(),
            users: fae.users(),
            bits: fae.bits(),
            x: (0..fae.users())
                .map(|u| fae.x_user(u).iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            beta: fae.beta().iter().map(|&b| pair(b)).collect(),
        }
    }

    pub fn to_equalizer(&self) -> Result<FiniteAlphabetEqualizer> {
        if self.x.len() != self.users || self.beta.len() != self.users {
            return Err(Error::Malformed(format!("expected U={} vectors and scales", self.users)));
        }
        if self.x.iter().any(|r| r.len() != self.antennas) {
            return Err(Error::Malformed(format!("every x_u must have B={} entries", self.antennas)));
        }
        let x: Vec<Vec<Complex<i32>>> = self
            .x
            .iter()
            .map(|r| r.iter().map(|p| Complex::new(p[0], p[1])).collect())
            .collect();
        let beta = self.beta.iter().map(|&p| unpair(p)).collect();
        FiniteAlphabetEqualizer::from_user_vectors(self.bits, &x, beta)
    }
}

pub fn equalizer_to_json(fae: &FiniteAlphabetEqualizer) -> Result<String> {
    Ok(serde_json::to_string_pretty(&EqualizerFile::from_equalizer(fae))?)
}

pub fn equalizer_from_json(text: &str) -> Result<FiniteAlphabetEqualizer> {
    serde_json::from_str::<EqualizerFile>(text)?.to_equalizer()
}

/// Received vectors, each of length `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleFile {
    #[serde(rename = "B")]
    pub antennas: usize,
    pub y: Vec<Vec<Pair>>,
}

impl SampleFile {
    pub fn new(antennas: usize, vectors: &[Vec<Complex<f64>>]) -> Self {
        Self {
            antennas,
            y: vectors.iter().map(|v| v.iter().map(|&z| pair(z)).collect()).collect(),
        }
    }

    pub fn vectors(&self) -> Result<Vec<Vec<Complex<f64>>>> {
        self.y
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if v.len() != self.antennas {
                    return Err(Error::Malformed(format!(
                        "sample vector {i} has {} entries, expected B={}",
                        v.len(),
                        self.antennas
                    )));
                }
                if v.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("sample vector"));
                }
                Ok(v.iter().map(|&p| unpair(p)).collect())
            })
            .collect()
    }
}

fn csv_string<R: Serialize>(records: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Malformed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Malformed(e.to_string()))
}

#[derive(Serialize)]
struct BerRecord {
    #[serde(rename = "snr_dB")]
    snr_db: f64,
    trials: u64,
    bit_errors: u64,
    ber: f64,
    stderr: f64,
}

/// One row per SNR point.
pub fn ber_curve_csv(curve: &BerCurve) -> Result<String> {
    csv_string(curve.points.iter().map(|p| BerRecord {
        snr_db: p.snr_db,
        trials: p.trials,
        bit_errors: p.bit_errors,
        ber: p.ber,
        stderr: p.stderr,
    }))
}

#[derive(Serialize)]
struct ConsistencyRecord {
    #[serde(rename = "snr_dB")]
    snr_db: f64,
    trials: u64,
    bits: u64,
    ber_float: f64,
    ber_bit_exact: f64,
    ber_delta: f64,
    delta_stderr: f64,
    max_rel_deviation: f64,
    rms_rel_deviation: f64,
}

pub fn consistency_csv(report: &ConsistencyReport) -> Result<String> {
    csv_string(report.points.iter().map(|p| ConsistencyRecord {
        snr_db: p.snr_db,
        trials: p.trials,
        bits: p.bits,
        ber_float: p.float.ber,
        ber_bit_exact: p.bit_exact.ber,
        ber_delta: p.ber_delta,
        delta_stderr: p.delta_stderr,
        max_rel_deviation: p.max_rel_deviation,
        rms_rel_deviation: p.rms_rel_deviation,
    }))
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct CostRecord {
    variant: String,
    #[serde(rename = "K")]
    bits: u32,
    #[serde(rename = "L")]
    input_bits: u32,
    #[serde(rename = "M")]
    m: usize,
    target_vectors_per_s: f64,
    instances: u64,
    f_clk_Hz: f64,
    latency_cycles: u64,
    instance_area_mm2: f64,
    instance_power_W: f64,
    total_area_mm2: f64,
    total_power_W: f64,
    achieved_vectors_per_s: f64,
}

/// One row per design point, in the order given.
pub fn cost_table_csv(rows: &[CostRow]) -> Result<String> {
    csv_string(rows.iter().map(|r| CostRecord {
        variant: r.variant.to_string(),
        bits: r.bits,
        input_bits: r.input_bits,
        m: r.m,
        target_vectors_per_s: r.target_vectors_per_s,
        instances: r.cost.instances,
        f_clk_Hz: r.instance.f_clk_hz,
        latency_cycles: r.instance.latency_cycles,
        instance_area_mm2: r.instance.area_mm2,
        instance_power_W: r.instance.power_w,
        total_area_mm2: r.cost.total_area_mm2,
        total_power_W: r.cost.total_power_w,
        achieved_vectors_per_s: r.cost.achieved_throughput,
    }))
}
