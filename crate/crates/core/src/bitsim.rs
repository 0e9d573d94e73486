//! Bit-exact emulation of the finite-alphabet matrix-vector datapaths.
//!
//! Three datapaths compute `X^H y` for `L`-bit two's-complement `y`:
//!
//! - the bit-serial processing-in-memory array ([`PpacArray`]): XNOR
//!   bit-cells with a popcount row ALU, one input bit-plane per cycle;
//! - the original MAC array (one complex MAC per user, `B` cycles);
//! - the optimized MAC array (`M` MACs per user plus an adder-tree
//!   reduction, `B/M + log2 M` cycles).
//!
//! All three produce the same integers; the per-user `beta^*` scaling is
//! shared, so the complex outputs agree bit for bit.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::alphabet::{bitplane_encode, check_input_bits, input_range, FixedPointVector};
use crate::fame::FiniteAlphabetEqualizer;
use crate::{CVector, Error, Real, Result};

const WORD: usize = 64;

/// Which datapath produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "arch")]
pub enum Architecture {
    Ppac,
    Mac { m: usize },
}

/// Steady-state cycles per matrix-vector product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycles: u64,
    #[serde(flatten)]
    pub arch: Architecture,
}

/// One array row of bipolar cells (stored bit `1` means `+1`) with its
/// zero count, fixed at load time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipolarRow {
    words: Vec<u64>,
    len: usize,
    zero_count: u32,
}

impl BipolarRow {
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let mut words = vec![0u64; signs.len().div_ceil(WORD).max(1)];
        let mut zero_count = 0;
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => words[i / WORD] |= 1u64 << (i % WORD),
                -1 => zero_count += 1,
                other => return Err(Error::Malformed(format!("bipolar cell value {other}"))),
            }
        }
        Ok(Self {
            words,
            len: signs.len(),
            zero_count,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn zero_count(&self) -> u32 {
        self.zero_count
    }

    pub fn bit(&self, col: usize) -> u8 {
        ((self.words[col / WORD] >> (col % WORD)) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|c| self.bit(c)).collect()
    }

    /// Popcount of XNOR(stored, input) minus the zero count.
    fn dot_packed(&self, input: &[u64]) -> i64 {
        let matches: u32 = self
            .words
            .iter()
            .zip(input)
            .enumerate()
            .map(|(w, (&s, &b))| (!(s ^ b) & tail_mask(self.len, w)).count_ones())
            .sum();
        matches as i64 - self.zero_count as i64
    }
}

fn tail_mask(len: usize, word: usize) -> u64 {
    let used = len.saturating_sub(word * WORD);
    if used >= WORD {
        u64::MAX
    } else {
        (1u64 << used) - 1
    }
}

/// Bit-cell array storing the real-valued decomposition
/// `[[Re X^H, -Im X^H], [Im X^H, Re X^H]]` one bipolar bit-plane per row.
///
/// Row `r * K + k` holds significance `k` of output `r` (`r < U` real
/// parts, `r >= U` imaginary parts).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PpacArray {
    users: usize,
    antennas: usize,
    bits: u32,
    rows: Vec<BipolarRow>,
}

impl PpacArray {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `2 K U`.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// `2 B`.
    pub fn n_cols(&self) -> usize {
        2 * self.antennas
    }

    pub fn row_index(&self, output: usize, significance: u32) -> usize {
        output * self.bits as usize + significance as usize
    }

    pub fn row(&self, row: usize) -> &BipolarRow {
        &self.rows[row]
    }

    pub fn zero_count(&self, row: usize) -> u32 {
        self.rows[row].zero_count
    }

    pub fn bit(&self, row: usize, col: usize) -> u8 {
        self.rows[row].bit(col)
    }

    pub fn row_bits(&self, row: usize) -> Vec<u8> {
        self.rows[row].bits()
    }

    /// Entry `(output, col)` of the stored real matrix, decoded from its
    /// bit-planes.
    pub fn stored_value(&self, output: usize, col: usize) -> i32 {
        (0..self.bits)
            .map(|k| {
                let c = if self.bit(self.row_index(output, k), col) == 1 { 1 } else { -1 };
                (1i32 << k) * c
            })
            .sum()
    }

    fn words_per_row(&self) -> usize {
        self.n_cols().div_ceil(WORD).max(1)
    }
}

/// Real-valued decomposition entry `(r, c)` of `X^H`.
fn real_decomposition(fae: &FiniteAlphabetEqualizer<impl Real>, r: usize, c: usize) -> i32 {
    let (u, b) = (fae.users(), fae.antennas());
    let (ur, re_half) = if r < u { (r, true) } else { (r - u, false) };
    let (bc, left) = if c < b { (c, true) } else { (c - b, false) };
    let x = fae.xh(ur, bc);
    match (re_half, left) {
        (true, true) => x.re,
        (true, false) => -x.im,
        (false, true) => x.im,
        (false, false) => x.re,
    }
}

/// Writes the real-valued decomposition of `X^H` into bit-plane rows.
pub fn ppac_load(fae: &FiniteAlphabetEqualizer<impl Real>) -> PpacArray {
    let (users, antennas, bits) = (fae.users(), fae.antennas(), fae.bits());
    let n_cols = 2 * antennas;
    let mut rows = Vec::with_capacity(2 * bits as usize * users);
    for r in 0..2 * users {
        let planes: Vec<Vec<i8>> = (0..n_cols)
            .map(|c| {
                bitplane_encode(real_decomposition(fae, r, c), bits)
                    .expect("equalizer entries are alphabet members")
                    .signs()
                    .to_vec()
            })
            .collect();
        for k in 0..bits as usize {
            let signs: Vec<i8> = planes.iter().map(|p| p[k]).collect();
            rows.push(BipolarRow::from_signs(&signs).expect("signs are +-1"));
        }
    }
    PpacArray {
        users,
        antennas,
        bits,
        rows,
    }
}

fn pack_bits(bits: &[u8], words: usize) -> Vec<u64> {
    let mut out = vec![0u64; words];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            out[i / WORD] |= 1u64 << (i % WORD);
        }
    }
    out
}

/// Inner product of a stored bipolar row with 0/1 `input` bits.
pub fn ppac_row_op(row: &BipolarRow, input: &[u8]) -> Result<i64> {
    if input.len() != row.len() {
        return Err(Error::DimensionMismatch {
            expected: row.len(),
            got: input.len(),
            context: "row input bits",
        });
    }
    if let Some(&b) = input.iter().find(|&&b| b > 1) {
        return Err(Error::Malformed(format!("input bit value {b}")));
    }
    Ok(row.dot_packed(&pack_bits(input, row.words.len())))
}

/// Result of a bit-serial matrix-vector product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PpacOutput {
    /// `X^T_R y_R`: entries `0..U` are real parts, `U..2U` imaginary parts.
    pub values: Vec<i64>,
    /// Accumulator contents after each cycle, most significant plane first.
    pub trace: Vec<Vec<i64>>,
    pub cycles: CycleReport,
}

impl PpacOutput {
    pub fn as_complex(&self) -> Vec<Complex<i64>> {
        let u = self.values.len() / 2;
        (0..u).map(|i| Complex::new(self.values[i], self.values[i + u])).collect()
    }
}

fn check_input(y_re: &FixedPointVector, y_im: &FixedPointVector, antennas: usize, l: u32) -> Result<()> {
    check_input_bits(l)?;
    for v in [y_re, y_im] {
        if v.len() != antennas {
            return Err(Error::DimensionMismatch {
                expected: antennas,
                got: v.len(),
                context: "input vector length",
            });
        }
    }
    let (lo, hi) = input_range(l);
    if let Some(&e) = y_re.entries().iter().chain(y_im.entries()).find(|&&e| e < lo || e > hi) {
        return Err(Error::InvalidArgument(format!("input {e} does not fit in {l} bits")));
    }
    Ok(())
}

/// Bound `(2^K - 1) 2B 2^(L-1)` on the accumulator must stay inside `i64`.
fn check_accumulator(bits: u32, antennas: usize, l: u32) -> Result<()> {
    let bound = ((1u128 << bits) - 1) * 2 * antennas as u128 * (1u128 << (l - 1));
    if bound > i64::MAX as u128 {
        return Err(Error::InvalidArgument(format!(
            "accumulator bound {bound} exceeds 64 bits (K={bits}, B={antennas}, L={l})"
        )));
    }
    Ok(())
}

/// Bit-serial product `X^T_R y_R` over `L` cycles.
///
/// Cycle `l = L-1 .. 0` applies bit-plane `l` of `[Re y; Im y]` to every
/// row, combines the `K` rows of each output as `sum_k 2^k q_k`, and
/// updates `acc <- 2 acc + q` (the sign plane enters negated).
pub fn ppac_mvp(arr: &PpacArray, y_re: &FixedPointVector, y_im: &FixedPointVector, l: u32) -> Result<PpacOutput> {
    check_input(y_re, y_im, arr.antennas, l)?;
    check_accumulator(arr.bits, arr.antennas, l)?;
    let outputs = 2 * arr.users;
    let mut acc = vec![0i64; outputs];
    let mut trace = Vec::with_capacity(l as usize);
    let mut plane = vec![0u8; arr.n_cols()];
    for bit in (0..l).rev() {
        for (slot, &e) in plane.iter_mut().zip(y_re.entries().iter().chain(y_im.entries())) {
            *slot = ((e >> bit) & 1) as u8;
        }
        let packed = pack_bits(&plane, arr.words_per_row());
        for (r, a) in acc.iter_mut().enumerate() {
            let q: i64 = (0..arr.bits)
                .map(|k| arr.rows[arr.row_index(r, k)].dot_packed(&packed) << k)
                .sum();
            *a = if bit + 1 == l { -q } else { 2 * *a + q };
        }
        trace.push(acc.clone());
    }
    Ok(PpacOutput {
        values: acc,
        trace,
        cycles: CycleReport {
            cycles: l as u64,
            arch: Architecture::Ppac,
        },
    })
}

/// Precision of the per-user `beta^*` multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "frac_bits")]
pub enum BetaMode {
    /// Double-precision multiply.
    Float,
    /// `beta^*` as a mantissa with `F` fractional bits and a per-user
    /// power-of-two exponent; the integer product is truncated (floored)
    /// to `F` fractional bits of the output.
    Fixed(u32),
}

/// `beta_u^* z_u` for integer `z` under the chosen multiplier precision.
pub fn scale_by_beta<T: Real>(z: &[Complex<i64>], beta: &[Complex<T>], mode: BetaMode) -> Result<CVector<T>> {
    if z.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: z.len(),
            context: "beta entries",
        });
    }
    z.iter()
        .zip(beta)
        .map(|(&zi, &b)| match mode {
            BetaMode::Float => Ok(b.conj() * Complex::new(T::of(zi.re as f64), T::of(zi.im as f64))),
            BetaMode::Fixed(frac) => fixed_beta_product(zi, b.conj(), frac),
        })
        .collect()
}

fn fixed_beta_product<T: Real>(z: Complex<i64>, b: Complex<T>, frac: u32) -> Result<Complex<T>> {
    if frac == 0 || frac > 40 {
        return Err(Error::InvalidArgument(format!("fixed-point beta needs 1..=40 fractional bits, got {frac}")));
    }
    let (br, bi) = (b.re.to_f64_lossy(), b.im.to_f64_lossy());
    let peak = br.abs().max(bi.abs());
    if peak == 0.0 {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    // peak * 2^-exp lies in [0.5, 1)
    let exp = peak.log2().floor() as i32 + 1;
    let unit = 2f64.powi(frac as i32 - exp);
    let (mr, mi) = ((br * unit).round() as i128, (bi * unit).round() as i128);
    let (zr, zi) = (z.re as i128, z.im as i128);
    // product in units of 2^(exp - frac)
    let (pr, pi) = (mr * zr - mi * zi, mr * zi + mi * zr);
    let shift = |p: i128| if exp >= 0 { p << exp } else { p >> (-exp) };
    let lsb = 2f64.powi(-(frac as i32));
    Ok(Complex::new(T::of(shift(pr) as f64 * lsb), T::of(shift(pi) as f64 * lsb)))
}

/// `diag(beta^*) X^H y` through the bit-serial array.
pub fn ppac_equalize<T: Real>(
    arr: &PpacArray,
    beta: &[Complex<T>],
    y_re: &FixedPointVector,
    y_im: &FixedPointVector,
    l: u32,
    mode: BetaMode,
) -> Result<(CVector<T>, CycleReport)> {
    let out = ppac_mvp(arr, y_re, y_im, l)?;
    Ok((scale_by_beta(&out.as_complex(), beta, mode)?, out.cycles))
}

/// `M` MAC units per user over `B/M`-entry partitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacArrayConfig {
    pub m: usize,
    pub antennas: usize,
    pub users: usize,
}

impl MacArrayConfig {
    pub fn new(m: usize, antennas: usize, users: usize) -> Result<Self> {
        let cfg = Self { m, antennas, users };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || !self.m.is_power_of_two() || self.m > self.antennas || self.antennas % self.m != 0 {
            return Err(Error::InvalidArgument(format!(
                "M={} must be a power of two dividing B={}",
                self.m, self.antennas
            )));
        }
        Ok(())
    }

    /// `B/M + log2 M`.
    pub fn latency(&self) -> u64 {
        mac_latency(self.antennas, self.m)
    }
}

pub fn mac_latency(antennas: usize, m: usize) -> u64 {
    (antennas / m) as u64 + m.trailing_zeros() as u64
}

/// Integer `X^H y` through `M` partitioned complex MACs and an adjacent-pair
/// adder tree.
pub fn mac_mvp_integer(
    fae: &FiniteAlphabetEqualizer<impl Real>,
    y_re: &FixedPointVector,
    y_im: &FixedPointVector,
    l: u32,
    cfg: &MacArrayConfig,
) -> Result<(Vec<Complex<i64>>, CycleReport)> {
    cfg.validate()?;
    if cfg.antennas != fae.antennas() || cfg.users != fae.users() {
        return Err(Error::InvalidArgument(format!(
            "MAC array is {}x{} but equalizer is {}x{}",
            cfg.users,
            cfg.antennas,
            fae.users(),
            fae.antennas()
        )));
    }
    check_input(y_re, y_im, fae.antennas(), l)?;
    let part = cfg.antennas / cfg.m;
    let y: Vec<Complex<i64>> = y_re
        .entries()
        .iter()
        .zip(y_im.entries())
        .map(|(&re, &im)| Complex::new(re, im))
        .collect();
    let z = (0..fae.users())
        .map(|u| {
            let row = fae.xh_row(u);
            let mut partials: Vec<Complex<i64>> = (0..cfg.m)
                .map(|p| {
                    (p * part..(p + 1) * part).fold(Complex::new(0, 0), |acc, b| {
                        let x = Complex::new(row[b].re as i64, row[b].im as i64);
                        acc + x * y[b]
                    })
                })
                .collect();
            while partials.len() > 1 {
                partials = partials.chunks(2).map(|p| p[0] + p[1]).collect();
            }
            partials[0]
        })
        .collect();
    Ok((
        z,
        CycleReport {
            cycles: cfg.latency(),
            arch: Architecture::Mac { m: cfg.m },
        },
    ))
}

/// `diag(beta^*) X^H y` through the MAC array with a double-precision
/// `beta` multiplier.
pub fn mac_mvp<T: Real>(
    fae: &FiniteAlphabetEqualizer<T>,
    y_re: &FixedPointVector,
    y_im: &FixedPointVector,
    l: u32,
    cfg: &MacArrayConfig,
) -> Result<(CVector<T>, CycleReport)> {
    mac_equalize(fae, y_re, y_im, l, cfg, BetaMode::Float)
}

/// [`mac_mvp`] with a selectable `beta` multiplier precision.
pub fn mac_equalize<T: Real>(
    fae: &FiniteAlphabetEqualizer<T>,
    y_re: &FixedPointVector,
    y_im: &FixedPointVector,
    l: u32,
    cfg: &MacArrayConfig,
    mode: BetaMode,
) -> Result<(CVector<T>, CycleReport)> {
    let (z, report) = mac_mvp_integer(fae, y_re, y_im, l, cfg)?;
    Ok((scale_by_beta(&z, fae.beta(), mode)?, report))
}
