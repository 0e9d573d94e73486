//! Uplink system model: Rayleigh channels, Gray-labelled constellations,
//! L-MMSE equalization and the post-equalization mean-square error.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot_h, norm_sqr, power_iteration, Cholesky};
use crate::{seeded_rng, CMatrix, CVector, Error, Real, Result};

/// Condition number above which the Gram matrix is reported as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e8;

/// Antenna/user counts and the symbol and noise energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UplinkScenario {
    pub b: usize,
    pub u: usize,
    pub es: f64,
    pub n0: f64,
}

impl UplinkScenario {
    pub fn new(b: usize, u: usize, es: f64, n0: f64) -> Result<Self> {
        check_dims(b, u)?;
        if !(es > 0.0) || !es.is_finite() {
            return Err(Error::InvalidArgument(format!("Es must be positive, got {es}")));
        }
        if !(n0 >= 0.0) || !n0.is_finite() {
            return Err(Error::InvalidArgument(format!("N0 must be nonnegative, got {n0}")));
        }
        Ok(Self { b, u, es, n0 })
    }

    /// Builds the scenario for an SNR given as Es/N0 in dB.
    pub fn from_snr_db(b: usize, u: usize, es: f64, snr_db: f64) -> Result<Self> {
        Self::new(b, u, es, es / 10f64.powf(snr_db / 10.0))
    }

    /// Regularization `rho = N0 / Es`.
    pub fn rho(&self) -> f64 {
        self.n0 / self.es
    }
}

fn check_dims(b: usize, u: usize) -> Result<()> {
    if u == 0 || b < u {
        return Err(Error::InvalidDimensions(format!("need B >= U >= 1, got B={b}, U={u}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl std::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Self::Qpsk),
            "16qam" | "qam16" | "16-qam" => Ok(Self::Qam16),
            other => Err(Error::InvalidArgument(format!("unknown constellation '{other}'"))),
        }
    }
}

/// Square QAM constellation with Gray labels and unit mean energy.
///
/// `points[label]` is the point carrying `label`; the upper half of the
/// label bits selects the in-phase level and the lower half the quadrature
/// level, each Gray coded along its axis.
#[derive(Clone, Debug)]
pub struct Constellation {
    pub modulation: Modulation,
    pub points: Vec<Complex<f64>>,
    pub bits_per_symbol: usize,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let bits_per_axis = match modulation {
            Modulation::Qpsk => 1,
            Modulation::Qam16 => 2,
        };
        let levels = 1usize << bits_per_axis;
        // mean energy of the odd-integer grid per axis is (levels^2 - 1) / 3
        let norm = (2.0 * ((levels * levels - 1) as f64) / 3.0).sqrt();
        let level = |gray: usize| {
            let idx = gray_to_binary(gray);
            (2.0 * idx as f64 - (levels - 1) as f64) / norm
        };
        let points = (0..levels * levels)
            .map(|label| {
                let i = label >> bits_per_axis;
                let q = label & (levels - 1);
                Complex::new(level(i), level(q))
            })
            .collect();
        Self {
            modulation,
            points,
            bits_per_symbol: 2 * bits_per_axis,
        }
    }

    pub fn qpsk() -> Self {
        Self::new(Modulation::Qpsk)
    }

    pub fn qam16() -> Self {
        Self::new(Modulation::Qam16)
    }

    /// Mean symbol energy (1 by construction).
    pub fn es(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Label of the nearest point; equal distances resolve to the smaller
    /// label.
    pub fn nearest_label(&self, z: Complex<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best = label;
                best_d = d;
            }
        }
        best
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// Maps bits (MSB first within each symbol) to constellation points.
pub fn modulate(bits: &[u8], c: &Constellation) -> Result<Vec<Complex<f64>>> {
    if bits.len() % c.bits_per_symbol != 0 {
        return Err(Error::Malformed(format!(
            "{} bits is not a multiple of {} bits per symbol",
            bits.len(),
            c.bits_per_symbol
        )));
    }
    bits.chunks(c.bits_per_symbol)
        .map(|chunk| {
            let mut label = 0usize;
            for &b in chunk {
                if b > 1 {
                    return Err(Error::Malformed(format!("bit value {b}")));
                }
                label = (label << 1) | b as usize;
            }
            Ok(c.points[label])
        })
        .collect()
}

/// Hard decision: nearest-point label bits for every estimate.
pub fn detect<T: Real>(shat: &[Complex<T>], c: &Constellation) -> Vec<u8> {
    let mut out = Vec::with_capacity(shat.len() * c.bits_per_symbol);
    for z in shat {
        let label = c.nearest_label(Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()));
        for k in (0..c.bits_per_symbol).rev() {
            out.push(((label >> k) & 1) as u8);
        }
    }
    out
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex<f64> {
    let sd = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(sd * re, sd * im)
}

/// B x U matrix of i.i.d. CN(0, 1) entries, reproducible from `seed`.
pub fn generate_rayleigh_channel<T: Real>(b: usize, u: usize, seed: u64) -> Result<CMatrix<T>> {
    check_dims(b, u)?;
    let mut rng = seeded_rng(seed);
    rayleigh_from_rng(b, u, &mut rng)
}

pub(crate) fn rayleigh_from_rng<T: Real, R: Rng>(b: usize, u: usize, rng: &mut R) -> Result<CMatrix<T>> {
    CMatrix::from_fn(b, u, |_, _| {
        let z = complex_gaussian(rng, 1.0);
        Complex::new(T::of(z.re), T::of(z.im))
    })
}

/// `y = H s + n` with `n` i.i.d. CN(0, N0); exact `H s` when `N0 = 0`.
pub fn simulate_uplink<T: Real>(h: &CMatrix<T>, s: &[Complex<T>], n0: f64, seed: u64) -> Result<CVector<T>> {
    let mut rng = seeded_rng(seed);
    simulate_uplink_rng(h, s, n0, &mut rng)
}

pub(crate) fn simulate_uplink_rng<T: Real, R: Rng>(
    h: &CMatrix<T>,
    s: &[Complex<T>],
    n0: f64,
    rng: &mut R,
) -> Result<CVector<T>> {
    if !(n0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("N0 must be nonnegative, got {n0}")));
    }
    let mut y = h.matvec(s)?;
    if n0 > 0.0 {
        for yi in &mut y {
            let n = complex_gaussian(rng, n0);
            *yi += Complex::new(T::of(n.re), T::of(n.im));
        }
    }
    Ok(y)
}

/// `W^H = (H^H H + rho I)^{-1} H^H`.
pub fn lmmse_equalizer<T: Real>(h: &CMatrix<T>, rho: T) -> Result<CMatrix<T>> {
    if !(rho >= T::zero()) {
        return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {rho}")));
    }
    let hh = h.hermitian();
    let mut gram = hh.matmul(h)?;
    for i in 0..gram.rows() {
        gram[(i, i)].re += rho;
    }
    let chol = Cholesky::new(&gram)?;
    let cond = gram_condition(&gram, &chol);
    if cond > CONDITION_WARN {
        log::warn!("L-MMSE Gram matrix is ill-conditioned (condition {cond:.3e})");
    }
    Ok(chol.solve(&hh))
}

/// `lambda_max / lambda_min` of a factored Gram matrix, by power iteration
/// on the matrix and on its inverse.
fn gram_condition<T: Real>(gram: &CMatrix<T>, chol: &Cholesky<T>) -> f64 {
    let lmax = power_iteration(gram, 50, T::of(1e-6)).to_f64_lossy();
    let n = gram.rows();
    let mut v: CVector<T> = (0..n).map(|i| Complex::new(T::one(), T::of(i as f64 * 1e-3))).collect();
    let mut inv_max = T::zero();
    for _ in 0..50 {
        let nv = norm_sqr(&v).sqrt();
        v.iter_mut().for_each(|z| *z = *z / nv);
        let w = chol.solve_vec(&v);
        let next = dot_h(&v, &w).re;
        v = w;
        let done = (next - inv_max).abs() <= T::of(1e-6) * next.abs();
        inv_max = next;
        if done {
            break;
        }
    }
    lmax * inv_max.to_f64_lossy()
}

/// `s_hat = W^H y`.
pub fn apply_equalizer<T: Real>(wh: &CMatrix<T>, y: &[Complex<T>]) -> Result<CVector<T>> {
    wh.matvec(y)
}

/// Closed-form MSE `sum_u Es ||H^H v_u - e_u||^2 + N0 ||v_u||^2`, where
/// `v_u^H` is row `u` of `V^H`.
pub fn mse_closed_form<T: Real>(vh: &CMatrix<T>, h: &CMatrix<T>, es: f64, n0: f64) -> Result<T> {
    if vh.cols() != h.rows() || vh.rows() != h.cols() {
        return Err(Error::InvalidDimensions(format!(
            "V^H is {}x{} but H is {}x{}",
            vh.rows(),
            vh.cols(),
            h.rows(),
            h.cols()
        )));
    }
    let mut total = T::zero();
    for u in 0..vh.rows() {
        let v: CVector<T> = vh.row(u).iter().map(|z| z.conj()).collect();
        total += per_user_mse(&v, h, u, es, n0)?;
    }
    Ok(total)
}

/// Per-user objective `Es ||H^H v - e_u||^2 + N0 ||v||^2`.
pub fn per_user_mse<T: Real>(v: &[Complex<T>], h: &CMatrix<T>, u: usize, es: f64, n0: f64) -> Result<T> {
    let mut a = h.hermitian_matvec(v)?;
    if u >= a.len() {
        return Err(Error::InvalidArgument(format!("user index {u} out of range")));
    }
    a[u].re -= T::one();
    Ok(T::of(es) * norm_sqr(&a) + T::of(n0) * norm_sqr(v))
}

/// Empirical MSE with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Averages `||V^H y - s||^2` over uniformly drawn symbols and noise.
pub fn mse_monte_carlo<T: Real>(
    vh: &CMatrix<T>,
    h: &CMatrix<T>,
    es: f64,
    n0: f64,
    constellation: &Constellation,
    trials: usize,
    seed: u64,
) -> Result<MseEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if vh.cols() != h.rows() || vh.rows() != h.cols() {
        return Err(Error::InvalidDimensions("V^H and H shapes disagree".into()));
    }
    let mut rng = seeded_rng(seed);
    let amp = es.sqrt();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let s: CVector<T> = (0..h.cols())
            .map(|_| {
                let p = constellation.points[rng.gen_range(0..constellation.len())] * amp;
                Complex::new(T::of(p.re), T::of(p.im))
            })
            .collect();
        let y = simulate_uplink_rng(h, &s, n0, &mut rng)?;
        let shat = vh.matvec(&y)?;
        let err: f64 = shat
            .iter()
            .zip(&s)
            .map(|(a, b)| (*a - *b).norm_sqr().to_f64_lossy())
            .sum();
        sum += err;
        sum_sq += err * err;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MseEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials,
    })
}

/// Draws `count` uniform symbols, returning their labels and points scaled
/// to energy `es`.
pub(crate) fn random_symbols<R: Rng>(
    rng: &mut R,
    constellation: &Constellation,
    count: usize,
    es: f64,
) -> (Vec<usize>, Vec<Complex<f64>>) {
    let amp = es.sqrt();
    (0..count)
        .map(|_| {
            let label = rng.gen_range(0..constellation.len());
            (label, constellation.points[label] * amp)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ComplexMatrix;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn channel_is_deterministic_and_unit_variance() {
        let a: ComplexMatrix = generate_rayleigh_channel(1, 1, 42).unwrap();
        let b: ComplexMatrix = generate_rayleigh_channel(1, 1, 42).unwrap();
        assert_eq!(a, b);
        let h: ComplexMatrix = generate_rayleigh_channel(256, 16, 1).unwrap();
        let mean = h.frobenius_norm_sqr() / 4096.0;
        assert!((mean - 1.0).abs() < 0.05, "mean |h|^2 = {mean}");
        assert!(generate_rayleigh_channel::<f64>(2, 3, 0).is_err());
    }

    #[test]
    fn noiseless_uplink_is_exact() {
        let h = ComplexMatrix::identity(2);
        let y = simulate_uplink(&h, &[c(1.0, 0.0), c(-1.0, 0.0)], 0.0, 3).unwrap();
        assert_eq!(y, vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        let y1 = simulate_uplink(&h, &[c(1.0, 0.0), c(0.0, 0.0)], 0.5, 9).unwrap();
        let y2 = simulate_uplink(&h, &[c(1.0, 0.0), c(0.0, 0.0)], 0.5, 9).unwrap();
        assert_eq!(y1, y2);
        assert!(simulate_uplink(&h, &[c(1.0, 0.0)], 0.0, 0).is_err());
    }

    #[test]
    fn noise_only_uplink_has_requested_variance() {
        let h = ComplexMatrix::zeros(4, 1);
        let mut rng = seeded_rng(11);
        let mut acc = 0.0;
        let draws = 25_000;
        for _ in 0..draws {
            let y = simulate_uplink_rng(&h, &[c(1.0, 1.0)], 1.0, &mut rng).unwrap();
            acc += norm_sqr(&y);
        }
        let var = acc / (4.0 * draws as f64);
        // 1e5 unit-variance complex samples: standard error ~0.003
        assert!((var - 1.0).abs() < 0.015, "variance {var}");
    }

    #[test]
    fn lmmse_identity_cases() {
        let w = lmmse_equalizer(&ComplexMatrix::identity(3), 0.0).unwrap();
        assert!(w.sub(&ComplexMatrix::identity(3)).unwrap().frobenius_norm() < 1e-14);
        let w = lmmse_equalizer(&ComplexMatrix::identity(2), 1.0).unwrap();
        let half = ComplexMatrix::identity(2).scale(c(0.5, 0.0));
        assert!(w.sub(&half).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn lmmse_residual_on_random_channel() {
        let h: ComplexMatrix = generate_rayleigh_channel(12, 5, 77).unwrap();
        let rho = 0.3;
        let w = lmmse_equalizer(&h, rho).unwrap();
        let hh = h.hermitian();
        let mut gram = hh.matmul(&h).unwrap();
        for i in 0..5 {
            gram[(i, i)].re += rho;
        }
        let resid = gram.matmul(&w).unwrap().sub(&hh).unwrap().frobenius_norm();
        assert!(resid <= 1e-10 * hh.frobenius_norm(), "residual {resid}");
    }

    #[test]
    fn lmmse_rank_deficient_rejected() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]]).unwrap();
        assert!(matches!(lmmse_equalizer(&h, 0.0), Err(Error::Singular { .. })));
        assert!(lmmse_equalizer(&h, 0.1).is_ok());
    }

    #[test]
    fn apply_equalizer_examples() {
        let wh = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)]]).unwrap();
        assert_eq!(apply_equalizer(&wh, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap(), vec![c(1.0, 1.0)]);
        let id = ComplexMatrix::identity(2);
        let y = vec![c(0.2, -1.0), c(3.0, 0.5)];
        assert_eq!(apply_equalizer(&id, &y).unwrap(), y);
        assert_eq!(apply_equalizer(&id, &[c(0.0, 0.0); 2]).unwrap(), vec![c(0.0, 0.0); 2]);
    }

    #[test]
    fn closed_form_mse_examples() {
        let id = ComplexMatrix::identity(2);
        assert_eq!(mse_closed_form(&id, &id, 1.0, 0.0).unwrap(), 0.0);
        let half = id.scale(c(0.5, 0.0));
        assert!((mse_closed_form(&half, &id, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(mse_closed_form(&ComplexMatrix::identity(3), &id, 1.0, 0.0).is_err());
    }

    #[test]
    fn monte_carlo_exact_inverse_is_zero() {
        let h: ComplexMatrix = generate_rayleigh_channel(4, 4, 5).unwrap();
        let w = lmmse_equalizer(&h, 0.0).unwrap();
        let est = mse_monte_carlo(&w, &h, 1.0, 0.0, &Constellation::qpsk(), 200, 1).unwrap();
        assert!(est.mean < 1e-20);
        let again = mse_monte_carlo(&w, &h, 1.0, 0.0, &Constellation::qpsk(), 200, 1).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn constellations_are_normalized_gray() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            assert!((c.es() - 1.0).abs() < 1e-15);
            // adjacent points along an axis differ in exactly one label bit
            let spacing = c
                .points
                .iter()
                .flat_map(|p| c.points.iter().map(move |q| (p - q).norm()))
                .filter(|&d| d > 1e-12)
                .fold(f64::INFINITY, f64::min);
            for (a, p) in c.points.iter().enumerate() {
                for (b, q) in c.points.iter().enumerate() {
                    if ((p - q).norm() - spacing).abs() < 1e-12 {
                        assert_eq!((a ^ b).count_ones(), 1, "labels {a} and {b}");
                    }
                }
            }
        }
        let q16 = Constellation::qam16();
        let s10 = 10f64.sqrt();
        for p in &q16.points {
            for v in [p.re, p.im] {
                let m = (v * s10).abs();
                assert!((m - 1.0).abs() < 1e-12 || (m - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn modulate_detect_round_trip() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            let bits: Vec<u8> = (0..c.len())
                .flat_map(|label| (0..c.bits_per_symbol).rev().map(move |k| ((label >> k) & 1) as u8))
                .collect();
            let x = modulate(&bits, &c).unwrap();
            assert_eq!(detect(&x, &c), bits);
        }
        assert!(modulate(&[1, 0, 1], &Constellation::qpsk()).is_err());
    }

    #[test]
    fn qpsk_nearest_point() {
        let q = Constellation::qpsk();
        let bits = detect(&[c(0.9, 0.8)], &q);
        let target = c(1.0, 1.0) / 2f64.sqrt();
        let label = bits.iter().fold(0usize, |l, &b| (l << 1) | b as usize);
        assert!((q.points[label] - target).norm() < 1e-12);
    }

    #[test]
    fn detection_tie_goes_to_smaller_label() {
        let q = Constellation::qpsk();
        assert_eq!(detect(&[c(0.0, 0.0)], &q), vec![0, 0]);
    }
}
