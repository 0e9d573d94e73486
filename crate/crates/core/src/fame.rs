//! Finite-alphabet equalizer design.
//!
//! An equalizer has the form `V^H = diag(beta^*) X^H`, where `X^H` holds
//! mid-rise alphabet entries and `beta` one complex scale per user. Row `u`
//! of `V^H` is `v_u^H` with `v_u = beta_u x_u`. Every designer here works
//! per user on the objective `f_u(v) = Es ||H^H v - e_u||^2 + N0 ||v||^2`,
//! whose sum over users is the post-equalization MSE.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::alphabet::{check_alphabet_bits, max_level, quantize_complex, MidRiseAlphabet};
use crate::linalg::{norm_sqr, power_iteration};
use crate::sysmodel::lmmse_equalizer;
use crate::{CMatrix, CVector, Error, Real, Result};

/// Low-resolution matrix `X^H` plus per-user scales `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteAlphabetEqualizer<T> {
    bits: u32,
    users: usize,
    antennas: usize,
    /// Row-major `U x B` entries of `X^H`.
    xh: Vec<Complex<i32>>,
    beta: Vec<Complex<T>>,
}

impl<T: Real> FiniteAlphabetEqualizer<T> {
    /// Validates alphabet membership of every `X^H` entry and finiteness of
    /// `beta`.
    pub fn new(bits: u32, users: usize, antennas: usize, xh: Vec<Complex<i32>>, beta: Vec<Complex<T>>) -> Result<Self> {
        let alphabet = MidRiseAlphabet::new(bits)?;
        if xh.len() != users * antennas {
            return Err(Error::DimensionMismatch {
                expected: users * antennas,
                got: xh.len(),
                context: "X^H entries",
            });
        }
        if beta.len() != users {
            return Err(Error::DimensionMismatch {
                expected: users,
                got: beta.len(),
                context: "beta entries",
            });
        }
        for z in &xh {
            for part in [z.re, z.im] {
                if !alphabet.contains(part as i64) {
                    return Err(Error::NotInAlphabet {
                        value: part as i64,
                        bits,
                    });
                }
            }
        }
        if !beta.iter().all(|b| b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::NonFinite("beta"));
        }
        Ok(Self {
            bits,
            users,
            antennas,
            xh,
            beta,
        })
    }

    /// Builds from per-user vectors `x_u` (so `X^H` row `u` is `x_u^H`).
    pub fn from_user_vectors(bits: u32, x: &[Vec<Complex<i32>>], beta: Vec<Complex<T>>) -> Result<Self> {
        let antennas = x.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != antennas) {
            return Err(Error::Malformed("ragged x vectors".into()));
        }
        let xh = x.iter().flat_map(|r| r.iter().map(|z| z.conj())).collect();
        Self::new(bits, x.len(), antennas, xh, beta)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn beta(&self) -> &[Complex<T>] {
        &self.beta
    }

    pub fn xh(&self, u: usize, b: usize) -> Complex<i32> {
        self.xh[u * self.antennas + b]
    }

    /// Row `u` of `X^H`.
    pub fn xh_row(&self, u: usize) -> &[Complex<i32>] {
        &self.xh[u * self.antennas..(u + 1) * self.antennas]
    }

    /// `x_u`, the conjugate of row `u` of `X^H`.
    pub fn x_user(&self, u: usize) -> Vec<Complex<i32>> {
        self.xh_row(u).iter().map(|z| z.conj()).collect()
    }

    /// Dense `V^H = diag(beta^*) X^H`.
    pub fn vh(&self) -> CMatrix<T> {
        CMatrix::from_fn(self.users, self.antennas, |u, b| {
            self.beta[u].conj() * to_complex::<T>(self.xh(u, b))
        })
        .expect("finite by construction")
    }

    pub fn mse(&self, h: &CMatrix<T>, es: f64, n0: f64) -> Result<T> {
        crate::sysmodel::mse_closed_form(&self.vh(), h, es, n0)
    }

    /// Replaces every `beta_u` with its MSE-optimal value for the stored
    /// `x_u`.
    pub fn refit_beta(&mut self, h: &CMatrix<T>, es: f64, n0: f64) -> Result<()> {
        for u in 0..self.users {
            let x: CVector<T> = self.x_user(u).into_iter().map(to_complex).collect();
            self.beta[u] = optimal_beta(&x, h, u, es, n0)?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn to_complex<T: Real>(z: Complex<i32>) -> Complex<T> {
    Complex::new(T::of(z.re as f64), T::of(z.im as f64))
}

fn check_user(h: &CMatrix<impl Real>, u: usize) -> Result<()> {
    if u >= h.cols() {
        return Err(Error::InvalidArgument(format!("user {u} out of range for U={}", h.cols())));
    }
    Ok(())
}

/// Optimal scale and objective for a fixed direction, given `a = H^H x`
/// and `||x||^2`.
fn beta_for_direction<T: Real>(a: &[Complex<T>], x_norm_sqr: T, u: usize, es: f64, n0: f64) -> (Complex<T>, T) {
    let (es, n0) = (T::of(es), T::of(n0));
    let denom = es * norm_sqr(a) + n0 * x_norm_sqr;
    let beta = a[u].conj() * es / denom;
    let mut err = T::zero();
    for (i, &ai) in a.iter().enumerate() {
        let mut r = beta * ai;
        if i == u {
            r.re -= T::one();
        }
        err += r.norm_sqr();
    }
    (beta, es * err + n0 * beta.norm_sqr() * x_norm_sqr)
}

/// `beta_u = Es x^H h_u / (Es ||H^H x||^2 + N0 ||x||^2)`, the minimizer of
/// `f_u(beta x)` over complex `beta`.
pub fn optimal_beta<T: Real>(x: &[Complex<T>], h: &CMatrix<T>, u: usize, es: f64, n0: f64) -> Result<Complex<T>> {
    check_user(h, u)?;
    let xn = norm_sqr(x);
    if xn == T::zero() {
        return Err(Error::InvalidArgument("optimal_beta needs a nonzero x".into()));
    }
    let a = h.hermitian_matvec(x)?;
    let (beta, _) = beta_for_direction(&a, xn, u, es, n0);
    if !(beta.re.is_finite() && beta.im.is_finite()) {
        return Err(Error::NonFinite("beta"));
    }
    Ok(beta)
}

/// Gradient `2 Es H (H^H v - e_u) + 2 N0 v` of `f_u`, i.e. `df/dRe(v) + j df/dIm(v)`.
pub fn fbs_gradient<T: Real>(v: &[Complex<T>], h: &CMatrix<T>, u: usize, es: f64, n0: f64) -> Result<CVector<T>> {
    check_user(h, u)?;
    let mut r = h.hermitian_matvec(v)?;
    r[u].re -= T::one();
    let hr = h.matvec(&r)?;
    let two_es = T::of(2.0 * es);
    let two_n0 = T::of(2.0 * n0);
    Ok(hr.iter().zip(v).map(|(&a, &b)| a * two_es + b * two_n0).collect())
}

/// Finite-alphabet equalizer from a quantized L-MMSE matrix.
///
/// Each `v_u` (conjugated L-MMSE row) is scaled so its largest real or
/// imaginary magnitude hits the top alphabet level, quantized, and given
/// the optimal `beta_u`.
pub fn flmmse_design<T: Real>(h: &CMatrix<T>, es: f64, n0: f64, bits: u32) -> Result<FiniteAlphabetEqualizer<T>> {
    check_alphabet_bits(bits)?;
    let wh = lmmse_equalizer(h, T::of(n0 / es))?;
    let top = T::of(max_level(bits) as f64);
    let mut x_users = Vec::with_capacity(h.cols());
    let mut beta = Vec::with_capacity(h.cols());
    for u in 0..h.cols() {
        let v: CVector<T> = wh.row(u).iter().map(|z| z.conj()).collect();
        let peak = max_part(&v);
        if peak == T::zero() {
            return Err(Error::InvalidArgument(format!("L-MMSE row {u} is all zero")));
        }
        let x: Vec<Complex<i32>> = v.iter().map(|&z| quantize_t(z * (top / peak), bits)).collect();
        let xc: CVector<T> = x.iter().map(|&z| to_complex(z)).collect();
        beta.push(optimal_beta(&xc, h, u, es, n0)?);
        x_users.push(x);
    }
    FiniteAlphabetEqualizer::from_user_vectors(bits, &x_users, beta)
}

fn max_part<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |m, z| m.max(z.re.abs()).max(z.im.abs()))
}

#[inline]
fn quantize_t<T: Real>(z: Complex<T>, bits: u32) -> Complex<i32> {
    quantize_complex(Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()), bits)
}

/// Approximate projection of `z` onto `{beta x : x in alphabet^B}`.
///
/// Starts from `beta_0 = max part / (2^K - 1)` and alternates
/// `x <- Q(z / beta)` with the least-squares `beta <- x^H z / ||x||^2`,
/// returning the pair with the smallest `||z - beta x||` seen.
pub fn project_scaled_alphabet<T: Real>(
    z: &[Complex<T>],
    bits: u32,
    alternations: usize,
) -> Result<(Complex<T>, Vec<Complex<i32>>)> {
    check_alphabet_bits(bits)?;
    let peak = max_part(z);
    if peak == T::zero() {
        return Err(Error::InvalidArgument("cannot project the zero vector".into()));
    }
    if !peak.is_finite() {
        return Err(Error::NonFinite("projection input"));
    }
    let residual = |beta: Complex<T>, x: &[Complex<i32>]| -> T {
        z.iter()
            .zip(x)
            .fold(T::zero(), |acc, (&zi, &xi)| acc + (zi - beta * to_complex::<T>(xi)).norm_sqr())
    };
    let quantize_dir = |beta: Complex<T>| -> Vec<Complex<i32>> {
        z.iter().map(|&zi| quantize_t(zi / beta, bits)).collect()
    };

    let mut beta = Complex::new(peak / T::of(max_level(bits) as f64), T::zero());
    let mut x = quantize_dir(beta);
    let mut best = (residual(beta, &x), beta, x.clone());
    for _ in 0..alternations {
        let xc: CVector<T> = x.iter().map(|&v| to_complex(v)).collect();
        beta = crate::linalg::dot_h(&xc, z) / norm_sqr(&xc);
        if beta.norm_sqr() == T::zero() || !beta.norm_sqr().is_finite() {
            break;
        }
        let r = residual(beta, &x);
        if r < best.0 {
            best = (r, beta, x.clone());
        }
        x = quantize_dir(beta);
        let r = residual(beta, &x);
        if r < best.0 {
            best = (r, beta, x.clone());
        }
    }
    Ok((best.1, best.2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum StepRule {
    /// Fixed step size.
    Fixed(f64),
    /// `1 / (2 (Es lambda_max(H H^H) + N0))`.
    InverseLipschitz,
}

/// Forward-backward splitting parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbsConfig {
    pub max_iters: usize,
    pub step: StepRule,
    pub proj_alternations: usize,
    pub keep_best: bool,
}

impl Default for FbsConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            step: StepRule::InverseLipschitz,
            proj_alternations: 3,
            keep_best: true,
        }
    }
}

impl FbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.proj_alternations == 0 {
            return Err(Error::InvalidArgument("proj_alternations must be at least 1".into()));
        }
        if let StepRule::Fixed(t) = self.step {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Step size for the smooth part of the per-user objective.
pub fn fbs_step<T: Real>(h: &CMatrix<T>, es: f64, n0: f64, rule: StepRule) -> Result<T> {
    Ok(match rule {
        StepRule::Fixed(t) => T::of(t),
        StepRule::InverseLipschitz => {
            let gram = h.hermitian().matmul(h)?;
            let lmax = power_iteration(&gram, 50, T::of(1e-6));
            T::one() / (T::of(2.0) * (T::of(es) * lmax + T::of(n0)))
        }
    })
}

/// Finite-alphabet equalizer by forward-backward splitting.
///
/// Per user: start from the conjugated L-MMSE row, take a gradient step on
/// `f_u`, project onto the scaled alphabet, repeat. With `keep_best` the
/// returned direction is the iterate with the lowest objective after an
/// optimal-`beta` refit, counting the peak-scaled quantization of the
/// starting row as iterate 0; the final `beta` is always refitted.
pub fn fame_fbs_design<T: Real>(
    h: &CMatrix<T>,
    es: f64,
    n0: f64,
    bits: u32,
    cfg: &FbsConfig,
) -> Result<FiniteAlphabetEqualizer<T>> {
    cfg.validate()?;
    check_alphabet_bits(bits)?;
    let wh = lmmse_equalizer(h, T::of(n0 / es))?;
    let tau = fbs_step(h, es, n0, cfg.step)?;
    let mut x_users = Vec::with_capacity(h.cols());
    let mut beta = Vec::with_capacity(h.cols());
    for u in 0..h.cols() {
        let v0: CVector<T> = wh.row(u).iter().map(|z| z.conj()).collect();
        let (b, x) = fbs_user(h, u, es, n0, bits, cfg, tau, v0)?;
        beta.push(b);
        x_users.push(x);
    }
    FiniteAlphabetEqualizer::from_user_vectors(bits, &x_users, beta)
}

#[allow(clippy::too_many_arguments)]
fn fbs_user<T: Real>(
    h: &CMatrix<T>,
    u: usize,
    es: f64,
    n0: f64,
    bits: u32,
    cfg: &FbsConfig,
    tau: T,
    mut v: CVector<T>,
) -> Result<(Complex<T>, Vec<Complex<i32>>)> {
    let mut best: Option<(T, Vec<Complex<i32>>)> = None;
    let (_, mut last) = project_scaled_alphabet(&v, bits, cfg.proj_alternations)?;
    if cfg.keep_best {
        // iterate 0: the starting row quantized at peak scale
        let top = T::of(max_level(bits) as f64);
        let peak = max_part(&v);
        if peak > T::zero() && peak.is_finite() {
            let x0: Vec<Complex<i32>> = v.iter().map(|&z| quantize_t(z * (top / peak), bits)).collect();
            let xc: CVector<T> = x0.iter().map(|&xi| to_complex(xi)).collect();
            let (_, obj) = beta_for_direction(&h.hermitian_matvec(&xc)?, norm_sqr(&xc), u, es, n0);
            if obj.is_finite() {
                best = Some((obj, x0));
            }
        }
    }
    for _ in 0..cfg.max_iters {
        let g = fbs_gradient(&v, h, u, es, n0)?;
        let z: CVector<T> = v.iter().zip(&g).map(|(&vi, &gi)| vi - gi * tau).collect();
        if z.iter().any(|zi| !(zi.re.is_finite() && zi.im.is_finite())) {
            // an oversized fixed step diverged
            log::warn!("FBS iterate for user {u} became non-finite; keeping the best iterate so far");
            break;
        }
        let (b, x) = project_scaled_alphabet(&z, bits, cfg.proj_alternations)?;
        let xc: CVector<T> = x.iter().map(|&xi| to_complex(xi)).collect();
        v = xc.iter().map(|&xi| xi * b).collect();
        if cfg.keep_best {
            let a = h.hermitian_matvec(&xc)?;
            let (_, obj) = beta_for_direction(&a, norm_sqr(&xc), u, es, n0);
            if obj.is_finite() && best.as_ref().map_or(true, |(m, _)| obj < *m) {
                best = Some((obj, x.clone()));
            }
        }
        last = x;
    }
    let x = match best {
        Some((_, x)) => x,
        None => last,
    };
    let xc: CVector<T> = x.iter().map(|&xi| to_complex(xi)).collect();
    Ok((optimal_beta(&xc, h, u, es, n0)?, x))
}

/// Largest per-user search space the exhaustive oracle accepts.
pub const EXHAUSTIVE_LIMIT: u128 = 1 << 24;

/// Global per-user minimizer over every `x in alphabet^B` with optimal
/// `beta`; ties keep the lexicographically smallest `x`
/// (`Re x_0, Im x_0, Re x_1, ...`).
pub fn exhaustive_fame_oracle<T: Real>(
    h: &CMatrix<T>,
    es: f64,
    n0: f64,
    bits: u32,
) -> Result<FiniteAlphabetEqualizer<T>> {
    let alphabet = MidRiseAlphabet::new(bits)?;
    let b = h.rows();
    let digits = 2 * b;
    let exponent = bits as u128 * digits as u128;
    if exponent > 24 {
        let count = if exponent >= 127 { u128::MAX } else { 1u128 << exponent };
        return Err(Error::TooLarge(count));
    }
    let levels = alphabet.values();
    let base = levels.len();
    let mut x_users = Vec::with_capacity(h.cols());
    let mut beta = Vec::with_capacity(h.cols());
    for u in 0..h.cols() {
        let mut idx = vec![0usize; digits];
        let mut best: Option<(T, Complex<T>, Vec<Complex<i32>>)> = None;
        loop {
            let x: Vec<Complex<i32>> = (0..b)
                .map(|i| Complex::new(levels[idx[2 * i]], levels[idx[2 * i + 1]]))
                .collect();
            let xc: CVector<T> = x.iter().map(|&xi| to_complex(xi)).collect();
            let a = h.hermitian_matvec(&xc)?;
            let (bt, obj) = beta_for_direction(&a, norm_sqr(&xc), u, es, n0);
            if obj.is_finite() && best.as_ref().map_or(true, |(m, _, _)| obj < *m) {
                best = Some((obj, bt, x));
            }
            if !advance_odometer(&mut idx, base) {
                break;
            }
        }
        let (_, bt, x) = best.ok_or(Error::NonFinite("every oracle candidate"))?;
        beta.push(bt);
        x_users.push(x);
    }
    FiniteAlphabetEqualizer::from_user_vectors(bits, &x_users, beta)
}

/// Increments the last digit fastest (lexicographic order); `false` once
/// every combination has been visited.
fn advance_odometer(idx: &mut [usize], base: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{generate_rayleigh_channel, per_user_mse};
    use crate::ComplexMatrix;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn scalar_channel() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)]]).unwrap()
    }

    #[test]
    fn optimal_beta_scalar() {
        let beta = optimal_beta(&[c(1.0, 0.0)], &scalar_channel(), 0, 1.0, 1.0).unwrap();
        assert!((beta - c(0.5, 0.0)).norm() < 1e-15);
        assert!(optimal_beta(&[c(0.0, 0.0)], &scalar_channel(), 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn optimal_beta_exact_inversion() {
        // H^H x = (2 + 2j) e_1 for x = (1+j, 1-j)
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 1.0), c(0.0, -1.0)]]).unwrap();
        let x = [c(1.0, 1.0), c(1.0, -1.0)];
        let a = h.hermitian_matvec(&x).unwrap();
        assert!(a[0].norm() < 1e-15);
        let beta = optimal_beta(&x, &h, 1, 1.0, 0.0).unwrap();
        assert!((beta - c(1.0, 0.0) / a[1]).norm() < 1e-15);
        let v: Vec<_> = x.iter().map(|&z| z * beta).collect();
        assert!(per_user_mse(&v, &h, 1, 1.0, 0.0).unwrap() < 1e-28);
    }

    #[test]
    fn flmmse_scalar_example() {
        let eq = flmmse_design(&scalar_channel(), 1.0, 0.0, 1).unwrap();
        assert_eq!(eq.x_user(0), vec![Complex::new(1, 1)]);
        assert!((eq.beta()[0] - c(0.5, -0.5)).norm() < 1e-15);
        let vh = eq.vh();
        assert!((vh[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn flmmse_single_user_identity_is_exact() {
        for bits in 1..=4 {
            let eq = flmmse_design(&scalar_channel(), 1.0, 0.0, bits).unwrap();
            assert!(eq.mse(&scalar_channel(), 1.0, 0.0).unwrap() < 1e-28);
        }
    }

    #[test]
    fn flmmse_idempotent_on_alphabet_rows() {
        // a channel whose L-MMSE row is already an alphabet vector up to scale
        let h: ComplexMatrix = generate_rayleigh_channel(6, 2, 3).unwrap();
        let eq = flmmse_design(&h, 1.0, 0.1, 2).unwrap();
        for u in 0..2 {
            let x: CVector<f64> = eq.x_user(u).into_iter().map(to_complex).collect();
            let top = 3.0;
            let peak = max_part(&x);
            let again: Vec<_> = x.iter().map(|&z| quantize_t(z * (top / peak), 2)).collect();
            assert_eq!(again, eq.x_user(u));
        }
    }

    #[test]
    fn gradient_examples() {
        let id = ComplexMatrix::identity(3);
        let g = fbs_gradient(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)], &id, 1, 1.0, 1.0).unwrap();
        assert_eq!(g, vec![c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);

        let h: ComplexMatrix = generate_rayleigh_channel(10, 3, 17).unwrap();
        let wh = lmmse_equalizer(&h, 0.2).unwrap();
        for u in 0..3 {
            let v: Vec<_> = wh.row(u).iter().map(|z| z.conj()).collect();
            let g = fbs_gradient(&v, &h, u, 1.0, 0.2).unwrap();
            assert!(norm_sqr(&g).sqrt() < 1e-8);
        }
    }

    #[test]
    fn projection_examples() {
        let (beta, x) = project_scaled_alphabet(&[c(2.0, 2.0)], 1, 3).unwrap();
        assert_eq!(x, vec![Complex::new(1, 1)]);
        assert!((beta - c(2.0, 0.0)).norm() < 1e-15);

        let (beta, x) = project_scaled_alphabet(&[c(1.0, 0.0), c(1.0, 0.0)], 1, 3).unwrap();
        let resid: f64 = x
            .iter()
            .map(|&xi| (c(1.0, 0.0) - beta * to_complex::<f64>(xi)).norm_sqr())
            .sum();
        assert!(resid < 1e-28);
        assert!(project_scaled_alphabet(&[c(0.0, 0.0)], 1, 3).is_err());
    }

    #[test]
    fn projection_is_scale_covariant() {
        let z: Vec<_> = (0..8).map(|i| c((i as f64 * 0.37).sin() * 3.0, (i as f64 * 1.3).cos())).collect();
        let (b1, x1) = project_scaled_alphabet(&z, 2, 3).unwrap();
        for scale in [0.25, 2.0, 1024.0] {
            let zs: Vec<_> = z.iter().map(|&v| v * scale).collect();
            let (b2, x2) = project_scaled_alphabet(&zs, 2, 3).unwrap();
            assert_eq!(x1, x2);
            assert!((b2 - b1 * scale).norm() <= 1e-12 * b2.norm());
        }
    }

    #[test]
    fn fame_matches_flmmse_on_scalar_channel() {
        let fame = fame_fbs_design(&scalar_channel(), 1.0, 0.0, 1, &FbsConfig::default()).unwrap();
        let fl = flmmse_design(&scalar_channel(), 1.0, 0.0, 1).unwrap();
        assert_eq!(fame.x_user(0), fl.x_user(0));
        assert!((fame.beta()[0] - fl.beta()[0]).norm() < 1e-15);
    }

    #[test]
    fn fbs_config_validation() {
        let mut cfg = FbsConfig::default();
        cfg.max_iters = 0;
        assert!(fame_fbs_design(&scalar_channel(), 1.0, 0.1, 1, &cfg).is_err());
        let cfg = FbsConfig {
            proj_alternations: 0,
            ..FbsConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = FbsConfig {
            step: StepRule::Fixed(-1.0),
            ..FbsConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn oracle_examples() {
        for bits in 1..=3 {
            let eq = exhaustive_fame_oracle(&scalar_channel(), 1.0, 0.0, bits).unwrap();
            assert!(eq.mse(&scalar_channel(), 1.0, 0.0).unwrap() < 1e-28);
        }
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
        let eq = exhaustive_fame_oracle(&h, 1.0, 0.0, 1).unwrap();
        assert!(eq.mse(&h, 1.0, 0.0).unwrap() < 1e-28);
        // the lexicographically smallest zero-MSE direction
        assert_eq!(eq.x_user(0), vec![Complex::new(-1, -1), Complex::new(-1, -1)]);

        let big: ComplexMatrix = generate_rayleigh_channel(13, 1, 0).unwrap();
        assert!(matches!(exhaustive_fame_oracle(&big, 1.0, 0.1, 1), Err(Error::TooLarge(_))));
    }

    #[test]
    fn designs_respect_alphabet_and_refit_never_hurts() {
        let h: ComplexMatrix = generate_rayleigh_channel(16, 4, 8).unwrap();
        for bits in 1..=3 {
            for mut eq in [
                flmmse_design(&h, 1.0, 0.1, bits).unwrap(),
                fame_fbs_design(&h, 1.0, 0.1, bits, &FbsConfig::default()).unwrap(),
            ] {
                let top = max_level(bits);
                for u in 0..4 {
                    for z in eq.xh_row(u) {
                        assert!(z.re.abs() <= top && z.re % 2 != 0);
                        assert!(z.im.abs() <= top && z.im % 2 != 0);
                    }
                }
                let before = eq.mse(&h, 1.0, 0.1).unwrap();
                eq.refit_beta(&h, 1.0, 0.1).unwrap();
                assert!(eq.mse(&h, 1.0, 0.1).unwrap() <= before * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn keep_best_is_monotone_in_iterations() {
        let h: ComplexMatrix = generate_rayleigh_channel(16, 4, 21).unwrap();
        let mut prev = f64::INFINITY;
        for iters in [1, 2, 5, 10, 30, 100] {
            let cfg = FbsConfig {
                max_iters: iters,
                ..FbsConfig::default()
            };
            let m = fame_fbs_design(&h, 1.0, 0.1, 1, &cfg).unwrap().mse(&h, 1.0, 0.1).unwrap();
            assert!(m <= prev + 1e-12, "{iters}: {m} > {prev}");
            prev = m;
        }
    }

    #[test]
    fn per_user_design_ignores_other_column_order() {
        let h: ComplexMatrix = generate_rayleigh_channel(12, 4, 99).unwrap();
        // swap columns 2 and 3; user 0 must not change
        let swapped = ComplexMatrix::from_fn(12, 4, |r, c| {
            let src = match c {
                2 => 3,
                3 => 2,
                other => other,
            };
            h[(r, src)]
        })
        .unwrap();
        let a = fame_fbs_design(&h, 1.0, 0.1, 1, &FbsConfig::default()).unwrap();
        let b = fame_fbs_design(&swapped, 1.0, 0.1, 1, &FbsConfig::default()).unwrap();
        assert_eq!(a.x_user(0), b.x_user(0));
        assert!((a.beta()[0] - b.beta()[0]).norm() < 1e-9 * a.beta()[0].norm());
        let fa = flmmse_design(&h, 1.0, 0.1, 2).unwrap();
        let fb = flmmse_design(&swapped, 1.0, 0.1, 2).unwrap();
        assert_eq!(fa.x_user(1), fb.x_user(1));
    }

    #[test]
    fn works_in_single_precision() {
        let h: crate::ComplexMatrix32 = generate_rayleigh_channel(8, 2, 4).unwrap();
        let eq = fame_fbs_design(&h, 1.0, 0.1, 2, &FbsConfig::default()).unwrap();
        let fl = flmmse_design(&h, 1.0, 0.1, 2).unwrap();
        assert!(eq.mse(&h, 1.0, 0.1).unwrap().is_finite());
        assert!(fl.mse(&h, 1.0, 0.1).unwrap() > 0.0);
    }

    #[test]
    fn divergent_fixed_step_still_returns_a_valid_equalizer() {
        let h: ComplexMatrix = generate_rayleigh_channel(3, 2, 5001).unwrap();
        let cfg = FbsConfig {
            max_iters: 1000,
            step: StepRule::Fixed(1e3),
            ..FbsConfig::default()
        };
        let fae = fame_fbs_design(&h, 1.0, 0.1, 1, &cfg).unwrap();
        assert!(fae.mse(&h, 1.0, 0.1).unwrap().is_finite());
    }
}
