//! Library results against small, independent reference computations.

use approx::assert_relative_eq;
use faeq_core::hwcost::{reference_calibration, CalibrationSet};
use faeq_core::sysmodel::{generate_rayleigh_channel, lmmse_equalizer, mse_closed_form};
use faeq_core::{Complex, ComplexMatrix, C64};

/// Gauss-Jordan with partial pivoting on `[A | B]`.
fn solve(mut a: Vec<Vec<C64>>, mut b: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        let d = a[col][col];
        for k in 0..n {
            a[col][k] /= d;
        }
        for v in b[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for k in 0..n {
                    let t = a[col][k];
                    a[r][k] -= f * t;
                }
                for k in 0..b[r].len() {
                    let t = b[col][k];
                    b[r][k] -= f * t;
                }
            }
        }
    }
    b
}

fn entry(h: &ComplexMatrix, r: usize, c: usize) -> C64 {
    h.row(r)[c]
}

#[test]
fn lmmse_matches_gauss_jordan() {
    for (seed, (b, u, rho)) in [(8, 3, 0.1), (16, 4, 1.0), (4, 4, 0.01), (32, 2, 3.0)].into_iter().enumerate() {
        let h: ComplexMatrix = generate_rayleigh_channel(b, u, 40 + seed as u64).unwrap();
        let gram: Vec<Vec<C64>> = (0..u)
            .map(|i| {
                (0..u)
                    .map(|j| {
                        let g: C64 = (0..b).map(|k| entry(&h, k, i).conj() * entry(&h, k, j)).sum();
                        if i == j { g + rho } else { g }
                    })
                    .collect()
            })
            .collect();
        let hh: Vec<Vec<C64>> = (0..u).map(|i| (0..b).map(|k| entry(&h, k, i).conj()).collect()).collect();
        let expected = solve(gram, hh);
        let wh = lmmse_equalizer(&h, rho).unwrap();
        for i in 0..u {
            for k in 0..b {
                let (got, want) = (wh.row(i)[k], expected[i][k]);
                assert!((got - want).norm() <= 1e-10 * (1.0 + want.norm()), "({i},{k}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn closed_form_mse_matches_matrix_expression() {
    // Es ||V^H H - I||_F^2 + N0 ||V^H||_F^2, built entry by entry
    let h: ComplexMatrix = generate_rayleigh_channel(6, 3, 77).unwrap();
    let vh = ComplexMatrix::from_fn(3, 6, |i, k| Complex::new((i + k) as f64 * 0.1 - 0.3, 0.05 * k as f64 - 0.1 * i as f64))
        .unwrap();
    let (es, n0) = (2.0, 0.3);
    let mut want = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut g: C64 = (0..6).map(|k| vh.row(i)[k] * entry(&h, k, j)).sum();
            if i == j {
                g -= 1.0;
            }
            want += es * g.norm_sqr();
        }
        want += n0 * vh.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    assert_relative_eq!(mse_closed_form(&vh, &h, es, n0).unwrap(), want, max_relative = 1e-12);
}

#[test]
fn lmmse_mse_equals_trace_formula() {
    // with Es = 1 the L-MMSE error is N0 tr((H^H H + N0 I)^{-1})
    let (b, u, n0) = (12, 4, 0.25);
    let h: ComplexMatrix = generate_rayleigh_channel(b, u, 3).unwrap();
    let gram: Vec<Vec<C64>> = (0..u)
        .map(|i| {
            (0..u)
                .map(|j| {
                    let g: C64 = (0..b).map(|k| entry(&h, k, i).conj() * entry(&h, k, j)).sum();
                    if i == j { g + n0 } else { g }
                })
                .collect()
        })
        .collect();
    let eye: Vec<Vec<C64>> = (0..u).map(|i| (0..u).map(|j| C64::new((i == j) as u8 as f64, 0.0)).collect()).collect();
    let inv = solve(gram, eye);
    let want: f64 = n0 * (0..u).map(|i| inv[i][i].re).sum::<f64>();
    let got = mse_closed_form(&lmmse_equalizer(&h, n0).unwrap(), &h, 1.0, n0).unwrap();
    assert_relative_eq!(got, want, max_relative = 1e-10);
}

#[test]
fn shipped_calibration_file_matches_builtin_reference() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../calibration/tableI.json");
    let text = std::fs::read_to_string(path).unwrap();
    let shipped = CalibrationSet::from_json(&text).unwrap();
    assert_eq!(shipped, reference_calibration());
}
