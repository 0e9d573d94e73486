//! Head-to-head comparisons of the equalizer designers.

use faeq_core::fame::{exhaustive_fame_oracle, fame_fbs_design, flmmse_design, FbsConfig};
use faeq_core::sysmodel::{generate_rayleigh_channel, lmmse_equalizer, mse_closed_form};
use faeq_core::ComplexMatrix;

#[test]
fn fbs_beats_quantized_lmmse_on_one_bit() {
    let n0 = 0.1;
    let mut wins = 0;
    for seed in 0..100 {
        let h: ComplexMatrix = generate_rayleigh_channel(16, 4, seed).unwrap();
        let fl = flmmse_design(&h, 1.0, n0, 1).unwrap().mse(&h, 1.0, n0).unwrap();
        let fbs = fame_fbs_design(&h, 1.0, n0, 1, &FbsConfig::default())
            .unwrap()
            .mse(&h, 1.0, n0)
            .unwrap();
        if fbs <= fl {
            wins += 1;
        }
    }
    assert!(wins >= 90, "FBS no worse on only {wins}/100 seeds");
}

#[test]
fn exhaustive_oracle_lower_bounds_both_designers() {
    for seed in 0..30 {
        let h: ComplexMatrix = generate_rayleigh_channel(3, 2, 100 + seed).unwrap();
        for (bits, n0) in [(1, 0.1), (1, 1.0), (2, 0.1)] {
            if bits == 2 && seed >= 3 {
                continue;
            }
            let best = exhaustive_fame_oracle(&h, 1.0, n0, bits).unwrap().mse(&h, 1.0, n0).unwrap();
            let fl = flmmse_design(&h, 1.0, n0, bits).unwrap().mse(&h, 1.0, n0).unwrap();
            let fbs = fame_fbs_design(&h, 1.0, n0, bits, &FbsConfig::default())
                .unwrap()
                .mse(&h, 1.0, n0)
                .unwrap();
            let slack = 1e-12 * best.max(1.0);
            assert!(best <= fl + slack, "seed {seed}: oracle {best} > FL-MMSE {fl}");
            assert!(best <= fbs + slack, "seed {seed}: oracle {best} > FBS {fbs}");
        }
    }
}

#[test]
fn lmmse_is_never_beaten_by_a_finite_alphabet() {
    for seed in 0..40 {
        let h: ComplexMatrix = generate_rayleigh_channel(8, 3, 500 + seed).unwrap();
        let n0 = [0.01, 0.1, 1.0][seed as usize % 3];
        let lmmse = mse_closed_form(&lmmse_equalizer(&h, n0).unwrap(), &h, 1.0, n0).unwrap();
        for bits in 1..=3 {
            for mse in [
                flmmse_design(&h, 1.0, n0, bits).unwrap().mse(&h, 1.0, n0).unwrap(),
                fame_fbs_design(&h, 1.0, n0, bits, &FbsConfig::default())
                    .unwrap()
                    .mse(&h, 1.0, n0)
                    .unwrap(),
            ] {
                assert!(lmmse <= mse * (1.0 + 1e-12), "seed {seed} K={bits}: {lmmse} > {mse}");
            }
        }
    }
}

#[test]
fn more_alphabet_bits_approach_lmmse() {
    let n0 = 0.1;
    let mut totals = [0.0; 4];
    for seed in 0..20 {
        let h: ComplexMatrix = generate_rayleigh_channel(16, 4, 900 + seed).unwrap();
        totals[0] += mse_closed_form(&lmmse_equalizer(&h, n0).unwrap(), &h, 1.0, n0).unwrap();
        for bits in 1..=3u32 {
            totals[bits as usize] += fame_fbs_design(&h, 1.0, n0, bits, &FbsConfig::default())
                .unwrap()
                .mse(&h, 1.0, n0)
                .unwrap();
        }
    }
    assert!(totals[0] < totals[3] && totals[3] < totals[2] && totals[2] < totals[1], "{totals:?}");
}
