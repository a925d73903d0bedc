use convint::frame::{frob, GeometricFrame};
use convint::noise::{NoisePath, TimeMollifier};
use convint::params::ParamSchedule;
use convint::spectral::container::{read_coefficients, write_coefficients};
use convint::spectral::norms::{l2, l2_quadrature};
use convint::spectral::ops::{
    derivative, div, grad, inv_divergence, leray, project_ge, project_le, project_nonzero,
};
use convint::spectral::{tc, Grid3, PhysicalField, Rank, SpectralField};
use convint::verify::convergence::interpolation_excess;
use convint::verify::ledger::{DiagnosticLedger, Flag, LedgerRow, Relation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(seed: u64, n: usize, rank: Rank) -> SpectralField {
    let g = Grid3::new(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..g.len() * rank.ncomp())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut f = PhysicalField::from_data(g, rank, data).unwrap().transform();
    f.band_limit();
    f
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    l2(&a.sub(b)) / l2(b).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_and_real_symmetry(seed in any::<u64>(), n in prop::sample::select(vec![8usize, 12, 16])) {
        let f = random_field(seed, n, Rank::Vector);
        let p = f.to_physical();
        prop_assert!((l2(&f) - l2_quadrature(&p)).abs() <= 1e-12 * l2(&f));
        prop_assert!(f.hermitian_defect() <= 1e-14);
    }

    #[test]
    fn leray_is_a_projection_commuting_with_derivatives(seed in any::<u64>(), axis in 0usize..3) {
        let f = random_field(seed, 8, Rank::Vector);
        let p = leray(&f);
        prop_assert!(rel(&leray(&p), &p) <= 1e-12);
        prop_assert!(l2(&div(&p)) <= 1e-12 * l2(&f));
        let phi = random_field(seed ^ 1, 8, Rank::Scalar);
        prop_assert!(l2(&leray(&grad(&phi))) <= 1e-12 * l2(&grad(&phi)));
        let mut a = [0; 3];
        a[axis] = 1;
        let lhs = leray(&derivative(&f, a));
        let rhs = derivative(&p, a);
        prop_assert!(l2(&lhs.sub(&rhs)) <= 1e-12 * l2(&derivative(&f, a)).max(1.0));
    }

    #[test]
    fn band_projections_split_the_mean_free_part(seed in any::<u64>(), kappa in 1.0f64..6.0) {
        let f = random_field(seed, 16, Rank::Scalar);
        let z = project_nonzero(&f);
        prop_assert!(rel(&project_nonzero(&z), &z) <= 1e-14);
        let sum = project_le(&z, kappa).unwrap().add(&project_ge(&z, kappa).unwrap());
        prop_assert!(rel(&sum, &z) <= 1e-12);
    }

    #[test]
    fn inverse_divergence_is_a_symmetric_traceless_right_inverse(seed in any::<u64>()) {
        let f = project_nonzero(&random_field(seed, 8, Rank::Vector));
        let r = inv_divergence(&f).unwrap();
        prop_assert!(rel(&div(&r), &f) <= 1e-10);
        let p = r.to_physical();
        let scale = l2(&r);
        for idx in 0..p.grid.len() {
            let at = |i, j| p.comp(tc(i, j))[idx];
            prop_assert!((at(0, 0) + at(1, 1) + at(2, 2)).abs() <= 1e-10 * scale);
            for i in 0..3 {
                for j in 0..i {
                    prop_assert!((at(i, j) - at(j, i)).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn interpolation_inequality_on_random_fields(seed in any::<u64>(), gamma in 1e-6f64..0.999) {
        let f = random_field(seed, 8, Rank::Vector);
        prop_assert!(interpolation_excess(&f, gamma) <= 1e-9);
    }

    #[test]
    fn geometric_reconstruction_on_the_certified_ball(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let frame = GeometricFrame::standard().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let x = rng.random_range(-1.0..1.0);
                e[i][j] = x;
                e[j][i] = x;
            }
        }
        let s = frac * frame.r_cert / frob(&e).max(1e-300);
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = f64::from(u8::from(i == j)) + s * e[i][j];
            }
        }
        let g = frame.gamma(&r).unwrap();
        prop_assert!(g.iter().all(|x| *x >= 0.0));
        let back = frame.reconstruct(&g);
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = back[i][j] - r[i][j];
            }
        }
        prop_assert!(frob(&d) <= 1e-10);
    }

    #[test]
    fn time_mollifier_only_looks_back(seed in any::<u64>(), k in 64i64..200, bump in 1i64..50) {
        let m = TimeMollifier::new(0.25, 1.0 / 256.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base = m.at(k, |i| series[i as usize]);
        let changed = m.at(k, |i| if i > k && i <= k + bump { 7.0 } else { series[i as usize] });
        prop_assert_eq!(base.to_bits(), changed.to_bits());
    }

    #[test]
    fn cutoff_factor_is_one_before_time_zero(seed in any::<u64>(), t in -5.0f64..0.0) {
        let path = NoisePath::sample(seed, 1.0 / 256.0, 1.0).unwrap();
        prop_assert_eq!(path.theta(t), 1.0);
    }

    #[test]
    fn log_domain_matches_direct_evaluation(a in 2u64..50, mult in 1u64..3, q in 0u32..3) {
        let b = 7 * mult;
        let s = ParamSchedule::new(a, b, 1e-4, 1e-9, 0.4, 5.0, 1.0, 4.5).unwrap();
        let direct = (a as f64).ln() * (b as f64).powi(q as i32);
        prop_assert!((s.ln_lambda(q) - direct).abs() <= 1e-12 * direct.abs());
        if q <= 1 {
            let lam = (a as f64).powf((b as f64).powi(q as i32));
            if lam.is_finite() {
                prop_assert!((s.ln_lambda(q) - lam.ln()).abs() <= 1e-12 * lam.ln().abs().max(1.0));
            }
        }
    }

    #[test]
    fn ledger_survives_a_json_round_trip(values in prop::collection::vec((0usize..4, -1e6f64..1e6, 1e-3f64..1e3), 1..20)) {
        let mut l = DiagnosticLedger::default();
        for (i, (q, m, r)) in values.iter().enumerate() {
            let flag = [Flag::Hard, Flag::Soft, Flag::Info][i % 3];
            let level = if i % 4 == 0 { None } else { Some(*q) };
            l.push(LedgerRow::new(level, &format!("row_{i}"), *m, *r, Relation::AtMost, flag).note("n"));
        }
        let back = DiagnosticLedger::from_json(&l.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), l.to_json());
    }

    #[test]
    fn checkpoint_container_round_trip(seed in any::<u64>()) {
        let fields = vec![random_field(seed, 8, Rank::Tensor), random_field(seed ^ 3, 8, Rank::Tensor)];
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &[0.0, 0.5], &fields).unwrap();
        let (times, back) = read_coefficients(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(times, vec![0.0, 0.5]);
        for (a, b) in back.iter().zip(&fields) {
            prop_assert_eq!(l2(&a.sub(b)), 0.0);
        }
    }
}
