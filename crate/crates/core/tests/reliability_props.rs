use proptest::prelude::*;
use splithalf::analysis::{analyze, AnalysisOptions};
use splithalf::reliability::{classical_reliability, error_variance, f_test_equal_variance, SubTestScores};
use splithalf::simulate::{generate, ModelKind, SimModel};
use splithalf::{descriptive_stats, ExamineeScores};

fn config() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(512)
    }
}

fn halves() -> impl Strategy<Value = SubTestScores> {
    (3usize..60).prop_flat_map(|n| {
        (prop::collection::vec(0u64..=25, n), prop::collection::vec(0u64..=25, n))
            .prop_map(|(g, h)| SubTestScores::new(g, h).unwrap())
    })
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.abs().max(1.0)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn error_variance_matches_cosine_form(s in halves()) {
        let n = s.len() as f64;
        let direct: u64 = s.g.iter().zip(&s.h).map(|(&a, &b)| a.abs_diff(b).pow(2)).sum();
        let direct = direct as f64 / n;
        let ng: f64 = s.g.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        let nh: f64 = s.h.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        let dot: f64 = s.g.iter().zip(&s.h).map(|(&a, &b)| (a * b) as f64).sum();
        let cosine = if ng > 0.0 && nh > 0.0 {
            let c = dot / (ng * nh);
            (ng * ng + nh * nh - 2.0 * ng * nh * c) / n
        } else {
            (ng * ng + nh * nh) / n
        };
        let ev = error_variance(&s);
        prop_assert!(close(ev, direct, direct));
        prop_assert!(close(ev, cosine, (ng * ng + nh * nh) / n));
    }

    #[test]
    fn variance_decomposes(s in halves()) {
        let stats = descriptive_stats(&ExamineeScores::new(s.combined()), 50).unwrap();
        let Ok(r) = classical_reliability(&s, &stats) else { return Ok(()) };
        prop_assert!(close(r.test_variance, r.true_score_variance + r.error_variance, r.test_variance));
        prop_assert!(close(r.r_tt, r.true_score_variance / r.test_variance, 1.0));
    }

    #[test]
    fn symmetric_form_differs_by_norm_gap(s in halves()) {
        let stats = descriptive_stats(&ExamineeScores::new(s.combined()), 50).unwrap();
        let Ok(r) = classical_reliability(&s, &stats) else { return Ok(()) };
        let denom = s.len() as f64 * stats.variance;
        let expected = (s.norm_sq_g() - s.norm_sq_h()) / denom;
        prop_assert!(close(r.r_tt - r.r_tt_symmetric, expected, 1.0 + expected));
        if s.norm_sq_g() == s.norm_sq_h() {
            prop_assert!(close(r.r_tt, r.r_tt_symmetric, 1.0));
        }
    }

    #[test]
    fn f_test_ignores_labels(s in halves()) {
        let swapped = SubTestScores::new(s.h.clone(), s.g.clone()).unwrap();
        match (f_test_equal_variance(&s), f_test_equal_variance(&swapped)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

/// The two forms of reliability differ by `(|X_g|^2 - |X_h|^2) / (N S_X^2)`,
/// which is not bounded by `(|X_g| - |X_h|)^2 / (N S_X^2)`. Counts how often the
/// tighter bound happens to hold on simulated splits.
#[test]
fn symmetric_form_gap_versus_squared_norm_gap() {
    let (mut held, mut runs) = (0, 0);
    for kind in ModelKind::ALL {
        for seed in 0..25 {
            let m = generate(&SimModel::new(kind, 300, 40, seed)).unwrap();
            let Ok(a) = analyze(&m, AnalysisOptions::default()) else { continue };
            let (ng, nh) = (a.reliability.g.norm_sq.sqrt(), a.reliability.h.norm_sq.sqrt());
            let bound = (ng - nh).powi(2) / (300.0 * a.stats.variance);
            runs += 1;
            held += usize::from((a.reliability.r_tt - a.reliability.r_tt_symmetric).abs() <= bound);
        }
    }
    println!("squared-norm-gap bound on the symmetric form held in {held}/{runs} runs");
}

/// Reported, not asserted: on examinee-level models the split-half
/// correlation usually falls below the split reliability.
#[test]
fn split_half_correlation_versus_reliability() {
    for kind in [ModelKind::D1, ModelKind::D3] {
        let (mut premise, mut runs) = (0, 0);
        for seed in 0..100 {
            let m = generate(&SimModel::new(kind, 200, 50, 1000 + seed)).unwrap();
            let a = analyze(&m, AnalysisOptions::default()).unwrap();
            if let Some(r_gh) = a.reliability.r_gh {
                runs += 1;
                premise += usize::from(r_gh >= a.reliability.r_tt);
            }
        }
        println!("{kind}: r_gh >= r_tt in {premise}/{runs} seeded runs");
    }
}
