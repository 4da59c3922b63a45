use splithalf::examinee_totals;
use splithalf::simulate::{generate, scaling_suite, ModelKind, SimModel};

fn variance(v: &[u64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<u64>() as f64 / n;
    v.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / n
}

#[test]
fn identical_models_give_identical_matrices() {
    for kind in ModelKind::ALL {
        let model = SimModel::new(kind, 120, 30, 2024);
        let (a, b) = (generate(&model).unwrap(), generate(&model).unwrap());
        assert_eq!(a, b);
        let ra = splithalf::analyze(&a, Default::default()).unwrap().reliability.r_tt;
        let rb = splithalf::analyze(&b, Default::default()).unwrap().reliability.r_tt;
        assert_eq!(ra.to_bits(), rb.to_bits());
    }
}

#[test]
fn uniform_examinee_model_mean_entry_is_one_half() {
    for seed in 0..5 {
        let m = generate(&SimModel::new(ModelKind::D1, 5_000, 10, seed)).unwrap();
        let ones: u64 = examinee_totals(&m).totals.iter().sum();
        let mean = ones as f64 / (m.n_examinees() * m.n_items()) as f64;
        assert!((mean - 0.5).abs() < 0.02, "seed {seed}: {mean}");
    }
}

#[test]
fn item_models_have_small_score_variance() {
    for seed in 0..10 {
        let v = |kind| variance(&examinee_totals(&generate(&SimModel::new(kind, 999, 50, seed)).unwrap()).totals);
        let (d1, d2, d3, d4) = (v(ModelKind::D1), v(ModelKind::D2), v(ModelKind::D3), v(ModelKind::D4));
        assert!(d2 < d1 / 5.0, "seed {seed}: {d2} vs {d1}");
        assert!(d4 < d3 / 5.0, "seed {seed}: {d4} vs {d3}");
    }
}

#[test]
fn scaling_suite_reports_each_size() {
    let rows = scaling_suite(&[(200, 20), (400, 40)], ModelKind::D3, 5).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[1].n_examinees, rows[1].n_items), (400, 40));
    assert!(rows.iter().all(|r| r.r_tt > 0.5 && r.total_seconds >= r.generate_seconds));
    assert!(scaling_suite(&[], ModelKind::D1, 0).is_err());
}
