mod common;

use freelimit::arrays::{
    bridge_gap, build_array, centering, condition3, f_nk, f_nk_cauchy, lemma31_check, ArrayKind, Row, TriangularArray,
};
use freelimit::Measure;
use proptest::prelude::*;

fn row() -> impl Strategy<Value = Row> {
    (-1.0..1.0f64, prop::collection::vec(common::measure_within(3.0), 1..5))
        .prop_map(|(c, ms)| Row::new(c, ms, None).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn f_maps_into_closed_lower_half_plane(m in common::measure_within(3.0), z in common::upper_half_plane()) {
        let f = f_nk(&m, z).unwrap();
        prop_assert!(f.im <= 1e-12 * (1.0 + f.norm()), "Im f = {}", f.im);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn f_formulas_agree_on_atoms(m in common::atomic_within(3.0, 6), z in common::upper_half_plane()) {
        let a = f_nk(&m, z).unwrap();
        let b = f_nk_cauchy(&m, z).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()) / z.im.min(1.0), "{a} vs {b}");
    }

    #[test]
    fn bridge_identity_per_entry(m in common::measure_within(3.0), z in common::upper_half_plane()) {
        let arr = TriangularArray::new(vec![Row::new(0.0, vec![m], None).unwrap()]).unwrap();
        let data = condition3(&arr, 0).unwrap();
        let gap = bridge_gap(&arr.rows[0], &data, z).unwrap();
        prop_assert!(gap <= 1e-10 * (1.0 + z.norm()), "{gap}");
    }

    #[test]
    fn bridge_identity_per_row(r in row(), z in common::upper_half_plane()) {
        let arr = TriangularArray::new(vec![r]).unwrap();
        let data = condition3(&arr, 0).unwrap();
        let gap = bridge_gap(&arr.rows[0], &data, z).unwrap();
        prop_assert!(gap <= 1e-9 * (1.0 + z.norm()), "{gap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lemma31_inequalities_hold(r in row()) {
        for y in [1.0, 2.0, 5.0, 10.0] {
            let v = lemma31_check(&r, y).unwrap();
            prop_assert!(v.first <= 1e-9, "y = {y}: first {}", v.first);
            prop_assert!(v.second <= 1e-9, "y = {y}: second {}", v.second);
            if !v.second_applies {
                prop_assert_eq!(v.second, 0.0);
            }
        }
    }

    #[test]
    fn sigma_mass_is_bounded_by_running_sup(rows in prop::collection::vec(row(), 1..5)) {
        let arr = TriangularArray::new(rows).unwrap();
        let mut last_l: f64 = 0.0;
        for i in 0..arr.rows.len() {
            let d = condition3(&arr, i).unwrap();
            prop_assert!(d.sigma_n.total_mass() <= d.l + 1e-12);
            prop_assert!(d.l >= last_l);
            last_l = d.l;
        }
    }
}

/// On densities the integral form is a trapezoid sum, so the gap is O(h²).
#[test]
fn f_formulas_converge_on_densities() {
    let z = num_complex::Complex64::new(0.3, 0.5);
    let gap = |n: usize| {
        let values = (0..n)
            .map(|j| 1.0 - (2.0 * j as f64 / (n - 1) as f64 - 1.0).abs())
            .collect();
        let m = Measure::from_density(-1.0, 1.0, values).unwrap().normalized().unwrap();
        (f_nk(&m, z).unwrap() - f_nk_cauchy(&m, z).unwrap()).norm()
    };
    let (coarse, fine) = (gap(65), gap(129));
    assert!(fine < 0.3 * coarse && fine < 1e-3, "{coarse} {fine}");
}

#[test]
fn truncated_means_shrink_with_n() {
    // mean zero, with an atom outside [-1, 1] until n = 256
    let m = Measure::from_atoms(&[(-1.0, 0.9), (9.0, 0.1)]).unwrap();
    let arr = build_array(&ArrayKind::IidScaledFromMeasure { measure: m }, &[4, 16, 64, 256]).unwrap();
    let a: Vec<f64> = arr.rows.iter().map(|r| centering(r).max_abs_a()).collect();
    assert!(a.windows(2).all(|w| w[1] < w[0]), "{a:?}");
    assert!((a[0] - 0.45).abs() < 1e-12, "{a:?}");
}

#[test]
fn custom_rows_file_round_trip() {
    let rows = vec![
        Row::new(
            0.5,
            vec![Measure::from_atoms(&[(-0.25, 0.5), (0.25, 0.5)]).unwrap(); 3],
            Some(3),
        )
        .unwrap(),
        Row::new(
            0.0,
            vec![Measure::from_density(-1.0, 1.0, vec![0.0, 1.0, 0.0]).unwrap()],
            Some(9),
        )
        .unwrap(),
    ];
    let kind: ArrayKind = serde_json::from_value(serde_json::json!({ "kind": "custom_rows", "rows": rows })).unwrap();
    let arr = build_array(&kind, &[]).unwrap();
    assert_eq!(arr.label(1), 9);

    let path = std::env::temp_dir().join(format!("freelimit-rows-{}.json", std::process::id()));
    arr.write(&path).unwrap();
    let back = TriangularArray::read(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back, arr);
}
