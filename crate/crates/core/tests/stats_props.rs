use ndarray::Array2;
use proptest::prelude::*;

use psa_core::extensions::{apply_mixed_strategy, apply_risk_aversion, multi_ce};
use psa_core::voi::{create_inputs, evppi, EvppiMethod, EvppiOptions};
use psa_core::{stats, Analysis, PsaDataset, Utility};

#[derive(Debug, Clone)]
struct Case {
    effects: Array2<f64>,
    costs: Array2<f64>,
    reference: usize,
    kmax: f64,
    points: usize,
}

impl Case {
    fn analysis(&self) -> Analysis {
        let d = PsaDataset::unlabelled(self.effects.clone(), self.costs.clone()).unwrap();
        Analysis::builder(d, self.reference)
            .kmax(self.kmax)
            .grid_points(self.points)
            .build()
            .unwrap()
    }
}

/// Continuous draws, or coarse integers when `ties` is set so exact ties occur.
fn case() -> impl Strategy<Value = Case> {
    (2usize..40, 2usize..5, any::<bool>()).prop_flat_map(|(n, m, ties)| {
        let cell_e = if ties { (0i32..4).prop_map(f64::from).boxed() } else { (-2.0..2.0f64).boxed() };
        let cell_c = if ties { (0i32..6).prop_map(|v| 5.0 * f64::from(v)).boxed() } else { (0.0..100.0f64).boxed() };
        (
            proptest::collection::vec(cell_e, n * m),
            proptest::collection::vec(cell_c, n * m),
            0..m,
            1.0..100.0f64,
            2usize..30,
        )
            .prop_map(move |(e, c, reference, kmax, points)| Case {
                effects: Array2::from_shape_vec((n, m), e).unwrap(),
                costs: Array2::from_shape_vec((n, m), c).unwrap(),
                reference,
                kmax,
                points,
            })
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eib_is_linear_and_ceac_is_a_proportion(c in case()) {
        let a = c.analysis();
        let n = a.n_sim() as f64;
        for j in 0..a.comparisons().len() {
            let me = stats::mean(&a.delta_e().column(j).to_vec());
            let mc = stats::mean(&a.delta_c().column(j).to_vec());
            for (ki, &k) in a.grid().values().iter().enumerate() {
                prop_assert!(close(a.eib()[[ki, j]], k * me - mc, 1e-9));
                let p = a.ceac()[[ki, j]];
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(((p * n) - (p * n).round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn voi_identities(c in case()) {
        let a = c.analysis();
        for ki in 0..a.grid().len() {
            let s = a.slice(ki);
            prop_assert!(a.evi()[ki] >= 0.0);
            prop_assert!(s.ol.iter().all(|&v| v >= 0.0));
            prop_assert!(s.ustar.iter().zip(s.utilities.rows()).all(|(u, row)| row.iter().all(|v| v <= u)));
            prop_assert!(close(stats::mean(&s.ol), a.evi()[ki], 1e-12));
            prop_assert!(close(stats::mean(&s.vi), a.evi()[ki], 1e-9));
            prop_assert_eq!(s.best, a.best()[ki]);
        }
    }

    #[test]
    fn icer_and_break_even(c in case()) {
        let a = c.analysis();
        for icer in a.icer() {
            match icer.value {
                None => prop_assert_eq!(icer.mean_delta_e, 0.0),
                Some(v) => prop_assert!(close(v * icer.mean_delta_e, icer.mean_delta_c, 1e-9)),
            }
        }
        // every break-even point is a grid value where the decision changes
        for &k in a.kstar() {
            let ki = a.k_index(k).unwrap();
            prop_assert_eq!(a.grid().get(ki), k);
            prop_assert!(ki > 0 && a.best()[ki] != a.best()[ki - 1]);
        }
        let changes = a.best().windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(changes, a.kstar().len());
    }

    #[test]
    fn reference_swap_negates_increments(c in case()) {
        let a = c.analysis();
        let other = a.comparisons()[0];
        let b = a.with_reference(other).unwrap();
        let pos = b.comparison_position(a.reference()).unwrap();
        for ki in 0..a.grid().len() {
            prop_assert!(close(a.eib()[[ki, 0]], -b.eib()[[ki, pos]], 1e-9));
            prop_assert!(a.ceac()[[ki, 0]] + b.ceac()[[ki, pos]] <= 1.0 + 1e-12);
        }
        for (x, y) in a.evi().iter().zip(b.evi()) {
            prop_assert!(close(*x, *y, 1e-9));
        }
        prop_assert_eq!(b.with_reference(a.reference()).unwrap(), a);
    }

    #[test]
    fn comparator_changes_keep_arm_level_statistics(c in case()) {
        let a = c.analysis();
        let first = vec![a.comparisons()[0]];
        let narrowed = a.with_comparisons(first.clone()).unwrap();
        prop_assert_eq!(narrowed.evi(), a.evi());
        prop_assert_eq!(narrowed.best(), a.best());
        prop_assert_eq!(narrowed.eib().column(0), a.eib().column(0));
        let restored = narrowed.with_comparisons(a.comparisons().to_vec()).unwrap();
        prop_assert_eq!(&restored, &a);
        prop_assert_eq!(narrowed.with_comparisons(first).unwrap(), narrowed);
    }

    #[test]
    fn multi_ce_is_a_distribution(c in case()) {
        let a = c.analysis();
        let m = multi_ce(&a);
        for ki in 0..a.grid().len() {
            let row = m.p_best.row(ki);
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert_eq!(m.ceaf[ki], row[m.best[ki]]);
        }
    }

    #[test]
    fn risk_aversion_limits(c in case(), r in 1e-4..0.1f64) {
        let a = c.analysis();
        let set = apply_risk_aversion(&a, &[0.0, r]).unwrap();
        prop_assert_eq!(&set.entries[0].eib, a.eib());
        prop_assert_eq!(&set.entries[0].evi, a.evi());
        prop_assert!(set.entries[1].evi.iter().all(|&v| v >= -1e-9));
        // concave utility never exceeds the net benefit
        let utility = Utility::RiskAverse { r };
        for b in [-50.0, -1.0, 0.0, 3.0, 80.0] {
            prop_assert!(utility.eval(b).0 <= b + 1e-12);
        }
    }

    #[test]
    fn mixed_strategy_loses_value(c in case(), w in proptest::collection::vec(0.01..1.0f64, 4)) {
        let a = c.analysis();
        let w = &w[..a.n_int()];
        let total: f64 = w.iter().sum();
        let shares: Vec<f64> = w.iter().map(|v| v / total).collect();
        let mixed = apply_mixed_strategy(&a, Some(&shares)).unwrap();
        for (m, b) in mixed.evi.iter().zip(a.evi()) {
            prop_assert!(*m >= *b - 1e-9 * (1.0 + b.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evppi_is_bounded_by_evpi(
        draws in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 60..120),
        method in prop_oneof![Just(EvppiMethod::Regression), Just(EvppiMethod::Binning), Just(EvppiMethod::NearestNeighbour)],
    ) {
        let n = draws.len();
        let e = Array2::from_shape_fn((n, 2), |(s, t)| if t == 1 { draws[s].0 + 0.3 * draws[s].2 } else { 0.0 });
        let c = Array2::from_shape_fn((n, 2), |(s, t)| if t == 1 { 5.0 * draws[s].1 } else { 0.0 });
        let a = Analysis::builder(PsaDataset::unlabelled(e, c).unwrap(), 0).kmax(20.0).grid_points(21).build().unwrap();
        let p = Array2::from_shape_fn((n, 2), |(s, j)| if j == 0 { draws[s].0 } else { draws[s].1 });
        let names = vec!["x".to_string(), "y".to_string()];
        let inputs = create_inputs(&p, &names, false).unwrap();
        let opts = EvppiOptions { method: Some(method), ..EvppiOptions::default() };
        for subset in [&names[..1], &names[1..], &names[..]] {
            let r = evppi(&a, subset, &inputs, &opts);
            if method == EvppiMethod::Binning && subset.len() > 1 {
                prop_assert!(r.is_err());
                continue;
            }
            let r = r.unwrap();
            prop_assert_eq!(r.evppi.len(), a.grid().len());
            for (v, evpi) in r.evppi.iter().zip(&r.evpi) {
                prop_assert!(*v >= 0.0 && *v <= *evpi);
            }
        }
    }

    #[test]
    fn create_inputs_output_is_clean(
        cols in proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, 30), 1..5),
        mix in proptest::collection::vec(-2.0..2.0f64, 5),
    ) {
        // raw columns, a constant and a combination of the first two
        let n = 30;
        let k = cols.len();
        let combo: Vec<f64> = (0..n).map(|s| cols.iter().zip(&mix).map(|(c, w)| w * c[s]).sum()).collect();
        let raw = Array2::from_shape_fn((n, k + 2), |(s, j)| match j {
            j if j < k => cols[j][s],
            j if j == k => 7.5,
            _ => combo[s],
        });
        let names: Vec<String> = (0..k + 2).map(|j| format!("p{j}")).collect();
        let inputs = create_inputs(&raw, &names, true).unwrap();
        prop_assert!(inputs.dropped().iter().any(|d| d.column == k + 1));
        prop_assert!(inputs.dropped().iter().any(|d| d.column == k + 2));
        let again = create_inputs(inputs.mat(), inputs.names(), true).unwrap();
        prop_assert!(again.dropped().is_empty());
        prop_assert_eq!(again.mat(), inputs.mat());
    }
}
