use ndarray::Array2;
use proptest::prelude::*;

use psa_core::extensions::{apply_mixed_strategy, apply_risk_aversion, multi_ce};
use psa_core::io;
use psa_core::render::{
    build_plot, ceac_spec, density1, efficiency_frontier, eib_spec, evi_spec, render_svg, FrontierStatus, SeriesStyle,
    PLOT_NAMES,
};
use psa_core::{Analysis, Extensions, PsaDataset};

fn analysis_strategy() -> impl Strategy<Value = Analysis> {
    (3usize..60, 2usize..5).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(0.0..2.0f64, n * m),
            proptest::collection::vec(0.0..100.0f64, n * m),
            0..m,
            10.0..200.0f64,
        )
            .prop_map(move |(e, c, r, kmax)| {
                let d = PsaDataset::unlabelled(
                    Array2::from_shape_vec((n, m), e).unwrap(),
                    Array2::from_shape_vec((n, m), c).unwrap(),
                )
                .unwrap();
                Analysis::builder(d, r).kmax(kmax).grid_points(41).build().unwrap()
            })
    })
}

fn extensions(a: &Analysis) -> Extensions {
    Extensions {
        multi_ce: Some(multi_ce(a)),
        risk_aversion: Some(apply_risk_aversion(a, &[0.0, 0.01]).unwrap()),
        mixed: Some(apply_mixed_strategy(a, None).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_plot_is_valid_and_deterministic(a in analysis_strategy()) {
        let ext = extensions(&a);
        for name in PLOT_NAMES {
            let spec = build_plot(name, &a, &ext, None, None).unwrap();
            prop_assert!(spec.validate().is_ok(), "{name}: {:?}", spec.validate());
            let svg = render_svg(&spec);
            prop_assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
            prop_assert_eq!(&svg, &render_svg(&build_plot(name, &a, &ext, None, None).unwrap()));
        }
    }

    #[test]
    fn curves_cover_the_grid(a in analysis_strategy()) {
        let n_k = a.grid().len();
        let ceac = ceac_spec(&a).unwrap();
        prop_assert_eq!(ceac.series.len(), a.comparisons().len());
        for s in &ceac.series {
            prop_assert_eq!(s.data.len(), n_k);
            prop_assert!(s.data.iter().all(|p| (0.0..=1.0).contains(&p[1])));
        }
        let eib = eib_spec(&a).unwrap();
        for (j, s) in eib.series.iter().enumerate() {
            prop_assert!(s.data.iter().zip(a.eib().column(j)).all(|(p, v)| p[1] == *v));
        }
        let evi = evi_spec(&a).unwrap();
        prop_assert!(evi.series[0].data.iter().zip(a.evi()).all(|(p, v)| p[1] == *v));
        prop_assert!(evi.series.iter().all(|s| s.style == SeriesStyle::Line));
    }

    #[test]
    fn density_integrates_to_one(sample in proptest::collection::vec(-50.0..50.0f64, 5..300)) {
        let d = density1(&sample);
        prop_assert!(d.bandwidth > 0.0);
        prop_assert!(d.y.iter().all(|&v| v >= 0.0));
        prop_assert!((d.integral() - 1.0).abs() < 0.02, "integral {}", d.integral());
    }

    #[test]
    fn frontier_is_convex_and_undominated(points in proptest::collection::vec((0.0..10.0f64, 0.0..1000.0f64), 2..8)) {
        let f = efficiency_frontier(&points);
        prop_assert!(!f.arms.is_empty());
        prop_assert!(f.icers.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(f.icers.len() + 1, f.arms.len());
        for &i in &f.arms {
            prop_assert_eq!(f.status[i], FrontierStatus::Efficient);
            let dominated = (0..points.len()).any(|j| {
                j != i && points[j].0 >= points[i].0 && points[j].1 <= points[i].1 && points[j] != points[i]
            });
            prop_assert!(!dominated);
        }
        for w in f.arms.windows(2) {
            prop_assert!(points[w[0]].0 < points[w[1]].0);
        }
    }

    #[test]
    fn csv_files_round_trip(a in analysis_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let (e, c) = (dir.path().join("e.csv"), dir.path().join("c.csv"));
        io::save_psa_csv(a.dataset(), &e, &c).unwrap();
        let loaded = io::load_psa(&e, Some(&c), None).unwrap();
        prop_assert_eq!(&loaded.value, a.dataset());
    }

    #[test]
    fn archive_round_trip_is_exact(a in analysis_strategy()) {
        let ext = extensions(&a);
        let text = io::to_archive_json(&a, &ext);
        let loaded = io::parse_archive(&text, "archive").unwrap();
        prop_assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
        prop_assert_eq!(&loaded.analysis, &a);
        prop_assert_eq!(&loaded.extensions, &ext);
        prop_assert_eq!(io::to_archive_json(&loaded.analysis, &loaded.extensions), text);
    }
}
