use proptest::prelude::*;

use super::*;
use crate::dbht::dbht_cluster;
use crate::ingest::{
    generate_regime_panel, generate_synthetic_panel, planted_sector_table, BlockModelSpec,
    RegimeSegment,
};

fn spec(n_assets: usize, n_blocks: usize, n_days: usize, seed: u64) -> BlockModelSpec {
    BlockModelSpec {
        n_assets,
        n_blocks,
        block_loading: 0.7,
        market_loading: 0.5,
        noise_sigma: 0.5,
        n_days,
        seed,
    }
}

fn cfg(window_length: usize, shift: usize) -> RollingConfig {
    RollingConfig {
        window_length,
        shift,
        ..RollingConfig::default()
    }
}

#[test]
fn window_counts() {
    assert_eq!(make_windows(1000, 1000, 30).unwrap().len(), 1);
    let w = make_windows(1060, 1000, 30).unwrap();
    assert_eq!(
        w.iter().map(|w| w.start).collect::<Vec<_>>(),
        vec![0, 30, 60]
    );
    assert!(w.iter().all(|w| w.end - w.start == 1000));
    assert_eq!(make_windows(4026, 1000, 30).unwrap().len(), 101);
    assert!(make_windows(999, 1000, 30).is_err());
    assert!(make_windows(100, 10, 0).is_err());
    assert!(make_windows(100, 1, 1).is_err());
}

#[test]
fn defaults_follow_study_parameters() {
    let c = RollingConfig::default();
    assert_eq!(
        (c.window_length, c.shift, c.detrend, c.uniform),
        (1000, 30, true, false)
    );
    assert!((c.resolved_theta() - 1000.0 / 3.0).abs() < 1e-12);
}

#[test]
fn single_window_matches_direct_clustering() {
    let (panel, _) = generate_synthetic_panel::<f64>(&spec(24, 4, 400, 2)).unwrap();
    let rr = run_rolling(&panel, &cfg(400, 30)).unwrap();
    assert_eq!(rr.len(), 1);
    let detrended = crate::estimator::detrend_market_mode(&panel)
        .unwrap()
        .into_panel(&panel);
    let w = crate::estimator::exponential_weights(400, 400.0 / 3.0).unwrap();
    let c = weighted_correlation(&detrended, &w).unwrap();
    let direct = dbht_cluster(&correlation_to_distance(&c)).unwrap();
    assert_eq!(rr.clusterings[0], direct);
    assert_eq!(rr.end_dates[0], *panel.dates().last().unwrap());
    assert!(persistence_series(&rr).is_err());
}

#[test]
fn stationary_panel_is_persistent() {
    let (panel, planted) = generate_synthetic_panel::<f64>(&spec(36, 6, 1000, 3)).unwrap();
    let rr = run_rolling(&panel, &cfg(600, 200)).unwrap();
    assert_eq!(rr.len(), 3);
    let s = clustering_similarity_matrix(&rr).unwrap();
    let z = metacorrelation_matrix(&rr).unwrap();
    for a in 0..3 {
        assert_eq!(s[[a, a]], 1.0);
        assert_eq!(z[[a, a]], 1.0);
        for b in 0..3 {
            assert!(s[[a, b]] >= 0.8);
            assert_eq!(s[[a, b]], s[[b, a]]);
            assert_eq!(z[[a, b]], z[[b, a]]);
            if a != b {
                assert!(z[[a, b]] > 0.5);
            }
        }
    }
    let p = persistence_series(&rr).unwrap();
    assert_eq!(p.len(), 2);
    for &(k, v) in &p {
        assert_eq!(v, s[[k - 1, k]]);
    }
    for (c, &n) in rr.clusterings.iter().zip(&rr.n_clusters_series) {
        let mut distinct = c.labels().to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), n);
    }

    let sectors = planted_sector_table(&planted).unwrap();
    let icb = icb_similarity_series(&rr, &sectors, IcbLevel::Industry).unwrap();
    assert_eq!(icb.len(), 3);
    assert!(icb.iter().all(|&x| x >= 0.9), "{icb:?}");

    let records =
        track_cluster_evolution(&planted, &rr, &sectors, 0.01, TestStatistic::Tail).unwrap();
    assert_eq!(records.len(), 6);
    for r in &records {
        for p in &r.points {
            assert!(p.size > 0);
            assert_eq!(p.histogram.iter().sum::<usize>(), p.size);
        }
    }
}

#[test]
fn self_match_at_own_window() {
    let (panel, planted) = generate_synthetic_panel::<f64>(&spec(30, 3, 900, 4)).unwrap();
    let rr = run_rolling(&panel, &cfg(300, 300)).unwrap();
    let sectors = planted_sector_table(&planted).unwrap();
    for k in 0..rr.len() {
        let bench = &rr.clusterings[k];
        let records =
            track_cluster_evolution(bench, &rr, &sectors, 0.01, TestStatistic::Tail).unwrap();
        assert_eq!(records.len(), bench.n_clusters());
        for r in &records {
            if r.benchmark_size > 1 {
                assert_eq!(r.points[k].size, r.benchmark_size);
                assert_eq!(r.points[k].matched_cluster, Some(r.benchmark_cluster));
            }
        }
    }
}

fn two_regime(n_windows: usize, l: usize) -> (ReturnsPanel<f64>, Vec<Clustering>, BlockModelSpec) {
    let s = spec(30, 3, 0, 5);
    let half = n_windows / 2 * l;
    let segs = [
        RegimeSegment {
            n_days: half,
            assignment: s.default_assignment(),
        },
        RegimeSegment {
            n_days: n_windows * l - half,
            assignment: s.shuffled_assignment(99),
        },
    ];
    let (panel, planted) = generate_regime_panel(&s, &segs, None).unwrap();
    (panel, planted, s)
}

#[test]
fn regime_switch_shows_in_persistence_and_similarity() {
    let (panel, _, _) = two_regime(6, 250);
    let rr = run_rolling(&panel, &cfg(250, 250)).unwrap();
    assert_eq!(rr.len(), 6);
    let p = persistence_series(&rr).unwrap();
    let min = p.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(min.0, 3);
    let s = clustering_similarity_matrix(&rr).unwrap();
    let z = metacorrelation_matrix(&rr).unwrap();
    let cs = block_contrast(&s, 3).unwrap();
    let cz = block_contrast(&z, 3).unwrap();
    assert!(cs >= 0.3, "{cs}");
    assert!(cz < cs, "{cz} {cs}");
}

#[test]
fn dissolved_block_loses_its_match() {
    let s = spec(30, 3, 0, 6);
    let after = s.dissolved_assignment(1);
    let segs = [
        RegimeSegment {
            n_days: 600,
            assignment: s.default_assignment(),
        },
        RegimeSegment {
            n_days: 600,
            assignment: after,
        },
    ];
    let (panel, planted) = generate_regime_panel::<f64>(&s, &segs, None).unwrap();
    let rr = run_rolling(&panel, &cfg(300, 300)).unwrap();
    let sectors = planted_sector_table(&planted[0]).unwrap();
    let records =
        track_cluster_evolution(&planted[0], &rr, &sectors, 0.01, TestStatistic::Tail).unwrap();
    for r in &records {
        let sizes: Vec<usize> = r.points.iter().map(|p| p.size).collect();
        if r.benchmark_cluster == 1 {
            assert!(sizes[..2].iter().all(|&x| x > 0), "{sizes:?}");
            assert!(sizes[2..].iter().all(|&x| x == 0), "{sizes:?}");
        } else {
            assert!(sizes.iter().all(|&x| x > 0), "{sizes:?}");
        }
    }
}

#[test]
fn detrending_helps_under_strong_market() {
    let (mut on, mut off) = (0.0, 0.0);
    for seed in 0..8 {
        let s = BlockModelSpec {
            n_assets: 40,
            n_blocks: 4,
            block_loading: 0.3,
            market_loading: 0.9,
            noise_sigma: 0.9,
            n_days: 500,
            seed,
        };
        let (panel, planted) = generate_synthetic_panel::<f64>(&s).unwrap();
        for detrend in [true, false] {
            let rr = run_rolling(
                &panel,
                &RollingConfig {
                    detrend,
                    ..cfg(500, 30)
                },
            )
            .unwrap();
            let ari = adjusted_rand_index(&planted, &rr.clusterings[0]).unwrap();
            *if detrend { &mut on } else { &mut off } += ari / 8.0;
        }
    }
    assert!(on > off, "{on} {off}");
}

#[test]
fn window_failure_names_the_window() {
    let (panel, _) = generate_synthetic_panel::<f64>(&spec(12, 3, 200, 8)).unwrap();
    let mut r = panel.returns().to_owned();
    r.column_mut(4).slice_mut(ndarray::s![100..]).fill(0.0);
    let broken =
        ReturnsPanel::new(panel.dates().to_vec(), panel.tickers().to_vec(), r, false).unwrap();
    let cfg = RollingConfig {
        detrend: false,
        ..cfg(50, 50)
    };
    match run_rolling(&broken, &cfg) {
        Err(Error::Window { index, source }) => {
            assert_eq!(index, 2);
            assert!(matches!(*source, Error::ZeroVariance { .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let (panel, _) = generate_synthetic_panel::<f64>(&spec(30, 3, 800, 9)).unwrap();
    let run = |jobs| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .unwrap()
            .install(|| {
                let rr = run_rolling(&panel, &cfg(300, 100)).unwrap();
                let z = metacorrelation_matrix(&rr).unwrap();
                (rr, z)
            })
    };
    let (a, za) = run(1);
    let (b, zb) = run(4);
    assert_eq!(a.clusterings, b.clusterings);
    for (x, y) in a.correlations.iter().zip(&b.correlations) {
        assert_eq!(x.rho(), y.rho());
    }
    assert_eq!(za, zb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn windows_tile_the_panel(total in 2usize..5000, length in 2usize..2000, shift in 1usize..200) {
        match make_windows(total, length, shift) {
            Ok(w) => {
                prop_assert_eq!(w.len(), (total - length) / shift + 1);
                for (k, win) in w.iter().enumerate() {
                    prop_assert_eq!(win.index, k);
                    prop_assert_eq!(win.end - win.start, length);
                    prop_assert!(win.end <= total);
                    if k > 0 {
                        prop_assert_eq!(win.start - w[k - 1].start, shift);
                    }
                }
                prop_assert!(w.last().unwrap().end + shift > total);
            }
            Err(_) => prop_assert!(total < length),
        }
    }
}
