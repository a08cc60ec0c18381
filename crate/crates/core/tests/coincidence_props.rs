use koopman_core::coincidence::{self, compress, generate, match_events, validate_stream, Model, SimConfig};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = SimConfig> {
    (1e3f64..3e5, 0u64..3000, 20u64..500, 0.0f64..2.0, 1u64..10, any::<u64>(), any::<bool>()).prop_map(
        |(pair_rate, dead_time_ns, period, jitter, window_ns, seed, lhv)| SimConfig {
            pair_rate,
            dead_time_ns,
            eom_switch_period_ns: period,
            timing_jitter_ns: jitter,
            eom_blanking_ns: jitter + 1.0,
            window_ns,
            duration_ns: 2_000_000,
            seed,
            model: if lhv { Model::Lhv } else { Model::Quantum },
            ..SimConfig::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streams_respect_dead_time_and_order(cfg in config()) {
        let s = generate(&cfg).unwrap();
        prop_assert!(validate_stream(&s.alice, Some(cfg.dead_time_ns), 0).is_ok());
        prop_assert!(validate_stream(&s.bob, Some(cfg.dead_time_ns), 0).is_ok());
    }

    #[test]
    fn same_seed_same_streams(cfg in config()) {
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        prop_assert_eq!(a.alice, b.alice);
        prop_assert_eq!(a.bob, b.bob);
    }

    #[test]
    fn no_valid_event_near_a_switch(cfg in config()) {
        let s = generate(&cfg).unwrap();
        let alice = compress(&s.alice, &s.alice_eom, cfg.eom_blanking_ns);
        for e in alice.iter().filter(|e| e.valid) {
            let lo = e.t_ns.saturating_sub(cfg.eom_blanking_ns.ceil() as u64);
            let hi = e.t_ns + cfg.eom_blanking_ns.ceil() as u64;
            let near = s.alice_eom.switches_between(lo, hi).into_iter().any(|t| (t.abs_diff(e.t_ns) as f64) <= cfg.eom_blanking_ns);
            prop_assert!(!near);
        }
    }

    #[test]
    fn matching_is_symmetric(cfg in config()) {
        let s = generate(&cfg).unwrap();
        let ab = match_events(&s.alice, &s.bob, cfg.window_ns);
        let mut ba: Vec<(usize, usize)> = match_events(&s.bob, &s.alice, cfg.window_ns).pairs.iter().map(|&(j, i)| (i, j)).collect();
        ba.sort_unstable();
        prop_assert_eq!(&ab.pairs, &ba);
        for &(i, j) in &ab.pairs {
            prop_assert!(s.alice[i].t_ns.abs_diff(s.bob[j].t_ns) <= cfg.window_ns);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn slices_sum_to_run_totals(cfg in config(), slice in 50_000u64..900_000, cycles in 1u64..6) {
        let cfg = SimConfig { duration_ns: 1_000_000, ..cfg };
        let r = coincidence::time_resolved(&cfg, cycles, slice).unwrap();
        prop_assert!(r.totals_consistent());
    }
}
