use dlsa_core::channel::ChannelState;
use dlsa_core::dlsa::{decide, optimal_link_power};
use dlsa_core::engine::{SimOptions, Simulator};
use dlsa_core::model::build_graph;
use dlsa_core::NetworkConfig;
use proptest::prelude::*;

const N: usize = 4;

fn slot_inputs() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, f64)> {
    (
        prop::collection::vec(prop::collection::vec(0.0..500.0f64, N), N),
        prop::collection::vec(0.0..50.0f64, N),
        prop::collection::vec(prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 2.0, 3.0]), N), N),
        prop::sample::select(vec![1.0, 10.0, 100.0, 1000.0]),
    )
        .prop_map(|(mut q, z, a, v)| {
            for (i, row) in q.iter_mut().enumerate() {
                row[i] = 0.0;
            }
            (q, z, a, v)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decisions_are_feasible((q, z, alpha, v) in slot_inputs()) {
        let cfg = NetworkConfig::reference_mesh().with_v(v);
        let graph = build_graph(&cfg).unwrap();
        let state = ChannelState::from_alpha(alpha);
        let d = decide(&cfg, &graph, &q, &z, &state, 20).unwrap();
        prop_assert!(d.exact);
        for i in 0..N {
            let out = (0..N).filter(|&j| d.gamma[i][j]).count();
            let inn = (0..N).filter(|&j| d.gamma[j][i]).count();
            prop_assert!(out <= cfg.out_degree_limit && inn <= cfg.in_degree_limit);
            for c in 0..N {
                prop_assert!((0.0..=cfg.admission_cap).contains(&d.admissions[i][c]));
            }
            for j in 0..N {
                prop_assert_eq!(d.gamma[i][j], d.gamma[j][i]);
                let p = d.power[i][j];
                prop_assert!((0.0..=cfg.power_cap).contains(&p));
                if !d.gamma[i][j] {
                    prop_assert_eq!(p, 0.0);
                    prop_assert_eq!(d.link_rates[i][j], 0.0);
                }
                let routed: f64 = d.commodity_rates[i][j].iter().sum();
                prop_assert!(routed <= d.link_rates[i][j] + 1e-12);
                for c in 0..N {
                    if d.commodity_rates[i][j][c] > 0.0 {
                        prop_assert!(q[i][c] > q[j][c]);
                    }
                }
            }
        }
        prop_assert!(d.link_objective >= 0.0);
    }

    #[test]
    fn exact_selection_dominates_greedy((q, z, alpha, v) in slot_inputs()) {
        let cfg = NetworkConfig::reference_mesh().with_v(v);
        let graph = build_graph(&cfg).unwrap();
        let state = ChannelState::from_alpha(alpha);
        let exact = decide(&cfg, &graph, &q, &z, &state, 20).unwrap();
        let greedy = decide(&cfg, &graph, &q, &z, &state, 0).unwrap();
        prop_assert!(!greedy.exact);
        prop_assert!(exact.link_objective >= greedy.link_objective - 1e-9);
        prop_assert_eq!(&exact.admissions, &greedy.admissions);
    }

    #[test]
    fn link_power_beats_grid(w in 0.0..2000.0f64, z in 0.0..500.0f64, alpha in 0.0..4.0f64) {
        let p_max = 6.0;
        let best = optimal_link_power(w, z, alpha, p_max);
        prop_assert!((0.0..=p_max).contains(&best.power));
        prop_assert!(best.gain >= 0.0);
        for k in 0..=600 {
            let p = p_max * k as f64 / 600.0;
            let g = w * (alpha * p).ln_1p() - z * p;
            prop_assert!(best.gain >= g - 1e-9 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn trajectories_conserve_packets(seed in 0u64..1000, v in prop::sample::select(vec![1.0, 50.0, 500.0])) {
        let cfg = NetworkConfig::reference_mesh().with_v(v).with_seed(seed).with_horizon(150);
        let options = SimOptions { check_invariants: true, ..SimOptions::default() };
        let mut sim = Simulator::new(&cfg, options).unwrap();
        let mut admitted = 0.0;
        let mut prev = sim.state().clone();
        for _ in 0..150 {
            let out = sim.step().unwrap();
            admitted += out.decision.admissions.iter().flatten().sum::<f64>();
            let next = sim.state();
            for (i, row) in next.backlog.iter().enumerate() {
                prop_assert_eq!(row[i], 0.0);
                for (c, &x) in row.iter().enumerate() {
                    let served: f64 = out.decision.commodity_rates[i].iter().map(|r| r[c]).sum();
                    let arrived: f64 = (0..N).map(|j| out.decision.commodity_rates[j][i][c]).sum();
                    let bound = (prev.backlog[i][c] - served).max(0.0) + arrived + out.decision.admissions[i][c];
                    prop_assert!(x >= 0.0 && x <= bound + 1e-9);
                }
            }
            prev = next.clone();
        }
        let m = sim.metrics();
        let delivered: f64 = m.delivered.iter().sum();
        let left = m.final_state.total_backlog();
        prop_assert!((admitted - delivered - left).abs() <= 1e-6 * admitted.max(1.0));
    }
}
