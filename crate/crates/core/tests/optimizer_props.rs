use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zoomquant::consensus::run_consensus;
use zoomquant::optimizer::{gradient_step, zoom_decide};
use zoomquant::runner::{Experiment, PolicySpec, RunConfig, StopSpec};
use zoomquant::{ExactQuantizer, Rational, ZoomEvent};

fn small(seed: u64) -> RunConfig {
    RunConfig {
        nodes: 8,
        edge_prob: 0.3,
        seed,
        stop: StopSpec {
            max_steps: Some(150),
            target_error: None,
        },
        ..RunConfig::default()
    }
}

/// Every node keeps its own quantizer and zooms on its own consensus output;
/// all copies must match the single shared state the optimizer keeps.
#[test]
fn per_node_quantizers_stay_in_lockstep() {
    for seed in 0..6 {
        let exp = Experiment::build(&small(seed)).unwrap();
        let cfg = &exp.config;
        let shared = exp.run().unwrap();

        let q0 = exp.quantizer(&PolicySpec::Adaptive, &cfg.delta0.0).unwrap();
        let n = exp.graph.node_count();
        let mut copies: Vec<ExactQuantizer> = vec![q0; n];
        let mut x = exp.x_init.clone();
        let mut rng = {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(3);
            r
        };
        let opt = exp.optimizer(&PolicySpec::Adaptive);
        for rec in &shared {
            assert!(copies.iter().all(|c| c.delta() == &rec.delta && c.basis() == &rec.basis));
            let half = gradient_step(&x, exp.costs.costs(), &cfg.alpha.0);
            let out = run_consensus(&exp.graph, &half, &copies[0], &opt.consensus, &mut rng).unwrap();
            let common = x.iter().all(|v| *v == x[0]);
            for (i, c) in copies.iter_mut().enumerate() {
                if common {
                    let (next, ev) = zoom_decide(c, &out.values[i], &x[i], &opt.policy);
                    assert_eq!(ev, rec.event);
                    *c = next;
                }
            }
            x = out.values;
            assert_eq!(x[0], rec.x);
        }
    }
}

#[test]
fn level_keeps_shrinking_after_first_zoom_in() {
    for seed in 0..8 {
        let exp = Experiment::build(&small(seed)).unwrap();
        let h = exp.run().unwrap();
        let Some(start) = h.iter().position(|r| r.event == ZoomEvent::ZoomIn) else {
            continue;
        };
        let deltas: Vec<&Rational> = h[start..].iter().map(|r| &r.delta).collect();
        for w in deltas.windows(50) {
            assert!(w.windows(2).any(|p| p[1] < p[0]), "seed {seed}: delta flat for 50 steps");
        }
    }
}

#[test]
fn zoom_outs_precede_zoom_ins_from_far_start() {
    let mut cfg = small(2);
    cfg.delta0 = zoomquant::runner::exact(1, 20);
    let h = Experiment::build(&cfg).unwrap().run().unwrap();
    let first_out = h.iter().position(|r| r.event == ZoomEvent::ZoomOut);
    let first_in = h.iter().position(|r| r.event == ZoomEvent::ZoomIn);
    assert!(first_out.is_some() && first_in.is_some());
    assert!(first_out < first_in);
}
