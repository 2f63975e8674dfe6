use num_traits::Signed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zoomquant::consensus::{run_consensus, run_consensus_observed, ConsensusOptions, Frame};
use zoomquant::graph::generate_random_digraph;
use zoomquant::{ExactQuantizer, Rational, Scalar};

fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

/// The output is fully determined by the inputs: `origin + floor(mean) * delta`,
/// where `mean` averages `(Q(x_i) - origin) / delta`.
fn floor_mean_oracle(x: &[Rational], q: &ExactQuantizer) -> Rational {
    let n = Rational::from_int(x.len() as i64);
    let units = x
        .iter()
        .fold(r(0, 1), |a, v| a + (q.quantize(v) - q.basis().clone()) / q.delta().clone());
    q.basis().clone() + (units / n).floor() * q.delta().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_conserves_and_matches_oracle(
        n in 2usize..12,
        p in 0.0f64..0.6,
        seed in any::<u64>(),
        nums in proptest::collection::vec(-300i64..300, 12),
        basis in -20i64..20,
        delta_den in 1i64..12,
    ) {
        let g = generate_random_digraph(n, p, seed).unwrap();
        let q = ExactQuantizer::new(r(basis, 7), r(3, delta_den), r(4, 3), r(2, 1)).unwrap();
        let x: Vec<Rational> = nums[..n].iter().map(|&v| r(v, 50)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut first = None;
        let mut broken = false;
        let out = run_consensus_observed(&g, &x, &q, &ConsensusOptions::default(), &mut rng, |e| {
            let t = e.totals();
            let f = first.get_or_insert_with(|| t.clone());
            broken |= *f != t || t.1 != 2 * n as u64;
        })
        .unwrap();
        prop_assert!(!broken);
        prop_assert!(out.values.iter().all(|v| v == out.value()));
        prop_assert_eq!(out.value(), &floor_mean_oracle(&x, &q));
        let mean = x.iter().fold(r(0, 1), |a, v| a + q.quantize(v)) / Rational::from_int(n as i64);
        prop_assert!((out.value().clone() - mean).abs() <= *q.delta());
    }
}

#[test]
fn same_seed_same_run() {
    let g = generate_random_digraph(15, 0.2, 3).unwrap();
    let q = ExactQuantizer::new(r(0, 1), r(1, 2), r(4, 3), r(2, 1)).unwrap();
    let x: Vec<Rational> = (0..15).map(|i| r(i * 13 % 40 - 20, 10)).collect();
    let run = |s| run_consensus(&g, &x, &q, &ConsensusOptions::default(), &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
    let (a, b) = (run(9), run(9));
    assert_eq!(a.values, b.values);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn frames_coincide_on_grid_bases() {
    let g = generate_random_digraph(8, 0.3, 1).unwrap();
    let q = ExactQuantizer::new(r(3, 2), r(1, 2), r(4, 3), r(2, 1)).unwrap();
    let x: Vec<Rational> = (0..8).map(|i| r(i * 7 % 9, 4)).collect();
    let run = |frame| {
        let opts = ConsensusOptions { frame, ..ConsensusOptions::default() };
        run_consensus(&g, &x, &q, &opts, &mut ChaCha8Rng::seed_from_u64(2)).unwrap().values
    };
    assert_eq!(run(Frame::Absolute), run(Frame::BasisRelative));
}

#[test]
fn float_and_exact_agree_on_dyadic_inputs() {
    let g = generate_random_digraph(10, 0.3, 4).unwrap();
    let qe = ExactQuantizer::new(r(0, 1), r(1, 2), r(4, 3), r(2, 1)).unwrap();
    let qf = zoomquant::FloatQuantizer::new(0.0, 0.5, 4.0 / 3.0, 2.0).unwrap();
    let xe: Vec<Rational> = (0..10).map(|i| r(i * 5 % 11 - 5, 8)).collect();
    let xf: Vec<f64> = xe.iter().map(|v| v.to_f64_lossy()).collect();
    let opts = ConsensusOptions::default();
    let e = run_consensus(&g, &xe, &qe, &opts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let f = run_consensus(&g, &xf, &qf, &opts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(e.value().to_f64_lossy(), *f.value());
}
