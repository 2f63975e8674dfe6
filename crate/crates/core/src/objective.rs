//! Local costs, their smoothness constants and the closed-form optimum.

use rand::Rng;

use crate::scalar::Scalar;

/// A smooth, strongly convex local objective.
pub trait LocalCost<S> {
    fn value(&self, x: &S) -> S;
    fn grad(&self, x: &S) -> S;
    /// Lipschitz constant `L_i` of the gradient.
    fn lipschitz(&self) -> S;
    /// Strong-convexity constant `mu_i`.
    fn strong_convexity(&self) -> S;
}

/// `f(x) = beta/2 * (x - x0)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost<S> {
    pub beta: S,
    pub x0: S,
}

impl<S: Scalar> QuadraticCost<S> {
    pub fn new(beta: S, x0: S) -> Result<Self, ObjectiveError> {
        if beta <= S::zero() {
            return Err(ObjectiveError::NonPositiveCurvature(beta.to_string()));
        }
        Ok(Self { beta, x0 })
    }
}

impl<S: Scalar> LocalCost<S> for QuadraticCost<S> {
    fn value(&self, x: &S) -> S {
        let d = x.clone() - self.x0.clone();
        self.beta.clone() * d.clone() * d / S::from_int(2)
    }

    fn grad(&self, x: &S) -> S {
        self.beta.clone() * (x.clone() - self.x0.clone())
    }

    fn lipschitz(&self) -> S {
        self.beta.clone()
    }

    fn strong_convexity(&self) -> S {
        self.beta.clone()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("curvature must be positive, got {0}")]
    NonPositiveCurvature(String),
    #[error("a cost suite needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("value set to draw from is empty")]
    EmptyValueSet,
}

/// One quadratic per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSuite<S> {
    costs: Vec<QuadraticCost<S>>,
}

impl<S: Scalar> CostSuite<S> {
    pub fn new(costs: Vec<QuadraticCost<S>>) -> Result<Self, ObjectiveError> {
        if costs.len() < 2 {
            return Err(ObjectiveError::TooFewNodes(costs.len()));
        }
        Ok(Self { costs })
    }

    pub fn costs(&self) -> &[QuadraticCost<S>] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    /// `L = sum L_i`.
    pub fn lipschitz(&self) -> S {
        self.costs.iter().fold(S::zero(), |acc, c| acc + c.lipschitz())
    }

    /// `mu = sum mu_i`.
    pub fn strong_convexity(&self) -> S {
        self.costs.iter().fold(S::zero(), |acc, c| acc + c.strong_convexity())
    }

    pub fn total_value(&self, x: &S) -> S {
        self.costs.iter().fold(S::zero(), |acc, c| acc + c.value(x))
    }

    pub fn total_grad(&self, x: &S) -> S {
        self.costs.iter().fold(S::zero(), |acc, c| acc + c.grad(x))
    }

    /// Unique minimizer of the summed cost: `sum(beta_i x0_i) / sum(beta_i)`.
    pub fn global_optimum(&self) -> S {
        let (num, den) = self.costs.iter().fold((S::zero(), S::zero()), |(n, d), c| {
            (n + c.beta.clone() * c.x0.clone(), d + c.beta.clone())
        });
        num / den
    }

    /// Largest admissible step size `2n / (mu + L)`.
    pub fn max_step_size(&self, n: usize) -> S {
        max_step_size(&self.strong_convexity(), &self.lipschitz(), n)
    }
}

pub fn grad<S: Scalar>(c: &QuadraticCost<S>, x: &S) -> S {
    c.grad(x)
}

pub fn max_step_size<S: Scalar>(mu: &S, lipschitz: &S, n: usize) -> S {
    S::from_int(2 * n as i64) / (mu.clone() + lipschitz.clone())
}

/// Draws `beta_i` uniformly from `values` for each node. `x0` is drawn once and
/// shared when `shared_x0` is set, otherwise once per node.
pub fn random_cost_suite<S: Scalar, R: Rng + ?Sized>(
    n: usize,
    values: &[S],
    shared_x0: bool,
    rng: &mut R,
) -> Result<CostSuite<S>, ObjectiveError> {
    if n < 2 {
        return Err(ObjectiveError::TooFewNodes(n));
    }
    if values.is_empty() {
        return Err(ObjectiveError::EmptyValueSet);
    }
    let pick = |rng: &mut R| values[rng.gen_range(0..values.len())].clone();
    let common = shared_x0.then(|| pick(rng));
    let costs = (0..n)
        .map(|_| {
            let beta = pick(rng);
            let x0 = common.clone().unwrap_or_else(|| pick(rng));
            QuadraticCost::new(beta, x0)
        })
        .collect::<Result<_, _>>()?;
    CostSuite::new(costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use crate::scalar::Rational;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn quad(beta: i64, x0: i64) -> QuadraticCost<Rational> {
        QuadraticCost::new(r(beta, 1), r(x0, 1)).unwrap()
    }

    fn one_to_five() -> Vec<Rational> {
        (1..=5).map(|v| r(v, 1)).collect()
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(grad(&quad(2, 3), &r(1, 1)), r(-4, 1));
        assert_eq!(grad(&quad(7, 3), &r(3, 1)), r(0, 1));
        let c = quad(3, 2);
        let (x, h) = (r(5, 7), r(1, 9));
        let fd = (c.value(&(x.clone() + h.clone())) - c.value(&(x.clone() - h.clone()))) / (r(2, 1) * h);
        assert_eq!(fd, c.grad(&x));
    }

    #[test]
    fn optimum_examples() {
        let s = CostSuite::new(vec![quad(1, 1), quad(2, 4)]).unwrap();
        assert_eq!(s.global_optimum(), r(3, 1));
        let s = CostSuite::new(vec![quad(1, 6), quad(4, 6), quad(2, 6)]).unwrap();
        assert_eq!(s.global_optimum(), r(6, 1));
        let s = CostSuite::new(vec![quad(1, 0), quad(1, 2)]).unwrap();
        assert_eq!(s.global_optimum(), r(1, 1));
    }

    #[test]
    fn step_size_examples() {
        assert_eq!(max_step_size(&r(60, 1), &r(60, 1), 20), r(1, 3));
        assert_eq!(max_step_size(&r(20, 1), &r(20, 1), 20), r(1, 1));
        // Average curvature 3 over 20 nodes.
        assert!(r(3, 25) <= max_step_size(&r(60, 1), &r(60, 1), 20));
    }

    #[test]
    fn validation() {
        assert!(QuadraticCost::new(r(0, 1), r(1, 1)).is_err());
        assert!(CostSuite::new(vec![quad(1, 1)]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_cost_suite::<Rational, _>(5, &[], true, &mut rng).is_err());
    }

    #[test]
    fn random_suite_draws_from_value_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals = one_to_five();
        for shared in [false, true] {
            let s = random_cost_suite(20, &vals, shared, &mut rng).unwrap();
            assert!(s.costs().iter().all(|c| vals.contains(&c.beta) && vals.contains(&c.x0)));
            assert_eq!(s.lipschitz(), s.strong_convexity());
            assert_eq!(s.lipschitz(), s.costs().iter().fold(r(0, 1), |a, c| a + c.beta.clone()));
            if shared {
                assert!(s.costs().iter().all(|c| c.x0 == s.costs()[0].x0));
            }
        }
    }

    #[test]
    fn random_suite_is_seeded() {
        let draw = |seed| random_cost_suite(10, &one_to_five(), false, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn beta_mean_law_of_large_numbers() {
        let vals: Vec<f64> = (1..=5).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let s = random_cost_suite(100_000, &vals, true, &mut rng).unwrap();
        let mean = s.lipschitz() / s.len() as f64;
        assert!((mean - 3.0).abs() <= 0.02, "{mean}");
    }

    proptest! {
        #[test]
        fn quadratic_identities(beta in 1i64..20, x0 in -50i64..50, a in -100i64..100, b in -100i64..100) {
            let c = quad(beta, x0);
            let (x1, x2) = (r(a, 3), r(b, 7));
            let lhs = (c.grad(&x1) - c.grad(&x2)).abs();
            prop_assert_eq!(lhs, c.lipschitz() * (x1.clone() - x2.clone()).abs());
            let d = x2.clone() - x1.clone();
            let gap = c.value(&x2) - c.value(&x1) - c.grad(&x1) * d.clone();
            prop_assert_eq!(gap, c.strong_convexity() / r(2, 1) * d.clone() * d);
        }

        #[test]
        fn optimum_zeroes_total_gradient(pairs in proptest::collection::vec((1i64..6, -10i64..10), 2..12)) {
            let s = CostSuite::new(pairs.iter().map(|&(b, x)| quad(b, x)).collect()).unwrap();
            prop_assert_eq!(s.total_grad(&s.global_optimum()), r(0, 1));
        }
    }
}
