//! Mid-rise uniform quantizer with a shiftable basis, and the zoom state that
//! every node carries in lockstep.
//!
//! With `w` bits the quantizer has `2^w` output levels
//! `b_q + (2c - (2^w - 1)) * delta / 2` for codes `c = 0 .. 2^w - 1`. Bins are
//! closed on the left and open on the right, so `xi = b_q` lands in code
//! `2^(w-1)`. Inputs outside `[b_q - h*delta, b_q + h*delta)` with
//! `h = 2^(w-1) - 1` saturate to the extreme levels. The default width is 3
//! bits, for which the window is `[b_q - 3*delta, b_q + 3*delta)`.

use crate::scalar::Scalar;

pub const DEFAULT_BITS: u32 = 3;

/// Widest supported code; keeps level arithmetic inside `i64`.
pub const MAX_BITS: u32 = 48;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantizerError {
    #[error("quantization level must be positive, got {0}")]
    NonPositiveLevel(String),
    #[error("{name} must exceed 1, got {value}")]
    ConstantTooSmall { name: &'static str, value: String },
    #[error("bit width must be in 1..={MAX_BITS}, got {0}")]
    BadWidth(u32),
}

/// Quantizer parameters plus zoom counters.
///
/// `delta0` is kept so the level trajectory
/// `delta = delta0 * c_out^nu_out / (c_in^nu_in * refine^refinements)` can be
/// audited after any sequence of zooms.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerState<S> {
    basis: S,
    delta: S,
    delta0: S,
    c_in: S,
    c_out: S,
    bits: u32,
    nu_in: u64,
    nu_out: u64,
    refinements: u64,
}

impl<S: Scalar> QuantizerState<S> {
    pub fn new(basis: S, delta: S, c_in: S, c_out: S) -> Result<Self, QuantizerError> {
        if delta <= S::zero() {
            return Err(QuantizerError::NonPositiveLevel(delta.to_string()));
        }
        for (name, value) in [("c_in", &c_in), ("c_out", &c_out)] {
            if *value <= S::one() {
                return Err(QuantizerError::ConstantTooSmall {
                    name,
                    value: value.to_string(),
                });
            }
        }
        Ok(Self {
            basis,
            delta0: delta.clone(),
            delta,
            c_in,
            c_out,
            bits: DEFAULT_BITS,
            nu_in: 0,
            nu_out: 0,
            refinements: 0,
        })
    }

    pub fn with_bits(mut self, bits: u32) -> Result<Self, QuantizerError> {
        if bits == 0 || bits > MAX_BITS {
            return Err(QuantizerError::BadWidth(bits));
        }
        self.bits = bits;
        Ok(self)
    }

    pub fn basis(&self) -> &S {
        &self.basis
    }

    pub fn delta(&self) -> &S {
        &self.delta
    }

    pub fn initial_delta(&self) -> &S {
        &self.delta0
    }

    pub fn c_in(&self) -> &S {
        &self.c_in
    }

    pub fn c_out(&self) -> &S {
        &self.c_out
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u64 {
        1 << self.bits
    }

    pub fn nu_in(&self) -> u64 {
        self.nu_in
    }

    pub fn nu_out(&self) -> u64 {
        self.nu_out
    }

    pub fn nu_total(&self) -> u64 {
        self.nu_in + self.nu_out
    }

    pub fn refinements(&self) -> u64 {
        self.refinements
    }

    /// Number of whole levels between the basis and either saturation edge.
    fn half_range(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    /// Lower edge `b_q - h*delta` (inclusive) of the non-saturated window.
    pub fn range_low(&self) -> S {
        self.basis.clone() - S::from_int(self.half_range()) * self.delta.clone()
    }

    /// Upper edge `b_q + h*delta` (exclusive) of the non-saturated window.
    pub fn range_high(&self) -> S {
        self.basis.clone() + S::from_int(self.half_range()) * self.delta.clone()
    }

    /// True when `x` is inside `[range_low, range_high)`.
    pub fn in_range(&self, x: &S) -> bool {
        *x >= self.range_low() && *x < self.range_high()
    }

    /// Code `c` in `0..2^w` of the bin containing `xi`.
    pub fn level_index(&self, xi: &S) -> u64 {
        let half = 1i64 << (self.bits - 1);
        let offset = ((xi.clone() - self.basis.clone()) / self.delta.clone()).floor();
        if offset < S::from_int(-half) {
            0
        } else if offset >= S::from_int(half) {
            self.levels() - 1
        } else {
            let offset = offset.to_i64().expect("offset bounded by the code range");
            (offset + half) as u64
        }
    }

    /// Output level for code `c`: `b_q + (2c - (2^w - 1)) * delta / 2`.
    pub fn level_value(&self, code: u64) -> S {
        assert!(code < self.levels(), "code {code} out of range");
        let twice = 2 * code as i64 - (self.levels() as i64 - 1);
        self.basis.clone() + S::from_int(twice) * self.delta.clone() / S::from_int(2)
    }

    pub fn quantize(&self, xi: &S) -> S {
        self.level_value(self.level_index(xi))
    }

    /// Widen the range around `x_new`: basis moves to it, level grows by `c_out`.
    pub fn zoom_out(&mut self, x_new: S) {
        self.nu_out += 1;
        self.basis = x_new;
        self.delta = self.c_out.clone() * self.delta.clone();
    }

    /// Focus on `x_new`: basis moves to it, level shrinks by `c_in`.
    pub fn zoom_in(&mut self, x_new: S) {
        self.nu_in += 1;
        self.basis = x_new;
        self.delta = self.delta.clone() / self.c_in.clone();
    }

    /// Divide the level by `factor` in place; the basis and width are the caller's business.
    pub fn refine(&mut self, factor: &S) {
        self.refinements += 1;
        self.delta = self.delta.clone() / factor.clone();
    }

    pub(crate) fn set_bits_unchecked(&mut self, bits: u32) {
        self.bits = bits.clamp(1, MAX_BITS);
    }

    /// Smallest width whose window `[-h*delta, h*delta)` around zero reaches
    /// `coverage` on both sides.
    /// Saturates at [`MAX_BITS`]; see [`QuantizerState::try_bits_to_cover`].
    pub fn bits_to_cover(delta: &S, coverage: &S) -> u32 {
        Self::try_bits_to_cover(delta, coverage).unwrap_or(MAX_BITS)
    }

    /// `None` when even [`MAX_BITS`] cannot reach `coverage`.
    pub fn try_bits_to_cover(delta: &S, coverage: &S) -> Option<u32> {
        (1..=MAX_BITS).find(|&w| S::from_int((1i64 << (w - 1)) - 1) * delta.clone() >= coverage.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn q(basis: Rational, delta: Rational) -> QuantizerState<Rational> {
        QuantizerState::new(basis, delta, r(4, 3), r(2, 1)).unwrap()
    }

    #[test]
    fn spot_values() {
        let half = q(r(0, 1), r(1, 2));
        assert_eq!(half.quantize(&r(1, 5)), r(1, 4));
        assert_eq!(half.quantize(&r(-10, 1)), r(-7, 4));
        assert_eq!(q(r(2, 1), r(1, 2)).quantize(&r(2, 1)), r(9, 4));
        assert_eq!(half.level_index(&r(1, 5)), 4);
        assert_eq!(half.level_index(&r(-10, 1)), 0);
        assert_eq!(half.level_index(&r(100, 1)), 7);
    }

    #[test]
    fn zoom_updates() {
        let mut s = q(r(0, 1), r(1, 2));
        s.zoom_out(r(2, 1));
        assert_eq!((s.basis(), s.delta(), s.nu_out()), (&r(2, 1), &r(1, 1), 1));
        s.zoom_out(r(-5, 1));
        assert_eq!((s.basis(), s.delta()), (&r(-5, 1), &r(2, 1)));

        let mut s = q(r(0, 1), r(1, 2));
        s.zoom_in(r(1, 1));
        assert_eq!((s.basis(), s.delta()), (&r(1, 1), &r(3, 8)));
        s.zoom_in(r(1, 1));
        assert_eq!(s.delta(), &r(9, 32));
        assert_eq!((s.nu_in(), s.nu_total()), (2, 2));
    }

    #[test]
    fn validation() {
        assert!(QuantizerState::new(r(0, 1), r(0, 1), r(4, 3), r(2, 1)).is_err());
        assert!(QuantizerState::new(r(0, 1), r(1, 2), r(1, 1), r(2, 1)).is_err());
        assert!(QuantizerState::new(r(0, 1), r(1, 2), r(4, 3), r(1, 2)).is_err());
        assert!(q(r(0, 1), r(1, 2)).with_bits(0).is_err());
    }

    #[test]
    fn wider_codes() {
        let s = q(r(0, 1), r(1, 10)).with_bits(7).unwrap();
        assert_eq!(s.levels(), 128);
        assert_eq!(s.range_high(), r(63, 10));
        assert_eq!(s.quantize(&r(1, 1)), r(21, 20));
        assert_eq!(s.quantize(&r(1000, 1)), r(127, 20));
    }

    #[test]
    fn width_needed_for_baseline_levels() {
        let five = r(5, 1);
        assert_eq!(QuantizerState::bits_to_cover(&r(1, 10), &five), 7);
        assert_eq!(QuantizerState::bits_to_cover(&r(1, 100), &five), 10);
        assert_eq!(QuantizerState::bits_to_cover(&r(1, 1000), &five), 14);
    }

    #[test]
    fn float_scalar_agrees_on_dyadic_inputs() {
        let exact = q(r(1, 1), r(1, 4));
        let float = QuantizerState::new(1.0f64, 0.25, 4.0 / 3.0, 2.0).unwrap();
        for (n, d) in [(-3, 1), (1, 8), (5, 4), (7, 4), (15, 8), (9, 1)] {
            let e = exact.quantize(&r(n, d));
            assert_eq!(e.to_f64_lossy(), float.quantize(&(n as f64 / d as f64)));
        }
    }

    fn arb_rational() -> impl Strategy<Value = Rational> {
        (-2000i64..2000, 1i64..64).prop_map(|(n, d)| r(n, d))
    }

    fn arb_state() -> impl Strategy<Value = QuantizerState<Rational>> {
        (arb_rational(), 1i64..40, 1i64..16, 1u32..6)
            .prop_map(|(b, dn, dd, w)| q(b, r(dn, dd)).with_bits(w).unwrap())
    }

    proptest! {
        #[test]
        fn bounded_error_inside_window(s in arb_state(), xi in arb_rational()) {
            if s.in_range(&xi) {
                let err = (s.quantize(&xi) - xi).abs();
                prop_assert!(err <= s.delta().clone() / r(2, 1));
            }
        }

        #[test]
        fn idempotent_and_inverse(s in arb_state(), xi in arb_rational()) {
            let out = s.quantize(&xi);
            prop_assert_eq!(s.quantize(&out), out.clone());
            let c = s.level_index(&xi);
            prop_assert_eq!(s.level_index(&s.level_value(c)), c);
        }

        #[test]
        fn monotone(s in arb_state(), a in arb_rational(), b in arb_rational()) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.quantize(&lo) <= s.quantize(&hi));
        }

        #[test]
        fn level_trajectory_identity(zooms in proptest::collection::vec(any::<bool>(), 0..24)) {
            let mut s = q(r(0, 1), r(1, 2));
            for (i, out) in zooms.iter().enumerate() {
                let x = r(i as i64, 3);
                if *out { s.zoom_out(x) } else { s.zoom_in(x) }
            }
            let expected = r(1, 2) * r(2, 1).powi(s.nu_out() as u32) / r(4, 3).powi(s.nu_in() as u32);
            prop_assert_eq!(s.delta(), &expected);
            prop_assert_eq!(s.nu_total(), zooms.len() as u64);
        }
    }
}
