//! Core differential-privacy primitives: L2 clipping, the Gaussian
//! mechanism, and closed-form noise calibration.
//!
//! Two calibration formulas are exposed and they intentionally disagree:
//!
//! - [`calibrate_sigma_lemma1`] is the classic single-query Gaussian
//!   mechanism bound, valid in the small-epsilon regime.
//! - [`calibrate_sigma_eq17`] is the coarse closed form historically used to
//!   set a GAN critic's noise from a target epsilon. It scales with the
//!   *inner* critic-iteration count only, so over a long training run it
//!   prescribes far less noise than the accountant can certify.
//!
//! Neither formula is the budget authority. The moments accountant
//! (see [`crate::accountant`]) measures what a run actually spent; these
//! formulas only pick starting noise levels, and callers are expected to
//! surface both numbers rather than pretend they agree.

use crate::error::{Error, Result};
use crate::ndnum::{l2_norm, RngStream};

/// An L2 clipping bound `C > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipSpec {
    bound: f64,
}

impl ClipSpec {
    pub fn new(bound: f64) -> Result<Self> {
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::Parameter(format!(
                "clip bound must be finite and positive, got {bound}"
            )));
        }
        Ok(Self { bound })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Clip `v` to L2 norm at most `clip.bound()`: `v * min(1, C / ||v||)`.
///
/// The zero vector (norm 0) passes through untouched — `C / 0` is `+inf`,
/// the scale factor saturates at 1, and no arithmetic is applied. Direction
/// is always preserved; only the magnitude shrinks. The post-clip norm can
/// exceed the bound by a few ulps of rounding, which every downstream
/// tolerance (1e-10 and looser) absorbs.
pub fn clip_l2(v: &[f64], clip: &ClipSpec) -> Vec<f64> {
    let norm = l2_norm(v);
    let scale = (clip.bound / norm).min(1.0);
    if scale >= 1.0 {
        return v.to_vec();
    }
    v.iter().map(|&x| x * scale).collect()
}

/// Parameters of one Gaussian-mechanism invocation: noise multiplier
/// `sigma >= 0` and L2 sensitivity `sensitivity >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMechanismSpec {
    sigma: f64,
    sensitivity: f64,
}

impl GaussianMechanismSpec {
    pub fn new(sigma: f64, sensitivity: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Parameter(format!(
                "noise multiplier must be finite and nonnegative, got {sigma}"
            )));
        }
        if !sensitivity.is_finite() || sensitivity < 0.0 {
            return Err(Error::Parameter(format!(
                "sensitivity must be finite and nonnegative, got {sensitivity}"
            )));
        }
        Ok(Self { sigma, sensitivity })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// Standard deviation of the added noise, `sigma * sensitivity`.
    pub fn noise_std(&self) -> f64 {
        self.sigma * self.sensitivity
    }
}

/// The Gaussian mechanism: `value + N(0, (sigma * sensitivity)^2 I)`.
///
/// When `sigma == 0` or `sensitivity == 0` the input is returned bitwise
/// unchanged and **no** random draws are consumed, so a noise-free pipeline
/// is bit-identical to one that never mentions the mechanism at all.
pub fn gaussian_mechanism(
    value: &[f64],
    spec: &GaussianMechanismSpec,
    stream: &mut RngStream,
) -> Vec<f64> {
    let std = spec.noise_std();
    if std == 0.0 {
        return value.to_vec();
    }
    value
        .iter()
        .map(|&x| x + stream.next_gaussian(0.0, std))
        .collect()
}

/// An `(epsilon, delta)` privacy target. `epsilon` is positive and may be
/// `+inf` (the explicit "non-private" sentinel); `delta` lies in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyTarget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyTarget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Parameter(format!(
                "epsilon must be positive (or +inf for non-private), got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!(
                "delta must lie strictly between 0 and 1, got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True when epsilon is the `+inf` sentinel: no noise will be calibrated.
    pub fn is_non_private(&self) -> bool {
        self.epsilon.is_infinite()
    }

    /// True when epsilon is inside the proof regime of the single-query
    /// Gaussian-mechanism bound (`epsilon < 1`). The calibration formula is
    /// still evaluated outside the regime, but callers should warn.
    pub fn in_lemma_regime(&self) -> bool {
        self.epsilon < 1.0
    }
}

/// Single-query Gaussian mechanism calibration:
/// `sigma = sqrt(2 ln(1.25 / delta)) * sensitivity / epsilon`.
///
/// Zero sensitivity needs no noise and yields 0; an infinite epsilon target
/// likewise yields 0. The formula's proof assumes `epsilon < 1`
/// ([`PrivacyTarget::in_lemma_regime`]); larger values are accepted and
/// evaluated anyway, flagged by the caller rather than rejected here.
pub fn calibrate_sigma_lemma1(target: &PrivacyTarget, sensitivity: f64) -> Result<f64> {
    if !sensitivity.is_finite() || sensitivity < 0.0 {
        return Err(Error::Parameter(format!(
            "sensitivity must be finite and nonnegative, got {sensitivity}"
        )));
    }
    if sensitivity == 0.0 || target.is_non_private() {
        return Ok(0.0);
    }
    Ok((2.0 * (1.25 / target.delta).ln()).sqrt() * sensitivity / target.epsilon)
}

/// Iterated-training closed-form calibration:
/// `sigma_n = 2 q sqrt(n_d ln(1 / delta)) / epsilon`
///
/// with sampling ratio `q` in `(0, 1]` and inner critic-iteration count
/// `n_d >= 1`. The logarithm is natural. An infinite epsilon target yields 0
/// (non-private, no noise). This is a coarse heuristic — see the module
/// docs — and the accountant remains the budget authority.
pub fn calibrate_sigma_eq17(target: &PrivacyTarget, q: f64, n_d: u32) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Parameter(format!(
            "sampling ratio q must lie in (0, 1], got {q}"
        )));
    }
    if n_d < 1 {
        return Err(Error::Parameter(
            "critic iteration count n_d must be at least 1".to_string(),
        ));
    }
    if target.is_non_private() {
        return Ok(0.0);
    }
    Ok(2.0 * q * (f64::from(n_d) * (1.0 / target.delta).ln()).sqrt() / target.epsilon)
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    fn vectors() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0e6f64..1.0e6, 1..64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        // The clipped norm never exceeds the bound (beyond ulp slop).
        #[test]
        fn clipped_norm_respects_bound(v in vectors(), bound in 1e-6f64..1e3) {
            let clip = ClipSpec::new(bound).unwrap();
            let out = clip_l2(&v, &clip);
            prop_assert!(l2_norm(&out) <= bound * (1.0 + 1e-12));
        }

        // Clipping twice equals clipping once (to rounding).
        #[test]
        fn clipping_is_idempotent(v in vectors(), bound in 1e-6f64..1e3) {
            let clip = ClipSpec::new(bound).unwrap();
            let once = clip_l2(&v, &clip);
            let twice = clip_l2(&once, &clip);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        // Clipping preserves direction: clipped vector is a nonnegative
        // multiple of the input (cross-products vanish pairwise).
        #[test]
        fn clipping_preserves_direction(v in vectors(), bound in 1e-6f64..1e3) {
            let clip = ClipSpec::new(bound).unwrap();
            let out = clip_l2(&v, &clip);
            let scale_bound = l2_norm(&v).max(bound);
            for i in 0..v.len() {
                for j in (i + 1)..v.len() {
                    let cross = out[i] * v[j] - out[j] * v[i];
                    prop_assert!(
                        cross.abs() <= 1e-9 * scale_bound * scale_bound,
                        "direction changed: cross product {cross}"
                    );
                }
            }
            // And the sense is preserved, never flipped.
            for (a, b) in v.iter().zip(&out) {
                prop_assert!(a * b >= 0.0);
            }
        }

        // Vectors already inside the ball are returned bitwise unchanged.
        #[test]
        fn in_ball_vectors_pass_through(v in vectors()) {
            let norm = l2_norm(&v);
            prop_assume!(norm > 0.0);
            let clip = ClipSpec::new(norm * 1.5).unwrap();
            prop_assert_eq!(clip_l2(&v, &clip), v);
        }
    }
}
