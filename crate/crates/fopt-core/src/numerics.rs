//! Scalar and vector kernels shared by every optimizer: RMS, the
//! Adafactor-style bias correction, EMA updates, the adaptive epsilon, RMS
//! clipping, and the interpolation family (lerp / plerp / slerp / nlerp /
//! xlerp) used for norm-preserving momentum averaging.
//!
//! Everything operates on `f64` slices. Empty inputs and shape mismatches are
//! contract violations and reported as errors, never silently absorbed.

use crate::error::{Error, Result};

/// Floor returned by [`adaptive_epsilon`] when the gradient RMS is exactly
/// zero, keeping the downstream division defined.
pub const EPSILON_FLOOR: f64 = 1e-30;

/// `slerp` falls back to `lerp` when `1 - |cos angle|` drops below this:
/// the angle is too small (or too close to pi) for `sin(angle)` in the
/// denominator to be trustworthy, and at such angles the chord and the arc
/// agree to ~1e-8 anyway.
pub const SLERP_COLINEAR_THRESHOLD: f64 = 1e-8;

/// Mixture norms below this are treated as degenerate by `nlerp` (error)
/// and `xlerp` (falls back to the plain mixture).
pub const DEGENERATE_MIX_NORM: f64 = 1e-30;

/// Root mean square: `sqrt(mean(v_i^2))`.
pub fn rms(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput { what: "rms" });
    }
    let sum_sq: f64 = v.iter().map(|x| x * x).sum();
    Ok((sum_sq / v.len() as f64).sqrt())
}

/// Euclidean norm, zero for the empty slice.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The step-dependent decay rate `beta2 * (1 - beta2^(t-1)) / (1 - beta2^t)`.
///
/// Evaluated as `beta2 * expm1((t-1) ln beta2) / expm1(t ln beta2)`: the
/// naive power form loses ~2 digits at small `t` to the `1 - beta2^t`
/// cancellation (at `t = 2` it misses the closed form `beta2 / (1 + beta2)`
/// by 7e-15, which matters at the tolerances this function is held to).
/// Exactly `0` at `t = 1` (the init-wiping step), strictly increasing in
/// `t`, approaching `beta2` from below.
pub fn bias_correction(beta2: f64, t: u64) -> Result<f64> {
    if !(beta2 > 0.0 && beta2 < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "bias_correction: beta2 must lie in (0, 1), got {beta2}"
        )));
    }
    if t == 0 {
        return Err(Error::ZeroStepIndex);
    }
    if t == 1 {
        return Ok(0.0);
    }
    let log_b = beta2.ln();
    Ok(beta2 * ((t - 1) as f64 * log_b).exp_m1() / (t as f64 * log_b).exp_m1())
}

/// One EMA step `beta_hat * acc + (1 - beta_hat) * sample`, elementwise.
///
/// `beta_hat` may be 0 (the t = 1 bias-corrected rate, which discards the
/// accumulator init entirely) or 1 (freeze). Each output element is a convex
/// combination, so it stays within `[min, max]` of its two inputs up to one
/// rounding.
pub fn ema_update(acc: &[f64], sample: &[f64], beta_hat: f64) -> Result<Vec<f64>> {
    if acc.len() != sample.len() {
        return Err(Error::LengthMismatch {
            what: "ema_update",
            expected: acc.len(),
            got: sample.len(),
        });
    }
    if !(0.0..=1.0).contains(&beta_hat) {
        return Err(Error::InvalidConfig(format!(
            "ema_update: beta_hat must lie in [0, 1], got {beta_hat}"
        )));
    }
    Ok(acc
        .iter()
        .zip(sample)
        .map(|(a, s)| beta_hat * a + (1.0 - beta_hat) * s)
        .collect())
}

/// Gradient-scaled epsilon `min(eps, eps2 * rms(g))`.
///
/// When `rms(g)` is exactly zero the fixed [`EPSILON_FLOOR`] is returned
/// instead of zero so that the FIM denominator stays positive.
pub fn adaptive_epsilon(g: &[f64], eps: f64, eps2: f64) -> Result<f64> {
    if eps <= 0.0 || eps2 <= 0.0 || eps.is_nan() || eps2.is_nan() {
        return Err(Error::InvalidConfig(format!(
            "adaptive_epsilon: eps and eps2 must be positive, got {eps}, {eps2}"
        )));
    }
    let r = rms(g)?;
    if r == 0.0 {
        return Ok(EPSILON_FLOOR);
    }
    Ok(eps.min(eps2 * r))
}

/// RMS clip `v / max(1, rms(v) / c)`: a no-op (bitwise) when `rms(v) <= c`,
/// otherwise a uniform rescale that lands the RMS on `c` up to rounding.
///
/// The rescale guarantees `rms(result) <= c` in computed arithmetic (the
/// divisor is nudged up by an ulp when rounding overshoots), so clipping is
/// exactly idempotent: re-clipping returns the same bits.
pub fn clip_by_rms(v: &[f64], c: f64) -> Result<Vec<f64>> {
    if c <= 0.0 || c.is_nan() {
        return Err(Error::InvalidConfig(format!(
            "clip_by_rms: threshold must be positive, got {c}"
        )));
    }
    let r = rms(v)?;
    let mut scale = r / c;
    if scale <= 1.0 {
        return Ok(v.to_vec());
    }
    // rounding in the products (and in rms itself) can leave the scaled
    // vector a couple of ulps above the ceiling; walking the divisor up
    // converges in one or two nudges
    for _ in 0..4 {
        let out: Vec<f64> = v.iter().map(|x| x / scale).collect();
        if rms(&out)? <= c {
            return Ok(out);
        }
        scale = f64::from_bits(scale.to_bits() + 1);
    }
    Ok(v.iter().map(|x| x / scale).collect())
}

fn check_pair(what: &'static str, v1: &[f64], v2: &[f64], beta: f64) -> Result<()> {
    if v1.len() != v2.len() {
        return Err(Error::LengthMismatch {
            what,
            expected: v1.len(),
            got: v2.len(),
        });
    }
    if v1.is_empty() {
        return Err(Error::EmptyInput { what });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!(
            "{what}: beta must lie in [0, 1], got {beta}"
        )));
    }
    Ok(())
}

/// Linear interpolation `beta * v1 + (1 - beta) * v2`.
///
/// Note the convention: `beta` weights the FIRST argument (the old value in
/// an EMA), so `beta = 1` returns `v1` and `beta = 0` returns `v2`.
pub fn lerp(v1: &[f64], v2: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_pair("lerp", v1, v2, beta)?;
    Ok(v1
        .iter()
        .zip(v2)
        .map(|(a, b)| beta * a + (1.0 - beta) * b)
        .collect())
}

/// Pythagorean interpolation `beta * v1 + sqrt(1 - beta^2) * v2`: for
/// orthonormal endpoints the coefficients are a point on the unit circle,
/// so the result keeps norm 1.
pub fn plerp(v1: &[f64], v2: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_pair("plerp", v1, v2, beta)?;
    let w2 = (1.0 - beta * beta).sqrt();
    Ok(v1
        .iter()
        .zip(v2)
        .map(|(a, b)| beta * a + w2 * b)
        .collect())
}

/// Spherical interpolation
/// `sin(beta * angle)/sin(angle) * v1 + sin((1-beta) * angle)/sin(angle) * v2`
/// where `angle` is the angle between the endpoints (cosine clamped into
/// [-1, 1] before `acos`).
///
/// Near-colinear endpoints (`1 - |cos|` below
/// [`SLERP_COLINEAR_THRESHOLD`]) fall back to [`lerp`], where the two
/// formulas agree far below the fallback's own error. Zero-norm endpoints
/// are an error: the angle is undefined.
pub fn slerp(v1: &[f64], v2: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_pair("slerp", v1, v2, beta)?;
    let n1 = l2_norm(v1);
    let n2 = l2_norm(v2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroNormInput { what: "slerp" });
    }
    let dot: f64 = v1.iter().zip(v2).map(|(a, b)| a * b).sum();
    let cos = (dot / (n1 * n2)).clamp(-1.0, 1.0);
    if 1.0 - cos.abs() < SLERP_COLINEAR_THRESHOLD {
        return lerp(v1, v2, beta);
    }
    let angle = cos.acos();
    let sin = angle.sin();
    let w1 = (beta * angle).sin() / sin;
    let w2 = ((1.0 - beta) * angle).sin() / sin;
    Ok(v1
        .iter()
        .zip(v2)
        .map(|(a, b)| w1 * a + w2 * b)
        .collect())
}

/// Normalized linear interpolation: [`lerp`] rescaled onto the unit sphere.
/// Errors when the mixture norm collapses below [`DEGENERATE_MIX_NORM`]
/// (anti-parallel endpoints at the balance point): there is no direction
/// left to normalize.
pub fn nlerp(v1: &[f64], v2: &[f64], beta: f64) -> Result<Vec<f64>> {
    let mix = lerp(v1, v2, beta)?;
    let n = l2_norm(&mix);
    if n < DEGENERATE_MIX_NORM {
        return Err(Error::DegenerateInterpolation);
    }
    Ok(mix.iter().map(|x| x / n).collect())
}

/// Norm-interpolating lerp: the [`lerp`] direction rescaled so its norm is
/// the lerp of the endpoint norms, `beta * |v1| + (1 - beta) * |v2|`.
/// A degenerate mixture norm falls back to the plain [`lerp`] (which is
/// then itself near zero).
pub fn xlerp(v1: &[f64], v2: &[f64], beta: f64) -> Result<Vec<f64>> {
    let mix = lerp(v1, v2, beta)?;
    let n = l2_norm(&mix);
    if n < DEGENERATE_MIX_NORM {
        return Ok(mix);
    }
    let target = beta * l2_norm(v1) + (1.0 - beta) * l2_norm(v2);
    Ok(mix.iter().map(|x| x * target / n).collect())
}
