//! Reference values computed without touching the library: mean masses
//! reduced to closed form by hand, and a plain scan-plus-bisection root
//! finder over them. `ALPHA_TWO_SCALE` was frozen from this exact
//! procedure; the suite re-runs it and checks nothing drifted.

/// Mean alpha-mass of the two-scale mixture, expanded by hand:
/// 0.6 (0.2^t + 1.2^t) + 0.4 * 0.2^t = 0.2^t + 0.6 * 1.2^t.
pub fn two_scale_m(theta: f64) -> f64 {
    0.2f64.powf(theta) + 0.6 * 1.2f64.powf(theta)
}

/// Mean alpha-mass of the bare pair [0.2, 1.2]. Its minimum over theta
/// stays above 1, so no characteristic exponent exists.
pub fn bare_pair_m(theta: f64) -> f64 {
    0.2f64.powf(theta) + 1.2f64.powf(theta)
}

/// Frozen output of `first_root(two_scale_m)`.
pub const ALPHA_TWO_SCALE: f64 = 0.714_851_770_527_932;

/// Leftmost solution of m(theta) = 1 for a decreasing-then-whatever m:
/// scan right in steps of 0.05 until m drops below 1, then bisect the
/// bracketing step down to float resolution. None if no step crosses.
pub fn first_root(m: impl Fn(f64) -> f64) -> Option<f64> {
    let mut lo = 0.0f64;
    let mut hi = None;
    let mut x = 0.05f64;
    while x <= 16.0 {
        if m(x) < 1.0 {
            hi = Some(x);
            break;
        }
        lo = x;
        x += 0.05;
    }
    let mut hi = hi?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
