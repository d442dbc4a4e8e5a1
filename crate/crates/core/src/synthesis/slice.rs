//! Univariate slice sampling on the positive half-line (stepping out and
//! shrinkage).

use rand::Rng;

use crate::math;

/// One slice-sampling update of `x0 > 0` for the log density `logf`, which
/// must return `-inf` for `x <= 0` and a finite value at `x0`.
pub(crate) fn slice_positive<R: Rng + ?Sized>(
    x0: f64,
    w: f64,
    max_steps: usize,
    rng: &mut R,
    logf: impl Fn(f64) -> f64,
) -> f64 {
    let logy = logf(x0) + math::ln(1.0 - rng.random::<f64>());

    let mut l = x0 - w * rng.random::<f64>();
    let mut r = l + w;
    let mut j = (max_steps as f64 * rng.random::<f64>()) as usize;
    let mut k = max_steps.saturating_sub(1 + j);
    while j > 0 && l > 0.0 && logf(l) > logy {
        l -= w;
        j -= 1;
    }
    if l < 0.0 {
        l = 0.0;
    }
    while k > 0 && logf(r) > logy {
        r += w;
        k -= 1;
    }

    loop {
        let x1 = l + rng.random::<f64>() * (r - l);
        if x1 > 0.0 && logf(x1) > logy {
            return x1;
        }
        if x1 < x0 {
            l = x1;
        } else {
            r = x1;
        }
        if r - l <= f64::EPSILON * x0 {
            return x0;
        }
    }
}
