use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a concave `f` on `[lo, hi]` by golden-section search down to a
/// bracket of width `tol`.
///
/// Every iteration also checks midpoint concavity on the current bracket,
/// `f((a + b) / 2) >= (f(a) + f(b)) / 2`, and fails with
/// [`Error::NonConcave`] on the first violation. The endpoints are compared
/// against the interior optimum so linear objectives land exactly on the
/// boundary.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if hi <= lo {
        return Ok((lo, f(lo)));
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f_lo, f_hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        let mid = f(0.5 * (a + b));
        let slack = 1e-9 * (1.0 + fa.abs().max(fb.abs()));
        if mid < 0.5 * (fa + fb) - slack {
            return Err(Error::NonConcave { lo: a, hi: b });
        }
        if f1 < f2 {
            a = x1;
            fa = f1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            fb = f2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    let mut best = (x, f(x));
    for cand in [(lo, f_lo), (hi, f_hi)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best)
}
