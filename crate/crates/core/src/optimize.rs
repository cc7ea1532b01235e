//! One-dimensional bracketed maximization.

/// Golden ratio conjugate, (√5 − 1)/2.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarMaximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    /// The maximum sits at an end of the bracket rather than inside it.
    pub at_boundary: bool,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `rel_tol·|x|`. The bracket ends
/// are evaluated too so that a monotone `f` reports its boundary maximum.
pub fn golden_section_max<F, E>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<ScalarMaximum, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (fa_end, fb_end) = (f(a)?, f(b)?);
    let (lo_end, hi_end) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evaluations = 4;
    while (b - a) > rel_tol * (0.5 * (a + b)).abs().max(f64::MIN_POSITIVE) && evaluations < 500 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
    }
    let (mut x, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    let mut at_boundary = false;
    if fa_end > value {
        (x, value, at_boundary) = (lo_end, fa_end, true);
    }
    if fb_end > value {
        (x, value, at_boundary) = (hi_end, fb_end, true);
    }
    Ok(ScalarMaximum {
        x,
        value,
        evaluations,
        at_boundary,
    })
}
