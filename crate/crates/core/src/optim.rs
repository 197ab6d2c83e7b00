//! One-dimensional minimisation helpers for convex (unimodal) objectives.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmin, min)`. The endpoints themselves are also considered,
/// so a minimum sitting on the boundary is found exactly.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let fa_end = f(a);
    let fb_end = f(b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a) > tol * (1.0 + a.abs().max(b.abs())) && iter < 400 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    if fm < best.1 {
        best = (mid, fm);
    }
    if fa_end < best.1 {
        best = (lo.min(hi), fa_end);
    }
    if fb_end < best.1 {
        best = (lo.max(hi), fb_end);
    }
    best
}

/// Move `lo` left until `f` stops decreasing. For convex `f` the minimiser
/// is then guaranteed to lie right of the returned point.
pub fn expand_left<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut width: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let cand = lo - width;
        let f_cand = f(cand);
        if f_cand < f_lo {
            lo = cand;
            f_lo = f_cand;
            width *= 2.0;
        } else {
            return cand;
        }
    }
    lo
}

/// Mirror image of [`expand_left`].
pub fn expand_right<F: FnMut(f64) -> f64>(mut f: F, hi: f64, width: f64) -> f64 {
    -expand_left(|x| f(-x), -hi, width)
}
