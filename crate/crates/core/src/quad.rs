//! Adaptive Simpson quadrature for smooth one-dimensional integrands.

/// Integrate `f` over `[a, b]` to roughly `rel_tol` relative accuracy.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Coarse pass fixes the absolute tolerance scale.
    let n = 64;
    let h = (b - a) / n as f64;
    let fa = f(a);
    let mut coarse = 0.0;
    let mut left = fa;
    let mut pieces = Vec::with_capacity(n);
    for i in 0..n {
        let x0 = a + i as f64 * h;
        let x1 = if i + 1 == n {
            b
        } else {
            a + (i + 1) as f64 * h
        };
        let xm = 0.5 * (x0 + x1);
        let fm = f(xm);
        let fr = f(x1);
        let s = (x1 - x0) / 6.0 * (left + 4.0 * fm + fr);
        coarse += s;
        pieces.push((x0, x1, left, fm, fr, s));
        left = fr;
    }
    let abs_tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE);
    let per_piece = abs_tol / n as f64;
    pieces
        .into_iter()
        .map(|(x0, x1, f0, fm, f1, s)| refine(&f, x0, x1, f0, fm, f1, s, per_piece, 40))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_integral() {
        let v = adaptive_simpson(|x| (-0.3 * x).exp(), 0.0, 60.0, 1e-10);
        let exact = (1.0 - (-18.0f64).exp()) / 0.3;
        assert!((v / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_integral() {
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-10);
        assert!((v - 2.0).abs() < 1e-9);
    }
}
