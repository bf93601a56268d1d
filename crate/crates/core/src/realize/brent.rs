//! Bracketed root finding: inverse quadratic interpolation with bisection
//! fallback (Brent's method).

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Root {
    pub x: f64,
    /// Function value at `x`.
    pub fx: f64,
    pub evaluations: usize,
    /// Final bracket, ascending.
    pub bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum BrentFailure<E> {
    Eval(E),
    /// The iteration limit was hit or the bracket collapsed before
    /// `|f| <= ftol`.
    NoConvergence {
        bracket: [f64; 2],
        evaluations: usize,
    },
}

/// Finds `x` in `[a, b]` with `|f(x)| <= ftol`. `fa` and `fb` must have
/// opposite signs (or one of them already satisfies the tolerance).
pub(crate) fn brent<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
    ftol: f64,
    max_iter: usize,
) -> Result<Root, BrentFailure<E>> {
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for evaluations in 0..=max_iter {
        if (fb > 0.0 && fc > 0.0) || (fb < 0.0 && fc < 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let bracket = [b.min(c), b.max(c)];
        if fb.abs() <= ftol {
            return Ok(Root { x: b, fx: fb, evaluations, bracket });
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs();
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || evaluations == max_iter {
            return Err(BrentFailure::NoConvergence { bracket, evaluations });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)), (q - 1.0) * (r - 1.0) * (s - 1.0))
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b).map_err(BrentFailure::Eval)?;
    }
    unreachable!("loop returns at the iteration limit")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Root {
        brent(|x| Ok::<_, ()>(f(x)), (a, f(a)), (b, f(b)), tol, 200).unwrap()
    }

    #[test]
    fn finds_simple_roots() {
        let r = solve(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r.x - 2.0_f64.sqrt()).abs() < 1e-13);
        assert!(r.bracket[0] <= r.x && r.x <= r.bracket[1]);
        let r = solve(|x| (-x).exp() - 0.25, 0.0, 10.0, 1e-12);
        assert!((r.x - 4.0_f64.ln()).abs() < 1e-11);
        assert!(r.evaluations < 20);
    }

    #[test]
    fn decreasing_function_with_flat_tail() {
        let r = solve(|x| 1.0 / (1.0 + x) - 0.01, 0.0, 1e6, 1e-10);
        assert!((r.x - 99.0).abs() < 1e-6);
    }

    #[test]
    fn reports_failures() {
        let step = |x: f64| Ok::<_, ()>(if x < 1.0 { 1.0 } else { -1.0 });
        let out = brent(step, (0.0, 1.0), (2.0, -1.0), 1e-3, 200);
        assert!(matches!(out, Err(BrentFailure::NoConvergence { .. })));
        let out = brent(|x| if x > 0.5 { Err("boom") } else { Ok(x) }, (0.0, 1.0), (1.0, -1.0), 1e-3, 200);
        assert!(matches!(out, Err(BrentFailure::Eval("boom"))));
        let out = brent(|x: f64| Ok::<_, ()>((-x).exp() - 0.5), (0.0, 0.5), (10.0, -0.49), 0.0, 1);
        assert!(matches!(out, Err(BrentFailure::NoConvergence { evaluations: 1, .. })));
    }
}
