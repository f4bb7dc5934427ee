use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Trial evaluations allowed, bracketing and zoom together.
    pub max_iters: usize,
    pub alpha_init: f64,
    pub alpha_max: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_iters: 25,
            alpha_init: 1.0,
            alpha_max: 1e10,
        }
    }
}

impl WolfeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.max_iters == 0 || !(self.alpha_init > 0.0) || !(self.alpha_max >= self.alpha_init) {
            return Err(Error::InvalidConfig("invalid line-search limits".into()));
        }
        Ok(())
    }
}

/// An accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub alpha: f64,
    pub phi: f64,
    pub dphi: f64,
    /// Number of `(φ, φ′)` evaluations used.
    pub evals: usize,
}

#[derive(Clone, Copy)]
struct Point {
    a: f64,
    f: f64,
    d: f64,
}

/// Minimizer of the cubic through two points, or `None` if undefined.
fn cubic_min(p: Point, q: Point) -> Option<f64> {
    let d1 = p.d + q.d - 3.0 * (p.f - q.f) / (p.a - q.a);
    let disc = d1 * d1 - p.d * q.d;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (q.a - p.a).signum() * disc.sqrt();
    let a = q.a - (q.a - p.a) * (q.d + d2 - d1) / (q.d - p.d + 2.0 * d2);
    a.is_finite().then_some(a)
}

/// Strong Wolfe line search (bracketing followed by zoom).
///
/// `phi(α)` returns `(φ(α), φ′(α))`. Evaluation failures reported as
/// [`Error::Evaluation`] are treated as `φ = +∞` so the step shrinks.
/// Exhausting `max_iters` yields [`Error::LineSearch`] with the best step
/// seen.
pub fn wolfe_search<F>(mut phi: F, phi0: f64, dphi0: f64, params: &WolfeParams) -> Result<LineSearch>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    if !(dphi0 < 0.0) {
        return Err(Error::NotDescent { slope: dphi0 });
    }
    let mut evals = 0usize;
    let mut best = (0.0, phi0);
    let mut eval = |a: f64, evals: &mut usize, best: &mut (f64, f64)| -> Result<Point> {
        *evals += 1;
        let (f, d) = match phi(a) {
            Ok((f, d)) if f.is_finite() => (f, d),
            Ok(_) | Err(Error::Evaluation(_)) => (f64::INFINITY, f64::NAN),
            Err(e) => return Err(e),
        };
        if f < best.1 {
            *best = (a, f);
        }
        Ok(Point { a, f, d })
    };
    let sufficient = |p: &Point| p.f <= phi0 + params.c1 * p.a * dphi0;
    let curvature = |p: &Point| p.d.abs() <= -params.c2 * dphi0;
    let done = |p: Point, evals: usize| LineSearch {
        alpha: p.a,
        phi: p.f,
        dphi: p.d,
        evals,
    };

    let mut prev = Point { a: 0.0, f: phi0, d: dphi0 };
    let mut a = params.alpha_init;
    let (mut lo, mut hi);
    loop {
        if evals >= params.max_iters {
            return Err(Error::LineSearch { iters: evals, best_alpha: best.0 });
        }
        let cur = eval(a, &mut evals, &mut best)?;
        if !sufficient(&cur) || (evals > 1 && cur.f >= prev.f) {
            (lo, hi) = (prev, cur);
            break;
        }
        if curvature(&cur) {
            return Ok(done(cur, evals));
        }
        if cur.d >= 0.0 {
            (lo, hi) = (cur, prev);
            break;
        }
        if a >= params.alpha_max {
            return Err(Error::LineSearch { iters: evals, best_alpha: best.0 });
        }
        prev = cur;
        a = (2.0 * a).min(params.alpha_max);
    }

    // zoom: `lo` satisfies sufficient decrease and has the lowest φ so far
    // among such points; `hi` closes the bracket.
    while evals < params.max_iters {
        let (l, h) = (lo.a.min(hi.a), lo.a.max(hi.a));
        let w = h - l;
        if !(w > f64::EPSILON * h.max(1e-300)) {
            break;
        }
        let a = match cubic_min(lo, hi) {
            Some(c) if c >= l + 0.1 * w && c <= h - 0.1 * w => c,
            _ => 0.5 * (lo.a + hi.a),
        };
        let cur = eval(a, &mut evals, &mut best)?;
        if !sufficient(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(done(cur, evals));
            }
            if cur.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    Err(Error::LineSearch { iters: evals, best_alpha: best.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_minimizer_accepted_immediately() {
        let ls = wolfe_search(|a| Ok(((a - 1.0).powi(2), 2.0 * (a - 1.0))), 1.0, -2.0, &WolfeParams::default()).unwrap();
        assert_eq!(ls.alpha, 1.0);
        assert_eq!(ls.evals, 1);
    }

    #[test]
    fn ascent_direction_rejected() {
        let r = wolfe_search(|a| Ok((a, 1.0)), 0.0, 1.0, &WolfeParams::default());
        assert!(matches!(r, Err(Error::NotDescent { .. })));
    }

    #[test]
    fn unbounded_below_exhausts_iterations() {
        let p = WolfeParams {
            max_iters: 5,
            ..WolfeParams::default()
        };
        let r = wolfe_search(|a| Ok((-a, -1.0)), 0.0, -1.0, &p);
        match r {
            Err(Error::LineSearch { iters, best_alpha }) => {
                assert_eq!(iters, 5);
                assert_eq!(best_alpha, 16.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_trials_shrink_the_step() {
        let phi = |a: f64| {
            if a > 0.5 {
                Err(Error::Evaluation("overflow".into()))
            } else {
                Ok(((a - 0.3).powi(2), 2.0 * (a - 0.3)))
            }
        };
        let ls = wolfe_search(phi, 0.09, -0.6, &WolfeParams::default()).unwrap();
        assert!(ls.alpha <= 0.5 && ls.phi < 0.09);
    }

    #[test]
    fn invalid_constants_rejected() {
        let p = WolfeParams {
            c1: 0.5,
            c2: 0.4,
            ..WolfeParams::default()
        };
        assert!(p.validate().is_err());
        assert!(WolfeParams::default().validate().is_ok());
    }

    proptest! {
        // φ = ½a(α − m)²; the strong Wolfe interval has closed form.
        #[test]
        fn quadratic_steps_lie_in_wolfe_interval(a in 0.1f64..10.0, m in 0.05f64..20.0) {
            let p = WolfeParams::default();
            let phi = |x: f64| Ok((0.5 * a * (x - m).powi(2), a * (x - m)));
            let (f0, d0) = (0.5 * a * m * m, -a * m);
            let ls = wolfe_search(phi, f0, d0, &p).unwrap();
            // curvature: |α − m| ≤ c2·m ; sufficient decrease: α ≤ 2(1 − c1)m
            let lo = (1.0 - p.c2) * m;
            let hi = ((1.0 + p.c2) * m).min(2.0 * (1.0 - p.c1) * m);
            prop_assert!(ls.alpha >= lo * (1.0 - 1e-12) && ls.alpha <= hi * (1.0 + 1e-12),
                "alpha {} outside [{lo}, {hi}]", ls.alpha);
        }
    }
}
