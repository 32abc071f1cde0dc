//! Bounded Powell conjugate-direction maximization.
//!
//! Each cycle runs a line search along every direction in the set, then
//! replaces the direction of largest gain with the net displacement of the
//! cycle when the extrapolation test allows it. Line searches bracket the
//! maximum inside the feasible box and polish it with Brent's method.

/// Box constraints, one `(lower, upper)` pair per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u));
        Self { lower, upper }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Feasible step interval `[t_lo, t_hi]` for `x + t * d`.
    fn step_range(&self, x: &[f64], d: &[f64]) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..x.len() {
            if d[i] == 0.0 {
                continue;
            }
            let a = (self.lower[i] - x[i]) / d[i];
            let b = (self.upper[i] - x[i]) / d[i];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (lo.min(0.0), hi.max(0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowellOptions {
    /// Initial step length along each coordinate axis.
    pub scales: Vec<f64>,
    /// Relative improvement per cycle below which the search stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Absolute tolerance of each line search, in units of the direction
    /// length.
    pub line_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowellResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub cycles: usize,
}

const GOLDEN: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

fn along(x: &[f64], d: &[f64], t: f64, bounds: &Bounds) -> Vec<f64> {
    let mut p: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
    bounds.clamp(&mut p);
    p
}

/// Brent's method maximizing `phi` on `[a, b]` given an interior point `x`
/// with known value `fx`. Returns the best `(t, value)` seen.
fn brent_max<P: FnMut(f64) -> f64>(phi: &mut P, mut a: f64, mut b: f64, x0: f64, fx0: f64, tol: f64) -> (f64, f64) {
    let (mut x, mut w, mut v) = (x0, x0, x0);
    // minimize the negated function
    let (mut fx, mut fw, mut fv) = (-fx0, -fx0, -fx0);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let xm = 0.5 * (a + b);
        let tol1 = 1e-10 * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = -phi(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}

/// Maximizes `phi(t)` for `t` in `[lo, hi]` starting from `t = 0` with value
/// `f0`. Returns `(t, value)` with `value >= f0`.
fn line_max<P: FnMut(f64) -> f64>(phi: &mut P, lo: f64, hi: f64, f0: f64, tol: f64) -> (f64, f64) {
    if hi - lo <= tol {
        return (0.0, f0);
    }
    // pick the ascending side with a unit probe in each feasible direction
    let step = 1.0f64;
    let tp = step.min(hi);
    let tm = (-step).max(lo);
    let fp = if tp > 0.0 { phi(tp) } else { f64::NEG_INFINITY };
    let (dir, mut t1, mut f1) = if fp > f0 {
        (1.0, tp, fp)
    } else {
        let fm = if tm < 0.0 { phi(tm) } else { f64::NEG_INFINITY };
        if fm > f0 {
            (-1.0, tm, fm)
        } else {
            // 0 is bracketed by two lower points
            let a = if tm < 0.0 { tm } else { 0.0 };
            let b = if tp > 0.0 { tp } else { 0.0 };
            let (t, v) = brent_max(phi, a, b, 0.0, f0, tol);
            return if v >= f0 { (t, v) } else { (0.0, f0) };
        }
    };
    // expand until the function drops or the bound is reached
    let limit = if dir > 0.0 { hi } else { lo };
    let mut t0: f64 = 0.0;
    loop {
        if t1 == limit {
            let (t, v) = brent_max(phi, t0.min(t1), t0.max(t1), t1, f1, tol);
            return if v >= f1 { (t, v) } else { (t1, f1) };
        }
        let mut t2 = t1 + GOLDEN * (t1 - t0);
        if (t2 - limit) * dir > 0.0 {
            t2 = limit;
        }
        let f2 = phi(t2);
        if f2 <= f1 {
            let (a, b) = if t0 < t2 { (t0, t2) } else { (t2, t0) };
            let (t, v) = brent_max(phi, a, b, t1, f1, tol);
            return if v >= f1 { (t, v) } else { (t1, f1) };
        }
        t0 = t1;
        t1 = t2;
        f1 = f2;
    }
}

/// Maximizes `objective` inside `bounds` starting from `start`.
///
/// The returned point lies within `bounds` and its value is never below the
/// objective at the (clamped) start.
pub fn powell_maximize<F>(objective: F, start: &[f64], bounds: &Bounds, options: &PowellOptions) -> PowellResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    assert_eq!(options.scales.len(), n);
    let mut f = Counted { f: objective, evals: 0 };
    let mut x = start.to_vec();
    bounds.clamp(&mut x);
    let mut fx = f.eval(&x);

    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = options.scales[i];
            d
        })
        .collect();

    let line = |f: &mut Counted<F>, x: &[f64], d: &[f64], fx: f64| -> (Vec<f64>, f64) {
        let (lo, hi) = bounds.step_range(x, d);
        let mut phi = |t: f64| f.eval(&along(x, d, t, bounds));
        let (t, v) = line_max(&mut phi, lo, hi, fx, options.line_tol);
        if v > fx {
            (along(x, d, t, bounds), v)
        } else {
            (x.to_vec(), fx)
        }
    };

    let mut cycles = 0;
    while cycles < options.max_iter {
        cycles += 1;
        let (x_start, f_start) = (x.clone(), fx);
        let mut big_gain = 0.0;
        let mut big_idx = 0;
        for (i, d) in dirs.iter().enumerate() {
            let f_before = fx;
            let (xn, fnew) = line(&mut f, &x, d, fx);
            x = xn;
            fx = fnew;
            if fx - f_before > big_gain {
                big_gain = fx - f_before;
                big_idx = i;
            }
        }
        if fx - f_start < options.tol * (fx.abs() + options.tol) {
            break;
        }
        if n < 2 {
            continue;
        }
        let delta: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let mut extrap: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        bounds.clamp(&mut extrap);
        let fe = f.eval(&extrap);
        // Powell's acceptance test for the new direction, in minimization form
        let (g0, g1, ge) = (-f_start, -fx, -fe);
        if ge < g0 {
            let t = 2.0 * (g0 - 2.0 * g1 + ge) * (g0 - g1 - big_gain).powi(2) - big_gain * (g0 - ge).powi(2);
            if t < 0.0 {
                let (xn, fnew) = line(&mut f, &x, &delta, fx);
                x = xn;
                fx = fnew;
                dirs.remove(big_idx);
                dirs.push(delta);
            }
        }
    }
    PowellResult {
        point: x,
        value: fx,
        evaluations: f.evals,
        cycles,
    }
}
