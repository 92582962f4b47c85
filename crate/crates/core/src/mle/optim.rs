//! Dense BFGS with a strong-Wolfe line search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the gradient max-norm drops below this.
    pub grad_tol: f64,
    /// Stop when the objective changes by less than this (relative) over an
    /// iteration; the run is then reported as not converged unless the
    /// gradient test also passes.
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            f_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

struct LinePoint {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    dg: f64,
}

/// Minimize `f` starting at `x0`. `f` returns the value and gradient; a
/// non-finite value is treated as outside the domain.
pub fn minimize_bfgs<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut first = true;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if !fx.is_finite() || max_norm(&g) <= opts.grad_tol {
            break;
        }
        let mut d: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut dg0 = dot(&d, &g);
        if !(dg0 < 0.0) {
            // Lost positive definiteness; restart from steepest descent.
            for (i, row) in h.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[i] = 1.0;
            }
            d = g.iter().map(|v| -v).collect();
            dg0 = dot(&d, &g);
            first = true;
        }
        let alpha0 = if first {
            (1.0 / max_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let Some(step) = line_search(&mut f, &x, fx, dg0, &d, alpha0) else {
            break;
        };
        iterations += 1;
        let s: Vec<f64> = d.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let f_prev = fx;
        fx = step.f;
        g = step.g;

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = scale;
                }
                first = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if (f_prev - fx).abs() <= opts.f_tol * fx.abs().max(1.0) && max_norm(&g) > opts.grad_tol {
            break;
        }
    }
    let converged = fx.is_finite() && max_norm(&g) <= opts.grad_tol;
    BfgsResult {
        x,
        f: fx,
        grad: g,
        iterations,
        converged,
    }
}

fn eval<F>(f: &mut F, x: &[f64], d: &[f64], alpha: f64) -> LinePoint
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
    let (fv, g) = f(&xt);
    let (fv, dg) = if fv.is_finite() && g.iter().all(|v| v.is_finite()) {
        (fv, dot(&g, d))
    } else {
        (f64::INFINITY, f64::NAN)
    };
    LinePoint {
        alpha,
        f: fv,
        g,
        dg,
    }
}

fn line_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    dg0: f64,
    d: &[f64],
    alpha0: f64,
) -> Option<LinePoint>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut prev = LinePoint {
        alpha: 0.0,
        f: f0,
        g: Vec::new(),
        dg: dg0,
    };
    let mut alpha = alpha0;
    for i in 0..40 {
        let cur = eval(f, x, d, alpha);
        if !cur.f.is_finite() {
            // Out of the domain: shrink toward the last good point.
            alpha = prev.alpha + 0.2 * (alpha - prev.alpha);
            continue;
        }
        if cur.f > f0 + C1 * alpha * dg0 || (i > 0 && cur.f >= prev.f) {
            return zoom(f, x, f0, dg0, d, prev, cur);
        }
        if cur.dg.abs() <= -C2 * dg0 {
            return Some(cur);
        }
        if cur.dg >= 0.0 {
            return zoom(f, x, f0, dg0, d, cur, prev);
        }
        alpha *= 2.0;
        prev = cur;
    }
    (prev.alpha > 0.0).then_some(prev)
}

fn zoom<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    dg0: f64,
    d: &[f64],
    mut lo: LinePoint,
    mut hi: LinePoint,
) -> Option<LinePoint>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    for _ in 0..60 {
        let mut alpha = if hi.f.is_finite() && lo.dg.is_finite() {
            // Quadratic interpolation from lo's value and slope and hi's value.
            let da = hi.alpha - lo.alpha;
            let denom = 2.0 * (hi.f - lo.f - lo.dg * da);
            if denom > 0.0 {
                lo.alpha - lo.dg * da * da / denom
            } else {
                0.5 * (lo.alpha + hi.alpha)
            }
        } else {
            0.5 * (lo.alpha + hi.alpha)
        };
        let (a, b) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let margin = 0.1 * (b - a);
        if !(alpha > a + margin && alpha < b - margin) {
            alpha = 0.5 * (a + b);
        }
        let cur = eval(f, x, d, alpha);
        if !cur.f.is_finite() || cur.f > f0 + C1 * alpha * dg0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.dg.abs() <= -C2 * dg0 {
                return Some(cur);
            }
            if cur.dg * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1e-300) {
            break;
        }
    }
    (lo.alpha > 0.0 && lo.f < f0).then_some(lo)
}
