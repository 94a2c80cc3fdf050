//! BFGS minimisation with a backtracking line search.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop once the gradient max-norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { grad_tol: 1e-6, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f`, which returns the objective and writes its gradient into
/// the second argument.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return Err(Error::domain("objective is not finite at the starting point"));
    }
    if max_abs(&g) < opts.grad_tol {
        return Ok(BfgsOutcome { x, f: fx, grad: g, iterations: 0 });
    }

    // Row-major inverse-Hessian approximation.
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            h[i * d + i] = 1.0;
        }
    };
    let mut h = vec![0.0; d * d];
    identity(&mut h);
    let mut scaled = false;

    let mut p = vec![0.0; d];
    let mut x_new = vec![0.0; d];
    let mut g_new = vec![0.0; d];
    let mut s = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut hy = vec![0.0; d];

    for iter in 1..=opts.max_iter {
        for i in 0..d {
            p[i] = -dot(&h[i * d..(i + 1) * d], &g);
        }
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            identity(&mut h);
            scaled = false;
            for i in 0..d {
                p[i] = -g[i];
            }
            slope = dot(&g, &p);
        }

        let g_norm = max_abs(&g);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..d {
                x_new[i] = x[i] + alpha * p[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() {
                let armijo = f_new <= fx + 1e-4 * alpha * slope;
                // Near the optimum the decrease drops below the rounding
                // noise of `f`; accept on gradient progress instead.
                let flat = f_new - fx <= 1e-12 * (1.0 + fx.abs()) && max_abs(&g_new) < g_norm;
                if armijo || flat {
                    fx = f_new;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence { iterations: iter, grad_norm: g_norm });
        }

        for i in 0..d {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);

        if max_abs(&g) < opts.grad_tol {
            return Ok(BfgsOutcome { x, f: fx, grad: g, iterations: iter });
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if !scaled {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                scaled = true;
            }
            let rho = 1.0 / sy;
            for i in 0..d {
                hy[i] = dot(&h[i * d..(i + 1) * d], &y);
            }
            let yhy = dot(&y, &hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, grad_norm: max_abs(&g) })
}
