//! Unconstrained minimization: BFGS with a backtracking line search, and a
//! Nelder–Mead simplex for when the quasi-Newton iteration stalls.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Converged once an iteration improves the objective by less than this...
    pub f_tol: f64,
    /// ...and the gradient's largest component is below this.
    pub g_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            f_tol: 1e-9,
            g_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

/// Minimizes `f` from `x0`. `f` may return `+∞` outside its domain; the line
/// search backs away from such points.
pub fn bfgs<F, G>(f: F, grad: G, x0: DVector<f64>, opts: &OptimOptions) -> OptimResult
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut iterations = 0;

    if !fx.is_finite() {
        return OptimResult {
            x,
            f: fx,
            iterations,
            converged: false,
        };
    }
    if inf_norm(&g) < opts.g_tol {
        return OptimResult {
            x,
            f: fx,
            iterations,
            converged: true,
        };
    }

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            first = true;
            dir = -g.clone();
            slope = g.dot(&dir);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial = &x + &dir * step;
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if first {
                break;
            }
            // Stale curvature model: restart from steepest descent.
            h = DMatrix::identity(n, n);
            first = true;
            continue;
        };

        let g_new = grad(&x_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;

        if improvement < opts.f_tol && inf_norm(&g) < opts.g_tol {
            return OptimResult {
                x,
                f: fx,
                iterations,
                converged: true,
            };
        }

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                h *= sy / y.dot(&y);
                first = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
    }

    let converged = inf_norm(&g) < opts.g_tol;
    OptimResult {
        x,
        f: fx,
        iterations,
        converged,
    }
}

/// Derivative-free simplex search started from `x0` with edge length `step`.
pub fn nelder_mead<F>(f: F, x0: DVector<f64>, step: f64, opts: &OptimOptions) -> OptimResult
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x0.len();
    let eval = |x: &DVector<f64>| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.clone(), eval(&x0)));
    for i in 0..n {
        let mut v = x0.clone();
        v[i] += step;
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| inf_norm(&(v - &simplex[0].0)))
            .fold(0.0, f64::max);
        if spread.abs() < opts.f_tol && size < 1e-8 {
            converged = true;
            break;
        }

        let centroid = simplex[..n]
            .iter()
            .fold(DVector::zeros(n), |acc, (v, _)| acc + v)
            / n as f64;
        let worst = simplex[n].clone();
        let reflect = &centroid + (&centroid - &worst.0);
        let fr = eval(&reflect);
        if fr < simplex[0].1 {
            let expand = &centroid + (&reflect - &centroid) * 2.0;
            let fe = eval(&expand);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
            continue;
        }
        let (towards, ft) = if fr < worst.1 {
            (&reflect, fr)
        } else {
            (&worst.0, worst.1)
        };
        let contract = &centroid + (towards - &centroid) * 0.5;
        let fc = eval(&contract);
        if fc < ft {
            simplex[n] = (contract, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (v, fv) in simplex.iter_mut().skip(1) {
            *v = &best + (&*v - &best) * 0.5;
            *fv = eval(v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    OptimResult {
        x,
        f,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &DVector<f64>) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn rosenbrock_grad(x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ])
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let r = bfgs(
            rosenbrock,
            rosenbrock_grad,
            DVector::from_vec(vec![-1.2, 1.0]),
            &OptimOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn bfgs_respects_domain() {
        // -ln x + x has its minimum at 1 and is undefined for x <= 0
        let f = |x: &DVector<f64>| {
            if x[0] > 0.0 {
                x[0] - x[0].ln()
            } else {
                f64::INFINITY
            }
        };
        let g = |x: &DVector<f64>| DVector::from_vec(vec![1.0 - 1.0 / x[0]]);
        let r = bfgs(
            f,
            g,
            DVector::from_vec(vec![0.05]),
            &OptimOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &DVector<f64>| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
        let r = nelder_mead(f, DVector::zeros(2), 0.5, &OptimOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-6 && (r.x[1] + 1.0).abs() < 1e-6);
    }
}
