//! Box-constrained quasi-Newton minimization with finite-difference gradients.
//!
//! Projected BFGS on the inverse Hessian. Variables held at a bound by the
//! gradient are frozen for the step; a backtracking line search treats +inf
//! as rejection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimStatus {
    Converged,
    NonPdHessian,
    IterationLimit,
    FlatRegion,
}

impl OptimStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimStatus::Converged => "converged",
            OptimStatus::NonPdHessian => "non-PD-Hessian",
            OptimStatus::IterationLimit => "iteration-limit",
            OptimStatus::FlatRegion => "flat-region",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Bound on max |pg_i| * max(|x_i|, 1) / max(|f|, 1).
    pub grad_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub status: OptimStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub criterion: f64,
}

type Bounds = [Option<(f64, f64)>];

fn lower(b: &Bounds, i: usize) -> f64 {
    b[i].map_or(f64::NEG_INFINITY, |(l, _)| l)
}

fn upper(b: &Bounds, i: usize) -> f64 {
    b[i].map_or(f64::INFINITY, |(_, u)| u)
}

pub fn project(x: &mut [f64], bounds: &Bounds) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower(bounds, i), upper(bounds, i));
    }
}

struct Counted<F> {
    f: F,
    n: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.n += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Central differences with step 1e-6 * max(|x|, 1); one-sided near bounds or when a side is +inf.
pub fn gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], fx: f64, bounds: &Bounds) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xt = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let can_up = x[i] + h <= upper(bounds, i);
        let can_down = x[i] - h >= lower(bounds, i);
        let mut eval = |v: f64, xt: &mut Vec<f64>| {
            xt[i] = v;
            let r = f(xt);
            xt[i] = x[i];
            r
        };
        let fp = if can_up { eval(x[i] + h, &mut xt) } else { f64::INFINITY };
        let fm = if can_down { eval(x[i] - h, &mut xt) } else { f64::INFINITY };
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => 0.0,
        };
    }
    g
}

fn projected_gradient(x: &[f64], g: &[f64], bounds: &Bounds) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let at_lo = x[i] <= lower(bounds, i) && g[i] > 0.0;
            let at_hi = x[i] >= upper(bounds, i) && g[i] < 0.0;
            if at_lo || at_hi {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn criterion(x: &[f64], pg: &[f64], f: f64) -> f64 {
    let m = x
        .iter()
        .zip(pg)
        .map(|(xi, gi)| gi.abs() * xi.abs().max(1.0))
        .fold(0.0, f64::max);
    m / f.abs().max(1.0)
}

pub fn minimize(
    f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    bounds: &Bounds,
    opts: &OptimOptions,
) -> OptimResult {
    let n = x0.len();
    let mut fc = Counted { f, n: 0 };
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let mut fx = fc.call(&x);
    if n == 0 || !fx.is_finite() {
        return OptimResult {
            x,
            f: fx,
            status: if fx.is_finite() { OptimStatus::Converged } else { OptimStatus::FlatRegion },
            iterations: 0,
            evaluations: fc.n,
            criterion: 0.0,
        };
    }
    let grad = |fc: &mut Counted<_>, x: &[f64], fx: f64| {
        let mut call = |y: &[f64]| fc.call(y);
        gradient(&mut call, x, fx, bounds)
    };
    let mut g = grad(&mut fc, &x, fx);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut status = OptimStatus::IterationLimit;
    let mut iterations = 0;
    let mut crit = f64::INFINITY;
    while iterations < opts.max_iter {
        let pg = projected_gradient(&x, &g, bounds);
        crit = criterion(&x, &pg, fx);
        if crit <= opts.grad_tol {
            status = OptimStatus::Converged;
            break;
        }
        iterations += 1;
        let free: Vec<bool> = (0..n).map(|i| pg[i] != 0.0 || g[i] == 0.0).collect();
        let mut d = DVector::zeros(n);
        for i in (0..n).filter(|&i| free[i]) {
            for j in (0..n).filter(|&j| free[j]) {
                d[i] -= h[(i, j)] * g[j];
            }
        }
        let slope: f64 = (0..n).map(|i| d[i] * g[i]).sum();
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            for i in 0..n {
                d[i] = -pg[i];
            }
        }
        let mut alpha = if fresh {
            let dmax = d.amax();
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            (0.1 * scale / dmax).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        while alpha > 1e-16 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + alpha * d[i]).collect();
            project(&mut xn, bounds);
            let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            let fn_ = fc.call(&xn);
            if fn_.is_finite() && decrease < 0.0 && fn_ <= fx + 1e-4 * decrease {
                accepted = Some((xn, fn_));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh {
                status = OptimStatus::FlatRegion;
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let gn = grad(&mut fc, &xn, fnew);
        let s = DVector::from_fn(n, |i, _| xn[i] - x[i]);
        let y = DVector::from_fn(n, |i, _| gn[i] - g[i]);
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if fresh {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        let stalled = (fx - fnew).abs() <= 1e-15 * fx.abs().max(1.0)
            && s.amax() <= 1e-14 * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        x = xn;
        fx = fnew;
        g = gn;
        if stalled {
            let pg = projected_gradient(&x, &g, bounds);
            crit = criterion(&x, &pg, fx);
            status = if crit <= opts.grad_tol { OptimStatus::Converged } else { OptimStatus::FlatRegion };
            break;
        }
    }
    if status == OptimStatus::IterationLimit {
        let pg = projected_gradient(&x, &g, bounds);
        crit = criterion(&x, &pg, fx);
        if crit <= opts.grad_tol {
            status = OptimStatus::Converged;
        }
    }
    OptimResult {
        x,
        f: fx,
        status,
        iterations,
        evaluations: fc.n,
        criterion: crit,
    }
}

/// Central-difference Hessian with h_i = max(1e-4, 1e-4 |x_i|).
pub fn hessian(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| (1e-4 * v.abs()).max(1e-4)).collect();
    let f0 = f(x);
    let mut xt = x.to_vec();
    let mut at = |xt: &mut Vec<f64>, moves: &[(usize, f64)]| {
        for &(i, d) in moves {
            xt[i] = x[i] + d;
        }
        let v = f(xt);
        for &(i, _) in moves {
            xt[i] = x[i];
        }
        v
    };
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = at(&mut xt, &[(i, h[i])]);
        let fm = at(&mut xt, &[(i, -h[i])]);
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = at(&mut xt, &[(i, h[i]), (j, h[j])]);
            let fpm = at(&mut xt, &[(i, h[i]), (j, -h[j])]);
            let fmp = at(&mut xt, &[(i, -h[i]), (j, h[j])]);
            let fmm = at(&mut xt, &[(i, -h[i]), (j, -h[j])]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(f, &[-1.2, 1.0], &[None, None], &OptimOptions::default());
        assert_eq!(r.status, OptimStatus::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn active_bound() {
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2);
        let r = minimize(f, &[3.0, 0.0], &[Some((0.0, 10.0)), None], &OptimOptions::default());
        assert_eq!(r.status, OptimStatus::Converged);
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::INFINITY } else { x[0] - x[0].ln() };
        let r = minimize(f, &[5.0], &[None], &OptimOptions::default());
        assert_eq!(r.status, OptimStatus::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn quadratic_hessian() {
        let mut f = |x: &[f64]| 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] + x[1] * x[1];
        let h = hessian(&mut f, &[0.3, -0.2]);
        assert!((h[(0, 0)] - 6.0).abs() < 1e-6);
        assert!((h[(0, 1)] - 2.0).abs() < 1e-6);
        assert!((h[(1, 1)] - 2.0).abs() < 1e-6);
    }
}
