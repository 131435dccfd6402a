//! Normal distribution helpers and multivariate normal rectangle probabilities.
//!
//! Dimensions one and two are evaluated with deterministic quadrature
//! (Drezner-Wesolowsky/Genz for the bivariate orthant). Higher dimensions use
//! the separation-of-variables transform with variable prioritisation,
//! integrated by randomly shifted Richtmyer lattice rules with a baker's
//! periodisation. Shifts come from a fixed seed, so results are reproducible.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DIM: usize = 8;

pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / SQRT_2)
    }
}

pub fn norm_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }
}

pub fn norm_ppf(p: f64) -> f64 {
    static STD: OnceLock<Normal> = OnceLock::new();
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    STD.get_or_init(Normal::standard).inverse_cdf(p)
}

/// P(a < Z < b) for a standard normal, computed on the tail that keeps precision.
pub fn norm_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a > 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n; returns the n/2 negative nodes and their weights.
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n / 2 {
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl_rule(which: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<[(Vec<f64>, Vec<f64>); 3]> = OnceLock::new();
    &RULES.get_or_init(|| [gauss_legendre(6), gauss_legendre(12), gauss_legendre(20)])[which]
}

/// Upper bivariate orthant P(X > h, Y > k) for unit-variance normals with correlation `r`.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return norm_cdf(-k);
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    let (x, w) = if r.abs() < 0.3 {
        gl_rule(0)
    } else if r.abs() < 0.75 {
        gl_rule(1)
    } else {
        gl_rule(2)
    };
    let two_pi = 2.0 * PI;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (xi, wi) in x.iter().zip(w) {
            for sgn in [1.0, -1.0] {
                let sn = (asr * (sgn * xi + 1.0) / 2.0).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
    }
    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (xi, wi) in x.iter().zip(w) {
            for sgn in [1.0, -1.0] {
                let xs = (a * (sgn * xi + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * wi
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        let mut out = -bvn;
        if k > h {
            out += if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
        }
        out
    }
}

/// P(a1 < X < b1, a2 < Y < b2) for unit-variance normals with correlation `r`.
pub fn bvn_rectangle(a: [f64; 2], b: [f64; 2], r: f64) -> f64 {
    let p = bvn_upper(a[0], a[1], r) - bvn_upper(b[0], a[1], r) - bvn_upper(a[0], b[1], r)
        + bvn_upper(b[0], b[1], r);
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnOptions {
    pub max_dim: usize,
    pub abs_eps: f64,
    /// Cap on lattice points per shift.
    pub max_points: usize,
    pub shifts: usize,
    pub seed: u64,
}

impl Default for MvnOptions {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
            abs_eps: 1e-6,
            max_points: 1 << 19,
            shifts: 12,
            seed: 0x5eed_1a77_1ce5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnEstimate {
    pub value: f64,
    /// Three standard errors across lattice shifts; zero for the quadrature paths.
    pub error: f64,
    pub evaluations: usize,
}

/// P(lower <= X <= upper) for X ~ N(mu, sigma), default options.
pub fn mvn_rectangle(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Result<f64> {
    mvn_rectangle_with(mu, sigma, lower, upper, &MvnOptions::default()).map(|e| e.value)
}

pub fn mvn_rectangle_with(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    opts: &MvnOptions,
) -> Result<MvnEstimate> {
    let d = mu.len();
    if sigma.nrows() != d || sigma.ncols() != d || lower.len() != d || upper.len() != d {
        return Err(Error::InvalidBounds("dimension mismatch".into()));
    }
    if d > opts.max_dim {
        return Err(Error::DimensionLimit {
            dim: d,
            limit: opts.max_dim,
        });
    }
    for i in 0..d {
        if lower[i].is_nan() || upper[i].is_nan() || lower[i] >= upper[i] {
            return Err(Error::InvalidBounds(format!(
                "lower[{i}] = {} must be below upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
    }
    if sigma.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("rectangle covariance".into()));
    }
    // Unbounded coordinates integrate out exactly.
    let keep: Vec<usize> = (0..d)
        .filter(|&i| lower[i] > f64::NEG_INFINITY || upper[i] < f64::INFINITY)
        .collect();
    let sd: Vec<f64> = keep.iter().map(|&i| sigma[(i, i)].sqrt()).collect();
    let a: Vec<f64> = keep
        .iter()
        .zip(&sd)
        .map(|(&i, s)| (lower[i] - mu[i]) / s)
        .collect();
    let b: Vec<f64> = keep
        .iter()
        .zip(&sd)
        .map(|(&i, s)| (upper[i] - mu[i]) / s)
        .collect();
    let corr = DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
        sigma[(keep[r], keep[c])] / (sd[r] * sd[c])
    });
    let exact = |value: f64| MvnEstimate {
        value,
        error: 0.0,
        evaluations: 0,
    };
    match keep.len() {
        0 => Ok(exact(1.0)),
        1 => Ok(exact(norm_interval(a[0], b[0]))),
        2 => Ok(exact(bvn_rectangle([a[0], a[1]], [b[0], b[1]], corr[(0, 1)]))),
        _ => qmc_rectangle(&corr, &a, &b, opts),
    }
}

/// Cholesky factor with Gibson-Glasbey-Elston variable ordering, plus the permuted limits.
fn prioritised_cholesky(
    corr: &DMatrix<f64>,
    a: &[f64],
    b: &[f64],
) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let d = a.len();
    let mut c = corr.clone();
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let mut l = DMatrix::<f64>::zeros(d, d);
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut best = i;
        let mut best_p = f64::INFINITY;
        for j in i..d {
            let s: f64 = (0..i).map(|k| l[(j, k)] * y[k]).sum();
            let v = c[(j, j)] - (0..i).map(|k| l[(j, k)].powi(2)).sum::<f64>();
            if v <= 0.0 {
                continue;
            }
            let den = v.sqrt();
            let p = norm_interval((a[j] - s) / den, (b[j] - s) / den);
            if p < best_p {
                best_p = p;
                best = j;
            }
        }
        if best != i {
            c.swap_rows(i, best);
            c.swap_columns(i, best);
            l.swap_rows(i, best);
            a.swap(i, best);
            b.swap(i, best);
        }
        let v = c[(i, i)] - (0..i).map(|k| l[(i, k)].powi(2)).sum::<f64>();
        if v <= 1e-14 {
            return Err(Error::NotPositiveDefinite("rectangle covariance".into()));
        }
        let lii = v.sqrt();
        l[(i, i)] = lii;
        for r in i + 1..d {
            let s: f64 = (0..i).map(|k| l[(r, k)] * l[(i, k)]).sum();
            l[(r, i)] = (c[(r, i)] - s) / lii;
        }
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        let (lo, hi) = ((a[i] - s) / lii, (b[i] - s) / lii);
        let p = norm_interval(lo, hi);
        y[i] = if p > 1e-300 {
            (norm_pdf(lo) - norm_pdf(hi)) / p
        } else if hi <= 0.0 {
            hi
        } else {
            lo
        };
    }
    Ok((l, a, b))
}

fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn qmc_rectangle(
    corr: &DMatrix<f64>,
    a: &[f64],
    b: &[f64],
    opts: &MvnOptions,
) -> Result<MvnEstimate> {
    let d = a.len();
    let (l, a, b) = prioritised_cholesky(corr, a, b)?;
    let m = d - 1;
    let gen: Vec<f64> = primes(m).iter().map(|&p| (p as f64).sqrt().fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shifts: Vec<Vec<f64>> = (0..opts.shifts)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect();

    let integrand = |w: &[f64], y: &mut [f64]| -> f64 {
        let mut lo = norm_cdf(a[0] / l[(0, 0)]);
        let mut hi = norm_cdf(b[0] / l[(0, 0)]);
        let mut f = hi - lo;
        for i in 1..d {
            if f <= 0.0 {
                return 0.0;
            }
            let u = (lo + w[i - 1] * (hi - lo)).clamp(1e-300, 1.0 - 1e-16);
            y[i - 1] = norm_ppf(u);
            let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
            lo = norm_cdf((a[i] - s) / l[(i, i)]);
            hi = norm_cdf((b[i] - s) / l[(i, i)]);
            f *= hi - lo;
        }
        f
    };

    let mut n = 127usize;
    let mut evaluations = 0usize;
    let mut w = vec![0.0; m];
    let mut w2 = vec![0.0; m];
    let mut y = vec![0.0; d];
    loop {
        let means: Vec<f64> = shifts
            .iter()
            .map(|shift| {
                let mut acc = 0.0;
                for j in 1..=n {
                    for k in 0..m {
                        let x = (j as f64 * gen[k] + shift[k]).fract();
                        let t = (2.0 * x - 1.0).abs();
                        w[k] = t;
                        w2[k] = 1.0 - t;
                    }
                    acc += integrand(&w, &mut y) + integrand(&w2, &mut y);
                }
                acc / (2 * n) as f64
            })
            .collect();
        evaluations += 2 * n * shifts.len();
        let k = means.len() as f64;
        let mean = means.iter().sum::<f64>() / k;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let error = 3.0 * (var / k).sqrt();
        if error <= opts.abs_eps || n >= opts.max_points {
            return Ok(MvnEstimate {
                value: mean.clamp(0.0, 1.0),
                error,
                evaluations,
            });
        }
        n = (n * 2).min(opts.max_points);
    }
}
