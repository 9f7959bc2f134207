//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved in the usual doubled form: variables `0..n` hold the
//! `alpha` coefficients and `n..2n` hold `alpha*`. Each step optimises the
//! pair chosen by second-order working-set selection and then updates the
//! gradient in place.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{design, Predictor, Standardizer};
use crate::data::Dataset;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `1 / (d * Var(X))` over the standardized design, or 1 if that variance is 0.
    Scale,
    Value(f64),
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Scale => s.serialize_str("scale"),
            Gamma::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(Gamma::Value(v)),
            Repr::Name(n) if n == "scale" => Ok(Gamma::Scale),
            Repr::Name(n) => Err(serde::de::Error::custom(format!("unknown gamma `{n}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: Gamma,
    /// Stop once the maximal KKT violation drops below this.
    pub kkt_tol: f64,
    /// Iteration budget, in multiples of the number of dual variables.
    pub max_passes: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            gamma: Gamma::Scale,
            kkt_tol: 1e-3,
            max_passes: 50,
        }
    }
}

impl SvrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("c", "must be positive and finite"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be non-negative and finite"));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid("gamma", "must be positive and finite"));
            }
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::invalid("kkt_tol", "must be positive"));
        }
        if self.max_passes == 0 {
            return Err(Error::invalid("max_passes", "must be at least 1"));
        }
        Ok(())
    }
}

/// Diagnostics from a traced fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrTrace {
    /// Dual objective (maximisation form) after each step, starting at 0.
    pub objective: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// Standardized training design, row-major.
    pub design: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub dim: usize,
    pub scaler: Standardizer,
    pub gamma: f64,
    /// Support vectors in standardized coordinates, row-major.
    pub support: Vec<f64>,
    /// `alpha_i - alpha*_i` for each support vector.
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SvrModel {
    pub fn fit(data: &Dataset, params: &SvrParams) -> Result<Self> {
        Self::fit_inner(data, params, false).map(|(m, _)| m)
    }

    pub fn fit_traced(data: &Dataset, params: &SvrParams) -> Result<(Self, SvrTrace)> {
        Self::fit_inner(data, params, true)
    }

    fn fit_inner(data: &Dataset, params: &SvrParams, trace: bool) -> Result<(Self, SvrTrace)> {
        params.validate()?;
        super::check_trainable(data)?;
        let scaler = Standardizer::fit(data);
        let scaled = scaler.transform_dataset(data)?;
        let (x, z) = design(&scaled);
        let dim = data.dim();
        let gamma = match params.gamma {
            Gamma::Value(g) => g,
            Gamma::Scale => {
                let var = population_variance(&x);
                if var > 0.0 {
                    1.0 / (dim as f64 * var)
                } else {
                    1.0
                }
            }
        };

        let mut kernel = Kernel::new(&x, dim, gamma);
        let out = solve(&mut kernel, &z, params, trace);
        let n = z.len();

        let mut support = Vec::new();
        let mut coef = Vec::new();
        let (mut alpha, mut alpha_star) = (vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            // Only the difference enters the model, so collapse each pair onto it.
            let d = out.beta[i] - out.beta[i + n];
            alpha[i] = d.max(0.0);
            alpha_star[i] = (-d).max(0.0);
            if d != 0.0 {
                support.extend_from_slice(&x[i * dim..(i + 1) * dim]);
                coef.push(d);
            }
        }
        let model = Self {
            dim,
            scaler,
            gamma,
            support,
            coef,
            intercept: -out.rho,
            converged: out.converged,
            iterations: out.iterations,
        };
        let trace = SvrTrace {
            objective: out.objective,
            alpha,
            alpha_star,
            design: x,
            gamma,
        };
        Ok((model, trace))
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }
}

impl Predictor for SvrModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let q = self.scaler.transform(x);
        let mut acc = 0.0;
        for (sv, c) in self.support.chunks_exact(self.dim).zip(&self.coef) {
            acc += c * rbf(sv, &q, self.gamma);
        }
        acc + self.intercept
    }
}

pub(crate) fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    libm::exp(-gamma * d2)
}

fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

/// Kernel rows computed on demand with a bounded FIFO cache.
struct Kernel<'a> {
    x: &'a [f64],
    dim: usize,
    n: usize,
    gamma: f64,
    cache: Vec<Option<Rc<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> Kernel<'a> {
    fn new(x: &'a [f64], dim: usize, gamma: f64) -> Self {
        let n = x.len() / dim;
        let capacity = (CACHE_BYTES / (8 * n.max(1))).clamp(2, n.max(2));
        Self {
            x,
            dim,
            n,
            gamma,
            cache: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(r) = &self.cache[i] {
            return r.clone();
        }
        let xi = &self.x[i * self.dim..(i + 1) * self.dim];
        let row: Rc<[f64]> = (0..self.n)
            .map(|t| rbf(xi, &self.x[t * self.dim..(t + 1) * self.dim], self.gamma))
            .collect();
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache[old] = None;
            }
        }
        self.order.push_back(i);
        self.cache[i] = Some(row.clone());
        row
    }
}

struct Solution {
    beta: Vec<f64>,
    rho: f64,
    converged: bool,
    iterations: usize,
    objective: Vec<f64>,
}

fn solve(kernel: &mut Kernel<'_>, z: &[f64], params: &SvrParams, trace: bool) -> Solution {
    let n = z.len();
    let l = 2 * n;
    let c = params.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let p: Vec<f64> = (0..l)
        .map(|t| if t < n { params.epsilon - z[t] } else { params.epsilon + z[t - n] })
        .collect();
    let mut beta = vec![0.0; l];
    let mut g = p.clone();
    let budget = params.max_passes.saturating_mul(l).max(1);
    let mut objective = Vec::new();
    if trace {
        objective.push(0.0);
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        let Some((i, j)) = select_pair(kernel, &beta, &g, n, c, params.kkt_tol) else {
            converged = true;
            break;
        };
        if iterations >= budget {
            break;
        }
        let (yi, yj) = (sign(i), sign(j));
        let ki = kernel.row(i % n);
        let kj = kernel.row(j % n);
        let qij = yi * yj * ki[j % n];
        let (old_i, old_j) = (beta[i], beta[j]);

        if yi != yj {
            let quad = positive(2.0 + 2.0 * qij);
            let delta = (-g[i] - g[j]) / quad;
            let diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if diff > 0.0 {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if diff > 0.0 {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = c - diff;
                }
            } else if beta[j] > c {
                beta[j] = c;
                beta[i] = c + diff;
            }
        } else {
            let quad = positive(2.0 - 2.0 * qij);
            let delta = (g[i] - g[j]) / quad;
            let sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if sum > c {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = sum - c;
                }
            } else if beta[j] < 0.0 {
                beta[j] = 0.0;
                beta[i] = sum;
            }
            if sum > c {
                if beta[j] > c {
                    beta[j] = c;
                    beta[i] = sum - c;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = sum;
            }
        }

        let (di, dj) = (beta[i] - old_i, beta[j] - old_j);
        for t in 0..l {
            let yt = sign(t);
            g[t] += yt * (yi * ki[t % n] * di + yj * kj[t % n] * dj);
        }
        iterations += 1;
        if trace {
            let f: f64 = beta.iter().zip(g.iter().zip(&p)).map(|(b, (gt, pt))| b * (gt + pt)).sum();
            objective.push(-0.5 * f);
        }
    }

    Solution {
        rho: compute_rho(&beta, &g, n, c),
        beta,
        converged,
        iterations,
        objective,
    }
}

fn positive(q: f64) -> f64 {
    if q > 0.0 {
        q
    } else {
        TAU
    }
}

/// Second-order working-set selection. `None` means the KKT gap is below
/// tolerance.
fn select_pair(kernel: &mut Kernel<'_>, beta: &[f64], g: &[f64], n: usize, c: f64, tol: f64) -> Option<(usize, usize)> {
    let l = 2 * n;
    let mut gmax = f64::NEG_INFINITY;
    let mut best_i = None;
    for t in 0..l {
        if t < n {
            if beta[t] < c && -g[t] >= gmax {
                gmax = -g[t];
                best_i = Some(t);
            }
        } else if beta[t] > 0.0 && g[t] >= gmax {
            gmax = g[t];
            best_i = Some(t);
        }
    }
    let i = best_i?;
    let yi = if i < n { 1.0 } else { -1.0 };
    let ki = kernel.row(i % n);

    let mut gmax2 = f64::NEG_INFINITY;
    let mut best_j = None;
    let mut obj_min = f64::INFINITY;
    for t in 0..l {
        let yt = if t < n { 1.0 } else { -1.0 };
        let qit = yi * yt * ki[t % n];
        let candidate = if t < n {
            if beta[t] <= 0.0 {
                continue;
            }
            gmax2 = gmax2.max(g[t]);
            (gmax + g[t], 2.0 - 2.0 * yi * qit)
        } else {
            if beta[t] >= c {
                continue;
            }
            gmax2 = gmax2.max(-g[t]);
            (gmax - g[t], 2.0 + 2.0 * yi * qit)
        };
        let (grad_diff, quad) = candidate;
        if grad_diff > 0.0 {
            let obj = -(grad_diff * grad_diff) / positive(quad);
            if obj <= obj_min {
                obj_min = obj;
                best_j = Some(t);
            }
        }
    }
    if gmax + gmax2 < tol {
        return None;
    }
    best_j.map(|j| (i, j))
}

fn compute_rho(beta: &[f64], g: &[f64], n: usize, c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..beta.len() {
        let y = if t < n { 1.0 } else { -1.0 };
        let yg = y * g[t];
        if beta[t] >= c {
            if y < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if beta[t] <= 0.0 {
            if y > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_n += 1;
            free_sum += yg;
        }
    }
    if free_n > 0 {
        free_sum / free_n as f64
    } else {
        (ub + lb) / 2.0
    }
}
