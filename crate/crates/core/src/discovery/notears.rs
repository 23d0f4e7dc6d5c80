use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{BackgroundKnowledge, Dag};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::stats::standardize;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NotearsConfig {
    pub lambda: f64,
    pub weight_threshold: f64,
    pub h_tol: f64,
    pub max_outer: usize,
    pub rho_growth: f64,
    pub rho_init: f64,
    pub rho_max: f64,
    pub max_inner: usize,
}

impl Default for NotearsConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            weight_threshold: 0.3,
            h_tol: 1e-8,
            max_outer: 100,
            rho_growth: 10.0,
            rho_init: 1.0,
            rho_max: 1e16,
            max_inner: 1000,
        }
    }
}

impl NotearsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("notears: {m}")));
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.weight_threshold >= 0.0) {
            return bad("weight threshold must be non-negative");
        }
        if !(self.h_tol > 0.0) {
            return bad("h tolerance must be positive");
        }
        if !(self.rho_growth > 1.0) || !(self.rho_init > 0.0) || !(self.rho_max >= self.rho_init) {
            return bad("rho schedule must start positive and grow");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotearsResult {
    pub dag: Dag,
    /// Weights before thresholding; `w[(i, j)]` is the weight of `i -> j`.
    pub weights: Matrix<f64>,
    pub h: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub cycle_edges_removed: usize,
}

/// `tr(exp(W o W)) - d` with gradient `exp(W o W)' o 2W`.
pub fn h_acyclicity<T: Scalar>(w: &Matrix<T>) -> (T, Matrix<T>) {
    let e = w.hadamard(w).expm();
    let h = e.trace() - T::of_usize(w.nrows());
    let g = e.transpose().hadamard(&w.scale(T::of(2.0)));
    (h, g)
}

/// Linear NOTEARS by augmented Lagrangian over a positive/negative split of
/// `W`, each subproblem solved by projected L-BFGS.
///
/// Stopping with `h` above tolerance is reported through `converged`,
/// keeping the partial estimate.
pub fn notears_linear(data: &Dataset, cfg: &NotearsConfig, bk: &BackgroundKnowledge) -> Result<NotearsResult> {
    cfg.validate()?;
    let d = data.n_cols();
    bk.validate(d)?;
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::InsufficientSamples("notears needs at least 2 rows".into()));
    }
    let x: Vec<Vec<f64>> = (0..d).map(|j| standardize(data.column(j))).collect::<Result<_>>()?;
    let mut cov = Matrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = x[a].iter().zip(&x[b]).map(|(u, w)| u * w).sum::<f64>() / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let dd = d * d;
    let mut fixed = vec![false; 2 * dd];
    for i in 0..d {
        for j in 0..d {
            if i == j || !bk.allows(i, j) {
                fixed[i * d + j] = true;
                fixed[dd + i * d + j] = true;
            }
        }
    }
    let problem = Problem { cov, d, lambda: cfg.lambda };

    let mut z = vec![0.0; 2 * dd];
    let (mut rho, mut alpha, mut h) = (cfg.rho_init, 0.0, f64::INFINITY);
    let (mut outer, mut inner) = (0, 0);
    while outer < cfg.max_outer {
        outer += 1;
        let (z_new, h_new) = loop {
            let sol = minimize(|v| problem.objective(v, rho, alpha), &z, &fixed, cfg.max_inner);
            inner += sol.iterations;
            let h_new = h_acyclicity(&problem.weights(&sol.x)).0;
            if h_new > 0.25 * h && rho < cfg.rho_max {
                rho *= cfg.rho_growth;
            } else {
                break (sol.x, h_new);
            }
        };
        z = z_new;
        h = h_new;
        alpha += rho * h;
        if h <= cfg.h_tol || rho >= cfg.rho_max {
            break;
        }
    }
    let weights = problem.weights(&z);
    let mut kept = weights.map(|v| if v.abs() < cfg.weight_threshold { 0.0 } else { v });
    for &(a, b) in &bk.required_edges {
        if kept[(a, b)] == 0.0 {
            kept[(a, b)] = weights[(a, b)].abs().max(cfg.weight_threshold);
        }
    }
    let cycle_edges_removed = break_cycles(&mut kept, bk);
    let mut edges = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if kept[(i, j)] != 0.0 {
                edges.push((i, j));
            }
        }
    }
    Ok(NotearsResult {
        dag: Dag::new(data.labels().to_vec(), &edges)?,
        weights,
        h,
        converged: h <= cfg.h_tol,
        outer_iterations: outer,
        inner_iterations: inner,
        cycle_edges_removed,
    })
}

struct Problem {
    cov: Matrix<f64>,
    d: usize,
    lambda: f64,
}

impl Problem {
    fn weights(&self, z: &[f64]) -> Matrix<f64> {
        let dd = self.d * self.d;
        Matrix::from_row_major(self.d, self.d, (0..dd).map(|k| z[k] - z[dd + k]).collect())
    }

    /// Augmented Lagrangian value and gradient in the split variables.
    fn objective(&self, z: &[f64], rho: f64, alpha: f64) -> (f64, Vec<f64>) {
        let d = self.d;
        let dd = d * d;
        let w = self.weights(z);
        let i_w = Matrix::identity(d).sub(&w);
        // 1/(2n) ||X - XW||^2 = tr((I-W)' S (I-W)) / 2.
        let s_iw = self.cov.matmul(&i_w);
        let loss = 0.5 * i_w.transpose().matmul(&s_iw).trace();
        let g_loss = s_iw.scale(-1.0);
        let (h, g_h) = h_acyclicity(&w);
        let l1: f64 = z.iter().sum();
        let f = loss + 0.5 * rho * h * h + alpha * h + self.lambda * l1;
        let g_smooth = g_loss.add(&g_h.scale(rho * h + alpha));
        let mut g = vec![0.0; 2 * dd];
        for (k, &v) in g_smooth.as_slice().iter().enumerate() {
            g[k] = v + self.lambda;
            g[dd + k] = -v + self.lambda;
        }
        (f, g)
    }
}

pub(crate) struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Objective after each accepted step, starting from the initial point.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trace: Vec<f64>,
}

/// L-BFGS on the non-negative orthant with some coordinates pinned at zero.
pub(crate) fn minimize<F>(f: F, x0: &[f64], fixed: &[bool], max_iter: usize) -> Solution
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const MEMORY: usize = 10;
    const PGTOL: f64 = 1e-9;
    const FTOL: f64 = 1e-12;
    let n = x0.len();
    let project = |v: &mut [f64]| {
        for (k, x) in v.iter_mut().enumerate() {
            if fixed[k] || *x < 0.0 {
                *x = 0.0;
            }
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut trace = vec![fx];
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while iterations < max_iter {
        let free: Vec<bool> = (0..n).map(|k| !fixed[k] && !(x[k] <= 0.0 && g[k] > 0.0)).collect();
        let pg_norm = (0..n).filter(|&k| free[k]).map(|k| g[k].abs()).fold(0.0, f64::max);
        if pg_norm < PGTOL {
            break;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if hist.is_empty() {
                    break;
                }
                hist.clear();
            }
            let mut dir = two_loop(&g, &free, &hist);
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                hist.clear();
                dir = (0..n).map(|k| if free[k] { -g[k] } else { 0.0 }).collect();
            }
            let mut t = if hist.is_empty() { (1.0 / pg_norm).min(1.0) } else { 1.0 };
            for _ in 0..60 {
                let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                project(&mut xn);
                let decrease: f64 = xn.iter().zip(&x).zip(&g).map(|((a, b), c)| (a - b) * c).sum();
                let (fn_, gn) = f(&xn);
                if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease && decrease < 0.0 {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        iterations += 1;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * y.iter().map(|v| v * v).sum::<f64>().max(1e-300) {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > MEMORY {
                hist.pop_front();
            }
        }
        let rel = (fx - fn_) / fx.abs().max(fn_.abs()).max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        trace.push(fx);
        if rel <= FTOL {
            break;
        }
    }
    Solution { x, iterations, trace }
}

/// `-H g` over the free coordinates from the stored curvature pairs.
fn two_loop(g: &[f64], free: &[bool], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect() };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(free).filter(|(_, &f)| f).map(|((x, y), _)| x * y).sum::<f64>();
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, _) in hist.iter().rev() {
        let sy = dot(s, y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(s, &q) / sy;
        for k in 0..q.len() {
            if free[k] {
                q[k] -= a * y[k];
            }
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let yy = dot(y, y);
        let sy = dot(s, y);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, _), a) in hist.iter().zip(alphas.iter().rev()) {
        let sy = dot(s, y);
        if sy <= 0.0 {
            continue;
        }
        let b = dot(y, &q) / sy;
        for k in 0..q.len() {
            if free[k] {
                q[k] += (a - b) * s[k];
            }
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Removes the smallest-magnitude edge on some directed cycle until none remain.
/// Required edges are never chosen when another edge on the cycle is available.
fn break_cycles(w: &mut Matrix<f64>, bk: &BackgroundKnowledge) -> usize {
    let d = w.nrows();
    let mut removed = 0;
    while let Some(cycle) = find_cycle(w) {
        let pick = cycle
            .iter()
            .copied()
            .filter(|&(a, b)| !bk.requires(a, b))
            .chain(cycle.iter().copied())
            .min_by(|&(a, b), &(c, e)| {
                let req = |x: usize, y: usize| bk.requires(x, y);
                req(a, b)
                    .cmp(&req(c, e))
                    .then(w[(a, b)].abs().partial_cmp(&w[(c, e)].abs()).unwrap_or(std::cmp::Ordering::Equal))
            })
            .expect("a cycle has edges");
        w[pick] = 0.0;
        removed += 1;
        debug_assert!(removed <= d * d);
    }
    removed
}

fn find_cycle(w: &Matrix<f64>) -> Option<Vec<(usize, usize)>> {
    let d = w.nrows();
    // 0 unvisited, 1 on stack, 2 done.
    let mut state = vec![0u8; d];
    let mut parent = vec![usize::MAX; d];
    for root in 0..d {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next == d {
                state[v] = 2;
                stack.pop();
                continue;
            }
            let u = *next;
            *next += 1;
            if w[(v, u)] == 0.0 {
                continue;
            }
            match state[u] {
                0 => {
                    parent[u] = v;
                    state[u] = 1;
                    stack.push((u, 0));
                }
                1 => {
                    let mut cycle = vec![(v, u)];
                    let mut c = v;
                    while c != u {
                        let p = parent[c];
                        cycle.push((p, c));
                        c = p;
                    }
                    return Some(cycle);
                }
                _ => {}
            }
        }
    }
    None
}
