use super::mean;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub intercept: T,
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
}

/// Least squares of `target` on `predictors` with an intercept.
/// Solved on centered data through the normal equations.
pub fn ols_fit<T: Scalar>(target: &[T], predictors: &[&[T]]) -> Result<OlsFit<T>> {
    let n = target.len();
    if predictors.iter().any(|c| c.len() != n) {
        return Err(Error::ShapeMismatch("predictor length differs from target".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples("regression needs at least 2 rows".into()));
    }
    let p = predictors.len();
    let ym = mean(target);
    if p == 0 {
        return Ok(OlsFit {
            intercept: ym,
            coefficients: Vec::new(),
            residuals: target.iter().map(|&v| v - ym).collect(),
        });
    }
    if p >= n {
        return Err(Error::RankDeficient);
    }
    let means: Vec<T> = predictors.iter().map(|c| mean(c)).collect();
    let xc: Vec<Vec<T>> = predictors
        .iter()
        .zip(&means)
        .map(|(c, &m)| c.iter().map(|&v| v - m).collect())
        .collect();
    let yc: Vec<T> = target.iter().map(|&v| v - ym).collect();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&u, &v)| u * v).sum::<T>();
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![T::zero(); p];
    for a in 0..p {
        for b in a..p {
            let v = dot(&xc[a], &xc[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
        rhs[a] = dot(&xc[a], &yc);
    }
    let mut beta = gram.cholesky_solve(&rhs).ok_or(Error::RankDeficient)?;
    // One step of iterative refinement tightens the orthogonality of residuals.
    let resid = |beta: &[T]| -> Vec<T> {
        (0..n)
            .map(|i| yc[i] - (0..p).map(|a| beta[a] * xc[a][i]).sum::<T>())
            .collect()
    };
    let r = resid(&beta);
    let corr: Vec<T> = (0..p).map(|a| dot(&xc[a], &r)).collect();
    if let Some(delta) = gram.cholesky_solve(&corr) {
        for (b, d) in beta.iter_mut().zip(delta) {
            *b = *b + d;
        }
    }
    let residuals = resid(&beta);
    let intercept = ym - beta.iter().zip(&means).map(|(&b, &m)| b * m).sum::<T>();
    Ok(OlsFit {
        intercept,
        coefficients: beta,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeFit<T> {
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
}

/// Piecewise-constant least-squares regression tree grown to `max_depth`,
/// with at least `min_leaf` rows per leaf. Splits sit at midpoints between
/// consecutive distinct predictor values.
pub fn tree_regress<T: Scalar>(
    target: &[T],
    predictors: &[&[T]],
    max_depth: usize,
    min_leaf: usize,
) -> Result<TreeFit<T>> {
    let n = target.len();
    if predictors.iter().any(|c| c.len() != n) {
        return Err(Error::ShapeMismatch("predictor length differs from target".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples("regression needs at least 2 rows".into()));
    }
    let min_leaf = min_leaf.max(1);
    let mut fitted = vec![T::zero(); n];
    let mut stack = vec![((0..n).collect::<Vec<usize>>(), 0usize)];
    while let Some((rows, depth)) = stack.pop() {
        let split = if depth < max_depth && rows.len() >= 2 * min_leaf {
            best_split(target, predictors, &rows, min_leaf)
        } else {
            None
        };
        match split {
            Some((j, thr)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| predictors[j][i] <= thr);
                stack.push((l, depth + 1));
                stack.push((r, depth + 1));
            }
            None => {
                let m = rows.iter().map(|&i| target[i]).sum::<T>() / T::of_usize(rows.len());
                for &i in &rows {
                    fitted[i] = m;
                }
            }
        }
    }
    let residuals = target.iter().zip(&fitted).map(|(&y, &f)| y - f).collect();
    Ok(TreeFit { fitted, residuals })
}

/// Split maximizing the reduction in squared error, as `(feature, threshold)`.
fn best_split<T: Scalar>(target: &[T], predictors: &[&[T]], rows: &[usize], min_leaf: usize) -> Option<(usize, T)> {
    let m = rows.len();
    let total: T = rows.iter().map(|&i| target[i]).sum();
    let mf = T::of_usize(m);
    let base = total * total / mf;
    let mut best: Option<(T, usize, T)> = None;
    let mut order = rows.to_vec();
    for (j, col) in predictors.iter().enumerate() {
        order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap_or(std::cmp::Ordering::Equal));
        let mut left = T::zero();
        for k in 0..m - 1 {
            left = left + target[order[k]];
            let nl = k + 1;
            if nl < min_leaf || m - nl < min_leaf {
                continue;
            }
            let (a, b) = (col[order[k]], col[order[k + 1]]);
            if a == b {
                continue;
            }
            let right = total - left;
            let gain = left * left / T::of_usize(nl) + right * right / T::of_usize(m - nl) - base;
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, j, a + (b - a) * T::of(0.5)));
            }
        }
    }
    match best {
        Some((g, j, thr)) if g > T::zero() => Some((j, thr)),
        _ => None,
    }
}
