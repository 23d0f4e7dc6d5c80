use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean over variables of the per-variable mean absolute error across trials.
/// Both inputs are indexed `[trial][variable]`.
pub fn mae_bar<T: Scalar>(true_scores: &[Vec<T>], est_scores: &[Vec<T>]) -> Result<T> {
    if true_scores.is_empty() || true_scores.len() != est_scores.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true trials vs {} estimated",
            true_scores.len(),
            est_scores.len()
        )));
    }
    let p = true_scores[0].len();
    if p == 0 {
        return Err(Error::ShapeMismatch("no variables".into()));
    }
    for (t, e) in true_scores.iter().zip(est_scores) {
        if t.len() != p || e.len() != p {
            return Err(Error::ShapeMismatch(format!("expected {p} variables per trial")));
        }
    }
    let n = T::of_usize(true_scores.len());
    let total: T = (0..p)
        .map(|j| {
            true_scores
                .iter()
                .zip(est_scores)
                .map(|(t, e)| (t[j] - e[j]).abs())
                .sum::<T>()
                / n
        })
        .sum();
    Ok(total / T::of_usize(p))
}

/// Single-trial MAE-bar: the mean absolute difference of two score vectors.
pub fn mae<T: Scalar>(truth: &[T], est: &[T]) -> Result<T> {
    mae_bar(&[truth.to_vec()], &[est.to_vec()])
}

/// Average ranks, 1-based; tied values share the mean of their positions.
pub fn ranks<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![T::zero(); v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = T::of_usize(i + j + 2) / T::of(2.0);
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of the average ranks.
pub fn spearman<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::ShapeMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = T::of_usize(a.len());
    let ma = ra.iter().copied().sum::<T>() / n;
    let mb = rb.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in ra.iter().zip(&rb) {
        sab = sab + (x - ma) * (y - mb);
        saa = saa + (x - ma) * (x - ma);
        sbb = sbb + (y - mb) * (y - mb);
    }
    if saa == T::zero() || sbb == T::zero() {
        return Err(Error::ConstantVector);
    }
    Ok((sab / (saa * sbb).sqrt()).max(-T::one()).min(T::one()))
}

/// Sample mean and standard error (`sd / sqrt(n)`, sample sd with `n - 1`).
pub fn mean_stderr<T: Scalar>(v: &[T]) -> Option<(T, T)> {
    if v.is_empty() {
        return None;
    }
    let n = T::of_usize(v.len());
    // Shifted by the first value so constant inputs come back exactly.
    let m = v[0] + v.iter().map(|&x| x - v[0]).sum::<T>() / n;
    if v.len() < 2 {
        return Some((m, T::zero()));
    }
    let ss: T = v.iter().map(|&x| (x - m) * (x - m)).sum();
    let sd = (ss / (n - T::one())).sqrt();
    Some((m, sd / n.sqrt()))
}
