use super::{mean, variance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const K1: f64 = 79.047;
const K2: f64 = 7.4129;
/// E[log cosh G] for a standard Gaussian G.
const GAMMA: f64 = 0.37457;

/// Zero mean, unit (population) variance copy of `x`.
pub fn standardize<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.len() < 2 {
        return Err(Error::InsufficientSamples("standardizing needs at least 2 values".into()));
    }
    let m = mean(x);
    let sd = variance(x).sqrt();
    let scale = x.iter().fold(T::zero(), |a, &v| a.max(v.abs())).max(T::min_positive_value());
    if !(sd > scale * T::epsilon() * T::of(64.0)) {
        return Err(Error::DegenerateColumn("column has zero variance".into()));
    }
    Ok(x.iter().map(|&v| (v - m) / sd).collect())
}

/// Maximum-entropy negentropy approximation with the `log cosh` and
/// `u exp(-u^2/2)` contrast functions. Expects standardized input.
pub fn neg_entropy_approx<T: Scalar>(x: &[T]) -> Result<T> {
    if x.is_empty() {
        return Err(Error::InsufficientSamples("empty column".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateColumn("column is constant".into()));
    }
    let half = T::of(0.5);
    let a = mean(&x.iter().map(|&u| log_cosh(u)).collect::<Vec<_>>()) - T::of(GAMMA);
    let b = mean(&x.iter().map(|&u| u * (-half * u * u).exp()).collect::<Vec<_>>());
    Ok(T::of(K1) * a * a + T::of(K2) * b * b)
}

/// Differential entropy approximation: Gaussian entropy minus negentropy.
pub fn entropy_approx<T: Scalar>(x: &[T]) -> Result<T> {
    let gauss = T::of((1.0 + (2.0 * std::f64::consts::PI).ln()) / 2.0);
    Ok(gauss - neg_entropy_approx(x)?)
}

/// Overflow-free `ln cosh u`.
fn log_cosh<T: Scalar>(u: T) -> T {
    let a = u.abs();
    a + (-(a + a)).exp().ln_1p() - T::of(std::f64::consts::LN_2)
}
