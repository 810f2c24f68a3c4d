use crate::error::{Error, Result};

pub fn rss(observed: &[f64], fitted: &[f64]) -> f64 {
    observed.iter().zip(fitted).map(|(o, f)| (o - f).powi(2)).sum()
}

/// Total sum of squares about the mean.
pub fn tss(observed: &[f64]) -> f64 {
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    observed.iter().map(|o| (o - mean).powi(2)).sum()
}

/// Coefficient of determination `1 - RSS/TSS`.
pub fn r_squared(observed: &[f64], fitted: &[f64]) -> Result<f64> {
    if observed.len() != fitted.len() || observed.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "r_squared needs two equal-length series of at least 2 samples, got {} and {}",
            observed.len(),
            fitted.len()
        )));
    }
    let total = tss(observed);
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::UndefinedVariance);
    }
    Ok(1.0 - rss(observed, fitted) / total)
}

/// Incremental variance explained, `PV_k = R²(1..k) - R²(1..k-1)`.
///
/// `contributions[k]` is the k-th component sampled on the beat. The model
/// with the first `k` components uses the least-squares intercept for those
/// components, so `R²(1..0) = 0` and the sum telescopes to `R²(1..K)`.
pub fn pv_sequence(observed: &[f64], contributions: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = observed.len();
    let mut partial = vec![0.0; n];
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(contributions.len());
    for c in contributions {
        if c.len() != n {
            return Err(Error::InvalidArgument("component length differs from beat".into()));
        }
        for (p, v) in partial.iter_mut().zip(c) {
            *p += v;
        }
        let r2 = r_squared_with_free_intercept(observed, &partial)?;
        out.push(r2 - prev);
        prev = r2;
    }
    Ok(out)
}

/// R² of `observed ≈ m + shape` with `m` chosen by least squares.
pub fn r_squared_with_free_intercept(observed: &[f64], shape: &[f64]) -> Result<f64> {
    let n = observed.len() as f64;
    let m = observed.iter().zip(shape).map(|(o, s)| o - s).sum::<f64>() / n;
    let fitted: Vec<f64> = shape.iter().map(|s| s + m).collect();
    r_squared(observed, &fitted)
}
