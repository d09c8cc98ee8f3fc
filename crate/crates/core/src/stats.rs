//! Small goodness-of-fit helpers: total variation, chi-square tests and
//! binomial standard errors.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Error, Result};

/// Outcome of a chi-square test.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn p_value(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Total variation distance between empirical counts and a probability vector.
pub fn tv_distance(counts: &[u64], probs: &[f64]) -> Result<f64> {
    if counts.len() != probs.len() {
        return Err(domain("counts and probabilities differ in length"));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(domain("no observations"));
    }
    let t = total as f64;
    Ok(0.5
        * counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| (c as f64 / t - p).abs())
            .sum::<f64>())
}

/// Pearson goodness-of-fit against `probs`; cells with expected count below
/// 5 are pooled into one.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if counts.len() != probs.len() {
        return Err(domain("counts and probabilities differ in length"));
    }
    let total = counts.iter().sum::<u64>() as f64;
    if total == 0.0 {
        return Err(domain("no observations"));
    }
    let mut cells = Vec::new();
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total;
        if e < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += e;
        } else {
            cells.push((c as f64, e));
        }
    }
    if pooled_exp > 0.0 {
        cells.push((pooled_obs, pooled_exp));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: p_value(statistic, dof)?,
    })
}

/// Two-sample chi-square test of homogeneity; cells empty in both samples
/// are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquare> {
    if a.len() != b.len() {
        return Err(domain("samples have different numbers of cells"));
    }
    let na = a.iter().sum::<u64>() as f64;
    let nb = b.iter().sum::<u64>() as f64;
    if na == 0.0 || nb == 0.0 {
        return Err(domain("both samples need observations"));
    }
    let n = na + nb;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        let ea = na * col / n;
        let eb = nb * col / n;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = cells.saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: p_value(statistic, dof)?,
    })
}

/// Standard error of a frequency estimate of `p` from `trials` draws.
pub fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Median of a non-empty slice (NaNs are ordered last).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// `true` when each entry is at most the previous one.
pub fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}
