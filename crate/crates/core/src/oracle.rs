//! Exact finite-size quantities: normalizers `C_n = Σ_{λ ⊢ n} c(λ)`, the
//! conditional law `P_n(λ) = c(λ)/C_n`, and `Q_z(Λ_n) = C_n z^n / F(z)`.
//!
//! `C_n` is the coefficient of `x^n` in `Π_ℓ F₀(x^ℓ)`; the table is built by
//! multiplying the truncated factors one part size at a time.

use std::collections::BTreeMap;
use std::io::Write;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use statrs::distribution::{Continuous, Normal};

use crate::calibrate::{cumulant_total, expected_total};
use crate::ensembles::EnsembleSpec;
use crate::error::{domain, Error, Result};
use crate::exact::{format_rational, gf_coeffs_exact, rational_to_f64};
use crate::partition::{enumerate_partitions, Partition};
use crate::sampler::occupation_cutoff;
use crate::special::CompensatedSum;

/// Largest `n` accepted by [`exact_conditional`].
pub const ENUMERATION_CAP: u64 = 30;

/// Negative values met while building a table.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PositivityIssues {
    /// `k` with `c_k < 0`.
    pub negative_coefficients: Vec<usize>,
    /// `n` with `C_n < 0`.
    pub negative_weights: Vec<usize>,
}

impl PositivityIssues {
    pub fn is_clean(&self) -> bool {
        self.negative_coefficients.is_empty() && self.negative_weights.is_empty()
    }
}

/// `C_0, …, C_{n_max}`, in floating point and optionally exact.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    pub n_max: usize,
    pub weights: Vec<f64>,
    pub exact: Option<Vec<BigRational>>,
    pub positivity: PositivityIssues,
}

/// Coefficients of `Π_{ℓ=1}^{len-1} F₀(x^ℓ)` given `c_k u^k`-style factor
/// coefficients `factor(ℓ)`.
fn product_table(len: usize, factor: impl Fn(usize) -> Vec<f64>) -> Vec<f64> {
    let mut cur = vec![0.0; len];
    if len == 0 {
        return cur;
    }
    cur[0] = 1.0;
    for ell in 1..len {
        let f = factor(ell);
        let mut next = vec![0.0; len];
        for (n, slot) in next.iter_mut().enumerate() {
            let mut acc = CompensatedSum::new();
            let mut k = 0usize;
            while k * ell <= n && k < f.len() {
                if f[k] != 0.0 {
                    acc.add(f[k] * cur[n - k * ell]);
                }
                k += 1;
            }
            *slot = acc.value();
        }
        cur = next;
    }
    cur
}

fn negatives(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x < 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Floating-point normalizer table `C_0..C_{n_max}`.
pub fn normalizer_table(spec: &EnsembleSpec, n_max: usize) -> Result<WeightTable> {
    let c = spec.gf_coeffs(n_max);
    let weights = product_table(n_max + 1, |_| c.clone());
    Ok(WeightTable {
        n_max,
        positivity: PositivityIssues {
            negative_coefficients: negatives(&c),
            negative_weights: negatives(&weights),
        },
        weights,
        exact: None,
    })
}

/// Exact normalizer table; parameters are read as decimal rationals.
pub fn normalizer_table_exact(spec: &EnsembleSpec, n_max: usize) -> Result<WeightTable> {
    let c = gf_coeffs_exact(spec, n_max)?;
    let len = n_max + 1;
    let mut cur = vec![BigRational::zero(); len];
    cur[0] = BigRational::from_integer(1.into());
    for ell in 1..len {
        let mut next = vec![BigRational::zero(); len];
        for (n, slot) in next.iter_mut().enumerate() {
            let mut k = 0usize;
            while k * ell <= n {
                if !c[k].is_zero() {
                    *slot += &c[k] * &cur[n - k * ell];
                }
                k += 1;
            }
        }
        cur = next;
    }
    let weights: Vec<f64> = cur.iter().map(rational_to_f64).collect();
    let positivity = PositivityIssues {
        negative_coefficients: c
            .iter()
            .enumerate()
            .filter(|(_, x)| x.is_negative())
            .map(|(i, _)| i)
            .collect(),
        negative_weights: cur
            .iter()
            .enumerate()
            .filter(|(_, x)| x.is_negative())
            .map(|(i, _)| i)
            .collect(),
    };
    Ok(WeightTable {
        n_max,
        weights,
        exact: Some(cur),
        positivity,
    })
}

impl WeightTable {
    /// CSV with header `n,C_n`; exact entries are written as `p/q`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "C_n"])?;
        for n in 0..=self.n_max {
            let value = match &self.exact {
                Some(ex) => format_rational(&ex[n]),
                None => format!("{:e}", self.weights[n]),
            };
            w.write_record([n.to_string(), value])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON-friendly view.
    pub fn to_json(&self) -> serde_json::Value {
        let exact = self
            .exact
            .as_ref()
            .map(|ex| ex.iter().map(format_rational).collect::<Vec<_>>());
        serde_json::json!({
            "n_max": self.n_max,
            "weights": self.weights,
            "exact": exact,
            "positivity": self.positivity,
        })
    }
}

/// `P_n(λ) = c(λ)/C_n` over all `λ ⊢ n`, by enumeration.
pub fn exact_conditional(spec: &EnsembleSpec, n: u64) -> Result<BTreeMap<Partition, f64>> {
    if n > ENUMERATION_CAP {
        return Err(Error::Size {
            what: "n for exact enumeration".into(),
            value: n,
            cap: ENUMERATION_CAP,
        });
    }
    let c = spec.gf_coeffs(n as usize);
    let parts = enumerate_partitions(n);
    let mut weights = Vec::with_capacity(parts.len());
    let mut total = CompensatedSum::new();
    for p in &parts {
        let w = p.weight(&c)?;
        total.add(w);
        weights.push(w);
    }
    let total = total.value();
    if !(total > 0.0) {
        return Err(domain(format!("C_{n} = {total} is not positive")));
    }
    Ok(parts
        .into_iter()
        .zip(weights)
        .map(|(p, w)| (p, w / total))
        .collect())
}

/// `ln F(z) = Σ_ℓ H₀(z^ℓ)`, truncated where the neglected terms sum below
/// `1e-14`.
pub fn log_partition_function(spec: &EnsembleSpec, z: f64) -> Result<f64> {
    let alpha = alpha_of(z)?;
    let cutoff = occupation_cutoff(spec, alpha, 1e-14)?;
    let mut acc = CompensatedSum::new();
    for ell in (1..=cutoff).rev() {
        acc.add(spec.h0_exp_neg(alpha * ell as f64));
    }
    Ok(acc.value())
}

fn alpha_of(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(domain(format!("z must lie in (0, 1), got {z}")));
    }
    Ok(-z.ln())
}

/// `Q_z(Λ_m)` for `m = 0..=n_max`, computed from `C_m z^m` directly so that
/// nothing overflows.
pub fn event_probabilities(spec: &EnsembleSpec, z: f64, n_max: usize) -> Result<Vec<f64>> {
    let alpha = alpha_of(z)?;
    let c = spec.gf_coeffs(n_max);
    let scaled = product_table(n_max + 1, |ell| {
        let u = (-alpha * ell as f64).exp();
        let mut uk = 1.0;
        let mut f = Vec::with_capacity(n_max / ell + 1);
        for ck in c.iter().take(n_max / ell + 1) {
            f.push(ck * uk);
            uk *= u;
        }
        f
    });
    let log_f = log_partition_function(spec, z)?;
    Ok(scaled.iter().map(|d| d * (-log_f).exp()).collect())
}

/// `Q_z(Λ_n) = C_n z^n / F(z)`.
pub fn exact_event_prob(spec: &EnsembleSpec, z: f64, n: usize, n_max: usize) -> Result<f64> {
    if n > n_max {
        return Err(domain(format!("n = {n} exceeds table size {n_max}")));
    }
    Ok(event_probabilities(spec, z, n_max)?[n])
}

/// `Q_z(λ) = c(λ) z^{N_λ} / F(z)`.
pub fn grand_probability(spec: &EnsembleSpec, z: f64, lambda: &Partition) -> Result<f64> {
    let alpha = alpha_of(z)?;
    let max_mult = lambda.counts().values().copied().max().unwrap_or(0);
    let c = spec.gf_coeffs(max_mult as usize);
    let w = lambda.weight(&c)?;
    let log_f = log_partition_function(spec, z)?;
    Ok(w * (-(alpha * lambda.total() as f64) - log_f).exp())
}

/// Distance between `Q_z{N_λ = m}` and the normal density with the exact
/// mean and variance of `N_λ`, over `m ∈ [μ - 3σ, μ + 3σ]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalResidual {
    pub mu: f64,
    pub sigma: f64,
    pub max_residual: f64,
    pub window_lo: usize,
    pub window_hi: usize,
}

pub fn normal_residual(spec: &EnsembleSpec, z: f64) -> Result<NormalResidual> {
    let mu = expected_total(spec, z, 1e-9)?;
    let sigma = cumulant_total(spec, z, 2, 1e-9)?.sqrt();
    let lo = (mu - 3.0 * sigma).ceil().max(0.0) as usize;
    let hi = (mu + 3.0 * sigma).floor() as usize;
    let probs = event_probabilities(spec, z, hi)?;
    let normal = Normal::new(mu, sigma).map_err(|e| Error::Numerical(e.to_string()))?;
    let max_residual = (lo..=hi)
        .map(|m| (probs[m] - normal.pdf(m as f64)).abs())
        .fold(0.0, f64::max);
    Ok(NormalResidual {
        mu,
        sigma,
        max_residual,
        window_lo: lo,
        window_hi: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::calibrate;

    #[test]
    fn partition_numbers() {
        let g = EnsembleSpec::geom_power(1.0, 1.0).unwrap();
        let t = normalizer_table(&g, 10).unwrap();
        let expect = [1., 1., 2., 3., 5., 7., 11., 15., 22., 30., 42.];
        assert_eq!(t.weights, expect);
        assert!(t.positivity.is_clean());
    }

    #[test]
    fn strict_partition_numbers() {
        let b = EnsembleSpec::binomial(1, 1.0).unwrap();
        let t = normalizer_table_exact(&b, 6).unwrap();
        assert_eq!(t.weights, vec![1., 1., 1., 2., 2., 3., 4.]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,C_n\n0,1\n1,1\n"));
    }

    #[test]
    fn exact_csv_uses_fractions() {
        let g = EnsembleSpec::geom_power(1.0, 0.5).unwrap();
        let t = normalizer_table_exact(&g, 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        // C_2 = ρ + ρ² = 3/4
        assert!(String::from_utf8(buf).unwrap().contains("2,3/4\n"));
    }

    #[test]
    fn conditional_examples() {
        let g = EnsembleSpec::geom_power(1.0, 1.0).unwrap();
        let law = exact_conditional(&g, 5).unwrap();
        assert_eq!(law.len(), 7);
        assert!(law.values().all(|&p| (p - 1.0 / 7.0).abs() < 1e-15));
        let h = EnsembleSpec::geom_power(1.0, 0.5).unwrap();
        let law = exact_conditional(&h, 2).unwrap();
        let two = Partition::from_parts(&[2]).unwrap();
        let ones = Partition::from_parts(&[1, 1]).unwrap();
        assert!((law[&two] - 2.0 / 3.0).abs() < 1e-15);
        assert!((law[&ones] - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(exact_conditional(&g, 31), Err(Error::Size { .. })));
    }

    #[test]
    fn event_probabilities_sum_below_one() {
        let g = EnsembleSpec::geom_power(1.0, 1.0).unwrap();
        let cal = calibrate(&g, 50, 1e-10).unwrap();
        let p = event_probabilities(&g, cal.z, 600).unwrap();
        let s: f64 = p.iter().sum();
        assert!(s <= 1.0 + 1e-12 && s > 1.0 - 1e-9);
        let q = event_probabilities(&g, cal.z, 100).unwrap();
        assert!(q.iter().sum::<f64>() < s);
    }

    #[test]
    fn log_partition_matches_product() {
        let g = EnsembleSpec::geom_power(1.0, 1.0).unwrap();
        let z: f64 = 0.5;
        // ln Π (1 - z^ℓ)^{-1}
        let direct: f64 = (1..200).map(|l| -(-z.powi(l)).ln_1p()).sum();
        assert!((log_partition_function(&g, z).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn single_part_event() {
        let g = EnsembleSpec::exp_rational(1.0, 0.3).unwrap();
        let z = 0.4;
        let f = log_partition_function(&g, z).unwrap().exp();
        let p1 = exact_event_prob(&g, z, 1, 5).unwrap();
        assert!((p1 - g.gf_coeff(1).unwrap() * z / f).abs() < 1e-15);
    }
}
