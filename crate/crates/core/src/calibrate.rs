//! Calibration `z = e^{-α}`, `α = γ/√n`, `γ² = A(1)`, and exact series for
//! cumulants of the total weight `N_λ` and of the profile `Y_λ(x)` under the
//! grand ensemble.
//!
//! With `α = -ln z`:
//!
//! - `κ_q[N_λ] = Σ_k k^q a_k S_{q+1}(kα)`,
//! - `κ_q[Y_λ(x)] = Σ_k k^q a_k z^{k L} / (1 - z^k)` with `L = max(⌈x⌉, 1)`.
//!
//! All `tol` arguments bound the truncation error of the series absolutely.

use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpec, Envelope, Family};
use crate::error::{domain, Error, Result};
use crate::special::{dilog, gamma_integral, poly_geom_tail, sq_eval_unchecked, sq_table, CompensatedSum};

/// Largest series index attempted before giving up.
const MAX_TERMS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub n: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub z: f64,
}

impl Calibration {
    pub fn from_gamma(n: u64, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("calibration requires n >= 1"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(domain(format!("gamma must be positive, got {gamma}")));
        }
        let alpha = gamma / (n as f64).sqrt();
        Ok(Calibration {
            n,
            gamma,
            alpha,
            z: (-alpha).exp(),
        })
    }
}

/// `γ²` with the two independent evaluations behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSquared {
    pub value: f64,
    pub integral: f64,
    pub integral_error: f64,
    pub series: f64,
    pub series_bound: f64,
}

/// Closed-form `γ²` where the family has one.
pub fn closed_form_gamma_squared(spec: &EnsembleSpec) -> Option<f64> {
    match *spec.family() {
        Family::GeomPower { r, rho } => Some(r * dilog(rho).ok()?),
        Family::Binomial { m, rho } => Some(-(m as f64) * dilog(-rho).ok()?),
        Family::ExpRational { b, rho } => {
            if rho == 0.0 {
                Some(b)
            } else if rho < 1.0 {
                Some(-b * (-rho).ln_1p() / rho)
            } else {
                None
            }
        }
        Family::ExpPower { r, rho } => {
            if rho < 1.0 {
                Some(-((1.0 - r) * (-rho).ln_1p()).exp_m1() / (rho * (1.0 - r)))
            } else if r < 1.0 {
                Some(1.0 / (1.0 - r))
            } else {
                None
            }
        }
        Family::ExpPolynomial { m, rho } => {
            if rho == 0.0 {
                Some(1.0)
            } else {
                Some((m as f64 * rho.ln_1p()).exp_m1() / (rho * m as f64))
            }
        }
        Family::LogRatio { .. } | Family::Raw { .. } => None,
    }
}

/// `γ² = A(1)` by quadrature, cross-checked against the Dirichlet series.
pub fn gamma_squared(spec: &EnsembleSpec, tol: f64) -> Result<GammaSquared> {
    let quad = gamma_integral(spec, tol.min(1e-11))?;
    let series = match spec.dirichlet_a(1.0, tol) {
        Ok(s) => s,
        Err(Error::Numerical(_)) => spec.dirichlet_partial(1.0, 4096)?,
        Err(e) => return Err(e),
    };
    let slack = series.tail_bound + quad.error + tol;
    if (quad.value - series.value).abs() > slack {
        return Err(Error::Numerical(format!(
            "A(1) for {}: quadrature {} and series {} disagree beyond {slack}",
            spec.descriptor(),
            quad.value,
            series.value
        )));
    }
    let value = if series.tail_bound < quad.error {
        series.value
    } else {
        quad.value
    };
    Ok(GammaSquared {
        value,
        integral: quad.value,
        integral_error: quad.error,
        series: series.value,
        series_bound: series.tail_bound,
    })
}

/// Calibration for target size `n`.
pub fn calibrate(spec: &EnsembleSpec, n: u64, tol: f64) -> Result<Calibration> {
    if n == 0 {
        return Err(domain("calibration requires n >= 1"));
    }
    let g2 = gamma_squared(spec, tol)?;
    if !(g2.value > 0.0) {
        return Err(Error::Numerical(format!(
            "A(1) = {} is not positive for {}",
            g2.value,
            spec.descriptor()
        )));
    }
    Calibration::from_gamma(n, g2.value.sqrt())
}

fn alpha_of(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(domain(format!("z must lie in (0, 1), got {z}")));
    }
    Ok(-z.ln())
}

/// `a_k` on demand, grown by doubling.
struct CoeffCache<'a> {
    spec: &'a EnsembleSpec,
    a: Vec<f64>,
}

impl<'a> CoeffCache<'a> {
    fn new(spec: &'a EnsembleSpec) -> Self {
        CoeffCache {
            spec,
            a: spec.log_coeffs(256),
        }
    }

    fn ensure(&mut self, k: usize) {
        if k >= self.a.len() {
            let mut len = self.a.len();
            while len <= k {
                len *= 2;
            }
            self.a = self.spec.log_coeffs(len);
        }
    }

    fn get(&mut self, k: usize) -> f64 {
        self.ensure(k);
        self.a[k]
    }
}

/// Sums `Σ_k a_k · kernel(k)` in blocks until `tail(K) ≤ tol`.
fn k_series(
    spec: &EnsembleSpec,
    tol: f64,
    kernel: impl Fn(usize) -> f64,
    tail: impl Fn(f64, f64, f64, u64) -> f64,
) -> Result<f64> {
    let mut cache = CoeffCache::new(spec);
    let env = spec.envelope();
    let mut sum = CompensatedSum::new();
    let mut k = 1usize;
    let mut block_end = 64usize;
    loop {
        let end = match env {
            Envelope::Finite(deg) => deg,
            _ => block_end,
        };
        cache.ensure(end);
        while k <= end {
            let a = cache.get(k);
            if a != 0.0 {
                sum.add(a * kernel(k));
            }
            k += 1;
        }
        let bound = match env {
            Envelope::Finite(_) => 0.0,
            Envelope::Power {
                scale,
                power,
                ratio,
            } => tail(scale, power, ratio, end as u64),
        };
        if bound <= tol {
            return Ok(sum.value());
        }
        if end >= MAX_TERMS {
            return Err(Error::Numerical(format!(
                "series for {} not converged after {end} terms (tail bound {bound})",
                spec.descriptor()
            )));
        }
        block_end = end * 2;
    }
}

/// `E_z[N_λ] = Σ_k k a_k S_2(kα)`.
pub fn expected_total(spec: &EnsembleSpec, z: f64, tol: f64) -> Result<f64> {
    cumulant_total(spec, z, 1, tol)
}

/// `κ_q[N_λ] = Σ_k k^q a_k S_{q+1}(kα)`; `q = 2` is the variance.
pub fn cumulant_total(spec: &EnsembleSpec, z: f64, q: usize, tol: f64) -> Result<f64> {
    let alpha = alpha_of(z)?;
    cumulant_total_alpha(spec, alpha, q, tol)
}

pub(crate) fn cumulant_total_alpha(spec: &EnsembleSpec, alpha: f64, q: usize, tol: f64) -> Result<f64> {
    if q == 0 {
        return Err(domain("cumulant order must be >= 1"));
    }
    let table = sq_table(q + 1)?;
    let csum = table.sum();
    k_series(
        spec,
        tol,
        |k| {
            let kf = k as f64;
            kf.powi(q as i32) * sq_eval_unchecked(&table, kf * alpha)
        },
        |scale, power, ratio, kk| {
            // S_{q+1}(t) ≤ (Σ_j c_j) e^{-t} / (1 - e^{-t0})^{q+1} for t ≥ t0
            let t0 = (kk + 1) as f64 * alpha;
            let denom = (-(-t0).exp_m1()).powi(q as i32 + 1);
            poly_geom_tail(scale * csum / denom, power + q as f64, ratio * (-alpha).exp(), kk)
        },
    )
}

/// `κ_q[Y_λ(x)] = Σ_{ℓ ≥ x} Σ_k k^q a_k z^{kℓ}` with `ℓ ≥ 1`.
pub fn profile_cumulant(spec: &EnsembleSpec, z: f64, q: usize, x_cells: f64, tol: f64) -> Result<f64> {
    let alpha = alpha_of(z)?;
    profile_cumulant_alpha(spec, alpha, q, x_cells, tol)
}

pub(crate) fn profile_cumulant_alpha(
    spec: &EnsembleSpec,
    alpha: f64,
    q: usize,
    x_cells: f64,
    tol: f64,
) -> Result<f64> {
    if q == 0 {
        return Err(domain("cumulant order must be >= 1"));
    }
    if !(x_cells >= 0.0) || !x_cells.is_finite() {
        return Err(domain(format!("x must be a nonnegative real, got {x_cells}")));
    }
    let start = x_cells.ceil().max(1.0);
    k_series(
        spec,
        tol,
        |k| {
            let kf = k as f64;
            kf.powi(q as i32) * (-kf * alpha * start).exp() / -(-kf * alpha).exp_m1()
        },
        |scale, power, ratio, kk| {
            let denom = -(-((kk + 1) as f64) * alpha).exp_m1();
            poly_geom_tail(scale / denom, power + q as f64, ratio * (-alpha * start).exp(), kk)
        },
    )
}

/// Bounds on the Lyapunov ratio `L_z = Σ_ℓ E|ℓ(ν_ℓ - Eν_ℓ)|³ / σ³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovBounds {
    pub lower: f64,
    pub upper: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub cross_sum: f64,
}

/// `lower = κ_3/σ³`, `upper = (κ_3 + 2 Σ_{k,m} k|a_k| m²|a_m| S_4((k+m)α))/σ³`.
///
/// The double sum is evaluated as `Σ_ℓ ℓ³ f_1(z^ℓ) f_2(z^ℓ)` with
/// `f_i(w) = Σ_k k^i |a_k| w^k`.
pub fn lyapunov_bounds(spec: &EnsembleSpec, z: f64, tol: f64) -> Result<LyapunovBounds> {
    let alpha = alpha_of(z)?;
    let threshold = spec.sigma_threshold();
    if threshold >= 0.5 {
        return Err(Error::Divergence {
            what: format!("A+(1/2) for {}", spec.descriptor()),
            threshold,
            sigma: 0.5,
        });
    }
    let kappa2 = cumulant_total_alpha(spec, alpha, 2, tol)?;
    let kappa3 = cumulant_total_alpha(spec, alpha, 3, tol)?;
    let cross_sum = cross_sum(spec, alpha, tol)?;
    let sigma3 = kappa2.powf(1.5);
    Ok(LyapunovBounds {
        lower: kappa3 / sigma3,
        upper: (kappa3 + 2.0 * cross_sum) / sigma3,
        kappa2,
        kappa3,
        cross_sum,
    })
}

fn cross_sum(spec: &EnsembleSpec, alpha: f64, tol: f64) -> Result<f64> {
    let env = spec.envelope();
    let mut cache = CoeffCache::new(spec);
    let z = (-alpha).exp();
    // f_1(w), f_2(w) to relative accuracy ~1e-16
    let mut inner = |w: f64| -> (f64, f64) {
        let mut f1 = CompensatedSum::new();
        let mut f2 = CompensatedSum::new();
        let mut k = 1usize;
        let mut wk = 1.0;
        loop {
            wk *= w;
            let a = cache.get(k).abs();
            let kf = k as f64;
            f1.add(kf * a * wk);
            f2.add(kf * kf * a * wk);
            let done = match env {
                Envelope::Finite(deg) => k >= deg,
                Envelope::Power {
                    scale,
                    power,
                    ratio,
                } => {
                    k % 16 == 0
                        && poly_geom_tail(scale, power + 2.0, ratio * w, k as u64)
                            <= 1e-17 * f2.value()
                }
            };
            if done || wk == 0.0 || k >= MAX_TERMS {
                return (f1.value(), f2.value());
            }
            k += 1;
        }
    };
    let mut total = CompensatedSum::new();
    let mut l = 1u64;
    loop {
        let w = (-alpha * l as f64).exp();
        let (f1, f2) = inner(w);
        let lf = l as f64;
        total.add(lf * lf * lf * f1 * f2);
        if l % 16 == 0 {
            // f_1 f_2 / w² is nondecreasing in w
            let g = f1 * f2 / (w * w);
            let bound = g * poly_geom_tail(1.0, 3.0, z * z, l);
            if bound <= tol || f1 * f2 == 0.0 {
                return Ok(total.value());
            }
        }
        if l as usize >= MAX_TERMS {
            return Err(Error::Numerical("cross sum did not converge".into()));
        }
        l += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::sq_eval;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn calibration_examples() {
        let g = EnsembleSpec::geom_power(1.0, 1.0).unwrap();
        let c = calibrate(&g, 1_000_000, 1e-12).unwrap();
        assert!((c.gamma - PI / 6f64.sqrt()).abs() < 1e-10);
        assert!((c.alpha - c.gamma / 1000.0).abs() < 1e-16);
        let b = EnsembleSpec::binomial(1, 1.0).unwrap();
        let c = calibrate(&b, 144, 1e-12).unwrap();
        assert!((c.gamma - PI / 12f64.sqrt()).abs() < 1e-10);
        assert_eq!(c.alpha, c.gamma / 12.0);
        assert_eq!(c.z, (-c.alpha).exp());
        let l = EnsembleSpec::log_ratio(1.0, 0.5).unwrap();
        let c = calibrate(&l, 10_000, 1e-12).unwrap();
        assert!((c.gamma - 0.532202).abs() < 5e-6);
    }

    #[test]
    fn divergent_calibration() {
        let e = EnsembleSpec::exp_rational(1.0, 1.0).unwrap();
        assert!(matches!(calibrate(&e, 100, 1e-10), Err(Error::Divergence { .. })));
        let p = EnsembleSpec::exp_power(1.5, 1.0).unwrap();
        assert!(matches!(calibrate(&p, 100, 1e-10), Err(Error::Divergence { .. })));
        assert!(calibrate(&EnsembleSpec::geom_power(1.0, 1.0).unwrap(), 0, 1e-10).is_err());
    }

    #[test]
    fn single_term_family() {
        let e = EnsembleSpec::exp_rational(1.0, 0.0).unwrap();
        assert!((expected_total(&e, 0.5, 1e-14).unwrap() - 2.0).abs() < 1e-14);
        assert!((profile_cumulant(&e, 0.5, 1, 0.0, 1e-14).unwrap() - 1.0).abs() < 1e-15);
        let z: f64 = 0.9;
        let a = -z.ln();
        let lb = lyapunov_bounds(&e, z, 1e-14).unwrap();
        let expect = sq_eval(4, a).unwrap() / sq_eval(3, a).unwrap().powf(1.5);
        assert!(rel(lb.lower, expect) < 1e-13);
        assert!(lb.upper >= lb.lower);
    }

    #[test]
    fn small_z_limit() {
        let g = EnsembleSpec::geom_power(2.0, 0.5).unwrap();
        let z = 1e-8;
        let e = expected_total(&g, z, 1e-30).unwrap();
        assert!(rel(e, 1.0 * z) < 1e-6);
    }

    #[test]
    fn first_cumulant_is_mean() {
        let g = EnsembleSpec::binomial(2, 0.7).unwrap();
        let a = expected_total(&g, 0.95, 1e-12).unwrap();
        let b = cumulant_total(&g, 0.95, 1, 1e-12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_matches_direct_double_sum() {
        let g = EnsembleSpec::geom_power(1.5, 0.8).unwrap();
        let z: f64 = 0.9;
        for q in 1..=3 {
            for &x in &[0.0, 1.0, 2.5, 7.0] {
                let mut direct = 0.0;
                for l in (x as u64).max(1)..4000 {
                    if (l as f64) < x {
                        continue;
                    }
                    for k in 1..400 {
                        let a = g.log_coeff(k).unwrap();
                        direct += (k as f64).powi(q) * a * z.powf((k as u64 * l) as f64);
                    }
                }
                let v = profile_cumulant(&g, z, q as usize, x, 1e-14).unwrap();
                assert!(rel(v, direct) < 1e-11, "q={q} x={x}: {v} vs {direct}");
            }
        }
    }

    #[test]
    fn lyapunov_cross_sum_matches_double_sum() {
        let g = EnsembleSpec::binomial(2, 0.6).unwrap();
        let z: f64 = 0.8;
        let a = -z.ln();
        let mut direct = 0.0;
        for k in 1..200 {
            for m in 1..200 {
                let ak = g.log_coeff(k).unwrap().abs();
                let am = g.log_coeff(m).unwrap().abs();
                direct += k as f64 * ak * (m * m) as f64 * am * sq_eval(4, (k + m) as f64 * a).unwrap();
            }
        }
        let lb = lyapunov_bounds(&g, z, 1e-14).unwrap();
        assert!(rel(lb.cross_sum, direct) < 1e-11);
    }

    #[test]
    fn expected_total_increasing_in_z() {
        let g = EnsembleSpec::log_ratio(1.0, 0.5).unwrap();
        let mut prev = 0.0;
        for i in 1..20 {
            let z = i as f64 / 20.0;
            let e = expected_total(&g, z, 1e-13).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }
}
