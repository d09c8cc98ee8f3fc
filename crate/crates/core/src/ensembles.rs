//! Generating-function families for equiweighted multiplicative ensembles.
//!
//! Each family fixes `F₀(u) = Σ c_k u^k` with `c_0 = 1` and its logarithm
//! `H₀(u) = ln F₀(u) = Σ a_k u^k`:
//!
//! | family            | `F₀(u)`                      | `a_k`                               |
//! |-------------------|------------------------------|-------------------------------------|
//! | `geom-power`      | `(1 - ρu)^{-r}`              | `r ρ^k / k`                         |
//! | `binomial`        | `(1 + ρu)^m`                 | `(-1)^{k-1} m ρ^k / k`              |
//! | `exp-rational`    | `exp(bu / (1 - ρu))`         | `b ρ^{k-1}`                         |
//! | `exp-power`       | `exp(u / (1 - ρu)^r)`        | `C(r+k-2, k-1) ρ^{k-1}`             |
//! | `exp-polynomial`  | `exp(u (1 + ρu)^{m-1})`      | `C(m-1, k-1) ρ^{k-1}`, zero for `k > m` |
//! | `log-ratio`       | `(-ln(1 - ρu) / (ρu))^r`     | `r ρ^k ã_k / k`                     |
//!
//! where `ã_k` solves `k/(k+1) = Σ_{i<k} ã_{i+1}/(k-i)`. A `raw` variant
//! takes a finite list of log-coefficients directly.

use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::special::{alternating_power_tail, poly_geom_tail, power_tail, CompensatedSum};

pub const DEFAULT_CUTOFF_K: usize = 512;

/// Closest approach to the branch point `ρu = 1` allowed for `log-ratio`.
const LOG_RATIO_EDGE: f64 = 1e-9;

/// Below this `|ρu|` the `log-ratio` closed form is replaced by its series.
const LOG_RATIO_SERIES_RADIUS: f64 = 0.05;
const LOG_RATIO_SERIES_TERMS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum Family {
    GeomPower { r: f64, rho: f64 },
    Binomial { m: u32, rho: f64 },
    ExpRational { b: f64, rho: f64 },
    ExpPower { r: f64, rho: f64 },
    ExpPolynomial { m: u32, rho: f64 },
    LogRatio { r: f64, rho: f64 },
    /// `H₀(u) = Σ_{k=1}^{K} a_k u^k` with `log_coeffs[k-1] = a_k`.
    Raw { log_coeffs: Vec<f64> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::GeomPower { .. } => "geom-power",
            Family::Binomial { .. } => "binomial",
            Family::ExpRational { .. } => "exp-rational",
            Family::ExpPower { .. } => "exp-power",
            Family::ExpPolynomial { .. } => "exp-polynomial",
            Family::LogRatio { .. } => "log-ratio",
            Family::Raw { .. } => "raw",
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match *self {
            Family::GeomPower { rho, .. }
            | Family::Binomial { rho, .. }
            | Family::ExpRational { rho, .. }
            | Family::ExpPower { rho, .. }
            | Family::ExpPolynomial { rho, .. }
            | Family::LogRatio { rho, .. } => Some(rho),
            Family::Raw { .. } => None,
        }
    }
}

/// An immutable, validated ensemble description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct EnsembleSpec {
    family: Family,
    cutoff_k: usize,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    #[serde(flatten)]
    family: Family,
    #[serde(default = "default_cutoff")]
    cutoff_k: usize,
}

fn default_cutoff() -> usize {
    DEFAULT_CUTOFF_K
}

impl TryFrom<SpecRepr> for EnsembleSpec {
    type Error = Error;
    fn try_from(repr: SpecRepr) -> Result<Self> {
        EnsembleSpec::new(repr.family)?.with_cutoff(repr.cutoff_k)
    }
}

impl From<EnsembleSpec> for SpecRepr {
    fn from(spec: EnsembleSpec) -> Self {
        SpecRepr {
            family: spec.family,
            cutoff_k: spec.cutoff_k,
        }
    }
}

fn check_unit(name: &str, rho: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        (0.0..=1.0).contains(&rho)
    } else {
        rho > 0.0 && rho <= 1.0
    };
    if ok {
        Ok(())
    } else if allow_zero {
        Err(domain(format!("{name}: rho must lie in [0, 1], got {rho}")))
    } else {
        Err(domain(format!("{name}: rho must lie in (0, 1], got {rho}")))
    }
}

fn check_positive(name: &str, what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name}: {what} must be a positive real, got {v}")))
    }
}

/// Tail envelope `|a_k| ≤ scale · k^power · ratio^k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Envelope {
    /// `a_k = 0` for `k` beyond the given degree.
    Finite(usize),
    Power { scale: f64, power: f64, ratio: f64 },
}

/// Partial Dirichlet sum with a certified bound on the omitted tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletSum {
    pub value: f64,
    pub abs_value: f64,
    /// Bound on `|A(s) - value|` and on `|A⁺(s) - abs_value|`.
    pub tail_bound: f64,
    pub terms: usize,
}

/// Grid estimate of the constant in `H₀(θ) - Re H₀(θe^{it}) ≥ δ θ (1 - cos t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityReport {
    pub delta_star_estimate: f64,
    pub holds: bool,
    /// `a_1` when every `a_k ≥ 0` and `a_1 > 0`.
    pub analytic_bound: Option<f64>,
    pub points: usize,
    pub skipped: usize,
}

impl EnsembleSpec {
    pub fn new(family: Family) -> Result<Self> {
        let spec = EnsembleSpec {
            family,
            cutoff_k: DEFAULT_CUTOFF_K,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_cutoff(mut self, cutoff_k: usize) -> Result<Self> {
        if cutoff_k == 0 {
            return Err(domain("cutoff_k must be positive"));
        }
        self.cutoff_k = cutoff_k;
        Ok(self)
    }

    pub fn geom_power(r: f64, rho: f64) -> Result<Self> {
        Self::new(Family::GeomPower { r, rho })
    }
    pub fn binomial(m: u32, rho: f64) -> Result<Self> {
        Self::new(Family::Binomial { m, rho })
    }
    pub fn exp_rational(b: f64, rho: f64) -> Result<Self> {
        Self::new(Family::ExpRational { b, rho })
    }
    pub fn exp_power(r: f64, rho: f64) -> Result<Self> {
        Self::new(Family::ExpPower { r, rho })
    }
    pub fn exp_polynomial(m: u32, rho: f64) -> Result<Self> {
        Self::new(Family::ExpPolynomial { m, rho })
    }
    pub fn log_ratio(r: f64, rho: f64) -> Result<Self> {
        Self::new(Family::LogRatio { r, rho })
    }
    pub fn raw(log_coeffs: Vec<f64>) -> Result<Self> {
        Self::new(Family::Raw { log_coeffs })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn cutoff_k(&self) -> usize {
        self.cutoff_k
    }

    /// Short human-readable description, e.g. `geom-power(r=1, rho=1)`.
    pub fn descriptor(&self) -> String {
        match &self.family {
            Family::GeomPower { r, rho } => format!("geom-power(r={r}, rho={rho})"),
            Family::Binomial { m, rho } => format!("binomial(m={m}, rho={rho})"),
            Family::ExpRational { b, rho } => format!("exp-rational(b={b}, rho={rho})"),
            Family::ExpPower { r, rho } => format!("exp-power(r={r}, rho={rho})"),
            Family::ExpPolynomial { m, rho } => format!("exp-polynomial(m={m}, rho={rho})"),
            Family::LogRatio { r, rho } => format!("log-ratio(r={r}, rho={rho})"),
            Family::Raw { log_coeffs } => format!("raw(degree={})", log_coeffs.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        let name = self.family.name();
        match self.family {
            Family::GeomPower { r, rho } | Family::LogRatio { r, rho } => {
                check_positive(name, "r", r)?;
                check_unit(name, rho, false)
            }
            Family::Binomial { m, rho } => {
                if m == 0 {
                    return Err(domain("binomial: m must be a positive integer"));
                }
                check_unit(name, rho, false)
            }
            Family::ExpRational { b, rho } => {
                check_positive(name, "b", b)?;
                check_unit(name, rho, true)
            }
            Family::ExpPower { r, rho } => {
                check_positive(name, "r", r)?;
                if r == 1.0 {
                    return Err(domain(
                        "exp-power: r = 1 is excluded; use exp-rational with b = 1",
                    ));
                }
                check_unit(name, rho, false)
            }
            Family::ExpPolynomial { m, rho } => {
                if m == 0 {
                    return Err(domain("exp-polynomial: m must be a positive integer"));
                }
                check_unit(name, rho, true)
            }
            Family::Raw { ref log_coeffs } => {
                if log_coeffs.iter().any(|a| !a.is_finite()) {
                    return Err(domain("raw: coefficients must be finite"));
                }
                match log_coeffs.iter().find(|&&a| a != 0.0) {
                    None => Err(domain("raw: at least one coefficient must be nonzero")),
                    Some(&a) if a < 0.0 => Err(domain(
                        "raw: the first nonzero coefficient must be positive",
                    )),
                    Some(_) => Ok(()),
                }
            }
        }
    }

    /// Radius of the disc on which `h0_eval` is defined (`∞` if entire).
    pub fn radius(&self) -> f64 {
        match self.family {
            Family::GeomPower { rho, .. }
            | Family::ExpPower { rho, .. }
            | Family::LogRatio { rho, .. } => 1.0 / rho,
            Family::ExpRational { rho, .. } if rho > 0.0 => 1.0 / rho,
            _ => f64::INFINITY,
        }
    }

    /// Radius of convergence of `Σ a_k u^k`.
    pub fn series_radius(&self) -> f64 {
        match self.family {
            Family::Binomial { rho, .. } => 1.0 / rho,
            _ => self.radius(),
        }
    }

    /// `A⁺(σ) < ∞` exactly when `σ` exceeds this value.
    pub fn sigma_threshold(&self) -> f64 {
        match self.family {
            Family::ExpRational { rho, .. } if rho == 1.0 => 1.0,
            Family::ExpPower { r, rho } if rho == 1.0 => r,
            _ => 0.0,
        }
    }

    /// Whether every `a_k` is nonnegative.
    pub fn nonnegative_log_coeffs(&self) -> bool {
        match &self.family {
            Family::Binomial { .. } => false,
            Family::Raw { log_coeffs } => log_coeffs.iter().all(|&a| a >= 0.0),
            _ => true,
        }
    }

    /// Whether `H₀(u) → ∞` as `u → 1⁻`.
    pub fn h0_unbounded_at_one(&self) -> bool {
        match self.family {
            Family::GeomPower { rho, .. }
            | Family::ExpRational { rho, .. }
            | Family::ExpPower { rho, .. }
            | Family::LogRatio { rho, .. } => rho == 1.0,
            _ => false,
        }
    }

    pub(crate) fn envelope(&self) -> Envelope {
        match self.family {
            Family::GeomPower { r, rho } | Family::LogRatio { r, rho } => Envelope::Power {
                scale: r,
                power: -1.0,
                ratio: rho,
            },
            Family::Binomial { m, rho } => Envelope::Power {
                scale: m as f64,
                power: -1.0,
                ratio: rho,
            },
            Family::ExpRational { rho, .. } if rho == 0.0 => Envelope::Finite(1),
            Family::ExpRational { b, rho } => Envelope::Power {
                scale: b / rho,
                power: 0.0,
                ratio: rho,
            },
            Family::ExpPower { r, rho } => {
                let a = r - 1.0;
                let g = ln_gamma(r).exp();
                let scale = if a < 0.0 {
                    (2f64.powf(-a) / g).max(1.0)
                } else if a <= 1.0 {
                    1.0 / g
                } else {
                    (1.0 + a.floor()).powf(a) / g
                };
                Envelope::Power {
                    scale: scale / rho,
                    power: a,
                    ratio: rho,
                }
            }
            Family::ExpPolynomial { m, rho } => {
                Envelope::Finite(if rho == 0.0 { 1 } else { m as usize })
            }
            Family::Raw { ref log_coeffs } => Envelope::Finite(log_coeffs.len()),
        }
    }

    /// `a_k` for `k ≥ 1`.
    pub fn log_coeff(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(domain("log_coeff requires k >= 1"));
        }
        Ok(match self.family {
            Family::GeomPower { r, rho } => r * rho.powi(k as i32) / k as f64,
            Family::Binomial { m, rho } => {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * m as f64 * rho.powi(k as i32) / k as f64
            }
            Family::ExpRational { b, rho } => {
                if k == 1 {
                    b
                } else {
                    b * rho.powi(k as i32 - 1)
                }
            }
            Family::ExpPower { r, rho } => {
                if k == 1 {
                    1.0
                } else if rho == 0.0 {
                    0.0
                } else {
                    let ln_binom = ln_gamma(r + k as f64 - 1.0) - ln_gamma(r) - ln_gamma(k as f64);
                    (ln_binom + (k as f64 - 1.0) * rho.ln()).exp()
                }
            }
            Family::ExpPolynomial { m, rho } => {
                if k > m as usize {
                    0.0
                } else if k == 1 {
                    1.0
                } else {
                    binomial_f64(m as usize - 1, k - 1) * rho.powi(k as i32 - 1)
                }
            }
            Family::LogRatio { r, rho } => r * rho.powi(k as i32) * tilde_a(k) / k as f64,
            Family::Raw { ref log_coeffs } => log_coeffs.get(k - 1).copied().unwrap_or(0.0),
        })
    }

    /// `[0, a_1, …, a_{k_max}]`.
    pub fn log_coeffs(&self, k_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; k_max + 1];
        match self.family {
            Family::ExpPower { r, rho } => {
                if k_max >= 1 {
                    out[1] = 1.0;
                }
                for k in 1..k_max {
                    out[k + 1] = out[k] * rho * (r + k as f64 - 1.0) / k as f64;
                }
            }
            Family::LogRatio { r, rho } => {
                let tilde = tilde_a_vec(k_max);
                let mut pow = 1.0;
                for k in 1..=k_max {
                    pow *= rho;
                    out[k] = r * pow * tilde[k] / k as f64;
                }
            }
            _ => {
                for (k, slot) in out.iter_mut().enumerate().skip(1) {
                    *slot = self.log_coeff(k).expect("k >= 1");
                }
            }
        }
        out
    }

    /// `c_k`, with `c_0 = 1`.
    pub fn gf_coeff(&self, k: usize) -> Result<f64> {
        Ok(self.gf_coeffs(k)[k])
    }

    /// `[c_0, …, c_{k_max}]`, by closed form where one exists and by the
    /// recurrence `c_k = (1/k) Σ_{j=1}^k j a_j c_{k-j}` otherwise.
    pub fn gf_coeffs(&self, k_max: usize) -> Vec<f64> {
        let mut c = vec![0.0; k_max + 1];
        c[0] = 1.0;
        match self.family {
            Family::GeomPower { r, rho } => {
                for k in 1..=k_max {
                    c[k] = c[k - 1] * rho * (r + k as f64 - 1.0) / k as f64;
                }
            }
            Family::Binomial { m, rho } => {
                for k in 1..=k_max.min(m as usize) {
                    c[k] = c[k - 1] * rho * (m as f64 - k as f64 + 1.0) / k as f64;
                }
            }
            Family::ExpRational { b, rho } if rho == 0.0 => {
                for k in 1..=k_max {
                    c[k] = c[k - 1] * b / k as f64;
                }
            }
            _ => {
                let a = self.log_coeffs(k_max);
                exp_recurrence(&a, &mut c);
            }
        }
        c
    }

    /// Real `H₀(u)` for `u` inside the domain.
    pub fn h0_real(&self, u: f64) -> Result<f64> {
        self.check_real_domain(u)?;
        Ok(self.h0_real_unchecked(u))
    }

    fn check_real_domain(&self, u: f64) -> Result<()> {
        if !u.is_finite() {
            return Err(domain(format!("H0 argument must be finite, got {u}")));
        }
        self.check_modulus(u.abs())?;
        if let Family::Binomial { rho, .. } = self.family {
            if 1.0 + rho * u <= 0.0 {
                return Err(domain(format!("binomial: 1 + rho*u must be positive, got u = {u}")));
            }
        }
        Ok(())
    }

    fn check_modulus(&self, modulus: f64) -> Result<()> {
        match self.family {
            Family::LogRatio { rho, .. } => {
                if rho * modulus > 1.0 - LOG_RATIO_EDGE {
                    return Err(domain(format!(
                        "log-ratio: |rho*u| must not exceed 1 - {LOG_RATIO_EDGE}, got |u| = {modulus}"
                    )));
                }
            }
            _ => {
                let radius = self.radius();
                if modulus >= radius {
                    return Err(domain(format!(
                        "{}: |u| must be below {radius}, got {modulus}",
                        self.family.name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn h0_real_unchecked(&self, u: f64) -> f64 {
        match self.family {
            Family::GeomPower { r, rho } => -r * (-rho * u).ln_1p(),
            Family::Binomial { m, rho } => m as f64 * (rho * u).ln_1p(),
            Family::ExpRational { b, rho } => b * u / (1.0 - rho * u),
            Family::ExpPower { r, rho } => u * (-r * (-rho * u).ln_1p()).exp(),
            Family::ExpPolynomial { m, rho } => u * (1.0 + rho * u).powi(m as i32 - 1),
            Family::LogRatio { r, rho } => {
                if (rho * u).abs() < LOG_RATIO_SERIES_RADIUS {
                    log_ratio_series(r, rho, u)
                } else {
                    let l = -(-rho * u).ln_1p();
                    r * (l / (rho * u)).ln()
                }
            }
            Family::Raw { ref log_coeffs } => horner_shifted(log_coeffs, u),
        }
    }

    /// `H₀(1 - w)` evaluated from the complement `w ∈ (0, 1]`, accurate as
    /// `w → 0` where `1 - ρu` would lose precision.
    pub(crate) fn h0_complement_unchecked(&self, w: f64) -> f64 {
        let u = 1.0 - w;
        match self.family {
            Family::GeomPower { r, rho } => -r * ((1.0 - rho) + rho * w).ln(),
            Family::ExpRational { b, rho } => b * u / ((1.0 - rho) + rho * w),
            Family::ExpPower { r, rho } => u * ((1.0 - rho) + rho * w).powf(-r),
            Family::LogRatio { r, rho } => {
                let v = (1.0 - rho) + rho * w;
                if v > 0.5 {
                    self.h0_real_unchecked(u)
                } else {
                    r * ((-v.ln()) / (rho * u)).ln()
                }
            }
            _ => self.h0_real_unchecked(u),
        }
    }

    /// `H₀(e^{-t})` for `t > 0`, switching to the complement form near `u = 1`.
    pub(crate) fn h0_exp_neg(&self, t: f64) -> f64 {
        let w = -(-t).exp_m1();
        if w < 0.5 {
            self.h0_complement_unchecked(w)
        } else {
            self.h0_real_unchecked((-t).exp())
        }
    }

    /// Complex `H₀(u)` on the principal branch.
    pub fn h0_eval(&self, u: Complex64) -> Result<Complex64> {
        if !(u.re.is_finite() && u.im.is_finite()) {
            return Err(domain("H0 argument must be finite"));
        }
        self.check_modulus(u.norm())?;
        if u.im == 0.0 {
            self.check_real_domain(u.re)?;
            return Ok(Complex64::new(self.h0_real_unchecked(u.re), 0.0));
        }
        let one = Complex64::new(1.0, 0.0);
        Ok(match self.family {
            Family::GeomPower { r, rho } => -r * (one - rho * u).ln(),
            Family::Binomial { m, rho } => m as f64 * (one + rho * u).ln(),
            Family::ExpRational { b, rho } => b * u / (one - rho * u),
            Family::ExpPower { r, rho } => u * (-r * (one - rho * u).ln()).exp(),
            Family::ExpPolynomial { m, rho } => u * (one + rho * u).powi(m as i32 - 1),
            Family::LogRatio { r, rho } => {
                if (rho * u).norm() < LOG_RATIO_SERIES_RADIUS {
                    let a = self.log_coeffs(LOG_RATIO_SERIES_TERMS);
                    horner_complex(&a[1..], u)
                } else {
                    let l = -(one - rho * u).ln();
                    r * (l / (rho * u)).ln()
                }
            }
            Family::Raw { ref log_coeffs } => horner_complex(log_coeffs, u),
        })
    }

    /// `H₀'(u)` for real `u` inside the domain.
    pub fn h0_deriv(&self, u: f64) -> Result<f64> {
        self.check_real_domain(u)?;
        Ok(match self.family {
            Family::GeomPower { r, rho } => r * rho / (1.0 - rho * u),
            Family::Binomial { m, rho } => m as f64 * rho / (1.0 + rho * u),
            Family::ExpRational { b, rho } => {
                let d = 1.0 - rho * u;
                b / (d * d)
            }
            Family::ExpPower { r, rho } => {
                let d = 1.0 - rho * u;
                d.powf(-r - 1.0) * (d + r * rho * u)
            }
            Family::ExpPolynomial { m, rho } => {
                let m = m as i32;
                let p = 1.0 + rho * u;
                p.powi(m - 1) + (m - 1) as f64 * rho * u * p.powi(m - 2)
            }
            Family::LogRatio { r, rho } => {
                if (rho * u).abs() < LOG_RATIO_SERIES_RADIUS {
                    let a = self.log_coeffs(LOG_RATIO_SERIES_TERMS);
                    let mut acc = 0.0;
                    for k in (1..=LOG_RATIO_SERIES_TERMS).rev() {
                        acc = acc * u + k as f64 * a[k];
                    }
                    acc
                } else {
                    let d = 1.0 - rho * u;
                    let l = -(-rho * u).ln_1p();
                    r * (rho / (d * l) - 1.0 / u)
                }
            }
            Family::Raw { ref log_coeffs } => {
                let mut acc = 0.0;
                for (i, a) in log_coeffs.iter().enumerate().rev() {
                    acc = acc * u + (i + 1) as f64 * a;
                }
                acc
            }
        })
    }

    /// `F₀(u) = exp(H₀(u))` for real `u`.
    pub fn f0_real(&self, u: f64) -> Result<f64> {
        Ok(self.h0_real(u)?.exp())
    }

    /// Partial sum of `A(s)` over `k ≤ k_max` with a rigorous tail bound
    /// (`+∞` if none is available at this truncation).
    pub fn dirichlet_partial(&self, s: f64, k_max: usize) -> Result<DirichletSum> {
        let threshold = self.sigma_threshold();
        if !(s > threshold) {
            return Err(Error::Divergence {
                what: format!("A(s) for {}", self.descriptor()),
                threshold,
                sigma: s,
            });
        }
        let env = self.envelope();
        let k_max = match env {
            Envelope::Finite(deg) => deg,
            _ => k_max,
        };
        let a = self.log_coeffs(k_max);
        let mut value = CompensatedSum::new();
        let mut abs_value = CompensatedSum::new();
        // smallest terms first
        for k in (1..=k_max).rev() {
            let t = a[k] * (k as f64).powf(-s);
            value.add(t);
            abs_value.add(t.abs());
        }
        let (tail_value, tail_abs, bound) = self.dirichlet_tail(s, k_max as u64, env);
        Ok(DirichletSum {
            value: value.value() + tail_value,
            abs_value: abs_value.value() + tail_abs,
            tail_bound: bound,
            terms: k_max,
        })
    }

    /// Estimated tail `(value, abs_value, bound)` beyond `K`. The estimates
    /// are zero when only a bound is available.
    fn dirichlet_tail(&self, s: f64, k: u64, env: Envelope) -> (f64, f64, f64) {
        let (scale, power, ratio) = match env {
            Envelope::Finite(_) => return (0.0, 0.0, 0.0),
            Envelope::Power {
                scale,
                power,
                ratio,
            } => (scale, power, ratio),
        };
        if ratio < 1.0 {
            return (0.0, 0.0, poly_geom_tail(scale, power - s, ratio, k));
        }
        match self.family {
            Family::GeomPower { r, .. } => {
                let (t, e) = power_tail(s + 1.0, k);
                (r * t, r * t, r * e)
            }
            Family::Binomial { m, .. } => {
                let m = m as f64;
                let (t, e) = power_tail(s + 1.0, k);
                let (alt, ea) = alternating_power_tail(s + 1.0, k);
                (m * alt, m * t, m * e.max(ea))
            }
            Family::ExpRational { b, .. } => {
                let (t, e) = power_tail(s, k);
                (b * t, b * t, b * e)
            }
            Family::ExpPower { r, .. } => {
                // Γ(k+a)/Γ(k) = k^a (1 + c1/k + c2/k² + c3/k³ + O(k^-4))
                let a = r - 1.0;
                let c1 = a * (a - 1.0) / 2.0;
                let c2 = a * (a - 1.0) * (a - 2.0) * (3.0 * a - 1.0) / 24.0;
                let c3 = a * a * (a - 1.0) * (a - 1.0) * (a - 2.0) * (a - 3.0) / 48.0;
                let inv_g = (-ln_gamma(r)).exp();
                let base = s - a;
                let mut total = 0.0;
                let mut err = 0.0;
                for (j, c) in [1.0, c1, c2, c3].iter().enumerate() {
                    let (t, e) = power_tail(base + j as f64, k);
                    total += c * t;
                    err += c.abs() * e;
                }
                let (t4, _) = power_tail(base + 4.0, k);
                let bound = inv_g * (err + (1.0 + c3.abs()) * t4);
                (inv_g * total, inv_g * total, bound)
            }
            Family::LogRatio { r, .. } => {
                let (t, e) = power_tail(s + 1.0, k);
                (0.0, 0.0, r * (t + e))
            }
            _ => (0.0, 0.0, f64::INFINITY),
        }
    }

    /// `A(s) = Σ a_k k^{-s}` and `A⁺(s) = Σ |a_k| k^{-s}` to absolute accuracy `tol`.
    pub fn dirichlet_a(&self, s: f64, tol: f64) -> Result<DirichletSum> {
        let mut k_max = 64usize;
        loop {
            let sum = self.dirichlet_partial(s, k_max)?;
            if sum.tail_bound <= tol {
                return Ok(sum);
            }
            let limit = match self.family {
                Family::LogRatio { rho, .. } if rho == 1.0 => 1 << 14,
                _ => 1 << 22,
            };
            if k_max >= limit {
                return Err(Error::Numerical(format!(
                    "A({s}) for {}: tail bound {} exceeds tol {tol} at {k_max} terms",
                    self.descriptor(),
                    sum.tail_bound
                )));
            }
            k_max *= 4;
        }
    }

    /// Grid minimum of `[H₀(θ) - Re H₀(θe^{it})] / [θ(1 - cos t)]`.
    pub fn check_assumption_5_1(
        &self,
        theta_grid: &[f64],
        t_grid: &[f64],
    ) -> Result<PositivityReport> {
        let mut min = f64::INFINITY;
        let mut points = 0;
        let mut skipped = 0;
        for &theta in theta_grid {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(domain(format!("theta must lie in (0, 1), got {theta}")));
            }
            let h = self.h0_real(theta)?;
            for &t in t_grid {
                let denom = theta * (1.0 - t.cos());
                if denom <= 1e-300 || (1.0 - t.cos()) < 1e-14 {
                    skipped += 1;
                    continue;
                }
                let hz = self.h0_eval(Complex64::from_polar(theta, t))?;
                let ratio = (h - hz.re) / denom;
                min = min.min(ratio);
                points += 1;
            }
        }
        if points == 0 {
            return Err(domain("assumption check needs at least one admissible grid point"));
        }
        let a1 = self.log_coeff(1)?;
        let analytic_bound = (self.nonnegative_log_coeffs() && a1 > 0.0).then_some(a1);
        Ok(PositivityReport {
            delta_star_estimate: min,
            holds: min > 0.0,
            analytic_bound,
            points,
            skipped,
        })
    }
}

/// Default grids: `θ` on `(0, 1)` with extra points near 1, `t` on `(0, π]`
/// with extra points near 0.
pub fn default_positivity_grids() -> (Vec<f64>, Vec<f64>) {
    let mut theta: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    theta.extend([0.995, 0.999]);
    let mut t: Vec<f64> = (1..=200).map(|i| std::f64::consts::PI * i as f64 / 200.0).collect();
    t.extend([1e-3, 3e-3, 1e-2]);
    (theta, t)
}

/// `c_k = (1/k) Σ_{j=1}^k j a_j c_{k-j}`, filling `c[1..]` given `c[0]`.
pub(crate) fn exp_recurrence(a: &[f64], c: &mut [f64]) {
    for k in 1..c.len() {
        let mut acc = CompensatedSum::new();
        for j in 1..=k.min(a.len() - 1) {
            if a[j] != 0.0 {
                acc.add(j as f64 * a[j] * c[k - j]);
            }
        }
        c[k] = acc.value() / k as f64;
    }
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

fn horner_shifted(coeffs: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for a in coeffs.iter().rev() {
        acc = (acc + a) * u;
    }
    acc
}

fn horner_complex(coeffs: &[f64], u: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &a in coeffs.iter().rev() {
        acc = (acc + a) * u;
    }
    acc
}

fn log_ratio_series(r: f64, rho: f64, u: f64) -> f64 {
    let tilde = tilde_a_vec(LOG_RATIO_SERIES_TERMS);
    let x = rho * u;
    let mut acc = 0.0;
    for k in (1..=LOG_RATIO_SERIES_TERMS).rev() {
        acc = (acc + tilde[k] / k as f64) * x;
    }
    r * acc
}

static TILDE_A: Mutex<Vec<f64>> = Mutex::new(Vec::new());

/// `[0, ã_1, …, ã_{k_max}]` from the triangular system
/// `k/(k+1) = Σ_{j=1}^{k} ã_j / (k - j + 1)`.
pub fn tilde_a_vec(k_max: usize) -> Vec<f64> {
    let mut cache = TILDE_A.lock().unwrap_or_else(|e| e.into_inner());
    if cache.is_empty() {
        cache.push(0.0);
    }
    while cache.len() <= k_max {
        let k = cache.len();
        let mut acc = 0.0;
        for j in 1..k {
            acc += cache[j] / (k - j + 1) as f64;
        }
        let next = k as f64 / (k + 1) as f64 - acc;
        cache.push(next);
    }
    cache[..=k_max].to_vec()
}

fn tilde_a(k: usize) -> f64 {
    {
        let cache = TILDE_A.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(&v) = cache.get(k) {
            return v;
        }
    }
    tilde_a_vec(k)[k]
}
