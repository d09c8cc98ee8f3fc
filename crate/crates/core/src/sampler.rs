//! Sampling from the grand ensemble `Q_z` and from `P_n = Q_z( · | N_λ = n)`.
//!
//! Under `Q_z` the multiplicities `ν_ℓ` are independent with
//! `Q_z{ν_ℓ = k} = c_k z^{kℓ} / F₀(z^ℓ)`. [`GrandSampler`] draws the whole
//! vector `(ν_1, …, ν_L)` by thinning: occupied part sizes (`ν_ℓ > 0`, with
//! probability `p_ℓ = 1 - 1/F₀(z^ℓ)`, decreasing in `ℓ`) are located with
//! geometric skips, and each occupied `ν_ℓ` is drawn from its zero-truncated
//! law. The joint law is exactly the product of marginals up to the cutoff
//! `L`, beyond which the total occupation probability is below
//! `tail_epsilon`.
//!
//! Conditioned samples are obtained by plain rejection.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, Calibration};
use crate::ensembles::{EnsembleSpec, Family};
use crate::error::{domain, Error, Result};
use crate::partition::Partition;

/// Default seed used by the library and the CLI.
pub const DEFAULT_SEED: u64 = 20_110_523;

const MAX_CUTOFF: u64 = 1_000_000_000;
const MAX_PMF_TERMS: usize = 100_000;
const MAX_SEQUENTIAL_STEPS: u64 = 100_000_000;
const H0_TABLE_MAX: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub tail_epsilon: f64,
    pub max_trials: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: DEFAULT_SEED,
            tail_epsilon: 1e-12,
            max_trials: 100_000_000,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_epsilon > 0.0 && self.tail_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "tail_epsilon must lie in (0, 1), got {}",
                self.tail_epsilon
            )));
        }
        if self.max_trials == 0 {
            return Err(Error::Config("max_trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Independent, reproducible stream for replica `replica`.
    pub fn rng(&self, replica: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replica);
        rng
    }
}

/// `u = z^ℓ` together with `1 - ρu` computed without cancellation.
#[derive(Clone, Copy, Debug)]
struct Point {
    u: f64,
    one_minus_u: f64,
}

impl Point {
    fn new(alpha: f64, ell: u64) -> Self {
        let t = alpha * ell as f64;
        Point {
            u: (-t).exp(),
            one_minus_u: -(-t).exp_m1(),
        }
    }

    fn one_minus_rho_u(&self, rho: f64) -> f64 {
        (1.0 - rho) + rho * self.one_minus_u
    }
}

fn check_z(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(domain(format!("z must lie in (0, 1), got {z}")));
    }
    Ok(-z.ln())
}

/// Exact pmf `Q_z{ν_ℓ = k}` for `k = 0..=k_max`.
pub fn marginal_pmf(spec: &EnsembleSpec, z: f64, ell: u64, k_max: usize) -> Result<Vec<f64>> {
    let alpha = check_z(z)?;
    if ell == 0 {
        return Err(domain("part size must be >= 1"));
    }
    let u = Point::new(alpha, ell).u;
    let h = spec.h0_real(u)?;
    let c = spec.gf_coeffs(k_max);
    let mut out = Vec::with_capacity(k_max + 1);
    let mut uk = (-h).exp();
    for ck in c {
        out.push(ck * uk);
        uk *= u;
    }
    Ok(out)
}

/// Draws `ν_ℓ` from `Q_z{ν_ℓ = k} = c_k z^{kℓ}/F₀(z^ℓ)`.
pub fn marginal_sample<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    z: f64,
    ell: u64,
    tail_epsilon: f64,
    rng: &mut R,
) -> Result<u64> {
    let alpha = check_z(z)?;
    if ell == 0 {
        return Err(domain("part size must be >= 1"));
    }
    if !(tail_epsilon > 0.0 && tail_epsilon < 1.0) {
        return Err(Error::Config("tail_epsilon must lie in (0, 1)".into()));
    }
    let pt = Point::new(alpha, ell);
    match specialized_sample(spec, pt, rng) {
        Some(v) => v,
        None => inverse_cdf_sample(spec, pt.u, tail_epsilon, rng),
    }
}

/// Family-specific exact samplers; `None` for families without one.
fn specialized_sample<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    pt: Point,
    rng: &mut R,
) -> Option<Result<u64>> {
    let numeric = |e: rand_distr::GammaError| Error::Numerical(e.to_string());
    Some(match *spec.family() {
        Family::GeomPower { r, rho } => {
            let q = rho * pt.u;
            let p = pt.one_minus_rho_u(rho);
            if r == 1.0 {
                Geometric::new(p)
                    .map(|d| d.sample(rng))
                    .map_err(|e| Error::Numerical(e.to_string()))
            } else {
                // negative binomial as a gamma-mixed Poisson
                Gamma::new(r, q / p).map_err(numeric).and_then(|g| {
                    let lambda: f64 = g.sample(rng);
                    poisson(lambda, rng)
                })
            }
        }
        Family::Binomial { m, rho } => {
            let p = rho * pt.u / (1.0 + rho * pt.u);
            Binomial::new(m as u64, p)
                .map(|d| d.sample(rng))
                .map_err(|e| Error::Numerical(e.to_string()))
        }
        Family::ExpRational { b, rho } if rho == 0.0 => poisson(b * pt.u, rng),
        _ => return None,
    })
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda > 0.0) {
        return Ok(0);
    }
    let d = Poisson::new(lambda).map_err(|e| Error::Numerical(e.to_string()))?;
    let v: f64 = d.sample(rng);
    Ok(v as u64)
}

/// Inverse CDF over `c_k u^k / F₀(u)`, truncated once the remaining mass is
/// below `tail_epsilon`.
fn inverse_cdf_sample<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    u: f64,
    tail_epsilon: f64,
    rng: &mut R,
) -> Result<u64> {
    let h = spec.h0_real(u)?;
    if h > 700.0 {
        return Err(Error::Numerical(format!("F0(u) overflows at u = {u}")));
    }
    let mut len = 64usize;
    let mut c = spec.gf_coeffs(len);
    let mut pmf = Vec::new();
    let mut cum = 0.0;
    let mut uk = (-h).exp();
    let mut k = 0usize;
    while cum < 1.0 - tail_epsilon {
        if k >= MAX_PMF_TERMS {
            return Err(Error::Numerical(format!(
                "pmf truncation did not reach 1 - {tail_epsilon} within {MAX_PMF_TERMS} terms"
            )));
        }
        if k > len {
            len *= 2;
            c = spec.gf_coeffs(len);
        }
        if c[k] < 0.0 {
            return Err(Error::Domain(format!(
                "negative coefficient c_{k} = {}: not a probability law",
                c[k]
            )));
        }
        let p = c[k] * uk;
        pmf.push(p);
        cum += p;
        uk *= u;
        k += 1;
    }
    let target = rng.random::<f64>() * cum;
    let mut acc = 0.0;
    for (i, p) in pmf.iter().enumerate() {
        acc += p;
        if target < acc {
            return Ok(i as u64);
        }
    }
    Ok(pmf.len() as u64 - 1)
}

/// Smallest `L` with `(F₀(z^L) - 1) z / (1 - z) < eps`, `z = e^{-α}`.
///
/// By convexity of `F₀ - 1` this bounds `Σ_{ℓ>L} (F₀(z^ℓ) - 1)`, which in
/// turn bounds both `Σ_{ℓ>L} Q_z{ν_ℓ > 0}` and `Σ_{ℓ>L} H₀(z^ℓ)`.
pub fn occupation_cutoff(spec: &EnsembleSpec, alpha: f64, eps: f64) -> Result<u64> {
    let z_ratio = (-alpha).exp() / -(-alpha).exp_m1();
    let bound = |l: u64| spec.h0_exp_neg(alpha * l as f64).exp_m1() * z_ratio;
    let mut hi = 1u64;
    while bound(hi) >= eps {
        if hi >= MAX_CUTOFF {
            return Err(Error::Config(format!(
                "sampler cutoff exceeds {MAX_CUTOFF} (alpha = {alpha})"
            )));
        }
        hi = (hi * 2).min(MAX_CUTOFF);
    }
    if hi == 1 {
        return Ok(1);
    }
    // bound(hi / 2) ≥ eps > bound(hi)
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid) < eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Reusable sampler for `Q_z` at a fixed calibration.
#[derive(Clone, Debug)]
pub struct GrandSampler {
    spec: EnsembleSpec,
    alpha: f64,
    cutoff: u64,
    coeffs: Vec<f64>,
    specialized: bool,
    /// `H₀(z^ℓ)` for `ℓ = 1..=cutoff` when the cutoff is small enough.
    h0_table: Arc<[f64]>,
}

impl GrandSampler {
    pub fn new(spec: &EnsembleSpec, cal: &Calibration, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if !(cal.alpha > 0.0 && cal.alpha.is_finite()) {
            return Err(domain(format!("alpha must be positive, got {}", cal.alpha)));
        }
        let specialized = matches!(
            spec.family(),
            Family::GeomPower { .. } | Family::Binomial { .. }
        ) || matches!(spec.family(), Family::ExpRational { rho, .. } if *rho == 0.0);
        let mut s = GrandSampler {
            spec: spec.clone(),
            alpha: cal.alpha,
            cutoff: 0,
            coeffs: spec.gf_coeffs(64),
            specialized,
            h0_table: Arc::from(Vec::new()),
        };
        s.check_coeffs(0)?;
        s.cutoff = s.find_cutoff(cfg.tail_epsilon)?;
        if s.cutoff <= H0_TABLE_MAX {
            s.h0_table = (1..=s.cutoff).map(|l| s.h0_at(l)).collect::<Vec<_>>().into();
        }
        Ok(s)
    }

    /// Largest part size that can be produced.
    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `H₀(z^ℓ)`.
    fn h0_at(&self, ell: u64) -> f64 {
        if let Some(&h) = self.h0_table.get(ell as usize - 1) {
            return h;
        }
        self.spec.h0_exp_neg(self.alpha * ell as f64)
    }

    fn find_cutoff(&self, eps: f64) -> Result<u64> {
        occupation_cutoff(&self.spec, self.alpha, eps)
    }

    fn check_coeffs(&self, from: usize) -> Result<()> {
        if let Some((k, &c)) = self.coeffs.iter().enumerate().skip(from).find(|(_, &c)| c < 0.0) {
            return Err(Error::Domain(format!(
                "negative coefficient c_{k} = {c}: Q_z is not a probability measure"
            )));
        }
        Ok(())
    }

    fn coeff(&mut self, k: usize) -> Result<f64> {
        if k >= self.coeffs.len() {
            let old = self.coeffs.len();
            let mut len = old;
            while len <= k {
                len *= 2;
            }
            self.coeffs = self.spec.gf_coeffs(len);
            self.check_coeffs(old)?;
        }
        Ok(self.coeffs[k])
    }

    /// `P(ν_ℓ > 0) = 1 - 1/F₀(z^ℓ)`.
    fn occupancy(&self, ell: u64) -> f64 {
        -(-self.h0_at(ell)).exp_m1()
    }

    /// Draws `ν_ℓ` conditioned on `ν_ℓ > 0`.
    fn draw_positive<R: Rng + ?Sized>(&mut self, ell: u64, p: f64, rng: &mut R) -> Result<u64> {
        match *self.spec.family() {
            Family::Binomial { m: 1, .. } => return Ok(1),
            Family::GeomPower { r, rho } if r == 1.0 => {
                // 1 + geometric with ratio ρz^ℓ
                let log_ratio = rho.ln() - self.alpha * ell as f64;
                let e: f64 = (1.0 - rng.random::<f64>()).ln();
                let v = (e / log_ratio).floor();
                if v >= MAX_SEQUENTIAL_STEPS as f64 {
                    return Err(Error::Numerical(format!(
                        "geometric draw at part size {ell} overflowed"
                    )));
                }
                return Ok(1 + v as u64);
            }
            _ => {}
        }
        let pt = Point::new(self.alpha, ell);
        if self.specialized && p >= 0.25 {
            loop {
                let v = specialized_sample(&self.spec, pt, rng).expect("specialized family")?;
                if v > 0 {
                    return Ok(v);
                }
            }
        }
        // sequential inverse CDF over c_k u^k, k ≥ 1, total mass F₀(u) - 1
        let mass = self.h0_at(ell).exp_m1();
        let mut target = (1.0 - rng.random::<f64>()) * mass;
        let mut uk = 1.0;
        let mut k = 1usize;
        loop {
            uk *= pt.u;
            let term = self.coeff(k)? * uk;
            target -= term;
            if target <= 0.0 || term <= 1e-17 * mass && target <= 1e-14 * mass {
                return Ok(k as u64);
            }
            if k as u64 >= MAX_SEQUENTIAL_STEPS {
                return Err(Error::Numerical(format!(
                    "zero-truncated draw at part size {ell} did not terminate"
                )));
            }
            k += 1;
        }
    }

    /// One draw from `Q_z`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Partition> {
        let mut buf = Vec::new();
        self.fill(rng, &mut buf)?;
        Partition::from_counts(buf)
    }

    /// Draws `(ℓ, ν_ℓ)` pairs with `ν_ℓ > 0` into `buf`, returning `N_λ`.
    fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, buf: &mut Vec<(u64, u64)>) -> Result<u64> {
        buf.clear();
        let mut total = 0u64;
        let mut pos = 1u64;
        while pos <= self.cutoff {
            let q = self.occupancy(pos);
            if q <= 0.0 {
                break;
            }
            let cand = if q >= 1.0 {
                pos
            } else {
                // failures before the first success at rate q: ⌊ln U / ln(1 - q)⌋,
                // with ln(1 - q) = -H₀(z^pos)
                let e: f64 = -(1.0 - rng.random::<f64>()).ln();
                let skip = (e / self.h0_at(pos)).floor();
                if skip >= (self.cutoff - pos + 1) as f64 {
                    break;
                }
                pos + skip as u64
            };
            if cand > self.cutoff {
                break;
            }
            let p = if cand == pos { q } else { self.occupancy(cand) };
            if cand == pos || rng.random::<f64>() * q < p {
                let v = self.draw_positive(cand, p, rng)?;
                total = cand
                    .checked_mul(v)
                    .and_then(|w| w.checked_add(total))
                    .ok_or_else(|| domain("partition weight overflows u64"))?;
                buf.push((cand, v));
            }
            pos = cand + 1;
        }
        Ok(total)
    }

    /// Repeats [`GrandSampler::sample`] until `N_λ = n`; returns the accepted
    /// partition and the number of trials.
    pub fn sample_conditioned<R: Rng + ?Sized>(
        &mut self,
        n: u64,
        max_trials: u64,
        rng: &mut R,
    ) -> Result<(Partition, u64)> {
        if self.spec.log_coeff(1)? <= 0.0 {
            return Err(domain("conditioning requires c_1 > 0"));
        }
        let mut buf = Vec::new();
        for trial in 1..=max_trials {
            if self.fill(rng, &mut buf)? == n {
                return Ok((Partition::from_counts(buf)?, trial));
            }
        }
        Err(Error::RejectionTimeout { trials: max_trials })
    }
}

/// One draw from `Q_z` at the given calibration.
pub fn sample_grand<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    cal: &Calibration,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Partition> {
    GrandSampler::new(spec, cal, cfg)?.sample(rng)
}

/// One draw from `P_n` by rejection from `Q_z` with `z` calibrated to `n`.
pub fn sample_conditioned<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    n: u64,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(Partition, u64)> {
    let cal = calibrate(spec, n, 1e-10)?;
    sample_conditioned_at(spec, &cal, n, cfg, rng)
}

/// One draw from `P_n` by rejection from `Q_z` at an arbitrary calibration.
pub fn sample_conditioned_at<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    cal: &Calibration,
    n: u64,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(Partition, u64)> {
    if n == 0 {
        return Err(domain("conditioning requires n >= 1"));
    }
    GrandSampler::new(spec, cal, cfg)?.sample_conditioned(n, cfg.max_trials, rng)
}
