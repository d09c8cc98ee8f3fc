//! Numerical kernels: power-exponential sums `S_q(t) = Σ_{ℓ≥1} ℓ^{q-1} e^{-tℓ}`,
//! the real dilogarithm, adaptive Gauss–Kronrod quadrature and
//! Euler–Maclaurin tails of power series.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::ensembles::EnsembleSpec;
use crate::error::{domain, Error, Result};

/// Coefficients `c_{j,q}` of the representation
/// `S_q(t) = Σ_{j=1}^q c_{j,q} e^{-tj} / (1 - e^{-t})^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SqCoeffTable {
    q: usize,
    coeffs: Vec<f64>,
}

impl SqCoeffTable {
    pub fn q(&self) -> usize {
        self.q
    }

    /// `c_{1,q}, …, c_{q,q}`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// Builds `c_{j,q}` from `c_{1,1} = 1` by the differentiation recursion
/// `c_{1,q+1} = c_{1,q}`, `c_{j,q+1} = j c_{j,q} + (j-1) c_{j-1,q}`,
/// `c_{q+1,q+1} = q c_{q,q}`.
pub fn sq_table(q: usize) -> Result<SqCoeffTable> {
    if q == 0 {
        return Err(domain("S_q requires q >= 1"));
    }
    let mut coeffs = vec![1.0];
    for cur in 1..q {
        let mut next = vec![0.0; cur + 1];
        next[0] = coeffs[0];
        for j in 2..=cur {
            next[j - 1] = j as f64 * coeffs[j - 1] + (j - 1) as f64 * coeffs[j - 2];
        }
        next[cur] = cur as f64 * coeffs[cur - 1];
        coeffs = next;
    }
    Ok(SqCoeffTable { q, coeffs })
}

/// Above this argument `S_q` is summed directly; the series converges in a
/// handful of terms there.
const SQ_DIRECT_THRESHOLD: f64 = 30.0;

/// Evaluates `S_q(t)` for `t > 0`.
pub fn sq_eval(q: usize, t: f64) -> Result<f64> {
    let table = sq_table(q)?;
    sq_eval_with(&table, t)
}

/// Same as [`sq_eval`] with a prebuilt table (hot loops).
pub fn sq_eval_with(table: &SqCoeffTable, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("S_q(t) requires t > 0, got {t}")));
    }
    Ok(sq_eval_unchecked(table, t))
}

pub(crate) fn sq_eval_unchecked(table: &SqCoeffTable, t: f64) -> f64 {
    let q = table.q;
    if t > SQ_DIRECT_THRESHOLD {
        let mut sum = 0.0;
        for l in 1..=64u32 {
            let term = (l as f64).powi(q as i32 - 1) * (-t * l as f64).exp();
            sum += term;
            if term <= sum * 1e-18 {
                break;
            }
        }
        return sum;
    }
    let x = (-t).exp();
    let d = -(-t).exp_m1();
    let ratio = x / d;
    // Horner in ratio: Σ c_j ratio^j
    let mut acc = 0.0;
    for c in table.coeffs.iter().rev() {
        acc = (acc + c) * ratio;
    }
    acc
}

/// Real dilogarithm `Li₂(x) = Σ x^k / k²` on `[-1, 1]`.
pub fn dilog(x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(domain(format!("dilog requires |x| <= 1, got {x}")));
    }
    Ok(dilog_unchecked(x))
}

fn dilog_unchecked(x: f64) -> f64 {
    const PI2_6: f64 = PI * PI / 6.0;
    if x == 1.0 {
        PI2_6
    } else if x == 0.0 {
        0.0
    } else if x.abs() <= 0.5 {
        dilog_series(x)
    } else if x > 0.5 {
        // Li₂(x) + Li₂(1-x) = π²/6 - ln x ln(1-x)
        PI2_6 - x.ln() * (-x).ln_1p() - dilog_series(1.0 - x)
    } else {
        // Landen: Li₂(x) = -Li₂(x/(x-1)) - ½ ln²(1-x), x/(x-1) ∈ (1/3, 1/2]
        let y = x / (x - 1.0);
        let l = (-x).ln_1p();
        -dilog_series(y) - 0.5 * l * l
    }
}

fn dilog_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x;
    for k in 1..200u32 {
        let term = pow / (k as f64 * k as f64);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= x;
    }
    sum
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Result of an adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    if !value.is_finite() || !error.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((value, error))
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature of `f` on
/// `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(domain(format!("bad integration interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let (value, error) = kronrod15(&f, a, b)?;
    heap.push(Segment { a, b, value, error });
    let mut total_err = error;
    loop {
        if total_err <= tol {
            break;
        }
        if heap.len() >= MAX_INTERVALS {
            let total: f64 = heap.iter().map(|s| s.value).sum();
            return Err(Error::Numerical(format!(
                "quadrature did not converge: value {total}, error {total_err} > tol {tol}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            heap.push(Segment {
                error: 0.0,
                ..worst
            });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = kronrod15(&f, worst.a, mid)?;
        let (v2, e2) = kronrod15(&f, mid, worst.b)?;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    for s in heap.iter() {
        value.add(s.value);
        error += s.error;
    }
    Ok(Quadrature {
        value: value.value(),
        error,
        intervals: heap.len(),
    })
}

/// `∫_a^∞ f(x) dx` via the map `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<Quadrature> {
    integrate(
        |t: f64| {
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let jac = 1.0 / (one_minus * one_minus);
            let fx = f(x);
            if fx == 0.0 {
                0.0
            } else {
                fx * jac
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Tail `Σ_{j>k} j^{-α}` for `α > 1`, as `(value, error_bound)`.
///
/// Direct summation up to `j = 64`, then Euler–Maclaurin with four Bernoulli
/// corrections; the bound is the magnitude of the first omitted correction.
pub fn power_tail(alpha: f64, k: u64) -> (f64, f64) {
    assert!(alpha > 1.0, "power_tail needs alpha > 1");
    let start = k + 1;
    let n0 = start.max(64);
    let mut direct = CompensatedSum::new();
    for j in start..n0 {
        direct.add((j as f64).powf(-alpha));
    }
    let n = n0 as f64;
    // B2, B4, B6, B8 / (2i)!
    const B_OVER_FACT: [f64; 4] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
    ];
    const B10_OVER_FACT: f64 = 1.0 / 47900160.0;
    let mut em = n.powf(1.0 - alpha) / (alpha - 1.0) + 0.5 * n.powf(-alpha);
    let mut rising = alpha; // (α)_{2i-1}
    let mut power = n.powf(-alpha - 1.0);
    for (i, coef) in B_OVER_FACT.iter().enumerate() {
        em += coef * rising * power;
        let m = (2 * i + 1) as f64;
        rising *= (alpha + m) * (alpha + m + 1.0);
        power /= n * n;
    }
    let bound = B10_OVER_FACT * rising * power;
    (direct.value() + em, bound.abs() + 1e-17 * em.abs())
}

/// Alternating tail `Σ_{j>k} (-1)^{j-1} j^{-α}` for `α > 1`.
pub fn alternating_power_tail(alpha: f64, k: u64) -> (f64, f64) {
    if k % 2 == 1 {
        let head = (-1f64).powi(k as i32) * ((k + 1) as f64).powf(-alpha);
        let (rest, err) = alternating_power_tail(alpha, k + 1);
        return (head + rest, err);
    }
    let (all, e1) = power_tail(alpha, k);
    let (half, e2) = power_tail(alpha, k / 2);
    let f = 2f64.powf(1.0 - alpha);
    (all - f * half, e1 + f * e2)
}

/// Upper bound on `Σ_{k>K} scale · k^β · w^k` for `0 ≤ w < 1`.
///
/// Terms are summed explicitly while the consecutive-term ratio bound
/// `w ((j+1)/j)^{max(β,0)}` exceeds `(1 + w)/2`, then closed geometrically.
pub fn poly_geom_tail(scale: f64, beta: f64, w: f64, k: u64) -> f64 {
    if scale == 0.0 || w == 0.0 {
        return 0.0;
    }
    if !(w < 1.0) {
        return f64::INFINITY;
    }
    let ln_scale = scale.ln();
    let ln_w = w.ln();
    let term = |j: f64| (ln_scale + beta * j.ln() + j * ln_w).exp();
    let mut acc = 0.0;
    let mut j = (k + 1) as f64;
    let mut explicit = 0u32;
    let switch = 0.5 * (1.0 + w);
    loop {
        let q = w * ((j + 1.0) / j).powf(beta.max(0.0));
        if q <= switch || explicit >= 1_000_000 {
            if q >= 1.0 {
                return f64::INFINITY;
            }
            return acc + term(j) / (1.0 - q);
        }
        acc += term(j);
        j += 1.0;
        explicit += 1;
    }
}

/// `A(1) = ∫_0^1 H₀(u)/u du` by adaptive quadrature.
///
/// The interval is split at `u = 1/2`; on `[1/2, 1)` the substitution
/// `u = 1 - e^{-v}` tames logarithmic and algebraic blow-up at `u = 1`, and
/// `H₀` is evaluated from `1 - u = e^{-v}` directly.
pub fn gamma_integral(spec: &EnsembleSpec, tol: f64) -> Result<Quadrature> {
    let threshold = spec.sigma_threshold();
    if threshold >= 1.0 {
        return Err(Error::Divergence {
            what: format!("A(1) for {}", spec.descriptor()),
            threshold,
            sigma: 1.0,
        });
    }
    let a1 = spec.log_coeff(1)?;
    let lower = integrate(
        |u: f64| {
            if u < 1e-300 {
                a1
            } else {
                spec.h0_real_unchecked(u) / u
            }
        },
        0.0,
        0.5,
        0.5 * tol,
    )?;
    let upper = integrate_to_infinity(
        |v: f64| {
            let w = (-v).exp();
            if w == 0.0 {
                return 0.0;
            }
            let u = -(-v).exp_m1();
            spec.h0_complement_unchecked(w) * w / u
        },
        std::f64::consts::LN_2,
        0.5 * tol,
    )?;
    Ok(Quadrature {
        value: lower.value + upper.value,
        error: lower.error + upper.error,
        intervals: lower.intervals + upper.intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sq_tables_match_recursion() {
        assert_eq!(sq_table(1).unwrap().coeffs(), &[1.0]);
        assert_eq!(sq_table(2).unwrap().coeffs(), &[1.0, 1.0]);
        assert_eq!(sq_table(3).unwrap().coeffs(), &[1.0, 3.0, 2.0]);
        assert_eq!(sq_table(4).unwrap().coeffs(), &[1.0, 7.0, 12.0, 6.0]);
        assert!(sq_table(0).is_err());
    }

    #[test]
    fn sq_table_invariants() {
        let mut fact = 1.0;
        for q in 1..=12 {
            let t = sq_table(q).unwrap();
            assert!(t.coeffs().iter().all(|&c| c > 0.0));
            assert_eq!(t.coeffs()[0], 1.0);
            assert_eq!(*t.coeffs().last().unwrap(), fact);
            fact *= q as f64;
        }
    }

    #[test]
    fn sq_closed_values() {
        let t = std::f64::consts::LN_2;
        assert!((sq_eval(1, t).unwrap() - 1.0).abs() < 1e-15);
        assert!((sq_eval(2, t).unwrap() - 2.0).abs() < 1e-14);
        assert!(sq_eval(2, 0.0).is_err());
        assert!(sq_eval(2, -1.0).is_err());
    }

    #[test]
    fn sq_large_t_is_series() {
        let t: f64 = 35.0;
        let direct = (-t).exp() + 8.0 * (-2.0 * t).exp();
        assert!((sq_eval(4, t).unwrap() / direct - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dilog_known_values() {
        let pi2 = PI * PI;
        assert!((dilog(1.0).unwrap() - pi2 / 6.0).abs() < 1e-15);
        assert!((dilog(-1.0).unwrap() + pi2 / 12.0).abs() < 1e-15);
        assert_eq!(dilog(0.0).unwrap(), 0.0);
        // Li₂(1/2) = π²/12 - ln²2/2
        let l2 = std::f64::consts::LN_2;
        assert!((dilog(0.5).unwrap() - (pi2 / 12.0 - 0.5 * l2 * l2)).abs() < 1e-15);
        assert!(dilog(1.5).is_err());
    }

    #[test]
    fn dilog_matches_series_across_branches() {
        for &x in &[-0.95, -0.7, -0.51, -0.3, 0.2, 0.51, 0.8, 0.97] {
            let mut s = CompensatedSum::new();
            let mut p: f64 = 1.0;
            for k in 1..20000 {
                p *= x;
                s.add(p / (k as f64 * k as f64));
            }
            assert!((dilog(x).unwrap() - s.value()).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn quadrature_basic() {
        let q = integrate(|x| x.sin(), 0.0, PI, 1e-13).unwrap();
        assert!((q.value - 2.0).abs() < 1e-13);
        let q = integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        // log singularity at the endpoint
        let q = integrate(|x: f64| -x.ln(), 0.0, 1.0, 1e-11).unwrap();
        assert!((q.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn power_tails() {
        let (t, e) = power_tail(2.0, 0);
        assert!((t - PI * PI / 6.0).abs() < 1e-14 && e < 1e-14);
        let (t, _) = power_tail(2.0, 3);
        assert!((t - (PI * PI / 6.0 - 1.0 - 0.25 - 1.0 / 9.0)).abs() < 1e-14);
        let (a, _) = alternating_power_tail(2.0, 0);
        assert!((a - PI * PI / 12.0).abs() < 1e-14);
        let (a, _) = alternating_power_tail(2.0, 1);
        assert!((a - (PI * PI / 12.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn poly_geom_tail_bounds_direct_sum() {
        for &(beta, w, k) in &[(2.0, 0.9, 10u64), (-1.0, 0.5, 3), (0.0, 0.99, 100)] {
            let direct: f64 = ((k + 1)..(k + 20000))
                .map(|j| (j as f64).powf(beta) * f64::powi(w, j as i32))
                .sum();
            let bound = poly_geom_tail(1.0, beta, w, k);
            assert!(bound >= direct * (1.0 - 1e-12), "{beta} {w} {k}");
            assert!(bound < direct * 50.0);
        }
    }
}
