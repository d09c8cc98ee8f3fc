//! Exact rational arithmetic for coefficients and normalizers.
//!
//! Real parameters are read as the rational number named by their shortest
//! decimal representation, so `0.5` is `1/2` and `0.1` is `1/10`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ensembles::{EnsembleSpec, Family};
use crate::error::{domain, Result};

/// The rational named by the shortest round-trip decimal string of `x`.
pub fn decimal_rational(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(domain(format!("cannot convert {x} to a rational")));
    }
    let text = format!("{x:e}");
    let (mantissa, exponent) = text.split_once('e').expect("exponent form");
    let exponent: i64 = exponent
        .parse()
        .map_err(|_| domain(format!("bad exponent in {text}")))?;
    let negative = mantissa.starts_with('-');
    let digits_part = mantissa.trim_start_matches('-');
    let (int_part, frac_part) = digits_part.split_once('.').unwrap_or((digits_part, ""));
    let digits: String = format!("{int_part}{frac_part}");
    let mut numer: BigInt = digits
        .parse()
        .map_err(|_| domain(format!("bad mantissa in {text}")))?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    Ok(if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    })
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Generalized binomial `C(x, k) = x (x-1) ⋯ (x-k+1) / k!`.
pub fn generalized_binomial(x: &BigRational, k: usize) -> BigRational {
    let mut acc = BigRational::one();
    for i in 0..k {
        acc = acc * (x - int(i as i64)) / int(i as i64 + 1);
    }
    acc
}

/// `[0, ã_1, …, ã_{k_max}]` in exact arithmetic.
pub fn tilde_a_exact(k_max: usize) -> Vec<BigRational> {
    let mut t = vec![BigRational::zero()];
    for k in 1..=k_max {
        let mut acc = BigRational::new(BigInt::from(k), BigInt::from(k + 1));
        for j in 1..k {
            acc -= &t[j] / int((k - j + 1) as i64);
        }
        t.push(acc);
    }
    t
}

/// `[0, a_1, …, a_{k_max}]` in exact arithmetic.
pub fn log_coeffs_exact(spec: &EnsembleSpec, k_max: usize) -> Result<Vec<BigRational>> {
    let mut out = vec![BigRational::zero(); k_max + 1];
    match spec.family() {
        Family::GeomPower { r, rho } => {
            let (r, rho) = (decimal_rational(*r)?, decimal_rational(*rho)?);
            let mut pow = BigRational::one();
            for k in 1..=k_max {
                pow *= &rho;
                out[k] = &r * &pow / int(k as i64);
            }
        }
        Family::Binomial { m, rho } => {
            let (m, rho) = (int(*m as i64), decimal_rational(*rho)?);
            let mut pow = BigRational::one();
            for k in 1..=k_max {
                pow *= &rho;
                let v = &m * &pow / int(k as i64);
                out[k] = if k % 2 == 1 { v } else { -v };
            }
        }
        Family::ExpRational { b, rho } => {
            let (b, rho) = (decimal_rational(*b)?, decimal_rational(*rho)?);
            let mut pow = BigRational::one();
            for k in 1..=k_max {
                out[k] = &b * &pow;
                pow *= &rho;
            }
        }
        Family::ExpPower { r, rho } => {
            let (r, rho) = (decimal_rational(*r)?, decimal_rational(*rho)?);
            if k_max >= 1 {
                out[1] = BigRational::one();
            }
            for k in 1..k_max {
                // a_{k+1} = a_k ρ (r + k - 1) / k
                out[k + 1] = &out[k] * &rho * (&r + int(k as i64 - 1)) / int(k as i64);
            }
        }
        Family::ExpPolynomial { m, rho } => {
            let rho = decimal_rational(*rho)?;
            let top = int(*m as i64 - 1);
            let mut pow = BigRational::one();
            for k in 1..=k_max.min(*m as usize) {
                out[k] = generalized_binomial(&top, k - 1) * &pow;
                pow *= &rho;
            }
        }
        Family::LogRatio { r, rho } => {
            let (r, rho) = (decimal_rational(*r)?, decimal_rational(*rho)?);
            let tilde = tilde_a_exact(k_max);
            let mut pow = BigRational::one();
            for k in 1..=k_max {
                pow *= &rho;
                out[k] = &r * &pow * &tilde[k] / int(k as i64);
            }
        }
        Family::Raw { log_coeffs } => {
            for (k, a) in log_coeffs.iter().enumerate().take(k_max) {
                out[k + 1] = decimal_rational(*a)?;
            }
        }
    }
    Ok(out)
}

/// Coefficients of `exp(Σ a_k u^k)` up to `u^{len-1}`, from `a` with `a[0]`
/// ignored, by `c_k = (1/k) Σ j a_j c_{k-j}`.
pub fn exp_series(a: &[BigRational], len: usize) -> Vec<BigRational> {
    let mut c = vec![BigRational::zero(); len];
    if len == 0 {
        return c;
    }
    c[0] = BigRational::one();
    for k in 1..len {
        let mut acc = BigRational::zero();
        for j in 1..=k.min(a.len().saturating_sub(1)) {
            if !a[j].is_zero() {
                acc += &a[j] * int(j as i64) * &c[k - j];
            }
        }
        c[k] = acc / int(k as i64);
    }
    c
}

/// `[c_0, …, c_{k_max}]` in exact arithmetic.
pub fn gf_coeffs_exact(spec: &EnsembleSpec, k_max: usize) -> Result<Vec<BigRational>> {
    let a = log_coeffs_exact(spec, k_max)?;
    Ok(exp_series(&a, k_max + 1))
}

/// `p/q` (or `p` when `q = 1`).
pub fn format_rational(x: &BigRational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Nearest `f64` (truncated to 64 significant bits first), robust to
/// numerators and denominators beyond the `f64` range.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let n = x.numer().abs();
    let d = x.denom();
    let e = 64 - (n.bits() as i64 - d.bits() as i64);
    let q = if e >= 0 {
        (n << e as usize) / d
    } else {
        n / (d << (-e) as usize)
    };
    let half = (e / 2) as i32;
    let v = q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-half) * 2f64.powi(half - e as i32);
    if x.is_negative() {
        -v
    } else {
        v
    }
}
