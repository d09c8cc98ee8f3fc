//! Young-diagram profiles `Y_λ(x) = Σ_{ℓ ≥ x} ν_ℓ`, their scaling
//! `Ỹ(x) = n^{-1/2} Y(x√n)`, the limit shape `ω*(x) = γ^{-1} H₀(e^{-γx})`
//! and sup-norm distances between the two.
//!
//! `Y_λ` is constant on `(ℓ_i, ℓ_{i+1}]` between consecutive part sizes;
//! at an integer `x` the term `ℓ = x` is included.

use std::io::Write;

use crate::ensembles::EnsembleSpec;
use crate::error::{domain, Result};
use crate::partition::Partition;
use crate::special::{integrate_to_infinity, CompensatedSum};

/// Step-function profile of a partition, possibly scaled.
///
/// Stored in raw (cell) coordinates with the scaling weight kept separately,
/// so areas stay exact.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    /// `(x_i, y_i)` with `x_0 = 0`; the value is `y_i` on `(x_i, x_{i+1}]`,
    /// and `y_0` at `x = 0`. The last `y` is 0.
    raw: Vec<(u64, u64)>,
    source_n: u64,
}

/// Unscaled profile of `p`.
pub fn profile(p: &Partition) -> Profile {
    let mut remaining = p.num_parts();
    let mut raw = vec![(0, remaining)];
    for (&l, &m) in p.counts() {
        remaining -= m;
        raw.push((l, remaining));
    }
    Profile { raw, source_n: 1 }
}

/// `Ỹ(x) = n^{-1/2} Y(x√n)`; composes multiplicatively.
pub fn scale(prof: &Profile, n: u64) -> Result<Profile> {
    if n == 0 {
        return Err(domain("scaling weight must be positive"));
    }
    let source_n = prof
        .source_n
        .checked_mul(n)
        .ok_or_else(|| domain("scaling weight overflows u64"))?;
    Ok(Profile {
        raw: prof.raw.clone(),
        source_n,
    })
}

impl Profile {
    pub fn source_n(&self) -> u64 {
        self.source_n
    }

    fn unit(&self) -> f64 {
        (self.source_n as f64).sqrt()
    }

    /// Breakpoints in scaled coordinates.
    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        let s = self.unit();
        self.raw
            .iter()
            .map(|&(x, y)| (x as f64 / s, y as f64 / s))
            .collect()
    }

    /// Value at `x` (scaled coordinates).
    pub fn eval(&self, x: f64) -> f64 {
        let t = x * self.unit();
        // index of the largest x_i < t, or 0
        let i = self.raw.partition_point(|&(xi, _)| (xi as f64) < t);
        self.raw[i.saturating_sub(1)].1 as f64 / self.unit()
    }

    /// `∫ Y dx` in raw cells, i.e. `N_λ`.
    pub fn raw_area(&self) -> u64 {
        self.raw
            .windows(2)
            .map(|w| w[0].1 * (w[1].0 - w[0].0))
            .sum()
    }

    /// `∫ Ỹ dx = N_λ / source_n`.
    pub fn area(&self) -> f64 {
        self.raw_area() as f64 / self.source_n as f64
    }

    /// CSV with header `x,y`, one row per breakpoint.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_xy_csv(writer, &self.breakpoints())
    }
}

/// `ω*(x) = γ^{-1} H₀(e^{-γx})`; `+∞` at `x = 0` when `H₀(1) = ∞`.
pub fn limit_shape(spec: &EnsembleSpec, gamma: f64, x: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma must be positive, got {gamma}")));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("x must be nonnegative, got {x}")));
    }
    if x == 0.0 && spec.h0_unbounded_at_one() {
        return Ok(f64::INFINITY);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(spec.h0_exp_neg(gamma * x) / gamma)
}

/// `(x, ω*(x))` on `points` equally spaced abscissae in `[x_min, x_max]`.
pub fn limit_curve(
    spec: &EnsembleSpec,
    gamma: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(x_min >= 0.0 && x_max > x_min) || points < 2 {
        return Err(domain("curve grid needs 0 <= x_min < x_max and at least 2 points"));
    }
    let h = (x_max - x_min) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let x = x_min + h * i as f64;
            Ok((x, limit_shape(spec, gamma, x)?))
        })
        .collect()
}

/// `∫_0^∞ ω*(x) dx` by quadrature, splitting at `x = 1` and using
/// `x = e^{-s}` on `(0, 1]` to absorb the singularity at 0.
pub fn limit_shape_area(spec: &EnsembleSpec, gamma: f64, tol: f64) -> Result<f64> {
    limit_shape(spec, gamma, 1.0)?;
    let w = |x: f64| spec.h0_exp_neg(gamma * x) / gamma;
    let head = integrate_to_infinity(
        |s| {
            let x = (-s).exp();
            if x == 0.0 {
                0.0
            } else {
                w(x) * x
            }
        },
        0.0,
        0.5 * tol,
    )?;
    let tail = integrate_to_infinity(w, 1.0, 0.5 * tol)?;
    Ok(head.value + tail.value)
}

/// `sup_{x ≥ δ} |Ỹ(x) - ω*(x)|`.
///
/// On each constancy interval the step value is compared with `ω*` at both
/// ends (monotonicity of `ω*` makes that exact); beyond the largest part the
/// profile is 0 and the sup is `ω*` at the interval start. A uniform grid of
/// step `grid_step` is scanned as well.
pub fn sup_distance(
    scaled: &Profile,
    spec: &EnsembleSpec,
    gamma: f64,
    delta: f64,
    grid_step: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    if !(grid_step > 0.0) {
        return Err(domain(format!("grid step must be positive, got {grid_step}")));
    }
    let omega = |x: f64| limit_shape(spec, gamma, x);
    let bp = scaled.breakpoints();
    let mut sup: f64 = 0.0;
    for (i, &(a, y)) in bp.iter().enumerate() {
        let b = bp.get(i + 1).map_or(f64::INFINITY, |p| p.0);
        if b < delta {
            continue;
        }
        let a = a.max(delta);
        sup = sup.max((y - omega(a)?).abs());
        if b.is_finite() {
            sup = sup.max((y - omega(b)?).abs());
        }
    }
    let x_last = bp.last().map_or(0.0, |p| p.0);
    let mut x = delta;
    let mut steps = 0u64;
    loop {
        let w = omega(x)?;
        sup = sup.max((scaled.eval(x) - w).abs());
        if x > x_last && w < grid_step {
            break;
        }
        steps += 1;
        if steps > 10_000_000 {
            break;
        }
        x = delta + grid_step * steps as f64;
    }
    Ok(sup)
}

/// Writes `x,y` rows with a header.
pub fn write_xy_csv<W: Write>(writer: W, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y"])?;
    for &(x, y) in rows {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Trapezoidal area of sampled `(x, y)` pairs; used for quick sanity checks
/// on exported curves.
pub fn trapezoid_area(rows: &[(f64, f64)]) -> f64 {
    rows.windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .collect::<CompensatedSum>()
        .value()
}
