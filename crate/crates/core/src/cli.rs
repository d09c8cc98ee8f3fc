//! Command-line front end. Each subcommand parses flags into library calls
//! and serializes the result; no computation happens here.
//!
//! Exit status: 0 on success, 1 on usage or domain errors, 2 when a
//! verification check fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::calibrate::{calibrate, closed_form_gamma_squared, gamma_squared};
use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::oracle::{exact_conditional, normalizer_table, normalizer_table_exact};
use crate::sampler::{GrandSampler, SamplerConfig, DEFAULT_SEED};
use crate::shape::{limit_curve, profile, scale, write_xy_csv};
use crate::verify::{
    check_llt, check_mean_error, check_shape_convergence, check_variance_profile, ShapeCheck,
    VerificationReport,
};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "EQUIPART_THREADS";

const CAL_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "equipart",
    version,
    about = "Random integer partitions under multiplicative measures with equiweighted parts",
    after_help = "Output formats:\n  json  one document per run (default)\n  csv   header row, dot decimal separator, newline-terminated rows\n\nExit status: 0 success, 1 usage/domain error, 2 failed verification."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for parallel sampling (0 = all cores).
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print γ, α = γ/√n and z = e^{-α}, plus the closed-form γ² when known.
    Calibrate {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Draw partitions from Q_z (or from P_n with --conditioned).
    Sample {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        replicas: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Condition on N_λ = n by rejection.
        #[arg(long)]
        conditioned: bool,
        /// Rejection cap per draw.
        #[arg(long, default_value_t = 100_000_000)]
        max_trials: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Limit-shape curve ω*(x), optionally with one sampled scaled profile.
    Shape {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0.0)]
        x_min: f64,
        #[arg(long, default_value_t = 5.0)]
        x_max: f64,
        #[arg(long, default_value_t = 501)]
        points: usize,
        /// Also write a sampled scaled profile to this CSV file.
        #[arg(long)]
        profile_out: Option<PathBuf>,
        #[arg(long)]
        conditioned: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Normalizers C_0..C_n, or the exact conditional law with --conditional.
    Oracle {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: u64,
        /// Rational arithmetic (parameters read as decimals).
        #[arg(long)]
        exact: bool,
        /// Print P_n(λ) for every λ ⊢ n (n ≤ 30).
        #[arg(long)]
        conditional: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a verification check and write its report.
    Verify {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum)]
        check: CheckName,
        /// Single n (llt, variance).
        #[arg(long, default_value_t = 500)]
        n: u64,
        /// Comma-separated n values (mean-error, shape).
        #[arg(long, value_delimiter = ',', default_values_t = [1000u64, 10_000, 100_000])]
        n_list: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        replicas: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Comma-separated x values (variance).
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        x_list: Vec<f64>,
        /// Include P_n rejection sampling (shape).
        #[arg(long)]
        conditioned: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckName {
    MeanError,
    Llt,
    Shape,
    Variance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyName {
    GeomPower,
    Binomial,
    ExpRational,
    ExpPower,
    ExpPolynomial,
    LogRatio,
    /// Explicit a_1, a_2, … via --log-coeffs.
    Raw,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyName,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Comma-separated a_1, a_2, … for --family raw.
    #[arg(long, value_delimiter = ',')]
    pub log_coeffs: Option<Vec<f64>>,
    /// Truncation of the a_k series for numerically summed families.
    #[arg(long)]
    pub cutoff_k: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn need<T>(v: Option<T>, flag: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("--family {family} requires --{flag}")))
}

impl FamilyArgs {
    pub fn spec(&self) -> Result<EnsembleSpec> {
        let name = self
            .family
            .to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default();
        let f = name.as_str();
        let spec = match self.family {
            FamilyName::GeomPower => {
                EnsembleSpec::geom_power(need(self.r, "r", f)?, need(self.rho, "rho", f)?)
            }
            FamilyName::Binomial => {
                EnsembleSpec::binomial(need(self.m, "m", f)?, need(self.rho, "rho", f)?)
            }
            FamilyName::ExpRational => {
                EnsembleSpec::exp_rational(need(self.b, "b", f)?, need(self.rho, "rho", f)?)
            }
            FamilyName::ExpPower => {
                EnsembleSpec::exp_power(need(self.r, "r", f)?, need(self.rho, "rho", f)?)
            }
            FamilyName::ExpPolynomial => {
                EnsembleSpec::exp_polynomial(need(self.m, "m", f)?, need(self.rho, "rho", f)?)
            }
            FamilyName::LogRatio => {
                EnsembleSpec::log_ratio(need(self.r, "r", f)?, need(self.rho, "rho", f)?)
            }
            FamilyName::Raw => EnsembleSpec::raw(need(self.log_coeffs.clone(), "log-coeffs", f)?),
        }?;
        match self.cutoff_k {
            Some(k) => spec.with_cutoff(k),
            None => Ok(spec),
        }
    }
}

impl OutputArgs {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn json(&self, value: &serde_json::Value) -> Result<()> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn csv(&self, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.writer()?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of a successful run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<Outcome> {
    if cli.threads > 0 {
        // a pool may already exist when run is called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match cli.command {
        Command::Calibrate { family, n, output } => {
            let spec = family.spec()?;
            let cal = calibrate(&spec, n, CAL_TOL)?;
            let g2 = gamma_squared(&spec, CAL_TOL)?;
            let closed = closed_form_gamma_squared(&spec);
            match output.format {
                Format::Json => output.json(&json!({
                    "spec": spec,
                    "n": n,
                    "gamma": cal.gamma,
                    "alpha": cal.alpha,
                    "z": cal.z,
                    "gamma_squared": g2.value,
                    "closed_form_gamma_squared": closed,
                }))?,
                Format::Csv => output.csv(
                    &["n", "gamma", "alpha", "z", "gamma_squared", "closed_form_gamma_squared"],
                    &[vec![
                        n.to_string(),
                        cal.gamma.to_string(),
                        cal.alpha.to_string(),
                        cal.z.to_string(),
                        g2.value.to_string(),
                        closed.map(|c| c.to_string()).unwrap_or_default(),
                    ]],
                )?,
            }
        }
        Command::Sample {
            family,
            n,
            replicas,
            seed,
            conditioned,
            max_trials,
            output,
        } => {
            let spec = family.spec()?;
            let cfg = SamplerConfig {
                seed,
                max_trials,
                ..SamplerConfig::with_seed(seed)
            };
            let cal = calibrate(&spec, n, CAL_TOL)?;
            let mut sampler = GrandSampler::new(&spec, &cal, &cfg)?;
            let mut draws = Vec::with_capacity(replicas as usize);
            for i in 0..replicas {
                let mut rng = cfg.rng(i);
                draws.push(if conditioned {
                    sampler.sample_conditioned(n, cfg.max_trials, &mut rng)?
                } else {
                    (sampler.sample(&mut rng)?, 1)
                });
            }
            match output.format {
                Format::Json => {
                    let items: Vec<_> = draws
                        .iter()
                        .map(|(p, t)| json!({"partition": p, "text": p.to_string(), "trials": t}))
                        .collect();
                    output.json(&json!({
                        "spec": spec,
                        "n": n,
                        "seed": seed,
                        "conditioned": conditioned,
                        "samples": items,
                    }))?
                }
                Format::Csv => output.csv(
                    &["replica", "total", "trials", "partition"],
                    &draws
                        .iter()
                        .enumerate()
                        .map(|(i, (p, t))| {
                            vec![i.to_string(), p.total().to_string(), t.to_string(), p.to_string()]
                        })
                        .collect::<Vec<_>>(),
                )?,
            }
        }
        Command::Shape {
            family,
            n,
            x_min,
            x_max,
            points,
            profile_out,
            conditioned,
            seed,
            output,
        } => {
            let spec = family.spec()?;
            let cal = calibrate(&spec, n, CAL_TOL)?;
            let curve = limit_curve(&spec, cal.gamma, x_min, x_max, points)?;
            if let Some(path) = profile_out {
                let cfg = SamplerConfig::with_seed(seed);
                let mut sampler = GrandSampler::new(&spec, &cal, &cfg)?;
                let mut rng = cfg.rng(0);
                let p = if conditioned {
                    sampler.sample_conditioned(n, cfg.max_trials, &mut rng)?.0
                } else {
                    sampler.sample(&mut rng)?
                };
                let mut w = BufWriter::new(File::create(path)?);
                scale(&profile(&p), n)?.write_csv(&mut w)?;
                w.flush()?;
            }
            match output.format {
                Format::Json => output.json(&json!({
                    "spec": spec,
                    "n": n,
                    "gamma": cal.gamma,
                    "curve": curve,
                }))?,
                Format::Csv => {
                    let mut w = output.writer()?;
                    write_xy_csv(&mut w, &curve)?;
                    w.flush()?;
                }
            }
        }
        Command::Oracle {
            family,
            n,
            exact,
            conditional,
            output,
        } => {
            let spec = family.spec()?;
            if conditional {
                let law = exact_conditional(&spec, n)?;
                match output.format {
                    Format::Json => {
                        let items: Vec<_> = law
                            .iter()
                            .map(|(p, q)| json!({"partition": p.to_string(), "probability": q}))
                            .collect();
                        output.json(&json!({"spec": spec, "n": n, "law": items}))?
                    }
                    Format::Csv => output.csv(
                        &["partition", "probability"],
                        &law.iter()
                            .map(|(p, q)| vec![p.to_string(), q.to_string()])
                            .collect::<Vec<_>>(),
                    )?,
                }
            } else {
                let table = if exact {
                    normalizer_table_exact(&spec, n as usize)?
                } else {
                    normalizer_table(&spec, n as usize)?
                };
                if !table.positivity.is_clean() {
                    eprintln!(
                        "warning: negative coefficients at k = {:?}, negative weights at n = {:?}",
                        table.positivity.negative_coefficients, table.positivity.negative_weights
                    );
                }
                match output.format {
                    Format::Json => output.json(&table.to_json())?,
                    Format::Csv => {
                        let mut w = output.writer()?;
                        table.write_csv(&mut w)?;
                        w.flush()?;
                    }
                }
            }
        }
        Command::Verify {
            family,
            check,
            n,
            n_list,
            replicas,
            seed,
            delta,
            epsilon,
            x_list,
            conditioned,
            output,
        } => {
            let spec = family.spec()?;
            let cfg = SamplerConfig::with_seed(seed);
            let report: VerificationReport = match check {
                CheckName::MeanError => check_mean_error(&spec, &n_list)?,
                CheckName::Llt => check_llt(&spec, n, replicas, &cfg)?,
                CheckName::Shape => check_shape_convergence(
                    &spec,
                    &n_list,
                    ShapeCheck {
                        replicas,
                        delta,
                        epsilon,
                        conditioned,
                    },
                    &cfg,
                )?,
                CheckName::Variance => check_variance_profile(&spec, n, &x_list, replicas, &cfg)?,
            };
            match output.format {
                Format::Json => output.json(&serde_json::to_value(&report)?)?,
                Format::Csv => {
                    let mut w = output.writer()?;
                    report.write_csv(&mut w)?;
                    w.flush()?;
                }
            }
            if !report.pass {
                return Ok(Outcome::VerificationFailed);
            }
        }
    }
    Ok(Outcome::Success)
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::VerificationFailed) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_family_flags() {
        let cli = Cli::try_parse_from([
            "equipart", "calibrate", "--family", "log-ratio", "--r", "1", "--rho", "0.5", "--n", "100",
        ])
        .unwrap();
        let Command::Calibrate { family, .. } = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(family.spec().unwrap(), EnsembleSpec::log_ratio(1.0, 0.5).unwrap());
    }

    #[test]
    fn missing_flag_is_named() {
        let cli = Cli::try_parse_from([
            "equipart", "calibrate", "--family", "binomial", "--rho", "1", "--n", "10",
        ])
        .unwrap();
        let Command::Calibrate { family, .. } = cli.command else {
            panic!("wrong subcommand")
        };
        let err = family.spec().unwrap_err().to_string();
        assert!(err.contains("--m"), "{err}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["equipart", "calibrate", "--family", "nope", "--n", "1"]), 1);
        assert_eq!(
            main_with_args(["equipart", "calibrate", "--family", "geom-power", "--r", "1", "--rho", "2", "--n", "5"]),
            1
        );
    }
}
