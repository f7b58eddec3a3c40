//! Command-line surface: every pipeline stage behind a subcommand with
//! file-based, byte-reproducible outputs.
//!
//! Exit codes: 0 on success, 2 on domain/validation errors, 3 on i/o
//! errors. File outputs are written to a temporary sibling and renamed on
//! success, so failures leave no partial files. `--out -` streams to
//! standard output.

use std::fs;
use std::io::Write;
use std::path::Path;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::analysis::{
    brute_force_law, fit_loglog, scaling_sweep, sup_distance, Column, ScalingRow, Statistic,
    SupResult, Target,
};
use crate::exact_law::{build_exact_law, fmt17};
use crate::expansion::{breakpoints, write_expansion_csv, ThetaWeights};
use crate::oscillatory::{
    lower_bound_witness, poisson_theta_pair, write_lambda_csv, KernelChoice, SeriesConfig,
};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "nonlattice",
    version,
    about = "Exact law, asymptotic expansion and oscillatory analysis of the self-normalized three-point statistic"
)]
pub struct RunConfig {
    /// Cap on worker threads (default: available cores; the DE_THREADS
    /// environment variable overrides the default). Results do not depend
    /// on the thread count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Export the exact law of W as CSV (w,sign,num,den,mass,cum)
    Law {
        /// sample size
        #[arg(long)]
        n: u64,
        /// output path, or - for stdout
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Sup-norm comparison of the law against both approximations (JSON)
    Compare {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 8.0)]
        w_max: f64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Scaling report CSV across a comma-separated list of sample sizes
    Scaling {
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        #[arg(long, default_value_t = 8.0)]
        w_max: f64,
        #[arg(long, default_value = "-")]
        out: String,
        /// also write a JSON log-log fit summary here
        #[arg(long)]
        fit_out: Option<String>,
    },
    /// Expansion values on a grid plus all breakpoints (CSV)
    Expansion {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = -8.0, allow_hyphen_values = true)]
        w_min: f64,
        #[arg(long, default_value_t = 8.0)]
        w_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Oscillatory-series curve (CSV w,lambda); defaults reproduce the
    /// classic N=100, M=10 illustration
    Figure1 {
        #[arg(long, default_value_t = 100)]
        n: u64,
        /// truncation order of the series
        #[arg(long, default_value_t = 10)]
        m: u32,
        #[arg(long, value_enum, default_value_t = KernelArg::Figure1)]
        kernel: KernelArg,
        #[arg(long, default_value_t = 0.05)]
        w_min: f64,
        #[arg(long, default_value_t = 2.34)]
        w_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Verify Poisson summation on seeded random inputs (CSV report)
    ThetaCheck {
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: u32,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Brute-force law over all 3^N sign tuples (CSV)
    Oracle {
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = StatArg::W)]
        statistic: StatArg,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Resonance witness for the lower-bound scan (JSON)
    Witness {
        #[arg(long)]
        n: u64,
        /// truncation override (default: floor(log N))
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, value_enum, default_value_t = KernelArg::Unit)]
        kernel: KernelArg,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Unit,
    Figure1,
}

impl From<KernelArg> for KernelChoice {
    fn from(value: KernelArg) -> Self {
        match value {
            KernelArg::Unit => KernelChoice::Unit,
            KernelArg::Figure1 => KernelChoice::Figure1,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatArg {
    W,
    #[value(name = "student-t")]
    StudentT,
}

impl From<StatArg> for Statistic {
    fn from(value: StatArg) -> Self {
        match value {
            StatArg::W => Statistic::W,
            StatArg::StudentT => Statistic::StudentT,
        }
    }
}

#[derive(Serialize)]
struct CompareReport {
    n: u64,
    w_max: f64,
    sup_f_psi: f64,
    argmax_psi: f64,
    upper_bound_psi: f64,
    sup_f_phi: f64,
    argmax_phi: f64,
    upper_bound_phi: f64,
    p0: f64,
    max_off_origin_mass: f64,
    n_breakpoints: u64,
}

#[derive(Serialize)]
struct FitReport {
    column: &'static str,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    residual_max: f64,
}

/// Execute one parsed command.
pub fn run(config: RunConfig) -> Result<()> {
    init_thread_pool(config.threads);
    match config.command {
        Command::Law { n, out } => {
            let law = build_exact_law(n)?;
            write_output(&out, |w| law.write_csv(w))
        }
        Command::Compare { n, w_max, out } => {
            let report = compare_report(n, w_max)?;
            write_output(&out, |w| write_json(w, &report))
        }
        Command::Scaling {
            n_list,
            w_max,
            out,
            fit_out,
        } => {
            let rows = scaling_sweep(&n_list, w_max)?;
            write_output(&out, |w| write_scaling_csv(w, &rows))?;
            if let Some(path) = fit_out {
                let fits: Vec<FitReport> = [Column::SupFPsi, Column::SupFPhi]
                    .into_iter()
                    .map(|col| {
                        fit_loglog(&rows, col).map(|fit| FitReport {
                            column: col.name(),
                            slope: fit.slope,
                            intercept: fit.intercept,
                            r_squared: fit.r_squared,
                            residual_max: fit.residual_max,
                        })
                    })
                    .collect::<Result<_>>()?;
                write_output(&path, |w| write_json(w, &fits))?;
            }
            Ok(())
        }
        Command::Expansion {
            n,
            w_min,
            w_max,
            step,
            out,
        } => {
            if n < 1 {
                return Err(Error::domain("expansion: N must be >= 1"));
            }
            let weights = ThetaWeights::new(n);
            write_output(&out, |w| {
                write_expansion_csv(&weights, w_min, w_max, step, w)
            })
        }
        Command::Figure1 {
            n,
            m,
            kernel,
            w_min,
            w_max,
            step,
            out,
        } => {
            if n < 3 || m < 1 {
                return Err(Error::domain("figure1: need N >= 3 and M >= 1"));
            }
            let cfg = SeriesConfig {
                truncation: m,
                kernel: kernel.into(),
            };
            write_output(&out, |w| write_lambda_csv(n, &cfg, w_min, w_max, step, w))
        }
        Command::ThetaCheck {
            tol,
            seed,
            samples,
            out,
        } => theta_check(tol, seed, samples, &out),
        Command::Oracle { n, statistic, out } => {
            let law = brute_force_law(n, statistic.into())?;
            write_output(&out, |w| law.write_csv(w))
        }
        Command::Witness { n, m, kernel, out } => {
            let mut cfg = SeriesConfig::for_sample_size(n).with_kernel(kernel.into());
            if let Some(m) = m {
                if m < 1 {
                    return Err(Error::domain("witness: M must be >= 1"));
                }
                cfg.truncation = m;
            }
            let witness = lower_bound_witness(n, &cfg)?;
            write_output(&out, |w| write_json(w, &witness))
        }
    }
}

fn compare_report(n: u64, w_max: f64) -> Result<CompareReport> {
    let law = build_exact_law(n)?;
    let weights = ThetaWeights::new(n);
    let bps = breakpoints(&weights, w_max);
    let psi_res: SupResult = sup_distance(&law, Target::Psi, w_max)?;
    let phi_res: SupResult = sup_distance(&law, Target::Phi, w_max)?;
    Ok(CompareReport {
        n,
        w_max,
        sup_f_psi: psi_res.sup,
        argmax_psi: psi_res.argmax,
        upper_bound_psi: psi_res.upper_bound,
        sup_f_phi: phi_res.sup,
        argmax_phi: phi_res.argmax,
        upper_bound_phi: phi_res.upper_bound,
        p0: law.origin_mass(),
        max_off_origin_mass: law.max_off_origin_mass(),
        n_breakpoints: bps.len() as u64,
    })
}

fn theta_check(tol: f64, seed: u64, samples: u32, out: &str) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "theta-check: tol = {tol} must be > 0"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(samples as usize);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        // z log-uniform over [1e-3, 10], b uniform over [0, 1)
        let z = 10f64.powf(rng.random_range(-3.0..1.0));
        let b: f64 = rng.random_range(0.0..1.0);
        let pair = poisson_theta_pair(z, b, tol)?;
        let diff = (pair.lhs - pair.rhs).norm();
        worst = worst.max(diff);
        rows.push((z, b, diff, pair));
    }
    write_output(out, |w| {
        writeln!(w, "z,b,abs_diff,lhs_re,rhs_re,lhs_radius,rhs_radius")?;
        for (z, b, diff, pair) in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt17(*z),
                fmt17(*b),
                fmt17(*diff),
                fmt17(pair.lhs.re),
                fmt17(pair.rhs.re),
                pair.lhs_radius,
                pair.rhs_radius
            )?;
        }
        Ok(())
    })?;
    if worst > tol {
        return Err(Error::domain(format!(
            "theta-check: worst |lhs - rhs| = {worst} exceeds tol = {tol}"
        )));
    }
    Ok(())
}

fn write_scaling_csv<W: Write>(mut out: W, rows: &[ScalingRow]) -> Result<()> {
    writeln!(
        out,
        "N,sup_f_psi,sup_f_phi,p0,max_off_origin_mass,n_breakpoints,runtime_ms"
    )?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.n,
            fmt17(row.sup_f_psi),
            fmt17(row.sup_f_phi),
            fmt17(row.p0),
            fmt17(row.max_off_origin_mass),
            row.n_breakpoints,
            row.runtime_ms
        )?;
    }
    Ok(())
}

fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(out)?;
    Ok(())
}

fn init_thread_pool(threads: Option<usize>) {
    let from_env = std::env::var("DE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(count) = threads.or(from_env) {
        // a second initialization (e.g. in tests) is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(count.max(1))
            .build_global();
    }
}

// Stream to stdout for "-", otherwise write a temporary sibling file and
// rename it into place so failures leave nothing behind.
fn write_output<F>(target: &str, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    if target == "-" {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        body(&mut lock)?;
        lock.flush()?;
        return Ok(());
    }
    let path = Path::new(target);
    let tmp_path = {
        let mut name = path
            .file_name()
            .ok_or_else(|| Error::domain(format!("invalid output path: {target}")))?
            .to_os_string();
        name.push(".tmp");
        path.with_file_name(name)
    };
    let result = (|| -> Result<()> {
        let mut file = std::io::BufWriter::new(fs::File::create(&tmp_path)?);
        body(&mut file)?;
        file.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            fs::rename(&tmp_path, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp_path);
            Err(e)
        }
    }
}
