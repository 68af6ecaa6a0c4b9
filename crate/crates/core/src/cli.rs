//! Command-line surface behind the `pdm` binary.
//!
//! Exit codes: 0 success, 1 malformed input, 2 a check or experiment failed.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkers::{
    check_delta_eq, check_delta_pme, check_ime, check_lindahl, check_me, check_pme, default_tol,
    lindahl_prices, EquilibriumReport,
};
use crate::error::{Error, Result};
use crate::expansion::{reduce_instance, FisherInstance, PairwiseIndex};
use crate::experiments::{run_experiment, Experiment, ExperimentParams};
use crate::generate::{random_instance, RandomConfig};
use crate::io::{certificate_from_json, fisher_from_json, fisher_to_json, pdm_from_json, pdm_to_json, Certificate};
use crate::model::{build_phi, PdmInstance, PriceSystem, UtilityClass};
use crate::solver::{solve_fisher_eg, solve_pdm_nash};
use crate::tatonnement::{run_fisher_tatonnement, run_lifted_tatonnement, TatonnementConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MALFORMED: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pdm", version, about = "Equilibria for binary-issue public decision markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum Nash welfare equilibrium of an instance.
    Solve {
        #[arg(value_enum)]
        kind: MarketKind,
        /// Instance JSON, `-` for stdin.
        input: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Pairwise issue expansion of a PDM into a Fisher market.
    Reduce {
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Verify an equilibrium certificate.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        /// Instance JSON (PDM, or Fisher for `me` and `delta-eq`).
        #[arg(long)]
        instance: PathBuf,
        /// Certificate JSON: allocation, prices and optionally the outcome.
        /// A solve result is accepted as is.
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run tâtonnement; writes a CSV trace and prints a JSON summary.
    Tat {
        #[arg(value_enum)]
        kind: MarketKind,
        /// Instance JSON (Fisher for `fisher`, PDM for `lifted`).
        #[arg(long)]
        instance: PathBuf,
        /// Configuration JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate instances.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
    /// Scripted reproductions; prints a JSON array of reports.
    Experiment {
        #[arg(value_parser = parse_experiment)]
        id: Experiment,
        /// Sizes: `10`, `3,5,10` or `3..6` (inclusive). Batch experiments read it as the largest n.
        #[arg(long, default_value = "5", value_parser = parse_range)]
        n: NRange,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        rho: f64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// The Φ(n, w) family.
    Phi {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        w: f64,
        #[arg(long, value_enum, default_value = "linear")]
        class: ClassArg,
        #[arg(long, allow_negative_numbers = true)]
        rho: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Seeded random instance.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        n_max: usize,
        #[arg(long, default_value_t = 4)]
        m_max: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Write to this file instead of stdout.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarketKind {
    Pdm,
    Fisher,
    Lifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Me,
    Ime,
    Pme,
    DeltaEq,
    DeltaPme,
    Lindahl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    Linear,
    Leontief,
    CobbDouglas,
    Ces,
}

impl From<ClassArg> for UtilityClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Linear => UtilityClass::Linear,
            ClassArg::Leontief => UtilityClass::Leontief,
            ClassArg::CobbDouglas => UtilityClass::CobbDouglas,
            ClassArg::Ces => UtilityClass::Ces,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NRange(pub Vec<usize>);

fn parse_experiment(s: &str) -> std::result::Result<Experiment, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> std::result::Result<NRange, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad size `{t}`: {e}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok(NRange((a..=b).collect()));
    }
    s.split(',').map(num).collect::<std::result::Result<_, _>>().map(NRange)
}

fn read_input(path: &Path) -> Result<String> {
    let mut s = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::InvalidInstance(format!("stdin: {e}")))?;
    } else {
        s = fs::read_to_string(path).map_err(|e| Error::InvalidInstance(format!("{}: {e}", path.display())))?;
    }
    Ok(s)
}

fn emit(out: &OutArg, text: &str) -> Result<()> {
    match &out.out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}").map_err(|e| Error::InvalidConfig(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

/// Parse argv and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_MALFORMED } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_MALFORMED
        }
    }
}

/// `Ok(false)` means a check or experiment ran and failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { kind, input, tol, out } => {
            let tol = tol.unwrap_or_else(default_tol);
            let text = read_input(&input)?;
            let res = match kind {
                MarketKind::Pdm => solve_pdm_nash(&pdm_from_json(&text)?, tol)?,
                MarketKind::Fisher => solve_fisher_eg(&fisher_from_json(&text)?, tol)?,
                MarketKind::Lifted => return Err(Error::InvalidConfig("solve takes pdm or fisher".into())),
            };
            emit(&out, &to_json(&res))?;
            Ok(true)
        }
        Command::Reduce { input, out } => {
            let pdm = pdm_from_json(&read_input(&input)?)?;
            emit(&out, &fisher_to_json(&reduce_instance(&pdm)))?;
            Ok(true)
        }
        Command::Check { kind, instance, certificate, tol, delta, out } => {
            let tol = tol.unwrap_or_else(default_tol);
            let text = read_input(&instance)?;
            let cert = certificate_from_json(&read_input(&certificate)?)?;
            let report = run_check(kind, &text, &cert, tol, delta)?;
            emit(&out, &to_json(&report))?;
            Ok(report.verdict)
        }
        Command::Tat { kind, instance, config, trace, out } => {
            let cfg: TatonnementConfig = match config {
                Some(p) => serde_json::from_str(&read_input(&p)?)
                    .map_err(|e| Error::InvalidConfig(format!("tatonnement config: {e}")))?,
                None => TatonnementConfig::default(),
            };
            let text = read_input(&instance)?;
            let (run_trace, summary) = match kind {
                MarketKind::Fisher => {
                    let t = run_fisher_tatonnement(&fisher_from_json(&text)?, &cfg)?;
                    let s = t.summary(cfg.delta);
                    (t, s)
                }
                MarketKind::Lifted | MarketKind::Pdm => {
                    let r = run_lifted_tatonnement(&pdm_from_json(&text)?, &cfg)?;
                    let s = r.summary(cfg.delta);
                    (r.trace, s)
                }
            };
            if let Some(p) = trace {
                let f = fs::File::create(&p).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
                run_trace.write_csv(f).map_err(|e| Error::InvalidConfig(format!("trace: {e}")))?;
            }
            emit(&out, &to_json(&summary))?;
            let pme_ok = summary.pme_report.as_ref().map_or(true, |r| r.verdict);
            Ok(summary.converged && pme_ok)
        }
        Command::Gen { what } => {
            match what {
                GenCommand::Phi { n, w, class, rho, out } => {
                    emit(&out, &pdm_to_json(&build_phi(n, w, class.into(), rho)?))?;
                }
                GenCommand::Random { seed, n_max, m_max, out } => {
                    let cfg = RandomConfig::sized(n_max, m_max);
                    if n_max < cfg.n_min || m_max < 1 {
                        return Err(Error::InvalidConfig("n-max must be >= 2 and m-max >= 1".into()));
                    }
                    emit(&out, &pdm_to_json(&random_instance(seed, &cfg)))?;
                }
            }
            Ok(true)
        }
        Command::Experiment { id, n, eps, rho, count, seed, tol, out } => {
            let params = ExperimentParams { eps, rho, count, seed, tol };
            let reports = n.0.iter().map(|&k| run_experiment(id, k, &params)).collect::<Result<Vec<_>>>()?;
            emit(&out, &to_json(&reports))?;
            Ok(reports.iter().all(|r| r.pass))
        }
    }
}

/// Personalized prices and issue bundles from a certificate. A reduced-market
/// certificate (per-good prices over the pairwise goods) is projected first.
fn pdm_certificate(pdm: &PdmInstance, cert: &Certificate) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    match &cert.prices {
        PriceSystem::Personalized(p) => Ok((cert.allocation.clone(), p.clone())),
        PriceSystem::PerIssue(p) => Ok((cert.allocation.clone(), vec![p.clone(); pdm.n])),
        PriceSystem::PerGood(p) => {
            let idx = PairwiseIndex::new(pdm);
            if p.len() != idx.good_count() || cert.allocation.len() != pdm.n {
                return Err(Error::DimensionMismatch { expected: idx.good_count(), got: p.len() });
            }
            for row in &cert.allocation {
                if row.len() != idx.good_count() {
                    return Err(Error::DimensionMismatch { expected: idx.good_count(), got: row.len() });
                }
            }
            let bundles = (0..pdm.n).map(|i| idx.project(i, &cert.allocation[i])).collect();
            Ok((bundles, idx.project_prices(p)))
        }
    }
}

fn flat_prices(cert: &Certificate) -> Result<&[f64]> {
    match &cert.prices {
        PriceSystem::PerGood(p) | PriceSystem::PerIssue(p) => Ok(p),
        PriceSystem::Personalized(_) => Err(Error::InvalidInstance("expected one price per good".into())),
    }
}

pub fn run_check(kind: CheckKind, instance: &str, cert: &Certificate, tol: f64, delta: f64) -> Result<EquilibriumReport> {
    match kind {
        CheckKind::Me | CheckKind::DeltaEq => {
            let fisher: FisherInstance = fisher_from_json(instance)?;
            let p = flat_prices(cert)?;
            if kind == CheckKind::Me {
                check_me(&fisher, &cert.allocation, p, tol)
            } else {
                check_delta_eq(&fisher, &cert.allocation, p, delta)
            }
        }
        CheckKind::Ime => {
            let pdm = pdm_from_json(instance)?;
            check_ime(&pdm, &cert.allocation, flat_prices(cert)?, tol)
        }
        CheckKind::Pme | CheckKind::DeltaPme => {
            let pdm = pdm_from_json(instance)?;
            let (bundles, prices) = pdm_certificate(&pdm, cert)?;
            if kind == CheckKind::Pme {
                check_pme(&pdm, &bundles, &prices, tol)
            } else {
                check_delta_pme(&pdm, &bundles, &prices, delta)
            }
        }
        CheckKind::Lindahl => {
            let pdm = pdm_from_json(instance)?;
            let (bundles, prices) = pdm_certificate(&pdm, cert)?;
            let outcome = match &cert.outcome {
                Some(o) => o.clone(),
                None => check_pme(&pdm, &bundles, &prices, tol)?
                    .witness
                    .ok_or_else(|| Error::InvalidInstance("certificate has no outcome".into()))?,
            };
            check_lindahl(&pdm, &outcome, &lindahl_prices(&pdm, &prices), tol)
        }
    }
}
