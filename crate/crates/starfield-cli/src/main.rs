//! `starfield` — derive phase-space evolution equations from Hamiltonian
//! symbols, integrate them on a grid, and compare against closed-form
//! references.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical instability,
//! 4 complementarity (symbol-pairing) violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

mod commands;
mod config;
mod jsonfmt;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input file (exit 2).
    Config(String),
    /// I/O failure (exit 2).
    Io(std::io::Error),
    /// Wick/anti-Wick pairing violation (exit 4).
    Pairing(String),
    /// Library error; instability maps to exit 3, complementarity to 4,
    /// the rest to 2.
    Lib(starfield::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Pairing(msg) => write!(f, "complementarity violation: {msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Pairing(_) => 4,
            CliError::Lib(starfield::Error::Instability { .. }) => 3,
            CliError::Lib(starfield::Error::Complementarity { .. }) => 4,
            CliError::Lib(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "starfield", version, about = "Phase-space symbol calculus and distribution dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the evolution scheme from the config (Q or P).
    #[arg(long)]
    scheme: Option<String>,
    /// Override omega0 from the config.
    #[arg(long)]
    omega0: Option<f64>,
    /// Override mu from the config.
    #[arg(long)]
    mu: Option<f64>,
    /// Override the integrator time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the integration end time.
    #[arg(long)]
    t_final: Option<f64>,
    /// Deliberately pair a same-type Hamiltonian symbol with the scheme
    /// (converted through the Berezin transform); reproduces the spurious
    /// drift of a mismatched quantization.
    #[arg(long, default_value_t = false)]
    i_know_this_is_wick: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<(RunConfig, PathBuf), CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(scheme) = &self.scheme {
            cfg.scheme = match scheme.as_str() {
                "Q" | "q" => config::SchemeTag::Q,
                "P" | "p" => config::SchemeTag::P,
                other => return Err(CliError::Config(format!("unknown scheme '{other}'"))),
            };
        }
        if let Some(w0) = self.omega0 {
            cfg.hamiltonian.omega0 = w0;
        }
        if let Some(mu) = self.mu {
            cfg.hamiltonian.mu = mu;
        }
        if let Some(dt) = self.dt {
            if let Some(int) = cfg.integrator.as_mut() {
                int.dt = dt;
            } else {
                return Err(CliError::Config("--dt given but config has no integrator".into()));
            }
        }
        if let Some(t) = self.t_final {
            if let Some(int) = cfg.integrator.as_mut() {
                int.t_final = t;
            } else {
                return Err(CliError::Config(
                    "--t-final given but config has no integrator".into(),
                ));
            }
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| {
                CliError::Config("no output directory (set output_dir or pass --out)".into())
            })?;
        Ok((cfg, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Derive the evolution series, Fokker-Planck coefficients and
    /// beyond-diffusion blocks; write eom.json, fp.json, summary.txt.
    Derive {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Integrate the derived equation on a grid; write snapshot CSVs and a
    /// manifest, optionally with an exact-reference error track.
    Evolve {
        #[command(flatten)]
        args: ConfigArgs,
        /// Attach error-vs-time data against the closed-form reference
        /// (builtin Hamiltonians only).
        #[arg(long, default_value_t = false)]
        compare_oracle: bool,
    },
    /// Side-by-side drift comparison of the normal-ordered and
    /// anti-Wick-quantized anharmonic oscillator.
    Milburn {
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        omega0: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also integrate both branches and report evolved-grid differences.
        #[arg(long, default_value_t = false)]
        evolve: bool,
        #[arg(long, default_value_t = 1.0)]
        alpha0_re: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha0_im: f64,
        /// Half-extent of the square (q, p) grid for --evolve.
        #[arg(long, default_value_t = 7.8)]
        grid_ext: f64,
        #[arg(long, default_value_t = 41)]
        grid_n: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Comma-separated comparison times (dimensionless).
        #[arg(long, default_value = "0.1,0.2")]
        tau_list: String,
    },
    /// Ehrenfest residuals of an observable along an integrated trajectory.
    Ehrenfest {
        #[command(flatten)]
        args: ConfigArgs,
        /// Observable symbol (JSON), complementary to the scheme.
        #[arg(long)]
        observable: PathBuf,
    },
    /// Evaluate a closed-form reference distribution on a grid.
    Oracle {
        /// "harmonic" or "anharmonic" (rotating frame).
        #[arg(long)]
        kind: String,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha0_re: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha0_im: f64,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        /// Half-extent of the square (q, p) grid.
        #[arg(long, default_value_t = 9.2)]
        grid_ext: f64,
        #[arg(long, default_value_t = 121)]
        grid_n: usize,
        /// Output CSV path (a JSON sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Ad-hoc star products, brackets and Berezin transforms on symbol JSON
    /// files.
    Symbol {
        /// star-wick | star-antiwick | bracket-wick | bracket-antiwick |
        /// berezin-forward | berezin-inverse
        #[arg(long)]
        op: String,
        #[arg(long)]
        lhs: PathBuf,
        #[arg(long)]
        rhs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_tau_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad tau value '{s}'")))
        })
        .collect()
}

/// `STARFIELD_THREADS` caps internal parallelism. The grid kernels are
/// currently single-threaded, so any valid cap is honored trivially; the
/// variable is still validated so configs stay portable.
fn check_thread_cap() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("STARFIELD_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| CliError::Config(format!("STARFIELD_THREADS must be a positive integer (got '{raw}')")))?;
        if n == 0 {
            return Err(CliError::Config("STARFIELD_THREADS must be at least 1".into()));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    check_thread_cap()?;
    match cli.command {
        Command::Derive { args } => {
            let (cfg, out) = args.load()?;
            commands::cmd_derive(&cfg, &out, args.i_know_this_is_wick)
        }
        Command::Evolve {
            args,
            compare_oracle,
        } => {
            let (cfg, out) = args.load()?;
            commands::cmd_evolve(&cfg, &out, compare_oracle, args.i_know_this_is_wick)
        }
        Command::Milburn {
            mu,
            omega0,
            out,
            evolve,
            alpha0_re,
            alpha0_im,
            grid_ext,
            grid_n,
            dt,
            tau_list,
        } => {
            let evolve_opts = if evolve {
                Some(commands::MilburnEvolveOptions {
                    alpha0: Complex64::new(alpha0_re, alpha0_im),
                    grid_ext,
                    grid_n,
                    dt,
                    taus: parse_tau_list(&tau_list)?,
                })
            } else {
                None
            };
            commands::cmd_milburn(mu, omega0, &out, evolve_opts)
        }
        Command::Ehrenfest { args, observable } => {
            let (cfg, out) = args.load()?;
            commands::cmd_ehrenfest(&cfg, &observable, &out, args.i_know_this_is_wick)
        }
        Command::Oracle {
            kind,
            tau,
            alpha0_re,
            alpha0_im,
            mu,
            grid_ext,
            grid_n,
            out,
        } => {
            let kind = match kind.as_str() {
                "harmonic" => commands::OracleKind::Harmonic,
                "anharmonic" => commands::OracleKind::Anharmonic,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown oracle kind '{other}' (harmonic, anharmonic)"
                    )))
                }
            };
            let spec = starfield::pde::GridSpec::square(grid_ext, grid_n);
            commands::cmd_oracle(
                kind,
                tau,
                Complex64::new(alpha0_re, alpha0_im),
                mu,
                &spec,
                &out,
            )
        }
        Command::Symbol { op, lhs, rhs, out } => {
            commands::cmd_symbol(&op, &lhs, rhs.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("starfield: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
