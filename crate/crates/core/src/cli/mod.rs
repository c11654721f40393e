//! Command line front end. Every option can also be given in a flat
//! `key = value` file passed with `--config`; flags win over the file, the
//! file wins over built-in defaults. Keys are the long flag names with
//! dashes replaced by underscores.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::{QpatError, Result};
use crate::io::kv::KeyValues;

pub use commands::{cmd_error, cmd_forward, cmd_phantom, cmd_recon, cmd_stability};

#[derive(Debug, Parser)]
#[command(name = "qpat", version, about = "Local reconstruction of D and mu from photoacoustic internal data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize a preset phantom or import graymaps; writes D.fld and mu.fld.
    Phantom(PhantomArgs),
    /// Simulate internal data H1..H3 from D.fld and mu.fld.
    Forward(ForwardArgs),
    /// Reconstruct D and mu from H files and their manifest.
    Recon(ReconArgs),
    /// Relative l2 errors between reconstructed and true fields.
    Error(ErrorArgs),
    /// Tabulate the stability exponent and check that it decreases.
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// smooth-A, discontinuous-A or homogeneous [default: smooth-A]
    #[arg(long)]
    pub preset: Option<String>,
    /// Graymap replacing the preset D
    #[arg(long)]
    pub raster_d: Option<PathBuf>,
    /// Graymap replacing the preset mu
    #[arg(long)]
    pub raster_mu: Option<PathBuf>,
    /// Gray range of an imported D as `lo,hi` [default: 0.1,0.35]
    #[arg(long)]
    pub range_d: Option<String>,
    /// Gray range of an imported mu as `lo,hi` [default: 10,35]
    #[arg(long)]
    pub range_mu: Option<String>,
    /// Grid nodes per side [default: 512]
    #[arg(long)]
    pub n: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write graymaps next to the field files
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding D.fld and mu.fld
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulation grid [default: grid of the input fields]
    #[arg(long)]
    pub fine_n: Option<usize>,
    /// Measurement grid [default: half the simulation grid]
    #[arg(long)]
    pub meas_n: Option<usize>,
    /// Relative std of multiplicative noise [default: 0]
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Peak angles in radians, comma separated [default: 4pi/9,pi/2,5pi/9]
    #[arg(long)]
    pub peaks: Option<String>,
    /// Angular std of every illumination [default: 0.3]
    #[arg(long)]
    pub std: Option<f64>,
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct ReconArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding H1.fld.. and manifest.txt
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Constant boundary value of D [default: 0.2]
    #[arg(long)]
    pub boundary_d: Option<f64>,
    /// File of `angle value` lines giving D on the circle
    #[arg(long)]
    pub boundary_d_file: Option<PathBuf>,
    #[arg(long)]
    pub h1_threshold: Option<f64>,
    #[arg(long)]
    pub cond_threshold: Option<f64>,
    #[arg(long)]
    pub det_floor: Option<f64>,
    #[arg(long)]
    pub boundary_band: Option<f64>,
    #[arg(long)]
    pub smooth_width_data: Option<f64>,
    #[arg(long)]
    pub smooth_width_grad: Option<f64>,
    #[arg(long)]
    pub smooth_width_q: Option<f64>,
    #[arg(long)]
    pub boundary_anchor_weight: Option<f64>,
    #[arg(long)]
    pub n_path_starts: Option<usize>,
    /// `average` or `background` [default: average]
    #[arg(long)]
    pub completion: Option<String>,
    /// Background D and mu for `--completion background` as `d,mu` [default: 0.2,20]
    #[arg(long)]
    pub background: Option<String>,
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct ErrorArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Single reconstructed field (with --truth)
    #[arg(long)]
    pub recon: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Label of the single comparison [default: D]
    #[arg(long)]
    pub name: Option<String>,
    /// Directory with D_rec.fld and mu_rec.fld
    #[arg(long)]
    pub recon_dir: Option<PathBuf>,
    /// Directory with D.fld and mu.fld
    #[arg(long)]
    pub truth_dir: Option<PathBuf>,
    /// `all` or `y>VALUE` [default: y>0.2]
    #[arg(long)]
    pub region: Option<String>,
    /// Sample the truth onto the reconstruction grid instead of rejecting a mismatch
    #[arg(long)]
    pub resample: bool,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Outer radius; only scales alpha and beta [default: 1]
    #[arg(long)]
    pub r0: Option<f64>,
    /// Table rows, log-spaced from the largest admissible r down by eight decades [default: 20]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Radii in the monotonicity sweep [default: 1000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// CSV destination [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Values from `--config`, consulted when a flag is absent.
pub struct Settings {
    kv: KeyValues,
}

impl Settings {
    pub fn load(path: Option<&PathBuf>, allowed: &[&str]) -> Result<Self> {
        let kv = match path {
            Some(p) => {
                if !p.is_file() {
                    return Err(QpatError::config(format!("config file {} not found", p.display())));
                }
                KeyValues::read(p)?
            }
            None => KeyValues::new(),
        };
        kv.reject_unknown(allowed)?;
        Ok(Settings { kv })
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.kv.parsed(key),
        }
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.kv.parsed(key)?.unwrap_or(false))
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let name = match &cli.command {
        Command::Phantom(_) => "phantom",
        Command::Forward(_) => "forward",
        Command::Recon(_) => "recon",
        Command::Error(_) => "error",
        Command::Stability(_) => "stability",
    };
    let result = match cli.command {
        Command::Phantom(a) => cmd_phantom(&a),
        Command::Forward(a) => cmd_forward(&a),
        Command::Recon(a) => cmd_recon(&a),
        Command::Error(a) => cmd_error(&a),
        Command::Stability(a) => cmd_stability(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let QpatError::NotConverged { report, .. } = e.root() {
                eprintln!("solver report: {report}");
            }
            if let QpatError::Config(_) = e.root() {
                eprintln!("usage: qpat {name} [OPTIONS]; see 'qpat {name} --help'");
            }
            e.exit_code()
        }
    }
}
