use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

/// NNGP and NTK kernels of deep fully connected networks: dual activations,
/// spectra on spheres, decay predictions, GP paths and Monte-Carlo checks.
#[derive(Parser)]
#[command(name = "nk", version)]
pub struct Cli {
    /// Worker threads, 0 = all cores. Falls back to NK_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Flat JSON object of parameter defaults, keyed by flag name.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory. Without it, results are written to stdout and no
    /// manifest is produced.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone, Default)]
pub struct ActArgs {
    /// Activation name, e.g. relu, elu, repu:2, sk:1, poly:0,0,1.
    #[arg(long)]
    pub act: Option<String>,

    /// Same as --act.
    #[arg(value_name = "ACTIVATION", conflicts_with = "act")]
    pub activation: Option<String>,

    /// Activation parameter, repeatable (e.g. --param alpha=0.5).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Args, Clone, Default)]
pub struct NetArgs {
    /// Number of layers L.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, visible_alias = "sw2")]
    pub sigma_w2: Option<f64>,
    #[arg(long, visible_alias = "sb2")]
    pub sigma_b2: Option<f64>,
    #[arg(long, visible_alias = "si2")]
    pub sigma_i2: Option<f64>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Smoothness report (overall, even part, odd part) as JSON.
    Classify {
        #[command(flatten)]
        act: ActArgs,
    },
    /// Hermite coefficients a_0..a_N as CSV (n,a_n).
    Hermite {
        #[command(flatten)]
        act: ActArgs,
        /// Highest coefficient index N.
        #[arg(long, visible_alias = "n-coeffs")]
        n: Option<usize>,
        /// Gauss–Legendre nodes per half-line.
        #[arg(long)]
        half_nodes: Option<usize>,
        /// Half-line cutoff in standard deviations.
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Dual activation on a grid of [-1, 1] as CSV (t,dual).
    Dual {
        #[command(flatten)]
        act: ActArgs,
        /// quadrature, hermite or closed-form.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        n_coeffs: Option<usize>,
        /// Grid as n or t0:t1:n.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// NNGP or NTK on a grid of [-1, 1] as CSV (t,kappa).
    Kernel {
        #[command(flatten)]
        act: ActArgs,
        #[command(flatten)]
        net: NetArgs,
        /// nngp or ntk.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        backend: Option<String>,
        /// Grid as n or t0:t1:n.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Eigenvalues on S^d as CSV (l,mu,multiplicity,parity,is_zero).
    Spectrum {
        #[command(flatten)]
        act: ActArgs,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, visible_alias = "lmax")]
        l_max: Option<usize>,
        #[arg(long, visible_alias = "nquad")]
        n_quad: Option<usize>,
    },
    /// Power-law fit of a spectrum CSV as JSON.
    Fit {
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// Sphere dimension; inferred from the multiplicities when omitted.
        #[arg(long)]
        d: Option<usize>,
        /// even, odd or all.
        #[arg(long)]
        parity: Option<String>,
        /// Degree window lo:hi.
        #[arg(long)]
        window: Option<String>,
    },
    /// Predicted eigenvalue decay as JSON.
    Predict {
        #[command(flatten)]
        act: ActArgs,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        parity: Option<String>,
    },
    /// A GP sample path from a spectrum CSV, as CSV (x0,..,xd,f).
    Paths {
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Points on S¹, or latitudes on S² (with twice as many longitudes).
        #[arg(long)]
        grid: Option<usize>,
        /// Highest degree in the path expansion.
        #[arg(long)]
        l_max: Option<usize>,
    },
    /// Sobolev-norm series verdicts over a range of orders, as CSV
    /// (r,verdict,tail_exponent).
    Sobolev {
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        /// Orders a:b:n.
        #[arg(long)]
        r_range: Option<String>,
    },
    /// Finite-width Monte-Carlo estimates against the analytic kernels, as JSON.
    McValidate {
        #[command(flatten)]
        act: ActArgs,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of point pairs.
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Spectra, fits and predictions behind the two eigenvalue figures.
    Figures {
        /// fig1 (five activations, L = 3, NNGP and NTK) or fig2 (two-layer
        /// NTKs with and without bias).
        which: String,
        #[arg(long, visible_alias = "lmax")]
        l_max: Option<usize>,
        #[arg(long, visible_alias = "nquad")]
        n_quad: Option<usize>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|e| e.downcast_ref::<nk_core::Error>().is_some_and(|e| e.is_numerical()));
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("nk: error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
