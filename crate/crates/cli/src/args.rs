//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::emit::Format;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "cstk", version, about = "Lattice Chern-Simons toolkit for SU(2) on tori")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Grid as `n` (cube) or `n1,n2,...`; defaults depend on the command.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to CSTK_JOBS.
    #[arg(long, global = true, env = "CSTK_JOBS")]
    pub jobs: Option<usize>,
    /// TOML scenario file; explicit flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chern-Simons functional.
    #[command(subcommand)]
    Cs(CsCommand),
    /// Gauge-field utilities.
    #[command(subcommand)]
    Gauge(GaugeCommand),
    /// Holonomy.
    #[command(subcommand)]
    Hol(HolCommand),
    /// Representation varieties.
    #[command(subcommand)]
    Rep(RepCommand),
    /// Chern-Simons line bundles.
    #[command(subcommand)]
    Lines(LinesCommand),
    /// Lattice operators and spectra.
    #[command(subcommand)]
    Spec(SpecCommand),
}

#[derive(Debug, Subcommand)]
pub enum CsCommand {
    /// cs(A).
    Eval(ConnectionArg),
    /// cs(A·u) − cs(A) and its nearest integer.
    GaugeShift {
        #[command(flatten)]
        connection: ConnectionArg,
        #[command(flatten)]
        gauge: GaugeArg,
    },
    /// Degree of a gauge map.
    Degree(GaugeArg),
    /// Transgression identity on T⁴.
    ChernWeil(ConnectionArg),
}

#[derive(Debug, Args)]
pub struct ConnectionArg {
    /// Field file or built-in: zero, flat-constant, nonflat,
    /// constant:x,y,z;..., random:<amp>[:<modes>].
    #[arg(long)]
    pub connection: Option<String>,
}

#[derive(Debug, Args)]
pub struct GaugeArg {
    /// Field file or built-in: identity, bump-degree-1, random:<amp>[:<modes>].
    #[arg(long)]
    pub gauge: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum GaugeCommand {
    /// Gradient descent towards a flat connection.
    Flatten {
        #[command(flatten)]
        connection: ConnectionArg,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        /// Write the final connection as a field file.
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum HolCommand {
    /// Holonomy around one loop.
    Loop {
        #[command(flatten)]
        connection: ConnectionArg,
        /// Loop file or `axis:<k>` for the straight loop through the origin.
        #[arg(long = "loop")]
        loop_path: String,
        #[arg(long, default_value_t = 256)]
        steps: usize,
    },
    /// Holonomies of a flat connection around the coordinate loops.
    Rep {
        #[command(flatten)]
        connection: ConnectionArg,
        #[arg(long, default_value_t = 256)]
        steps: usize,
        /// Write the representation document here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PresentationArg {
    /// `<gens | relators>` or a bundled name (trefoil, poincare, z2, z3,
    /// genus2, free2).
    #[arg(long)]
    pub presentation: String,
}

#[derive(Debug, Subcommand)]
pub enum RepCommand {
    /// Irreducible classes found by seeded multi-start search.
    Solve {
        #[command(flatten)]
        presentation: PresentationArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Write the first class as a representation document.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Dimensions of H⁰, Z¹, B¹, H¹.
    Cohomology {
        #[command(flatten)]
        presentation: PresentationArg,
        /// Representation document, or `trivial`.
        #[arg(long)]
        rep: String,
        /// Also report the handlebody restriction image (surface groups).
        #[arg(long)]
        restriction: bool,
    },
    /// Number of irreducible classes.
    Count {
        #[command(flatten)]
        presentation: PresentationArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

#[derive(Debug, Args)]
pub struct PathArg {
    /// Directory of field files, or built-in: constant[:k], segment:<amp>[:k].
    #[arg(long)]
    pub path: String,
}

#[derive(Debug, Subcommand)]
pub enum LinesCommand {
    /// c_Σ at a random gauge map and the cocycle residual.
    CocycleCheck {
        #[command(flatten)]
        connection: ConnectionArg,
        /// Amplitude of the random infinitesimal gauge fields.
        #[arg(long, default_value_t = 0.8)]
        amplitude: f64,
    },
    /// Parallel transport along a path of connections.
    Pt(PathArg),
    /// Chern-Simons value of the cylinder connection.
    CylinderCs(PathArg),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OperatorKind {
    /// The odd signature operator.
    D,
    /// d_A ⊕ d_A* alone.
    DeRham,
    Laplacian0,
    Laplacian1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Dense,
    Iterative,
}

#[derive(Debug, Subcommand)]
pub enum SpecCommand {
    /// Kernel dimension and eigenvalues nearest zero.
    Kernel {
        #[command(flatten)]
        connection: ConnectionArg,
        #[arg(long, value_enum, default_value = "d")]
        operator: OperatorKind,
        #[arg(long, value_enum, default_value = "dense")]
        solver: SolverKind,
        /// Eigenvalues reported (nearest zero).
        #[arg(long, default_value_t = 24)]
        count: usize,
        /// |λ| below this counts as kernel.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write the matrix as coordinate triplets.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Spectral flow along a path of connections.
    Flow {
        #[command(flatten)]
        path: PathArg,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Fail instead of warning on coarse steps.
        #[arg(long)]
        strict: bool,
        /// Include ε and the eigenvalues of every sample.
        #[arg(long)]
        snapshots: bool,
    },
    /// Discrete eta sum.
    Eta {
        #[command(flatten)]
        connection: ConnectionArg,
        #[arg(long)]
        epsilon: Option<f64>,
    },
}
