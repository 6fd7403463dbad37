use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "magbill", version, about = "Magnetic billiards: simulation, portraits and integrability checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the billiard from a state or a Larmor center and write the orbit CSV.
    Simulate(SimulateArgs),
    /// Center orbits from seeded starts, as CSV and optionally SVG.
    Portrait(PortraitArgs),
    /// Numeric checks; each writes a JSON report and exits 1 when it fails.
    Check {
        #[command(subcommand)]
        check: CheckCommand,
    },
    /// The offset curve of an ellipse and its singularities.
    Offset(OffsetArgs),
    /// Iterate the outer magnetic billiard.
    Outer(OuterArgs),
    /// Lyapunov exponents of the center map from seeded starts.
    Lyapunov(LyapunovArgs),
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Invariance of a velocity-polynomial integral along the billiard.
    Integral(IntegralArgs),
    /// Constancy of H(F) + beta |grad F|^3 along a parallel curve.
    Remarkable(RemarkableArgs),
    /// Third-order grazing expansion against its closed form.
    Rem1(Rem1Args),
    /// Outer billiard on the inner parallel curve against the center map.
    Equivalence(EquivalenceArgs),
}

#[derive(Debug, Args)]
pub struct Field {
    /// Boundary spec: circle:d=.., ellipse:a=..,b=.. or fourier:base=..,terms=k:amp:phase;..
    #[arg(long, default_value = "circle:d=2")]
    pub boundary: String,
    /// Magnetic field magnitude; must be below the minimal curvature.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct Seed {
    /// Random seed; MAGBILL_SEED takes precedence when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub field: Field,
    /// Start state x,y,theta with theta the velocity angle in radians.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "center", required_unless_present = "center")]
    pub start: Option<String>,
    /// Start from a Larmor center x,y instead (iterates the center map).
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Integral for the integral_value column: circle or file:PATH.
    #[arg(long)]
    pub integral: Option<String>,
    /// Orbit CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PortraitArgs {
    #[command(flatten)]
    pub field: Field,
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Portrait CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Static SVG rendering of the portrait.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntegralArgs {
    #[command(flatten)]
    pub field: Field,
    #[command(flatten)]
    pub seed: Seed,
    /// circle, or file:PATH with `k l i j coefficient` lines.
    #[arg(long, default_value = "circle")]
    pub integral: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// JSON report (stdout when omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SideArg {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CaseArg {
    A,
    B,
}

#[derive(Debug, Args)]
pub struct RemarkableArgs {
    #[command(flatten)]
    pub field: Field,
    /// Polynomial F, one `i j coefficient` line per term.
    #[arg(long)]
    pub poly: PathBuf,
    #[arg(long, value_enum, default_value = "plus")]
    pub side: SideArg,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Rem1Args {
    #[command(flatten)]
    pub field: Field,
    #[arg(long)]
    pub poly: PathBuf,
    /// Comma-separated eps values, largest first.
    #[arg(long, value_delimiter = ',', default_value = "1e-2,5e-3,2.5e-3")]
    pub eps_ladder: Vec<f64>,
    /// Grazing case: a (base point on the inner parallel curve) or b.
    #[arg(long, value_enum, default_value = "a")]
    pub case: CaseArg,
    /// Number of equispaced boundary parameters.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    #[command(flatten)]
    pub field: Field,
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OffsetAction {
    /// Print the polynomial.
    Eval,
    /// Check that it vanishes on both parallel curves.
    Vanish,
    /// Certified singular points and the obstruction verdict.
    Singular,
    /// Points on the infinite line.
    Infinity,
    /// Certify the singular points over a grid of radii.
    Scan,
}

#[derive(Debug, Args)]
pub struct OffsetArgs {
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    /// Offset distance (every action except scan).
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, value_enum)]
    pub action: OffsetAction,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub r_steps: usize,
    /// Parameter samples per side for vanish.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    /// Newton starts for the singular-point search.
    #[arg(long, default_value_t = 2000)]
    pub starts: usize,
    /// Output path (stdout when omitted).
    #[arg(long, alias = "report")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    Cw,
    Ccw,
}

#[derive(Debug, Args)]
pub struct OuterArgs {
    /// Boundary spec of the curve Gamma.
    #[arg(long)]
    pub gamma: String,
    #[arg(long, value_enum)]
    pub orientation: OrientationArg,
    #[arg(long)]
    pub r: f64,
    /// Start point x,y inside the annulus.
    #[arg(long, allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub field: Field,
    #[command(flatten)]
    pub seed: Seed,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    /// Number of seeded starts; ignored when --center is given.
    #[arg(long, default_value_t = 50)]
    pub starts: usize,
    /// Single start center x,y.
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<String>,
    /// JSON output (stdout when omitted).
    #[arg(long, alias = "report")]
    pub out: Option<PathBuf>,
}
