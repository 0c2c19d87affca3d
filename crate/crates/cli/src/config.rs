//! Command grammar, the flat config file, and the validated [`RunConfig`].
//!
//! Every option is a long flag; the config file uses the same names as keys
//! (`seed = 3`, `p = 1,2`, `strict = true`). File entries are spliced in
//! right after the subcommand, and any key also given on the command line is
//! dropped from the file first, so flags always win.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use steinhaus::RadiusProfile;

/// Tolerance for quadrature-based estimates (relative).
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
/// Tolerance for negative majorant margins.
pub const DEFAULT_CERT_TOL: f64 = 1e-9;
/// Monte Carlo agreement band, in standard errors.
pub const DEFAULT_MC_SIGMA: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "steinhaus", version, about = "Batch runner for random disk sequences", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample and write its points.
    Sample(Opts),
    /// Evaluate the interpolation criteria on one or more samples.
    Criteria(Opts),
    /// Run a verification battery.
    #[command(visible_alias = "verify")]
    VerifyLemma(VerifyOpts),
    /// Build and certify the harmonic majorant ψ.
    Majorant(Opts),
    /// Distribution of criterion increments over seeds.
    CriterionDist(Opts),
    /// Greedy Stolz-angle covering of a sample.
    StolzCover(Opts),
    /// Tabulate the Carleson counterexample.
    CarlesonDemo(Opts),
    /// Criteria summary over profiles and seeds.
    Sweep(Opts),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    Cochran,
    Diagonal,
    Offdiagonal,
    Rosenthal,
    PoissonNorm,
    AlphaLambda,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    Exponential,
    Lognormal,
}

#[derive(Debug, Args)]
pub struct VerifyOpts {
    /// Battery to run.
    #[arg(value_enum, required_unless_present = "lemma_flag", conflicts_with = "lemma_flag")]
    pub lemma: Option<Lemma>,
    #[arg(long = "lemma", value_enum, id = "lemma_flag")]
    pub lemma_flag: Option<Lemma>,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Opts {
    /// Radius profile, e.g. `geometric:q=0.5,N=200` (repeatable for `sweep`).
    #[arg(long)]
    pub profile: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use seeds `0..N-1`.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit nonzero when a criteria verdict is negative.
    #[arg(long)]
    pub strict: bool,
    /// Flat `key = value` file with defaults for any of these options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub quad_tol: Option<f64>,
    #[arg(long)]
    pub cert_tol: Option<f64>,
    /// Monte Carlo band in standard errors.
    #[arg(long)]
    pub mc_sigma: Option<f64>,
    /// Monte Carlo draws or trials per estimate.
    #[arg(long)]
    pub mc_n: Option<usize>,
    /// Radius grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Lebesgue exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<f64>,
    /// Depths `1 - |z|`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<f64>,
    /// Off-diagonal battery: number of annulus levels.
    #[arg(long)]
    pub levels: Option<u32>,
    /// Off-diagonal battery: smallest annulus gap.
    #[arg(long)]
    pub min_gap: Option<u32>,
    /// Off-diagonal battery: largest annulus gap.
    #[arg(long)]
    pub max_gap: Option<u32>,
    /// Rosenthal battery: laws.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub dists: Vec<Dist>,
    /// Rosenthal battery: numbers of summands.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<usize>,
    /// Duality battery: number of random measures.
    #[arg(long)]
    pub measures: Option<usize>,
    /// Duality battery: atoms per measure.
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Stolz cover: number of vertices.
    #[arg(long = "K", alias = "k")]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stolz cover: number of candidate vertices.
    #[arg(long = "M", alias = "m")]
    pub m: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Sample,
    Criteria,
    VerifyLemma(Lemma),
    Majorant,
    CriterionDist,
    StolzCover,
    CarlesonDemo,
    Sweep,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("plain enum");
        match s {
            serde_json::Value::String(s) => f.write_str(&s),
            other => {
                let (k, v) = other.as_object().and_then(|o| o.iter().next()).expect("one variant");
                write!(f, "{k} {}", v.as_str().unwrap_or_default())
            }
        }
    }
}

/// Fully resolved settings of one run. Serialized into the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub task: Task,
    pub profiles: Vec<String>,
    pub seeds: Vec<u64>,
    pub p_list: Vec<f64>,
    pub format: Format,
    pub out: PathBuf,
    pub strict: bool,
    pub quad_tol: f64,
    pub cert_tol: f64,
    pub mc_sigma: f64,
    pub mc_n: usize,
    pub grid: Vec<f64>,
    pub q_list: Vec<f64>,
    pub depths: Vec<f64>,
    pub levels: u32,
    pub min_gap: u32,
    pub max_gap: u32,
    pub dists: Vec<Dist>,
    pub vars: Vec<usize>,
    pub measures: usize,
    pub atoms: usize,
    pub n_max: u32,
    pub k: usize,
    pub alpha: f64,
    pub m: usize,
    pub checkpoints: Vec<usize>,
    #[serde(skip)]
    pub parsed_profiles: Vec<RadiusProfile>,
}

#[derive(Debug)]
pub enum ConfigError {
    /// clap's own error (usage, `--help`, `--version`).
    Clap(clap::Error),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Clap(e) => write!(f, "{e}"),
            ConfigError::Invalid(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Long names accepted by subcommand `sub`.
fn known_keys(sub: &str) -> Vec<String> {
    let cmd = Cli::command();
    let Some(sc) = cmd.get_subcommands().find(|c| c.get_name() == sub || c.get_all_aliases().any(|a| a == sub)) else {
        return Vec::new();
    };
    sc.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect()
}

fn is_flag(key: &str) -> bool {
    key == "strict"
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path, sub: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let keys = known_keys(sub);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim().to_string());
        if k == "config" || !keys.contains(&k) {
            return Err(invalid(format!("{}:{}: unknown key {k:?}", path.display(), i + 1)));
        }
        out.push((k, v));
    }
    Ok(out)
}

fn given_on_cli(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}=")))
}

fn positional_lemma(args: &[String]) -> bool {
    args.iter().any(|a| Lemma::from_str(a, false).is_ok())
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Parses argv (including the program name), merging the config file if one
/// is named by `--config`.
pub fn parse_config<I, S>(argv: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut args: Vec<String> = argv.into_iter().map(Into::into).collect();
    if let Some(path) = config_path(&args) {
        let sub = args.get(1).cloned().unwrap_or_default();
        let mut spliced = Vec::new();
        for (k, v) in read_config_file(&path, &sub)? {
            if given_on_cli(&args[2..], &k) || (k == "lemma" && positional_lemma(&args[2..])) {
                continue;
            }
            if is_flag(&k) {
                match v.as_str() {
                    "true" => spliced.push(format!("--{k}")),
                    "false" => {}
                    _ => return Err(invalid(format!("{k} must be true or false, got {v:?}"))),
                }
            } else {
                spliced.push(format!("--{k}={v}"));
            }
        }
        let at = 2.min(args.len());
        args.splice(at..at, spliced);
    }
    let cli = Cli::try_parse_from(&args).map_err(ConfigError::Clap)?;
    resolve(cli, config_path(&args).as_deref())
}

fn resolve(cli: Cli, config_file: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let (task, o) = match cli.command {
        Command::Sample(o) => (Task::Sample, o),
        Command::Criteria(o) => (Task::Criteria, o),
        Command::VerifyLemma(v) => (Task::VerifyLemma(v.lemma.or(v.lemma_flag).expect("clap requires one")), v.opts),
        Command::Majorant(o) => (Task::Majorant, o),
        Command::CriterionDist(o) => (Task::CriterionDist, o),
        Command::StolzCover(o) => (Task::StolzCover, o),
        Command::CarlesonDemo(o) => (Task::CarlesonDemo, o),
        Command::Sweep(o) => (Task::Sweep, o),
    };

    let profiles = if o.profile.is_empty() {
        vec![default_profile(task).to_string()]
    } else {
        o.profile.clone()
    };
    if profiles.len() > 1 && task != Task::Sweep {
        return Err(invalid("--profile may be repeated only for sweep"));
    }
    let base_dir = config_file.and_then(Path::parent);
    let parsed_profiles = profiles
        .iter()
        .map(|s| RadiusProfile::parse(s, base_dir).map_err(|e| invalid(format!("--profile {s}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;

    let seeds = match (o.seed, o.seeds) {
        (Some(_), Some(_)) => return Err(invalid("give either --seed or --seeds, not both")),
        (Some(s), None) => vec![s],
        (None, Some(0)) => return Err(invalid("--seeds must be positive")),
        (None, Some(n)) => (0..n).collect(),
        (None, None) => match task {
            Task::CriterionDist => (0..50).collect(),
            _ => vec![0],
        },
    };

    let p_list = or_default(o.p, default_p(task));
    for &p in &p_list {
        let floor = if task == Task::VerifyLemma(Lemma::Rosenthal) { 1.0 + f64::EPSILON } else { 1.0 };
        if !(p >= floor) || !p.is_finite() {
            return Err(invalid(format!("exponent p = {p} out of range")));
        }
    }
    let q_list = or_default(o.q, default_q(task));
    for &q in &q_list {
        if !(q > 1.0) || !q.is_finite() {
            return Err(invalid(format!("Lebesgue exponent q = {q} must exceed 1")));
        }
    }
    let grid = or_default(o.grid, default_grid(task));
    if let Some(r) = grid.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(invalid(format!("grid radius {r} outside [0, 1)")));
    }
    let depths = or_default(o.depths, vec![1e-1, 1e-2, 1e-3, 1e-4]);
    if let Some(g) = depths.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
        return Err(invalid(format!("depth {g} outside (0, 1]")));
    }

    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(format!("{name} must be positive, got {v}")))
        }
    };
    let quad_tol = positive("--quad-tol", o.quad_tol.unwrap_or(DEFAULT_QUAD_TOL))?;
    let cert_tol = o.cert_tol.unwrap_or(DEFAULT_CERT_TOL);
    if !(cert_tol >= 0.0) {
        return Err(invalid(format!("--cert-tol must be nonnegative, got {cert_tol}")));
    }
    let mc_sigma = positive("--mc-sigma", o.mc_sigma.unwrap_or(DEFAULT_MC_SIGMA))?;
    let mc_n = o.mc_n.unwrap_or(match task {
        Task::VerifyLemma(Lemma::Rosenthal) => 200_000,
        _ => 1_000_000,
    });
    if mc_n == 0 {
        return Err(invalid("--mc-n must be positive"));
    }
    let alpha = o.alpha.unwrap_or(10.0);
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid(format!("--alpha must exceed 1, got {alpha}")));
    }
    let n_max = o.n_max.unwrap_or(40);
    if n_max == 0 || n_max > steinhaus::criteria::CARLESON_MAX_N {
        return Err(invalid(format!("--n-max must be in 1..={}", steinhaus::criteria::CARLESON_MAX_N)));
    }
    let (k, m) = (o.k.unwrap_or(8), o.m.unwrap_or(720));
    if k == 0 || m == 0 {
        return Err(invalid("--K and --M must be positive"));
    }
    let vars = or_default(o.vars, vec![2, 16, 64]);
    if let Some(v) = vars.iter().find(|v| !(1..=64).contains(*v)) {
        return Err(invalid(format!("--vars entries must be in 1..=64, got {v}")));
    }
    let mut checkpoints = or_default(o.checkpoints, vec![250, 500, 1000, 2000]);
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.first() == Some(&0) {
        return Err(invalid("checkpoints must be positive"));
    }
    let (min_gap, max_gap) = (o.min_gap.unwrap_or(2), o.max_gap.unwrap_or(8));
    if min_gap < 2 || max_gap < min_gap {
        return Err(invalid(format!("annulus gaps need 2 ≤ min-gap ≤ max-gap, got {min_gap}..{max_gap}")));
    }
    let levels = o.levels.unwrap_or(12);
    if levels == 0 || levels + max_gap > 52 {
        return Err(invalid("--levels plus --max-gap must stay within 1..=52"));
    }

    Ok(RunConfig {
        task,
        profiles: parsed_profiles.iter().map(|p| p.to_string()).collect(),
        parsed_profiles,
        seeds,
        p_list,
        format: o.format.unwrap_or_default(),
        out: o.out.unwrap_or_else(|| PathBuf::from("out")),
        strict: o.strict,
        quad_tol,
        cert_tol,
        mc_sigma,
        mc_n,
        grid,
        q_list,
        depths,
        levels,
        min_gap,
        max_gap,
        dists: or_default(o.dists, vec![Dist::Exponential, Dist::Lognormal]),
        vars,
        measures: o.measures.unwrap_or(100),
        atoms: o.atoms.unwrap_or(5).max(1),
        n_max,
        k,
        alpha,
        m,
        checkpoints,
    })
}

fn or_default<T>(v: Vec<T>, default: Vec<T>) -> Vec<T> {
    if v.is_empty() {
        default
    } else {
        v
    }
}

fn default_profile(task: Task) -> &'static str {
    match task {
        Task::Sample => "geometric:q=0.5,N=200",
        Task::StolzCover => "dyadic:counts=n,N=10000",
        Task::CriterionDist => "geometric:q=0.5,N=2000",
        _ => "geometric:q=0.5,N=500",
    }
}

fn default_p(task: Task) -> Vec<f64> {
    match task {
        Task::VerifyLemma(Lemma::Diagonal) => vec![1.0, 2.0, 3.0],
        Task::VerifyLemma(Lemma::Rosenthal) => vec![1.5, 2.0, 3.0],
        Task::Majorant => vec![2.0],
        _ => vec![1.0, 2.0],
    }
}

fn default_q(task: Task) -> Vec<f64> {
    match task {
        Task::VerifyLemma(Lemma::AlphaLambda) => vec![1.5, 2.0],
        _ => vec![1.5, 2.0, 3.0],
    }
}

fn default_grid(task: Task) -> Vec<f64> {
    match task {
        Task::VerifyLemma(Lemma::Diagonal) => steinhaus::stochastic::DIAGONAL_GRID.to_vec(),
        _ => vec![0.5, 0.9, 0.99],
    }
}
