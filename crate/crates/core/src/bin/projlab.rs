use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use projlab::cli::{self, ExperimentConfig, Family, Kind, Report, Source};
use projlab::fdd::OuterChoice;
use projlab::io::{read_json, SpaceSpec};
use projlab::minproj::EmbedScheme;

#[derive(Parser)]
#[command(name = "projlab", version, about = "Projection constants, chains and decompositions")]
struct Cli {
    /// Base experiment config; subcommand flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Residual tolerance for certification.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Dimension cap for sign enumeration.
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    /// Directory for report.json, timing.json and CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Describe a space document; optionally evaluate a vector.
    Space {
        #[arg(long)]
        space: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
    },
    /// Minimal projection onto a subspace, or absolute-constant estimates.
    Minproj(MinprojArgs),
    /// Factor a projection through an intermediate subspace.
    Factor(FactorArgs),
    /// Composition table of a projection chain.
    Chain(ChainArgs),
    /// Finite-dimensional decomposition tools.
    Fdd {
        #[command(subcommand)]
        cmd: FddCmd,
    },
    /// Enlargement containment and the direct-sum construction.
    Enlargement(EnlargementArgs),
    /// Sqrt-2 bound checks over (k, n) pairs.
    Sqrt2(Sqrt2Args),
    /// Composition search over families of triples.
    Search(SearchArgs),
    /// Run an experiment config as is.
    Run { config: PathBuf },
}

#[derive(Args)]
struct MinprojArgs {
    #[arg(long)]
    space: Option<PathBuf>,
    /// Omit to estimate the absolute constant of the space.
    #[arg(long)]
    subspace: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    scheme: Option<Scheme>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Grid,
    Seeded,
}

#[derive(Args)]
struct FactorArgs {
    /// `random` for a seeded triple.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    space: Option<PathBuf>,
    /// X1.
    #[arg(long)]
    subspace: Option<PathBuf>,
    /// X2.
    #[arg(long)]
    middle: Option<PathBuf>,
    /// X3 (default: the whole space).
    #[arg(long)]
    outer: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long)]
    chain: Option<PathBuf>,
    /// `gamma` or `coordinate`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    minimize: bool,
    #[arg(long)]
    sweeps: Option<usize>,
    /// 1-based indices.
    #[arg(long, value_delimiter = ',')]
    subsequence: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum FddCmd {
    Constant(FddArgs),
    Perturb(FddArgs),
    Block(FddArgs),
    Interlace(FddArgs),
    Commute(FddArgs),
    Limit(ChainArgs),
}

#[derive(Args)]
struct FddArgs {
    #[arg(long)]
    decomposition: Option<PathBuf>,
    /// Decompositions: coordinate, skew, random. Blocking: golden, random.
    /// Interlacing: coordinate, random, tail.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long)]
    h: Option<PathBuf>,
    #[arg(long, value_enum)]
    outer: Option<Outer>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Outer {
    Orthogonal,
    Minimal,
}

#[derive(Args)]
struct EnlargementArgs {
    /// example, coordinate_pair, euclidean_pair.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long)]
    subspace: Option<PathBuf>,
    #[arg(long)]
    enlargement: Option<PathBuf>,
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long)]
    a_x: Option<PathBuf>,
    #[arg(long)]
    a_y: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct Sqrt2Args {
    /// Pairs `k:n`, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    ambient: Option<usize>,
    /// `d1,d2,d3`.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<(usize, usize, usize)>,
    #[arg(long)]
    count: Option<usize>,
    /// Enumerate coordinate triples instead of sampling.
    #[arg(long)]
    coordinate: bool,
    #[arg(long, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
    #[arg(long)]
    budget: Option<usize>,
}

fn src<T>(p: &Option<PathBuf>) -> Option<Source<T>> {
    p.as_ref().map(|p| Source::File(absolute(p)))
}

fn absolute(p: &Path) -> PathBuf {
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn config(cli: &Cli, kind: Kind) -> Result<(ExperimentConfig, PathBuf), String> {
    let (mut cfg, base) = match &cli.config {
        Some(p) => {
            let c = ExperimentConfig::load(p).map_err(|e| e.to_string())?;
            (c, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (ExperimentConfig::new(kind), PathBuf::from(".")),
    };
    cfg.kind = kind;
    set(&mut cfg.params.seed, cli.seed);
    set(&mut cfg.params.tol, cli.tol);
    set(&mut cfg.params.max_dim, cli.max_dim);
    Ok((cfg, base))
}

fn fill(cli: &Cli, cfg: &mut ExperimentConfig) -> Result<(), String> {
    let (i, p) = (&mut cfg.inputs, &mut cfg.params);
    match &cli.cmd {
        Cmd::Minproj(a) => {
            i.space = src(&a.space).or(i.space.take());
            i.subspace = src(&a.subspace).or(i.subspace.take());
            set(&mut p.tau, a.tau);
            p.m = a.m.or(p.m);
            set(&mut p.m_list, a.m_list.clone());
            match a.scheme {
                Some(Scheme::Grid) => p.scheme = EmbedScheme::Grid,
                Some(Scheme::Seeded) => p.scheme = EmbedScheme::Seeded(p.seed),
                None => {}
            }
        }
        Cmd::Factor(a) => {
            i.preset = a.preset.clone().or(i.preset.take());
            i.space = src(&a.space).or(i.space.take());
            i.subspace = src(&a.subspace).or(i.subspace.take());
            i.middle = src(&a.middle).or(i.middle.take());
            i.outer = src(&a.outer).or(i.outer.take());
        }
        Cmd::Chain(a) | Cmd::Fdd { cmd: FddCmd::Limit(a) } => {
            i.chain = src(&a.chain).or(i.chain.take());
            i.preset = a.preset.clone().or(i.preset.take());
            set(&mut p.gamma, a.gamma);
            set(&mut p.length, a.length);
            p.minimize |= a.minimize;
            set(&mut p.sweeps, a.sweeps);
            p.subsequence = a.subsequence.clone().or(p.subsequence.take());
        }
        Cmd::Fdd { cmd } => {
            let a = match cmd {
                FddCmd::Constant(a) | FddCmd::Perturb(a) | FddCmd::Block(a) | FddCmd::Interlace(a) | FddCmd::Commute(a) => a,
                FddCmd::Limit(_) => unreachable!(),
            };
            i.decomposition = src(&a.decomposition).or(i.decomposition.take());
            i.preset = a.preset.clone().or(i.preset.take());
            i.h = src(&a.h).or(i.h.take());
            set(&mut p.n, a.n);
            set(&mut p.k, a.k);
            set(&mut p.gamma, a.gamma);
            p.eps = a.eps.or(p.eps);
            p.eps_list = a.eps_list.clone().or(p.eps_list.take());
            match a.outer {
                Some(Outer::Orthogonal) => p.outer = OuterChoice::Orthogonal,
                Some(Outer::Minimal) => p.outer = OuterChoice::Minimal,
                None => {}
            }
        }
        Cmd::Enlargement(a) => {
            i.preset = a.preset.clone().or(i.preset.take());
            i.space = src(&a.space).or(i.space.take());
            i.subspace = src(&a.subspace).or(i.subspace.take());
            i.enlargement = src(&a.enlargement).or(i.enlargement.take());
            i.x = src(&a.x).or(i.x.take());
            i.y = src(&a.y).or(i.y.take());
            i.a_x = src(&a.a_x).or(i.a_x.take());
            i.a_y = src(&a.a_y).or(i.a_y.take());
            set(&mut p.k, a.k);
            set(&mut p.n, a.n);
            p.m = a.m.or(p.m);
        }
        Cmd::Sqrt2(a) => {
            if let Some(pairs) = &a.pairs {
                p.pairs = pairs
                    .iter()
                    .map(|s| {
                        let (k, n) = s.split_once(':').ok_or_else(|| format!("pair `{s}` is not k:n"))?;
                        Ok((
                            k.trim().parse().map_err(|e| format!("pair `{s}`: {e}"))?,
                            n.trim().parse().map_err(|e| format!("pair `{s}`: {e}"))?,
                        ))
                    })
                    .collect::<Result<_, String>>()?;
            }
            p.m = a.m.or(p.m);
            set(&mut p.tolerance, a.tolerance);
        }
        Cmd::Search(a) => {
            if a.coordinate {
                let ambient = a.ambient.unwrap_or(4);
                p.family = Family::Coordinate { ambient };
            } else if a.ambient.is_some() || a.dims.is_some() || a.count.is_some() {
                let (mut amb, mut dims, mut count) = match &p.family {
                    Family::Random { ambient, dims, count } => (*ambient, *dims, *count),
                    Family::Coordinate { ambient } => (*ambient, (1, 2, *ambient), 200),
                };
                set(&mut amb, a.ambient);
                set(&mut dims, a.dims);
                set(&mut count, a.count);
                p.family = Family::Random {
                    ambient: amb,
                    dims,
                    count,
                };
            }
            set(&mut p.tau_grid, a.tau_grid.clone());
            set(&mut p.budget, a.budget);
        }
        Cmd::Space { .. } | Cmd::Run { .. } => {}
    }
    Ok(())
}

fn kind_of(cmd: &Cmd) -> Option<Kind> {
    Some(match cmd {
        Cmd::Minproj(_) => Kind::Minproj,
        Cmd::Factor(_) => Kind::Factor,
        Cmd::Chain(_) => Kind::Chain,
        Cmd::Fdd { cmd } => match cmd {
            FddCmd::Constant(_) => Kind::Constant,
            FddCmd::Perturb(_) => Kind::Perturb,
            FddCmd::Block(_) => Kind::Blocking,
            FddCmd::Interlace(_) => Kind::Interlace,
            FddCmd::Commute(_) => Kind::Commute,
            FddCmd::Limit(_) => Kind::Limit,
        },
        Cmd::Enlargement(_) => Kind::Enlargement,
        Cmd::Sqrt2(_) => Kind::Sqrt2,
        Cmd::Search(_) => Kind::TripleSearch,
        Cmd::Space { .. } | Cmd::Run { .. } => return None,
    })
}

fn parse_dims(s: &str) -> Result<(usize, usize, usize), String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected d1,d2,d3, got {} values", v.len())),
    }
}

fn emit(report: &Report, out: Option<&Path>) -> ExitCode {
    if let Some(dir) = out {
        if let Err(e) = report.write(dir) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    // a closed stdout (e.g. piped into head) is not an error
    let _ = writeln!(std::io::stdout(), "{}", report.to_json());
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Space { space, x } => {
            let out = read_json::<SpaceSpec>(space).and_then(|s| cli::describe_space(&s, x.as_deref()));
            return match out {
                Ok(v) => {
                    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v).expect("json"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
        Cmd::Run { config } => {
            let cfg = match ExperimentConfig::load(config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut cfg = cfg;
            set(&mut cfg.params.seed, cli.seed);
            set(&mut cfg.params.tol, cli.tol);
            set(&mut cfg.params.max_dim, cli.max_dim);
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            // a config's output_dir is relative to the config, like its inputs
            let out = cli.out.clone().or(cfg.output_dir.as_ref().map(|d| base.join(d)));
            let report = cli::run(&cfg, &base);
            return emit(&report, out.as_deref());
        }
        _ => {}
    }
    let kind = kind_of(&cli.cmd).expect("experiment subcommand");
    let (mut cfg, base) = match config(&cli, kind) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = fill(&cli, &mut cfg) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let out = cli.out.clone().or(cfg.output_dir.as_ref().map(|d| base.join(d)));
    let report = cli::run(&cfg, &base);
    emit(&report, out.as_deref())
}
