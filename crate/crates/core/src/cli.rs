//! Command-line front end: solvers, oracles, graph diagnostics, generators
//! and the benchmark sweep.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::emv::{solve_emv, Anchors, EmvParams, GridChoice};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::instance::{
    gen_planted, gen_random_nonmetric, gen_rank_one, gen_shifted_clusters, load_emv, load_lra, load_wemv,
    two_clique_weights, Embedding, EmvInstance, Provenance,
};
use crate::io::{self, InputFile};
use crate::lra::{solve_lra, LraParams, NormLoop};
use crate::oracle::{brute_force_emv, brute_force_lra, brute_force_wemv, local_search_emv, MAX_STATES};
use crate::rounding::{task_rng, SeedStrategy};
use crate::wemv::{check_regularity, multiway_conductance_bruteforce, solve_wemv, WemvParams};

#[derive(Parser, Debug)]
#[command(name = "metricfit", version, about = "Additive approximation schemes for metric fitting and lp rank-one approximation")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit points in R^k to a dissimilarity matrix.
    Emv(EmvArgs),
    /// Weighted fit over a regular weight matrix.
    Wemv(WemvArgs),
    /// Entrywise lp rank-one approximation.
    Lra(LraArgs),
    /// Exhaustive or local-search reference solutions.
    Oracle(OracleArgs),
    /// Regularity and multi-way conductance of a weight matrix.
    GraphDiag(GraphDiagArgs),
    /// Sweep generators, eps values and seed strategies against the oracle.
    Bench(BenchArgs),
    /// Write a generated instance as JSON.
    Gen(GenArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Exhaustive,
    Sampled,
    Greedy,
}

#[derive(Args, Debug)]
struct Io {
    /// Instance file (JSON, or a header-free CSV matrix).
    #[arg(long)]
    input: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Target dimension (overrides the input file; default 1).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Sherali-Adams degree.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    seed_size: Option<usize>,
    /// Rounding repetitions per seed set.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Truncation radius (in standard deviations) of the greedy potential.
    #[arg(long, default_value_t = 2.0)]
    greedy_c: f64,
    /// `geometric`, `uniform:STEP[:HALF_WIDTH]` or `values:a,b,c`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridChoice>,
}

#[derive(Args, Debug)]
struct EmvArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    solver: SolverArgs,
    /// `all`, `sample:N` or `fixed:i,j,..`.
    #[arg(long, value_parser = parse_anchors)]
    anchors: Option<Anchors>,
}

#[derive(Args, Debug)]
struct WemvArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    solver: SolverArgs,
    /// Add eigenvector cuts on the degree-2 moment matrix.
    #[arg(long)]
    psd_cuts: bool,
    #[arg(long, default_value_t = 50)]
    max_cuts: usize,
    /// Keep the full [-nΔ, nΔ] range of the default grid.
    #[arg(long)]
    no_clip: bool,
}

#[derive(Args, Debug)]
struct LraArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    solver: SolverArgs,
    /// Even exponent (overrides the input file; default 2).
    #[arg(long)]
    p: Option<u32>,
    /// `diagonal:N`, `sample:N` or `full`.
    #[arg(long, value_parser = parse_norm_loop)]
    norm_loop: Option<NormLoop>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Problem {
    Emv,
    Wemv,
    Lra,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OracleMethod {
    Brute,
    Local,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    io: Io,
    /// Problem type (default: inferred from the input fields).
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    #[arg(long, value_enum, default_value = "brute")]
    method: OracleMethod,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<u32>,
    /// Alphabet for the exhaustive search: `uniform:STEP:HALF_WIDTH` or
    /// `values:a,b,c` (default `values:-3,-2,-1,0,1,2,3`).
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridChoice>,
    #[arg(long, default_value_t = MAX_STATES)]
    max_states: f64,
    /// Restarts of the local search.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct GraphDiagArgs {
    /// Weight matrix file (`{"w": ..}` or a CSV matrix).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Numbers of parts for the multi-way conductance.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    kparts: Vec<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    /// n = 4, two instances per generator.
    Tiny,
    /// n = 5, three instances per generator.
    Small,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "tiny")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("kind").required(true).args(["planted", "shifted_clusters", "nonmetric", "rank_one", "two_cliques"])))]
struct GenArgs {
    /// Points on {-2..2}^k with exact (or noisy) distances.
    #[arg(long)]
    planted: bool,
    /// Two shifted clusters on a line.
    #[arg(long)]
    shifted_clusters: bool,
    /// Random dissimilarities with aspect ratio at most `delta`.
    #[arg(long)]
    nonmetric: bool,
    /// `A = u vᵀ` (plus noise) with entries of u, v in {-2..2}.
    #[arg(long)]
    rank_one: bool,
    /// Shifted clusters with two-clique weights.
    #[arg(long)]
    two_cliques: bool,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 2)]
    b: u32,
    #[arg(long, default_value_t = 4.0)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parses `geometric`, `uniform:STEP[:HALF_WIDTH]` or `values:a,b,..`.
pub fn parse_grid(s: &str) -> std::result::Result<GridChoice, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number"));
    if s == "geometric" {
        return Ok(GridChoice::Geometric);
    }
    if let Some(rest) = s.strip_prefix("uniform:") {
        let parts: Vec<&str> = rest.split(':').collect();
        return match parts.as_slice() {
            [step] => Ok(GridChoice::Uniform { step: num(step)?, half_width: None }),
            [step, half] => Ok(GridChoice::Uniform {
                step: num(step)?,
                half_width: Some(num(half)?),
            }),
            _ => Err("expected uniform:STEP[:HALF_WIDTH]".into()),
        };
    }
    if let Some(rest) = s.strip_prefix("values:") {
        return rest.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>().map(GridChoice::Custom);
    }
    Err("expected geometric, uniform:STEP[:HALF_WIDTH] or values:a,b,..".into())
}

/// Parses `all`, `sample:N` or `fixed:i,j,..`.
pub fn parse_anchors(s: &str) -> std::result::Result<Anchors, String> {
    if s == "all" {
        return Ok(Anchors::All);
    }
    if let Some(c) = s.strip_prefix("sample:") {
        return c.parse().map(Anchors::Sample).map_err(|_| format!("bad count {c:?}"));
    }
    if let Some(list) = s.strip_prefix("fixed:") {
        return list
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad index {t:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Anchors::Fixed);
    }
    Err("expected all, sample:N or fixed:i,j,..".into())
}

/// Parses `full`, `diagonal:N` or `sample:N`.
pub fn parse_norm_loop(s: &str) -> std::result::Result<NormLoop, String> {
    if s == "full" {
        return Ok(NormLoop::Full);
    }
    let count = |c: &str| c.parse::<usize>().map_err(|_| format!("bad count {c:?}"));
    if let Some(c) = s.strip_prefix("diagonal:") {
        return count(c).map(NormLoop::Diagonal);
    }
    if let Some(c) = s.strip_prefix("sample:") {
        return count(c).map(NormLoop::Sample);
    }
    Err("expected full, diagonal:N or sample:N".into())
}

fn strategy(args: &SolverArgs, default: SeedStrategy) -> SeedStrategy {
    let size = args.seed_size.unwrap_or(default.size());
    match args.strategy {
        None if args.seed_size.is_none() => default,
        None => match default {
            SeedStrategy::Exhaustive(_) => SeedStrategy::Exhaustive(size),
            SeedStrategy::GreedyPotential { c, .. } => SeedStrategy::GreedyPotential { size, c },
            SeedStrategy::Sampled { .. } => SeedStrategy::sampled(size),
        },
        Some(Strategy::Exhaustive) => SeedStrategy::Exhaustive(size),
        Some(Strategy::Sampled) => SeedStrategy::sampled(size),
        Some(Strategy::Greedy) => SeedStrategy::GreedyPotential { size, c: args.greedy_c },
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 on usage errors, 1 on solver failures. Errors go to stderr as JSON.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report_error("usage", &e.to_string());
            return 2;
        }
    };
    let flags: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match cli.parallelism {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &flags)),
            Err(e) => Err(Error::InvalidParameter(e.to_string())),
        },
        None => dispatch(cli.command, &flags),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let body = json!({"schema": io::SCHEMA_VERSION, "error": {"kind": kind, "message": message.trim_end()}});
    eprintln!("{body}");
}

fn dispatch(command: Command, flags: &[String]) -> Result<()> {
    match command {
        Command::Emv(a) => cmd_emv(a, flags),
        Command::Wemv(a) => cmd_wemv(a, flags),
        Command::Lra(a) => cmd_lra(a, flags),
        Command::Oracle(a) => cmd_oracle(a, flags),
        Command::GraphDiag(a) => cmd_graph_diag(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn stamp(prov: &mut Provenance, flags: &[String], rng_seed: u64) {
    prov.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    prov.insert("argv".into(), json!(flags));
    prov.insert("rng_seed".into(), json!(rng_seed));
}

/// Moves a normalized-scale embedding back to the input scale.
fn to_input_scale(inst: &EmvInstance, mut e: Embedding, normalized_objective: f64) -> Embedding {
    let s = inst.scale();
    e.points = inst.denormalize(&e.points);
    e.objective = normalized_objective / (s * s);
    e.provenance.insert("scale".into(), json!(s));
    e.provenance.insert("normalized_objective".into(), json!(normalized_objective));
    e.provenance.insert("mean_sq".into(), json!(inst.mean_sq() / (s * s)));
    e
}

fn emit_embedding(e: &Embedding, io: &Io) -> Result<()> {
    let text = match io.format {
        Format::Json => io::embedding_json(e)?,
        Format::Csv => io::embedding_csv(e)?,
    };
    write_out(io.output.as_deref(), &text)
}

fn cmd_emv(a: EmvArgs, flags: &[String]) -> Result<()> {
    let input = io::read_input(&a.io.input)?;
    let k = a.solver.k.or(input.k).unwrap_or(1);
    let inst = load_emv(input.distances()?, k)?;
    let d = EmvParams::default();
    let params = EmvParams {
        eps: a.solver.eps.unwrap_or(d.eps),
        degree: a.solver.degree.unwrap_or(d.degree),
        seed: strategy(&a.solver, d.seed.clone()),
        anchors: a.anchors.clone().unwrap_or(d.anchors.clone()),
        repeats: a.solver.repeats.unwrap_or(d.repeats),
        rng_seed: a.io.rng_seed,
        grid: a.solver.grid.clone().unwrap_or(d.grid.clone()),
        support_budget: d.support_budget,
    };
    let res = solve_emv(&inst, &params)?;
    let objective = res.embedding.objective;
    let mut e = to_input_scale(&inst, res.embedding, objective);
    stamp(&mut e.provenance, flags, a.io.rng_seed);
    emit_embedding(&e, &a.io)
}

fn cmd_wemv(a: WemvArgs, flags: &[String]) -> Result<()> {
    let input = io::read_input(&a.io.input)?;
    let k = a.solver.k.or(input.k).unwrap_or(1);
    let d_matrix = input
        .d
        .as_deref()
        .ok_or_else(|| Error::Parse("weighted input needs \"d\" and \"w\"".into()))?;
    let inst = load_wemv(d_matrix, input.weights()?, k)?;
    let d = WemvParams::default();
    let params = WemvParams {
        eps: a.solver.eps.unwrap_or(d.eps),
        degree: a.solver.degree.unwrap_or(d.degree),
        seed: strategy(&a.solver, d.seed.clone()),
        repeats: a.solver.repeats.unwrap_or(d.repeats),
        rng_seed: a.io.rng_seed,
        grid: a.solver.grid.clone(),
        clip: !a.no_clip,
        psd_cuts: a.psd_cuts,
        max_cuts: a.max_cuts,
        support_budget: d.support_budget,
    };
    let res = solve_wemv(&inst, &params)?;
    let objective = res.embedding.objective;
    let mut e = to_input_scale(inst.base(), res.embedding, objective);
    let s = inst.base().scale();
    e.provenance.insert("weighted_mean_sq".into(), json!(inst.weighted_mean_sq() / (s * s)));
    stamp(&mut e.provenance, flags, a.io.rng_seed);
    emit_embedding(&e, &a.io)
}

fn cmd_lra(a: LraArgs, flags: &[String]) -> Result<()> {
    let input = io::read_input(&a.io.input)?;
    let p = a.p.or(input.p).unwrap_or(2);
    let inst = load_lra(input.lra_matrix()?, p)?;
    let d = LraParams::default();
    if matches!(a.solver.strategy, Some(Strategy::Greedy)) {
        return Err(Error::InvalidParameter("greedy seeds are not supported for rank-one approximation".into()));
    }
    let params = LraParams {
        eps: a.solver.eps.unwrap_or(d.eps),
        degree: a.solver.degree.or(d.degree),
        seed: strategy(&a.solver, d.seed.clone()),
        repeats: a.solver.repeats.unwrap_or(d.repeats),
        norm_loop: a.norm_loop.clone().unwrap_or(d.norm_loop.clone()),
        rng_seed: a.io.rng_seed,
        grid: a.solver.grid.clone(),
        max_lp_vars: d.max_lp_vars,
    };
    let mut r = solve_lra(&inst, &params)?.rank_one;
    r.provenance.insert("norm_p".into(), json!(inst.norm_p()));
    stamp(&mut r.provenance, flags, a.io.rng_seed);
    let text = match a.io.format {
        Format::Json => io::rank_one_json(&r)?,
        Format::Csv => io::rank_one_csv(&r)?,
    };
    write_out(a.io.output.as_deref(), &text)
}

fn oracle_grid(choice: Option<&GridChoice>) -> Result<Grid> {
    match choice {
        None => Grid::custom((-3..=3).map(f64::from)),
        Some(GridChoice::Custom(v)) => Grid::custom(v.iter().copied()),
        Some(GridChoice::Uniform {
            step,
            half_width: Some(h),
        }) => crate::grid::build_symmetric_grid(*h, *step),
        Some(_) => Err(Error::InvalidParameter(
            "the oracle needs an explicit alphabet: uniform:STEP:HALF_WIDTH or values:..".into(),
        )),
    }
}

fn infer_problem(input: &InputFile) -> Problem {
    if input.a.is_some() {
        Problem::Lra
    } else if input.w.is_some() {
        Problem::Wemv
    } else {
        Problem::Emv
    }
}

fn cmd_oracle(a: OracleArgs, flags: &[String]) -> Result<()> {
    let input = io::read_input(&a.io.input)?;
    let problem = a.problem.unwrap_or_else(|| infer_problem(&input));
    let k = a.k.or(input.k).unwrap_or(1);
    if problem == Problem::Lra {
        if a.method == OracleMethod::Local {
            let inst = load_lra(input.lra_matrix()?, a.p.or(input.p).unwrap_or(2))?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.io.rng_seed);
            let mut r = crate::lra::lra_alternating_baseline(&inst, a.restarts, &mut rng)?;
            stamp(&mut r.provenance, flags, a.io.rng_seed);
            return emit_rank_one(&r, &a.io);
        }
        let inst = load_lra(input.lra_matrix()?, a.p.or(input.p).unwrap_or(2))?;
        let grid = oracle_grid(a.grid.as_ref())?;
        let (mut r, _) = brute_force_lra(&inst, &grid, a.max_states)?;
        r.provenance.insert("algorithm".into(), json!("brute_force_lra"));
        r.provenance.insert("grid".into(), json!(grid.values()));
        stamp(&mut r.provenance, flags, a.io.rng_seed);
        return emit_rank_one(&r, &a.io);
    }
    let mut e = match (problem, a.method) {
        (Problem::Emv, OracleMethod::Brute) => {
            let inst = load_emv(input.distances()?, k)?;
            let grid = oracle_grid(a.grid.as_ref())?;
            let (mut e, opt) = brute_force_emv(&inst, &grid, a.max_states)?;
            e.provenance.insert("algorithm".into(), json!("brute_force_emv"));
            e.provenance.insert("grid".into(), json!(grid.values()));
            to_input_scale(&inst, e, opt)
        }
        (Problem::Emv, OracleMethod::Local) => {
            let inst = load_emv(input.distances()?, k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.io.rng_seed);
            let ls = local_search_emv(&inst, a.restarts, &mut rng)?;
            let mut e = ls.embedding;
            e.provenance.insert("algorithm".into(), json!("local_search_emv"));
            e.provenance.insert("sweep_objectives".into(), json!(ls.sweep_objectives));
            let obj = e.objective;
            to_input_scale(&inst, e, obj)
        }
        (Problem::Wemv, OracleMethod::Brute) => {
            let d = input
                .d
                .as_deref()
                .ok_or_else(|| Error::Parse("weighted input needs \"d\" and \"w\"".into()))?;
            let inst = load_wemv(d, input.weights()?, k)?;
            let grid = oracle_grid(a.grid.as_ref())?;
            let (mut e, opt) = brute_force_wemv(&inst, &grid, a.max_states)?;
            e.provenance.insert("algorithm".into(), json!("brute_force_wemv"));
            e.provenance.insert("grid".into(), json!(grid.values()));
            to_input_scale(inst.base(), e, opt)
        }
        (Problem::Wemv, OracleMethod::Local) => {
            return Err(Error::InvalidParameter("local search is implemented for the unweighted problem only".into()))
        }
        (Problem::Lra, _) => unreachable!("handled above"),
    };
    stamp(&mut e.provenance, flags, a.io.rng_seed);
    emit_embedding(&e, &a.io)
}

fn emit_rank_one(r: &crate::instance::RankOne, io: &Io) -> Result<()> {
    let text = match io.format {
        Format::Json => io::rank_one_json(r)?,
        Format::Csv => io::rank_one_csv(r)?,
    };
    write_out(io.output.as_deref(), &text)
}

fn cmd_graph_diag(a: GraphDiagArgs) -> Result<()> {
    let input = io::read_input(&a.input)?;
    let w = input.weights()?;
    let delta = check_regularity(w)?;
    let mut rows = Vec::new();
    for &kp in &a.kparts {
        let rho = multiway_conductance_bruteforce(w, kp)?;
        let bound = 1.0 - 1.0 / (delta * kp as f64);
        rows.push((kp, rho, bound, rho >= bound - 1e-9));
    }
    let text = match a.format {
        Format::Json => {
            let parts: Vec<Value> = rows
                .iter()
                .map(|&(kp, rho, bound, holds)| json!({"kparts": kp, "rho": rho, "bound": bound, "holds": holds}))
                .collect();
            let body = json!({"schema": io::SCHEMA_VERSION, "n": w.len(), "delta": delta, "conductance": parts});
            serde_json::to_string_pretty(&body)? + "\n"
        }
        Format::Csv => {
            let mut out = csv::Writer::from_writer(Vec::new());
            out.write_record(["kparts", "delta", "rho", "bound", "holds"]).map_err(io::csv_err)?;
            for (kp, rho, bound, holds) in rows {
                out.write_record([kp.to_string(), delta.to_string(), rho.to_string(), bound.to_string(), holds.to_string()])
                    .map_err(io::csv_err)?;
            }
            io::finish_csv(out)?
        }
    };
    write_out(a.output.as_deref(), &text)
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.rng_seed);
    let body = if a.planted {
        let planted = gen_planted(a.n, a.k, a.noise, &mut rng)?;
        json!({"d": planted.instance.matrix(), "k": a.k, "planted": planted.points})
    } else if a.shifted_clusters {
        json!({"d": gen_shifted_clusters(a.n, a.b, &mut rng)?.matrix(), "k": 1})
    } else if a.nonmetric {
        json!({"d": gen_random_nonmetric(a.n, a.delta, &mut rng)?.matrix(), "k": 1})
    } else if a.rank_one {
        let inst = gen_rank_one(a.n, a.m.unwrap_or(a.n), a.p, a.noise, &mut rng)?;
        json!({"A": inst.matrix(), "p": a.p})
    } else {
        let d = gen_shifted_clusters(a.n, a.b, &mut rng)?.matrix();
        json!({"d": d, "w": two_clique_weights(a.n), "k": 1})
    };
    write_out(a.output.as_deref(), &(serde_json::to_string_pretty(&body)? + "\n"))
}

/// One row of the benchmark CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchRow {
    pub instance_id: String,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub strategy: String,
    pub lp_value: f64,
    pub oracle_opt: Option<f64>,
    pub rounded_obj: f64,
    pub gap_fraction: Option<f64>,
    pub wall_ms: f64,
    pub rng_seed: u64,
}

/// Generators × eps × seed strategies on the integer alphabet {-3..3};
/// gaps are `(rounded − OPT_D) / mean_sq` against the exhaustive oracle.
pub fn bench_rows(small: bool, rng_seed: u64) -> Result<Vec<BenchRow>> {
    let (n, per_gen) = if small { (5, 3) } else { (4, 2) };
    let grid_values: Vec<f64> = (-3..=3).map(f64::from).collect();
    let grid = Grid::custom(grid_values.iter().copied())?;
    let mut instances = Vec::new();
    for idx in 0..per_gen {
        let mut rng = task_rng(rng_seed, 1000 + idx as u64);
        instances.push((format!("planted-{idx}"), gen_planted(n, 1, 0.0, &mut rng)?.instance));
        instances.push((format!("nonmetric-{idx}"), gen_random_nonmetric(n, 4.0, &mut rng)?));
        instances.push((format!("shifted-{idx}"), gen_shifted_clusters(n, 1, &mut rng)?));
    }
    let strategies = [
        SeedStrategy::sampled(1),
        SeedStrategy::Exhaustive(1),
        SeedStrategy::GreedyPotential { size: 1, c: 2.0 },
    ];
    let mut rows = Vec::new();
    for (id, inst) in &instances {
        let (_, opt) = brute_force_emv(inst, &grid, MAX_STATES)?;
        for eps in [0.25, 0.5] {
            for strategy in &strategies {
                let params = EmvParams {
                    eps,
                    seed: strategy.clone(),
                    anchors: Anchors::All,
                    rng_seed,
                    grid: GridChoice::Custom(grid_values.clone()),
                    ..EmvParams::default()
                };
                let start = Instant::now();
                let res = solve_emv(inst, &params)?;
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                let rounded = res.embedding.objective;
                rows.push(BenchRow {
                    instance_id: id.clone(),
                    n: inst.n(),
                    k: inst.k(),
                    eps,
                    strategy: strategy.name().to_string(),
                    lp_value: res.lp_value(),
                    oracle_opt: Some(opt),
                    rounded_obj: rounded,
                    gap_fraction: Some((rounded - opt) / inst.mean_sq().max(f64::MIN_POSITIVE)),
                    wall_ms,
                    rng_seed,
                });
            }
        }
    }
    Ok(rows)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let rows = bench_rows(a.suite == Suite::Small, a.rng_seed)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        out.serialize(row).map_err(io::csv_err)?;
    }
    write_out(a.output.as_deref(), &io::finish_csv(out)?)
}
