use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crn_core::child_selection::{find_unstable_positive_feedbacks, instability_motif, motif_classes, MotifGraph};
use crn_core::kinetics::{
    bifurcation_scan, conservation_matrix, parse_kinetics, realize_parameters, simulate, symmetric_flux, uniform_times,
    witness_segment, ScanOptions, Tolerances,
};
use crn_core::net::{parse_network_with, ParseOptions, ParsedNetwork, ReactionNetwork, SymmetryMode};
use crn_core::report::{analyze, AnalysisOptions, Status};
use crn_core::symbolic::{capacity_for_differentiation, Verdict};

const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INTERNAL: u8 = 11;
const EXIT_USAGE: u8 = 12;

#[derive(Parser)]
#[command(name = "crn-capacity", version, about = "Structural bifurcation-capacity analysis of reaction networks")]
struct Cli {
    /// Worker threads for parallel enumeration (default: all cores).
    #[arg(long, global = true, env = "CRN_CAPACITY_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Consistency, conservation laws, feedbacks, and capacity verdict.
    Analyze(AnalyzeArgs),
    /// Minimal unstable-positive feedbacks and their instability motifs.
    Motifs(NetworkArgs),
    /// Integrate a kinetic model and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Steady-state branches of a one-parameter family as CSV.
    Bifurcate(BifurcateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SymmetryArg {
    Explicit,
    Infer,
    None,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct NetworkArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value = "explicit")]
    symmetry: SymmetryArg,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// Comma-separated catalytic species excluded from the trace.
    #[arg(long, value_delimiter = ',')]
    frozen: Vec<String>,
    /// Realize kinetics and check the Jacobian numerically.
    #[arg(long)]
    validate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    file: PathBuf,
    #[arg(long)]
    kinetics: PathBuf,
    /// Initial state, comma-separated in species order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x0: Vec<f64>,
    #[arg(long)]
    t_end: f64,
    /// Number of output intervals.
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    atol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BifurcateArgs {
    file: PathBuf,
    /// Kinetics spec in which `$p` stands for the parameter.
    #[arg(long, conflicts_with = "witness_segment")]
    kinetics: Option<PathBuf>,
    /// Scan `p` along the segment of the capacity witness search, realized
    /// at x = 1.
    #[arg(long)]
    witness_segment: bool,
    /// Parameter range `lo:hi` (default 0:1 for the witness segment).
    #[arg(long)]
    range: Option<String>,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// State fixing the conserved totals (default: all ones).
    #[arg(long, value_delimiter = ',')]
    x0: Vec<f64>,
    /// Species reported in the `value` column (default: first).
    #[arg(long)]
    observable: Option<String>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: EXIT_INTERNAL, error: e.into() }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Motifs(a) => cmd_motifs(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bifurcate(a) => cmd_bifurcate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(|e| fail(EXIT_USAGE, e))
}

fn load(path: &Path, symmetry: SymmetryArg) -> Result<ParsedNetwork, Failure> {
    let text = read(path)?;
    let options = ParseOptions {
        symmetry: match symmetry {
            SymmetryArg::Explicit => SymmetryMode::Explicit,
            SymmetryArg::Infer => SymmetryMode::Infer,
            SymmetryArg::None => SymmetryMode::None,
        },
    };
    parse_network_with(&text, &options).map_err(|e| fail(EXIT_PARSE, anyhow!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, content).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn species_indices(net: &ReactionNetwork, names: &[String]) -> Result<BTreeSet<usize>, Failure> {
    names
        .iter()
        .map(|n| net.species_index(n.trim()).ok_or_else(|| fail(EXIT_USAGE, anyhow!("unknown species `{n}`"))))
        .collect()
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8, Failure> {
    let parsed = load(&args.network.file, args.network.symmetry)?;
    let frozen = species_indices(&parsed.network, &args.frozen)?;
    let options = AnalysisOptions { frozen, validate: args.validate, seed: args.seed };
    let report = analyze(&parsed.network, &parsed.warnings, &options);
    let rendered = match args.network.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    emit(args.network.out.as_deref(), &rendered)?;
    Ok(match report.status {
        Status::Ok => 0,
        Status::Inconsistent | Status::Degenerate => EXIT_INFEASIBLE,
    })
}

#[derive(Serialize)]
struct MotifEntry {
    selection: String,
    class: usize,
    metzler: bool,
    motif: String,
    elided: Vec<String>,
    graph: MotifGraph,
}

#[derive(Serialize)]
struct MotifListing {
    classes: usize,
    motifs: Vec<MotifEntry>,
}

fn cmd_motifs(args: NetworkArgs) -> Result<u8, Failure> {
    let parsed = load(&args.file, args.symmetry)?;
    let net = &parsed.network;
    let feedbacks = find_unstable_positive_feedbacks(net);
    let classes = motif_classes(&feedbacks, net.symmetry.as_ref());
    let mut motifs = Vec::new();
    for (c, members) in classes.iter().enumerate() {
        for &i in members {
            let f = &feedbacks[i];
            let motif = instability_motif(net, &f.selection);
            motifs.push(MotifEntry {
                selection: f.selection.describe(net),
                class: c,
                metzler: f.classification.is_metzler,
                motif: motif.to_dsl(),
                elided: motif
                    .elided
                    .iter()
                    .map(|e| format!("{} {} of {} in reaction {}", e.coefficient, e.species, format!("{:?}", e.side).to_lowercase(), e.reaction))
                    .collect(),
                graph: motif.to_graph(),
            });
        }
    }
    let listing = MotifListing { classes: classes.len(), motifs };
    let rendered = match args.format {
        Format::Json => serde_json::to_string_pretty(&listing)? + "\n",
        Format::Text => {
            let mut s = format!("{} motif class(es), {} feedback(s)\n", listing.classes, listing.motifs.len());
            for m in &listing.motifs {
                s.push_str(&format!("\n[class {}] {}{}\n", m.class, m.selection, if m.metzler { " (autocatalytic)" } else { "" }));
                s.push_str(&m.motif);
            }
            s
        }
    };
    emit(args.out.as_deref(), &rendered)?;
    Ok(0)
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let parsed = load(&args.file, SymmetryArg::Explicit)?;
    let net = &parsed.network;
    let spec = read(&args.kinetics)?;
    let model = parse_kinetics(net, &spec, None).map_err(|e| fail(EXIT_PARSE, anyhow!("{}: {e}", args.kinetics.display())))?;
    if args.x0.len() != net.n_species() {
        return Err(fail(EXIT_USAGE, anyhow!("--x0 has {} values; the network has {} species", args.x0.len(), net.n_species())));
    }
    if !(args.t_end > 0.0) || args.points == 0 {
        return Err(fail(EXIT_USAGE, anyhow!("--t-end must be positive and --points nonzero")));
    }
    let tol = Tolerances { rtol: args.rtol, atol: args.atol, ..Tolerances::default() };
    let traj = simulate(&model, &args.x0, args.t_end, &uniform_times(args.t_end, args.points), &tol)
        .map_err(|e| fail(EXIT_INTERNAL, anyhow!("integration failed: {e}")))?;
    emit(args.out.as_deref(), &traj.to_csv())?;
    Ok(0)
}

fn parse_range(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || fail(EXIT_USAGE, anyhow!("--range expects lo:hi, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn cmd_bifurcate(args: BifurcateArgs) -> Result<u8, Failure> {
    let parsed = load(&args.file, SymmetryArg::Explicit)?;
    let net = &parsed.network;
    if args.grid < 2 {
        return Err(fail(EXIT_USAGE, anyhow!("--grid must be at least 2")));
    }
    let x0 = if args.x0.is_empty() { vec![1.0; net.n_species()] } else { args.x0.clone() };
    if x0.len() != net.n_species() {
        return Err(fail(EXIT_USAGE, anyhow!("--x0 has {} values; the network has {} species", x0.len(), net.n_species())));
    }
    let observable = match &args.observable {
        Some(name) => net.species_index(name).ok_or_else(|| fail(EXIT_USAGE, anyhow!("unknown species `{name}`")))?,
        None => 0,
    };
    let default_range = if args.witness_segment { "0:1" } else { "" };
    let range = args.range.as_deref().unwrap_or(default_range);
    if range.is_empty() {
        return Err(fail(EXIT_USAGE, anyhow!("--range is required with --kinetics")));
    }
    let (lo, hi) = parse_range(range)?;
    let params: Vec<f64> = (0..args.grid).map(|i| lo + (hi - lo) * i as f64 / (args.grid - 1) as f64).collect();
    let options = ScanOptions { seed: args.seed, observable, ..ScanOptions::default() };
    let w = conservation_matrix(net);
    let totals: Vec<f64> = (&w * nalgebra::DVector::from_column_slice(&x0)).iter().copied().collect();

    let table = if args.witness_segment {
        let verdict = capacity_for_differentiation(net, net.symmetry.as_ref())
            .map_err(|e| fail(EXIT_INFEASIBLE, anyhow!("{e}")))?;
        if verdict.verdict != Verdict::Capable {
            return Err(fail(EXIT_INFEASIBLE, anyhow!("no capacity witness: verdict {:?}", verdict.verdict)));
        }
        let witness = verdict.witness.ok_or_else(|| anyhow!("witness search failed"))?;
        let (a, b) = witness.segment;
        let v = symmetric_flux(net, net.symmetry.as_ref()).expect("consistent network");
        let ones = vec![1.0; net.n_species()];
        let dets = witness_segment(net, net.symmetry.as_ref(), &a, &b, &params)?;
        if let Some(w) = dets.windows(2).find(|w| w[0].1.signum() != w[1].1.signum()) {
            eprintln!("reduced Jacobian determinant changes sign between p = {} and p = {}", w[0].0, w[1].0);
        }
        let family = |p: f64| {
            let rbar: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - p) * x + p * y).collect();
            realize_parameters(net, &ones, &rbar, &v).expect("positive segment")
        };
        bifurcation_scan(family, &params, &totals, &[ones.clone()], &options)
    } else {
        let path = args.kinetics.as_ref().ok_or_else(|| fail(EXIT_USAGE, anyhow!("one of --kinetics or --witness-segment is required")))?;
        let spec = read(path)?;
        for &p in &[lo, hi] {
            parse_kinetics(net, &spec, Some(p)).map_err(|e| fail(EXIT_PARSE, anyhow!("{}: {e}", path.display())))?;
        }
        let family = |p: f64| parse_kinetics(net, &spec, Some(p)).expect("spec validated");
        bifurcation_scan(family, &params, &totals, &[x0.clone()], &options)
    };
    if !table.gaps.is_empty() {
        eprintln!("no steady state converged at {} grid point(s)", table.gaps.len());
    }
    emit(args.out.as_deref(), &table.to_csv())?;
    Ok(0)
}
