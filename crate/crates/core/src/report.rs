//! The end-to-end analysis pipeline and its report.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::child_selection::{find_unstable_positive_feedbacks, instability_motif, motif_classes, MotifGraph};
use crate::kinetics::{
    eigenvalues, image_basis, numeric_jacobian, realize_parameters, reduce, substituted_jacobian, symmetric_flux,
    validate_monotone_chemical,
};
use crate::linalg::positive_kernel_vector;
use crate::net::{ParseWarning, ReactionNetwork, SymmetryReport};
use crate::poly::SymbolTable;
use crate::symbolic::{
    capacity_with_options, diagonal_dominance, trace_sign_analysis, DominanceReport, TraceSign, Verdict, Witness,
    WitnessOptions,
};

pub const SCHEMA_VERSION: &str = "1.0";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Eigenvalue magnitude below which a realized witness counts as a zero
/// eigenvalue.
pub const ZERO_EIGENVALUE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Inconsistent,
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReactionSummary {
    pub label: String,
    pub equation: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkSummary {
    pub species: Vec<String>,
    pub reactions: Vec<ReactionSummary>,
    pub symmetry: Option<SymmetryReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Consistency {
    pub consistent: bool,
    /// Primitive integer flux with `S v = 0`, `v > 0`.
    pub flux: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationLaw {
    pub coefficients: Vec<String>,
    pub expression: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Nondegeneracy {
    pub k_tilde: usize,
    pub n_species: usize,
    pub conservation_dimension: usize,
    pub nondegenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackEntry {
    pub k: usize,
    pub selection: String,
    pub species: Vec<String>,
    pub reactions: Vec<String>,
    pub matrix: Vec<Vec<i64>>,
    pub det_sign: i32,
    pub metzler: bool,
    pub motif_class: usize,
    pub motif: String,
    pub motif_graph: MotifGraph,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub frozen: Vec<String>,
    pub sign: TraceSign,
    pub trace: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityEntry {
    pub verdict: Option<Verdict>,
    /// Coefficients are those of `det(G - lambda I)`, whose leading term is
    /// `(-lambda)^|M|`.
    pub convention: &'static str,
    pub symmetric: bool,
    pub k_tilde: usize,
    pub leading_coefficient: String,
    pub leading_terms: usize,
    pub positive_monomial: Option<String>,
    pub negative_monomial: Option<String>,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// `witness` when realizing the capacity witness, `random` otherwise.
    pub symbols: &'static str,
    pub seed: u64,
    pub max_rate_relative_error: f64,
    pub jacobian_relative_error: f64,
    pub reduced_dimension: usize,
    pub min_abs_reduced_eigenvalue: Option<f64>,
    pub max_real_reduced_eigenvalue: Option<f64>,
    /// For witnesses: whether the realized reduced Jacobian has an
    /// eigenvalue below the zero tolerance.
    pub zero_eigenvalue: Option<bool>,
    pub monotone_violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema_version: &'static str,
    pub tool_version: &'static str,
    pub status: Status,
    pub network: NetworkSummary,
    pub consistency: Consistency,
    pub conservation: Vec<ConservationLaw>,
    pub nondegeneracy: Option<Nondegeneracy>,
    pub diagonal_dominance: DominanceReport,
    pub trace: TraceEntry,
    pub feedbacks: Vec<FeedbackEntry>,
    pub motif_classes: usize,
    pub autocatalytic: bool,
    pub capacity: Option<CapacityEntry>,
    pub validation: Option<ValidationReport>,
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub frozen: BTreeSet<usize>,
    pub validate: bool,
    pub seed: u64,
}

fn linear_form(net: &ReactionNetwork, coefficients: &[BigInt]) -> String {
    let mut out = String::new();
    for (m, c) in coefficients.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let name = net.species_name(m);
        let abs = c.abs();
        let term = if abs == BigInt::from(1) { name.to_string() } else { format!("{abs} {name}") };
        match (out.is_empty(), c.is_negative()) {
            (true, false) => out.push_str(&term),
            (true, true) => write!(out, "-{term}").unwrap(),
            (false, false) => write!(out, " + {term}").unwrap(),
            (false, true) => write!(out, " - {term}").unwrap(),
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn named_term((c, names): &(String, Vec<String>)) -> String {
    let mut parts = vec![c.clone()];
    parts.extend(names.iter().cloned());
    parts.join("*")
}

pub fn analyze(net: &ReactionNetwork, warnings: &[ParseWarning], options: &AnalysisOptions) -> AnalysisReport {
    let symmetry = net.symmetry.as_ref();
    let s = net.stoichiometric_matrix();
    let flux = positive_kernel_vector(&s);
    let consistency =
        Consistency { consistent: flux.is_some(), flux: flux.as_ref().map(|v| v.iter().map(|x| x.to_string()).collect()) };
    let laws = s.left_kernel_basis();
    let conservation = laws
        .vectors
        .iter()
        .map(|w| ConservationLaw {
            coefficients: w.iter().map(|x| x.to_string()).collect(),
            expression: linear_form(net, w),
        })
        .collect();

    let feedbacks = find_unstable_positive_feedbacks(net);
    let classes = motif_classes(&feedbacks, symmetry);
    let mut class_of = vec![0; feedbacks.len()];
    for (c, members) in classes.iter().enumerate() {
        for &i in members {
            class_of[i] = c;
        }
    }
    let feedback_entries: Vec<FeedbackEntry> = feedbacks
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let motif = instability_motif(net, &f.selection);
            FeedbackEntry {
                k: f.selection.k(),
                selection: f.selection.describe(net),
                species: f.selection.kappa.iter().map(|&m| net.species_name(m).to_string()).collect(),
                reactions: f.selection.j_map.iter().map(|&j| net.reaction_label(j).to_string()).collect(),
                matrix: f.matrix.matrix.clone(),
                det_sign: f.classification.det_sign,
                metzler: f.classification.is_metzler,
                motif_class: class_of[i],
                motif: motif.to_dsl(),
                motif_graph: motif.to_graph(),
            }
        })
        .collect();
    let autocatalytic = feedbacks.iter().any(|f| f.classification.is_metzler);

    let trace = trace_sign_analysis(net, &options.frozen, symmetry);
    let trace = TraceEntry {
        frozen: options.frozen.iter().map(|&m| net.species_name(m).to_string()).collect(),
        sign: trace.sign,
        trace: trace.rendered,
    };

    let mut status = if flux.is_some() { Status::Ok } else { Status::Inconsistent };
    let mut nondegeneracy = None;
    let mut capacity = None;
    let mut validation = None;
    if flux.is_some() {
        let witness_options = WitnessOptions { seed: options.seed ^ 0x5eed, ..WitnessOptions::default() };
        let verdict = capacity_with_options(net, symmetry, &witness_options).expect("consistency checked above");
        nondegeneracy = Some(Nondegeneracy {
            k_tilde: verdict.k_tilde,
            n_species: verdict.n_species,
            conservation_dimension: verdict.conservation_dimension,
            nondegenerate: verdict.nondegenerate,
        });
        if verdict.verdict == Verdict::Degenerate {
            status = Status::Degenerate;
        }
        if options.validate {
            validation = Some(validate(net, verdict.witness.as_ref(), options.seed));
        }
        capacity = Some(CapacityEntry {
            verdict: (verdict.verdict != Verdict::Degenerate).then_some(verdict.verdict),
            convention: "det(G - lambda I)",
            symmetric: verdict.symmetric,
            k_tilde: verdict.k_tilde,
            leading_coefficient: verdict.leading.display(&verdict.table).to_string(),
            leading_terms: verdict.leading.len(),
            positive_monomial: verdict.positive_monomial.as_ref().map(named_term),
            negative_monomial: verdict.negative_monomial.as_ref().map(named_term),
            witness: verdict.witness,
        });
    }

    AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION,
        status,
        network: NetworkSummary {
            species: net.species.iter().map(|s| s.name.clone()).collect(),
            reactions: net
                .reactions
                .iter()
                .map(|r| ReactionSummary {
                    label: r.label.clone(),
                    equation: format!("{} -> {}", net.format_side(&r.reactants), net.format_side(&r.products)),
                })
                .collect(),
            symmetry: net.validate_symmetry().ok(),
            warnings: warnings.iter().map(ToString::to_string).collect(),
        },
        consistency,
        conservation,
        nondegeneracy,
        diagonal_dominance: diagonal_dominance(net),
        trace,
        feedbacks: feedback_entries,
        motif_classes: classes.len(),
        autocatalytic,
        capacity,
        validation,
    }
}

/// Realizes generalized mass-action kinetics at `xbar = 1` with a
/// symmetric flux, using the witness symbols when given and seeded random
/// symbols otherwise, and checks realization and spectrum.
pub fn validate(net: &ReactionNetwork, witness: Option<&Witness>, seed: u64) -> ValidationReport {
    let table = SymbolTable::new(net);
    let v = symmetric_flux(net, net.symmetry.as_ref()).expect("consistent network");
    let xbar = vec![1.0; net.n_species()];
    let (symbols, rbar) = match witness {
        Some(w) => ("witness", w.values.clone()),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let canonical: Vec<f64> = (0..table.len()).map(|_| rng.gen_range(-2.0..2.0f64).exp()).collect();
            let sym_table = crate::symbolic::symbol_table(net, net.symmetry.as_ref());
            ("random", (0..table.len()).map(|i| canonical[sym_table.canonical[i] as usize]).collect())
        }
    };
    let model = realize_parameters(net, &xbar, &rbar, &v).expect("positive witness and flux");
    let rates = model.rates_unchecked(&xbar);
    let max_rate_relative_error = rates.iter().zip(&v).map(|(r, v)| ((r - v) / v).abs()).fold(0.0, f64::max);
    let numeric = numeric_jacobian(&model, &xbar);
    let exact = substituted_jacobian(net, &rbar);
    let scale = exact.amax().max(f64::MIN_POSITIVE);
    let jacobian_relative_error = (&numeric - &exact).amax() / scale;
    let q = image_basis(net);
    let eigs = eigenvalues(&reduce(&numeric, &q));
    let min_abs = eigs.iter().map(|e| e.0.hypot(e.1)).reduce(f64::min);
    let max_re = eigs.iter().map(|e| e.0).reduce(f64::max);
    let monotone_violations = net
        .reactions
        .iter()
        .zip(&model.laws)
        .map(|(r, law)| validate_monotone_chemical(law, r, net.n_species(), 16, seed).violations.len())
        .sum();
    ValidationReport {
        symbols,
        seed,
        max_rate_relative_error,
        jacobian_relative_error,
        reduced_dimension: q.ncols(),
        min_abs_reduced_eigenvalue: min_abs,
        max_real_reduced_eigenvalue: max_re,
        zero_eigenvalue: witness.map(|_| min_abs.is_some_and(|m| m < ZERO_EIGENVALUE_TOLERANCE)),
        monotone_violations,
    }
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let net = &self.network;
        writeln!(out, "status: {}", status_str(self.status)).unwrap();
        writeln!(out, "species ({}): {}", net.species.len(), net.species.join(", ")).unwrap();
        writeln!(out, "reactions ({}):", net.reactions.len()).unwrap();
        for r in &net.reactions {
            writeln!(out, "  {:>6}: {}", r.label, r.equation).unwrap();
        }
        if let Some(sym) = &net.symmetry {
            let pairs: Vec<String> =
                sym.species_pairs.iter().chain(&sym.reaction_pairs).map(|(a, b)| format!("{a}<->{b}")).collect();
            writeln!(out, "symmetry: {}", pairs.join(", ")).unwrap();
        }
        for w in &net.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        match &self.consistency.flux {
            Some(v) => writeln!(out, "consistent: yes, v = ({})", v.join(", ")).unwrap(),
            None => writeln!(out, "consistent: no").unwrap(),
        }
        writeln!(out, "conservation laws ({}):", self.conservation.len()).unwrap();
        for w in &self.conservation {
            writeln!(out, "  {}", w.expression).unwrap();
        }
        if let Some(nd) = &self.nondegeneracy {
            writeln!(
                out,
                "k~ = {}, |M| - n = {} - {} = {}: {}",
                nd.k_tilde,
                nd.n_species,
                nd.conservation_dimension,
                nd.n_species - nd.conservation_dimension,
                if nd.nondegenerate { "nondegenerate" } else { "degenerate" }
            )
            .unwrap();
        }
        let dd = &self.diagonal_dominance;
        writeln!(out, "diagonal dominance: {}", if dd.holds { "holds" } else { "not established" }).unwrap();
        let frozen = if self.trace.frozen.is_empty() { String::new() } else { format!(" (frozen: {})", self.trace.frozen.join(", ")) };
        writeln!(out, "trace{frozen}: {:?}: {}", self.trace.sign, self.trace.trace).unwrap();
        writeln!(
            out,
            "unstable-positive feedbacks: {} in {} motif class(es); autocatalytic: {}",
            self.feedbacks.len(),
            self.motif_classes,
            if self.autocatalytic { "yes" } else { "no" }
        )
        .unwrap();
        for f in &self.feedbacks {
            writeln!(out, "  k={} {} metzler={} class={}", f.k, f.selection, f.metzler, f.motif_class).unwrap();
            for row in &f.matrix {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>3}")).collect();
                writeln!(out, "      [{}]", cells.join(" ")).unwrap();
            }
        }
        if let Some(c) = &self.capacity {
            let verdict = c.verdict.map_or("Degenerate".to_string(), |v| format!("{v:?}"));
            writeln!(out, "capacity: {verdict} (a_{} of {}, {} terms{})", c.k_tilde, c.convention, c.leading_terms,
                if c.symmetric { ", symmetric" } else { "" }).unwrap();
            if let (Some(p), Some(n)) = (&c.positive_monomial, &c.negative_monomial) {
                writeln!(out, "  positive term: {p}\n  negative term: {n}").unwrap();
            }
            if let Some(w) = &c.witness {
                writeln!(out, "  witness (relative residual {:.3e}):", w.relative_residual).unwrap();
                for (name, value) in &w.assignment {
                    writeln!(out, "    {name} = {value:.12}").unwrap();
                }
            }
        }
        if let Some(v) = &self.validation {
            writeln!(out, "validation ({} symbols, seed {}):", v.symbols, v.seed).unwrap();
            writeln!(out, "  rate relative error: {:.3e}", v.max_rate_relative_error).unwrap();
            writeln!(out, "  jacobian relative error: {:.3e}", v.jacobian_relative_error).unwrap();
            if let Some(m) = v.min_abs_reduced_eigenvalue {
                writeln!(out, "  min |lambda| (reduced, dim {}): {:.3e}", v.reduced_dimension, m).unwrap();
            }
            if let Some(m) = v.max_real_reduced_eigenvalue {
                writeln!(out, "  max Re lambda (reduced): {m:.3e}").unwrap();
            }
            if let Some(z) = v.zero_eigenvalue {
                writeln!(out, "  zero eigenvalue: {}", if z { "yes" } else { "no" }).unwrap();
            }
        }
        out
    }
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Inconsistent => "inconsistent",
        Status::Degenerate => "degenerate",
    }
}
