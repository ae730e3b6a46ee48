//! Symbolic reactivity, characteristic-polynomial coefficients, and the
//! capacity-for-differentiation verdict.
//!
//! Coefficients are reported as `a_k`, the coefficient of `lambda^(|M|-k)`
//! in `det(G - lambda I)`, so `a_k = (-1)^(|M|-k) E_k` where `E_k` is the
//! sum of k x k principal minors of `G = S R`. `E_k` is expanded over
//! Child-Selections: `E_k = sum det S[kappa] * prod r_{J(m),m}`.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::child_selection::{cs_matrix, selections_for_kappa, Combinations};
use crate::linalg::{det_i64, positive_kernel_vector};
use crate::net::{ReactionNetwork, SymmetryInvolution};
use crate::poly::{Polynomial, SymbolId, SymbolTable};

/// Largest network accepted by the cofactor oracle.
pub const ORACLE_MAX_SPECIES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolicError {
    #[error("network has {0} species; the cofactor oracle accepts at most {ORACLE_MAX_SPECIES}")]
    TooLarge(usize),
    #[error("network is not consistent: no strictly positive flux vector v with S v = 0")]
    Inconsistent,
}

/// `R` as an |E| x |M| grid of (canonical) symbol ids.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolicReactivity {
    pub table: SymbolTable,
    pub entries: Vec<Vec<Option<SymbolId>>>,
}

impl SymbolicReactivity {
    /// Rows rendered with symbol names, `0` for absent entries.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.map_or("0".to_string(), |s| self.table.name(s).to_string())).collect())
            .collect()
    }
}

pub fn symbol_table(net: &ReactionNetwork, symmetry: Option<&SymmetryInvolution>) -> SymbolTable {
    match symmetry {
        Some(s) => SymbolTable::with_symmetry(net, s),
        None => SymbolTable::new(net),
    }
}

pub fn symbolic_reactivity(net: &ReactionNetwork, symmetry: Option<&SymmetryInvolution>) -> SymbolicReactivity {
    let table = symbol_table(net, symmetry);
    let entries = net
        .reactions
        .iter()
        .map(|r| {
            (0..net.n_species())
                .map(|m| table.id(r.id, m).map(|s| table.canonical[s as usize]))
                .collect()
        })
        .collect();
    SymbolicReactivity { table, entries }
}

/// `G = S R` with entries in canonical symbols of `table`.
pub fn symbolic_jacobian(net: &ReactionNetwork, table: &SymbolTable) -> Vec<Vec<Polynomial>> {
    let n = net.n_species();
    let mut g = vec![vec![Polynomial::zero(); n]; n];
    for r in &net.reactions {
        for &m2 in r.reactants.keys() {
            let s = table.canonical[table.id(r.id, m2).expect("reactant symbol") as usize];
            for (m1, row) in g.iter_mut().enumerate() {
                let c = r.net(m1);
                if c != 0 {
                    row[m2].add_term(vec![s], BigInt::from(c));
                }
            }
        }
    }
    g
}

/// `E_1 .. E_|M|` over the raw (unquotiented) symbols of `table`.
pub fn principal_minor_sums(net: &ReactionNetwork, table: &SymbolTable) -> Vec<Polynomial> {
    let eligible: Vec<usize> =
        (0..net.n_species()).filter(|&m| net.reactions.iter().any(|r| r.is_reactant(m))).collect();
    (1..=net.n_species())
        .map(|k| {
            let subsets: Vec<Vec<usize>> = Combinations::new(&eligible, k).collect();
            subsets
                .par_iter()
                .fold(Polynomial::zero, |mut acc, kappa| {
                    for sel in selections_for_kappa(net, kappa) {
                        let d = det_i64(&cs_matrix(net, &sel).matrix);
                        if !d.is_zero() {
                            acc.add_term(sel.monomial(table), d);
                        }
                    }
                    acc
                })
                .reduce(Polynomial::zero, |mut a, b| {
                    a.add_assign(&b);
                    a
                })
        })
        .collect()
}

fn alternate(sums: &[Polynomial], n: usize) -> Vec<Polynomial> {
    sums.iter().enumerate().map(|(i, e)| if (n - (i + 1)) % 2 == 0 { e.clone() } else { e.neg() }).collect()
}

#[derive(Debug, Clone)]
pub struct CharPoly {
    pub table: SymbolTable,
    /// `coefficients[k-1] = a_k`.
    pub coefficients: Vec<Polynomial>,
}

impl CharPoly {
    pub fn a(&self, k: usize) -> &Polynomial {
        &self.coefficients[k - 1]
    }
}

/// `a_1 .. a_|M|` by the Child-Selection expansion, with the symmetry
/// quotient applied after expansion.
pub fn char_poly_coefficients(net: &ReactionNetwork, symmetry: Option<&SymmetryInvolution>) -> CharPoly {
    let table = symbol_table(net, symmetry);
    let sums = principal_minor_sums(net, &table);
    let coefficients = alternate(&sums, net.n_species()).into_iter().map(|p| p.quotient(&table)).collect();
    CharPoly { table, coefficients }
}

/// Polynomial in lambda with symbolic coefficients, lowest power first.
type LambdaPoly = Vec<Polynomial>;

fn lp_mul(a: &LambdaPoly, b: &LambdaPoly) -> LambdaPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Polynomial::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if !y.is_zero() {
                out[i + j].add_assign(&x.mul(y));
            }
        }
    }
    out
}

fn lp_add_assign(a: &mut LambdaPoly, b: &LambdaPoly, negate: bool) {
    if a.len() < b.len() {
        a.resize(b.len(), Polynomial::zero());
    }
    for (i, y) in b.iter().enumerate() {
        a[i].add_assign(&if negate { y.neg() } else { y.clone() });
    }
}

/// `a_1 .. a_|M|` by Laplace expansion of `det(G - lambda I)`, with the
/// symmetry identification substituted into `G` before expanding.
pub fn oracle_char_poly(
    net: &ReactionNetwork,
    symmetry: Option<&SymmetryInvolution>,
) -> Result<Vec<Polynomial>, SymbolicError> {
    let n = net.n_species();
    if n > ORACLE_MAX_SPECIES {
        return Err(SymbolicError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let table = symbol_table(net, symmetry);
    let g = symbolic_jacobian(net, &table);
    let entry = |i: usize, j: usize| -> LambdaPoly {
        let mut e = vec![g[i][j].clone()];
        if i == j {
            e.push(Polynomial::constant(-1));
        }
        e
    };
    // minors[mask]: determinant of the last popcount(mask) rows restricted
    // to the columns in `mask`.
    let mut minors: Vec<LambdaPoly> = vec![Vec::new(); 1 << n];
    minors[0] = vec![Polynomial::constant(1)];
    let mut masks: Vec<usize> = (1..1usize << n).collect();
    masks.sort_by_key(|m| m.count_ones());
    for mask in masks {
        let row = n - mask.count_ones() as usize;
        let mut acc: LambdaPoly = Vec::new();
        let mut position = 0;
        for c in 0..n {
            if mask & (1 << c) == 0 {
                continue;
            }
            let rest = &minors[mask & !(1 << c)];
            let term = lp_mul(&entry(row, c), rest);
            lp_add_assign(&mut acc, &term, position % 2 == 1);
            position += 1;
        }
        minors[mask] = acc;
    }
    let mut full = std::mem::take(&mut minors[(1 << n) - 1]);
    full.resize(n + 1, Polynomial::zero());
    Ok((1..=n).map(|k| full[n - k].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NoCapacity,
    Capable,
    /// The leading admissible coefficient vanishes (k~ < |M| - n), or does
    /// so identically under the symmetry quotient.
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// Value per canonical symbol name.
    pub assignment: Vec<(String, f64)>,
    /// Value per raw symbol id (partners share the canonical value).
    #[serde(skip)]
    pub values: Vec<f64>,
    /// Bisection endpoints (raw ids): `a` positive, `b` negative.
    #[serde(skip)]
    pub segment: (Vec<f64>, Vec<f64>),
    pub residual: f64,
    pub relative_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityVerdict {
    pub n_species: usize,
    pub conservation_dimension: usize,
    pub k_tilde: usize,
    pub nondegenerate: bool,
    pub verdict: Verdict,
    /// `a_{k~}` after the symmetry quotient, as sorted named terms.
    pub leading_coefficient: Vec<(String, Vec<String>)>,
    pub positive_monomial: Option<(String, Vec<String>)>,
    pub negative_monomial: Option<(String, Vec<String>)>,
    pub witness: Option<Witness>,
    pub symmetric: bool,
    #[serde(skip)]
    pub leading: Polynomial,
    #[serde(skip)]
    pub table: SymbolTable,
}

#[derive(Debug, Clone)]
pub struct WitnessOptions {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub random_trials: usize,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        Self { relative_tolerance: 1e-12, max_iterations: 200, seed: 0x5eed, random_trials: 20_000 }
    }
}

pub fn capacity_for_differentiation(
    net: &ReactionNetwork,
    symmetry: Option<&SymmetryInvolution>,
) -> Result<CapacityVerdict, SymbolicError> {
    capacity_with_options(net, symmetry, &WitnessOptions::default())
}

pub fn capacity_with_options(
    net: &ReactionNetwork,
    symmetry: Option<&SymmetryInvolution>,
    options: &WitnessOptions,
) -> Result<CapacityVerdict, SymbolicError> {
    let s = net.stoichiometric_matrix();
    if positive_kernel_vector(&s).is_none() {
        return Err(SymbolicError::Inconsistent);
    }
    let n_cons = s.left_kernel_basis().dimension();
    let m = net.n_species();
    let table = symbol_table(net, symmetry);
    let sums = principal_minor_sums(net, &table);
    let k_tilde = sums.iter().rposition(|p| !p.is_zero()).map_or(0, |i| i + 1);
    let nondegenerate = k_tilde == m - n_cons;

    let mut verdict = CapacityVerdict {
        n_species: m,
        conservation_dimension: n_cons,
        k_tilde,
        nondegenerate,
        verdict: Verdict::Degenerate,
        leading_coefficient: Vec::new(),
        positive_monomial: None,
        negative_monomial: None,
        witness: None,
        symmetric: symmetry.is_some(),
        leading: Polynomial::zero(),
        table: table.clone(),
    };
    if !nondegenerate || k_tilde == 0 {
        return Ok(verdict);
    }
    let sign = if (m - k_tilde) % 2 == 0 { BigInt::one() } else { -BigInt::one() };
    let leading = sums[k_tilde - 1].scale(&sign).quotient(&table);
    verdict.leading_coefficient = leading.to_named_terms(&table);
    verdict.leading = leading.clone();
    if leading.is_zero() {
        return Ok(verdict);
    }
    let named = |(mono, c): (&Vec<SymbolId>, &BigInt)| {
        (c.to_string(), mono.iter().map(|&s| table.name(s).to_string()).collect::<Vec<_>>())
    };
    verdict.positive_monomial = leading.terms().find(|(_, c)| c.is_positive()).map(named);
    verdict.negative_monomial = leading.terms().find(|(_, c)| c.is_negative()).map(named);
    if !(leading.has_positive() && leading.has_negative()) {
        verdict.verdict = Verdict::NoCapacity;
        return Ok(verdict);
    }
    verdict.verdict = Verdict::Capable;
    verdict.witness = find_witness(&leading, &table, options);
    Ok(verdict)
}

fn expand(table: &SymbolTable, canonical_values: &[f64]) -> Vec<f64> {
    (0..table.len()).map(|i| canonical_values[table.canonical[i] as usize]).collect()
}

fn emphasized(table: &SymbolTable, monomial: &[SymbolId], c: f64) -> Vec<f64> {
    let mut v = vec![1.0; table.len()];
    for &s in monomial {
        v[s as usize] = c;
    }
    expand(table, &v)
}

/// A positive point where `p` has the requested sign.
fn signed_point(p: &Polynomial, table: &SymbolTable, positive: bool, rng: &mut ChaCha8Rng, trials: usize) -> Option<Vec<f64>> {
    let wanted = |x: f64| if positive { x > 0.0 } else { x < 0.0 };
    for (mono, c) in p.terms() {
        if c.is_positive() != positive {
            continue;
        }
        let mut scale = 2.0;
        for _ in 0..40 {
            let v = emphasized(table, mono, scale);
            if wanted(p.evaluate(&v)) {
                return Some(v);
            }
            scale *= 2.0;
        }
    }
    for _ in 0..trials {
        let raw: Vec<f64> = (0..table.len()).map(|_| (rng.gen_range(-4.0..4.0f64)).exp()).collect();
        let v = expand(table, &raw);
        if wanted(p.evaluate(&v)) {
            return Some(v);
        }
    }
    None
}

/// Intermediate-value search: bisection on the segment between a point
/// where `p > 0` and one where `p < 0`.
pub fn find_witness(p: &Polynomial, table: &SymbolTable, options: &WitnessOptions) -> Option<Witness> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let a = signed_point(p, table, true, &mut rng, options.random_trials)?;
    let b = signed_point(p, table, false, &mut rng, options.random_trials)?;
    let at = |t: f64| -> Vec<f64> { a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = at(0.5);
    let mut iterations = 0;
    for it in 0..options.max_iterations {
        iterations = it + 1;
        let mid = 0.5 * (lo + hi);
        best = at(mid);
        let f = p.evaluate(&best);
        if f.abs() <= options.relative_tolerance * p.magnitude(&best) {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = p.evaluate(&best);
    let relative_residual = residual.abs() / p.magnitude(&best);
    let assignment = table.representatives().iter().map(|&s| (table.name(s).to_string(), best[s as usize])).collect();
    Some(Witness { assignment, values: best, segment: (a, b), residual, relative_residual, iterations })
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub holds: bool,
    pub coefficients_binary: bool,
    pub max_participation: usize,
    /// Symbols for which the termwise inequality fails.
    pub violations: Vec<String>,
}

/// Weak row diagonal dominance of `H = R S` for every positive symbol
/// assignment, via the structural condition (coefficients in {0,1}, each
/// species in at most two reactions) and a termwise symbolic check: for
/// each `r_{j,m}`, `-S_{m,j} >= sum_{l != j} |S_{m,l}|`.
pub fn diagonal_dominance(net: &ReactionNetwork) -> DominanceReport {
    let coefficients_binary = net
        .reactions
        .iter()
        .all(|r| r.reactants.values().chain(r.products.values()).all(|&c| c <= 1));
    let max_participation = (0..net.n_species())
        .map(|m| {
            net.reactions.iter().filter(|r| r.reactants.contains_key(&m) || r.products.contains_key(&m)).count()
        })
        .max()
        .unwrap_or(0);
    let table = SymbolTable::new(net);
    let mut violations = Vec::new();
    for (id, sym) in table.symbols.iter().enumerate() {
        let (j, m) = (sym.reaction, sym.species);
        let diag = -net.reactions[j].net(m);
        let off: i64 = net.reactions.iter().filter(|r| r.id != j).map(|r| r.net(m).abs()).sum();
        if diag <= 0 || diag < off {
            violations.push(table.name(id as SymbolId).to_string());
        }
    }
    let holds = coefficients_binary && max_participation <= 2 && violations.is_empty();
    DominanceReport { holds, coefficients_binary, max_participation, violations }
}

pub fn diagonal_dominance_check(net: &ReactionNetwork) -> bool {
    diagonal_dominance(net).holds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceSign {
    AlwaysNegative,
    Mixed,
    /// Every monomial positive (not expected for chemical networks).
    AlwaysPositive,
    /// The trace is identically zero.
    Vanishing,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceAnalysis {
    pub sign: TraceSign,
    pub trace: Vec<(String, Vec<String>)>,
    pub rendered: String,
    #[serde(skip)]
    pub polynomial: Polynomial,
}

/// Sign structure of `tr G` over non-frozen species.
pub fn trace_sign_analysis(
    net: &ReactionNetwork,
    frozen: &BTreeSet<usize>,
    symmetry: Option<&SymmetryInvolution>,
) -> TraceAnalysis {
    let table = symbol_table(net, symmetry);
    let g = symbolic_jacobian(net, &table);
    let mut trace = Polynomial::zero();
    for (m, row) in g.iter().enumerate() {
        if !frozen.contains(&m) {
            trace.add_assign(&row[m]);
        }
    }
    let sign = match (trace.has_positive(), trace.has_negative()) {
        (false, false) => TraceSign::Vanishing,
        (false, true) => TraceSign::AlwaysNegative,
        (true, false) => TraceSign::AlwaysPositive,
        (true, true) => TraceSign::Mixed,
    };
    TraceAnalysis { sign, trace: trace.to_named_terms(&table), rendered: trace.display(&table).to_string(), polynomial: trace }
}
