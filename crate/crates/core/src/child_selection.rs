//! Child-Selections, CS-matrices, and unstable-positive feedbacks.
//!
//! A k-Child-Selection picks k species and matches each to a distinct
//! reaction that consumes it. Its CS-matrix is the stoichiometric
//! submatrix on those species with columns reordered by the matching.
//! An unstable-positive feedback (UPF) is a CS-matrix with
//! `sign det = (-1)^(k-1)` none of whose proper principal submatrices has
//! the corresponding sign.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{det_i64, det_sign_i64, RationalMatrix};
use crate::net::{Coefficient, ReactionNetwork, SymmetryInvolution};
use crate::poly::{Monomial, Polynomial, SymbolTable};

/// `kappa` is ascending; `j_map[i]` is the reaction matched to `kappa[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ChildSelection {
    pub kappa: Vec<usize>,
    pub j_map: Vec<usize>,
}

impl ChildSelection {
    pub fn k(&self) -> usize {
        self.kappa.len()
    }

    /// Matched reactions, ascending.
    pub fn e_kappa(&self) -> Vec<usize> {
        let mut e = self.j_map.clone();
        e.sort_unstable();
        e
    }

    pub fn is_valid(&self, net: &ReactionNetwork) -> bool {
        let mut used = self.j_map.clone();
        used.sort_unstable();
        used.dedup();
        self.kappa.windows(2).all(|w| w[0] < w[1])
            && used.len() == self.j_map.len()
            && self.kappa.len() == self.j_map.len()
            && self.kappa.iter().zip(&self.j_map).all(|(&m, &j)| net.reactions[j].is_reactant(m))
    }

    /// The selection restricted to the given positions of `kappa`.
    pub fn restrict(&self, positions: &[usize]) -> ChildSelection {
        ChildSelection {
            kappa: positions.iter().map(|&p| self.kappa[p]).collect(),
            j_map: positions.iter().map(|&p| self.j_map[p]).collect(),
        }
    }

    /// Image under a symmetry involution, re-sorted by species.
    pub fn image(&self, sym: &SymmetryInvolution) -> ChildSelection {
        let mut pairs: Vec<(usize, usize)> =
            self.kappa.iter().zip(&self.j_map).map(|(&m, &j)| (sym.species(m), sym.reaction(j))).collect();
        pairs.sort_unstable();
        ChildSelection { kappa: pairs.iter().map(|p| p.0).collect(), j_map: pairs.iter().map(|p| p.1).collect() }
    }

    /// Its term `prod r_{J(m),m}` in the principal-minor expansion.
    pub fn monomial(&self, table: &SymbolTable) -> Monomial {
        let mut m: Monomial = self
            .kappa
            .iter()
            .zip(&self.j_map)
            .map(|(&s, &j)| table.id(j, s).expect("matched reaction consumes its species"))
            .collect();
        m.sort_unstable();
        m
    }

    pub fn describe(&self, net: &ReactionNetwork) -> String {
        let parts: Vec<String> = self
            .kappa
            .iter()
            .zip(&self.j_map)
            .map(|(&m, &j)| format!("{}->{}", net.species_name(m), net.reaction_label(j)))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CSMatrix {
    pub selection: ChildSelection,
    pub matrix: Vec<Vec<i64>>,
}

impl CSMatrix {
    pub fn k(&self) -> usize {
        self.matrix.len()
    }

    pub fn to_rational(&self) -> RationalMatrix {
        RationalMatrix::from_i64_rows(&self.matrix)
    }

    pub fn principal(&self, positions: &[usize]) -> Vec<Vec<i64>> {
        positions.iter().map(|&i| positions.iter().map(|&j| self.matrix[i][j]).collect()).collect()
    }

    pub fn is_metzler(&self) -> bool {
        let k = self.k();
        (0..k).all(|i| (0..k).all(|j| i == j || self.matrix[i][j] >= 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeedbackClassification {
    pub det_sign: i32,
    pub is_positive_feedback_sign: bool,
    pub is_minimal: bool,
    pub is_metzler: bool,
}

impl FeedbackClassification {
    pub fn is_unstable_positive_feedback(&self) -> bool {
        self.is_minimal
    }

    pub fn is_autocatalytic_core(&self) -> bool {
        self.is_minimal && self.is_metzler
    }
}

/// A classified minimal unstable-positive feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Feedback {
    pub selection: ChildSelection,
    pub matrix: CSMatrix,
    pub classification: FeedbackClassification,
}

fn upf_sign(k: usize) -> i32 {
    if k % 2 == 1 {
        1
    } else {
        -1
    }
}

/// Lexicographic k-subsets of `items`.
pub(crate) struct Combinations<'a> {
    items: &'a [usize],
    idx: Vec<usize>,
    done: bool,
}

impl<'a> Combinations<'a> {
    pub(crate) fn new(items: &'a [usize], k: usize) -> Self {
        Self { items, idx: (0..k).collect(), done: k > items.len() }
    }
}

impl Iterator for Combinations<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&i| self.items[i]).collect();
        let (n, k) = (self.items.len(), self.idx.len());
        match (0..k).rev().find(|&i| self.idx[i] != i + n - k) {
            None => self.done = true,
            Some(i) => {
                self.idx[i] += 1;
                for l in i + 1..k {
                    self.idx[l] = self.idx[l - 1] + 1;
                }
            }
        }
        Some(out)
    }
}

/// Species consumed by at least one reaction, ascending.
fn eligible_species(net: &ReactionNetwork) -> Vec<usize> {
    (0..net.n_species()).filter(|&m| net.reactions.iter().any(|r| r.is_reactant(m))).collect()
}

/// All matchings of `kappa` into consuming reactions, in backtracking
/// order (each species tries its reactions in ascending id order).
pub fn selections_for_kappa(net: &ReactionNetwork, kappa: &[usize]) -> Vec<ChildSelection> {
    let options: Vec<Vec<usize>> = kappa.iter().map(|&m| net.reactions_consuming(m)).collect();
    let mut out = Vec::new();
    if options.iter().any(Vec::is_empty) {
        return out;
    }
    let mut used = vec![false; net.n_reactions()];
    let mut current = Vec::with_capacity(kappa.len());
    fn backtrack(
        pos: usize,
        kappa: &[usize],
        options: &[Vec<usize>],
        used: &mut [bool],
        current: &mut Vec<usize>,
        out: &mut Vec<ChildSelection>,
    ) {
        if pos == kappa.len() {
            out.push(ChildSelection { kappa: kappa.to_vec(), j_map: current.clone() });
            return;
        }
        for &j in &options[pos] {
            if !used[j] {
                used[j] = true;
                current.push(j);
                backtrack(pos + 1, kappa, options, used, current, out);
                current.pop();
                used[j] = false;
            }
        }
    }
    backtrack(0, kappa, &options, &mut used, &mut current, &mut out);
    out
}

/// Every k-Child-Selection exactly once: species subsets in lexicographic
/// order, matchings in backtracking order within each subset.
pub fn enumerate_child_selections(net: &ReactionNetwork, k: usize) -> impl Iterator<Item = ChildSelection> + '_ {
    let eligible = eligible_species(net);
    let subsets: Vec<Vec<usize>> = if k == 0 { Vec::new() } else { Combinations::new(&eligible, k).collect() };
    subsets.into_iter().flat_map(move |kappa| selections_for_kappa(net, &kappa))
}

/// Same set as [`enumerate_child_selections`], computed in parallel over
/// species subsets; output order is identical.
pub fn child_selections_par(net: &ReactionNetwork, k: usize) -> Vec<ChildSelection> {
    if k == 0 {
        return Vec::new();
    }
    let eligible = eligible_species(net);
    let subsets: Vec<Vec<usize>> = Combinations::new(&eligible, k).collect();
    subsets.par_iter().flat_map_iter(|kappa| selections_for_kappa(net, kappa)).collect()
}

pub fn cs_matrix(net: &ReactionNetwork, sel: &ChildSelection) -> CSMatrix {
    let matrix = sel
        .kappa
        .iter()
        .map(|&row| sel.j_map.iter().map(|&j| net.reactions[j].net(row)).collect())
        .collect();
    CSMatrix { selection: sel.clone(), matrix }
}

/// Sign and minimality by scanning principal submatrices in increasing
/// size (early exit on the first one with feedback sign).
pub fn classify(csm: &CSMatrix) -> FeedbackClassification {
    let k = csm.k();
    let det_sign = det_sign_i64(&csm.matrix);
    let is_positive_feedback_sign = k > 0 && det_sign == upf_sign(k);
    let is_minimal = is_positive_feedback_sign && !has_feedback_sign_principal(csm);
    FeedbackClassification { det_sign, is_positive_feedback_sign, is_minimal, is_metzler: csm.is_metzler() }
}

fn has_feedback_sign_principal(csm: &CSMatrix) -> bool {
    let k = csm.k();
    let all: Vec<usize> = (0..k).collect();
    for size in 1..k {
        for pos in Combinations::new(&all, size) {
            if det_sign_i64(&csm.principal(&pos)) == upf_sign(size) {
                return true;
            }
        }
    }
    false
}

fn sort_feedbacks(v: &mut [Feedback]) {
    v.sort_by(|a, b| {
        (a.selection.k(), &a.selection.kappa, &a.selection.j_map).cmp(&(
            b.selection.k(),
            &b.selection.kappa,
            &b.selection.j_map,
        ))
    });
}

/// Minimal unstable-positive feedbacks by the direct principal-submatrix
/// scan, sorted by (k, kappa, matching).
pub fn find_unstable_positive_feedbacks(net: &ReactionNetwork) -> Vec<Feedback> {
    let mut out: Vec<Feedback> = (1..=net.n_species())
        .flat_map(|k| {
            let eligible = eligible_species(net);
            let subsets: Vec<Vec<usize>> = Combinations::new(&eligible, k).collect();
            subsets
                .par_iter()
                .flat_map_iter(|kappa| {
                    selections_for_kappa(net, kappa).into_iter().filter_map(|sel| {
                        let matrix = cs_matrix(net, &sel);
                        let classification = classify(&matrix);
                        classification.is_minimal.then(|| Feedback { selection: sel, matrix, classification })
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    sort_feedbacks(&mut out);
    out
}

/// Roots of the inclusion order on feedback-sign monomials.
///
/// `minor_sums[k-1]` is the unsymmetrized sum of k x k principal minors of
/// the symbolic Jacobian. A term of degree k whose coefficient has sign
/// `(-1)^(k-1)` is a feedback-sign monomial; it is a root when no other
/// feedback-sign monomial is a proper subset of it.
pub fn hasse_roots(minor_sums: &[Polynomial]) -> Vec<Monomial> {
    let mut levels: Vec<Vec<Monomial>> = Vec::new();
    for (i, p) in minor_sums.iter().enumerate() {
        let k = i + 1;
        let want_positive = upf_sign(k) > 0;
        levels.push(
            p.terms()
                .filter(|(m, c)| m.len() == k && if want_positive { c.is_positive() } else { c.is_negative() })
                .map(|(m, _)| m.clone())
                .collect(),
        );
    }
    let mut roots: Vec<Monomial> = Vec::new();
    for level in levels {
        let new_roots: Vec<Monomial> =
            level.into_iter().filter(|m| !roots.iter().any(|r| is_sorted_subset(r, m))).collect();
        roots.extend(new_roots);
    }
    roots
}

fn is_sorted_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// Maps a multilinear minor-expansion monomial back to its selection.
pub fn selection_from_monomial(monomial: &[u32], table: &SymbolTable) -> ChildSelection {
    let mut pairs: Vec<(usize, usize)> = monomial
        .iter()
        .map(|&s| {
            let sym = table.symbols[s as usize];
            (sym.species, sym.reaction)
        })
        .collect();
    pairs.sort_unstable();
    ChildSelection { kappa: pairs.iter().map(|p| p.0).collect(), j_map: pairs.iter().map(|p| p.1).collect() }
}

/// Minimal unstable-positive feedbacks via the Hasse construction over
/// the principal-minor sums (no symmetry quotient).
pub fn hasse_minimal_feedbacks(net: &ReactionNetwork) -> Vec<Feedback> {
    let table = SymbolTable::new(net);
    let sums = crate::symbolic::principal_minor_sums(net, &table);
    feedbacks_from_minor_sums(net, &table, &sums)
}

pub fn feedbacks_from_minor_sums(net: &ReactionNetwork, table: &SymbolTable, sums: &[Polynomial]) -> Vec<Feedback> {
    let mut out: Vec<Feedback> = hasse_roots(sums)
        .into_iter()
        .map(|m| {
            let selection = selection_from_monomial(&m, table);
            let matrix = cs_matrix(net, &selection);
            let det_sign = det_sign_i64(&matrix.matrix);
            let classification = FeedbackClassification {
                det_sign,
                is_positive_feedback_sign: true,
                is_minimal: true,
                is_metzler: matrix.is_metzler(),
            };
            Feedback { selection, matrix, classification }
        })
        .collect();
    sort_feedbacks(&mut out);
    out
}

/// True iff some minimal unstable-positive feedback is Metzler.
pub fn is_autocatalytic(net: &ReactionNetwork) -> bool {
    find_unstable_positive_feedbacks(net).iter().any(|f| f.classification.is_metzler)
}

/// Groups feedbacks into orbits under the involution; each class lists
/// indices into `feedbacks`, ascending.
pub fn motif_classes(feedbacks: &[Feedback], sym: Option<&SymmetryInvolution>) -> Vec<Vec<usize>> {
    let index: HashMap<&ChildSelection, usize> = feedbacks.iter().enumerate().map(|(i, f)| (&f.selection, i)).collect();
    let mut seen = vec![false; feedbacks.len()];
    let mut classes = Vec::new();
    for i in 0..feedbacks.len() {
        if seen[i] {
            continue;
        }
        seen[i] = true;
        let mut class = vec![i];
        if let Some(s) = sym {
            let img = feedbacks[i].selection.image(s);
            if let Some(&j) = index.get(&img) {
                if !seen[j] {
                    seen[j] = true;
                    class.push(j);
                }
            }
        }
        class.sort_unstable();
        classes.push(class);
    }
    classes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Reactant,
    Product,
}

/// A coefficient of a species outside kappa that the motif leaves out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElidedTerm {
    pub reaction: String,
    pub side: Side,
    pub species: String,
    pub coefficient: Coefficient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstabilityMotif {
    pub selection: ChildSelection,
    pub network: ReactionNetwork,
    pub elided: Vec<ElidedTerm>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MotifGraph {
    pub nodes: Vec<MotifNode>,
    pub edges: Vec<MotifEdge>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MotifNode {
    pub id: String,
    pub kind: &'static str,
    pub label: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MotifEdge {
    pub source: String,
    pub target: String,
    pub coefficient: Coefficient,
}

pub fn instability_motif(net: &ReactionNetwork, sel: &ChildSelection) -> InstabilityMotif {
    let reactions = sel.e_kappa();
    let network = net.restrict(&sel.kappa, &reactions);
    let mut elided = Vec::new();
    for &j in &reactions {
        let r = &net.reactions[j];
        for (side, map) in [(Side::Reactant, &r.reactants), (Side::Product, &r.products)] {
            for (&m, &c) in map {
                if !sel.kappa.contains(&m) {
                    elided.push(ElidedTerm {
                        reaction: r.label.clone(),
                        side,
                        species: net.species_name(m).to_string(),
                        coefficient: c,
                    });
                }
            }
        }
    }
    InstabilityMotif { selection: sel.clone(), network, elided }
}

impl InstabilityMotif {
    fn has_elided(&self, label: &str, side: Side) -> bool {
        self.elided.iter().any(|e| e.reaction == label && e.side == side)
    }

    fn render_side(&self, map: &BTreeMap<usize, Coefficient>, label: &str, side: Side) -> String {
        let mut parts: Vec<String> = map
            .iter()
            .map(|(m, c)| {
                let name = self.network.species_name(*m);
                if *c == 1 {
                    name.to_string()
                } else {
                    format!("{c} {name}")
                }
            })
            .collect();
        if self.has_elided(label, side) {
            parts.push("…".to_string());
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        }
    }

    /// DSL-like text with `…` standing for elided species.
    pub fn to_dsl(&self) -> String {
        self.network
            .reactions
            .iter()
            .map(|r| {
                format!(
                    "{} -> {} @ {}\n",
                    self.render_side(&r.reactants, &r.label, Side::Reactant),
                    self.render_side(&r.products, &r.label, Side::Product),
                    r.label
                )
            })
            .collect()
    }

    /// Species and reaction nodes with coefficient-weighted edges.
    pub fn to_graph(&self) -> MotifGraph {
        let mut nodes: Vec<MotifNode> = self
            .network
            .species
            .iter()
            .map(|s| MotifNode { id: format!("s:{}", s.name), kind: "species", label: s.name.clone() })
            .collect();
        let mut edges = Vec::new();
        for r in &self.network.reactions {
            let rid = format!("r:{}", r.label);
            nodes.push(MotifNode { id: rid.clone(), kind: "reaction", label: r.label.clone() });
            for (&m, &c) in &r.reactants {
                edges.push(MotifEdge {
                    source: format!("s:{}", self.network.species_name(m)),
                    target: rid.clone(),
                    coefficient: c,
                });
            }
            for (&m, &c) in &r.products {
                edges.push(MotifEdge {
                    source: rid.clone(),
                    target: format!("s:{}", self.network.species_name(m)),
                    coefficient: c,
                });
            }
        }
        MotifGraph { nodes, edges }
    }
}

impl fmt::Display for InstabilityMotif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dsl())
    }
}

/// Exact characteristic polynomial `det(lambda I - A)` of an integer
/// matrix, leading coefficient first.
pub fn char_poly_exact(a: &[Vec<i64>]) -> Vec<BigInt> {
    let n = a.len();
    let all: Vec<usize> = (0..n).collect();
    let mut coeffs = vec![BigInt::from(1)];
    for k in 1..=n {
        let e_k: BigInt = Combinations::new(&all, k)
            .map(|pos| {
                let sub: Vec<Vec<i64>> = pos.iter().map(|&i| pos.iter().map(|&j| a[i][j]).collect()).collect();
                det_i64(&sub)
            })
            .sum();
        coeffs.push(if k % 2 == 1 { -e_k } else { e_k });
    }
    coeffs
}

pub fn sign_changes(coeffs: &[BigInt]) -> usize {
    let signs: Vec<bool> = coeffs.iter().filter(|c| !c.is_zero()).map(|c| c.is_positive()).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub sign_changes: usize,
    pub eigenvalues: Vec<(f64, f64)>,
    pub positive_real_part: usize,
    /// Largest |Im| / max(1, |lambda|) among eigenvalues with positive real part.
    pub max_relative_imag: f64,
}

pub fn spectrum(csm: &CSMatrix) -> SpectrumSummary {
    let k = csm.k();
    let coeffs = char_poly_exact(&csm.matrix);
    let m = DMatrix::from_fn(k, k, |i, j| csm.matrix[i][j] as f64);
    let eig = m.complex_eigenvalues();
    let eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    let pos: Vec<&(f64, f64)> = eigenvalues.iter().filter(|e| e.0 > 1e-12).collect();
    let max_relative_imag =
        pos.iter().map(|e| e.1.abs() / (e.0 * e.0 + e.1 * e.1).sqrt().max(1.0)).fold(0.0, f64::max);
    SpectrumSummary { sign_changes: sign_changes(&coeffs), positive_real_part: pos.len(), eigenvalues, max_relative_imag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_network;

    fn frame1() -> ReactionNetwork {
        parse_network("X1 + Y -> X2 @ 1\nX2 -> 2 X1 @ 2").unwrap()
    }

    #[test]
    fn combinations_are_lexicographic() {
        let items = [0, 1, 2, 3];
        let c: Vec<Vec<usize>> = Combinations::new(&items, 2).collect();
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(Combinations::new(&items, 5).count(), 0);
        assert_eq!(Combinations::new(&items, 0).count(), 1);
    }

    #[test]
    fn frame1_two_selections() {
        let net = frame1();
        let x1 = net.species_index("X1").unwrap();
        let y = net.species_index("Y").unwrap();
        let x2 = net.species_index("X2").unwrap();
        let mut got: Vec<Vec<(usize, usize)>> = enumerate_child_selections(&net, 2)
            .map(|s| s.kappa.iter().copied().zip(s.j_map.iter().copied()).collect())
            .collect();
        got.sort();
        let mut want = vec![vec![(x1, 0), (x2, 1)], vec![(y, 0), (x2, 1)]];
        for w in &mut want {
            w.sort();
        }
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn frame1_feedback() {
        let net = frame1();
        let ups = find_unstable_positive_feedbacks(&net);
        assert_eq!(ups.len(), 1);
        // rows X1, X2 (kappa ascending in first-appearance order X1, Y, X2)
        assert_eq!(ups[0].matrix.matrix, vec![vec![-1, 2], vec![1, -1]]);
        assert!(ups[0].classification.is_metzler);
        assert!(is_autocatalytic(&net));
        let motif = instability_motif(&net, &ups[0].selection);
        assert_eq!(motif.to_dsl(), "X1 + … -> X2 @ 1\nX2 -> 2 X1 @ 2\n");
    }

    #[test]
    fn mi_one_selections() {
        let net = parse_network("2 L1 + L2 <-> L1 + 2 L2 @ 1 @ 2").unwrap();
        let sels: Vec<ChildSelection> = enumerate_child_selections(&net, 1).collect();
        assert_eq!(sels.len(), 4);
        let ups = find_unstable_positive_feedbacks(&net);
        assert!(ups.iter().any(|f| f.matrix.matrix == vec![vec![1]]));
        assert!(is_autocatalytic(&net));
    }

    #[test]
    fn negated_identity_is_not_feedback() {
        let csm = CSMatrix { selection: ChildSelection { kappa: vec![0], j_map: vec![0] }, matrix: vec![vec![-1]] };
        let c = classify(&csm);
        assert_eq!(c.det_sign, -1);
        assert!(!c.is_positive_feedback_sign);
        assert!(!c.is_minimal);
    }

    #[test]
    fn char_poly_of_frame1_feedback() {
        // det(lambda I - A) = lambda^2 + 2 lambda - 1
        let c = char_poly_exact(&[vec![-1, 2], vec![1, -1]]);
        assert_eq!(c, vec![BigInt::from(1), BigInt::from(2), BigInt::from(-1)]);
        assert_eq!(sign_changes(&c), 1);
    }
}
