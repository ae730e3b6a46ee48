//! Reaction networks: species, reactions, the text DSL, and Z2 symmetry
//! involutions pairing the two cells of a symmetric model.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::RationalMatrix;

/// Stoichiometric coefficient (dimensionless, nonnegative).
pub type Coefficient = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Species {
    pub id: usize,
    pub name: String,
}

/// One irreversible reaction. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub id: usize,
    pub label: String,
    pub reactants: BTreeMap<usize, Coefficient>,
    pub products: BTreeMap<usize, Coefficient>,
}

impl Reaction {
    pub fn reactant_coefficient(&self, species: usize) -> Coefficient {
        self.reactants.get(&species).copied().unwrap_or(0)
    }

    pub fn product_coefficient(&self, species: usize) -> Coefficient {
        self.products.get(&species).copied().unwrap_or(0)
    }

    /// Net production of `species` (product minus reactant coefficient).
    pub fn net(&self, species: usize) -> i64 {
        self.product_coefficient(species) as i64 - self.reactant_coefficient(species) as i64
    }

    pub fn is_reactant(&self, species: usize) -> bool {
        self.reactants.contains_key(&species)
    }
}

/// A pair of involutive permutations acting on species and reaction ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryInvolution {
    pub species_perm: Vec<usize>,
    pub reaction_perm: Vec<usize>,
}

impl SymmetryInvolution {
    pub fn identity(n_species: usize, n_reactions: usize) -> Self {
        Self {
            species_perm: (0..n_species).collect(),
            reaction_perm: (0..n_reactions).collect(),
        }
    }

    pub fn species(&self, m: usize) -> usize {
        self.species_perm[m]
    }

    pub fn reaction(&self, j: usize) -> usize {
        self.reaction_perm[j]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    pub symmetry: Option<SymmetryInvolution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("duplicate species `{0}`")]
    DuplicateSpecies(String),
    #[error("duplicate reaction label `{0}`")]
    DuplicateLabel(String),
    #[error("reaction `{0}` has neither reactants nor products")]
    EmptyReaction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymmetryError {
    #[error("network has no symmetry involution")]
    Missing,
    #[error("permutation sizes do not match the network ({species} species, {reactions} reactions)")]
    SizeMismatch { species: usize, reactions: usize },
    #[error("species map is not an involution at `{0}`")]
    SpeciesNotInvolution(String),
    #[error("reaction map is not an involution at `{0}`")]
    ReactionNotInvolution(String),
    #[error("reaction `{from}` is not mapped onto reaction `{to}` with identical coefficients")]
    NotInvariant { from: String, to: String },
}

/// Outcome of a successful symmetry validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymmetryReport {
    pub species_pairs: Vec<(String, String)>,
    pub reaction_pairs: Vec<(String, String)>,
    pub fixed_species: Vec<String>,
    pub fixed_reactions: Vec<String>,
}

impl ReactionNetwork {
    pub fn empty() -> Self {
        Self { species: Vec::new(), reactions: Vec::new(), symmetry: None }
    }

    /// Builds a network from named reactions. Species are created in
    /// first-appearance order.
    pub fn from_reactions<'a, I>(reactions: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (&'a str, Vec<(&'a str, Coefficient)>, Vec<(&'a str, Coefficient)>)>,
    {
        let mut builder = NetworkBuilder::default();
        for (label, lhs, rhs) in reactions {
            let lhs: Vec<(String, Coefficient)> = lhs.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
            let rhs: Vec<(String, Coefficient)> = rhs.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
            builder.add_reaction(label, &lhs, &rhs)?;
        }
        Ok(builder.finish())
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn reaction_index(&self, label: &str) -> Option<usize> {
        self.reactions.iter().position(|r| r.label == label)
    }

    pub fn species_name(&self, m: usize) -> &str {
        &self.species[m].name
    }

    pub fn reaction_label(&self, j: usize) -> &str {
        &self.reactions[j].label
    }

    /// Reactions having species `m` as a reactant, in ascending id order.
    pub fn reactions_consuming(&self, m: usize) -> Vec<usize> {
        self.reactions.iter().filter(|r| r.is_reactant(m)).map(|r| r.id).collect()
    }

    /// |M| x |E| matrix of reactant coefficients.
    pub fn reactant_matrix(&self) -> RationalMatrix {
        RationalMatrix::from_fn(self.n_species(), self.n_reactions(), |m, j| {
            self.reactions[j].reactant_coefficient(m) as i64
        })
    }

    /// |M| x |E| matrix of product coefficients.
    pub fn product_matrix(&self) -> RationalMatrix {
        RationalMatrix::from_fn(self.n_species(), self.n_reactions(), |m, j| {
            self.reactions[j].product_coefficient(m) as i64
        })
    }

    /// |M| x |E| stoichiometric matrix, products minus reactants.
    pub fn stoichiometric_matrix(&self) -> RationalMatrix {
        RationalMatrix::from_fn(self.n_species(), self.n_reactions(), |m, j| self.reactions[j].net(m))
    }

    /// Dense integer stoichiometric matrix, row-major.
    pub fn stoichiometry_i64(&self) -> Vec<Vec<i64>> {
        (0..self.n_species())
            .map(|m| self.reactions.iter().map(|r| r.net(m)).collect())
            .collect()
    }

    /// Species that are reactant and product of the same reaction, as
    /// (reaction label, species name).
    pub fn both_sides_occurrences(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for r in &self.reactions {
            for m in r.reactants.keys() {
                if r.products.contains_key(m) {
                    out.push((r.label.clone(), self.species[*m].name.clone()));
                }
            }
        }
        out
    }

    pub fn with_symmetry(mut self, symmetry: Option<SymmetryInvolution>) -> Self {
        self.symmetry = symmetry;
        self
    }

    /// Checks the attached involution.
    pub fn validate_symmetry(&self) -> Result<SymmetryReport, SymmetryError> {
        let sym = self.symmetry.as_ref().ok_or(SymmetryError::Missing)?;
        self.check_involution(sym)
    }

    /// Checks that `sym` is an involution on species and reactions that
    /// maps every reaction onto its partner with identical coefficients.
    pub fn check_involution(&self, sym: &SymmetryInvolution) -> Result<SymmetryReport, SymmetryError> {
        let (ns, nr) = (self.n_species(), self.n_reactions());
        if sym.species_perm.len() != ns || sym.reaction_perm.len() != nr {
            return Err(SymmetryError::SizeMismatch { species: ns, reactions: nr });
        }
        for m in 0..ns {
            let img = sym.species_perm[m];
            if img >= ns || sym.species_perm[img] != m {
                return Err(SymmetryError::SpeciesNotInvolution(self.species[m].name.clone()));
            }
        }
        for j in 0..nr {
            let img = sym.reaction_perm[j];
            if img >= nr || sym.reaction_perm[img] != j {
                return Err(SymmetryError::ReactionNotInvolution(self.reactions[j].label.clone()));
            }
        }
        for r in &self.reactions {
            let target = &self.reactions[sym.reaction_perm[r.id]];
            let map = |side: &BTreeMap<usize, Coefficient>| -> BTreeMap<usize, Coefficient> {
                side.iter().map(|(m, c)| (sym.species_perm[*m], *c)).collect()
            };
            if map(&r.reactants) != target.reactants || map(&r.products) != target.products {
                return Err(SymmetryError::NotInvariant {
                    from: r.label.clone(),
                    to: target.label.clone(),
                });
            }
        }

        let mut report = SymmetryReport {
            species_pairs: Vec::new(),
            reaction_pairs: Vec::new(),
            fixed_species: Vec::new(),
            fixed_reactions: Vec::new(),
        };
        for m in 0..ns {
            let img = sym.species_perm[m];
            if img == m {
                report.fixed_species.push(self.species[m].name.clone());
            } else if m < img {
                report.species_pairs.push((self.species[m].name.clone(), self.species[img].name.clone()));
            }
        }
        for j in 0..nr {
            let img = sym.reaction_perm[j];
            if img == j {
                report.fixed_reactions.push(self.reactions[j].label.clone());
            } else if j < img {
                report.reaction_pairs.push((self.reactions[j].label.clone(), self.reactions[img].label.clone()));
            }
        }
        Ok(report)
    }

    /// Proposes an involution by swapping a trailing `1`/`2` in species
    /// names; reactions are paired by matching permuted coefficients. The
    /// result is validated before being returned.
    pub fn infer_symmetry(&self) -> Result<SymmetryInvolution, SymmetryError> {
        let species_perm: Vec<usize> = self
            .species
            .iter()
            .map(|s| {
                swap_trailing_digit(&s.name)
                    .and_then(|partner| self.species_index(&partner))
                    .unwrap_or(s.id)
            })
            .collect();
        let mut reaction_perm = Vec::with_capacity(self.n_reactions());
        for r in &self.reactions {
            let reactants: BTreeMap<usize, Coefficient> =
                r.reactants.iter().map(|(m, c)| (species_perm[*m], *c)).collect();
            let products: BTreeMap<usize, Coefficient> =
                r.products.iter().map(|(m, c)| (species_perm[*m], *c)).collect();
            let candidates: Vec<usize> = self
                .reactions
                .iter()
                .filter(|t| t.reactants == reactants && t.products == products)
                .map(|t| t.id)
                .collect();
            // Parallel duplicates are paired positionally: the i-th copy of
            // `r` maps to the i-th copy of its image.
            let img = match candidates.as_slice() {
                [] => {
                    return Err(SymmetryError::NotInvariant {
                        from: r.label.clone(),
                        to: "<none>".to_string(),
                    })
                }
                [only] => *only,
                many if many.contains(&r.id) => r.id,
                many => {
                    let position = self
                        .reactions
                        .iter()
                        .filter(|t| t.reactants == r.reactants && t.products == r.products)
                        .position(|t| t.id == r.id)
                        .unwrap_or(0);
                    many[position.min(many.len() - 1)]
                }
            };
            reaction_perm.push(img);
        }
        let sym = SymmetryInvolution { species_perm, reaction_perm };
        self.check_involution(&sym)?;
        Ok(sym)
    }

    /// Subnetwork on the given species and reactions. Coefficients of
    /// species outside `species` are dropped; `symmetry` is not carried.
    pub fn restrict(&self, species: &[usize], reactions: &[usize]) -> ReactionNetwork {
        let remap: HashMap<usize, usize> = species.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let new_species = species
            .iter()
            .enumerate()
            .map(|(i, m)| Species { id: i, name: self.species[*m].name.clone() })
            .collect();
        let keep = |side: &BTreeMap<usize, Coefficient>| -> BTreeMap<usize, Coefficient> {
            side.iter().filter_map(|(m, c)| remap.get(m).map(|i| (*i, *c))).collect()
        };
        let new_reactions = reactions
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let r = &self.reactions[*j];
                Reaction {
                    id: i,
                    label: r.label.clone(),
                    reactants: keep(&r.reactants),
                    products: keep(&r.products),
                }
            })
            .collect();
        ReactionNetwork { species: new_species, reactions: new_reactions, symmetry: None }
    }

    /// Deterministic DSL rendering; `parse_network` reads it back.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        if !self.species.is_empty() {
            let names: Vec<&str> = self.species.iter().map(|s| s.name.as_str()).collect();
            out.push_str(&format!("species: {}\n", names.join(", ")));
        }
        for r in &self.reactions {
            out.push_str(&format!(
                "{} -> {} @ {}\n",
                self.format_side(&r.reactants),
                self.format_side(&r.products),
                r.label
            ));
        }
        if let Some(sym) = &self.symmetry {
            let mut pairs = Vec::new();
            for m in 0..self.n_species() {
                if sym.species_perm[m] > m {
                    pairs.push(format!("{} <-> {}", self.species[m].name, self.species[sym.species_perm[m]].name));
                }
            }
            for j in 0..self.n_reactions() {
                if sym.reaction_perm[j] > j {
                    pairs.push(format!(
                        "{} <-> {}",
                        self.reactions[j].label,
                        self.reactions[sym.reaction_perm[j]].label
                    ));
                }
            }
            if !pairs.is_empty() {
                out.push_str(&format!("symmetry: {}\n", pairs.join(", ")));
            }
        }
        out
    }

    pub fn format_side(&self, side: &BTreeMap<usize, Coefficient>) -> String {
        if side.is_empty() {
            return "0".to_string();
        }
        side.iter()
            .map(|(m, c)| {
                if *c == 1 {
                    self.species[*m].name.clone()
                } else {
                    format!("{} {}", c, self.species[*m].name)
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Display for ReactionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dsl())
    }
}

fn swap_trailing_digit(name: &str) -> Option<String> {
    let last = name.chars().last()?;
    let swapped = match last {
        '1' => '2',
        '2' => '1',
        _ => return None,
    };
    let mut s = name[..name.len() - 1].to_string();
    s.push(swapped);
    Some(s)
}

#[derive(Default)]
struct NetworkBuilder {
    species: Vec<Species>,
    index: HashMap<String, usize>,
    reactions: Vec<Reaction>,
    labels: HashMap<String, usize>,
}

impl NetworkBuilder {
    fn declare_species(&mut self, name: &str) -> Result<usize, NetworkError> {
        if self.index.contains_key(name) {
            return Err(NetworkError::DuplicateSpecies(name.to_string()));
        }
        Ok(self.intern(name))
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let id = self.species.len();
        self.species.push(Species { id, name: name.to_string() });
        self.index.insert(name.to_string(), id);
        id
    }

    fn add_reaction(
        &mut self,
        label: &str,
        lhs: &[(String, Coefficient)],
        rhs: &[(String, Coefficient)],
    ) -> Result<usize, NetworkError> {
        if self.labels.contains_key(label) {
            return Err(NetworkError::DuplicateLabel(label.to_string()));
        }
        let mut side = |terms: &[(String, Coefficient)]| {
            let mut map = BTreeMap::new();
            for (name, c) in terms {
                let m = self.intern(name);
                *map.entry(m).or_insert(0) += *c;
            }
            map.retain(|_, c| *c > 0);
            map
        };
        let reactants = side(lhs);
        let products = side(rhs);
        if reactants.is_empty() && products.is_empty() {
            return Err(NetworkError::EmptyReaction(label.to_string()));
        }
        let id = self.reactions.len();
        self.reactions.push(Reaction { id, label: label.to_string(), reactants, products });
        self.labels.insert(label.to_string(), id);
        Ok(id)
    }

    fn finish(self) -> ReactionNetwork {
        ReactionNetwork { species: self.species, reactions: self.reactions, symmetry: None }
    }
}

// ---------------------------------------------------------------------------
// DSL parser

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SymmetryMode {
    /// Use the `symmetry:` block if present.
    #[default]
    Explicit,
    /// Use the block if present, otherwise infer from trailing digits.
    Infer,
    /// Ignore any symmetry block.
    None,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub symmetry: SymmetryMode,
}

impl ParseOptions {
    pub fn infer_symmetry() -> Self {
        Self { symmetry: SymmetryMode::Infer }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ParseWarning {
    /// A species is both reactant and product of one reaction.
    BothSides { line: usize, reaction: String, species: String },
    /// A side is written as `0`.
    EmptySide { line: usize, reaction: String, side: &'static str },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::BothSides { line, reaction, species } => write!(
                f,
                "line {line}: species {species} is both reactant and product of reaction {reaction}; \
                 CS-matrices may miss negative-diagonal submatrices"
            ),
            ParseWarning::EmptySide { line, reaction, side } => {
                write!(f, "line {line}: reaction {reaction} has an empty {side} side (inflow/outflow)")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedNetwork {
    pub network: ReactionNetwork,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("duplicate reaction label `{0}`")]
    DuplicateLabel(String),
    #[error("duplicate species `{0}` in species declaration")]
    DuplicateSpecies(String),
    #[error("unknown name `{0}` in symmetry declaration")]
    UnknownSymmetryName(String),
    #[error("`{0}` names both a species and a reaction")]
    AmbiguousSymmetryName(String),
    #[error("symmetry pairs `{0}` with both a species and a reaction")]
    MixedSymmetryPair(String),
    #[error("`{0}` appears in more than one symmetry pair")]
    RepeatedSymmetryName(String),
    #[error("invalid symmetry: {0}")]
    Symmetry(#[from] SymmetryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

/// Parses DSL text with default options (explicit symmetry only).
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ParseError> {
    parse_network_with(text, &ParseOptions::default()).map(|p| p.network)
}

pub fn parse_network_with(text: &str, options: &ParseOptions) -> Result<ParsedNetwork, ParseError> {
    let mut builder = NetworkBuilder::default();
    let mut warnings = Vec::new();
    let mut sym_pairs: Vec<(usize, usize, String, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor::new(content, line_no);
        cur.skip_ws();
        if let Some(rest_col) = cur.keyword("species:") {
            let _ = rest_col;
            for name in cur.name_list()? {
                builder.declare_species(&name.0).map_err(|_| ParseError {
                    line: line_no,
                    column: name.1,
                    kind: ParseErrorKind::DuplicateSpecies(name.0.clone()),
                })?;
            }
            continue;
        }
        if cur.keyword("symmetry:").is_some() {
            loop {
                cur.skip_ws();
                let col = cur.column();
                let a = cur.token()?;
                cur.skip_ws();
                cur.expect("<->")?;
                cur.skip_ws();
                let b = cur.token()?;
                sym_pairs.push((line_no, col, a, b));
                cur.skip_ws();
                if cur.at_end() {
                    break;
                }
                cur.expect(",")?;
            }
            continue;
        }

        let lhs_col = cur.column();
        let lhs = cur.side()?;
        cur.skip_ws();
        let reversible = if cur.try_consume("<->") {
            true
        } else if cur.try_consume("->") {
            false
        } else {
            return Err(cur.error("expected `->` or `<->`"));
        };
        cur.skip_ws();
        let rhs = cur.side()?;
        cur.skip_ws();
        cur.expect("@")?;
        cur.skip_ws();
        let label_col = cur.column();
        let label = cur.token()?;
        let mut labels = vec![(label, label_col)];
        if reversible {
            cur.skip_ws();
            cur.expect("@")?;
            cur.skip_ws();
            let col = cur.column();
            labels.push((cur.token()?, col));
        }
        cur.skip_ws();
        if !cur.at_end() {
            return Err(cur.error("unexpected trailing input"));
        }
        let _ = lhs_col;

        let directions: Vec<(&Vec<(String, Coefficient)>, &Vec<(String, Coefficient)>)> =
            if reversible { vec![(&lhs, &rhs), (&rhs, &lhs)] } else { vec![(&lhs, &rhs)] };
        for ((from, to), (label, col)) in directions.into_iter().zip(labels) {
            let id = builder.add_reaction(&label, from, to).map_err(|e| ParseError {
                line: line_no,
                column: col,
                kind: match e {
                    NetworkError::DuplicateLabel(l) => ParseErrorKind::DuplicateLabel(l),
                    other => ParseErrorKind::Syntax(other.to_string()),
                },
            })?;
            let r = &builder.reactions[id];
            if r.reactants.is_empty() {
                warnings.push(ParseWarning::EmptySide { line: line_no, reaction: label.clone(), side: "reactant" });
            }
            if r.products.is_empty() {
                warnings.push(ParseWarning::EmptySide { line: line_no, reaction: label.clone(), side: "product" });
            }
            for m in r.reactants.keys() {
                if r.products.contains_key(m) {
                    warnings.push(ParseWarning::BothSides {
                        line: line_no,
                        reaction: label.clone(),
                        species: builder.species[*m].name.clone(),
                    });
                }
            }
        }
    }

    let mut network = builder.finish();
    let explicit = !sym_pairs.is_empty();
    match options.symmetry {
        SymmetryMode::None => {}
        SymmetryMode::Explicit | SymmetryMode::Infer if explicit => {
            let sym = build_symmetry(&network, &sym_pairs)?;
            network.check_involution(&sym).map_err(|e| ParseError {
                line: sym_pairs[0].0,
                column: sym_pairs[0].1,
                kind: ParseErrorKind::Symmetry(e),
            })?;
            network.symmetry = Some(sym);
        }
        SymmetryMode::Infer => {
            let sym = network.infer_symmetry().map_err(|e| ParseError {
                line: 0,
                column: 0,
                kind: ParseErrorKind::Symmetry(e),
            })?;
            network.symmetry = Some(sym);
        }
        SymmetryMode::Explicit => {}
    }
    Ok(ParsedNetwork { network, warnings })
}

fn build_symmetry(
    net: &ReactionNetwork,
    pairs: &[(usize, usize, String, String)],
) -> Result<SymmetryInvolution, ParseError> {
    let mut sym = SymmetryInvolution::identity(net.n_species(), net.n_reactions());
    let mut seen_species = vec![false; net.n_species()];
    let mut seen_reactions = vec![false; net.n_reactions()];
    for (line, col, a, b) in pairs {
        let err = |kind| ParseError { line: *line, column: *col, kind };
        let resolve = |name: &str| -> Result<(Option<usize>, Option<usize>), ParseError> {
            let s = net.species_index(name);
            let r = net.reaction_index(name);
            match (s, r) {
                (None, None) => Err(err(ParseErrorKind::UnknownSymmetryName(name.to_string()))),
                (Some(_), Some(_)) => Err(err(ParseErrorKind::AmbiguousSymmetryName(name.to_string()))),
                other => Ok(other),
            }
        };
        match (resolve(a)?, resolve(b)?) {
            ((Some(x), None), (Some(y), None)) => {
                for (v, n) in [(x, a), (y, b)] {
                    if seen_species[v] {
                        return Err(err(ParseErrorKind::RepeatedSymmetryName(n.clone())));
                    }
                    seen_species[v] = true;
                }
                sym.species_perm[x] = y;
                sym.species_perm[y] = x;
            }
            ((None, Some(x)), (None, Some(y))) => {
                for (v, n) in [(x, a), (y, b)] {
                    if seen_reactions[v] {
                        return Err(err(ParseErrorKind::RepeatedSymmetryName(n.clone())));
                    }
                    seen_reactions[v] = true;
                }
                sym.reaction_perm[x] = y;
                sym.reaction_perm[y] = x;
            }
            _ => return Err(err(ParseErrorKind::MixedSymmetryPair(format!("{a} <-> {b}")))),
        }
    }
    Ok(sym)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self { src, pos: 0, line }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn column(&self) -> usize {
        self.src[..self.pos].chars().count() + 1
    }

    fn at_end(&self) -> bool {
        self.rest().trim().is_empty()
    }

    fn error(&self, msg: &str) -> ParseError {
        ParseError { line: self.line, column: self.column(), kind: ParseErrorKind::Syntax(msg.to_string()) }
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn try_consume(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.try_consume(s) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{s}`")))
        }
    }

    fn keyword(&mut self, kw: &str) -> Option<usize> {
        if self.rest().starts_with(kw) {
            self.pos += kw.len();
            Some(self.column())
        } else {
            None
        }
    }

    /// A species name or reaction label.
    fn token(&mut self) -> Result<String, ParseError> {
        let rest = self.rest();
        let len: usize = rest
            .char_indices()
            .take_while(|(_, c)| is_name_char(*c))
            .map(|(_, c)| c.len_utf8())
            .sum();
        if len == 0 {
            return Err(self.error("expected a name"));
        }
        let tok = rest[..len].to_string();
        self.pos += len;
        Ok(tok)
    }

    fn name_list(&mut self) -> Result<Vec<(String, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let col = self.column();
            let name = self.species_name()?;
            out.push((name, col));
            self.skip_ws();
            if self.at_end() {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn species_name(&mut self) -> Result<String, ParseError> {
        match self.rest().chars().next() {
            Some(c) if c.is_alphabetic() || c == '_' => self.token(),
            _ => Err(self.error("expected a species name")),
        }
    }

    fn side(&mut self) -> Result<Vec<(String, Coefficient)>, ParseError> {
        self.skip_ws();
        if self.rest().starts_with('0') {
            let after = &self.rest()[1..];
            let next = after.chars().next();
            if next.map_or(true, |c| !is_name_char(c)) {
                self.pos += 1;
                return Ok(Vec::new());
            }
        }
        let mut terms = Vec::new();
        loop {
            self.skip_ws();
            let digits: usize = self.rest().chars().take_while(|c| c.is_ascii_digit()).count();
            let coef = if digits > 0 {
                let col = self.column();
                let value: Coefficient = self.rest()[..digits].parse().map_err(|_| ParseError {
                    line: self.line,
                    column: col,
                    kind: ParseErrorKind::Syntax("coefficient out of range".to_string()),
                })?;
                self.pos += digits;
                if value == 0 {
                    return Err(ParseError {
                        line: self.line,
                        column: col,
                        kind: ParseErrorKind::Syntax("zero coefficient".to_string()),
                    });
                }
                self.skip_ws();
                value
            } else {
                1
            };
            let name = self.species_name()?;
            terms.push((name, coef));
            self.skip_ws();
            if !self.try_consume("+") {
                return Ok(terms);
            }
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '.'
}
