//! Sparse integer polynomials over reactivity symbols.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::net::{ReactionNetwork, SymmetryInvolution};

pub type SymbolId = u32;

/// Sorted multiset of symbol ids.
pub type Monomial = Vec<SymbolId>;

/// The symbol `r_{j,m}`: derivative of rate `j` with respect to species `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ReactivitySymbol {
    pub reaction: usize,
    pub species: usize,
}

/// Symbols on the reactant support of a network, ordered by (reaction,
/// species). `canonical[i]` is the representative after the symmetry
/// quotient (the identity when no quotient is applied).
#[derive(Debug, Clone, Serialize)]
pub struct SymbolTable {
    pub symbols: Vec<ReactivitySymbol>,
    pub names: Vec<String>,
    pub canonical: Vec<SymbolId>,
    #[serde(skip)]
    index: HashMap<(usize, usize), SymbolId>,
}

impl SymbolTable {
    pub fn new(net: &ReactionNetwork) -> Self {
        let mut symbols = Vec::new();
        let mut names = Vec::new();
        let mut index = HashMap::new();
        for r in &net.reactions {
            for &m in r.reactants.keys() {
                index.insert((r.id, m), symbols.len() as SymbolId);
                symbols.push(ReactivitySymbol { reaction: r.id, species: m });
                names.push(format!("r_{{{},{}}}", r.label, net.species_name(m)));
            }
        }
        let canonical = (0..symbols.len() as SymbolId).collect();
        Self { symbols, names, canonical, index }
    }

    /// Table whose `canonical` map identifies `r_{j,m}` with
    /// `r_{sigma(j),sigma(m)}`, keeping the smaller id.
    pub fn with_symmetry(net: &ReactionNetwork, sym: &SymmetryInvolution) -> Self {
        let mut t = Self::new(net);
        for (i, s) in t.symbols.iter().enumerate() {
            let partner = t.index[&(sym.reaction(s.reaction), sym.species(s.species))];
            t.canonical[i] = partner.min(i as SymbolId);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, reaction: usize, species: usize) -> Option<SymbolId> {
        self.index.get(&(reaction, species)).copied()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.names[id as usize]
    }

    pub fn id_by_name(&self, name: &str) -> Option<SymbolId> {
        self.names.iter().position(|n| n == name).map(|i| i as SymbolId)
    }

    pub fn is_quotiented(&self) -> bool {
        self.canonical.iter().enumerate().any(|(i, c)| *c as usize != i)
    }

    /// Canonical representatives, ascending.
    pub fn representatives(&self) -> Vec<SymbolId> {
        (0..self.len() as SymbolId).filter(|&i| self.canonical[i as usize] == i).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigInt>,
}

/// Alias matching the usual name for the coefficient carrier; after a
/// symmetry quotient squares may appear, so multilinearity is not enforced.
pub type MultilinearPolynomial = Polynomial;

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c.into());
        p
    }

    pub fn symbol(id: SymbolId) -> Self {
        let mut p = Self::zero();
        p.add_term(vec![id], BigInt::one());
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, BigInt)>) -> Self {
        let mut p = Self::zero();
        for (mut m, c) in terms {
            m.sort_unstable();
            p.add_term(m, c);
        }
        p
    }

    /// `monomial` must be sorted.
    pub fn add_term(&mut self, monomial: Monomial, coef: BigInt) {
        if coef.is_zero() {
            return;
        }
        debug_assert!(monomial.windows(2).all(|w| w[0] <= w[1]));
        match self.terms.entry(monomial) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coef;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, monomial: &[SymbolId]) -> BigInt {
        let mut m = monomial.to_vec();
        m.sort_unstable();
        self.terms.get(&m).cloned().unwrap_or_default()
    }

    pub fn has_positive(&self) -> bool {
        self.terms.values().any(Signed::is_positive)
    }

    pub fn has_negative(&self) -> bool {
        self.terms.values().any(Signed::is_negative)
    }

    pub fn is_multilinear(&self) -> bool {
        self.terms.keys().all(|m| m.windows(2).all(|w| w[0] != w[1]))
    }

    /// Total degree when homogeneous.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut degs = self.terms.keys().map(Vec::len);
        let d = degs.next()?;
        degs.all(|e| e == d).then_some(d)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(merge_sorted(m1, m2), c1 * c2);
            }
        }
        out
    }

    /// Rewrites every symbol through `map` and combines like terms.
    pub fn map_symbols(&self, map: impl Fn(SymbolId) -> SymbolId) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut mm: Monomial = m.iter().map(|&s| map(s)).collect();
            mm.sort_unstable();
            out.add_term(mm, c.clone());
        }
        out
    }

    /// Applies the table's symmetry quotient.
    pub fn quotient(&self, table: &SymbolTable) -> Self {
        self.map_symbols(|s| table.canonical[s as usize])
    }

    /// Substitutes `values[id]` for each symbol.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c.to_f64().unwrap_or(f64::NAN) * monomial_value(m, values)).sum()
    }

    /// Sum of absolute term values at `values`; the scale for relative
    /// residuals.
    pub fn magnitude(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.to_f64().unwrap_or(f64::NAN).abs() * monomial_value(m, values).abs())
            .sum()
    }

    /// Symbols occurring in the polynomial, ascending.
    pub fn support(&self) -> Vec<SymbolId> {
        let mut s: Vec<SymbolId> = self.terms.keys().flatten().copied().collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// gcd of all coefficients (0 for the zero polynomial).
    pub fn content(&self) -> BigInt {
        use num_integer::Integer;
        self.terms.values().fold(BigInt::zero(), |acc, c| acc.gcd(c))
    }

    pub fn display<'a>(&'a self, table: &'a SymbolTable) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, table }
    }

    /// `(coefficient, [symbol names])` pairs in canonical order.
    pub fn to_named_terms(&self, table: &SymbolTable) -> Vec<(String, Vec<String>)> {
        self.terms
            .iter()
            .map(|(m, c)| (c.to_string(), m.iter().map(|&s| table.name(s).to_string()).collect()))
            .collect()
    }
}

fn monomial_value(m: &[SymbolId], values: &[f64]) -> f64 {
    m.iter().map(|&s| values[s as usize]).product()
}

fn merge_sorted(a: &[SymbolId], b: &[SymbolId]) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

pub struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    table: &'a SymbolTable,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.poly.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else { "+" };
            if i == 0 {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let abs = c.abs();
            let mut parts: Vec<String> = Vec::new();
            if !abs.is_one() || m.is_empty() {
                parts.push(abs.to_string());
            }
            parts.extend(m.iter().map(|&s| self.table.name(s).to_string()));
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn like_terms_cancel() {
        let x = Polynomial::symbol(0);
        let y = Polynomial::symbol(1);
        let p = x.mul(&y).sub(&y.mul(&x));
        assert!(p.is_zero());
    }

    #[test]
    fn quotient_creates_squares() {
        let p = Polynomial::symbol(0).mul(&Polynomial::symbol(1));
        let q = p.map_symbols(|_| 0);
        assert_eq!(q.coefficient(&[0, 0]), BigInt::one());
        assert!(!q.is_multilinear());
    }

    #[test]
    fn evaluate_and_magnitude() {
        let p = Polynomial::from_terms([(vec![0, 1], BigInt::from(2)), (vec![1], BigInt::from(-3))]);
        assert_eq!(p.evaluate(&[2.0, 5.0]), 20.0 - 15.0);
        assert_eq!(p.magnitude(&[2.0, 5.0]), 35.0);
        assert_eq!(p.content(), BigInt::one());
    }
}
