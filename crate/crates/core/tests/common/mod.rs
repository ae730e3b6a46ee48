#![allow(dead_code)]

use std::path::PathBuf;

use crn_core::net::{parse_network, ReactionNetwork};
use crn_core::poly::{Polynomial, SymbolTable};

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(format!("{name}.crn"))
}

pub fn model(name: &str) -> ReactionNetwork {
    let text = std::fs::read_to_string(model_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    parse_network(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn species(net: &ReactionNetwork, names: &[&str]) -> Vec<usize> {
    names.iter().map(|n| net.species_index(n).unwrap_or_else(|| panic!("species {n}"))).collect()
}

pub fn reactions(net: &ReactionNetwork, labels: &[&str]) -> Vec<usize> {
    labels.iter().map(|l| net.reaction_index(l).unwrap_or_else(|| panic!("reaction {l}"))).collect()
}

/// Product of named symbols.
pub fn mono(table: &SymbolTable, names: &[&str]) -> Polynomial {
    let mut ids: Vec<u32> = names.iter().map(|n| table.id_by_name(n).unwrap_or_else(|| panic!("symbol {n}"))).collect();
    ids.sort_unstable();
    Polynomial::from_terms([(ids, 1.into())])
}

/// Sum of signed products of named symbols.
pub fn poly(table: &SymbolTable, terms: &[(i64, &[&str])]) -> Polynomial {
    let mut p = Polynomial::zero();
    for (c, names) in terms {
        p.add_assign(&mono(table, names).scale(&(*c).into()));
    }
    p
}

/// Integer vector of a linear combination of species (`w . x`).
pub fn combination(net: &ReactionNetwork, names: &[&str]) -> Vec<num_bigint::BigInt> {
    let mut w = vec![num_bigint::BigInt::from(0); net.n_species()];
    for m in species(net, names) {
        w[m] += 1;
    }
    w
}

pub const CORPUS: &[&str] = &[
    "Frame1", "BI", "BI_prime", "BI_BII", "BIII", "CisR", "MI", "MII", "MIII", "MIIIb", "MIV", "MV", "NonAut-I-2",
    "NonAut-I-3", "NonAut-II-1", "NonAut-II-2",
];

/// A random positive steady-state point: `xbar`, a strictly positive
/// flux `v` in the kernel of S, and symbols `rbar` (raw ids) with
/// realized exponents `rbar x / v` in [0.5, 2].
pub struct RandomPoint {
    pub xbar: Vec<f64>,
    pub rbar: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn random_point(net: &ReactionNetwork, rng: &mut impl rand::Rng) -> Option<RandomPoint> {
    use num_traits::ToPrimitive;
    let s = net.stoichiometric_matrix();
    let v0: Vec<f64> =
        crn_core::linalg::positive_kernel_vector(&s)?.iter().map(|x| x.to_f64().unwrap()).collect();
    let basis: Vec<Vec<f64>> = crn_core::linalg::right_kernel_basis(&s)
        .iter()
        .map(|b| b.iter().map(|x| x.to_f64().unwrap()).collect())
        .collect();
    let v = loop {
        let scale = rng.gen_range(0.5..2.0);
        let mut v: Vec<f64> = v0.iter().map(|x| x * scale).collect();
        for b in &basis {
            let c = rng.gen_range(-0.3..0.3);
            for (x, y) in v.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        if v.iter().all(|x| *x > 1e-3) {
            break v;
        }
    };
    let xbar: Vec<f64> = (0..net.n_species()).map(|_| rng.gen_range(-1.0f64..1.0).exp()).collect();
    let table = SymbolTable::new(net);
    let rbar = table
        .symbols
        .iter()
        .map(|sym| v[sym.reaction] / xbar[sym.species] * rng.gen_range(0.5..2.0))
        .collect();
    Some(RandomPoint { xbar, rbar, v })
}
