//! Concrete monotone kinetics, parameter realization, integration, and
//! steady-state continuation.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::net::{Reaction, ReactionNetwork, SymmetryInvolution};
use crate::poly::SymbolTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("negative concentration {value} for species {species}")]
    NegativeConcentration { species: usize, value: f64 },
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("flux of reaction {0} must be positive")]
    NonPositiveFlux(String),
    #[error("realized exponent for reaction {reaction}, species {species} is {value} (must be > 0)")]
    NonPositiveExponent { reaction: String, species: String, value: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, state: Vec<f64> },
    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),
}

/// One reaction's rate function. Per-species maps are keyed by species id;
/// missing entries take the documented default.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RateLaw {
    /// `k prod x^s`.
    MassAction { k: f64 },
    /// `k prod x^e`; default exponent is the stoichiometric coefficient.
    GeneralizedMassAction { k: f64, exponents: BTreeMap<usize, f64> },
    /// `k prod (x / (1 + a x))^s`; default saturation 0.
    MichaelisMenten { k: f64, saturation: BTreeMap<usize, f64> },
    /// `k prod (x^n / (K^n + x^n))^s`; defaults K = 1, n = 1.
    Hill { k: f64, half_saturation: BTreeMap<usize, f64>, hill: BTreeMap<usize, f64> },
    /// `k (x / (1 + beta x))^2 y`: Michaelis-Menten saturation on reactants
    /// with coefficient >= 2, mass action on the others.
    ExplicitMI { k: f64, beta: f64 },
}

impl RateLaw {
    pub fn rate_constant(&self) -> f64 {
        match self {
            RateLaw::MassAction { k }
            | RateLaw::GeneralizedMassAction { k, .. }
            | RateLaw::MichaelisMenten { k, .. }
            | RateLaw::Hill { k, .. }
            | RateLaw::ExplicitMI { k, .. } => *k,
        }
    }

    /// Per-reactant factor and its derivative at `x`.
    fn factor(&self, m: usize, s: u32, x: f64) -> (f64, f64) {
        let s_f = s as f64;
        let power = |e: f64| -> (f64, f64) {
            if x == 0.0 {
                let d = if e == 1.0 { 1.0 } else if e < 1.0 { f64::INFINITY } else { 0.0 };
                (0.0, d)
            } else {
                (x.powf(e), e * x.powf(e - 1.0))
            }
        };
        let saturating = |a: f64| -> (f64, f64) {
            let q = x / (1.0 + a * x);
            let dq = 1.0 / ((1.0 + a * x) * (1.0 + a * x));
            let (p, dp) = if q == 0.0 {
                (0.0, if s == 1 { 1.0 } else { 0.0 })
            } else {
                (q.powf(s_f), s_f * q.powf(s_f - 1.0))
            };
            (p, dp * dq)
        };
        match self {
            RateLaw::MassAction { .. } => power(s_f),
            RateLaw::GeneralizedMassAction { exponents, .. } => power(exponents.get(&m).copied().unwrap_or(s_f)),
            RateLaw::MichaelisMenten { saturation, .. } => saturating(saturation.get(&m).copied().unwrap_or(0.0)),
            RateLaw::Hill { half_saturation, hill, .. } => {
                let kh = half_saturation.get(&m).copied().unwrap_or(1.0);
                let n = hill.get(&m).copied().unwrap_or(1.0);
                if x == 0.0 {
                    let d = if s == 1 && n == 1.0 { 1.0 / kh } else { 0.0 };
                    return (0.0, d);
                }
                let xn = x.powf(n);
                let kn = kh.powf(n);
                let psi = xn / (kn + xn);
                let dpsi = n * kn * x.powf(n - 1.0) / ((kn + xn) * (kn + xn));
                (psi.powf(s_f), s_f * psi.powf(s_f - 1.0) * dpsi)
            }
            RateLaw::ExplicitMI { beta, .. } => {
                if s >= 2 {
                    saturating(*beta)
                } else {
                    power(s_f)
                }
            }
        }
    }

    pub fn rate(&self, reaction: &Reaction, x: &[f64]) -> f64 {
        let mut r = self.rate_constant();
        for (&m, &s) in &reaction.reactants {
            r *= self.factor(m, s, x[m]).0;
        }
        r
    }

    /// Nonzero partial derivatives `(species, d rate / d x_species)`.
    pub fn gradient(&self, reaction: &Reaction, x: &[f64]) -> Vec<(usize, f64)> {
        let factors: Vec<(usize, f64, f64)> =
            reaction.reactants.iter().map(|(&m, &s)| {
                let (f, d) = self.factor(m, s, x[m]);
                (m, f, d)
            }).collect();
        let k = self.rate_constant();
        factors
            .iter()
            .enumerate()
            .map(|(i, &(m, _, d))| {
                let others: f64 = factors.iter().enumerate().filter(|(l, _)| *l != i).map(|(_, f)| f.1).product();
                (m, k * d * others)
            })
            .collect()
    }

    fn map_species(&self, perm: &[usize]) -> RateLaw {
        let remap = |m: &BTreeMap<usize, f64>| m.iter().map(|(s, v)| (perm[*s], *v)).collect();
        match self {
            RateLaw::GeneralizedMassAction { k, exponents } => {
                RateLaw::GeneralizedMassAction { k: *k, exponents: remap(exponents) }
            }
            RateLaw::MichaelisMenten { k, saturation } => {
                RateLaw::MichaelisMenten { k: *k, saturation: remap(saturation) }
            }
            RateLaw::Hill { k, half_saturation, hill } => {
                RateLaw::Hill { k: *k, half_saturation: remap(half_saturation), hill: remap(hill) }
            }
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KineticModel {
    pub network: ReactionNetwork,
    pub laws: Vec<RateLaw>,
    pub kinetic_symmetry: bool,
}

impl KineticModel {
    pub fn new(network: ReactionNetwork, laws: Vec<RateLaw>) -> Result<Self, KineticsError> {
        if laws.len() != network.n_reactions() {
            return Err(KineticsError::Length { expected: network.n_reactions(), got: laws.len() });
        }
        let mut model = Self { network, laws, kinetic_symmetry: false };
        model.kinetic_symmetry = model.symmetric_under_network_involution();
        Ok(model)
    }

    pub fn mass_action(network: ReactionNetwork, k: f64) -> Self {
        let laws = vec![RateLaw::MassAction { k }; network.n_reactions()];
        Self::new(network, laws).expect("one law per reaction")
    }

    /// True iff laws of paired reactions coincide after mapping species.
    pub fn is_symmetric_under(&self, sym: &SymmetryInvolution) -> bool {
        (0..self.laws.len()).all(|j| self.laws[j].map_species(&sym.species_perm) == self.laws[sym.reaction(j)])
    }

    fn symmetric_under_network_involution(&self) -> bool {
        self.network.symmetry.as_ref().is_some_and(|s| self.is_symmetric_under(s))
    }

    pub fn n_species(&self) -> usize {
        self.network.n_species()
    }

    pub fn rates_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.network.reactions.iter().zip(&self.laws).map(|(r, law)| law.rate(r, x)).collect()
    }

    /// `f(x) = S r(x)`.
    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let rates = self.rates_unchecked(x);
        let mut f = vec![0.0; self.n_species()];
        for (r, v) in self.network.reactions.iter().zip(&rates) {
            for (&m, &c) in &r.reactants {
                f[m] -= c as f64 * v;
            }
            for (&m, &c) in &r.products {
                f[m] += c as f64 * v;
            }
        }
        f
    }

    /// Jacobian of `f` from the laws' analytic derivatives.
    pub fn analytic_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n_species();
        let mut j = DMatrix::zeros(n, n);
        for (r, law) in self.network.reactions.iter().zip(&self.laws) {
            for (m2, d) in law.gradient(r, x) {
                for m1 in 0..n {
                    let c = r.net(m1);
                    if c != 0 {
                        j[(m1, m2)] += c as f64 * d;
                    }
                }
            }
        }
        j
    }
}

pub fn evaluate_rates(model: &KineticModel, x: &[f64]) -> Result<Vec<f64>, KineticsError> {
    if x.len() != model.n_species() {
        return Err(KineticsError::Length { expected: model.n_species(), got: x.len() });
    }
    if let Some((m, &v)) = x.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(KineticsError::NegativeConcentration { species: m, value: v });
    }
    Ok(model.rates_unchecked(x))
}

/// Generalized mass-action model with `r(xbar) = v` and
/// `d r_j / d x_m (xbar) = rbar[id(j,m)]`, ids from `SymbolTable::new`.
pub fn realize_parameters(
    net: &ReactionNetwork,
    xbar: &[f64],
    rbar: &[f64],
    v: &[f64],
) -> Result<KineticModel, KineticsError> {
    let table = SymbolTable::new(net);
    if xbar.len() != net.n_species() {
        return Err(KineticsError::Length { expected: net.n_species(), got: xbar.len() });
    }
    if rbar.len() != table.len() {
        return Err(KineticsError::Length { expected: table.len(), got: rbar.len() });
    }
    if v.len() != net.n_reactions() {
        return Err(KineticsError::Length { expected: net.n_reactions(), got: v.len() });
    }
    let mut laws = Vec::with_capacity(net.n_reactions());
    for r in &net.reactions {
        let vj = v[r.id];
        if !(vj > 0.0) {
            return Err(KineticsError::NonPositiveFlux(r.label.clone()));
        }
        if r.reactants.is_empty() {
            laws.push(RateLaw::MassAction { k: vj });
            continue;
        }
        let mut exponents = BTreeMap::new();
        let mut denom = 1.0;
        for &m in r.reactants.keys() {
            let id = table.id(r.id, m).expect("reactant symbol") as usize;
            let e = rbar[id] * xbar[m] / vj;
            if !(e > 0.0 && e.is_finite()) {
                return Err(KineticsError::NonPositiveExponent {
                    reaction: r.label.clone(),
                    species: net.species_name(m).to_string(),
                    value: e,
                });
            }
            denom *= xbar[m].powf(e);
            exponents.insert(m, e);
        }
        laws.push(RateLaw::GeneralizedMassAction { k: vj / denom, exponents });
    }
    KineticModel::new(net.clone(), laws)
}

/// `G(rbar) = S rbar` as a dense matrix.
pub fn substituted_jacobian(net: &ReactionNetwork, rbar: &[f64]) -> DMatrix<f64> {
    let table = SymbolTable::new(net);
    let n = net.n_species();
    let mut g = DMatrix::zeros(n, n);
    for (id, s) in table.symbols.iter().enumerate() {
        for m1 in 0..n {
            let c = net.reactions[s.reaction].net(m1);
            if c != 0 {
                g[(m1, s.species)] += c as f64 * rbar[id];
            }
        }
    }
    g
}

/// Central differences with `h_m = sqrt(eps) (1 + |x_m|)`; forward
/// differences where the backward point would leave the orthant.
pub fn numeric_jacobian(model: &KineticModel, x: &[f64]) -> DMatrix<f64> {
    let n = model.n_species();
    let mut j = DMatrix::zeros(n, n);
    let sqrt_eps = f64::EPSILON.sqrt();
    for m in 0..n {
        let h = sqrt_eps * (1.0 + x[m].abs());
        let mut xp = x.to_vec();
        xp[m] += h;
        let fp = model.rhs(&xp);
        let (fm, width) = if x[m] - h >= 0.0 {
            let mut xm = x.to_vec();
            xm[m] -= h;
            (model.rhs(&xm), 2.0 * h)
        } else {
            (model.rhs(x), h)
        };
        for i in 0..n {
            j[(i, m)] = (fp[i] - fm[i]) / width;
        }
    }
    j
}

/// Orthonormal basis (columns) of the image of S.
pub fn image_basis(net: &ReactionNetwork) -> DMatrix<f64> {
    let s = net.stoichiometric_matrix();
    let rank = s.rank();
    let (n, e) = (net.n_species(), net.n_reactions());
    if rank == 0 || e == 0 {
        return DMatrix::zeros(n, 0);
    }
    let sf = DMatrix::from_fn(n, e, |i, j| s.get(i, j).to_f64().unwrap_or(0.0));
    let svd = sf.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    DMatrix::from_fn(n, rank, |i, c| u[(i, order[c])])
}

/// Conservation basis as a dense `n x |M|` matrix.
pub fn conservation_matrix(net: &ReactionNetwork) -> DMatrix<f64> {
    let basis = net.stoichiometric_matrix().left_kernel_basis();
    let rows = basis.dimension();
    DMatrix::from_fn(rows, net.n_species(), |i, j| basis.vectors[i][j].to_f64().unwrap_or(f64::NAN))
}

pub fn reduce(jac: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    q.transpose() * jac * q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

pub const STABILITY_BAND: f64 = 1e-9;

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.clone().complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect()
}

pub fn classify_spectrum(eigs: &[(f64, f64)]) -> Stability {
    let max_re = eigs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    if eigs.is_empty() || max_re < -STABILITY_BAND {
        Stability::Stable
    } else if max_re > STABILITY_BAND {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

// ---------------------------------------------------------------------------
// Integration

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub positivity_rejections: usize,
    pub rhs_evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",x_{i}"));
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for v in x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (a, k) in terms {
        if *a != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * a * v;
            }
        }
    }
    out
}

/// Dormand-Prince 5(4) with dense output at `t_eval` (ascending, within
/// `[t0, t_end]`). Steps that would drive any component below zero are
/// rejected and retried with a smaller step.
pub fn integrate<F>(f: F, x0: &[f64], t0: f64, t_end: f64, t_eval: &[f64], tol: &Tolerances) -> Result<Trajectory, KineticsError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    // Rate laws live on the closed orthant; stage states that step past an
    // extinction boundary are evaluated at their projection.
    let f = |x: &[f64]| -> Vec<f64> {
        let projected: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        f(&projected)
    };
    let n = x0.len();
    let mut stats = IntegratorStats::default();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut next_out = 0;
    while next_out < t_eval.len() && t_eval[next_out] <= t0 {
        times.push(t_eval[next_out]);
        states.push(x0.to_vec());
        next_out += 1;
    }
    let mut t = t0;
    let mut y = x0.to_vec();
    let mut k1 = f(&y);
    stats.rhs_evaluations += 1;
    let scale = |a: &[f64], b: &[f64], i: usize| tol.atol + tol.rtol * a[i].abs().max(b[i].abs());

    // Initial step (Hairer, Norsett & Wanner II.4).
    let d0 = (0..n).map(|i| (y[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt() / (n.max(1) as f64).sqrt();
    let d1 = (0..n).map(|i| (k1[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt() / (n.max(1) as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_end - t0).max(1e-12);

    let mut steps = 0;
    while t < t_end {
        steps += 1;
        if steps > tol.max_steps {
            return Err(KineticsError::TooManySteps(tol.max_steps));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(KineticsError::StepUnderflow { t, state: y });
        }
        let h_step = h.min(t_end - t);
        let k2 = f(&axpy(&y, h_step, &[(A21, &k1)]));
        let k3 = f(&axpy(&y, h_step, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(&axpy(&y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(&axpy(&y, h_step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(&axpy(&y, h_step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y1 = axpy(&y, h_step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(&y1);
        stats.rhs_evaluations += 6;
        let _ = (C2, C3, C4, C5);

        // Undershoots within the absolute tolerance are boundary arrivals
        // (finite-time extinction under sublinear laws), not instability.
        let mut y1 = y1;
        if y1.iter().all(|v| *v >= -tol.atol && v.is_finite()) {
            y1.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        if y1.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            stats.rejected += 1;
            stats.positivity_rejections += 1;
            h = 0.5 * h_step;
            continue;
        }
        let err = ((0..n)
            .map(|i| {
                let e = h_step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                (e / scale(&y, &y1, i)).powi(2)
            })
            .sum::<f64>()
            / (n.max(1) as f64))
            .sqrt();
        let factor = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        if err > 1.0 {
            stats.rejected += 1;
            h = h_step * factor.min(1.0);
            continue;
        }
        stats.accepted += 1;
        let t1 = t + h_step;
        while next_out < t_eval.len() && t_eval[next_out] <= t1 {
            let theta = (t_eval[next_out] - t) / h_step;
            let theta1 = 1.0 - theta;
            let point: Vec<f64> = (0..n)
                .map(|i| {
                    let ydiff = y1[i] - y[i];
                    let bspl = h_step * k1[i] - ydiff;
                    let r4 = ydiff - h_step * k7[i] - bspl;
                    let r5 = h_step
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                    // The interpolant may dip below a boundary the step itself
                    // reached; clamp like accepted steps.
                    (y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)))).max(0.0)
                })
                .collect();
            times.push(t_eval[next_out]);
            states.push(point);
            next_out += 1;
        }
        t = t1;
        y = y1;
        k1 = k7;
        h = h_step * factor;
    }
    Ok(Trajectory { times, states, stats })
}

pub fn simulate(
    model: &KineticModel,
    x0: &[f64],
    t_end: f64,
    t_eval: &[f64],
    tol: &Tolerances,
) -> Result<Trajectory, KineticsError> {
    if let Some((m, &v)) = x0.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(KineticsError::NegativeConcentration { species: m, value: v });
    }
    integrate(|x| model.rhs(x), x0, 0.0, t_end, t_eval, tol)
}

/// `n + 1` equally spaced points on `[0, t_end]`.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

// ---------------------------------------------------------------------------
// Steady states

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 50, tolerance: 1e-12 }
    }
}

/// Newton on `[Q^T f(x); W x - c] = 0` in the compatibility class with
/// conserved totals `c`. Components are clamped at zero.
pub struct SteadyStateProblem<'a> {
    pub model: &'a KineticModel,
    pub q: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub totals: DVector<f64>,
}

impl<'a> SteadyStateProblem<'a> {
    pub fn new(model: &'a KineticModel, totals: &[f64]) -> Self {
        let q = image_basis(&model.network);
        let w = conservation_matrix(&model.network);
        Self { model, q, w, totals: DVector::from_column_slice(totals) }
    }

    /// Conserved totals of `x`.
    pub fn totals_of(model: &KineticModel, x: &[f64]) -> Vec<f64> {
        let w = conservation_matrix(&model.network);
        (w * DVector::from_column_slice(x)).iter().copied().collect()
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        let f = DVector::from_vec(self.model.rhs(x));
        let top = self.q.transpose() * f;
        let bottom = &self.w * DVector::from_column_slice(x) - &self.totals;
        let mut r = DVector::zeros(top.len() + bottom.len());
        r.rows_mut(0, top.len()).copy_from(&top);
        r.rows_mut(top.len(), bottom.len()).copy_from(&bottom);
        r
    }

    pub fn solve(&self, seed: &[f64], opts: &NewtonOptions) -> Option<Vec<f64>> {
        let n = self.model.n_species();
        let mut x = seed.to_vec();
        let mut r = self.residual(&x);
        for _ in 0..opts.max_iterations {
            if r.amax() <= opts.tolerance {
                return Some(x);
            }
            let j = self.model.analytic_jacobian(&x);
            let top = self.q.transpose() * j;
            let mut jf = DMatrix::zeros(n, n);
            jf.rows_mut(0, top.nrows()).copy_from(&top);
            jf.rows_mut(top.nrows(), self.w.nrows()).copy_from(&self.w);
            let step = jf.lu().solve(&(-&r))?;
            if !step.iter().all(|v| v.is_finite()) {
                return None;
            }
            let norm0 = r.norm();
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = (0..n).map(|i| (x[i] + alpha * step[i]).max(0.0)).collect();
                let rt = self.residual(&trial);
                if rt.norm() < norm0 || alpha < 1e-4 {
                    x = trial;
                    r = rt;
                    break;
                }
                alpha *= 0.5;
            }
        }
        (r.amax() <= opts.tolerance).then_some(x)
    }

    /// Two converged states are the same steady state when they are close,
    /// or when the residual stays within tolerance along the segment
    /// joining them (a degenerate root resolved only to within its flat
    /// neighbourhood).
    pub fn indistinguishable(&self, a: &[f64], b: &[f64], distance: f64, tolerance: f64) -> bool {
        if a.iter().zip(b).all(|(x, y)| (x - y).abs() <= distance) {
            return true;
        }
        [0.25, 0.5, 0.75].iter().all(|t| {
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
            self.residual(&mid).amax() <= 10.0 * tolerance
        })
    }

    pub fn stability(&self, x: &[f64]) -> (Stability, Vec<(f64, f64)>) {
        let j = self.model.analytic_jacobian(x);
        let eigs = eigenvalues(&reduce(&j, &self.q));
        (classify_spectrum(&eigs), eigs)
    }
}

// ---------------------------------------------------------------------------
// The MI example

pub const MI_NETWORK: &str = "species: L1, L2\n2 L1 + L2 <-> L1 + 2 L2 @ 1 @ 2\nsymmetry: L1 <-> L2, 1 <-> 2\n";

/// MI with `r(x, y) = (x / (1 + beta x))^2 y` in both directions.
pub fn mi_model(beta: f64) -> KineticModel {
    let net = crate::net::parse_network(MI_NETWORK).expect("MI network parses");
    KineticModel::new(net, vec![RateLaw::ExplicitMI { k: 1.0, beta }; 2]).expect("two laws")
}

fn mi_f(beta: f64, x: f64) -> f64 {
    x / (1.0 + beta * x)
}

fn mi_df(beta: f64, x: f64) -> f64 {
    1.0 / ((1.0 + beta * x) * (1.0 + beta * x))
}

/// Reduced scalar ODE `d[L1]/dt = H(u)` on `[L1] + [L2] = K`.
pub fn mi_reduced_rhs(u: f64, beta: f64, total: f64) -> f64 {
    let w = total - u;
    -mi_f(beta, u).powi(2) * w + mi_f(beta, w).powi(2) * u
}

pub fn mi_reduced_derivative(u: f64, beta: f64, total: f64) -> f64 {
    let w = total - u;
    let (fu, fw) = (mi_f(beta, u), mi_f(beta, w));
    -2.0 * fu * mi_df(beta, u) * w + fu * fu - 2.0 * u * fw * mi_df(beta, w) + fw * fw
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarSteadyState {
    pub value: f64,
    pub derivative: f64,
    pub stability: Stability,
    pub multiplicity: usize,
}

/// Steady states of the reduced MI equation, ascending: the boundaries
/// `0` and `K`, the homogeneous `K/2`, and for `beta > 2/K` the pair
/// `K/2 +- sqrt(K^2/4 - 1/beta^2)`.
pub fn steady_states_mi(beta: f64, total: f64) -> Vec<ScalarSteadyState> {
    let half = total / 2.0;
    let disc = if beta > 0.0 { total * total / 4.0 - 1.0 / (beta * beta) } else { f64::NEG_INFINITY };
    let label = |u: f64, multiplicity: usize| {
        let d = mi_reduced_derivative(u, beta, total);
        let stability = if multiplicity > 1 || d.abs() <= STABILITY_BAND {
            Stability::Marginal
        } else if d < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        };
        ScalarSteadyState { value: u, derivative: d, stability, multiplicity }
    };
    let mut out = vec![label(0.0, 1)];
    if disc > 0.0 {
        let s = disc.sqrt();
        out.push(label(half - s, 1));
        out.push(label(half, 1));
        out.push(label(half + s, 1));
    } else if disc == 0.0 {
        out.push(label(half, 3));
    } else {
        out.push(label(half, 1));
    }
    out.push(label(total, 1));
    out
}

// ---------------------------------------------------------------------------
// Continuation

#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    pub param: f64,
    pub state: Vec<f64>,
    pub value: f64,
    pub stability: Stability,
    pub max_real_part: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BranchTable {
    pub points: Vec<BranchPoint>,
    /// Grid values where no steady state converged.
    pub gaps: Vec<f64>,
}

impl BranchTable {
    pub fn at(&self, param: f64) -> Vec<&BranchPoint> {
        self.points.iter().filter(|p| p.param == param).collect()
    }

    /// `param,state_index,value,stability`, states ranked by value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,state_index,value,stability\n");
        let mut i = 0;
        while i < self.points.len() {
            let p = self.points[i].param;
            let mut idx = 0;
            while i < self.points.len() && self.points[i].param == p {
                let b = &self.points[i];
                out.push_str(&format!("{},{},{},{}\n", b.param, idx, b.value, b.stability.as_str()));
                idx += 1;
                i += 1;
            }
        }
        out
    }

    /// First grid value at which some state satisfying `tracked` is not
    /// stable.
    pub fn first_loss_of_stability(&self, tracked: impl Fn(&BranchPoint) -> bool) -> Option<f64> {
        self.points.iter().find(|p| tracked(p) && p.stability != Stability::Stable).map(|p| p.param)
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub random_seeds: usize,
    pub seed: u64,
    /// Species whose concentration is reported as `value`.
    pub observable: usize,
    pub newton: NewtonOptions,
    pub dedup_tolerance: f64,
    pub seed_range: (f64, f64),
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            random_seeds: 24,
            seed: 7,
            observable: 0,
            newton: NewtonOptions::default(),
            dedup_tolerance: 1e-6,
            seed_range: (1e-3, 1e1),
        }
    }
}

/// Steady states of a one-parameter family in the class with conserved
/// `totals`, by Newton from the previous grid point's states plus
/// log-uniform random seeds.
pub fn bifurcation_scan<F>(family: F, params: &[f64], totals: &[f64], extra_seeds: &[Vec<f64>], opts: &ScanOptions) -> BranchTable
where
    F: Fn(f64) -> KineticModel + Sync,
{
    let mut table = BranchTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut previous: Vec<Vec<f64>> = Vec::new();
    let (lo, hi) = (opts.seed_range.0.ln(), opts.seed_range.1.ln());
    for &p in params {
        let model = family(p);
        let n = model.n_species();
        let problem = SteadyStateProblem::new(&model, totals);
        let mut seeds: Vec<Vec<f64>> = previous.clone();
        seeds.extend(extra_seeds.iter().cloned());
        for _ in 0..opts.random_seeds {
            seeds.push((0..n).map(|_| rng.gen_range(lo..hi).exp()).collect());
        }
        let mut found: Vec<(f64, Vec<f64>)> = seeds
            .par_iter()
            .filter_map(|s| problem.solve(s, &opts.newton))
            .map(|x| (problem.residual(&x).amax(), x))
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut unique: Vec<Vec<f64>> = Vec::new();
        for (_, x) in found {
            if !unique.iter().any(|u| problem.indistinguishable(u, &x, opts.dedup_tolerance, opts.newton.tolerance)) {
                unique.push(x);
            }
        }
        unique.sort_by(|a, b| a[opts.observable].total_cmp(&b[opts.observable]));
        if unique.is_empty() {
            table.gaps.push(p);
        }
        for x in &unique {
            let (stability, eigs) = problem.stability(x);
            let max_real_part = eigs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
            table.points.push(BranchPoint { param: p, state: x.clone(), value: x[opts.observable], stability, max_real_part });
        }
        previous = unique;
    }
    table
}

/// `v + P v` for a strictly positive kernel vector `v`: a flux that is
/// invariant under the reaction permutation.
pub fn symmetric_flux(net: &ReactionNetwork, sym: Option<&SymmetryInvolution>) -> Option<Vec<f64>> {
    let v = crate::linalg::positive_kernel_vector(&net.stoichiometric_matrix())?;
    let v: Vec<f64> = v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
    Some(match sym {
        Some(s) => (0..v.len()).map(|j| v[j] + v[s.reaction(j)]).collect(),
        None => v,
    })
}

/// Reduced-Jacobian determinant along `rbar(p) = (1 - p) a + p b`,
/// realized at `xbar = 1` with a symmetric flux.
pub fn witness_segment(
    net: &ReactionNetwork,
    sym: Option<&SymmetryInvolution>,
    a: &[f64],
    b: &[f64],
    params: &[f64],
) -> Result<Vec<(f64, f64)>, KineticsError> {
    let v = symmetric_flux(net, sym).ok_or(KineticsError::NonPositiveFlux("<kernel>".into()))?;
    let xbar = vec![1.0; net.n_species()];
    let q = image_basis(net);
    params
        .iter()
        .map(|&p| {
            let rbar: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - p) * x + p * y).collect();
            let model = realize_parameters(net, &xbar, &rbar, &v)?;
            let j = numeric_jacobian(&model, &xbar);
            Ok((p, reduce(&j, &q).determinant()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Kinetics spec files
//
//   default: ma k=1
//   reaction 12: gma k=1 e[N1]=1 e[D2]=1
//   reaction 1: mi k=1 beta=3
//   reaction 3: mm k=2 a[X]=0.5
//   reaction 4: hill k=1 K[X]=0.5 n[X]=2

#[derive(Debug, Clone, PartialEq, Error)]
#[error("kinetics spec line {line}: {message}")]
pub struct KineticsSpecError {
    pub line: usize,
    pub message: String,
}

fn parse_law(net: &ReactionNetwork, body: &str) -> Result<RateLaw, String> {
    let mut words = body.split_whitespace();
    let kind = words.next().ok_or("missing law kind")?;
    let mut k = 1.0;
    let mut beta = 0.0;
    let mut per_species: BTreeMap<&str, BTreeMap<usize, f64>> = BTreeMap::new();
    for word in words {
        let (key, value) = word.split_once('=').ok_or_else(|| format!("expected key=value, got `{word}`"))?;
        let value: f64 = value.parse().map_err(|_| format!("invalid number `{value}`"))?;
        if let Some((name, rest)) = key.split_once('[') {
            let species = rest.strip_suffix(']').ok_or_else(|| format!("unclosed bracket in `{key}`"))?;
            let m = net.species_index(species).ok_or_else(|| format!("unknown species `{species}`"))?;
            per_species.entry(name).or_default().insert(m, value);
        } else {
            match key {
                "k" => k = value,
                "beta" => beta = value,
                other => return Err(format!("unknown parameter `{other}`")),
            }
        }
    }
    let mut take = |name: &str| per_species.remove(name).unwrap_or_default();
    let law = match kind {
        "ma" => RateLaw::MassAction { k },
        "gma" => RateLaw::GeneralizedMassAction { k, exponents: take("e") },
        "mm" => RateLaw::MichaelisMenten { k, saturation: take("a") },
        "hill" => RateLaw::Hill { k, half_saturation: take("K"), hill: take("n") },
        "mi" => RateLaw::ExplicitMI { k, beta },
        other => return Err(format!("unknown law `{other}` (expected ma, gma, mm, hill or mi)")),
    };
    if let Some(name) = per_species.keys().next() {
        return Err(format!("parameter `{name}[..]` does not apply to `{kind}`"));
    }
    Ok(law)
}

/// Parses a kinetics spec; `$p` is replaced by `param` when given.
pub fn parse_kinetics(net: &ReactionNetwork, text: &str, param: Option<f64>) -> Result<KineticModel, KineticsSpecError> {
    let text = match param {
        Some(p) => text.replace("$p", &format!("{p}")),
        None => text.to_string(),
    };
    let mut default = None;
    let mut laws: Vec<Option<RateLaw>> = vec![None; net.n_reactions()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| KineticsSpecError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (head, body) = content.split_once(':').ok_or_else(|| err("expected `default:` or `reaction <label>:`".into()))?;
        let law = parse_law(net, body).map_err(err)?;
        let head = head.trim();
        if head == "default" {
            default = Some(law);
        } else if let Some(label) = head.strip_prefix("reaction ") {
            let j = net.reaction_index(label.trim()).ok_or_else(|| err(format!("unknown reaction `{}`", label.trim())))?;
            if laws[j].is_some() {
                return Err(err(format!("reaction `{}` given twice", label.trim())));
            }
            laws[j] = Some(law);
        } else {
            return Err(err(format!("unexpected `{head}`")));
        }
    }
    let laws = laws
        .into_iter()
        .enumerate()
        .map(|(j, l)| {
            l.or_else(|| default.clone()).ok_or_else(|| KineticsSpecError {
                line: 0,
                message: format!("no law for reaction `{}` and no default", net.reaction_label(j)),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KineticModel::new(net.clone(), laws).expect("one law per reaction"))
}

// ---------------------------------------------------------------------------
// Monotonicity checks

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneReport {
    pub samples: usize,
    pub violations: Vec<String>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples the four defining properties of a monotone chemical rate on
/// random positive points and on the boundary faces `x_m = 0`.
pub fn validate_monotone_chemical(law: &RateLaw, reaction: &Reaction, n_species: usize, samples: usize, seed: u64) -> MonotoneReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for i in 0..samples {
        let x: Vec<f64> = (0..n_species).map(|_| rng.gen_range(-3.0..3.0f64).exp()).collect();
        let r = law.rate(reaction, &x);
        if !(r > 0.0) {
            violations.push(format!("sample {i}: rate {r} not positive at positive state"));
        }
        for (m, d) in law.gradient(reaction, &x) {
            if !(d > 0.0) {
                violations.push(format!("sample {i}: d r / d x_{m} = {d} not positive"));
            }
        }
        for m in 0..n_species {
            let mut y = x.clone();
            y[m] = 0.0;
            let r0 = law.rate(reaction, &y);
            if reaction.is_reactant(m) && r0 != 0.0 {
                violations.push(format!("sample {i}: rate {r0} nonzero with reactant {m} absent"));
            }
            if !(r0 >= 0.0) {
                violations.push(format!("sample {i}: negative rate {r0} on boundary"));
            }
            if !reaction.is_reactant(m) {
                let mut z = x.clone();
                z[m] *= 2.0;
                if law.rate(reaction, &z) != r {
                    violations.push(format!("sample {i}: rate depends on non-reactant {m}"));
                }
            }
        }
    }
    MonotoneReport { samples, violations }
}
