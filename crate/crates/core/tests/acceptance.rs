//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` contain a sub-check that cannot
//! hold as stated; they are expected to FAIL, and the run only errors when
//! the set of failing criteria differs from that list.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::{combination, model, poly, random_point, species, CORPUS};
use crn_core::child_selection::{
    find_unstable_positive_feedbacks, hasse_minimal_feedbacks, is_autocatalytic, motif_classes, spectrum,
    ChildSelection, Feedback,
};
use crn_core::kinetics::{
    bifurcation_scan, conservation_matrix, eigenvalues, mi_model, mi_reduced_derivative, numeric_jacobian,
    realize_parameters, simulate, steady_states_mi, substituted_jacobian, uniform_times, ScanOptions, Stability,
    Tolerances,
};
use crn_core::linalg::positive_kernel_vector;
use crn_core::net::{parse_network, ReactionNetwork};
use crn_core::poly::SymbolTable;
use crn_core::report::validate;
use crn_core::symbolic::{
    capacity_for_differentiation, char_poly_coefficients, diagonal_dominance_check, oracle_char_poly, symbol_table,
    trace_sign_analysis, TraceSign, Verdict,
};
use nalgebra::DVector;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// NonAut-II: the expanded lambda^2 coefficient in its reference form,
/// e^2 + 2ea + b^2 - a^2, is not the principal-minor sum of its own
/// Jacobian, (b + e)^2 - a^2 (cross term 2eb, not 2ea).
const KNOWN_UNATTAINABLE: &[u32] = &[8];

const WITNESS_RELATIVE_RESIDUAL: f64 = 1e-12;
const ZERO_EIGENVALUE: f64 = 1e-6;
const STABLE_SPECTRUM: f64 = 1e-9;
const FAMILY_RESIDUAL: f64 = 1e-12;
const GENERIC_RESIDUAL: f64 = 1e-6;
const MI_ROOT: f64 = 1e-9;
const MI_GRID: f64 = 0.05;
const MI_CONVERGENCE: f64 = 1e-6;
const REAL_EIGENVALUE: f64 = 1e-9;
const FD_JACOBIAN: f64 = 1e-5;
const DRIFT: f64 = 1e-6;
const WITNESS_BALANCE: f64 = 1e-9;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn feedback_sets(net: &ReactionNetwork, fbs: &[Feedback]) -> BTreeSet<(BTreeSet<String>, BTreeSet<String>)> {
    fbs.iter()
        .map(|f| {
            let k = f.selection.kappa.iter().map(|&m| net.species_name(m).to_string()).collect();
            let e = f.selection.j_map.iter().map(|&j| net.reaction_label(j).to_string()).collect();
            (k, e)
        })
        .collect()
}

fn named_sets(list: &[(&[&str], &[&str])]) -> BTreeSet<(BTreeSet<String>, BTreeSet<String>)> {
    list.iter()
        .map(|(k, e)| (k.iter().map(|s| s.to_string()).collect(), e.iter().map(|s| s.to_string()).collect()))
        .collect()
}

fn conservation_matches(net: &ReactionNetwork, laws: &[&[&str]]) -> Result<(), String> {
    let w = net.stoichiometric_matrix().left_kernel_basis();
    let expected: Vec<Vec<BigInt>> = laws.iter().map(|l| combination(net, l)).collect();
    ensure(w.dimension() == laws.len(), format!("{} conservation laws, expected {}", w.dimension(), laws.len()))?;
    ensure(w.same_span(&expected), "conservation span differs")
}

fn c1() -> Check {
    let net = model("Frame1");
    let cp = char_poly_coefficients(&net, None);
    let t = &cp.table;
    ensure(cp.a(1) == &poly(t, &[(-1, &["r_{1,Y}"]), (-1, &["r_{1,X1}"]), (-1, &["r_{2,X2}"])]), "a1")?;
    ensure(cp.a(2) == &poly(t, &[(1, &["r_{1,X1}", "r_{2,X2}"]), (-1, &["r_{1,Y}", "r_{2,X2}"])]), "a2")?;
    ensure(cp.a(3).is_zero(), "a3 not identically zero")?;
    let fbs = find_unstable_positive_feedbacks(&net);
    ensure(fbs.len() == 1, format!("{} UPFs", fbs.len()))?;
    ensure(fbs[0].matrix.matrix == vec![vec![-1, 2], vec![1, -1]], "UPF matrix")?;
    ensure(fbs[0].classification.is_metzler && is_autocatalytic(&net), "not autocatalytic")?;
    ensure(positive_kernel_vector(&net.stoichiometric_matrix()).is_none(), "unexpectedly consistent")?;
    Ok("a1..a3 exact, UPF [[-1,2],[1,-1]] Metzler, inconsistent".into())
}

fn c2() -> Check {
    let net = model("BI");
    let v = positive_kernel_vector(&net.stoichiometric_matrix()).ok_or("inconsistent")?;
    ensure(v.iter().all(|x| *x == BigInt::from(1)), "flux is not all-ones")?;
    conservation_matches(
        &net,
        &[&["NI1", "N1"], &["D1", "T1"], &["NE1", "N1", "T1", "NE2", "N2", "T2"], &["NI2", "N2"], &["D2", "T2"]],
    )?;
    ensure(diagonal_dominance_check(&net), "diagonal dominance fails")?;
    ensure(find_unstable_positive_feedbacks(&net).is_empty(), "UPFs present")?;
    for sym in [None, net.symmetry.as_ref()] {
        let c = capacity_for_differentiation(&net, sym).map_err(|e| e.to_string())?;
        ensure(c.k_tilde == 5 && c.nondegenerate, format!("k~ = {}", c.k_tilde))?;
        ensure(c.verdict == Verdict::NoCapacity, format!("verdict {:?}", c.verdict))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let p = random_point(&net, &mut rng).ok_or("no positive point")?;
        let m = realize_parameters(&net, &p.xbar, &p.rbar, &p.v).map_err(|e| e.to_string())?;
        let re = eigenvalues(&m.analytic_jacobian(&p.xbar)).iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(re);
    }
    ensure(worst <= STABLE_SPECTRUM, format!("max Re = {worst:e}"))?;
    Ok(format!("5 laws, k~ = 5, 0 UPFs, NoCapacity; 50 realizations max Re = {worst:.1e}"))
}

fn c3() -> Check {
    let net = model("BI_BII");
    conservation_matches(
        &net,
        &[
            &["NI1", "N1", "C1"],
            &["D1", "T1", "C1"],
            &["NE1", "N1", "T1", "C1", "NE2", "N2", "T2", "C2"],
            &["NI2", "N2", "C2"],
            &["D2", "T2", "C2"],
        ],
    )?;
    let fbs = find_unstable_positive_feedbacks(&net);
    let expected = named_sets(&[
        (&["NI1", "N1", "D1", "N2", "D2"], &["11", "12", "14", "22", "24"]),
        (&["N1", "D1", "NI2", "N2", "D2"], &["12", "14", "21", "22", "24"]),
        (&["N1", "D1", "T1", "N2", "D2"], &["12", "13", "14", "22", "24"]),
        (&["N1", "D1", "N2", "D2", "T2"], &["12", "14", "22", "23", "24"]),
        (&["NI1", "N1", "D1", "NE2", "N2", "T2"], &["11", "12", "14", "21", "22", "23"]),
        (&["NE1", "N1", "T1", "NI2", "N2", "D2"], &["11", "12", "13", "21", "22", "24"]),
    ]);
    ensure(fbs.len() == 6 && feedback_sets(&net, &fbs) == expected, format!("{} UPFs / sets differ", fbs.len()))?;
    ensure(fbs.iter().all(|f| !f.classification.is_metzler), "Metzler UPF")?;
    let classes = motif_classes(&fbs, net.symmetry.as_ref());
    ensure(classes.len() == 3, format!("{} motif classes", classes.len()))?;
    let c = capacity_for_differentiation(&net, net.symmetry.as_ref()).map_err(|e| e.to_string())?;
    ensure(c.k_tilde == 7 && c.nondegenerate, format!("k~ = {}", c.k_tilde))?;
    ensure(c.leading.has_positive() && c.leading.has_negative(), "a7 has one sign")?;
    let w = c.witness.as_ref().ok_or("no witness")?;
    ensure(w.relative_residual < WITNESS_RELATIVE_RESIDUAL, format!("residual {:e}", w.relative_residual))?;
    let v = validate(&net, Some(w), 1);
    let lam = v.min_abs_reduced_eigenvalue.unwrap_or(f64::INFINITY);
    ensure(lam < ZERO_EIGENVALUE, format!("min |lambda| = {lam:e}"))?;
    Ok(format!(
        "6 UPFs = kappa1..6, 3 classes, a7 mixed; witness residual {:.1e}, min |lambda| {lam:.1e}",
        w.relative_residual
    ))
}

fn c4() -> Check {
    let net = model("BIII");
    conservation_matches(
        &net,
        &[
            &["Ds1", "D1", "T1", "B1"],
            &["NI1", "N1", "B2"],
            &["NE1", "N1", "T1", "B1", "NE2", "N2", "T2", "B2"],
            &["Ds2", "D2", "T2", "B2"],
            &["B1", "NI2", "N2"],
        ],
    )?;
    let fbs = find_unstable_positive_feedbacks(&net);
    let expected = named_sets(&[
        (&["Ds1", "D1", "T1", "N2"], &["18", "19", "22", "26"]),
        (&["N1", "Ds2", "D2", "T2"], &["12", "16", "28", "29"]),
    ]);
    ensure(fbs.len() == 2 && feedback_sets(&net, &fbs) == expected, "UPF sets differ")?;
    ensure(fbs.iter().all(|f| !f.classification.is_metzler), "Metzler UPF")?;
    let cp = char_poly_coefficients(&net, net.symmetry.as_ref());
    let (k_tilde, a9) = (9, cp.a(9));
    ensure(!a9.is_zero() && cp.a(10).is_zero(), "k~ != 9")?;
    let t = &cp.table;
    let id = |n: &str| t.id_by_name(n).map(|i| i as usize).ok_or(format!("symbol {n}"));
    let (r7b, r2n, r2d, r6n) = (id("r_{17,B2}")?, id("r_{12,N1}")?, id("r_{12,D2}")?, id("r_{16,N1}")?);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut on, mut off) = (0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let mut x: Vec<f64> = (0..t.len()).map(|_| rng.gen_range(-2.0f64..2.0).exp()).collect();
        off = off.min((a9.evaluate(&x) / a9.magnitude(&x)).abs());
        x[r7b] = x[r2d] * x[r6n] / x[r2n];
        on = on.max((a9.evaluate(&x) / a9.magnitude(&x)).abs());
    }
    ensure(on < FAMILY_RESIDUAL, format!("family residual {on:e}"))?;
    ensure(off > GENERIC_RESIDUAL, format!("generic residual {off:e}"))?;
    Ok(format!("k~ = {k_tilde}, 2 UPFs = kappa1,2; family max {on:.1e}, generic min {off:.1e}"))
}

fn c5() -> Check {
    let net = model("BI_prime");
    ensure(diagonal_dominance_check(&net), "diagonal dominance fails")?;
    let c = capacity_for_differentiation(&net, net.symmetry.as_ref()).map_err(|e| e.to_string())?;
    ensure(c.verdict == Verdict::NoCapacity, format!("verdict {:?}", c.verdict))?;
    Ok("NoCapacity, diagonal dominance holds".into())
}

fn c6() -> Check {
    for beta in [2.5f64, 3.0, 10.0] {
        let s = (0.25 - 1.0 / (beta * beta)).sqrt();
        let values: Vec<f64> = steady_states_mi(beta, 1.0).iter().map(|x| x.value).collect();
        let expected = [0.0, 0.5 - s, 0.5, 0.5 + s, 1.0];
        ensure(values.len() == 5, format!("beta {beta}: {values:?}"))?;
        let err = values.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(err < MI_ROOT, format!("beta {beta}: error {err:e}"))?;
    }
    let params: Vec<f64> = (0..=120).map(|i| i as f64 * 0.05).collect();
    let table = bifurcation_scan(mi_model, &params, &[1.0], &[vec![0.5, 0.5]], &ScanOptions::default());
    let lost = table.first_loss_of_stability(|p| (p.value - 0.5).abs() < 1e-6).ok_or("no loss of stability")?;
    ensure((lost - 2.0).abs() <= MI_GRID, format!("pitchfork at {lost}"))?;
    for b in &table.points {
        if b.value.abs() < 1e-9 || (b.value - 1.0).abs() < 1e-9 {
            ensure(b.stability == Stability::Unstable, format!("boundary stable at beta {}", b.param))?;
        }
    }
    for &beta in &params {
        ensure(mi_reduced_derivative(0.0, beta, 1.0) > 0.0, format!("H'(0) <= 0 at beta {beta}"))?;
    }
    let s = (0.25f64 - 1.0 / 9.0).sqrt();
    let m = mi_model(3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u0: f64 = rng.gen_range(0.01..0.99);
        let traj = simulate(&m, &[u0, 1.0 - u0], 4000.0, &[4000.0], &Tolerances::default()).map_err(|e| e.to_string())?;
        let target = if u0 > 0.5 { 0.5 + s } else { 0.5 - s };
        worst = worst.max((traj.last()[0] - target).abs());
    }
    ensure(worst < MI_CONVERGENCE, format!("convergence error {worst:e}"))?;
    Ok(format!("roots exact, pitchfork at beta = {lost}, boundaries unstable, 20 runs within {worst:.1e}"))
}

fn c7() -> Check {
    for (name, frozen) in [("MII", &["NI1", "NI2", "D1", "D2"][..]), ("MIV", &["D1", "D2"][..]), ("MV", &["L1", "L2"][..])] {
        let net = model(name);
        let set: BTreeSet<usize> = species(&net, frozen).into_iter().collect();
        let tr = trace_sign_analysis(&net, &set, net.symmetry.as_ref());
        ensure(tr.sign == TraceSign::AlwaysNegative, format!("{name}: trace {:?}", tr.sign))?;
        let c = capacity_for_differentiation(&net, net.symmetry.as_ref()).map_err(|e| e.to_string())?;
        ensure(c.verdict == Verdict::NoCapacity, format!("{name}: {:?}", c.verdict))?;
    }
    let net = model("MIII");
    let set: BTreeSet<usize> = species(&net, &["NI1", "NI2"]).into_iter().collect();
    let tr = trace_sign_analysis(&net, &set, net.symmetry.as_ref());
    ensure(tr.sign == TraceSign::Mixed, format!("MIII: trace {:?}", tr.sign))?;
    let c = capacity_for_differentiation(&net, net.symmetry.as_ref()).map_err(|e| e.to_string())?;
    ensure(c.verdict == Verdict::Capable, format!("MIII: {:?}", c.verdict))?;
    let w = c.witness.as_ref().ok_or("MIII: no witness")?;
    let t = symbol_table(&net, net.symmetry.as_ref());
    let g1 = w.values[t.id_by_name("r_{1,L2}").ok_or("symbol")? as usize];
    let g2 = w.values[t.id_by_name("r_{1,L1}").ok_or("symbol")? as usize];
    let gap = (g1 - g2).abs() / g1.max(g2);
    ensure(gap < WITNESS_BALANCE, format!("MIII witness g1 - g2 = {gap:e}"))?;
    Ok(format!("MII/MIV/MV trace negative, NoCapacity; MIII mixed, Capable, |g1 - g2| = {gap:.1e}"))
}

fn c8() -> Check {
    for eta in [2i64, 3] {
        let net = model(&format!("NonAut-I-{eta}"));
        let cp = char_poly_coefficients(&net, net.symmetry.as_ref());
        let t = &cp.table;
        let expected = poly(t, &[(1, &["r_{1,L1}", "r_{1,L1}"]), (-1, &["r_{1,L2}", "r_{1,L2}"])]).scale(&(eta * eta - 1).into());
        ensure(cp.a(2) == &expected, format!("NonAut-I-{eta}: det G"))?;
        let fbs = find_unstable_positive_feedbacks(&net);
        ensure(
            fbs.iter().any(|f| f.matrix.matrix == vec![vec![-1, -eta], vec![-eta, -1]]),
            format!("NonAut-I-{eta}: motif matrix"),
        )?;
    }
    let unit = parse_network(
        "L1 + L2 -> 0 @ 1\nL2 + L1 -> 0 @ 2\n0 -> L2 @ P2\n0 -> L1 @ P1\nsymmetry: L1 <-> L2, 1 <-> 2, P1 <-> P2",
    )
    .map_err(|e| e.to_string())?;
    ensure(char_poly_coefficients(&unit, unit.symmetry.as_ref()).a(2).is_zero(), "eta = 1: det G not zero")?;

    let mut reference_matches = true;
    for eta in [1, 2] {
        let net = model(&format!("NonAut-II-{eta}"));
        let cp = char_poly_coefficients(&net, net.symmetry.as_ref());
        let t: &SymbolTable = &cp.table;
        let (a, b, e) = ("r_{1,L1}", "r_{1,L2}", "r_{2,I2}");
        let fbs = find_unstable_positive_feedbacks(&net);
        ensure(fbs.len() == 1, format!("NonAut-II-{eta}: {} UPFs", fbs.len()))?;
        let want = ChildSelection { kappa: species(&net, &["L1", "L2"]), j_map: vec![0, 2] };
        ensure(fbs[0].selection == want && fbs[0].matrix.matrix == vec![vec![0, -1], vec![-1, 0]], "NonAut-II motif")?;
        let mut x = vec![0.0; t.len()];
        for (bv, ev) in [(0.3, 0.5), (1.7, 0.2), (4.0, 4.0)] {
            x[t.id_by_name(b).unwrap() as usize] = bv;
            x[t.id_by_name(e).unwrap() as usize] = ev;
            x[t.id_by_name(a).unwrap() as usize] = bv + ev;
            ensure(cp.a(2).evaluate(&x).abs() < 1e-12, "bifurcation condition does not zero a2")?;
        }
        let expected = poly(t, &[(1, &[e, e]), (2, &[e, a]), (1, &[b, b]), (-1, &[a, a])]);
        reference_matches &= cp.a(2) == &expected;
    }
    ensure(
        reference_matches,
        "NonAut-I identities hold, UPFs and bifurcation condition hold; NonAut-II a2 = (b+e)^2 - a^2 differs from \
         the reference form e^2 + 2ea + b^2 - a^2",
    )?;
    Ok("NonAut-I det identity, eta = 1 degenerate, NonAut-II motif and lambda^2 coefficient".into())
}

fn random_network(rng: &mut ChaCha8Rng) -> ReactionNetwork {
    const NAMES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];
    loop {
        let n = rng.gen_range(1..=6);
        let e = rng.gen_range(1..=6);
        let mut text = String::new();
        let mut ok = true;
        for j in 0..e {
            let mut sides = Vec::new();
            for _ in 0..2 {
                let terms: Vec<String> = (0..n)
                    .filter_map(|m| match rng.gen_range(0..=4) {
                        1 => Some(NAMES[m].to_string()),
                        2 => Some(format!("2 {}", NAMES[m])),
                        _ => None,
                    })
                    .collect();
                sides.push(if terms.is_empty() { "0".to_string() } else { terms.join(" + ") });
            }
            ok &= !(sides[0] == "0" && sides[1] == "0");
            text.push_str(&format!("{} -> {} @ {}\n", sides[0], sides[1], j + 1));
        }
        if ok {
            return parse_network(&text).expect("generated network parses");
        }
    }
}

fn c9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut upfs = 0;
    for i in 0..100 {
        let net = random_network(&mut rng);
        let cp = char_poly_coefficients(&net, None);
        let oracle = oracle_char_poly(&net, None).map_err(|e| e.to_string())?;
        ensure(oracle == cp.coefficients, format!("network {i}: expansion differs from oracle\n{net}"))?;
        let mut hasse: Vec<ChildSelection> = hasse_minimal_feedbacks(&net).into_iter().map(|f| f.selection).collect();
        let mut scan: Vec<ChildSelection> =
            find_unstable_positive_feedbacks(&net).into_iter().map(|f| f.selection).collect();
        hasse.sort();
        scan.sort();
        ensure(hasse == scan, format!("network {i}: Hasse and scan differ\n{net}"))?;
        upfs += scan.len();
    }
    Ok(format!("100 networks: coefficients equal, {upfs} minimal UPFs agree"))
}

fn c10() -> Check {
    let mut count = 0;
    for name in CORPUS {
        let net = model(name);
        for f in find_unstable_positive_feedbacks(&net) {
            let sp = spectrum(&f.matrix);
            ensure(
                sp.positive_real_part == 1 && sp.max_relative_imag <= REAL_EIGENVALUE,
                format!("{name}: {:?} has spectrum {:?}", f.matrix.matrix, sp.eigenvalues),
            )?;
            count += 1;
        }
    }
    Ok(format!("{count} corpus UPFs, each with one real positive eigenvalue"))
}

fn c11() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_fd, mut worst_drift) = (0.0f64, 0.0f64);
    for name in CORPUS {
        let net = model(name);
        // Inconsistent networks have no positive steady state; their
        // realization prescribes rates and derivatives at a transient point.
        let (xbar, rbar, v) = match random_point(&net, &mut rng) {
            Some(p) => (p.xbar, p.rbar, p.v),
            None => {
                let t = SymbolTable::new(&net);
                (vec![1.0; net.n_species()], vec![1.0; t.len()], vec![1.0; net.n_reactions()])
            }
        };
        let m = realize_parameters(&net, &xbar, &rbar, &v).map_err(|e| format!("{name}: {e}"))?;
        let rates = m.rates_unchecked(&xbar);
        let rate_err = rates.iter().zip(&v).map(|(r, v)| ((r - v) / v).abs()).fold(0.0, f64::max);
        let exact = substituted_jacobian(&net, &rbar);
        let fd = (numeric_jacobian(&m, &xbar) - &exact).amax() / exact.amax();
        ensure(rate_err < FD_JACOBIAN && fd < FD_JACOBIAN, format!("{name}: rate {rate_err:e}, jacobian {fd:e}"))?;
        worst_fd = worst_fd.max(fd);

        let w = conservation_matrix(&net);
        if w.nrows() == 0 {
            continue;
        }
        let x0: Vec<f64> = xbar.iter().map(|x| x * rng.gen_range(0.5..1.5)).collect();
        let traj = simulate(&m, &x0, 100.0, &uniform_times(100.0, 50), &Tolerances::default())
            .map_err(|e| format!("{name}: {e}"))?;
        let c0 = &w * DVector::from_column_slice(&x0);
        for x in &traj.states {
            let drift = (&w * DVector::from_column_slice(x) - &c0).amax() / c0.amax();
            worst_drift = worst_drift.max(drift);
        }
        ensure(worst_drift < DRIFT, format!("{name}: drift {worst_drift:e}"))?;
    }
    Ok(format!("{} models: max FD error {worst_fd:.1e}, max drift {worst_drift:.1e}", CORPUS.len()))
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Check); 11] = [
        (1, "Frame 1 toy network", 1, c1),
        (2, "BI central model", 10, c2),
        (3, "BI+BII cis model", 60, c3),
        (4, "BIII ligand activation", 120, c4),
        (5, "BI' translocation", 10, c5),
        (6, "MI pitchfork", 30, c6),
        (7, "MII-MV traces", 20, c7),
        (8, "NonAut-I / NonAut-II", 5, c8),
        (9, "oracle equivalence", 120, c9),
        (10, "UPF eigenvalues", 10, c10),
        (11, "realization exactness", 60, c11),
    ];
    let mut failed = BTreeSet::new();
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let mut result = run();
        let elapsed = start.elapsed();
        if result.is_ok() && elapsed > Duration::from_secs(budget) {
            result = Err(format!("took {:.1} s, budget {budget} s", elapsed.as_secs_f64()));
        }
        match &result {
            Ok(detail) => println!("PASS {id:>2} {name} ({:.2} s): {detail}", elapsed.as_secs_f64()),
            Err(reason) => {
                failed.insert(id);
                println!("FAIL {id:>2} {name} ({:.2} s): {reason}", elapsed.as_secs_f64());
            }
        }
    }
    let known: BTreeSet<u32> = KNOWN_UNATTAINABLE.iter().copied().collect();
    println!("known unattainable: {known:?}");
    if failed != known {
        let unexpected: Vec<_> = failed.difference(&known).collect();
        let recovered: Vec<_> = known.difference(&failed).collect();
        eprintln!("unexpected failures: {unexpected:?}; known-unattainable criteria now passing: {recovered:?}");
        std::process::exit(1);
    }
}
