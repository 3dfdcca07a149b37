#![allow(dead_code)]

use std::path::PathBuf;

use convexpath::case::{parse_case, read_fixture, Fixture};
use convexpath::powerflow::{basis_from_buses, jacobian, mismatch, ControlMap};
use convexpath::{Network, NetworkMatrices};
use num_complex::Complex64;
use rand::Rng;

pub const SMALL_CASES: [&str; 6] = [
    "pglib_opf_case3_lmbd",
    "pglib_opf_case5_pjm",
    "pglib_opf_case14_ieee",
    "pglib_opf_case24_ieee_rts",
    "pglib_opf_case30_ieee",
    "pglib_opf_case39_epri",
];

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn load(name: &str) -> Network {
    let path = data_dir().join("cases").join(format!("{name}.m"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_case(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture(name: &str) -> Fixture {
    let path = data_dir().join("fixtures").join(format!("{name}.json"));
    read_fixture(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every case file shipped under data/cases.
pub fn all_cases() -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(data_dir().join("cases"))
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "m").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    v.sort();
    v
}

/// Control vectors of the fixture start and reference dispatches.
pub fn start_and_reference(net: &Network, ctl: &ControlMap, name: &str) -> (Vec<f64>, Vec<f64>) {
    let fx = fixture(name);
    let u = |d: &convexpath::case::Dispatch| {
        let pg: Vec<f64> = d.pg_mw.iter().map(|p| p / net.base_mva).collect();
        ctl.u_from_dispatch(net, &pg, &d.vg_pu)
    };
    (u(&fx.start), u(&fx.reference))
}

/// Bus injections `diag(V) conj(Y V)` from a complex admittance matrix built
/// directly from the branch data.
pub fn complex_injections(net: &Network, theta: &[f64], v: &[f64]) -> Vec<Complex64> {
    let n = net.n_bus();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in &net.branches {
        let ys = 1.0 / Complex64::new(br.r, br.x);
        let a = Complex64::from_polar(br.tap, br.shift);
        let half = Complex64::new(0.0, br.b_c / 2.0);
        y[br.from][br.from] += (ys + half) / (br.tap * br.tap);
        y[br.to][br.to] += ys + half;
        y[br.from][br.to] -= ys / a.conj();
        y[br.to][br.from] -= ys / a;
    }
    for (k, b) in net.buses.iter().enumerate() {
        y[k][k] += Complex64::new(b.shunt_g, b.shunt_b);
    }
    let vc: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(v[k], theta[k])).collect();
    (0..n)
        .map(|k| {
            let i: Complex64 = (0..n).map(|m| y[k][m] * vc[m]).sum();
            vc[k] * i.conj()
        })
        .collect()
}

/// Bus injections from the phase-adjusted basis and the sparse maps.
pub fn basis_injections(net: &Network, mats: &NetworkMatrices, theta: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let psi = basis_from_buses(net, mats.phi0(), theta, v).stacked();
    let lay = &mats.layout;
    let eq = mats.m_eq.mul_vec(&psi);
    let ineq = mats.m_ineq.mul_vec(&psi);
    let mut p = vec![f64::NAN; net.n_bus()];
    let mut q = vec![f64::NAN; net.n_bus()];
    for (i, &k) in lay.ns.iter().enumerate() {
        p[k] = -eq[i];
    }
    for (i, &k) in lay.pq.iter().enumerate() {
        q[k] = -eq[lay.ns.len() + i];
    }
    p[lay.slack] = ineq[0];
    q[lay.slack] = ineq[1];
    for (i, &k) in lay.pv.iter().enumerate() {
        q[k] = ineq[2 + i];
    }
    (p, q)
}

fn central_difference(net: &Network, mats: &NetworkMatrices, ctl: &ControlMap, x: &[f64], u: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let fp = mismatch(net, mats, ctl, &xp, u);
        let fm = mismatch(net, mats, ctl, &xm, u);
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
    }
    cols
}

/// Frobenius relative error of the analytic Jacobian against central differences.
pub fn jacobian_error(net: &Network, mats: &NetworkMatrices, ctl: &ControlMap, x: &[f64], u: &[f64]) -> f64 {
    let (_, jf) = jacobian(net, mats, ctl, x, u);
    let fd = central_difference(net, mats, ctl, x, u);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, row) in jf.to_dense().iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            num += (a - fd[j][i]).powi(2);
            den += a * a;
        }
    }
    (num / den).sqrt()
}

/// Largest injection mismatch against the complex oracle over random states,
/// half of them with a nonzero base angle vector.
pub fn worst_injection_error(net: &Network, rng: &mut impl Rng, states: usize) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..states {
        let theta: Vec<f64> = (0..net.n_bus()).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let v: Vec<f64> = (0..net.n_bus()).map(|_| rng.gen_range(0.85..1.15)).collect();
        let phi0: Vec<f64> =
            (0..net.n_line()).map(|_| if s % 2 == 0 { 0.0 } else { rng.gen_range(-0.5..0.5) }).collect();
        let mats = NetworkMatrices::new(net, &phi0);
        let (p, q) = basis_injections(net, &mats, &theta, &v);
        for (k, sk) in complex_injections(net, &theta, &v).iter().enumerate() {
            worst = worst.max((p[k] - sk.re).abs()).max((q[k] - sk.im).abs());
        }
    }
    worst
}

/// A random state and voltage setpoints near the file dispatch.
pub fn random_state(net: &Network, ctl: &ControlMap, mats: &NetworkMatrices, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let lay = &mats.layout;
    let mut x: Vec<f64> = lay.ns.iter().map(|_| rng.gen_range(-0.5..0.5)).collect();
    x.extend(lay.pq.iter().map(|_| rng.gen_range(0.9..1.1)));
    let u: Vec<f64> = ctl
        .u_from_file(net)
        .iter()
        .enumerate()
        .map(|(i, &v)| if i >= ctl.v_offset() { rng.gen_range(0.95..1.05) } else { v })
        .collect();
    (x, u)
}
