//! Incidence, admittance and phase-adjusted admittance matrices.

use crate::case::{BusKind, Network};
use crate::scalar::Scalar;
use crate::sparse::{Csc, Triplets};
use num_complex::Complex;

/// Bus index sets shared by the state, control and equation orderings.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub slack: usize,
    /// Non-slack buses, ascending. Orders `θ_ns` and the active power equations.
    pub ns: Vec<usize>,
    /// PQ buses, ascending. Orders `v_pq` and the reactive power equations.
    pub pq: Vec<usize>,
    /// Non-slack voltage controlled buses, ascending.
    pub pv: Vec<usize>,
    /// Slack and PV buses, ascending. Orders `v_g`.
    pub gen_buses: Vec<usize>,
    pub ns_pos: Vec<Option<usize>>,
    pub pq_pos: Vec<Option<usize>>,
    pub gen_pos: Vec<Option<usize>>,
}

impl Layout {
    pub fn new<T: Scalar>(net: &Network<T>) -> Self {
        let n = net.n_bus();
        let slack = net.slack();
        let ns: Vec<usize> = (0..n).filter(|&k| k != slack).collect();
        let pq = net.pq_buses();
        let pv: Vec<usize> = (0..n).filter(|&k| net.buses[k].kind == BusKind::PV).collect();
        let gen_buses = net.gen_buses();
        let pos = |set: &[usize]| {
            let mut p = vec![None; n];
            for (i, &k) in set.iter().enumerate() {
                p[k] = Some(i);
            }
            p
        };
        Layout { slack, ns_pos: pos(&ns), pq_pos: pos(&pq), gen_pos: pos(&gen_buses), ns, pq, pv, gen_buses }
    }

    /// Dimension of the state `x = (θ_ns, v_pq)`.
    pub fn n_state(&self) -> usize {
        self.ns.len() + self.pq.len()
    }
}

#[derive(Debug, Clone)]
pub struct IncidenceSet<T> {
    pub ef: Csc<T>,
    pub et: Csc<T>,
    pub e: Csc<T>,
    pub e_ns: Csc<T>,
    pub c: Csc<T>,
}

pub fn build_incidence<T: Scalar>(net: &Network<T>) -> IncidenceSet<T> {
    let (nb, nl, ng) = (net.n_bus(), net.n_line(), net.n_gen());
    let mut ef = Triplets::new(nb, nl);
    let mut et = Triplets::new(nb, nl);
    let mut e = Triplets::new(nb, nl);
    for (l, br) in net.branches.iter().enumerate() {
        ef.push(br.from, l, T::one());
        et.push(br.to, l, T::one());
        e.push(br.from, l, T::one());
        e.push(br.to, l, -T::one());
    }
    let mut c = Triplets::new(nb, ng);
    for (i, g) in net.generators.iter().enumerate() {
        c.push(g.bus, i, T::one());
    }
    let e = e.to_csc();
    let slack = net.slack();
    let ns: Vec<usize> = (0..nb).filter(|&k| k != slack).collect();
    IncidenceSet { ef: ef.to_csc(), et: et.to_csc(), e_ns: e.select_rows(&ns), e, c: c.to_csc() }
}

/// Per-line admittances are stored as vectors (the diagonals of the line matrices).
#[derive(Debug, Clone)]
pub struct AdmittanceSet<T> {
    pub yff: Vec<Complex<T>>,
    pub ytt: Vec<Complex<T>>,
    pub yft: Vec<Complex<T>>,
    pub ytf: Vec<Complex<T>>,
    pub ysh: Vec<Complex<T>>,
    pub yft_hat: Vec<Complex<T>>,
    pub ytf_hat: Vec<Complex<T>>,
    pub phi0: Vec<T>,
    /// bus × line
    pub gc: Csc<T>,
    pub gs: Csc<T>,
    pub bc: Csc<T>,
    pub bs: Csc<T>,
    /// bus × bus, diagonal
    pub gd: Csc<T>,
    pub bd: Csc<T>,
}

pub fn build_admittances<T: Scalar>(net: &Network<T>, phi0: &[T]) -> AdmittanceSet<T> {
    let (nb, nl) = (net.n_bus(), net.n_line());
    assert_eq!(phi0.len(), nl, "phi0 must have one entry per line");
    let half = T::lit(0.5);
    let mut yff = Vec::with_capacity(nl);
    let mut ytt = Vec::with_capacity(nl);
    let mut yft = Vec::with_capacity(nl);
    let mut ytf = Vec::with_capacity(nl);
    for br in &net.branches {
        let (g, b) = br.series_admittance();
        let y = Complex::new(g, b);
        let ych = y + Complex::new(T::zero(), br.b_c * half);
        let tau = br.tap;
        yff.push(ych / (tau * tau));
        ytt.push(ych);
        yft.push(-y / Complex::from_polar(tau, -br.shift));
        ytf.push(-y / Complex::from_polar(tau, br.shift));
    }
    let ysh: Vec<Complex<T>> = net.buses.iter().map(|b| Complex::new(b.shunt_g, b.shunt_b)).collect();
    let yft_hat: Vec<Complex<T>> = yft.iter().zip(phi0).map(|(y, &p)| *y * Complex::from_polar(T::one(), -p)).collect();
    let ytf_hat: Vec<Complex<T>> = ytf.iter().zip(phi0).map(|(y, &p)| *y * Complex::from_polar(T::one(), p)).collect();

    let mut gc = Triplets::new(nb, nl);
    let mut gs = Triplets::new(nb, nl);
    let mut bc = Triplets::new(nb, nl);
    let mut bs = Triplets::new(nb, nl);
    let mut yd = vec![Complex::new(T::zero(), T::zero()); nb];
    for (l, br) in net.branches.iter().enumerate() {
        let (f, t) = (br.from, br.to);
        gc.push(f, l, yft_hat[l].re);
        gc.push(t, l, ytf_hat[l].re);
        bc.push(f, l, yft_hat[l].im);
        bc.push(t, l, ytf_hat[l].im);
        gs.push(f, l, yft_hat[l].re);
        gs.push(t, l, -ytf_hat[l].re);
        bs.push(f, l, yft_hat[l].im);
        bs.push(t, l, -ytf_hat[l].im);
        yd[f] += yff[l];
        yd[t] += ytt[l];
    }
    for k in 0..nb {
        yd[k] += ysh[k];
    }
    let mut gd = Triplets::new(nb, nb);
    let mut bd = Triplets::new(nb, nb);
    for (k, y) in yd.iter().enumerate() {
        gd.push(k, k, y.re);
        bd.push(k, k, y.im);
    }
    AdmittanceSet {
        yff,
        ytt,
        yft,
        ytf,
        ysh,
        yft_hat,
        ytf_hat,
        phi0: phi0.to_vec(),
        gc: gc.to_csc(),
        gs: gs.to_csc(),
        bc: bc.to_csc(),
        bs: bs.to_csc(),
        gd: gd.to_csc(),
        bd: bd.to_csc(),
    }
}

/// Everything needed to evaluate the phase-adjusted power flow around `phi0`.
///
/// Basis ordering is `ψ = (ψC, ψS, ψQ)` with `n_l + n_l + n_b` entries.
#[derive(Debug, Clone)]
pub struct NetworkMatrices<T> {
    pub layout: Layout,
    pub inc: IncidenceSet<T>,
    pub adm: AdmittanceSet<T>,
    /// `(n_ns + n_pq) × n_ψ`
    pub m_eq: Csc<T>,
    /// `(2 + n_pv) × n_ψ`: slack p, slack q, then q at each PV bus.
    pub m_ineq: Csc<T>,
    /// `2 n_l × n_ψ`: active rows then reactive rows.
    pub l_from: Csc<T>,
    pub l_to: Csc<T>,
}

impl<T: Scalar> NetworkMatrices<T> {
    pub fn new(net: &Network<T>, phi0: &[T]) -> Self {
        let layout = Layout::new(net);
        let inc = build_incidence(net);
        let adm = build_admittances(net, phi0);
        let (nb, nl) = (net.n_bus(), net.n_line());
        let sizes = [nl, nl, nb];
        let neg = |m: &Csc<T>| m.scale(-T::one());

        // full bus-level injection maps p = Pψ, q = Qψ
        let p_map = Csc::block(&[vec![Some(&adm.gc), Some(&adm.bs), Some(&adm.gd)]], &[nb], &sizes);
        let q_map = Csc::block(&[vec![Some(&neg(&adm.bc)), Some(&adm.gs), Some(&neg(&adm.bd))]], &[nb], &sizes);

        let m_eq = Csc::block(
            &[vec![Some(&neg(&p_map).select_rows(&layout.ns))], vec![Some(&neg(&q_map).select_rows(&layout.pq))]],
            &[layout.ns.len(), layout.pq.len()],
            &[2 * nl + nb],
        );
        let mut ineq_rows = vec![layout.slack];
        ineq_rows.extend(&layout.pv);
        let m_ineq = Csc::block(
            &[vec![Some(&p_map.select_rows(&[layout.slack]))], vec![Some(&q_map.select_rows(&ineq_rows))]],
            &[1, ineq_rows.len()],
            &[2 * nl + nb],
        );

        let mut lf = Triplets::new(2 * nl, 2 * nl + nb);
        let mut lt = Triplets::new(2 * nl, 2 * nl + nb);
        for (l, br) in net.branches.iter().enumerate() {
            let (yf, yt) = (adm.yft_hat[l], adm.ytf_hat[l]);
            let (f, t) = (br.from, br.to);
            lf.push(l, l, yf.re);
            lf.push(l, nl + l, yf.im);
            lf.push(l, 2 * nl + f, adm.yff[l].re);
            lf.push(nl + l, l, -yf.im);
            lf.push(nl + l, nl + l, yf.re);
            lf.push(nl + l, 2 * nl + f, -adm.yff[l].im);
            lt.push(l, l, yt.re);
            lt.push(l, nl + l, -yt.im);
            lt.push(l, 2 * nl + t, adm.ytt[l].re);
            lt.push(nl + l, l, -yt.im);
            lt.push(nl + l, nl + l, -yt.re);
            lt.push(nl + l, 2 * nl + t, -adm.ytt[l].im);
        }
        NetworkMatrices { layout, inc, adm, m_eq, m_ineq, l_from: lf.to_csc(), l_to: lt.to_csc() }
    }

    pub fn n_psi(&self) -> usize {
        2 * self.adm.phi0.len() + self.adm.ysh.len()
    }

    pub fn phi0(&self) -> &[T] {
        &self.adm.phi0
    }
}

/// Dense complex bus admittance matrix, used by independent checks.
pub fn ybus<T: Scalar>(net: &Network<T>) -> Vec<Vec<Complex<T>>> {
    let n = net.n_bus();
    let zero = Complex::new(T::zero(), T::zero());
    let adm = build_admittances(net, &vec![T::zero(); net.n_line()]);
    let mut y = vec![vec![zero; n]; n];
    for (l, br) in net.branches.iter().enumerate() {
        let (f, t) = (br.from, br.to);
        y[f][f] += adm.yff[l];
        y[t][t] += adm.ytt[l];
        y[f][t] += adm.yft[l];
        y[t][f] += adm.ytf[l];
    }
    for k in 0..n {
        y[k][k] += adm.ysh[k];
    }
    y
}
