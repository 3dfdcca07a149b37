//! Basis functions, Newton-Raphson power flow, intermediates and limit checks.

use crate::case::Network;
use crate::matrices::{Layout, NetworkMatrices};
use crate::scalar::{max_abs, Scalar};
use crate::sparse::{Csc, SparseError, SparseLu, Triplets};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfError {
    #[error("power flow did not converge in {iterations} iterations (mismatch {mismatch:e})")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("singular power flow Jacobian: {0}")]
    Singular(SparseError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Which quantities the operator sets.
///
/// `u = (p, v_g, p_inj, q_inj)` where `p` holds one entry per generator except
/// the first generator at the slack bus, `v_g` one entry per voltage controlled
/// bus, and the optional injection block one entry per controllable PQ bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMap {
    pub p_gens: Vec<usize>,
    pub slack_gen: usize,
    pub v_buses: Vec<usize>,
    pub inj_buses: Vec<usize>,
}

impl ControlMap {
    pub fn new<T: Scalar>(net: &Network<T>) -> Self {
        Self::with_injections(net, &[])
    }

    /// Also treats the active and reactive injections at the given PQ buses as controls.
    pub fn with_injections<T: Scalar>(net: &Network<T>, inj_buses: &[usize]) -> Self {
        let slack = net.slack();
        let slack_gen = net.generators.iter().position(|g| g.bus == slack).expect("slack bus hosts a generator");
        ControlMap {
            p_gens: (0..net.n_gen()).filter(|&g| g != slack_gen).collect(),
            slack_gen,
            v_buses: net.gen_buses(),
            inj_buses: inj_buses.to_vec(),
        }
    }

    pub fn n_p(&self) -> usize {
        self.p_gens.len()
    }

    pub fn n_v(&self) -> usize {
        self.v_buses.len()
    }

    pub fn n_inj(&self) -> usize {
        self.inj_buses.len()
    }

    pub fn len(&self) -> usize {
        self.n_p() + self.n_v() + 2 * self.n_inj()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn v_offset(&self) -> usize {
        self.n_p()
    }

    pub fn pinj_offset(&self) -> usize {
        self.n_p() + self.n_v()
    }

    pub fn qinj_offset(&self) -> usize {
        self.n_p() + self.n_v() + self.n_inj()
    }

    /// Builds `u` from a per-generator dispatch (per-unit) and per-generator voltages.
    /// Voltage controlled buses take the setpoint of their first generator.
    pub fn u_from_dispatch<T: Scalar>(&self, net: &Network<T>, pg: &[T], vg: &[T]) -> Vec<T> {
        let mut u: Vec<T> = self.p_gens.iter().map(|&g| pg[g]).collect();
        let gens = net.gens_at();
        u.extend(self.v_buses.iter().map(|&k| vg[gens[k][0]]));
        u.extend(std::iter::repeat(T::zero()).take(2 * self.n_inj()));
        u
    }

    /// File dispatch and setpoints.
    pub fn u_from_file<T: Scalar>(&self, net: &Network<T>) -> Vec<T> {
        let pg: Vec<T> = net.generators.iter().map(|g| g.p_file).collect();
        let vg: Vec<T> = net.generators.iter().map(|g| g.v_setpoint).collect();
        self.u_from_dispatch(net, &pg, &vg)
    }

    /// Box limits on `u`; injection controls are unbounded.
    pub fn bounds<T: Scalar>(&self, net: &Network<T>) -> (Vec<T>, Vec<T>) {
        let mut lo: Vec<T> = self.p_gens.iter().map(|&g| net.generators[g].p_min).collect();
        let mut hi: Vec<T> = self.p_gens.iter().map(|&g| net.generators[g].p_max).collect();
        lo.extend(self.v_buses.iter().map(|&k| net.buses[k].v_min));
        hi.extend(self.v_buses.iter().map(|&k| net.buses[k].v_max));
        lo.extend(std::iter::repeat(T::neg_infinity()).take(2 * self.n_inj()));
        hi.extend(std::iter::repeat(T::infinity()).take(2 * self.n_inj()));
        (lo, hi)
    }

    /// Per-generator dispatch with the slack generator output filled in.
    pub fn dispatch<T: Scalar>(&self, net: &Network<T>, u: &[T], p_slack_gen: T) -> Vec<T> {
        let mut pg = vec![T::zero(); net.n_gen()];
        for (i, &g) in self.p_gens.iter().enumerate() {
            pg[g] = u[i];
        }
        pg[self.slack_gen] = p_slack_gen;
        pg
    }
}

/// A control vector with its power flow state `x = (θ_ns, v_pq)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint<T> {
    pub u: Vec<T>,
    pub x: Vec<T>,
    pub solved: bool,
    #[serde(default)]
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector<T> {
    pub c: Vec<T>,
    pub s: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Scalar> BasisVector<T> {
    pub fn stacked(&self) -> Vec<T> {
        let mut v = self.c.clone();
        v.extend(&self.s);
        v.extend(&self.q);
        v
    }
}

/// Full bus angle and magnitude vectors for a state/control pair.
pub fn bus_voltages<T: Scalar>(lay: &Layout, ctl: &ControlMap, x: &[T], u: &[T]) -> (Vec<T>, Vec<T>) {
    let n = lay.ns_pos.len();
    let mut theta = vec![T::zero(); n];
    let mut v = vec![T::one(); n];
    for (i, &k) in lay.ns.iter().enumerate() {
        theta[k] = x[i];
    }
    let off = lay.ns.len();
    for (i, &k) in lay.pq.iter().enumerate() {
        v[k] = x[off + i];
    }
    for (i, &k) in ctl.v_buses.iter().enumerate() {
        v[k] = u[ctl.v_offset() + i];
    }
    (theta, v)
}

/// Angle differences `φ = Eᵀθ`.
pub fn line_angles<T: Scalar>(net: &Network<T>, theta: &[T]) -> Vec<T> {
    net.branches.iter().map(|b| theta[b.from] - theta[b.to]).collect()
}

/// Basis functions evaluated from full bus vectors.
pub fn basis_from_buses<T: Scalar>(net: &Network<T>, phi0: &[T], theta: &[T], v: &[T]) -> BasisVector<T> {
    let mut c = Vec::with_capacity(net.n_line());
    let mut s = Vec::with_capacity(net.n_line());
    for (l, br) in net.branches.iter().enumerate() {
        let w = v[br.from] * v[br.to];
        let a = theta[br.from] - theta[br.to] - phi0[l];
        c.push(w * a.cos());
        s.push(w * a.sin());
    }
    BasisVector { c, s, q: v.iter().map(|&vk| vk * vk).collect() }
}

pub fn basis<T: Scalar>(net: &Network<T>, mats: &NetworkMatrices<T>, ctl: &ControlMap, x: &[T], u: &[T]) -> BasisVector<T> {
    let (theta, v) = bus_voltages(&mats.layout, ctl, x, u);
    basis_from_buses(net, mats.phi0(), &theta, &v)
}

/// Specified injections `τ(u)`: active power at non-slack buses, reactive power at PQ buses.
pub fn tau<T: Scalar>(net: &Network<T>, lay: &Layout, ctl: &ControlMap, u: &[T]) -> Vec<T> {
    let n = net.n_bus();
    let mut p: Vec<T> = net.buses.iter().map(|b| -b.p_load).collect();
    let mut q: Vec<T> = net.buses.iter().map(|b| -b.q_load).collect();
    for (i, &g) in ctl.p_gens.iter().enumerate() {
        p[net.generators[g].bus] += u[i];
    }
    for (i, &k) in ctl.inj_buses.iter().enumerate() {
        p[k] += u[ctl.pinj_offset() + i];
        q[k] += u[ctl.qinj_offset() + i];
    }
    debug_assert_eq!(p.len(), n);
    let mut t: Vec<T> = lay.ns.iter().map(|&k| p[k]).collect();
    t.extend(lay.pq.iter().map(|&k| q[k]));
    t
}

/// `∂τ/∂u` as a dense `(n_ns + n_pq) × n_u` matrix.
pub fn tau_jacobian<T: Scalar>(net: &Network<T>, lay: &Layout, ctl: &ControlMap) -> Vec<Vec<T>> {
    let mut d = vec![vec![T::zero(); ctl.len()]; lay.n_state()];
    for (i, &g) in ctl.p_gens.iter().enumerate() {
        if let Some(r) = lay.ns_pos[net.generators[g].bus] {
            d[r][i] = T::one();
        }
    }
    for (i, &k) in ctl.inj_buses.iter().enumerate() {
        if let Some(r) = lay.ns_pos[k] {
            d[r][ctl.pinj_offset() + i] = T::one();
        }
        if let Some(r) = lay.pq_pos[k] {
            d[lay.ns.len() + r][ctl.qinj_offset() + i] = T::one();
        }
    }
    d
}

/// Power flow mismatch `τ(u) + M_eq ψ`.
pub fn mismatch<T: Scalar>(net: &Network<T>, mats: &NetworkMatrices<T>, ctl: &ControlMap, x: &[T], u: &[T]) -> Vec<T> {
    let psi = basis(net, mats, ctl, x, u).stacked();
    let mut f = tau(net, &mats.layout, ctl, u);
    for (fi, m) in f.iter_mut().zip(mats.m_eq.mul_vec(&psi)) {
        *fi += m;
    }
    f
}

/// `J_ψ = ∂ψ/∂x` (sparse, `n_ψ × n_x`) and `J_f = M_eq J_ψ`.
pub fn jacobian<T: Scalar>(
    net: &Network<T>,
    mats: &NetworkMatrices<T>,
    ctl: &ControlMap,
    x: &[T],
    u: &[T],
) -> (Csc<T>, Csc<T>) {
    let lay = &mats.layout;
    let (theta, v) = bus_voltages(lay, ctl, x, u);
    let nl = net.n_line();
    let npq_off = lay.ns.len();
    let mut t = Triplets::new(mats.n_psi(), lay.n_state());
    for (l, br) in net.branches.iter().enumerate() {
        let (f, to) = (br.from, br.to);
        let a = theta[f] - theta[to] - mats.phi0()[l];
        let (sa, ca) = a.sin_cos();
        let w = v[f] * v[to];
        if let Some(i) = lay.ns_pos[f] {
            t.push(l, i, -w * sa);
            t.push(nl + l, i, w * ca);
        }
        if let Some(i) = lay.ns_pos[to] {
            t.push(l, i, w * sa);
            t.push(nl + l, i, -w * ca);
        }
        if let Some(i) = lay.pq_pos[f] {
            t.push(l, npq_off + i, v[to] * ca);
            t.push(nl + l, npq_off + i, v[to] * sa);
        }
        if let Some(i) = lay.pq_pos[to] {
            t.push(l, npq_off + i, v[f] * ca);
            t.push(nl + l, npq_off + i, v[f] * sa);
        }
    }
    for (i, &k) in lay.pq.iter().enumerate() {
        t.push(2 * nl + k, npq_off + i, T::lit(2.0) * v[k]);
    }
    let jpsi = t.to_csc();
    let jf = mats.m_eq.mul(&jpsi);
    (jpsi, jf)
}

#[derive(Debug, Clone, Copy)]
pub struct PfOptions<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for PfOptions<T> {
    fn default() -> Self {
        PfOptions { tol: T::lit(1e-8).max(T::epsilon() * T::lit(256.0)), max_iter: 50 }
    }
}

/// Flat start: zero angles, unit PQ voltages.
pub fn flat_start<T: Scalar>(lay: &Layout) -> Vec<T> {
    let mut x = vec![T::zero(); lay.ns.len()];
    x.extend(std::iter::repeat(T::one()).take(lay.pq.len()));
    x
}

/// Newton-Raphson with full steps.
pub fn solve_pf<T: Scalar>(
    net: &Network<T>,
    mats: &NetworkMatrices<T>,
    ctl: &ControlMap,
    u: &[T],
    x_init: &[T],
    opts: PfOptions<T>,
) -> Result<OperatingPoint<T>, PfError> {
    let lay = &mats.layout;
    if x_init.len() != lay.n_state() || u.len() != ctl.len() {
        return Err(PfError::Dimension(format!(
            "x has {} entries (expected {}), u has {} (expected {})",
            x_init.len(),
            lay.n_state(),
            u.len(),
            ctl.len()
        )));
    }
    let mut x = x_init.to_vec();
    let mut f = mismatch(net, mats, ctl, &x, u);
    let mut err = max_abs(&f);
    let mut it = 0;
    while !(err < opts.tol) {
        if it >= opts.max_iter || !err.is_finite() {
            return Err(PfError::Diverged { iterations: it, mismatch: err.to_f64_lossy() });
        }
        let (_, jf) = jacobian(net, mats, ctl, &x, u);
        let lu = SparseLu::factor(&jf).map_err(PfError::Singular)?;
        let dx = lu.solve(&f);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi -= *d;
        }
        f = mismatch(net, mats, ctl, &x, u);
        err = max_abs(&f);
        it += 1;
    }
    Ok(OperatingPoint { u: u.to_vec(), x, solved: true, iterations: it })
}

/// Quantities defined explicitly by a state/control pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateVars<T> {
    /// Active power of the slack generator.
    pub p_slack_gen: T,
    /// Active injection at the slack bus, `C_vθ p_g − p_d,vθ`.
    pub p_slack_inj: T,
    /// Reactive generation at each voltage controlled bus (order of `ControlMap::v_buses`).
    pub q_gen_bus: Vec<T>,
    pub sf_p: Vec<T>,
    pub sf_q: Vec<T>,
    pub st_p: Vec<T>,
    pub st_q: Vec<T>,
}

pub fn intermediates<T: Scalar>(
    net: &Network<T>,
    mats: &NetworkMatrices<T>,
    ctl: &ControlMap,
    x: &[T],
    u: &[T],
) -> IntermediateVars<T> {
    let lay = &mats.layout;
    let psi = basis(net, mats, ctl, x, u).stacked();
    let z = mats.m_ineq.mul_vec(&psi);
    let nl = net.n_line();
    let slack = lay.slack;
    let mut other = T::zero();
    for (i, &g) in ctl.p_gens.iter().enumerate() {
        if net.generators[g].bus == slack {
            other += u[i];
        }
    }
    let p_slack_inj = z[0];
    let p_slack_gen = p_slack_inj + net.buses[slack].p_load - other;
    // z[1] is slack q, z[2..] PV q in ascending bus order; v_buses is ascending over both
    let mut q_gen_bus = Vec::with_capacity(ctl.n_v());
    let mut pv_i = 0;
    for &k in &ctl.v_buses {
        let inj = if k == slack {
            z[1]
        } else {
            pv_i += 1;
            z[1 + pv_i]
        };
        q_gen_bus.push(inj + net.buses[k].q_load);
    }
    let sf = mats.l_from.mul_vec(&psi);
    let st = mats.l_to.mul_vec(&psi);
    IntermediateVars {
        p_slack_gen,
        p_slack_inj,
        q_gen_bus,
        sf_p: sf[..nl].to_vec(),
        sf_q: sf[nl..].to_vec(),
        st_p: st[..nl].to_vec(),
        st_q: st[nl..].to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum ConstraintClass {
    /// Active generation limits.
    ActivePower,
    /// Reactive generation limits (bus totals).
    ReactivePower,
    Voltage,
    Angle,
    LineFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMargin {
    pub class: ConstraintClass,
    /// Smallest `limit − value` over the class, per-unit or radians.
    pub worst_margin: f64,
    /// Human readable location of the worst entry.
    pub at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub margins: Vec<ClassMargin>,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn worst(&self) -> Option<&ClassMargin> {
        self.margins.iter().min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
    }

    pub fn violated(&self, tol: f64) -> Vec<&ClassMargin> {
        self.margins.iter().filter(|m| m.worst_margin < -tol).collect()
    }
}

struct Worst {
    class: ConstraintClass,
    m: f64,
    at: String,
}

impl Worst {
    fn new(class: ConstraintClass) -> Self {
        Worst { class, m: f64::INFINITY, at: String::new() }
    }

    fn see(&mut self, margin: f64, at: impl FnOnce() -> String) {
        if margin < self.m || self.m.is_nan() {
            self.m = margin;
            self.at = at();
        }
    }
}

/// Evaluates every operational limit at a solved point.
pub fn check_feasibility<T: Scalar>(
    net: &Network<T>,
    mats: &NetworkMatrices<T>,
    ctl: &ControlMap,
    op: &OperatingPoint<T>,
    tol: f64,
) -> FeasibilityReport {
    let f = |x: T| x.to_f64_lossy();
    let lay = &mats.layout;
    let iv = intermediates(net, mats, ctl, &op.x, &op.u);
    let (theta, v) = bus_voltages(lay, ctl, &op.x, &op.u);

    let mut pw = Worst::new(ConstraintClass::ActivePower);
    for (i, &g) in ctl.p_gens.iter().enumerate() {
        let gen = &net.generators[g];
        let p = f(op.u[i]);
        pw.see((f(gen.p_max) - p).min(p - f(gen.p_min)), || format!("generator {g}"));
    }
    let sg = &net.generators[ctl.slack_gen];
    let ps = f(iv.p_slack_gen);
    pw.see((f(sg.p_max) - ps).min(ps - f(sg.p_min)), || format!("generator {} (slack)", ctl.slack_gen));

    let mut qw = Worst::new(ConstraintClass::ReactivePower);
    let gens = net.gens_at();
    for (i, &k) in ctl.v_buses.iter().enumerate() {
        let qmax: f64 = gens[k].iter().map(|&g| f(net.generators[g].q_max)).sum();
        let qmin: f64 = gens[k].iter().map(|&g| f(net.generators[g].q_min)).sum();
        let q = f(iv.q_gen_bus[i]);
        qw.see((qmax - q).min(q - qmin), || format!("bus {}", net.buses[k].id));
    }

    let mut vw = Worst::new(ConstraintClass::Voltage);
    for (k, b) in net.buses.iter().enumerate() {
        let vk = f(v[k]);
        vw.see((f(b.v_max) - vk).min(vk - f(b.v_min)), || format!("bus {}", b.id));
    }

    let mut aw = Worst::new(ConstraintClass::Angle);
    let mut lw = Worst::new(ConstraintClass::LineFlow);
    for (l, br) in net.branches.iter().enumerate() {
        let phi = f(theta[br.from] - theta[br.to]);
        aw.see((f(br.phi_max) - phi).min(phi - f(br.phi_min)), || format!("branch {l}"));
        if let Some(smax) = br.s_max {
            let sf = f(iv.sf_p[l]).hypot(f(iv.sf_q[l]));
            let st = f(iv.st_p[l]).hypot(f(iv.st_q[l]));
            lw.see(f(smax) - sf.max(st), || format!("branch {l}"));
        }
    }
    let margins: Vec<ClassMargin> = [pw, qw, vw, aw, lw]
        .into_iter()
        .filter(|w| w.m.is_finite() || w.m.is_nan())
        .map(|w| ClassMargin { class: w.class, worst_margin: w.m, at: w.at })
        .collect();
    let feasible = op.solved && margins.iter().all(|m| m.worst_margin >= -tol);
    FeasibilityReport { margins, feasible }
}

/// Solves and checks in one call.
pub fn solve_and_check<T: Scalar>(
    net: &Network<T>,
    mats: &NetworkMatrices<T>,
    ctl: &ControlMap,
    u: &[T],
    x_init: &[T],
    tol: f64,
) -> Result<(OperatingPoint<T>, FeasibilityReport), PfError> {
    let op = solve_pf(net, mats, ctl, u, x_init, PfOptions::default())?;
    let rep = check_feasibility(net, mats, ctl, &op, tol);
    Ok((op, rep))
}
