//! Convex restriction of the feasible set around a solved base point.
//!
//! With `x = (θ_ns, v_pq)` and basis `ψ = J_ψ0 x + g(x, u)` the power flow is
//! the fixed point `x = −J_f0⁻¹(τ(u) + M_eq g(x, u))`. The box
//! `P(b) = {x : φ̲ ≤ Eᵀθ ≤ φ̄, v̲ ≤ v_pq ≤ v̄}` maps into itself when
//!
//! `−A J_f0⁻¹ τ(u) + K⁺ ḡ + K⁻ g̲ ≤ b`,  `K = −A J_f0⁻¹ M_eq`,
//!
//! where `ḡ, g̲` bound the residual over the box. Every other operating limit
//! is imposed on linear bounds of `ψ` over the box.

use thiserror::Error;

use crate::case::{BusKind, Network};
use crate::conic::{Affine, ConicProgram, Objective, QuadRow};
use crate::envelopes::{bound_over_polytope, BusEnvelope, Coord, LineEnvelope, LocalForm};
use crate::matrices::NetworkMatrices;
use crate::powerflow::{bus_voltages, intermediates, jacobian, line_angles, tau, tau_jacobian, ControlMap, OperatingPoint};
use crate::scalar::Scalar;
use crate::sparse::{Csc, SparseError, Triplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RestrictionError {
    #[error("base point is not a solved power flow")]
    BaseNotSolved,
    #[error("singular Jacobian at the base point: {0}")]
    Singular(SparseError),
    #[error("generator {0}: cost is not monotonically increasing")]
    NonMonotoneCost(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weight {0}")]
    Weight(f64),
}

/// Offsets of each variable block in the program.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub u: usize,
    pub n_u: usize,
    pub phi_hi: usize,
    pub v_hi: usize,
    pub phi_lo: usize,
    pub v_lo: usize,
    pub n_line: usize,
    pub n_pq: usize,
    pub g_hi: usize,
    pub g_lo: usize,
    pub n_psi: usize,
    /// Four flow bounds `(p_f, q_f, p_t, q_t)` per limited line.
    pub s_bar: usize,
    pub limited: Vec<usize>,
    pub p_bar: usize,
    pub len: usize,
}

impl VarLayout {
    fn new(n_u: usize, n_line: usize, n_pq: usize, n_psi: usize, limited: Vec<usize>) -> Self {
        let u = 0;
        let phi_hi = u + n_u;
        let v_hi = phi_hi + n_line;
        let phi_lo = v_hi + n_pq;
        let v_lo = phi_lo + n_line;
        let g_hi = v_lo + n_pq;
        let g_lo = g_hi + n_psi;
        let s_bar = g_lo + n_psi;
        let p_bar = s_bar + 4 * limited.len();
        VarLayout {
            u,
            n_u,
            phi_hi,
            v_hi,
            phi_lo,
            v_lo,
            n_line,
            n_pq,
            g_hi,
            g_lo,
            n_psi,
            s_bar,
            limited,
            p_bar,
            len: p_bar + 1,
        }
    }

    pub fn u_range(&self) -> std::ops::Range<usize> {
        self.u..self.u + self.n_u
    }
}

/// Box `b` read back from a solution.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolytopeBounds<T> {
    pub phi_hi: Vec<T>,
    pub phi_lo: Vec<T>,
    pub v_hi: Vec<T>,
    pub v_lo: Vec<T>,
}

impl<T: Scalar> PolytopeBounds<T> {
    /// Whether the line angles and PQ voltages of a state lie in the box.
    pub fn contains<S: Scalar>(&self, phi: &[S], v_pq: &[S], tol: f64) -> bool {
        let ok = |x: S, lo: T, hi: T| {
            let x = x.to_f64_lossy();
            x >= lo.to_f64_lossy() - tol && x <= hi.to_f64_lossy() + tol
        };
        phi.iter().enumerate().all(|(l, &p)| ok(p, self.phi_lo[l], self.phi_hi[l]))
            && v_pq.iter().enumerate().all(|(i, &v)| ok(v, self.v_lo[i], self.v_hi[i]))
    }
}

#[derive(Debug, Clone)]
pub struct RestrictionProblem<T> {
    pub base: OperatingPoint<T>,
    pub ctl: ControlMap,
    pub mats: NetworkMatrices<T>,
    /// `K⁺ ≥ 0` and `K⁻ ≤ 0` over the `n_l + n_pq` upper rows of `A`; the
    /// lower rows are their negatives.
    pub k_pos: Csc<T>,
    pub k_neg: Csc<T>,
    /// `A J_f0⁻¹ τ(u) = ajinv_tau0 + ajinv_d u` over the upper rows.
    pub ajinv_tau0: Vec<T>,
    pub ajinv_d: Vec<Vec<T>>,
    pub vars: VarLayout,
    /// Restriction rows; carries no objective until one is attached.
    pub program: ConicProgram<T>,
    /// Limits widened so the base point stays inside.
    pub relaxed: Vec<String>,
    /// Limited lines whose base flow sits within 1% of the limit.
    pub tight_lines: Vec<usize>,
}

const SPLIT_TOL: f64 = 1e-12;
/// Gaps between a base value and a limit it exceeds that are worth a note.
const RELAX_NOTE: f64 = 1e-7;

/// Widens `[lo, hi]` just enough to contain `base`.
fn widen<T: Scalar>(lo: T, hi: T, base: T, what: impl Fn() -> String, notes: &mut Vec<String>) -> (T, T) {
    let note = T::lit(RELAX_NOTE);
    let (mut l, mut h) = (lo, hi);
    if base > h {
        if base - h > note {
            notes.push(format!("{} upper limit widened to {:.6}", what(), base.to_f64_lossy()));
        }
        h = base;
    }
    if base < l {
        if l - base > note {
            notes.push(format!("{} lower limit widened to {:.6}", what(), base.to_f64_lossy()));
        }
        l = base;
    }
    (l, h)
}

/// Assembles the restriction around `base` (which must be solved).
pub fn build_restriction<T: Scalar>(
    net: &Network<T>,
    ctl: &ControlMap,
    base: &OperatingPoint<T>,
) -> Result<RestrictionProblem<T>, RestrictionError> {
    if !base.solved {
        return Err(RestrictionError::BaseNotSolved);
    }
    let probe = NetworkMatrices::new(net, &vec![T::zero(); net.n_line()]);
    let lay0 = &probe.layout;
    if base.x.len() != lay0.n_state() || base.u.len() != ctl.len() {
        return Err(RestrictionError::Dimension(format!(
            "base has x of length {} and u of length {}",
            base.x.len(),
            base.u.len()
        )));
    }
    let (theta0, v0) = bus_voltages(lay0, ctl, &base.x, &base.u);
    let phi0 = line_angles(net, &theta0);
    let mats = NetworkMatrices::new(net, &phi0);
    let lay = mats.layout.clone();
    let (nl, nb) = (net.n_line(), net.n_bus());
    let (nns, npq) = (lay.ns.len(), lay.pq.len());
    let nx = lay.n_state();
    let npsi = mats.n_psi();
    let nu = ctl.len();
    let mut relaxed = Vec::new();

    let (_, jf) = jacobian(net, &mats, ctl, &base.x, &base.u);
    let lu = jf.factor_lu().map_err(RestrictionError::Singular)?;

    // rows of A: line angles through θ_ns, then v_pq
    let a_apply = |y: &[T]| -> Vec<T> {
        let mut r = Vec::with_capacity(nl + npq);
        for br in &net.branches {
            let th = |k: usize| lay.ns_pos[k].map_or(T::zero(), |i| y[i]);
            r.push(th(br.from) - th(br.to));
        }
        r.extend_from_slice(&y[nns..nns + npq]);
        r
    };

    // K = −A J⁻¹ M_eq, one back-solve per column of M_eq
    let nrow = nl + npq;
    let mut kp = Triplets::new(nrow, npsi);
    let mut kn = Triplets::new(nrow, npsi);
    let tol = T::lit(SPLIT_TOL);
    for j in 0..npsi {
        let mut col = vec![T::zero(); nx];
        let mut any = false;
        for (i, v) in mats.m_eq.col(j) {
            col[i] = v;
            any = true;
        }
        if !any {
            continue;
        }
        let kcol = a_apply(&lu.solve(&col));
        for (i, &k) in kcol.iter().enumerate() {
            let k = -k;
            if k > tol {
                kp.push(i, j, k);
            } else if k < -tol {
                kn.push(i, j, k);
            }
        }
    }
    let k_pos = kp.to_csc();
    let k_neg = kn.to_csc();

    // A J⁻¹ τ(u), affine in u
    let tau0 = tau(net, &lay, ctl, &vec![T::zero(); nu]);
    let ajinv_tau0 = a_apply(&lu.solve(&tau0));
    let dtau = tau_jacobian(net, &lay, ctl);
    let mut ajinv_d = vec![vec![T::zero(); nu]; nrow];
    for c in 0..nu {
        let col: Vec<T> = dtau.iter().map(|r| r[c]).collect();
        if col.iter().all(|&v| v == T::zero()) {
            continue;
        }
        for (i, v) in a_apply(&lu.solve(&col)).into_iter().enumerate() {
            ajinv_d[i][c] = v;
        }
    }

    let limited: Vec<usize> = (0..nl).filter(|&l| net.branches[l].s_max.is_some()).collect();
    let vars = VarLayout::new(nu, nl, npq, npsi, limited.clone());
    let mut prog = ConicProgram::new();
    for i in 0..nu {
        prog.add_var(format!("u[{i}]"));
    }
    for l in 0..nl {
        prog.add_var(format!("phi_hi[{l}]"));
    }
    for &k in &lay.pq {
        prog.add_var(format!("v_hi[{}]", net.buses[k].id));
    }
    for l in 0..nl {
        prog.add_var(format!("phi_lo[{l}]"));
    }
    for &k in &lay.pq {
        prog.add_var(format!("v_lo[{}]", net.buses[k].id));
    }
    for side in ["g_hi", "g_lo"] {
        for i in 0..npsi {
            prog.add_var(format!("{side}[{i}]"));
        }
    }
    for &l in &limited {
        for w in ["pf", "qf", "pt", "qt"] {
            prog.add_var(format!("s_{w}[{l}]"));
        }
    }
    prog.add_var("p_slack_bar");
    debug_assert_eq!(prog.n_vars(), vars.len);

    let one = T::one();
    let var = Affine::<T>::var;

    // self-mapping rows: upper rows ≤ b_hi, lower rows ≥ b_lo
    for i in 0..nrow {
        let (hi_var, lo_var) =
            if i < nl { (vars.phi_hi + i, vars.phi_lo + i) } else { (vars.v_hi + i - nl, vars.v_lo + i - nl) };
        let mut up: Vec<(usize, T)> = Vec::new();
        let mut dn: Vec<(usize, T)> = Vec::new();
        for (c, &d) in ajinv_d[i].iter().enumerate() {
            if d != T::zero() {
                up.push((vars.u + c, -d));
                dn.push((vars.u + c, d));
            }
        }
        up.push((hi_var, -one));
        dn.push((lo_var, one));
        prog.add_le(Affine::from_terms(up, -ajinv_tau0[i]), format!("selfmap_hi[{i}]"));
        prog.add_le(Affine::from_terms(dn, ajinv_tau0[i]), format!("selfmap_lo[{i}]"));
    }
    // K terms: upper row i gets K⁺ ḡ + K⁻ g̲, the negated lower row −K⁺ g̲ − K⁻ ḡ
    let first = prog.ineq.len() - 2 * nrow;
    for (m, hi_blk, lo_blk) in [(&k_pos, vars.g_hi, vars.g_lo), (&k_neg, vars.g_lo, vars.g_hi)] {
        for j in 0..npsi {
            for (i, k) in m.col(j) {
                prog.ineq[first + 2 * i].expr.terms.push((hi_blk + j, k));
                prog.ineq[first + 2 * i + 1].expr.terms.push((lo_blk + j, -k));
            }
        }
    }

    // b box
    let mut phi_lim = Vec::with_capacity(nl);
    for (l, br) in net.branches.iter().enumerate() {
        let lim = widen(br.phi_min, br.phi_max, phi0[l], || format!("branch {l} angle"), &mut relaxed);
        phi_lim.push(lim);
        prog.add_bounds(vars.phi_hi + l, T::neg_infinity(), lim.1);
        prog.add_bounds(vars.phi_lo + l, lim.0, T::infinity());
        prog.add_le(var(vars.phi_lo + l).add(&var(vars.phi_hi + l).scale(-one)), format!("phi_order[{l}]"));
    }
    let mut v_lim = vec![(T::zero(), T::zero()); nb];
    for (k, b) in net.buses.iter().enumerate() {
        v_lim[k] = if b.kind == BusKind::PQ {
            widen(b.v_min, b.v_max, v0[k], || format!("bus {} voltage", b.id), &mut relaxed)
        } else {
            (b.v_min.min(v0[k]), b.v_max.max(v0[k]))
        };
    }
    for (i, &k) in lay.pq.iter().enumerate() {
        prog.add_bounds(vars.v_hi + i, T::neg_infinity(), v_lim[k].1);
        prog.add_bounds(vars.v_lo + i, v_lim[k].0, T::infinity());
        prog.add_le(var(vars.v_lo + i).add(&var(vars.v_hi + i).scale(-one)), format!("v_order[{i}]"));
    }

    // u box
    let (ulo, uhi) = ctl.bounds(net);
    for i in 0..nu {
        let (lo, hi) = widen(ulo[i], uhi[i], base.u[i], || format!("control {i}"), &mut relaxed);
        prog.add_bounds(vars.u + i, lo, hi);
    }

    // residual bounds
    let mut quad_rows = 0usize;
    let local_v = |k: usize| -> Coord<T> {
        if let Some(i) = lay.pq_pos[k] {
            Coord::Interval { lo: Affine::shifted(vars.v_lo + i, v0[k]), hi: Affine::shifted(vars.v_hi + i, v0[k]) }
        } else {
            let i = ctl.v_buses.iter().position(|&b| b == k).expect("generator bus is a control");
            Coord::Fixed(Affine::shifted(vars.u + ctl.v_offset() + i, v0[k]))
        }
    };
    let mut push_bound = |prog: &mut ConicProgram<T>, form: &LocalForm<T>, coords: &[Coord<T>; 3], gvar: usize, upper: bool, tag: String| {
        for (n, sf) in bound_over_polytope(form, coords).into_iter().enumerate() {
            // upper: form − ḡ ≤ 0, lower: g̲ − form ≤ 0
            let (squares, linear) = if upper {
                (sf.squares, sf.linear.add(&var(gvar).scale(-one)))
            } else {
                (sf.squares.into_iter().map(|(w, a)| (-w, a)).collect::<Vec<_>>(), sf.linear.scale(-one).add(&var(gvar)))
            };
            if squares.is_empty() {
                prog.add_le(linear, format!("{tag}#{n}"));
            } else {
                prog.add_quad(QuadRow::from_squares(&squares, &linear, format!("{tag}#{n}")));
                quad_rows += 1;
            }
        }
    };
    for (l, br) in net.branches.iter().enumerate() {
        let (f, t) = (br.from, br.to);
        let env = LineEnvelope::new(
            v0[f],
            v0[t],
            phi0[l],
            lay.pq_pos[f].is_some(),
            lay.pq_pos[t].is_some(),
            v_lim[f],
            v_lim[t],
            phi_lim[l],
        );
        let coords = [
            local_v(f),
            local_v(t),
            Coord::Interval {
                lo: Affine::shifted(vars.phi_lo + l, phi0[l]),
                hi: Affine::shifted(vars.phi_hi + l, phi0[l]),
            },
        ];
        push_bound(&mut prog, &env.gc_over(), &coords, vars.g_hi + l, true, format!("gc_hi[{l}]"));
        push_bound(&mut prog, &env.gc_under(), &coords, vars.g_lo + l, false, format!("gc_lo[{l}]"));
        push_bound(&mut prog, &env.gs_over(), &coords, vars.g_hi + nl + l, true, format!("gs_hi[{l}]"));
        push_bound(&mut prog, &env.gs_under(), &coords, vars.g_lo + nl + l, false, format!("gs_lo[{l}]"));
    }
    for k in 0..nb {
        let env = BusEnvelope { v0: v0[k], pq: lay.pq_pos[k].is_some() };
        let zero = Coord::Fixed(Affine::constant(T::zero()));
        let coords = [local_v(k), zero.clone(), zero];
        push_bound(&mut prog, &env.gq_over(), &coords, vars.g_hi + 2 * nl + k, true, format!("gq_hi[{k}]"));
        push_bound(&mut prog, &env.gq_under(), &coords, vars.g_lo + 2 * nl + k, false, format!("gq_lo[{k}]"));
    }

    // linear bounds on ψ over the box
    let psi_bound = |i: usize, upper: bool| -> Affine<T> {
        let g = if upper { var(vars.g_hi + i) } else { var(vars.g_lo + i) };
        let pick = |hi: usize, lo: usize| if upper { hi } else { lo };
        let mut terms = Vec::new();
        if i < nl {
            let br = &net.branches[i];
            if let Some(p) = lay.pq_pos[br.from] {
                terms.push((pick(vars.v_hi, vars.v_lo) + p, v0[br.to]));
            }
            if let Some(p) = lay.pq_pos[br.to] {
                terms.push((pick(vars.v_hi, vars.v_lo) + p, v0[br.from]));
            }
        } else if i < 2 * nl {
            let l = i - nl;
            let br = &net.branches[l];
            terms.push((pick(vars.phi_hi, vars.phi_lo) + l, v0[br.from] * v0[br.to]));
        } else {
            let k = i - 2 * nl;
            if let Some(p) = lay.pq_pos[k] {
                terms.push((pick(vars.v_hi, vars.v_lo) + p, T::lit(2.0) * v0[k]));
            }
        }
        g.add(&Affine::from_terms(terms, T::zero()))
    };
    // upper and lower bounds of (row r of M) · ψ, given Mᵀ
    let m_ineq_t = mats.m_ineq.transpose();
    let sparse_row_bounds = |mt: &Csc<T>, r: usize| -> (Affine<T>, Affine<T>) {
        let mut hi = Affine::constant(T::zero());
        let mut lo = Affine::constant(T::zero());
        for (j, c) in mt.col(r) {
            if c == T::zero() {
                continue;
            }
            let (a, b) = if c > T::zero() { (psi_bound(j, true), psi_bound(j, false)) } else { (psi_bound(j, false), psi_bound(j, true)) };
            hi = hi.add(&a.scale(c));
            lo = lo.add(&b.scale(c));
        }
        (hi, lo)
    };

    let iv = intermediates(net, &mats, ctl, &base.x, &base.u);
    let gens = net.gens_at();

    // slack active power: p_gen = inj + p_load − other slack-bus generators
    let slack = lay.slack;
    let (inj_hi, inj_lo) = sparse_row_bounds(&m_ineq_t, 0);
    let mut others: Vec<(usize, T)> = Vec::new();
    for (i, &g) in ctl.p_gens.iter().enumerate() {
        if net.generators[g].bus == slack {
            others.push((vars.u + i, -one));
        }
    }
    let shift = Affine::from_terms(others, net.buses[slack].p_load);
    let sg = &net.generators[ctl.slack_gen];
    let (pmin, pmax) = widen(sg.p_min, sg.p_max, iv.p_slack_gen, || "slack generator active power".into(), &mut relaxed);
    prog.add_le(inj_hi.add(&shift).add(&var(vars.p_bar).scale(-one)), "p_slack_hi");
    prog.add_bounds(vars.p_bar, T::neg_infinity(), pmax);
    prog.add_le(inj_lo.add(&shift).scale(-one).add(&Affine::constant(pmin)), "p_slack_lo");

    // reactive power at voltage controlled buses
    let mut pv_row = 1usize;
    for (i, &k) in ctl.v_buses.iter().enumerate() {
        let r = if k == slack {
            1
        } else {
            pv_row += 1;
            pv_row
        };
        let qmax = gens[k].iter().fold(T::zero(), |s, &g| s + net.generators[g].q_max);
        let qmin = gens[k].iter().fold(T::zero(), |s, &g| s + net.generators[g].q_min);
        let (qmin, qmax) = widen(qmin, qmax, iv.q_gen_bus[i], || format!("bus {} reactive power", net.buses[k].id), &mut relaxed);
        let (hi, lo) = sparse_row_bounds(&m_ineq_t, r);
        let ql = net.buses[k].q_load;
        prog.add_le(hi.add(&Affine::constant(ql - qmax)), format!("q_hi[{}]", net.buses[k].id));
        prog.add_le(lo.scale(-one).add(&Affine::constant(qmin - ql)), format!("q_lo[{}]", net.buses[k].id));
    }

    // line flows
    let lf_t = mats.l_from.transpose();
    let lt_t = mats.l_to.transpose();
    let mut tight_lines = Vec::new();
    for (n, &l) in limited.iter().enumerate() {
        let mut smax = net.branches[l].s_max.expect("limited line");
        let base_s = (iv.sf_p[l].hypot(iv.sf_q[l])).max(iv.st_p[l].hypot(iv.st_q[l]));
        if base_s > smax {
            if base_s - smax > T::lit(RELAX_NOTE) {
                relaxed.push(format!("branch {l} flow limit widened to {:.6}", base_s.to_f64_lossy()));
            }
            smax = base_s;
        }
        if base_s > T::lit(0.99) * smax {
            tight_lines.push(l);
        }
        let sv = vars.s_bar + 4 * n;
        for (w, (mt, r)) in [(&lf_t, l), (&lf_t, nl + l), (&lt_t, l), (&lt_t, nl + l)].into_iter().enumerate() {
            let (hi, lo) = sparse_row_bounds(mt, r);
            prog.add_le(hi.add(&var(sv + w).scale(-one)), format!("flow_hi[{l}.{w}]"));
            prog.add_le(lo.scale(-one).add(&var(sv + w).scale(-one)), format!("flow_lo[{l}.{w}]"));
        }
        let cap = Affine::constant(smax);
        prog.add_soc(cap.clone(), vec![var(sv), var(sv + 1)], format!("flow_from[{l}]"));
        prog.add_soc(cap, vec![var(sv + 2), var(sv + 3)], format!("flow_to[{l}]"));
        quad_rows += 2;
    }
    for r in prog.ineq.iter_mut() {
        r.expr = Affine::from_terms(std::mem::take(&mut r.expr.terms), r.expr.constant);
    }
    debug_assert!(quad_rows <= 30 * nl + 4 * nb + 4 * net.n_gen());

    Ok(RestrictionProblem {
        base: base.clone(),
        ctl: ctl.clone(),
        mats,
        k_pos,
        k_neg,
        ajinv_tau0,
        ajinv_d,
        vars,
        program: prog,
        relaxed,
        tight_lines,
    })
}

impl<T: Scalar> RestrictionProblem<T> {
    /// Quadratic and cone rows in the program.
    pub fn quadratic_rows(&self) -> usize {
        self.program.quad.len() + self.program.soc.len()
    }

    /// The restriction with an objective attached.
    pub fn with_objective(&self, obj: Objective<T>) -> ConicProgram<T> {
        let mut p = self.program.clone();
        p.objective = obj;
        p
    }

    /// Pins `u` to a given control vector.
    pub fn fix_u(prog: &mut ConicProgram<T>, vars: &VarLayout, u: &[T]) {
        for (i, &v) in u.iter().enumerate() {
            prog.add_eq(Affine::shifted(vars.u + i, v), format!("fix_u[{i}]"));
        }
    }

    pub fn u_of(&self, z: &[T]) -> Vec<T> {
        z[self.vars.u_range()].to_vec()
    }

    pub fn bounds_of(&self, z: &[T]) -> PolytopeBounds<T> {
        let v = &self.vars;
        PolytopeBounds {
            phi_hi: z[v.phi_hi..v.phi_hi + v.n_line].to_vec(),
            phi_lo: z[v.phi_lo..v.phi_lo + v.n_line].to_vec(),
            v_hi: z[v.v_hi..v.v_hi + v.n_pq].to_vec(),
            v_lo: z[v.v_lo..v.v_lo + v.n_pq].to_vec(),
        }
    }
}

/// `Σ c_i(p_i) + c_slack(p̄)`: generation cost with the slack output over-estimated.
pub fn objective_cost<T: Scalar>(net: &Network<T>, prob: &RestrictionProblem<T>) -> Result<Objective<T>, RestrictionError> {
    let ctl = &prob.ctl;
    let mut obj = Objective::default();
    let add = |g: usize, var: usize, obj: &mut Objective<T>| -> Result<(), RestrictionError> {
        let c = net.generators[g].cost;
        if c.c2 < T::zero() || c.c1 < T::zero() || c.slope(net.generators[g].p_min) < T::zero() {
            return Err(RestrictionError::NonMonotoneCost(g));
        }
        if c.c2 != T::zero() {
            obj.q.push((var, var, c.c2));
        }
        obj.a = obj.a.add(&Affine::from_terms(vec![(var, c.c1)], c.c0));
        Ok(())
    };
    for (i, &g) in ctl.p_gens.iter().enumerate() {
        add(g, prob.vars.u + i, &mut obj)?;
    }
    add(ctl.slack_gen, prob.vars.p_bar, &mut obj)?;
    Ok(obj)
}

/// `λ‖p − p*‖² + ‖v_g − v_g*‖²` over the controllable generators.
pub fn objective_distance<T: Scalar>(
    prob: &RestrictionProblem<T>,
    p_target: &[T],
    v_target: &[T],
    lambda: T,
) -> Result<Objective<T>, RestrictionError> {
    let ctl = &prob.ctl;
    if p_target.len() != ctl.n_p() || v_target.len() != ctl.n_v() {
        return Err(RestrictionError::Dimension(format!(
            "target has {} active and {} voltage entries, expected {} and {}",
            p_target.len(),
            v_target.len(),
            ctl.n_p(),
            ctl.n_v()
        )));
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(RestrictionError::Weight(lambda.to_f64_lossy()));
    }
    let mut obj = Objective::default();
    let mut push = |var: usize, target: T, w: T| {
        obj.q.push((var, var, w));
        obj.a = obj.a.add(&Affine::from_terms(vec![(var, -T::lit(2.0) * w * target)], w * target * target));
    };
    for (i, &p) in p_target.iter().enumerate() {
        push(prob.vars.u + i, p, lambda);
    }
    for (i, &v) in v_target.iter().enumerate() {
        push(prob.vars.u + ctl.v_offset() + i, v, T::one());
    }
    Ok(obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use crate::conic::{solve, validate, SolveSettings, SolveStatus};
    use crate::powerflow::{flat_start, solve_pf, PfOptions};

    const TWO_BUS: &str = "mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1 0 100 1 1 1;
 2 1 0 0 0 0 1 1 0 100 1 1.1 0.9;
];
mpc.gen = [
 1 0 0 1000 -1000 1 100 1 1000 -1000;
];
mpc.branch = [
 1 2 0 1 0 0 0 0 0 0 1 -90 90;
];";

    fn two_bus() -> (Network<f64>, ControlMap, RestrictionProblem<f64>) {
        let net: Network<f64> = parse_case(TWO_BUS).unwrap();
        let ctl = ControlMap::with_injections(&net, &[1]);
        let mats = NetworkMatrices::new(&net, &[0.0]);
        let u = vec![1.0, 0.0, 0.0];
        let op = solve_pf(&net, &mats, &ctl, &u, &flat_start(&mats.layout), PfOptions::default()).unwrap();
        let prob = build_restriction(&net, &ctl, &op).unwrap();
        (net, ctl, prob)
    }

    fn member(prob: &RestrictionProblem<f64>, u: &[f64]) -> SolveStatus {
        let mut p = prob.program.clone();
        RestrictionProblem::fix_u(&mut p, &prob.vars, u);
        solve(&p, &SolveSettings::default()).status
    }

    #[test]
    fn k_split_signs() {
        let (_, _, prob) = two_bus();
        assert!(prob.k_pos.vals.iter().all(|&v| v > 0.0));
        assert!(prob.k_neg.vals.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn two_bus_membership() {
        let (_, _, prob) = two_bus();
        assert!(validate(&prob.program).iter().all(|v| v.msg.contains("dangling")));
        assert_eq!(member(&prob, &[1.0, 0.0, 0.0]), SolveStatus::Optimal);
        assert_eq!(member(&prob, &[1.0, 0.1, 0.05]), SolveStatus::Optimal);
        assert_eq!(member(&prob, &[1.0, 0.6, 0.0]), SolveStatus::Infeasible);
    }

    #[test]
    fn distance_objective_at_base_is_zero() {
        let (_, ctl, prob) = two_bus();
        let obj = objective_distance(&prob, &[], &[1.0], 1.0).unwrap();
        let r = solve(&prob.with_objective(obj), &SolveSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective.unwrap().abs() < 1e-7);
        assert_eq!(ctl.n_v(), 1);
        assert!(objective_distance(&prob, &[], &[1.0], 0.0).is_err());
        assert!(objective_distance(&prob, &[0.1], &[1.0], 1.0).is_err());
    }
}
