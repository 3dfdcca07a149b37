//! Solver-agnostic convex QCQP representation and its solution via an
//! interior-point conic solver.
//!
//! Quadratic rows `zᵀQz + aᵀz + c ≤ 0` are lowered to second-order cones
//! through a pivoted Cholesky factor `Q = FᵀF`:
//! `‖(2Fz, 1 + aᵀz + c)‖ ≤ 1 − aᵀz − c`. Rows that come with centred squares
//! `Σ rᵢ² + ℓ ≤ 0` are lowered from those instead.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use serde::{Deserialize, Serialize};

use crate::linalg::{pivoted_cholesky, symmetric_eigenvalues};
use crate::scalar::Scalar;
use crate::sparse::Triplets;

/// Sparse affine expression `Σ coef · z[idx] + constant` over decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<T> {
    pub terms: Vec<(usize, T)>,
    pub constant: T,
}

impl<T: Scalar> Affine<T> {
    pub fn constant(c: T) -> Self {
        Affine { terms: vec![], constant: c }
    }

    pub fn var(i: usize) -> Self {
        Affine { terms: vec![(i, T::one())], constant: T::zero() }
    }

    /// `z[i] − c`
    pub fn shifted(i: usize, c: T) -> Self {
        Affine { terms: vec![(i, T::one())], constant: -c }
    }

    pub fn eval(&self, z: &[T]) -> T {
        self.terms.iter().fold(self.constant, |s, (i, c)| s + *c * z[*i])
    }

    pub fn scale(&self, k: T) -> Self {
        Affine { terms: self.terms.iter().map(|(i, c)| (*i, *c * k)).collect(), constant: self.constant * k }
    }

    pub fn add(&self, o: &Affine<T>) -> Self {
        let mut terms = self.terms.clone();
        for &(i, c) in &o.terms {
            match terms.iter_mut().find(|t| t.0 == i) {
                Some(t) => t.1 += c,
                None => terms.push((i, c)),
            }
        }
        terms.retain(|t| t.1 != T::zero());
        Affine { terms, constant: self.constant + o.constant }
    }

    /// `Σ aᵢ eᵢ` for local coefficient vector `a`.
    pub fn combine(a: &[T; 3], e: &[Affine<T>; 3]) -> Self {
        let mut r = Affine::constant(T::zero());
        for k in 0..3 {
            if a[k] != T::zero() {
                r = r.add(&e[k].scale(a[k]));
            }
        }
        r
    }
}

/// `Σ coef · z[idx] + constant` as a single linear functional.
impl<T: Scalar> Affine<T> {
    pub fn from_terms(terms: Vec<(usize, T)>, constant: T) -> Self {
        Affine::constant(constant).add(&Affine { terms, constant: T::zero() })
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|t| t.1.is_finite())
    }
}

/// `expr = 0` or `expr ≤ 0` depending on the list it sits in.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRow<T> {
    pub expr: Affine<T>,
    pub tag: String,
}

/// `zᵀQz + aᵀz + c ≤ 0`. `q` holds the upper triangle (`i ≤ j`) of a symmetric `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow<T> {
    pub q: Vec<(usize, usize, T)>,
    pub a: Affine<T>,
    pub tag: String,
    /// Same row as `Σ rᵢ² + ℓ ≤ 0` when it was built from centred squares;
    /// lowering prefers this form since it avoids cancellation.
    pub squares: Option<(Vec<Affine<T>>, Affine<T>)>,
}

/// `‖(x₁, …, x_k)‖₂ ≤ t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocRow<T> {
    pub t: Affine<T>,
    pub xs: Vec<Affine<T>>,
    pub tag: String,
}

/// Minimise `zᵀQz + aᵀz + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective<T> {
    pub q: Vec<(usize, usize, T)>,
    pub a: Affine<T>,
}

impl<T: Scalar> Default for Objective<T> {
    fn default() -> Self {
        Objective { q: vec![], a: Affine::constant(T::zero()) }
    }
}

fn quad_value<T: Scalar>(q: &[(usize, usize, T)], z: &[T]) -> T {
    q.iter().fold(T::zero(), |s, &(i, j, v)| if i == j { s + v * z[i] * z[i] } else { s + T::lit(2.0) * v * z[i] * z[j] })
}

impl<T: Scalar> Objective<T> {
    pub fn eval(&self, z: &[T]) -> T {
        quad_value(&self.q, z) + self.a.eval(z)
    }
}

impl<T: Scalar> QuadRow<T> {
    pub fn eval(&self, z: &[T]) -> T {
        quad_value(&self.q, z) + self.a.eval(z)
    }

    /// `Σ wᵢ (rᵢ)² + ℓ ≤ 0` expanded into `(Q, a, c)`.
    pub fn from_squares(squares: &[(T, Affine<T>)], linear: &Affine<T>, tag: impl Into<String>) -> Self {
        let mut q: Vec<(usize, usize, T)> = Vec::new();
        let mut a = linear.clone();
        for (w, r) in squares {
            for (x, &(i, ci)) in r.terms.iter().enumerate() {
                for &(j, cj) in &r.terms[x..] {
                    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                    q.push((lo, hi, *w * ci * cj));
                }
            }
            a = a.add(&r.scale(T::lit(2.0) * *w * r.constant).with_constant(*w * r.constant * r.constant));
        }
        let squares = if squares.iter().all(|(w, _)| *w >= T::zero()) {
            Some((squares.iter().map(|(w, r)| r.scale(w.sqrt())).collect(), linear.clone()))
        } else {
            None
        };
        QuadRow { q: merge_upper(q), a, tag: tag.into(), squares }
    }
}

impl<T: Scalar> Affine<T> {
    fn with_constant(mut self, c: T) -> Self {
        self.constant = c;
        self
    }
}

fn merge_upper<T: Scalar>(mut q: Vec<(usize, usize, T)>) -> Vec<(usize, usize, T)> {
    q.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out: Vec<(usize, usize, T)> = Vec::with_capacity(q.len());
    for (i, j, v) in q {
        match out.last_mut() {
            Some(l) if l.0 == i && l.1 == j => l.2 += v,
            _ => out.push((i, j, v)),
        }
    }
    out.retain(|e| e.2 != T::zero());
    out
}

impl<T: Scalar> SocRow<T> {
    /// `‖x‖ − t`, positive when violated.
    pub fn violation(&self, z: &[T]) -> T {
        let n = self.xs.iter().fold(T::zero(), |s, x| {
            let v = x.eval(z);
            s + v * v
        });
        n.sqrt() - self.t.eval(z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram<T> {
    pub names: Vec<String>,
    pub eq: Vec<LinRow<T>>,
    pub ineq: Vec<LinRow<T>>,
    pub quad: Vec<QuadRow<T>>,
    pub soc: Vec<SocRow<T>>,
    pub objective: Objective<T>,
}

impl<T: Scalar> ConicProgram<T> {
    pub fn new() -> Self {
        ConicProgram {
            names: vec![],
            eq: vec![],
            ineq: vec![],
            quad: vec![],
            soc: vec![],
            objective: Objective::default(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn add_eq(&mut self, expr: Affine<T>, tag: impl Into<String>) {
        self.eq.push(LinRow { expr, tag: tag.into() });
    }

    /// `expr ≤ 0`
    pub fn add_le(&mut self, expr: Affine<T>, tag: impl Into<String>) {
        self.ineq.push(LinRow { expr, tag: tag.into() });
    }

    pub fn add_bounds(&mut self, i: usize, lo: T, hi: T) {
        let name = self.names[i].clone();
        if lo.is_finite() {
            self.add_le(Affine::from_terms(vec![(i, -T::one())], lo), format!("lb:{name}"));
        }
        if hi.is_finite() {
            self.add_le(Affine::shifted(i, hi), format!("ub:{name}"));
        }
    }

    pub fn add_quad(&mut self, row: QuadRow<T>) {
        self.quad.push(row);
    }

    pub fn add_soc(&mut self, t: Affine<T>, xs: Vec<Affine<T>>, tag: impl Into<String>) {
        self.soc.push(SocRow { t, xs, tag: tag.into() });
    }

    /// Largest row violation at `z` (equalities in absolute value).
    pub fn max_violation(&self, z: &[T]) -> T {
        let mut m = T::zero();
        for r in &self.eq {
            m = m.max(r.expr.eval(z).abs());
        }
        for r in &self.ineq {
            m = m.max(r.expr.eval(z));
        }
        for r in &self.quad {
            m = m.max(r.eval(z));
        }
        for r in &self.soc {
            m = m.max(r.violation(z));
        }
        m
    }

    /// Name and amount of the worst violated row, if any exceeds `tol`.
    pub fn worst_row(&self, z: &[T], tol: T) -> Option<(String, T)> {
        let mut best: Option<(String, T)> = None;
        let mut consider = |tag: &str, v: T| {
            if v > tol && best.as_ref().map_or(true, |b| v > b.1) {
                best = Some((tag.to_string(), v));
            }
        };
        for r in &self.eq {
            consider(&r.tag, r.expr.eval(z).abs());
        }
        for r in &self.ineq {
            consider(&r.tag, r.expr.eval(z));
        }
        for r in &self.quad {
            consider(&r.tag, r.eval(z));
        }
        for r in &self.soc {
            consider(&r.tag, r.violation(z));
        }
        best
    }

    /// Drops coefficients whose magnitude is below `tol` times the largest in their row.
    pub fn cleaned(&self, tol: T) -> Self {
        let clean = |a: &Affine<T>| {
            let m = a.terms.iter().fold(T::zero(), |m, t| m.max(t.1.abs()));
            Affine { terms: a.terms.iter().copied().filter(|t| t.1.abs() > tol * m).collect(), constant: a.constant }
        };
        let mut p = self.clone();
        for r in p.eq.iter_mut().chain(p.ineq.iter_mut()) {
            r.expr = clean(&r.expr);
        }
        for r in p.quad.iter_mut() {
            r.a = clean(&r.a);
        }
        for r in p.soc.iter_mut() {
            r.t = clean(&r.t);
            for x in r.xs.iter_mut() {
                *x = clean(x);
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub row: String,
    pub msg: String,
}

fn dense_support<T: Scalar>(q: &[(usize, usize, T)]) -> (Vec<usize>, Vec<Vec<T>>) {
    let mut idx: Vec<usize> = q.iter().flat_map(|e| [e.0, e.1]).collect();
    idx.sort_unstable();
    idx.dedup();
    let pos = |i: usize| idx.binary_search(&i).unwrap();
    let mut d = vec![vec![T::zero(); idx.len()]; idx.len()];
    for &(i, j, v) in q {
        let (a, b) = (pos(i), pos(j));
        d[a][b] = v;
        d[b][a] = v;
    }
    (idx, d)
}

/// Structural checks: PSD quadratic parts, finite coefficients, index range
/// and variables that no row or objective touches.
pub fn validate<T: Scalar>(prog: &ConicProgram<T>) -> Vec<Violation> {
    let n = prog.n_vars();
    let mut out = Vec::new();
    let mut used = vec![false; n];
    let check_affine = |a: &Affine<T>, tag: &str, out: &mut Vec<Violation>, used: &mut Vec<bool>| {
        if !a.is_finite() {
            out.push(Violation { row: tag.into(), msg: "non-finite coefficient".into() });
        }
        for &(i, _) in &a.terms {
            if i >= n {
                out.push(Violation { row: tag.into(), msg: format!("variable {i} out of range") });
            } else {
                used[i] = true;
            }
        }
    };
    let check_q = |q: &[(usize, usize, T)], tag: &str, out: &mut Vec<Violation>, used: &mut Vec<bool>| {
        if q.is_empty() {
            return;
        }
        for &(i, j, v) in q {
            if !v.is_finite() {
                out.push(Violation { row: tag.into(), msg: "non-finite coefficient".into() });
            }
            for k in [i, j] {
                if k >= n {
                    out.push(Violation { row: tag.into(), msg: format!("variable {k} out of range") });
                    return;
                }
                used[k] = true;
            }
        }
        let (_, d) = dense_support(q);
        let ev = symmetric_eigenvalues(&d);
        let min = ev.iter().fold(T::infinity(), |m, &e| m.min(e));
        if min < -T::lit(1e-9) {
            out.push(Violation { row: tag.into(), msg: format!("quadratic part not PSD (eigenvalue {min:e})") });
        }
    };
    for r in prog.eq.iter().chain(prog.ineq.iter()) {
        check_affine(&r.expr, &r.tag, &mut out, &mut used);
    }
    for r in &prog.quad {
        check_affine(&r.a, &r.tag, &mut out, &mut used);
        check_q(&r.q, &r.tag, &mut out, &mut used);
    }
    for r in &prog.soc {
        check_affine(&r.t, &r.tag, &mut out, &mut used);
        for x in &r.xs {
            check_affine(x, &r.tag, &mut out, &mut used);
        }
    }
    check_affine(&prog.objective.a, "objective", &mut out, &mut used);
    check_q(&prog.objective.q, "objective", &mut out, &mut used);
    for (i, u) in used.iter().enumerate() {
        if !u {
            out.push(Violation { row: prog.names[i].clone(), msg: "dangling variable".into() });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub time_limit: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// Scale `s` of the cone `‖(2√s r, s + ℓ)‖ ≤ s − ℓ` used for rows built
    /// from squares; small values keep thin cones away from round-off.
    pub cone_scale: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings { tol_feas: 1e-8, tol_gap: 1e-8, time_limit: 300.0, max_iter: 200, verbose: false, cone_scale: 1e-3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: u32,
    pub solve_time: f64,
    pub setup_time: f64,
    pub max_violation: f64,
    pub solver_status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    pub x: Option<Vec<T>>,
    pub objective: Option<T>,
    pub stats: SolveStats,
}

/// Rows of `A` and `b` for clarabel's `Az + s = b, s ∈ K`.
struct Lowered<T> {
    a: Triplets<T>,
    b: Vec<T>,
    cones: Vec<SupportedConeT<T>>,
}

impl<T: Scalar> Lowered<T> {
    /// Appends `s = −expr`, i.e. `A = coeffs`, `b = −constant`.
    fn row(&mut self, e: &Affine<T>) {
        let r = self.b.len();
        for &(i, c) in &e.terms {
            self.a.push(r, i, c);
        }
        self.b.push(-e.constant);
    }

    /// Appends `s = expr`.
    fn row_pos(&mut self, e: &Affine<T>) {
        self.row(&e.scale(-T::one()));
    }
}

fn lower<T: Scalar>(prog: &ConicProgram<T>, cone_scale: f64) -> Lowered<T> {
    let n = prog.n_vars();
    let mut l = Lowered { a: Triplets::new(usize::MAX, n), b: Vec::new(), cones: Vec::new() };
    for r in &prog.eq {
        l.row(&r.expr);
    }
    if !prog.eq.is_empty() {
        l.cones.push(ZeroConeT(prog.eq.len()));
    }
    for r in &prog.ineq {
        l.row(&r.expr);
    }
    if !prog.ineq.is_empty() {
        l.cones.push(NonnegativeConeT(prog.ineq.len()));
    }
    for r in &prog.soc {
        l.row_pos(&r.t);
        for x in &r.xs {
            l.row_pos(x);
        }
        l.cones.push(SecondOrderConeT(1 + r.xs.len()));
    }
    for r in &prog.quad {
        let one = Affine::constant(T::one());
        if r.q.is_empty() {
            l.row(&r.a);
            l.cones.push(NonnegativeConeT(1));
            continue;
        }
        if let Some((rs, lin)) = &r.squares {
            let sc = T::lit(cone_scale);
            let so = Affine::constant(sc);
            l.row_pos(&so.add(&lin.scale(-T::one())));
            l.row_pos(&so.add(lin));
            for x in rs {
                l.row_pos(&x.scale(T::lit(2.0) * sc.sqrt()));
            }
            l.cones.push(SecondOrderConeT(2 + rs.len()));
            continue;
        }
        let (idx, d) = dense_support(&r.q);
        let f = pivoted_cholesky(&d, T::lit(1e-14));
        l.row_pos(&one.add(&r.a.scale(-T::one())));
        l.row_pos(&one.add(&r.a));
        for frow in &f {
            let terms: Vec<(usize, T)> =
                idx.iter().zip(frow).filter(|(_, v)| **v != T::zero()).map(|(i, v)| (*i, T::lit(2.0) * *v)).collect();
            l.row_pos(&Affine { terms, constant: T::zero() });
        }
        l.cones.push(SecondOrderConeT(2 + f.len()));
    }
    l.a.nrows = l.b.len();
    l
}

fn to_clarabel<T: Scalar>(m: &crate::sparse::Csc<T>) -> CscMatrix<T> {
    CscMatrix::new(m.nrows, m.ncols, m.colptr.clone(), m.rowidx.clone(), m.vals.clone())
}

/// Solves the program. Infeasibility is a status, never an error.
pub fn solve<T: Scalar>(prog: &ConicProgram<T>, settings: &SolveSettings) -> SolveResult<T> {
    let t0 = Instant::now();
    let n = prog.n_vars();
    let low = lower(prog, settings.cone_scale);
    let a = to_clarabel(&low.a.to_csc());
    let mut pt = Triplets::new(n, n);
    for &(i, j, v) in &prog.objective.q {
        pt.push(i.min(j), i.max(j), T::lit(2.0) * v);
    }
    let p = to_clarabel(&pt.to_csc());
    let mut q = vec![T::zero(); n];
    for &(i, c) in &prog.objective.a.terms {
        q[i] += c;
    }
    let cs = DefaultSettings::<T> {
        max_iter: settings.max_iter,
        time_limit: settings.time_limit,
        verbose: settings.verbose,
        tol_feas: T::lit(settings.tol_feas),
        tol_gap_abs: T::lit(settings.tol_gap),
        tol_gap_rel: T::lit(settings.tol_gap),
        ..DefaultSettings::default()
    };
    let fail = |status: SolveStatus, msg: String, stats: SolveStats| SolveResult {
        status,
        x: None,
        objective: None,
        stats: SolveStats { solver_status: msg, ..stats },
    };
    let setup = t0.elapsed().as_secs_f64();
    let mut solver = match DefaultSolver::new(&p, &q, &a, &low.b, &low.cones, cs) {
        Ok(s) => s,
        Err(e) => return fail(SolveStatus::NumericalFailure, e.to_string(), SolveStats::default()),
    };
    solver.solve();
    let sol = &solver.solution;
    let mut stats = SolveStats {
        iterations: sol.iterations,
        solve_time: sol.solve_time,
        setup_time: setup,
        max_violation: f64::NAN,
        solver_status: format!("{:?}", sol.status),
    };
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::MaxTime => SolveStatus::TimeLimit,
        _ => SolveStatus::NumericalFailure,
    };
    if status != SolveStatus::Optimal {
        return fail(status, stats.solver_status.clone(), stats);
    }
    let x = sol.x.clone();
    let viol = prog.max_violation(&x);
    stats.max_violation = viol.to_f64_lossy();
    // reduced-accuracy solutions must still pass the independent check
    if sol.status == SolverStatus::AlmostSolved && viol > T::lit(1e-6) {
        return fail(SolveStatus::NumericalFailure, stats.solver_status.clone(), stats);
    }
    let obj = prog.objective.eval(&x);
    SolveResult { status, x: Some(x), objective: Some(obj), stats }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimize_square_above_one() {
        let mut p = ConicProgram::<f64>::new();
        let x = p.add_var("x");
        p.objective.q.push((x, x, 1.0));
        p.add_le(Affine::from_terms(vec![(x, -1.0)], 1.0), "x>=1");
        let r = solve(&p, &SolveSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        let xv = r.x.unwrap()[0];
        assert!((xv - 1.0).abs() < 1e-6, "{xv}");
        assert!((r.objective.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_row_lowering() {
        // min −x − y  s.t. x² + y² ≤ 1
        let mut p = ConicProgram::<f64>::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.objective.a = Affine::from_terms(vec![(x, -1.0), (y, -1.0)], 0.0);
        p.add_quad(QuadRow { q: vec![(x, x, 1.0), (y, y, 1.0)], a: Affine::constant(-1.0), tag: "disc".into(), squares: None });
        let r = solve(&p, &SolveSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        let z = r.x.unwrap();
        let h = 0.5f64.sqrt();
        assert!((z[0] - h).abs() < 1e-6 && (z[1] - h).abs() < 1e-6);
        assert!(r.stats.max_violation < 1e-7);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let mut p = ConicProgram::<f64>::new();
        let x = p.add_var("x");
        p.add_bounds(x, 2.0, 1.0);
        p.objective.a = Affine::var(x);
        let r = solve(&p, &SolveSettings::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.x.is_none());
    }

    #[test]
    fn validator_flags_indefinite_and_dangling() {
        let mut p = ConicProgram::<f64>::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_var("z");
        p.add_quad(QuadRow { q: vec![(x, x, 1.0), (y, y, -1.0)], a: Affine::constant(0.0), tag: "bad".into(), squares: None });
        let v = validate(&p);
        assert!(v.iter().any(|v| v.row == "bad" && v.msg.contains("PSD")));
        assert!(v.iter().any(|v| v.row == "z" && v.msg.contains("dangling")));
        assert!(validate(&ConicProgram::<f64>::new()).is_empty());
    }

    #[test]
    fn squares_expand_to_same_value() {
        let r = Affine::<f64>::from_terms(vec![(0, 2.0), (1, -1.0)], 0.5);
        let s = Affine::<f64>::from_terms(vec![(1, 1.0), (2, 3.0)], -0.2);
        let lin = Affine::from_terms(vec![(2, 0.7)], 0.1);
        let row = QuadRow::from_squares(&[(0.25, r.clone()), (-0.5, s.clone())], &lin, "t");
        let z = [0.3, -1.2, 0.8];
        let want: f64 = 0.25 * r.eval(&z).powi(2) - 0.5 * s.eval(&z).powi(2) + lin.eval(&z);
        assert!((row.eval(&z) - want).abs() < 1e-14);
    }

    #[test]
    fn solves_in_f32() {
        let mut p = ConicProgram::<f32>::new();
        let x = p.add_var("x");
        p.objective.q.push((x, x, 1.0));
        p.add_le(Affine::from_terms(vec![(x, -1.0)], 1.0), "x>=1");
        let s = SolveSettings { tol_feas: 1e-5, tol_gap: 1e-5, ..Default::default() };
        let r = solve(&p, &s);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x.unwrap()[0] - 1.0).abs() < 1e-3);
    }
}
