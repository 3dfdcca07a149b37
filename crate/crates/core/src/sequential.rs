//! The path loop: restrict around the current point, solve, move, repeat.
//! Also independent certification of a finished path.

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::Network;
use crate::conic::{solve, SolveResult, SolveSettings, SolveStatus};
use crate::matrices::NetworkMatrices;
use crate::powerflow::{
    bus_voltages, check_feasibility, flat_start, intermediates, line_angles, solve_pf, ConstraintClass, ControlMap,
    FeasibilityReport, OperatingPoint, PfError, PfOptions,
};
use crate::restriction::{build_restriction, objective_cost, objective_distance, PolytopeBounds, RestrictionError};
use crate::scalar::{norm2, Scalar};

pub const PATH_SCHEMA: &str = "convexpath.path/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    Cost,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: ObjectiveMode,
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub cert_samples: usize,
    /// Tolerance of the operating limit checks, per-unit.
    pub feas_tol: f64,
    pub solver: SolveSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: ObjectiveMode::Cost,
            lambda: 1.0,
            epsilon: 0.01,
            max_iterations: 50,
            cert_samples: 11,
            feas_tol: 1e-6,
            solver: SolveSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), SequentialError> {
        if !(self.epsilon > 0.0) {
            return Err(SequentialError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.mode == ObjectiveMode::Distance && !(self.lambda > 0.0) {
            return Err(SequentialError::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.cert_samples < 2 {
            return Err(SequentialError::Config("at least two samples per segment are needed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    PowerFlowDiverged,
    SolverInfeasible,
    SolverFailure,
    SingularJacobian,
    /// The new point solved but broke a limit.
    LimitViolated,
}

impl Termination {
    pub fn is_success(self) -> bool {
        matches!(self, Termination::Converged | Termination::MaxIterations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Optimal value of the restricted program.
    pub objective: f64,
    /// True generation cost at the new setpoint.
    pub cost: f64,
    pub step_norm: f64,
    pub solver_iterations: u32,
    /// Wall time of the solve. Not serialized, so path documents stay reproducible.
    #[serde(skip)]
    pub solve_time: f64,
    pub pf_iterations: usize,
    pub relaxed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasiblePath<T> {
    pub schema: String,
    pub case: String,
    pub control: ControlMap,
    pub setpoints: Vec<Vec<T>>,
    /// Power flow states matching `setpoints`.
    pub states: Vec<Vec<T>>,
    /// Generation cost at every setpoint.
    pub costs: Vec<f64>,
    /// `bounds[k]` is the box certified around setpoint `k` for segment `k`.
    pub bounds: Vec<PolytopeBounds<T>>,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl<T: Scalar + Serialize + DeserializeOwned> FeasiblePath<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SequentialError> {
        let p: Self = serde_json::from_str(text).map_err(|e| SequentialError::Document(e.to_string()))?;
        if p.schema != PATH_SCHEMA {
            return Err(SequentialError::Document(format!("unsupported schema {}", p.schema)));
        }
        if p.setpoints.is_empty() || p.states.len() != p.setpoints.len() {
            return Err(SequentialError::Document("setpoints and states must be nonempty and aligned".into()));
        }
        Ok(p)
    }
}

impl<T: Scalar> FeasiblePath<T> {
    pub fn len(&self) -> usize {
        self.setpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.setpoints.is_empty()
    }

    pub fn final_cost(&self) -> f64 {
        *self.costs.last().expect("nonempty path")
    }
}

#[derive(Debug, Error)]
pub enum SequentialError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("start point has no power flow solution: {0}")]
    StartNotSolvable(PfError),
    #[error("start point violates {class:?} limits at {at} by {violation:e}")]
    StartInfeasible { class: ConstraintClass, at: String, violation: f64 },
    #[error(transparent)]
    Restriction(#[from] RestrictionError),
    #[error("path document: {0}")]
    Document(String),
    #[error("reference cost must be positive, got {0}")]
    ReferenceCost(f64),
}

/// Distance-mode target in control coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Target<T> {
    pub p: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> Target<T> {
    /// Splits a full control vector into the active and voltage blocks.
    pub fn from_u(ctl: &ControlMap, u: &[T]) -> Self {
        Target { p: u[..ctl.n_p()].to_vec(), v: u[ctl.v_offset()..ctl.v_offset() + ctl.n_v()].to_vec() }
    }
}

fn cost_at<T: Scalar>(net: &Network<T>, mats: &NetworkMatrices<T>, ctl: &ControlMap, op: &OperatingPoint<T>) -> f64 {
    let iv = intermediates(net, mats, ctl, &op.x, &op.u);
    net.cost(&ctl.dispatch(net, &op.u, iv.p_slack_gen)).to_f64_lossy()
}

fn first_violation(rep: &FeasibilityReport, tol: f64) -> Option<(ConstraintClass, String, f64)> {
    rep.violated(tol).first().map(|m| (m.class, m.at.clone(), -m.worst_margin))
}

/// Runs the loop from `start_u`. Failures after the start are reported in
/// `termination` with the path built so far.
pub fn run<T: Scalar>(
    net: &Network<T>,
    ctl: &ControlMap,
    start_u: &[T],
    config: &RunConfig,
    target: Option<&Target<T>>,
) -> Result<FeasiblePath<T>, SequentialError> {
    config.check()?;
    if config.mode == ObjectiveMode::Distance && target.is_none() {
        return Err(SequentialError::Config("distance mode needs a target".into()));
    }
    let mats0 = NetworkMatrices::new(net, &vec![T::zero(); net.n_line()]);
    let op = solve_pf(net, &mats0, ctl, start_u, &flat_start(&mats0.layout), PfOptions::default())
        .map_err(SequentialError::StartNotSolvable)?;
    let rep = check_feasibility(net, &mats0, ctl, &op, config.feas_tol);
    if let Some((class, at, violation)) = first_violation(&rep, config.feas_tol) {
        return Err(SequentialError::StartInfeasible { class, at, violation });
    }
    let mut path = FeasiblePath {
        schema: PATH_SCHEMA.into(),
        case: net.name.clone(),
        control: ctl.clone(),
        setpoints: vec![start_u.to_vec()],
        states: vec![op.x.clone()],
        costs: vec![cost_at(net, &mats0, ctl, &op)],
        bounds: vec![],
        iterations: vec![],
        termination: Termination::MaxIterations,
        message: None,
    };
    let mut op = op;
    for k in 0..config.max_iterations {
        let prob = match build_restriction(net, ctl, &op) {
            Ok(p) => p,
            Err(RestrictionError::Singular(e)) => {
                path.termination = Termination::SingularJacobian;
                path.message = Some(e.to_string());
                return Ok(path);
            }
            Err(e) => return Err(e.into()),
        };
        let obj = match (config.mode, target) {
            (ObjectiveMode::Cost, _) => objective_cost(net, &prob)?,
            (ObjectiveMode::Distance, Some(t)) => objective_distance(&prob, &t.p, &t.v, T::lit(config.lambda))?,
            (ObjectiveMode::Distance, None) => unreachable!(),
        };
        let prog = prob.with_objective(obj);
        let mut res: SolveResult<T> = solve(&prog, &config.solver);
        if res.status == SolveStatus::NumericalFailure {
            log::warn!("iteration {k}: numerical failure ({}), retrying with cleaned coefficients", res.stats.solver_status);
            res = solve(&prog.cleaned(T::lit(1e-9)), &config.solver);
        }
        let z = match (res.status, res.x) {
            (SolveStatus::Optimal, Some(z)) => z,
            (status, _) => {
                path.termination =
                    if status == SolveStatus::Infeasible { Termination::SolverInfeasible } else { Termination::SolverFailure };
                path.message = Some(format!("iteration {k}: solver status {}", res.stats.solver_status));
                return Ok(path);
            }
        };
        let u_new = prob.u_of(&z);
        let b = prob.bounds_of(&z);
        let step: Vec<T> = u_new.iter().zip(&op.u).map(|(a, b)| *a - *b).collect();
        let step_norm = norm2(&step).to_f64_lossy();
        let new_op = match solve_pf(net, &prob.mats, ctl, &u_new, &op.x, PfOptions::default()) {
            Ok(o) => o,
            Err(e) => {
                path.termination = Termination::PowerFlowDiverged;
                path.message = Some(format!("iteration {k}: {e}"));
                return Ok(path);
            }
        };
        let rep = check_feasibility(net, &prob.mats, ctl, &new_op, config.feas_tol);
        if let Some((class, at, v)) = first_violation(&rep, config.feas_tol) {
            path.termination = Termination::LimitViolated;
            path.message = Some(format!("iteration {k}: {class:?} limit at {at} violated by {v:e}"));
            return Ok(path);
        }
        let cost = cost_at(net, &prob.mats, ctl, &new_op);
        let rec = IterationRecord {
            iteration: k + 1,
            objective: res.objective.map_or(f64::NAN, |o| o.to_f64_lossy()),
            cost,
            step_norm,
            solver_iterations: res.stats.iterations,
            solve_time: res.stats.solve_time,
            pf_iterations: new_op.iterations,
            relaxed: prob.relaxed.clone(),
        };
        log::info!(
            "iteration={} objective={:.6} cost={:.6} step={:.3e} solve_time={:.3}s",
            rec.iteration,
            rec.objective,
            rec.cost,
            rec.step_norm,
            rec.solve_time
        );
        path.iterations.push(rec);
        path.bounds.push(b);
        path.setpoints.push(u_new);
        path.states.push(new_op.x.clone());
        path.costs.push(cost);
        op = new_op;
        if step_norm <= config.epsilon {
            path.termination = Termination::Converged;
            return Ok(path);
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub segment: usize,
    pub alpha: f64,
    /// Constraint class that failed, or `None` when the power flow diverged.
    pub class: Option<ConstraintClass>,
    pub at: String,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub segment: usize,
    pub samples: usize,
    /// Worst margin per constraint class over the segment.
    pub worst: Vec<(ConstraintClass, f64)>,
    /// Samples whose state left the certified box (only when the box is known).
    pub outside_box: usize,
    pub failures: Vec<SampleFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub segments: Vec<SegmentReport>,
    pub samples: usize,
    pub certified: bool,
}

impl CertificationReport {
    pub fn first_failure(&self) -> Option<&SampleFailure> {
        self.segments.iter().flat_map(|s| s.failures.iter()).next()
    }
}

#[allow(clippy::too_many_arguments)]
fn certify_segment<T: Scalar>(
    net: &Network<T>,
    mats: &NetworkMatrices<T>,
    ctl: &ControlMap,
    seg: usize,
    (ua, ub): (&[T], &[T]),
    x0: &[T],
    bounds: Option<&PolytopeBounds<T>>,
    samples: usize,
    tol: f64,
) -> SegmentReport {
    let mut rep = SegmentReport { segment: seg, samples, worst: vec![], outside_box: 0, failures: vec![] };
    let mut x = x0.to_vec();
    for s in 0..samples {
        let alpha = s as f64 / (samples - 1) as f64;
        let a = T::lit(alpha);
        // walks from ua to ub, warm starting from the previous sample
        let u: Vec<T> = ua.iter().zip(ub).map(|(p, q)| (T::one() - a) * *p + a * *q).collect();
        let op = match solve_pf(net, mats, ctl, &u, &x, PfOptions::default()) {
            Ok(op) => op,
            Err(e) => {
                rep.failures.push(SampleFailure { segment: seg, alpha, class: None, at: e.to_string(), margin: f64::NEG_INFINITY });
                continue;
            }
        };
        let fr = check_feasibility(net, mats, ctl, &op, tol);
        for m in &fr.margins {
            match rep.worst.iter_mut().find(|w| w.0 == m.class) {
                Some(w) => w.1 = w.1.min(m.worst_margin),
                None => rep.worst.push((m.class, m.worst_margin)),
            }
            if m.worst_margin < -tol {
                rep.failures.push(SampleFailure {
                    segment: seg,
                    alpha,
                    class: Some(m.class),
                    at: m.at.clone(),
                    margin: m.worst_margin,
                });
            }
        }
        if let Some(b) = bounds {
            let (theta, _) = bus_voltages(&mats.layout, ctl, &op.x, &op.u);
            let phi = line_angles(net, &theta);
            let nns = mats.layout.ns.len();
            if !b.contains(&phi, &op.x[nns..], 1e-6) {
                rep.outside_box += 1;
            }
        }
        x = op.x;
    }
    rep
}

/// Samples every segment on a uniform grid of `samples` points including the
/// endpoints, solves the power flow and checks all limits.
pub fn certify_path<T: Scalar>(
    net: &Network<T>,
    path: &FeasiblePath<T>,
    samples: usize,
    tol: f64,
) -> Result<CertificationReport, SequentialError> {
    if path.is_empty() {
        return Err(SequentialError::Document("empty path".into()));
    }
    if samples < 2 {
        return Err(SequentialError::Config("at least two samples per segment are needed".into()));
    }
    let ctl = &path.control;
    let mats = NetworkMatrices::new(net, &vec![T::zero(); net.n_line()]);
    let segments: Vec<SegmentReport> = if path.len() == 1 {
        let u = &path.setpoints[0];
        vec![certify_segment(net, &mats, ctl, 0, (u, u), &path.states[0], None, 2, tol)]
    } else {
        (0..path.len() - 1)
            .into_par_iter()
            .map(|k| {
                certify_segment(
                    net,
                    &mats,
                    ctl,
                    k,
                    (&path.setpoints[k], &path.setpoints[k + 1]),
                    &path.states[k],
                    path.bounds.get(k),
                    samples,
                    tol,
                )
            })
            .collect()
    };
    let n = segments.iter().map(|s| s.samples).sum();
    let certified = segments.iter().all(|s| s.failures.is_empty());
    Ok(CertificationReport { segments, samples: n, certified })
}

/// A two-point path from `a` to `b` with no certified boxes, for checking
/// straight transitions.
pub fn straight_path<T: Scalar>(
    net: &Network<T>,
    ctl: &ControlMap,
    a: &[T],
    b: &[T],
) -> Result<FeasiblePath<T>, SequentialError> {
    let mats = NetworkMatrices::new(net, &vec![T::zero(); net.n_line()]);
    let op = solve_pf(net, &mats, ctl, a, &flat_start(&mats.layout), PfOptions::default())
        .map_err(SequentialError::StartNotSolvable)?;
    Ok(FeasiblePath {
        schema: PATH_SCHEMA.into(),
        case: net.name.clone(),
        control: ctl.clone(),
        setpoints: vec![a.to_vec(), b.to_vec()],
        states: vec![op.x.clone(), op.x],
        costs: vec![],
        bounds: vec![],
        iterations: vec![],
        termination: Termination::MaxIterations,
        message: None,
    })
}

/// `(c − c_ref) / c_ref`
pub fn optimality_gap(cost: f64, cost_ref: f64) -> Result<f64, SequentialError> {
    if !(cost_ref > 0.0) {
        return Err(SequentialError::ReferenceCost(cost_ref));
    }
    Ok((cost - cost_ref) / cost_ref)
}

/// Distance-mode runs for each weight, in parallel.
pub fn lambda_sweep<T: Scalar>(
    net: &Network<T>,
    ctl: &ControlMap,
    start_u: &[T],
    target: &Target<T>,
    lambdas: &[f64],
    config: &RunConfig,
) -> Vec<(f64, Result<FeasiblePath<T>, SequentialError>)> {
    lambdas
        .par_iter()
        .map(|&l| {
            let cfg = RunConfig { mode: ObjectiveMode::Distance, lambda: l, ..config.clone() };
            (l, run(net, ctl, start_u, &cfg, Some(target)))
        })
        .collect()
}
