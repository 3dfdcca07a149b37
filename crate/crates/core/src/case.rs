//! MATPOWER case ingestion, per-unit network model and result documents.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing table `{0}`")]
    MissingTable(&'static str),
    #[error("unsupported cost model on generator {gen}: {msg}")]
    UnsupportedCost { gen: usize, msg: String },
    #[error("validation failed: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusKind {
    PQ,
    PV,
    Slack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus<T> {
    /// Bus number as written in the file.
    pub id: usize,
    pub kind: BusKind,
    pub p_load: T,
    pub q_load: T,
    pub v_min: T,
    pub v_max: T,
    pub shunt_g: T,
    pub shunt_b: T,
}

/// Polynomial cost `c2 p² + c1 p + c0` with `p` in per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost<T> {
    pub c2: T,
    pub c1: T,
    pub c0: T,
}

impl<T: Scalar> Cost<T> {
    pub fn eval(&self, p: T) -> T {
        (self.c2 * p + self.c1) * p + self.c0
    }

    pub fn slope(&self, p: T) -> T {
        T::lit(2.0) * self.c2 * p + self.c1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator<T> {
    /// Internal bus index.
    pub bus: usize,
    pub p_min: T,
    pub p_max: T,
    pub q_min: T,
    pub q_max: T,
    pub v_setpoint: T,
    /// Dispatch written in the file.
    pub p_file: T,
    pub cost: Cost<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch<T> {
    pub from: usize,
    pub to: usize,
    pub r: T,
    pub x: T,
    /// Total line charging susceptance.
    pub b_c: T,
    pub tap: T,
    /// Phase shift in radians.
    pub shift: T,
    pub s_max: Option<T>,
    pub phi_min: T,
    pub phi_max: T,
}

impl<T: Scalar> Branch<T> {
    /// Series admittance `1 / (r + jx)` as (g, b).
    pub fn series_admittance(&self) -> (T, T) {
        let d = self.r * self.r + self.x * self.x;
        (self.r / d, -self.x / d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    pub name: String,
    pub base_mva: T,
    pub buses: Vec<Bus<T>>,
    pub generators: Vec<Generator<T>>,
    pub branches: Vec<Branch<T>>,
}

const DEFAULT_ANGLE_DEG: f64 = 60.0;

impl<T: Scalar> Network<T> {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_line(&self) -> usize {
        self.branches.len()
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    pub fn slack(&self) -> usize {
        self.buses.iter().position(|b| b.kind == BusKind::Slack).expect("validated network has a slack bus")
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Generators attached to each bus, in file order.
    pub fn gens_at(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.n_bus()];
        for (i, gen) in self.generators.iter().enumerate() {
            g[gen.bus].push(i);
        }
        g
    }

    pub fn pq_buses(&self) -> Vec<usize> {
        (0..self.n_bus()).filter(|&k| self.buses[k].kind == BusKind::PQ).collect()
    }

    /// Buses with voltage control (slack and PV), ascending.
    pub fn gen_buses(&self) -> Vec<usize> {
        (0..self.n_bus()).filter(|&k| self.buses[k].kind != BusKind::PQ).collect()
    }

    /// Generation cost in currency per hour for per-unit dispatch `pg`.
    pub fn cost(&self, pg: &[T]) -> T {
        self.generators.iter().zip(pg).fold(T::zero(), |s, (g, &p)| s + g.cost.eval(p))
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        let bad = |m: String| Err(CaseError::Validation(m));
        let n_slack = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if n_slack != 1 {
            return bad(format!("expected exactly one slack bus, found {n_slack}"));
        }
        for b in &self.buses {
            if b.v_min > b.v_max {
                return bad(format!("bus {}: v_min > v_max", b.id));
            }
        }
        for (i, g) in self.generators.iter().enumerate() {
            if g.bus >= self.n_bus() {
                return bad(format!("generator {i} references a missing bus"));
            }
            if g.p_min > g.p_max || g.q_min > g.q_max {
                return bad(format!("generator {i}: inverted limits"));
            }
            if g.cost.c2 < T::zero() || g.cost.c1 < T::zero() || g.cost.slope(g.p_min) < T::zero() {
                return Err(CaseError::UnsupportedCost { gen: i, msg: "cost is not monotonically increasing".into() });
            }
        }
        let gens = self.gens_at();
        for (k, b) in self.buses.iter().enumerate() {
            if b.kind != BusKind::PQ && gens[k].is_empty() {
                return bad(format!("bus {} is voltage controlled but hosts no generator", b.id));
            }
            if let Some(&g0) = gens[k].first() {
                let v0 = self.generators[g0].v_setpoint;
                if gens[k].iter().any(|&g| self.generators[g].v_setpoint != v0) {
                    return bad(format!("bus {}: co-located generators disagree on voltage setpoint", b.id));
                }
            }
        }
        let pi = T::PI();
        for (l, br) in self.branches.iter().enumerate() {
            if br.from >= self.n_bus() || br.to >= self.n_bus() || br.from == br.to {
                return bad(format!("branch {l} has invalid endpoints"));
            }
            if br.tap <= T::zero() {
                return bad(format!("branch {l}: non-positive tap ratio"));
            }
            if br.r == T::zero() && br.x == T::zero() {
                return bad(format!("branch {l}: zero impedance"));
            }
            if br.phi_min < -pi || br.phi_min > T::zero() || br.phi_max < T::zero() || br.phi_max > pi {
                return bad(format!("branch {l}: angle limits outside [-pi, 0] x [0, pi]"));
            }
        }
        // connectivity
        let n = self.n_bus();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            adj[br.from].push(br.to);
            adj[br.to].push(br.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = n > 0;
        while let Some(k) = stack.pop() {
            for &m in &adj[k] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("network is not connected".into());
        }
        Ok(())
    }
}

struct Table {
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(p) => &line[..p],
        None => line,
    }
}

fn parse_scalar_assign(text: &str, key: &str) -> Option<(usize, f64)> {
    for (ln, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if let Some(rest) = line.strip_prefix(key) {
            let rest = rest.trim_start();
            if let Some(v) = rest.strip_prefix('=') {
                let v = v.trim().trim_end_matches(';').trim();
                return v.parse::<f64>().ok().map(|x| (ln + 1, x));
            }
        }
    }
    None
}

fn parse_table(text: &str, key: &str) -> Result<Option<Table>, CaseError> {
    let mut lines = text.lines().enumerate();
    let head = format!("mpc.{key}");
    while let Some((ln, raw)) = lines.next() {
        let line = strip_comment(raw).trim();
        let Some(rest) = line.strip_prefix(&head) else { continue };
        let rest = rest.trim_start();
        let Some(rest) = rest.strip_prefix('=') else { continue };
        let rest = rest.trim_start();
        let Some(mut body) = rest.strip_prefix('[') else {
            return Err(CaseError::Parse { line: ln + 1, msg: format!("expected `[` after mpc.{key} =") });
        };
        let mut rows = Vec::new();
        let mut cur: Vec<f64> = Vec::new();
        let mut cur_line = ln + 1;
        let mut body_owned;
        loop {
            let (content, done) = match body.find(']') {
                Some(p) => (&body[..p], true),
                None => (body, false),
            };
            for (i, seg) in content.split(';').enumerate() {
                if i > 0 && !cur.is_empty() {
                    rows.push((cur_line, std::mem::take(&mut cur)));
                }
                for tok in seg.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                    let v = match tok {
                        "Inf" | "inf" => f64::INFINITY,
                        "-Inf" | "-inf" => f64::NEG_INFINITY,
                        _ => tok.parse::<f64>().map_err(|_| CaseError::Parse {
                            line: cur_line,
                            msg: format!("invalid number `{tok}` in mpc.{key}"),
                        })?,
                    };
                    cur.push(v);
                }
            }
            // a newline also terminates a row
            if !cur.is_empty() {
                rows.push((cur_line, std::mem::take(&mut cur)));
            }
            if done {
                break;
            }
            match lines.next() {
                Some((l2, raw2)) => {
                    cur_line = l2 + 1;
                    body_owned = strip_comment(raw2).to_string();
                    body = body_owned.as_str();
                }
                None => {
                    return Err(CaseError::Parse { line: ln + 1, msg: format!("unterminated table mpc.{key}") });
                }
            }
        }
        let width = rows.first().map_or(0, |r| r.1.len());
        for (l, r) in &rows {
            if r.len() != width {
                return Err(CaseError::Parse {
                    line: *l,
                    msg: format!("mpc.{key}: row has {} columns, expected {width}", r.len()),
                });
            }
        }
        return Ok(Some(Table { rows }));
    }
    Ok(None)
}

fn need(t: &Table, key: &str, min_cols: usize) -> Result<(), CaseError> {
    for (l, r) in &t.rows {
        if r.len() < min_cols {
            return Err(CaseError::Parse { line: *l, msg: format!("mpc.{key} needs at least {min_cols} columns") });
        }
    }
    Ok(())
}

fn angle_limits(lo_deg: Option<f64>, hi_deg: Option<f64>) -> (f64, f64) {
    let d = DEFAULT_ANGLE_DEG;
    match (lo_deg, hi_deg) {
        (Some(lo), Some(hi)) if !(lo == 0.0 && hi == 0.0) => {
            let lo = if lo <= -360.0 || lo.is_infinite() { -d } else { lo };
            let hi = if hi >= 360.0 || hi.is_infinite() { d } else { hi };
            (lo.to_radians(), hi.to_radians())
        }
        _ => (-d.to_radians(), d.to_radians()),
    }
}

/// Parses MATPOWER case text into a validated per-unit network.
pub fn parse_case<T: Scalar>(text: &str) -> Result<Network<T>, CaseError> {
    let name = text
        .lines()
        .map(|l| strip_comment(l).trim())
        .find_map(|l| l.strip_prefix("function"))
        .and_then(|r| r.split('=').nth(1))
        .map(|s| s.trim().trim_end_matches(';').to_string())
        .unwrap_or_default();
    let (_, base) = parse_scalar_assign(text, "mpc.baseMVA").ok_or(CaseError::MissingTable("baseMVA"))?;
    if !(base > 0.0) {
        return Err(CaseError::Validation("baseMVA must be positive".into()));
    }
    let bus_t = parse_table(text, "bus")?.ok_or(CaseError::MissingTable("bus"))?;
    let gen_t = parse_table(text, "gen")?.ok_or(CaseError::MissingTable("gen"))?;
    let br_t = parse_table(text, "branch")?.ok_or(CaseError::MissingTable("branch"))?;
    let cost_t = parse_table(text, "gencost")?;
    need(&bus_t, "bus", 13)?;
    need(&gen_t, "gen", 10)?;
    need(&br_t, "branch", 11)?;

    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut buses = Vec::new();
    let mut bus_type = Vec::new();
    for (l, r) in &bus_t.rows {
        let id = r[0] as usize;
        if index.insert(id, buses.len()).is_some() {
            return Err(CaseError::Parse { line: *l, msg: format!("duplicate bus number {id}") });
        }
        let ty = r[1] as i64;
        let kind = match ty {
            1 => BusKind::PQ,
            2 => BusKind::PV,
            3 => BusKind::Slack,
            _ => return Err(CaseError::Parse { line: *l, msg: format!("unsupported bus type {ty}") }),
        };
        bus_type.push(kind);
        buses.push(Bus {
            id,
            kind,
            p_load: r[2] / base,
            q_load: r[3] / base,
            v_min: r[12],
            v_max: r[11],
            shunt_g: r[4] / base,
            shunt_b: r[5] / base,
        });
    }
    let lookup = |l: usize, id: f64| -> Result<usize, CaseError> {
        index
            .get(&(id as usize))
            .copied()
            .ok_or(CaseError::Parse { line: l, msg: format!("reference to unknown bus {id}") })
    };

    let mut gens: Vec<Generator<f64>> = Vec::new();
    let mut gen_rows = Vec::new();
    for (gi, (l, r)) in gen_t.rows.iter().enumerate() {
        if r[7] <= 0.0 {
            continue;
        }
        let bus = lookup(*l, r[0])?;
        let cost = match &cost_t {
            None => Cost { c2: 0.0, c1: base, c0: 0.0 },
            Some(ct) => {
                let (cl, c) = ct.rows.get(gi).ok_or(CaseError::Parse {
                    line: *l,
                    msg: format!("no gencost row for generator {}", gi + 1),
                })?;
                if c[0] as i64 != 2 {
                    return Err(CaseError::UnsupportedCost { gen: gi, msg: "piecewise-linear cost model".into() });
                }
                let n = c[3] as usize;
                if n > 3 {
                    return Err(CaseError::UnsupportedCost { gen: gi, msg: format!("polynomial degree {}", n - 1) });
                }
                if c.len() < 4 + n {
                    return Err(CaseError::Parse { line: *cl, msg: "gencost row too short".into() });
                }
                let coef = &c[4..4 + n];
                let at = |k: usize| if k < n { coef[n - 1 - k] } else { 0.0 };
                Cost { c2: at(2) * base * base, c1: at(1) * base, c0: at(0) }
            }
        };
        gens.push(Generator {
            bus,
            p_min: r[9] / base,
            p_max: r[8] / base,
            q_min: r[4] / base,
            q_max: r[3] / base,
            v_setpoint: r[5],
            p_file: r[1] / base,
            cost,
        });
        gen_rows.push(*l);
    }

    // bus kinds follow generator placement
    let mut has_gen = vec![false; buses.len()];
    for g in &gens {
        has_gen[g.bus] = true;
    }
    for (k, b) in buses.iter_mut().enumerate() {
        match (b.kind, has_gen[k]) {
            (BusKind::PV, false) => b.kind = BusKind::PQ,
            (BusKind::PQ, true) => b.kind = BusKind::PV,
            _ => {}
        }
    }
    // co-located generators share the first generator's setpoint
    let mut first_v: HashMap<usize, f64> = HashMap::new();
    for g in gens.iter_mut() {
        let v = *first_v.entry(g.bus).or_insert(g.v_setpoint);
        g.v_setpoint = v;
    }
    // fixed reactive output is folded into the load
    for g in gens.iter_mut() {
        if g.q_min == g.q_max {
            buses[g.bus].q_load -= g.q_min;
            g.q_min = 0.0;
            g.q_max = 0.0;
        }
    }

    let mut branches = Vec::new();
    for (l, r) in &br_t.rows {
        if r[10] <= 0.0 {
            continue;
        }
        let (lo, hi) = if r.len() >= 13 { (Some(r[11]), Some(r[12])) } else { (None, None) };
        let (phi_min, phi_max) = angle_limits(lo, hi);
        branches.push(Branch {
            from: lookup(*l, r[0])?,
            to: lookup(*l, r[1])?,
            r: r[2],
            x: r[3],
            b_c: r[4],
            tap: if r[8] == 0.0 { 1.0 } else { r[8] },
            shift: r[9].to_radians(),
            s_max: if r[5] > 0.0 { Some(r[5] / base) } else { None },
            phi_min,
            phi_max,
        });
    }
    let net64 = Network { name, base_mva: base, buses, generators: gens, branches };
    let net = net64.cast::<T>();
    net.validate()?;
    Ok(net)
}

impl Network<f64> {
    /// Converts to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Network<T> {
        let c = T::lit;
        Network {
            name: self.name.clone(),
            base_mva: c(self.base_mva),
            buses: self
                .buses
                .iter()
                .map(|b| Bus {
                    id: b.id,
                    kind: b.kind,
                    p_load: c(b.p_load),
                    q_load: c(b.q_load),
                    v_min: c(b.v_min),
                    v_max: c(b.v_max),
                    shunt_g: c(b.shunt_g),
                    shunt_b: c(b.shunt_b),
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| Generator {
                    bus: g.bus,
                    p_min: c(g.p_min),
                    p_max: c(g.p_max),
                    q_min: c(g.q_min),
                    q_max: c(g.q_max),
                    v_setpoint: c(g.v_setpoint),
                    p_file: c(g.p_file),
                    cost: Cost { c2: c(g.cost.c2), c1: c(g.cost.c1), c0: c(g.cost.c0) },
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| Branch {
                    from: b.from,
                    to: b.to,
                    r: c(b.r),
                    x: c(b.x),
                    b_c: c(b.b_c),
                    tap: c(b.tap),
                    shift: c(b.shift),
                    s_max: b.s_max.map(c),
                    phi_min: c(b.phi_min),
                    phi_max: c(b.phi_max),
                })
                .collect(),
        }
    }
}

/// Writes the network back as MATPOWER text (per-unit quantities rescaled to MW/MVAr).
pub fn write_case<T: Scalar>(net: &Network<T>) -> String {
    let f = |x: T| x.to_f64_lossy();
    let base = f(net.base_mva);
    let mut s = String::new();
    let name = if net.name.is_empty() { "case" } else { net.name.as_str() };
    let _ = writeln!(s, "function mpc = {name}");
    let _ = writeln!(s, "mpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {base:?};");
    let _ = writeln!(s, "mpc.bus = [");
    for b in &net.buses {
        let ty = match b.kind {
            BusKind::PQ => 1,
            BusKind::PV => 2,
            BusKind::Slack => 3,
        };
        let _ = writeln!(
            s,
            "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t1\t1.0\t0.0\t1.0\t1\t{:?}\t{:?};",
            b.id,
            ty,
            f(b.p_load) * base,
            f(b.q_load) * base,
            f(b.shunt_g) * base,
            f(b.shunt_b) * base,
            f(b.v_max),
            f(b.v_min)
        );
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(s, "mpc.gen = [");
    for g in &net.generators {
        let _ = writeln!(
            s,
            "\t{}\t{:?}\t0.0\t{:?}\t{:?}\t{:?}\t{:?}\t1\t{:?}\t{:?};",
            net.buses[g.bus].id,
            f(g.p_file) * base,
            f(g.q_max) * base,
            f(g.q_min) * base,
            f(g.v_setpoint),
            base,
            f(g.p_max) * base,
            f(g.p_min) * base
        );
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(s, "mpc.gencost = [");
    for g in &net.generators {
        let _ = writeln!(
            s,
            "\t2\t0\t0\t3\t{:?}\t{:?}\t{:?};",
            f(g.cost.c2) / (base * base),
            f(g.cost.c1) / base,
            f(g.cost.c0)
        );
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(s, "mpc.branch = [");
    for b in &net.branches {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t0\t0\t{:?}\t{:?}\t1\t{:?}\t{:?};",
            net.buses[b.from].id,
            net.buses[b.to].id,
            f(b.r),
            f(b.x),
            f(b.b_c),
            b.s_max.map_or(0.0, |v| f(v) * base),
            f(b.tap),
            f(b.shift).to_degrees(),
            f(b.phi_min).to_degrees(),
            f(b.phi_max).to_degrees()
        );
    }
    let _ = writeln!(s, "];");
    s
}

/// A dispatch in file units: MW per generator and setpoint voltage per generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub pg_mw: Vec<f64>,
    pub vg_pu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

/// Start and reference dispatches stored next to a case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    pub schema: String,
    pub case: String,
    pub start: Dispatch,
    pub reference: Dispatch,
}

pub fn read_fixture(text: &str) -> Result<Fixture, CaseError> {
    serde_json::from_str(text).map_err(|e| CaseError::Parse { line: e.line(), msg: e.to_string() })
}

pub fn read_dispatch(text: &str) -> Result<Dispatch, CaseError> {
    serde_json::from_str(text).map_err(|e| CaseError::Parse { line: e.line(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "function mpc = two
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 100 1 1 1;
  2 1 0 0 0 0 1 1 0 100 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 1000 -1000 1 100 1 1000 -1000;
];
mpc.branch = [
  1 2 0 1 0 0 0 0 0 0 1 -90 90;
];
";

    #[test]
    fn two_bus_per_unit() {
        let net: Network<f64> = parse_case(TWO_BUS).unwrap();
        assert_eq!(net.name, "two");
        assert_eq!(net.n_bus(), 2);
        assert_eq!(net.buses[1].kind, BusKind::PQ);
        assert_eq!(net.generators[0].p_max, 10.0);
        let (g, b) = net.branches[0].series_admittance();
        assert_eq!((g, b), (0.0, -1.0));
        assert_eq!(net.branches[0].s_max, None);
        assert!((net.branches[0].phi_max - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // no gencost table: uniform linear cost of one unit per MW
        assert_eq!(net.generators[0].cost.c1, 100.0);
    }

    #[test]
    fn zero_branches_is_disconnected() {
        let text = TWO_BUS.replace("  1 2 0 1 0 0 0 0 0 0 1 -90 90;\n", "");
        let err = parse_case::<f64>(&text).unwrap_err();
        assert!(matches!(err, CaseError::Validation(m) if m.contains("connected")));
    }

    #[test]
    fn duplicate_slack_rejected() {
        let text = TWO_BUS.replace("2 1 0 0 0 0 1 1 0 100 1 1.1 0.9", "2 3 0 0 0 0 1 1 0 100 1 1.1 0.9");
        // bus 2 now a slack without a generator: still two slack buses
        let err = parse_case::<f64>(&text).unwrap_err();
        assert!(matches!(err, CaseError::Validation(m) if m.contains("one slack")));
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = TWO_BUS.replace("1 2 0 1 0", "1 2 0 x1 0");
        match parse_case::<f64>(&text) {
            Err(CaseError::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn piecewise_cost_rejected() {
        let text = format!("{TWO_BUS}mpc.gencost = [\n 1 0 0 2 0 0 10 100;\n];\n");
        assert!(matches!(parse_case::<f64>(&text), Err(CaseError::UnsupportedCost { .. })));
    }

    #[test]
    fn zero_angle_limits_default() {
        let text = TWO_BUS.replace("-90 90", "0 0");
        let net: Network<f64> = parse_case(&text).unwrap();
        assert!((net.branches[0].phi_min + std::f64::consts::FRAC_PI_3).abs() < 1e-15);
        let text = TWO_BUS.replace("-90 90", "-360 360");
        let net: Network<f64> = parse_case(&text).unwrap();
        assert!((net.branches[0].phi_max - std::f64::consts::FRAC_PI_3).abs() < 1e-15);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let net: Network<f64> = parse_case(TWO_BUS).unwrap();
        let again: Network<f64> = parse_case(&write_case(&net)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn parses_into_f32() {
        let net: Network<f32> = parse_case(TWO_BUS).unwrap();
        assert_eq!(net.buses[1].v_max, 1.1f32);
    }
}
