use std::path::PathBuf;
use std::time::Instant;

use convexpath::case::BusKind;
use convexpath::conic::{solve, SolveStatus};
use convexpath::matrices::NetworkMatrices;
use convexpath::powerflow::{flat_start, solve_and_check, solve_pf, ControlMap, PfOptions};
use convexpath::restriction::{build_restriction, RestrictionProblem};
use convexpath::{Network, RestrictionProblem as Restriction};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::FileConfig;
use crate::{dispatch_u, load_case, load_dispatch, usage_error, write_doc, Failure};

const SLICE_SCHEMA: &str = "convexpath.slice/1";

#[derive(clap::Args, Debug)]
pub struct SliceArgs {
    pub case: PathBuf,
    /// Two control axes: `pg:GEN` (1-based generator row), `vg:BUS`, `pinj:BUS` or `qinj:BUS`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub axes: Vec<String>,
    /// Points per axis.
    #[arg(long, default_value_t = 41, value_parser = clap::value_parser!(u32).range(2..))]
    pub grid: u32,
    /// Axis ranges `LO:HI,LO:HI` in per-unit. Defaults to the control limits.
    #[arg(long, value_delimiter = ',')]
    pub range: Vec<String>,
    /// Base dispatch for the other controls and for the restriction.
    #[arg(long, value_name = "FILE")]
    pub base: Option<PathBuf>,
    /// Skip the restriction membership test.
    #[arg(long)]
    pub no_restriction: bool,
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Pg(usize),
    Vg(usize),
    Pinj(usize),
    Qinj(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    /// Power flow did not converge.
    Unsolvable,
    /// Solved but broke a limit.
    Infeasible,
    Feasible,
    /// Feasible and inside the restriction built at the base.
    Restriction,
}

fn parse_axis(net: &Network, s: &str) -> Result<Axis, String> {
    let (kind, num) = s.split_once(':').ok_or(format!("axis `{s}`: expected KIND:NUMBER"))?;
    let n: usize = num.parse().map_err(|_| format!("axis `{s}`: bad number"))?;
    let bus = |id: usize| net.bus_index(id).ok_or(format!("axis `{s}`: no bus {id}"));
    match kind {
        "pg" => {
            if n == 0 || n > net.n_gen() {
                return Err(format!("axis `{s}`: no generator {n}"));
            }
            let ctl = ControlMap::new(net);
            if n - 1 == ctl.slack_gen {
                return Err(format!("axis `{s}`: slack active power is implicit and cannot be an axis"));
            }
            Ok(Axis::Pg(n - 1))
        }
        "vg" => {
            let k = bus(n)?;
            if net.buses[k].kind == BusKind::PQ {
                return Err(format!("axis `{s}`: bus {n} has no voltage setpoint"));
            }
            Ok(Axis::Vg(k))
        }
        "pinj" | "qinj" => {
            let k = bus(n)?;
            if net.buses[k].kind != BusKind::PQ {
                return Err(format!("axis `{s}`: bus {n} is not a load bus"));
            }
            Ok(if kind == "pinj" { Axis::Pinj(k) } else { Axis::Qinj(k) })
        }
        _ => Err(format!("axis `{s}`: unknown kind `{kind}`")),
    }
}

fn axis_index(ctl: &ControlMap, a: Axis) -> usize {
    match a {
        Axis::Pg(g) => ctl.p_gens.iter().position(|&x| x == g).unwrap(),
        Axis::Vg(k) => ctl.v_offset() + ctl.v_buses.iter().position(|&x| x == k).unwrap(),
        Axis::Pinj(k) => ctl.pinj_offset() + ctl.inj_buses.iter().position(|&x| x == k).unwrap(),
        Axis::Qinj(k) => ctl.qinj_offset() + ctl.inj_buses.iter().position(|&x| x == k).unwrap(),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or(format!("range `{s}`: expected LO:HI"))?;
    let lo: f64 = a.parse().map_err(|_| format!("range `{s}`: bad number"))?;
    let hi: f64 = b.parse().map_err(|_| format!("range `{s}`: bad number"))?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("range `{s}`: need finite LO < HI"));
    }
    Ok((lo, hi))
}

pub fn grid_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn in_restriction(prob: &Restriction, u: &[f64], cfg: &FileConfig) -> bool {
    let mut prog = prob.program.clone();
    RestrictionProblem::fix_u(&mut prog, &prob.vars, u);
    solve(&prog, &cfg.run.solver).status == SolveStatus::Optimal
}

#[derive(Serialize)]
struct Counts {
    unsolvable: usize,
    infeasible: usize,
    feasible: usize,
    restriction: usize,
    /// Points inside the restriction that failed the independent check.
    unsound: usize,
}

#[derive(Serialize)]
struct SliceStats {
    wall_time: f64,
}

#[derive(Serialize)]
struct SliceDoc<'a> {
    schema: &'static str,
    case: &'a str,
    axes: &'a [String],
    x: Vec<f64>,
    y: Vec<f64>,
    base: &'a [f64],
    /// `cells[j][i]` classifies `(x[i], y[j])`.
    cells: Vec<Vec<Cell>>,
    counts: Counts,
    relaxed: Vec<String>,
    stats: SliceStats,
}

pub fn region_slice(args: SliceArgs, cfg: &FileConfig) -> Result<(), Failure> {
    let t0 = Instant::now();
    if args.axes.len() != 2 {
        usage_error("--axes takes exactly two controls");
    }
    if !args.range.is_empty() && args.range.len() != 2 {
        usage_error("--range takes exactly two intervals");
    }
    let net = load_case(&args.case)?;
    let axes: Vec<Axis> =
        args.axes.iter().map(|s| parse_axis(&net, s)).collect::<Result<_, _>>().unwrap_or_else(|e| usage_error(e));
    if axes[0] == axes[1] {
        usage_error("the two axes must differ");
    }
    let mut inj: Vec<usize> = vec![];
    for a in &axes {
        if let Axis::Pinj(k) | Axis::Qinj(k) = *a {
            if !inj.contains(&k) {
                inj.push(k);
            }
        }
    }
    let ctl = ControlMap::with_injections(&net, &inj);
    let idx = [axis_index(&ctl, axes[0]), axis_index(&ctl, axes[1])];
    let base_d = args.base.as_ref().map(|p| load_dispatch(&net, p)).transpose()?;
    let base = dispatch_u(&net, &ctl, base_d.as_ref());
    let ranges: Vec<(f64, f64)> = if args.range.is_empty() {
        let (lo, hi) = ctl.bounds(&net);
        idx.iter()
            .zip(&args.axes)
            .map(|(&i, name)| {
                if lo[i].is_finite() && hi[i].is_finite() && lo[i] < hi[i] {
                    (lo[i], hi[i])
                } else {
                    usage_error(format!("axis {name} has no finite limits, pass --range"))
                }
            })
            .collect()
    } else {
        args.range.iter().map(|s| parse_range(s)).collect::<Result<_, _>>().unwrap_or_else(|e| usage_error(e))
    };
    let n = args.grid as usize;
    let xs = grid_points(ranges[0].0, ranges[0].1, n);
    let ys = grid_points(ranges[1].0, ranges[1].1, n);

    let mats = NetworkMatrices::new(&net, &vec![0.0; net.n_line()]);
    let prob = if args.no_restriction {
        None
    } else {
        let op = solve_pf(&net, &mats, &ctl, &base, &flat_start(&mats.layout), PfOptions::default())
            .map_err(|e| Failure::PowerFlow(format!("base point: {e}")))?;
        Some(build_restriction(&net, &ctl, &op).map_err(|e| Failure::Solver(format!("restriction at base: {e}")))?)
    };

    let tol = cfg.run.feas_tol;
    let points: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect();
    let classified: Vec<(Cell, bool)> = points
        .par_iter()
        .map(|&(i, j)| {
            let mut u = base.clone();
            u[idx[0]] = xs[i];
            u[idx[1]] = ys[j];
            let cell = match solve_and_check(&net, &mats, &ctl, &u, &flat_start(&mats.layout), tol) {
                Err(_) => Cell::Unsolvable,
                Ok((_, rep)) if !rep.feasible => Cell::Infeasible,
                Ok(_) => Cell::Feasible,
            };
            let inside = prob.as_ref().is_some_and(|p| in_restriction(p, &u, cfg));
            match (cell, inside) {
                (Cell::Feasible, true) => (Cell::Restriction, false),
                (c, true) => (c, true),
                (c, false) => (c, false),
            }
        })
        .collect();
    let mut counts = Counts { unsolvable: 0, infeasible: 0, feasible: 0, restriction: 0, unsound: 0 };
    for &(c, bad) in &classified {
        match c {
            Cell::Unsolvable => counts.unsolvable += 1,
            Cell::Infeasible => counts.infeasible += 1,
            Cell::Feasible => counts.feasible += 1,
            Cell::Restriction => counts.restriction += 1,
        }
        counts.unsound += bad as usize;
    }
    let cells: Vec<Vec<Cell>> = classified.chunks(n).map(|row| row.iter().map(|c| c.0).collect()).collect();
    println!(
        "{} x {} grid: {} restriction, {} feasible, {} infeasible, {} unsolvable",
        n, n, counts.restriction, counts.feasible, counts.infeasible, counts.unsolvable
    );
    if counts.unsound > 0 {
        println!("warning: {} restriction points failed the power flow check", counts.unsound);
    }
    if let Some(out) = &args.out {
        let doc = SliceDoc {
            schema: SLICE_SCHEMA,
            case: &net.name,
            axes: &args.axes,
            x: xs,
            y: ys,
            base: &base,
            cells,
            counts,
            relaxed: prob.map(|p| p.relaxed).unwrap_or_default(),
            stats: SliceStats { wall_time: t0.elapsed().as_secs_f64() },
        };
        write_doc(out, &doc)?;
    }
    Ok(())
}
