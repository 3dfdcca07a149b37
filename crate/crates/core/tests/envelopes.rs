use convexpath::envelopes::{
    bilinear_envelope, bound_over_polytope, extreme_over_box, trig_envelopes, Affine, BusEnvelope, Coord,
    LineEnvelope, LocalForm,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 10_000;
const TOL: f64 = 1e-9;

/// A random line neighbourhood: base point, limits and one point inside them.
struct Draw {
    env: LineEnvelope<f64>,
    lo: [f64; 3],
    hi: [f64; 3],
    z: [f64; 3],
}

fn draw(rng: &mut ChaCha8Rng) -> Draw {
    let range = |rng: &mut ChaCha8Rng| {
        let lo = rng.gen_range(0.85..1.0);
        (lo, rng.gen_range(lo + 0.01..1.15))
    };
    let (vf_r, vt_r) = (range(rng), range(rng));
    let (f_pq, t_pq) = (rng.gen_bool(0.6), rng.gen_bool(0.6));
    let vf0 = rng.gen_range(vf_r.0..=vf_r.1);
    let vt0 = rng.gen_range(vt_r.0..=vt_r.1);
    let amax = rng.gen_range(0.05..1.0);
    let phi_r = (-amax, amax);
    let phi0 = rng.gen_range(-0.8 * amax..0.8 * amax);
    let env = LineEnvelope::new(vf0, vt0, phi0, f_pq, t_pq, vf_r, vt_r, phi_r);
    // a sub-box of the limits containing the base point
    let sub = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let a = rng.gen_range(lo..=0.0);
        let b = rng.gen_range(0.0..=hi);
        (a, b)
    };
    let f = if f_pq { sub(rng, vf_r.0 - vf0, vf_r.1 - vf0) } else { (0.0, 0.0) };
    let t = if t_pq { sub(rng, vt_r.0 - vt0, vt_r.1 - vt0) } else { (0.0, 0.0) };
    let p = sub(rng, phi_r.0 - phi0, phi_r.1 - phi0);
    let lo = [f.0, t.0, p.0];
    let hi = [f.1, t.1, p.1];
    let z = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1]), rng.gen_range(lo[2]..=hi[2])];
    Draw { env, lo, hi, z }
}

fn check_sandwich(name: &str, over: &LocalForm<f64>, under: &LocalForm<f64>, g: f64, z: [f64; 3]) {
    let (o, u) = (over.eval(z), under.eval(z));
    assert!(o >= g - TOL, "{name}: over {o} < exact {g} at {z:?}");
    assert!(u <= g + TOL, "{name}: under {u} > exact {g} at {z:?}");
}

#[test]
fn bilinear_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..N {
        let (x0, y0) = (rng.gen_range(0.8..1.2), rng.gen_range(0.8..1.2));
        let (x, y) = (rng.gen_range(0.8..1.2), rng.gen_range(0.8..1.2));
        let e = bilinear_envelope(x0, y0);
        assert!(e.over(x, y) >= x * y - TOL);
        assert!(e.under(x, y) <= x * y + TOL);
    }
}

#[test]
fn trig_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..N {
        let a_min: f64 = -rng.gen_range(0.0..1.5);
        let a_max: f64 = rng.gen_range(0.0..1.5);
        let e = trig_envelopes(a_min, a_max);
        let p: f64 = rng.gen_range(a_min..=a_max);
        assert!(e.sin_under(p) <= p.sin() + TOL, "sin under at {p} on [{a_min}, {a_max}]");
        assert!(e.sin_over(p) >= p.sin() - TOL, "sin over at {p} on [{a_min}, {a_max}]");
        assert!(e.cos_under(p) <= p.cos() + TOL);
        assert!(e.cos_over(p) >= p.cos() - TOL);
        assert!((p.sin() - p).abs() <= e.rho() * p * p + TOL);
    }
}

#[test]
fn line_forms_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..N {
        let d = draw(&mut rng);
        let (gc, gs) = d.env.g_exact(d.z);
        check_sandwich("gc", &d.env.gc_over(), &d.env.gc_under(), gc, d.z);
        check_sandwich("gs", &d.env.gs_over(), &d.env.gs_under(), gs, d.z);
    }
}

#[test]
fn bus_forms_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..N {
        let e = BusEnvelope { v0: rng.gen_range(0.9..1.1), pq: rng.gen_bool(0.5) };
        let d = rng.gen_range(-0.2..0.2);
        let z = [d, 0.0, 0.0];
        check_sandwich("gq", &e.gq_over(), &e.gq_under(), e.g_exact(d), z);
    }
}

#[test]
fn forms_have_the_right_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let d = draw(&mut rng);
        assert!(d.env.gc_over().is_convex() && d.env.gc_under().is_concave());
        assert!(d.env.gs_over().is_convex() && d.env.gs_under().is_concave());
    }
}

/// Numeric box bounds dominate every sampled residual inside the box.
#[test]
fn box_extremes_bound_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..N {
        let d = draw(&mut rng);
        let (gc, gs) = d.env.g_exact(d.z);
        let cases = [(d.env.gc_over(), d.env.gc_under(), gc), (d.env.gs_over(), d.env.gs_under(), gs)];
        for (over, under, g) in cases {
            let hi = extreme_over_box(&over, d.lo, d.hi, true);
            let lo = extreme_over_box(&under, d.lo, d.hi, false);
            assert!(hi >= g - TOL, "box max {hi} < {g}");
            assert!(lo <= g + TOL, "box min {lo} > {g}");
        }
    }
}

/// The per-vertex forms, evaluated with the box limits as decision
/// variables, dominate the residual anywhere in the box.
#[test]
fn polytope_forms_bound_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..N {
        let d = draw(&mut rng);
        // decision variables: z = (lo_f, lo_t, lo_φ, hi_f, hi_t, hi_φ)
        let coords: [Coord<f64>; 3] = std::array::from_fn(|k| {
            if d.lo[k] == d.hi[k] {
                Coord::Fixed(Affine::constant(d.lo[k]))
            } else {
                Coord::Interval { lo: Affine::var(k), hi: Affine::var(3 + k) }
            }
        });
        let zvars = [d.lo[0], d.lo[1], d.lo[2], d.hi[0], d.hi[1], d.hi[2]];
        let (gc, gs) = d.env.g_exact(d.z);
        for (over, under, g) in [(d.env.gc_over(), d.env.gc_under(), gc), (d.env.gs_over(), d.env.gs_under(), gs)] {
            let top = bound_over_polytope(&over, &coords).iter().map(|f| f.eval(&zvars)).fold(f64::MIN, f64::max);
            let bot = bound_over_polytope(&under, &coords).iter().map(|f| f.eval(&zvars)).fold(f64::MAX, f64::min);
            assert!(top >= g - TOL, "polytope max {top} < {g}");
            assert!(bot <= g + TOL, "polytope min {bot} > {g}");
        }
    }
}

#[test]
fn bus_polytope_forms_bound_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..N {
        let e = BusEnvelope { v0: rng.gen_range(0.9..1.1), pq: true };
        let (a, b) = (rng.gen_range(-0.2..0.0), rng.gen_range(0.0..0.2));
        let d = rng.gen_range(a..=b);
        let coords = [
            Coord::Interval { lo: Affine::var(0), hi: Affine::var(1) },
            Coord::Fixed(Affine::constant(0.0)),
            Coord::Fixed(Affine::constant(0.0)),
        ];
        let g = e.g_exact(d);
        let top = bound_over_polytope(&e.gq_over(), &coords).iter().map(|f| f.eval(&[a, b])).fold(f64::MIN, f64::max);
        let bot = bound_over_polytope(&e.gq_under(), &coords).iter().map(|f| f.eval(&[a, b])).fold(f64::MAX, f64::min);
        assert!(top >= g - TOL && bot <= g + TOL);
    }
}

proptest! {
    #[test]
    fn bilinear_tight_on_axes(x0 in 0.5f64..1.5, y0 in 0.5f64..1.5, t in -0.3f64..0.3) {
        let e = bilinear_envelope(x0, y0);
        // the over-estimator is exact where x − x₀ = y − y₀, the under-estimator where they are opposite
        let (x, y) = (x0 + t, y0 + t);
        prop_assert!((e.over(x, y) - x * y).abs() < 1e-12);
        let (x, y) = (x0 + t, y0 - t);
        prop_assert!((e.under(x, y) - x * y).abs() < 1e-12);
    }

    #[test]
    fn line_forms_exact_at_base(vf in 0.9f64..1.1, vt in 0.9f64..1.1, phi0 in -0.5f64..0.5) {
        let env = LineEnvelope::new(vf, vt, phi0, true, true, (0.9, 1.1), (0.9, 1.1), (-1.0, 1.0));
        let (gc, gs) = env.g_exact([0.0; 3]);
        for f in [env.gc_over(), env.gc_under()] {
            prop_assert!((f.eval([0.0; 3]) - gc).abs() < 1e-12);
        }
        for f in [env.gs_over(), env.gs_under()] {
            prop_assert!((f.eval([0.0; 3]) - gs).abs() < 1e-12);
        }
    }
}
