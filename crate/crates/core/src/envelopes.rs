//! Concave envelopes of the basis-function residuals and their extreme values
//! over the self-mapping box.
//!
//! For a line with base voltages `v_f0, v_t0` and base angle difference `φ_0`
//! the residuals are written in local coordinates `z = (Δf, Δt, φ̃)` with
//! `Δf = v_f − v_f0`, `Δt = v_t − v_t0` and `φ̃ = φ − φ_0`. Every bound is a
//! [`LocalForm`]: a constant, a linear part and a weighted sum of squares of
//! linear combinations of `z`. Positive weights give convex over-estimators,
//! negative weights concave under-estimators, so the extreme value over a box
//! is attained at a vertex.

pub use crate::conic::Affine;
use crate::scalar::Scalar;

/// `over(x,y) = ¼((x−x₀)+(y−y₀))² + x₀y + xy₀ − x₀y₀`, `under` with the minus square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bilinear<T> {
    pub x0: T,
    pub y0: T,
}

pub fn bilinear_envelope<T: Scalar>(x0: T, y0: T) -> Bilinear<T> {
    Bilinear { x0, y0 }
}

impl<T: Scalar> Bilinear<T> {
    fn lin(&self, x: T, y: T) -> T {
        self.x0 * y + x * self.y0 - self.x0 * self.y0
    }

    pub fn over(&self, x: T, y: T) -> T {
        let s = (x - self.x0) + (y - self.y0);
        T::lit(0.25) * s * s + self.lin(x, y)
    }

    pub fn under(&self, x: T, y: T) -> T {
        let d = (x - self.x0) - (y - self.y0);
        -T::lit(0.25) * d * d + self.lin(x, y)
    }
}

/// Sine and cosine envelopes on `φ̃ ∈ [a_min, a_max]` with `a_min ≤ 0 ≤ a_max`.
///
/// `sin φ̃ ≥ φ̃ + k_lo φ̃²` and `sin φ̃ ≤ φ̃ + k_hi φ̃²`, `1 − φ̃²/2 ≤ cos φ̃ ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigEnvelope<T> {
    pub a_min: T,
    pub a_max: T,
    pub k_lo: T,
    pub k_hi: T,
}

/// `(sin a − a)/a²`; the limit at zero is the plain linear envelope.
fn sine_coefficient<T: Scalar>(a: T) -> T {
    if a == T::zero() {
        T::zero()
    } else {
        (a.sin() - a) / (a * a)
    }
}

pub fn trig_envelopes<T: Scalar>(a_min: T, a_max: T) -> TrigEnvelope<T> {
    debug_assert!(a_min <= T::zero() && a_max >= T::zero());
    TrigEnvelope { a_min, a_max, k_lo: sine_coefficient(a_max), k_hi: sine_coefficient(a_min) }
}

impl<T: Scalar> TrigEnvelope<T> {
    pub fn sin_under(&self, p: T) -> T {
        p + self.k_lo * p * p
    }

    pub fn sin_over(&self, p: T) -> T {
        p + self.k_hi * p * p
    }

    pub fn cos_under(&self, p: T) -> T {
        T::one() - T::lit(0.5) * p * p
    }

    pub fn cos_over(&self, _p: T) -> T {
        T::one()
    }

    /// Bound on `|sin φ̃ − φ̃| / φ̃²` over the interval.
    pub fn rho(&self) -> T {
        self.k_hi.max(-self.k_lo)
    }
}

/// `c + lᵀz + Σ wᵢ (aᵢᵀz)²` in local coordinates `z ∈ R³`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalForm<T> {
    pub c: T,
    pub lin: [T; 3],
    pub squares: Vec<(T, [T; 3])>,
}

impl<T: Scalar> LocalForm<T> {
    pub fn eval(&self, z: [T; 3]) -> T {
        let d = |a: &[T; 3]| a[0] * z[0] + a[1] * z[1] + a[2] * z[2];
        self.squares.iter().fold(self.c + d(&self.lin), |s, (w, a)| {
            let r = d(a);
            s + *w * r * r
        })
    }

    /// Coordinates the form actually depends on.
    pub fn uses(&self) -> [bool; 3] {
        let mut u = [false; 3];
        for i in 0..3 {
            u[i] = self.lin[i] != T::zero() || self.squares.iter().any(|(w, a)| *w != T::zero() && a[i] != T::zero());
        }
        u
    }

    pub fn is_convex(&self) -> bool {
        self.squares.iter().all(|(w, _)| *w >= T::zero())
    }

    pub fn is_concave(&self) -> bool {
        self.squares.iter().all(|(w, _)| *w <= T::zero())
    }
}

/// Constants describing one line around the base point.
#[derive(Debug, Clone, PartialEq)]
pub struct LineEnvelope<T> {
    pub vf0: T,
    pub vt0: T,
    pub phi0: T,
    /// Whether each endpoint voltage is a state (PQ bus).
    pub f_pq: bool,
    pub t_pq: bool,
    pub trig: TrigEnvelope<T>,
    /// Largest possible `|Δf|`, `|Δt|` under the voltage limits.
    pub dmax_f: T,
    pub dmax_t: T,
    /// Upper limits of the endpoint voltages.
    pub vf_max: T,
    pub vt_max: T,
    /// Largest possible `|v_f v_t − v_f0 v_t0|`.
    pub w_dev: T,
}

impl<T: Scalar> LineEnvelope<T> {
    /// `φ_min, φ_max` are the angle limits; the voltage ranges are the bus limits.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        vf0: T,
        vt0: T,
        phi0: T,
        f_pq: bool,
        t_pq: bool,
        vf_range: (T, T),
        vt_range: (T, T),
        phi_range: (T, T),
    ) -> Self {
        let lo = (phi_range.0 - phi0).min(T::zero());
        let hi = (phi_range.1 - phi0).max(T::zero());
        let dmax = |v0: T, r: (T, T)| (r.1 - v0).max(v0 - r.0).max(T::zero());
        let w0 = vf0 * vt0;
        let w_dev = (vf_range.1 * vt_range.1 - w0).max(w0 - vf_range.0 * vt_range.0).max(T::zero());
        LineEnvelope {
            vf0,
            vt0,
            phi0,
            f_pq,
            t_pq,
            trig: trig_envelopes(lo, hi),
            dmax_f: dmax(vf0, vf_range),
            dmax_t: dmax(vt0, vt_range),
            vf_max: vf_range.1,
            vt_max: vt_range.1,
            w_dev,
        }
    }

    fn w0(&self) -> T {
        self.vf0 * self.vt0
    }

    fn c_linear(&self) -> (T, [T; 3]) {
        let w0 = self.w0();
        let (f, t) = (self.f_pq, self.t_pq);
        let mut c = w0;
        let mut lin = [self.vt0, self.vf0, T::zero()];
        if f {
            c -= w0;
            lin[0] = T::zero();
        }
        if t {
            c -= w0;
            lin[1] = T::zero();
        }
        (c, lin)
    }

    /// Over-estimator of `g^C = v_f v_t cos φ̃ − [f∈PQ] v_t0 v_f − [t∈PQ] v_f0 v_t`.
    pub fn gc_over(&self) -> LocalForm<T> {
        let (c, lin) = self.c_linear();
        let one = T::one();
        LocalForm { c, lin, squares: vec![(T::lit(0.25), [one, one, T::zero()])] }
    }

    pub fn gc_under(&self) -> LocalForm<T> {
        let (c, lin) = self.c_linear();
        let one = T::one();
        LocalForm {
            c,
            lin,
            squares: vec![
                (-T::lit(0.25), [one, -one, T::zero()]),
                (-T::lit(0.5) * self.vf_max * self.vt_max, [T::zero(), T::zero(), one]),
            ],
        }
    }

    /// The trilinear remainder `Δf Δt φ̃` is bounded through the endpoint with
    /// the smaller voltage excursion.
    fn trilinear(&self) -> (T, [T; 3]) {
        let one = T::one();
        if self.dmax_f <= self.dmax_t {
            (T::lit(0.5) * self.dmax_f, [T::zero(), one, T::zero()])
        } else {
            (T::lit(0.5) * self.dmax_t, [one, T::zero(), T::zero()])
        }
    }

    /// Over-estimator of `g^S = v_f v_t sin φ̃ − v_f0 v_t0 (φ̃ + φ_0)`.
    pub fn gs_over(&self) -> LocalForm<T> {
        let w0 = self.w0();
        let (h, a) = self.trilinear();
        let one = T::one();
        LocalForm {
            c: -w0 * self.phi0,
            lin: [T::zero(); 3],
            squares: vec![
                (w0 * self.trig.k_hi + self.w_dev * self.trig.rho() + h, [T::zero(), T::zero(), one]),
                (T::lit(0.25), [self.vt0, self.vf0, one]),
                (h, a),
            ],
        }
    }

    pub fn gs_under(&self) -> LocalForm<T> {
        let w0 = self.w0();
        let (h, a) = self.trilinear();
        let one = T::one();
        LocalForm {
            c: -w0 * self.phi0,
            lin: [T::zero(); 3],
            squares: vec![
                (w0 * self.trig.k_lo - self.w_dev * self.trig.rho() - h, [T::zero(), T::zero(), one]),
                (-T::lit(0.25), [self.vt0, self.vf0, -one]),
                (-h, a),
            ],
        }
    }

    /// Exact residuals at local coordinates, for checks.
    pub fn g_exact(&self, z: [T; 3]) -> (T, T) {
        let vf = self.vf0 + z[0];
        let vt = self.vt0 + z[1];
        let w = vf * vt;
        let mut gc = w * z[2].cos();
        if self.f_pq {
            gc -= self.vt0 * vf;
        }
        if self.t_pq {
            gc -= self.vf0 * vt;
        }
        let gs = w * z[2].sin() - self.w0() * (z[2] + self.phi0);
        (gc, gs)
    }
}

/// Residual bounds for `ψQ = v²` at one bus, in the local coordinate `Δ = v − v0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BusEnvelope<T> {
    pub v0: T,
    pub pq: bool,
}

impl<T: Scalar> BusEnvelope<T> {
    fn form(c: T, lin: T, w: T) -> LocalForm<T> {
        let z = T::zero();
        let sq = if w != z { vec![(w, [T::one(), z, z])] } else { vec![] };
        LocalForm { c, lin: [lin, z, z], squares: sq }
    }

    /// PQ: `g = v² − 2v0 v = Δ² − v0²`; generator bus: `g = v²`.
    pub fn gq_over(&self) -> LocalForm<T> {
        let v0 = self.v0;
        if self.pq {
            Self::form(-v0 * v0, T::zero(), T::one())
        } else {
            Self::form(v0 * v0, T::lit(2.0) * v0, T::one())
        }
    }

    pub fn gq_under(&self) -> LocalForm<T> {
        let v0 = self.v0;
        if self.pq {
            Self::form(-v0 * v0, T::zero(), T::zero())
        } else {
            Self::form(v0 * v0, T::lit(2.0) * v0, T::zero())
        }
    }

    pub fn g_exact(&self, d: T) -> T {
        let v = self.v0 + d;
        if self.pq {
            v * v - T::lit(2.0) * self.v0 * v
        } else {
            v * v
        }
    }
}

/// `constant + linear + Σ wᵢ (affᵢ)²` over decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaresForm<T> {
    pub linear: Affine<T>,
    pub squares: Vec<(T, Affine<T>)>,
}

impl<T: Scalar> SquaresForm<T> {
    pub fn eval(&self, z: &[T]) -> T {
        self.squares.iter().fold(self.linear.eval(z), |s, (w, a)| {
            let r = a.eval(z);
            s + *w * r * r
        })
    }
}

impl<T: Scalar> LocalForm<T> {
    /// Substitutes local coordinates by affine expressions in the decision variables.
    pub fn substitute(&self, e: &[Affine<T>; 3]) -> SquaresForm<T> {
        let linear = Affine::combine(&self.lin, e).add(&Affine::constant(self.c));
        let squares = self
            .squares
            .iter()
            .filter(|(w, _)| *w != T::zero())
            .map(|(w, a)| (*w, Affine::combine(a, e)))
            .collect();
        SquaresForm { linear, squares }
    }
}

/// A box coordinate: either fixed by the controls or an interval given by `b`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coord<T> {
    Fixed(Affine<T>),
    Interval { lo: Affine<T>, hi: Affine<T> },
}

impl<T: Scalar> Coord<T> {
    fn choices(&self) -> Vec<&Affine<T>> {
        match self {
            Coord::Fixed(a) => vec![a],
            Coord::Interval { lo, hi } => vec![lo, hi],
        }
    }

    pub fn hi(&self) -> &Affine<T> {
        match self {
            Coord::Fixed(a) => a,
            Coord::Interval { hi, .. } => hi,
        }
    }

    pub fn lo(&self) -> &Affine<T> {
        match self {
            Coord::Fixed(a) => a,
            Coord::Interval { lo, .. } => lo,
        }
    }
}

/// Vertices of the local box, as affine expressions of the local coordinates,
/// restricted to the coordinates the form uses. `coords` are the local
/// coordinates (already shifted by the base values).
pub fn vertices<'a, T: Scalar>(form: &LocalForm<T>, coords: &'a [Coord<T>; 3]) -> Vec<[&'a Affine<T>; 3]> {
    let uses = form.uses();
    let mut out: Vec<[&Affine<T>; 3]> = vec![[coords[0].lo(), coords[1].lo(), coords[2].lo()]];
    for k in 0..3 {
        if !uses[k] {
            continue;
        }
        let ch = coords[k].choices();
        if ch.len() == 1 {
            continue;
        }
        let mut next = Vec::with_capacity(out.len() * 2);
        for v in &out {
            for c in &ch {
                let mut w = *v;
                w[k] = c;
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// One convex (or concave) form per vertex: the polytope bound must dominate
/// (or be dominated by) every one of them.
pub fn bound_over_polytope<T: Scalar>(form: &LocalForm<T>, coords: &[Coord<T>; 3]) -> Vec<SquaresForm<T>> {
    vertices(form, coords)
        .into_iter()
        .map(|v| form.substitute(&[v[0].clone(), v[1].clone(), v[2].clone()]))
        .collect()
}

/// Numeric polytope bound: max (or min) of the form over the box vertices.
pub fn extreme_over_box<T: Scalar>(form: &LocalForm<T>, lo: [T; 3], hi: [T; 3], maximize: bool) -> T {
    let mut best = if maximize { T::neg_infinity() } else { T::infinity() };
    for m in 0..8u32 {
        let z = [
            if m & 1 == 0 { lo[0] } else { hi[0] },
            if m & 2 == 0 { lo[1] } else { hi[1] },
            if m & 4 == 0 { lo[2] } else { hi[2] },
        ];
        let v = form.eval(z);
        best = if maximize { best.max(v) } else { best.min(v) };
    }
    best
}
