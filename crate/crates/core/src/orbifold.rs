//! Flat 2-orbifolds presented as action groupoids `K ⋉ T²` for a finite
//! group `K` of affine maps of the torus, together with G-paths and the
//! fixed list of loops used to evaluate the homomorphism of periods.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::scalar::{Rational, SymScalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrbifoldError {
    #[error("group table: {0}")]
    NotAGroup(String),
    #[error("matrix {0:?} is not invertible over the integers")]
    NotUnimodular([[i64; 2]; 2]),
    #[error("action is not effective: elements {0} and {1} act identically")]
    NotEffective(usize, usize),
    #[error("G-path arrow {index} does not connect consecutive segments")]
    ArrowMismatch { index: usize },
    #[error("G-path needs one more segment than arrows, each segment nonempty")]
    MalformedPath,
    #[error("cannot concatenate: end of first path is not the start of the second")]
    EndpointMismatch,
    #[error("group element {0} out of range")]
    UnknownElement(usize),
    #[error("basepoint has nontrivial isotropy")]
    SingularBasepoint,
}

/// Reduces a rational into `[0, 1)`.
pub fn frac(r: &Rational) -> Rational {
    r - r.floor()
}

/// A point of the universal cover `R²` with exact coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lift {
    pub x: Rational,
    pub y: Rational,
}

impl Lift {
    pub fn new(x: Rational, y: Rational) -> Self {
        Lift { x, y }
    }

    pub fn from_ratios(x: (i64, i64), y: (i64, i64)) -> Self {
        Lift {
            x: Rational::new(BigInt::from(x.0), BigInt::from(x.1)),
            y: Rational::new(BigInt::from(y.0), BigInt::from(y.1)),
        }
    }

    pub fn to_torus(&self) -> TorusPoint {
        TorusPoint::new(self.x.clone(), self.y.clone())
    }

    pub fn sub(&self, other: &Lift) -> Lift {
        Lift::new(&self.x - &other.x, &self.y - &other.y)
    }

    pub fn add(&self, other: &Lift) -> Lift {
        Lift::new(&self.x + &other.x, &self.y + &other.y)
    }

    pub fn dot(&self, other: &Lift) -> Rational {
        &self.x * &other.x + &self.y * &other.y
    }

    pub fn norm2(&self) -> Rational {
        self.dot(self)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (
            crate::scalar::rational_to_f64(&self.x),
            crate::scalar::rational_to_f64(&self.y),
        )
    }
}

/// A point of `T² = R²/Z²` with exact coordinates in `[0,1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusPoint {
    pub theta: Rational,
    pub phi: Rational,
}

impl TorusPoint {
    pub fn new(theta: Rational, phi: Rational) -> Self {
        TorusPoint {
            theta: frac(&theta),
            phi: frac(&phi),
        }
    }

    pub fn from_ratios(theta: (i64, i64), phi: (i64, i64)) -> Self {
        Lift::from_ratios(theta, phi).to_torus()
    }

    pub fn lift(&self) -> Lift {
        Lift::new(self.theta.clone(), self.phi.clone())
    }

    pub fn to_numeric(&self) -> NumericPoint {
        let (theta, phi) = self.lift().to_f64();
        NumericPoint { theta, phi }
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.theta, self.phi)
    }
}

/// Floating-point torus point used by the numeric tracer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPoint {
    pub theta: f64,
    pub phi: f64,
}

impl NumericPoint {
    pub fn new(theta: f64, phi: f64) -> Self {
        NumericPoint {
            theta: theta.rem_euclid(1.0),
            phi: phi.rem_euclid(1.0),
        }
    }
}

/// Squared flat distance between two torus points.
pub fn torus_distance2(a: &TorusPoint, b: &TorusPoint) -> Rational {
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let wrap = |d: Rational| {
        let d = frac(&(d + &half)) - &half;
        &d * &d
    };
    wrap(&a.theta - &b.theta) + wrap(&a.phi - &b.phi)
}

/// Squared distance from `c` to the straight segment `p→q` in the plane.
pub fn segment_distance2(p: &Lift, q: &Lift, c: &Lift) -> Rational {
    let d = q.sub(p);
    let len2 = d.norm2();
    if len2.is_zero() {
        return c.sub(p).norm2();
    }
    let mut t = c.sub(p).dot(&d) / &len2;
    if t.is_negative() {
        t = Rational::zero();
    } else if t > Rational::one() {
        t = Rational::one();
    }
    let foot = Lift::new(&p.x + &t * &d.x, &p.y + &t * &d.y);
    c.sub(&foot).norm2()
}

/// Squared distance from a torus point to a segment given by lifts.
pub fn torus_segment_distance2(p: &Lift, q: &Lift, c: &TorusPoint) -> Rational {
    let lo_x = p.x.clone().min(q.x.clone()).floor().to_integer();
    let hi_x = p.x.clone().max(q.x.clone()).ceil().to_integer();
    let lo_y = p.y.clone().min(q.y.clone()).floor().to_integer();
    let hi_y = p.y.clone().max(q.y.clone()).ceil().to_integer();
    let mut best: Option<Rational> = None;
    let mut nx: BigInt = lo_x - BigInt::one();
    while nx <= hi_x {
        let mut ny: BigInt = lo_y.clone() - BigInt::one();
        while ny <= hi_y {
            let shifted = Lift::new(
                &c.theta + Rational::from_integer(nx.clone()),
                &c.phi + Rational::from_integer(ny.clone()),
            );
            let d = segment_distance2(p, q, &shifted);
            if best.as_ref().is_none_or(|b| d < *b) {
                best = Some(d);
            }
            ny += BigInt::one();
        }
        nx += BigInt::one();
    }
    best.expect("nonempty search box")
}

/// Affine torus map `x ↦ A·x + b mod 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affine {
    pub matrix: [[i64; 2]; 2],
    /// Offset reduced into `[0,1)²`.
    pub offset: [Rational; 2],
}

impl Affine {
    pub fn new(matrix: [[i64; 2]; 2], offset: [Rational; 2]) -> Self {
        Affine {
            matrix,
            offset: [frac(&offset[0]), frac(&offset[1])],
        }
    }

    pub fn identity() -> Self {
        Affine::new([[1, 0], [0, 1]], [Rational::zero(), Rational::zero()])
    }

    pub fn det(&self) -> i64 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn is_identity(&self) -> bool {
        *self == Affine::identity()
    }

    /// Whether `A` preserves the flat metric (`AᵀA = I`).
    pub fn is_isometry(&self) -> bool {
        let m = self.matrix;
        m[0][0] * m[0][0] + m[1][0] * m[1][0] == 1
            && m[0][1] * m[0][1] + m[1][1] * m[1][1] == 1
            && m[0][0] * m[0][1] + m[1][0] * m[1][1] == 0
    }

    /// Sum of absolute matrix entries, an upper bound for the operator norm.
    pub fn norm_bound(&self) -> i64 {
        self.matrix.iter().flatten().map(|v| v.abs()).sum()
    }

    pub fn apply_linear(&self, v: &Lift) -> Lift {
        let m = self.matrix;
        let r = |a: i64| Rational::from_integer(BigInt::from(a));
        Lift::new(
            r(m[0][0]) * &v.x + r(m[0][1]) * &v.y,
            r(m[1][0]) * &v.x + r(m[1][1]) * &v.y,
        )
    }

    /// Image of a lift, without reducing mod 1.
    pub fn apply_lift(&self, v: &Lift) -> Lift {
        let l = self.apply_linear(v);
        Lift::new(l.x + &self.offset[0], l.y + &self.offset[1])
    }

    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        self.apply_lift(&p.lift()).to_torus()
    }

    pub fn apply_numeric(&self, p: NumericPoint) -> NumericPoint {
        let m = self.matrix;
        let b = [
            crate::scalar::rational_to_f64(&self.offset[0]),
            crate::scalar::rational_to_f64(&self.offset[1]),
        ];
        NumericPoint::new(
            m[0][0] as f64 * p.theta + m[0][1] as f64 * p.phi + b[0],
            m[1][0] as f64 * p.theta + m[1][1] as f64 * p.phi + b[1],
        )
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Affine) -> Affine {
        let a = self.matrix;
        let b = other.matrix;
        let mut m = [[0i64; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let shifted = self.apply_lift(&Lift::new(other.offset[0].clone(), other.offset[1].clone()));
        Affine::new(m, [shifted.x, shifted.y])
    }

    /// Isolated fixed points on the torus (empty when `A − I` is singular).
    pub fn isolated_fixed_points(&self) -> Vec<TorusPoint> {
        let m = self.matrix;
        let n = [[m[0][0] - 1, m[0][1]], [m[1][0], m[1][1] - 1]];
        let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
        if det == 0 {
            return Vec::new();
        }
        // x = N⁻¹(k − b) for integer k with x ∈ [0,1)²; k ranges over N·[0,1)² + b.
        let bound = |row: [i64; 2]| {
            let lo = row[0].min(0) + row[1].min(0) - 1;
            let hi = row[0].max(0) + row[1].max(0) + 1;
            (lo, hi)
        };
        let (lx, hx) = bound(n[0]);
        let (ly, hy) = bound(n[1]);
        let r = |v: i64| Rational::from_integer(BigInt::from(v));
        let d = r(det);
        let mut out = Vec::new();
        for kx in lx..=hx {
            for ky in ly..=hy {
                let vx = r(kx) - &self.offset[0];
                let vy = r(ky) - &self.offset[1];
                let x = (r(n[1][1]) * &vx - r(n[0][1]) * &vy) / &d;
                let y = (r(n[0][0]) * &vy - r(n[1][0]) * &vx) / &d;
                let in_unit = |c: &Rational| !c.is_negative() && *c < Rational::one();
                if in_unit(&x) && in_unit(&y) {
                    let p = TorusPoint::new(x, y);
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        out.sort();
        out
    }
}

/// A finite group of affine torus maps; the identity sits at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAction {
    elements: Vec<Affine>,
    inverse: Vec<usize>,
}

impl GroupAction {
    pub fn new(elements: Vec<Affine>) -> Result<Self, OrbifoldError> {
        if elements.first().is_none_or(|e| !e.is_identity()) {
            return Err(OrbifoldError::NotAGroup("identity must come first".into()));
        }
        for e in &elements {
            if e.det().abs() != 1 {
                return Err(OrbifoldError::NotUnimodular(e.matrix));
            }
        }
        for i in 0..elements.len() {
            for j in (i + 1)..elements.len() {
                if elements[i] == elements[j] {
                    return Err(OrbifoldError::NotEffective(i, j));
                }
            }
        }
        let find = |g: &Affine| elements.iter().position(|e| e == g);
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate() {
                if find(&a.compose(b)).is_none() {
                    return Err(OrbifoldError::NotAGroup(format!(
                        "product of elements {i} and {j} is not in the table"
                    )));
                }
            }
        }
        let inverse = elements
            .iter()
            .map(|a| {
                elements
                    .iter()
                    .position(|b| a.compose(b).is_identity())
                    .ok_or_else(|| OrbifoldError::NotAGroup("missing inverse".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GroupAction { elements, inverse })
    }

    pub fn trivial() -> Self {
        GroupAction::new(vec![Affine::identity()]).expect("trivial group")
    }

    /// `{I, −I}`: the π-rotation whose quotient is the pillowcase.
    pub fn pillowcase() -> Self {
        GroupAction::new(vec![
            Affine::identity(),
            Affine::new([[-1, 0], [0, -1]], [Rational::zero(), Rational::zero()]),
        ])
        .expect("pillowcase group")
    }

    /// `(θ, φ) ↦ (θ + 1/2, φ)`, a free Z₂ action.
    pub fn half_shift() -> Self {
        GroupAction::new(vec![
            Affine::identity(),
            Affine::new(
                [[1, 0], [0, 1]],
                [Rational::new(BigInt::one(), BigInt::from(2)), Rational::zero()],
            ),
        ])
        .expect("shift group")
    }

    pub fn elements(&self) -> &[Affine] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, i: usize) -> Result<&Affine, OrbifoldError> {
        self.elements.get(i).ok_or(OrbifoldError::UnknownElement(i))
    }

    pub fn inverse_of(&self, i: usize) -> usize {
        self.inverse[i]
    }
}

/// A compact 2-orbifold `T²/K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbifoldPresentation {
    pub name: String,
    pub action: GroupAction,
    pub basepoint: TorusPoint,
}

impl OrbifoldPresentation {
    pub fn new(name: &str, action: GroupAction) -> Self {
        OrbifoldPresentation {
            name: name.to_string(),
            action,
            basepoint: default_basepoint(),
        }
    }

    pub fn with_basepoint(mut self, basepoint: TorusPoint) -> Result<Self, OrbifoldError> {
        if self.isotropy_order(&basepoint) != 1 {
            return Err(OrbifoldError::SingularBasepoint);
        }
        self.basepoint = basepoint;
        Ok(self)
    }

    pub fn torus() -> Self {
        Self::new("torus", GroupAction::trivial())
    }

    pub fn pillowcase() -> Self {
        Self::new("pillowcase", GroupAction::pillowcase())
    }

    /// `{ g·x : g ∈ K }`, deduplicated and sorted.
    pub fn orbit(&self, x: &TorusPoint) -> Vec<TorusPoint> {
        let mut out: Vec<TorusPoint> = self.action.elements.iter().map(|g| g.apply(x)).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn isotropy_order(&self, x: &TorusPoint) -> usize {
        self.action
            .elements
            .iter()
            .filter(|g| g.apply(x) == *x)
            .count()
    }

    /// Isolated points with nontrivial isotropy.
    pub fn singular_points(&self) -> Vec<TorusPoint> {
        let mut out: Vec<TorusPoint> = self
            .action
            .elements
            .iter()
            .skip(1)
            .flat_map(|g| g.isolated_fixed_points())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Whether a disk's orbit copies are pairwise disjoint, which also keeps
    /// every orbifold-singular point out of it.
    pub fn disk_is_regular(&self, center: &TorusPoint, radius: &Rational) -> bool {
        self.action.elements.iter().skip(1).all(|g| {
            let reach = radius * Rational::from_integer(BigInt::from(1 + g.norm_bound()));
            torus_distance2(center, &g.apply(center)) > &reach * &reach
        })
    }

    /// Loops generating `Π₁^orb` through `1 → Π₁(T²) → Π₁^orb → K → 1`:
    /// the θ-loop `a`, the φ-loop `b`, and one `(σ, k)` per `k ≠ 1`.
    pub fn fundamental_generators(&self) -> Vec<GLoop> {
        let x0 = self.basepoint.lift();
        let one = Rational::one();
        let zero = Rational::zero();
        let mut loops = vec![
            GLoop {
                id: "a".into(),
                path: GPath::segment(x0.clone(), x0.add(&Lift::new(one.clone(), zero.clone()))),
            },
            GLoop {
                id: "b".into(),
                path: GPath::segment(x0.clone(), x0.add(&Lift::new(zero, one))),
            },
        ];
        for k in 1..self.action.order() {
            let back = self.action.elements[self.action.inverse[k]].apply(&self.basepoint);
            let path = GPath {
                segments: vec![vec![x0.clone(), back.lift()], vec![x0.clone()]],
                arrows: vec![k],
            };
            debug_assert!(path.validate(&self.action).is_ok());
            loops.push(GLoop {
                id: format!("k{k}"),
                path,
            });
        }
        loops
    }
}

pub fn default_basepoint() -> TorusPoint {
    TorusPoint::from_ratios((1, 8), (1, 8))
}

/// `σ_n g_n σ_{n−1} ⋯ g_1 σ_0`: piecewise-linear segments given by lifted
/// waypoints, joined by group elements (indices into the action).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GPath {
    pub segments: Vec<Vec<Lift>>,
    pub arrows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GLoop {
    pub id: String,
    pub path: GPath,
}

impl GPath {
    pub fn new(
        segments: Vec<Vec<Lift>>,
        arrows: Vec<usize>,
        action: &GroupAction,
    ) -> Result<Self, OrbifoldError> {
        let p = GPath { segments, arrows };
        p.validate(action)?;
        Ok(p)
    }

    pub fn constant(x: Lift) -> Self {
        GPath {
            segments: vec![vec![x]],
            arrows: Vec::new(),
        }
    }

    pub fn segment(from: Lift, to: Lift) -> Self {
        GPath {
            segments: vec![vec![from, to]],
            arrows: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.arrows.len()
    }

    pub fn start(&self) -> &Lift {
        &self.segments[0][0]
    }

    pub fn end(&self) -> &Lift {
        self.segments
            .last()
            .and_then(|s| s.last())
            .expect("validated path is nonempty")
    }

    pub fn validate(&self, action: &GroupAction) -> Result<(), OrbifoldError> {
        if self.segments.len() != self.arrows.len() + 1 || self.segments.iter().any(|s| s.is_empty())
        {
            return Err(OrbifoldError::MalformedPath);
        }
        for (j, &g) in self.arrows.iter().enumerate() {
            let g = action.element(g)?;
            let from = self.segments[j].last().expect("nonempty").to_torus();
            let to = self.segments[j + 1][0].to_torus();
            if g.apply(&from) != to {
                return Err(OrbifoldError::ArrowMismatch { index: j + 1 });
            }
        }
        Ok(())
    }

    pub fn is_loop(&self) -> bool {
        self.start().to_torus() == self.end().to_torus()
    }

    /// `self` followed by `next`, joined by the unit arrow at the junction.
    pub fn concat(&self, next: &GPath) -> Result<GPath, OrbifoldError> {
        if self.end().to_torus() != next.start().to_torus() {
            return Err(OrbifoldError::EndpointMismatch);
        }
        let mut segments = self.segments.clone();
        segments.extend(next.segments.iter().cloned());
        let mut arrows = self.arrows.clone();
        arrows.push(0);
        arrows.extend(next.arrows.iter().copied());
        Ok(GPath { segments, arrows })
    }

    pub fn inverse(&self, action: &GroupAction) -> GPath {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| s.iter().rev().cloned().collect())
            .collect();
        let arrows = self.arrows.iter().rev().map(|&g| action.inverse_of(g)).collect();
        GPath { segments, arrows }
    }

    /// Consecutive waypoint pairs of every segment.
    pub fn pieces(&self) -> impl Iterator<Item = (&Lift, &Lift)> {
        self.segments
            .iter()
            .flat_map(|s| s.windows(2).map(|w| (&w[0], &w[1])))
    }
}

/// The G-path integral `Σ_k ∫_{σ_k} ω`.
pub fn g_path_integral(
    form: &crate::forms::ClosedForm,
    orbifold: &OrbifoldPresentation,
    path: &GPath,
) -> Result<SymScalar, crate::forms::FormError> {
    form.integrate(orbifold, path)
}
