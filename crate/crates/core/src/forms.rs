//! Closed basic 1-forms on `T²/K`: a linear part `a dθ + b dφ`, exact bump
//! perturbations, and references to the surgery patches that carry zeros.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero as _};
use thiserror::Error;

use crate::orbifold::{
    torus_distance2, torus_segment_distance2, GPath, NumericPoint, OrbifoldError,
    OrbifoldPresentation, TorusPoint,
};
use crate::scalar::{q_rank, rational_to_f64, Rational, ScalarError, SymScalar, SymbolTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Orbifold(#[from] OrbifoldError),
    #[error("bump {index} dominates the linear part, so the form may acquire unlisted zeros")]
    BumpDominates { index: usize },
    #[error("bump {index} support overlaps its own orbit copies or another support")]
    BumpOverlap { index: usize },
    #[error("bump {index} has nonpositive radius")]
    BadRadius { index: usize },
    #[error("path crosses surgery patch {patch}")]
    CrossesPatch { patch: String },
    #[error("form is not basic for this action (set the override to proceed)")]
    NotBasic,
    #[error("the form vanishes identically")]
    Vanishes,
    #[error("no admissible amplitudes found after {attempts} attempts")]
    NoGenericAmplitudes { attempts: usize },
}

/// `amplitude · Σ_{c ∈ K·center} h(|x − c|)` with `h(r) = (1 − (r/R)²)⁴` on `r < R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpTerm {
    pub center: TorusPoint,
    pub radius: Rational,
    pub amplitude: SymScalar,
}

/// `max_r |h'(r)| · R = 8·(6/7)³/√7`.
pub fn bump_slope_bound(radius: &Rational) -> f64 {
    8.0 * (216.0 / 343.0) / 7f64.sqrt() / rational_to_f64(radius)
}

fn profile(d2: &Rational, r2: &Rational) -> Rational {
    if d2 >= r2 {
        return Rational::zero();
    }
    let s = Rational::one() - d2 / r2;
    let s2 = &s * &s;
    &s2 * &s2
}

impl BumpTerm {
    /// `h` summed over the orbit of the center, without the amplitude.
    pub fn shape_at(&self, orbifold: &OrbifoldPresentation, x: &TorusPoint) -> Rational {
        let r2 = &self.radius * &self.radius;
        orbifold
            .orbit(&self.center)
            .iter()
            .map(|c| profile(&torus_distance2(x, c), &r2))
            .fold(Rational::zero(), |a, b| a + b)
    }

    pub fn value_at(&self, orbifold: &OrbifoldPresentation, x: &TorusPoint) -> SymScalar {
        self.amplitude.scale(&self.shape_at(orbifold, x))
    }

    /// Numeric gradient of the bump (amplitude included).
    pub fn gradient(
        &self,
        orbifold: &OrbifoldPresentation,
        table: &SymbolTable,
        x: NumericPoint,
    ) -> (f64, f64) {
        let amp = self.amplitude.to_f64(table);
        let r = rational_to_f64(&self.radius);
        let r2 = r * r;
        let mut g = (0.0, 0.0);
        for c in orbifold.orbit(&self.center) {
            let c = c.to_numeric();
            let dx = wrap(x.theta - c.theta);
            let dy = wrap(x.phi - c.phi);
            let d2 = dx * dx + dy * dy;
            if d2 < r2 {
                let s = 1.0 - d2 / r2;
                let k = -8.0 / r2 * s * s * s;
                g.0 += amp * k * dx;
                g.1 += amp * k * dy;
            }
        }
        g
    }

    pub fn value_numeric(
        &self,
        orbifold: &OrbifoldPresentation,
        table: &SymbolTable,
        x: NumericPoint,
    ) -> f64 {
        let amp = self.amplitude.to_f64(table);
        let r = rational_to_f64(&self.radius);
        orbifold
            .orbit(&self.center)
            .iter()
            .map(|c| {
                let c = c.to_numeric();
                let dx = wrap(x.theta - c.theta);
                let dy = wrap(x.phi - c.phi);
                let s = 1.0 - (dx * dx + dy * dy) / (r * r);
                if s > 0.0 {
                    s.powi(4)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            * amp
    }
}

fn wrap(d: f64) -> f64 {
    d - d.round()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SurgeryKind {
    A,
    B,
    C,
}

impl fmt::Display for SurgeryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurgeryKind::A => "A",
            SurgeryKind::B => "B",
            SurgeryKind::C => "C",
        })
    }
}

/// A zero of Morse type together with its index data and level.
#[derive(Debug, Clone, PartialEq)]
pub struct Zero {
    pub id: String,
    pub host: String,
    pub index: u8,
    pub isotropy_order: usize,
    pub level: SymScalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disk {
    pub center: TorusPoint,
    pub radius: Rational,
}

/// Disk removed from one summand by a surgery.
#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryPatch {
    pub id: String,
    pub kind: SurgeryKind,
    pub disk: Option<Disk>,
}

/// Level shift `a·(bump around zero)`; flat near the zero, so it moves the
/// zero's level by `amplitude` and leaves every period unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchBump {
    pub zero: String,
    pub amplitude: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub linear: (SymScalar, SymScalar),
    pub bumps: Vec<BumpTerm>,
    pub patches: Vec<SurgeryPatch>,
    pub basic_override: bool,
}

impl ClosedForm {
    pub fn linear(a: SymScalar, b: SymScalar) -> Self {
        ClosedForm {
            linear: (a, b),
            bumps: Vec::new(),
            patches: Vec::new(),
            basic_override: false,
        }
    }

    pub fn with_override(mut self, on: bool) -> Self {
        self.basic_override = on;
        self
    }

    pub fn with_bump(mut self, bump: BumpTerm) -> Self {
        self.bumps.push(bump);
        self
    }

    /// `c·ω`.
    pub fn scaled(&self, c: &Rational) -> Self {
        let mut out = self.clone();
        out.linear = (self.linear.0.scale(c), self.linear.1.scale(c));
        for b in &mut out.bumps {
            b.amplitude = b.amplitude.scale(c);
        }
        out
    }

    /// Exact primitive of the bump layer at `x`.
    pub fn bump_primitive(&self, orbifold: &OrbifoldPresentation, x: &TorusPoint) -> SymScalar {
        self.bumps
            .iter()
            .fold(SymScalar::zero(), |acc, b| acc + b.value_at(orbifold, x))
    }

    /// `Σ_k ∫_{σ_k} ω`, exact.
    pub fn integrate(
        &self,
        orbifold: &OrbifoldPresentation,
        path: &GPath,
    ) -> Result<SymScalar, FormError> {
        path.validate(&orbifold.action)?;
        let mut total = SymScalar::zero();
        for (p, q) in path.pieces() {
            for patch in &self.patches {
                if let Some(d) = &patch.disk {
                    if torus_segment_distance2(p, q, &d.center) < &d.radius * &d.radius {
                        return Err(FormError::CrossesPatch {
                            patch: patch.id.clone(),
                        });
                    }
                }
            }
            let d = q.sub(p);
            total = total.try_add(&self.linear.0.scale(&d.x))?;
            total = total.try_add(&self.linear.1.scale(&d.y))?;
        }
        for seg in &path.segments {
            let start = seg.first().expect("nonempty segment").to_torus();
            let end = seg.last().expect("nonempty segment").to_torus();
            let diff = self
                .bump_primitive(orbifold, &end)
                .try_sub(&self.bump_primitive(orbifold, &start))?;
            total = total.try_add(&diff)?;
        }
        Ok(total)
    }

    /// Numeric value of `ω` at a point, `(ω_θ, ω_φ)`.
    pub fn numeric_at(
        &self,
        orbifold: &OrbifoldPresentation,
        table: &SymbolTable,
        x: NumericPoint,
    ) -> (f64, f64) {
        let mut v = (self.linear.0.to_f64(table), self.linear.1.to_f64(table));
        for b in &self.bumps {
            let g = b.gradient(orbifold, table, x);
            v.0 += g.0;
            v.1 += g.1;
        }
        v
    }
}

/// Invariance of the form under the action, ignoring the override.
pub fn honest_basic(form: &ClosedForm, orbifold: &OrbifoldPresentation) -> bool {
    let (a, b) = &form.linear;
    let r = |v: i64| Rational::from_integer(BigInt::from(v));
    orbifold.action.elements().iter().all(|g| {
        let m = g.matrix;
        // Aᵀ·(a, b)
        let pa = a.scale(&r(m[0][0])) + b.scale(&r(m[1][0]));
        let pb = a.scale(&r(m[0][1])) + b.scale(&r(m[1][1]));
        pa == *a && pb == *b && (form.bumps.is_empty() || g.is_isometry())
    })
}

pub fn check_basic(form: &ClosedForm, orbifold: &OrbifoldPresentation) -> bool {
    form.basic_override || honest_basic(form, orbifold)
}

/// Validates the bump layer and returns the zeros it contributes (none:
/// a nondominated perturbation of a nonvanishing linear form is zero-free).
pub fn zeros(
    form: &ClosedForm,
    orbifold: &OrbifoldPresentation,
    table: &SymbolTable,
) -> Result<Vec<Zero>, FormError> {
    let (a, b) = (form.linear.0.to_f64(table), form.linear.1.to_f64(table));
    if form.linear.0.is_zero() && form.linear.1.is_zero() {
        return Err(FormError::Vanishes);
    }
    let norm = a.hypot(b);
    for (index, bump) in form.bumps.iter().enumerate() {
        if !bump.radius.is_positive() {
            return Err(FormError::BadRadius { index });
        }
        if !orbifold.disk_is_regular(&bump.center, &bump.radius) {
            return Err(FormError::BumpOverlap { index });
        }
        let amp = bump.amplitude.to_f64(table).abs();
        if amp * bump_slope_bound(&bump.radius) >= norm {
            return Err(FormError::BumpDominates { index });
        }
        for (j, other) in form.bumps.iter().enumerate().skip(index + 1) {
            let reach = &bump.radius + &other.radius;
            let reach2 = &reach * &reach;
            if orbifold
                .orbit(&other.center)
                .iter()
                .any(|c| torus_distance2(&bump.center, c) < reach2)
            {
                return Err(FormError::BumpOverlap { index: j });
            }
        }
    }
    Ok(Vec::new())
}

/// `Per_ξ` on the fixed generator loops.
pub fn periods(
    form: &ClosedForm,
    orbifold: &OrbifoldPresentation,
) -> Result<Vec<(String, SymScalar)>, FormError> {
    if !check_basic(form, orbifold) {
        return Err(FormError::NotBasic);
    }
    orbifold
        .fundamental_generators()
        .into_iter()
        .map(|g| Ok((g.id, form.integrate(orbifold, &g.path)?)))
        .collect()
}

pub fn rank_of_class(form: &ClosedForm, orbifold: &OrbifoldPresentation) -> Result<usize, FormError> {
    let values: Vec<SymScalar> = periods(form, orbifold)?.into_iter().map(|(_, v)| v).collect();
    Ok(q_rank(&values))
}

/// Candidate amplitudes tried for each zero: `0, 1/7, 1/14, 1/21, ...`.
pub fn amplitude_candidates(attempts: usize) -> impl Iterator<Item = Rational> {
    std::iter::once(Rational::zero()).chain(
        (1..attempts).map(|k| Rational::new(BigInt::one(), BigInt::from(7 * k as i64))),
    )
}

pub const GENERIC_ATTEMPTS: usize = 20;

pub use crate::surgery::make_generic;
