//! Leaf classification, singular leaf components, the `X_c ∪ X_∞`
//! decomposition, local quadratic-model counts, and a numeric leaf tracer.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::forms::{self, ClosedForm, FormError};
use crate::orbifold::{torus_distance2, NumericPoint, OrbifoldPresentation, TorusPoint};
use crate::scalar::{q_rank, SymScalar, SymbolTable};
use crate::surgery::{FoliationModel, Structure, Summand, SummandRegion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeafError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("point lies inside surgery patch {0}")]
    InPatch(String),
    #[error("leaf `{0}` is not singular")]
    NotSingular(String),
    #[error("index {lambda} exceeds dimension {n}")]
    BadIndex { n: usize, lambda: usize },
    #[error("step too large: primitive drifted by {drift:e}")]
    StepTooLarge { drift: f64 },
    #[error("leaf catalog does not cover `{0}`")]
    CatalogIncomplete(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LeafKind {
    CompactRegular,
    NoncompactRegular,
    CompactSingular,
    NoncompactSingular,
}

impl LeafKind {
    pub fn is_compact(self) -> bool {
        matches!(self, LeafKind::CompactRegular | LeafKind::CompactSingular)
    }

    pub fn is_singular(self) -> bool {
        matches!(self, LeafKind::CompactSingular | LeafKind::NoncompactSingular)
    }
}

impl fmt::Display for LeafKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeafKind::CompactRegular => "compact regular",
            LeafKind::NoncompactRegular => "noncompact regular",
            LeafKind::CompactSingular => "compact singular",
            LeafKind::NoncompactSingular => "noncompact singular",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Representative {
    Point(TorusPoint),
    Locus(String),
}

impl fmt::Display for Representative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representative::Point(p) => write!(f, "{p}"),
            Representative::Locus(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafClass {
    pub id: String,
    pub kind: LeafKind,
    pub zeros: Vec<String>,
    pub components: Vec<(String, bool)>,
    pub representative: Representative,
}

/// The leaf catalog of a replayed structure: one class per compact family,
/// per `X_∞` component, and per singular leaf.
pub fn catalog(st: &Structure, summands: &[Summand]) -> Vec<LeafClass> {
    let base_point = |name: &str| {
        summands
            .iter()
            .find(|s| s.name == name)
            .map(|s| Representative::Point(s.orbifold.basepoint.clone()))
    };
    let mut out = Vec::new();
    for e in &st.edges {
        let rep = e
            .name
            .strip_suffix(".e")
            .filter(|_| e.is_circle())
            .and_then(base_point)
            .unwrap_or_else(|| Representative::Locus(format!("family {}", e.name)));
        out.push(LeafClass {
            id: format!("family:{}", e.name),
            kind: LeafKind::CompactRegular,
            zeros: Vec::new(),
            components: Vec::new(),
            representative: rep,
        });
    }
    for s in st.live_specials() {
        let rep = base_point(&s).unwrap_or_else(|| Representative::Locus(format!("region {s}")));
        out.push(LeafClass {
            id: format!("special:{s}"),
            kind: LeafKind::NoncompactRegular,
            zeros: Vec::new(),
            components: Vec::new(),
            representative: rep,
        });
    }
    for l in &st.singular {
        out.push(LeafClass {
            id: format!("singular:{}", l.id),
            kind: if l.is_compact() {
                LeafKind::CompactSingular
            } else {
                LeafKind::NoncompactSingular
            },
            zeros: l.zeros.clone(),
            components: l.components.iter().map(|c| (c.id.clone(), c.compact)).collect(),
            representative: Representative::Locus(format!("level of {}", l.zeros.join(", "))),
        });
    }
    out
}

/// A leaf, or one component of a singular leaf.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Unit {
    pub leaf: String,
    pub component: Option<String>,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.component {
            Some(c) => write!(f, "{}[{c}]", self.leaf),
            None => f.write_str(&self.leaf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XInfComponent {
    pub special: String,
    pub units: Vec<Unit>,
    /// Q-rank of the periods of generators living in this component;
    /// `None` when no generator survives into it.
    pub restricted_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub x_c: Vec<Unit>,
    pub x_inf: Vec<XInfComponent>,
    pub boundary: Vec<Unit>,
}

impl Decomposition {
    /// Units appearing anywhere, with multiplicity.
    pub fn all_units(&self) -> Vec<&Unit> {
        self.x_c
            .iter()
            .chain(self.x_inf.iter().flat_map(|c| c.units.iter()))
            .chain(self.boundary.iter())
            .collect()
    }

    /// Coverage and boundary conditions against a catalog.
    pub fn check(&self, catalog: &[LeafClass]) -> Result<(), String> {
        let expected = catalog_units(catalog);
        let mut seen = BTreeSet::new();
        for u in self.all_units() {
            if !seen.insert(u.clone()) {
                return Err(format!("{u} appears twice"));
            }
        }
        if seen != expected {
            return Err("decomposition does not cover the catalog exactly".into());
        }
        for u in &self.boundary {
            let leaf = catalog
                .iter()
                .find(|l| l.id == u.leaf)
                .ok_or_else(|| format!("unknown leaf {}", u.leaf))?;
            let compact = leaf
                .components
                .iter()
                .find(|(id, _)| Some(id) == u.component.as_ref())
                .map(|(_, c)| *c);
            if leaf.kind != LeafKind::NoncompactSingular || compact != Some(true) {
                return Err(format!("boundary entry {u} is not a compact component of a noncompact singular leaf"));
            }
        }
        Ok(())
    }
}

pub fn catalog_units(catalog: &[LeafClass]) -> BTreeSet<Unit> {
    let mut out = BTreeSet::new();
    for l in catalog {
        if l.kind.is_singular() {
            for (c, _) in &l.components {
                out.insert(Unit {
                    leaf: l.id.clone(),
                    component: Some(c.clone()),
                });
            }
        } else {
            out.insert(Unit {
                leaf: l.id.clone(),
                component: None,
            });
        }
    }
    out
}

pub fn decompose_structure(st: &Structure) -> Decomposition {
    let unit = |leaf: String, component: Option<String>| Unit { leaf, component };
    let mut x_c = Vec::new();
    let mut boundary = Vec::new();
    let mut x_inf: Vec<XInfComponent> = st
        .live_specials()
        .into_iter()
        .map(|s| {
            let gens: Vec<SymScalar> = st
                .regions
                .iter()
                .zip(&st.generators)
                .filter(|(r, _)| **r == SummandRegion::Special(s.clone()))
                .flat_map(|(_, g)| g.iter().map(|(_, v)| v.clone()))
                .collect();
            XInfComponent {
                units: vec![unit(format!("special:{s}"), None)],
                restricted_rank: (!gens.is_empty()).then(|| q_rank(&gens)),
                special: s,
            }
        })
        .collect();
    for e in &st.edges {
        x_c.push(unit(format!("family:{}", e.name), None));
    }
    for l in &st.singular {
        let id = format!("singular:{}", l.id);
        if l.is_compact() {
            for c in &l.components {
                x_c.push(unit(id.clone(), Some(c.id.clone())));
            }
            continue;
        }
        for c in &l.components {
            let u = unit(id.clone(), Some(c.id.clone()));
            if c.compact && c.borders_compact {
                boundary.push(u);
                continue;
            }
            let home = c.special.clone().or_else(|| l.special.clone());
            match home.and_then(|h| x_inf.iter_mut().find(|x| x.special == h)) {
                Some(x) => x.units.push(u),
                None => boundary.push(u),
            }
        }
    }
    Decomposition {
        x_c,
        x_inf,
        boundary,
    }
}

/// `X = X_c ∪ X_∞` for a model, checked against its catalog.
pub fn decompose(model: &FoliationModel) -> Result<Decomposition, LeafError> {
    let d = decompose_structure(&model.structure);
    let covered: BTreeSet<Unit> = d.all_units().into_iter().cloned().collect();
    if let Some(missing) = catalog_units(&model.catalog).difference(&covered).next() {
        return Err(LeafError::CatalogIncomplete(missing.to_string()));
    }
    Ok(d)
}

pub fn singular_components(leaf: &LeafClass) -> Result<Vec<(String, bool)>, LeafError> {
    if !leaf.kind.is_singular() {
        return Err(LeafError::NotSingular(leaf.id.clone()));
    }
    Ok(leaf.components.clone())
}

/// Leaf through a regular point of a zero-free summand.
pub fn classify_leaf(
    form: &ClosedForm,
    orbifold: &OrbifoldPresentation,
    table: &SymbolTable,
    x: &TorusPoint,
) -> Result<LeafClass, LeafError> {
    forms::zeros(form, orbifold, table)?;
    for patch in &form.patches {
        if let Some(d) = &patch.disk {
            if orbifold
                .orbit(&d.center)
                .iter()
                .any(|c| torus_distance2(x, c) < &d.radius * &d.radius)
            {
                return Err(LeafError::InPatch(patch.id.clone()));
            }
        }
    }
    let (a, b) = &form.linear;
    let compact = a.is_zero() || b.is_zero() || a.rational_ratio(b).is_some();
    Ok(LeafClass {
        id: format!("leaf@{x}"),
        kind: if compact {
            LeafKind::CompactRegular
        } else {
            LeafKind::NoncompactRegular
        },
        zeros: Vec::new(),
        components: Vec::new(),
        representative: Representative::Point(x.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSettings {
    pub step: f64,
    pub max_steps: usize,
    pub tolerance: f64,
    pub epsilon: f64,
    pub coverage_threshold: f64,
    pub drift_limit: f64,
    /// Keep at most this many polyline points.
    pub polyline_cap: usize,
}

impl Default for TraceSettings {
    fn default() -> Self {
        TraceSettings {
            step: 0.01,
            max_steps: 1_000_000,
            tolerance: 1e-9,
            epsilon: 0.05,
            coverage_threshold: 0.99,
            drift_limit: 1e-6,
            polyline_cap: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceVerdict {
    Closed { length: f64 },
    DenseEvidence { coverage: f64, epsilon: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub polyline: Vec<NumericPoint>,
    pub verdict: TraceVerdict,
    pub return_error: f64,
    pub steps: usize,
}

fn wrap(d: f64) -> f64 {
    d - d.round()
}

/// `(amplitude, radius², orbit of centers)`
type NumericBump = (f64, f64, Vec<(f64, f64)>);

/// `ω` in floating point, with bump orbits expanded once.
struct NumericField {
    a: f64,
    b: f64,
    bumps: Vec<NumericBump>,
}

impl NumericField {
    fn new(form: &ClosedForm, orbifold: &OrbifoldPresentation, table: &SymbolTable) -> Self {
        let bumps = form
            .bumps
            .iter()
            .map(|b| {
                let r = crate::scalar::rational_to_f64(&b.radius);
                let centers = orbifold
                    .orbit(&b.center)
                    .iter()
                    .map(|c| {
                        let c = c.to_numeric();
                        (c.theta, c.phi)
                    })
                    .collect();
                (b.amplitude.to_f64(table), r * r, centers)
            })
            .collect();
        NumericField {
            a: form.linear.0.to_f64(table),
            b: form.linear.1.to_f64(table),
            bumps,
        }
    }

    fn value(&self, x: f64, y: f64) -> (f64, f64) {
        let mut v = (self.a, self.b);
        for (amp, r2, centers) in &self.bumps {
            for &(cx, cy) in centers {
                let (dx, dy) = (wrap(x - cx), wrap(y - cy));
                let d2 = dx * dx + dy * dy;
                if d2 < *r2 {
                    let s = 1.0 - d2 / r2;
                    let k = -8.0 / r2 * s * s * s * amp;
                    v.0 += k * dx;
                    v.1 += k * dy;
                }
            }
        }
        v
    }

    fn primitive(&self, x: f64, y: f64) -> f64 {
        let mut f = self.a * x + self.b * y;
        for (amp, r2, centers) in &self.bumps {
            for &(cx, cy) in centers {
                let (dx, dy) = (wrap(x - cx), wrap(y - cy));
                let s = 1.0 - (dx * dx + dy * dy) / r2;
                if s > 0.0 {
                    f += amp * s.powi(4);
                }
            }
        }
        f
    }
}

/// Integrates the unit kernel field of `ω` from `seed` with fixed-step RK4.
pub fn trace_leaf(
    form: &ClosedForm,
    orbifold: &OrbifoldPresentation,
    table: &SymbolTable,
    seed: NumericPoint,
    settings: &TraceSettings,
) -> Result<TraceResult, LeafError> {
    forms::zeros(form, orbifold, table)?;
    let nf = NumericField::new(form, orbifold, table);
    let field = |x: f64, y: f64| -> Option<(f64, f64)> {
        let (wt, wp) = nf.value(x, y);
        let n = wt.hypot(wp);
        (n >= 1e-8).then(|| (wp / n, -wt / n))
    };
    let level = |x: f64, y: f64| nf.primitive(x, y);
    let inconclusive = |polyline, steps| TraceResult {
        polyline,
        verdict: TraceVerdict::Inconclusive,
        return_error: f64::INFINITY,
        steps,
    };
    let Some(dir0) = field(seed.theta, seed.phi) else {
        return Ok(inconclusive(vec![seed], 0));
    };
    let targets: Vec<(NumericPoint, (f64, f64))> = orbifold
        .action
        .elements()
        .iter()
        .map(|g| {
            let m = g.matrix;
            let d = (
                m[0][0] as f64 * dir0.0 + m[0][1] as f64 * dir0.1,
                m[1][0] as f64 * dir0.0 + m[1][1] as f64 * dir0.1,
            );
            let n = d.0.hypot(d.1);
            (g.apply_numeric(seed), (d.0 / n, d.1 / n))
        })
        .collect();
    let cells = (1.0 / settings.epsilon).ceil() as usize;
    let mut covered = vec![false; cells * cells];
    let mut covered_count = 0usize;
    let mark = |p: NumericPoint, covered: &mut Vec<bool>, count: &mut usize| {
        for g in orbifold.action.elements() {
            let q = g.apply_numeric(p);
            let i = ((q.theta * cells as f64) as usize).min(cells - 1);
            let j = ((q.phi * cells as f64) as usize).min(cells - 1);
            if !covered[i * cells + j] {
                covered[i * cells + j] = true;
                *count += 1;
            }
        }
    };
    let stride = (settings.max_steps / settings.polyline_cap.max(1)).max(1);
    let mut polyline = vec![seed];
    let (mut x, mut y) = (seed.theta, seed.phi);
    let l0 = level(x, y);
    let h = settings.step;
    let mut arc = 0.0;
    mark(seed, &mut covered, &mut covered_count);
    for step in 1..=settings.max_steps {
        let rk = (|| {
            let k1 = field(x, y)?;
            let k2 = field(x + 0.5 * h * k1.0, y + 0.5 * h * k1.1)?;
            let k3 = field(x + 0.5 * h * k2.0, y + 0.5 * h * k2.1)?;
            let k4 = field(x + h * k3.0, y + h * k3.1)?;
            Some((
                h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            ))
        })();
        let Some((dx, dy)) = rk else {
            return Ok(inconclusive(polyline, step));
        };
        let seg_len = dx.hypot(dy);
        if arc > 10.0 * h {
            for (t, dir) in &targets {
                let px = wrap(t.theta - x);
                let py = wrap(t.phi - y);
                let s = ((px * dx + py * dy) / (seg_len * seg_len)).clamp(0.0, 1.0);
                let err = (px - s * dx).hypot(py - s * dy);
                let cross = (dx * dir.1 - dy * dir.0) / seg_len;
                if err < settings.tolerance && cross.abs() < 1e-6 {
                    polyline.push(NumericPoint::new(x + s * dx, y + s * dy));
                    return Ok(TraceResult {
                        polyline,
                        verdict: TraceVerdict::Closed {
                            length: arc + s * seg_len,
                        },
                        return_error: err,
                        steps: step,
                    });
                }
            }
        }
        x += dx;
        y += dy;
        arc += seg_len;
        let drift = (level(x, y) - l0).abs();
        if drift > settings.drift_limit {
            return Err(LeafError::StepTooLarge { drift });
        }
        let p = NumericPoint::new(x, y);
        mark(p, &mut covered, &mut covered_count);
        if step % stride == 0 {
            polyline.push(p);
        }
        if step % 1000 == 0 {
            let coverage = covered_count as f64 / (cells * cells) as f64;
            if coverage >= settings.coverage_threshold {
                return Ok(TraceResult {
                    polyline,
                    verdict: TraceVerdict::DenseEvidence {
                        coverage,
                        epsilon: settings.epsilon,
                    },
                    return_error: f64::INFINITY,
                    steps: step,
                });
            }
        }
    }
    Ok(inconclusive(polyline, settings.max_steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalGroup {
    Trivial,
    /// Reflection of the last coordinate; negative directions come last.
    Z2ReflectLast,
}

fn sphere_count(dim: isize) -> usize {
    match dim {
        -1 => 0,
        0 => 2,
        _ => 1,
    }
}

/// Components of `{ Σ_{i≤n−λ} y_i² − Σ_{i>n−λ} y_i² = t }` for `t < 0`,
/// `t = 0`, `t > 0`, modulo the group.
pub fn count_local_components(
    n: usize,
    lambda: usize,
    group: LocalGroup,
) -> Result<(usize, usize, usize), LeafError> {
    if lambda > n {
        return Err(LeafError::BadIndex { n, lambda });
    }
    let mut below = sphere_count(lambda as isize - 1);
    let mut above = sphere_count((n - lambda) as isize - 1);
    if group == LocalGroup::Z2ReflectLast && n > 0 {
        // The last coordinate is a negative direction when λ ≥ 1.
        if lambda >= 1 {
            if below == 2 && lambda == 1 {
                below = 1;
            }
        } else if above == 2 {
            above = 1;
        }
    }
    Ok((below, 1, above))
}
