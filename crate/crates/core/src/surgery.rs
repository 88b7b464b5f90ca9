//! Foliation models and the three connected-sum constructions. A model keeps
//! its summands and the ordered surgery records; the leaf-family structure is
//! rebuilt by replaying the surgeries, so every derived view is reproducible.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero as _;
use thiserror::Error;

use crate::forms::{
    self, amplitude_candidates, ClosedForm, Disk, FormError, PatchBump, SurgeryKind, SurgeryPatch,
    Zero, GENERIC_ATTEMPTS,
};
use crate::graph::{self, FoliationGraph, GraphError};
use crate::leaves::{self, Decomposition, LeafClass};
use crate::orbifold::OrbifoldPresentation;
use crate::scalar::{
    q_rank, Lattice, Rational, ScalarError, Sign, SymScalar, SymbolTable, DEFAULT_PRECISION_CEILING,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurgeryError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("region `{0}` not found")]
    UnknownRegion(String),
    #[error("surgery `{surgery}`: {reason}")]
    Invariant { surgery: String, reason: String },
    #[error("surgery `{surgery}`: unsupported configuration: {reason}")]
    Unsupported { surgery: String, reason: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("models use different symbol tables")]
    MismatchedTables,
    #[error("form is not basic for the action of `{0}` (no override set)")]
    NotBasic(String),
}

/// One torus summand `T²/K` with its form.
#[derive(Debug, Clone, PartialEq)]
pub struct Summand {
    pub name: String,
    pub orbifold: OrbifoldPresentation,
    pub form: ClosedForm,
}

impl Summand {
    /// Generator periods of the unpatched form.
    pub fn periods(&self) -> Result<Vec<(String, SymScalar)>, FormError> {
        let mut bare = self.form.clone();
        bare.patches.clear();
        forms::periods(&bare, &self.orbifold)
    }
}

/// Where a disk sits: a leaf-family region and the level window it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskPlacement {
    pub region: String,
    pub window: (SymScalar, SymScalar),
    pub disk: Option<Disk>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryRecord {
    pub name: String,
    pub kind: SurgeryKind,
    pub left: DiskPlacement,
    pub right: DiskPlacement,
    pub tube_levels: (SymScalar, SymScalar),
    pub inputs_transitive: (bool, bool),
}

#[derive(Debug, Clone)]
pub struct SurgerySpec {
    pub name: String,
    pub kind: SurgeryKind,
    pub left: FoliationModel,
    pub left_disk: DiskPlacement,
    pub right: FoliationModel,
    pub right_disk: DiskPlacement,
    pub tube_levels: (SymScalar, SymScalar),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum End {
    /// A closed circle family with no vertex on it.
    Free,
    Zero(String),
}

/// A maximal family of compact regular leaves, spanning `[lo, lo + weight]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyEdge {
    pub name: String,
    pub summand: Option<usize>,
    pub lo: SymScalar,
    pub weight: SymScalar,
    pub src: End,
    pub dst: End,
}

impl FamilyEdge {
    pub fn is_circle(&self) -> bool {
        self.src == End::Free
    }

    pub fn hi(&self) -> SymScalar {
        self.lo.clone() + self.weight.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Left,
    Right,
    Tube,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: String,
    pub origin: Origin,
    pub compact: bool,
    /// Whether compact leaves accumulate on it from some side.
    pub borders_compact: bool,
    pub special: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularLeaf {
    pub id: String,
    pub surgery: String,
    pub zeros: Vec<String>,
    pub level: SymScalar,
    pub components: Vec<Component>,
    pub special: Option<String>,
}

impl SingularLeaf {
    pub fn is_compact(&self) -> bool {
        self.components.iter().all(|c| c.compact)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SummandRegion {
    Compact,
    Special(String),
}

/// Result of replaying the surgeries.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub edges: Vec<FamilyEdge>,
    pub specials: Vec<String>,
    parent: BTreeMap<String, String>,
    /// Zero vertices in creation order with the special they merge into.
    pub vertices: Vec<(String, Option<String>)>,
    pub zero_vertex: BTreeMap<String, String>,
    pub zeros: Vec<Zero>,
    pub singular: Vec<SingularLeaf>,
    pub regions: Vec<SummandRegion>,
    /// Edges of a closed walk once around each compact summand's circle.
    pub turns: Vec<Option<Vec<String>>>,
    pub generators: Vec<Vec<(String, SymScalar)>>,
}

impl Structure {
    pub fn find(&self, s: &str) -> String {
        let mut cur = s.to_string();
        while let Some(p) = self.parent.get(&cur) {
            if *p == cur {
                break;
            }
            cur = p.clone();
        }
        cur
    }

    fn union(&mut self, a: &str, b: &str) -> String {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let ia = self.specials.iter().position(|s| *s == ra);
        let ib = self.specials.iter().position(|s| *s == rb);
        let (keep, drop) = if ia <= ib { (ra, rb) } else { (rb, ra) };
        self.parent.insert(drop, keep.clone());
        keep
    }

    fn add_special(&mut self, name: &str) {
        self.specials.push(name.to_string());
        self.parent.insert(name.to_string(), name.to_string());
    }

    pub fn is_special(&self, name: &str) -> bool {
        self.parent.contains_key(name)
    }

    /// Special roots in creation order.
    pub fn live_specials(&self) -> Vec<String> {
        self.specials
            .iter()
            .filter(|s| self.find(s) == **s)
            .cloned()
            .collect()
    }

    /// The special a zero vertex merges into, resolved.
    pub fn vertex_special(&self, key: &str) -> Option<String> {
        self.vertices
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, s)| s.as_ref().map(|s| self.find(s)))
    }

    pub fn edge(&self, name: &str) -> Option<&FamilyEdge> {
        self.edges.iter().find(|e| e.name == name)
    }

    pub fn zero_level(&self, id: &str) -> Option<&SymScalar> {
        self.zeros.iter().find(|z| z.id == id).map(|z| &z.level)
    }

    pub fn all_periods(&self) -> Vec<SymScalar> {
        self.generators
            .iter()
            .flatten()
            .map(|(_, v)| v.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    Edge(String),
    Special(String),
}

struct Replayer<'a> {
    st: Structure,
    table: &'a SymbolTable,
    ceiling: u32,
    bumps: &'a [PatchBump],
}

impl<'a> Replayer<'a> {
    fn sign(&self, v: &SymScalar) -> Result<Sign, SurgeryError> {
        Ok(v.sign(self.table, self.ceiling)?)
    }

    fn lt(&self, a: &SymScalar, b: &SymScalar) -> Result<bool, SurgeryError> {
        Ok(self.sign(&(b.clone() - a.clone()))? == Sign::Pos)
    }

    fn le(&self, a: &SymScalar, b: &SymScalar) -> Result<bool, SurgeryError> {
        Ok(self.sign(&(b.clone() - a.clone()))? != Sign::Neg)
    }

    fn effective(&self, zero: &str, raw: &SymScalar) -> SymScalar {
        self.bumps
            .iter()
            .filter(|b| b.zero == zero)
            .fold(raw.clone(), |acc, b| acc + SymScalar::rational(b.amplitude.clone()))
    }

    fn resolve(&self, region: &str) -> Result<Slot, SurgeryError> {
        if self.st.edge(region).is_some() {
            return Ok(Slot::Edge(region.to_string()));
        }
        if self.st.is_special(region) {
            return Ok(Slot::Special(self.st.find(region)));
        }
        let circle = format!("{region}.e");
        if self.st.edge(&circle).is_some() {
            return Ok(Slot::Edge(circle));
        }
        Err(SurgeryError::UnknownRegion(region.to_string()))
    }

    fn take_edge(&mut self, name: &str) -> (usize, FamilyEdge) {
        let i = self
            .st
            .edges
            .iter()
            .position(|e| e.name == name)
            .expect("resolved edge");
        (i, self.st.edges.remove(i))
    }

    fn replace_in_turns(&mut self, old: &str, new: Option<Vec<String>>) {
        for turn in self.st.turns.iter_mut() {
            let Some(t) = turn else { continue };
            if let Some(pos) = t.iter().position(|e| e == old) {
                match &new {
                    Some(parts) => {
                        t.splice(pos..=pos, parts.iter().cloned());
                    }
                    None => *turn = None,
                }
            }
        }
    }

    fn positive(&self, surgery: &str, v: &SymScalar, what: &str) -> Result<(), SurgeryError> {
        if self.sign(v)? != Sign::Pos {
            return Err(SurgeryError::Invariant {
                surgery: surgery.to_string(),
                reason: format!("{what} must be positive"),
            });
        }
        Ok(())
    }

    /// Levels already carried by zeros inside a region.
    fn check_level_free(&self, surgery: &str, slot: &Slot, level: &SymScalar) -> Result<(), SurgeryError> {
        if let Slot::Special(s) = slot {
            for z in &self.st.zeros {
                let key = &self.st.zero_vertex[&z.id];
                if self.st.vertex_special(key).as_deref() == Some(s.as_str()) && z.level == *level {
                    return Err(SurgeryError::Invariant {
                        surgery: surgery.to_string(),
                        reason: format!("tube level coincides with the level of zero {}", z.id),
                    });
                }
            }
        }
        Ok(())
    }

    fn push_edge(&mut self, e: FamilyEdge, at: &mut usize) {
        self.st.edges.insert(*at, e);
        *at += 1;
    }

    fn side_components(&self, slot: &Slot, origin: Origin, leaf: &str) -> Vec<Component> {
        let tag = match origin {
            Origin::Left => "L",
            Origin::Right => "R",
            Origin::Tube => "T",
        };
        match slot {
            Slot::Edge(_) => vec![Component {
                id: format!("{leaf}#{tag}"),
                origin,
                compact: true,
                borders_compact: true,
                special: None,
            }],
            Slot::Special(s) => (1..=2)
                .map(|k| Component {
                    id: format!("{leaf}#{tag}{k}"),
                    origin,
                    compact: false,
                    borders_compact: false,
                    special: Some(s.clone()),
                })
                .collect(),
        }
    }

    fn apply(&mut self, rec: &SurgeryRecord) -> Result<(), SurgeryError> {
        let s = rec.name.as_str();
        let invariant = |reason: &str| SurgeryError::Invariant {
            surgery: s.to_string(),
            reason: reason.to_string(),
        };
        for (side, p) in [("left", &rec.left), ("right", &rec.right)] {
            if !self.lt(&p.window.0, &p.window.1)? {
                return Err(invariant(&format!("{side} window is empty")));
            }
        }
        let (x, y) = &rec.tube_levels;
        let (l, r) = (&rec.left.window, &rec.right.window);
        let j_lo = if self.le(&l.0, &r.0)? { r.0.clone() } else { l.0.clone() };
        let j_hi = if self.le(&l.1, &r.1)? { l.1.clone() } else { r.1.clone() };
        let overlap = self.lt(&j_lo, &j_hi)?;
        let in_window = |me: &Self, v: &SymScalar, w: &(SymScalar, SymScalar)| -> Result<bool, SurgeryError> {
            Ok(me.le(&w.0, v)? && me.le(v, &w.1)?)
        };
        match rec.kind {
            SurgeryKind::A => {
                if !overlap {
                    return Err(invariant("kind A needs overlapping level windows"));
                }
                if !self.lt(x, y)? {
                    return Err(invariant("kind A needs the first tube level below the second"));
                }
                let j = (j_lo.clone(), j_hi.clone());
                if !in_window(self, x, &j)? || !in_window(self, y, &j)? {
                    return Err(invariant("kind A tube levels must lie in the window overlap"));
                }
            }
            SurgeryKind::B => {
                if overlap {
                    return Err(invariant("kind B needs disjoint level windows"));
                }
                if !self.lt(y, x)? {
                    return Err(invariant("kind B needs the first tube level above the second"));
                }
                if !in_window(self, x, l)? || !in_window(self, y, r)? {
                    return Err(invariant("kind B tube levels must lie in their windows"));
                }
            }
            SurgeryKind::C => {
                if !overlap {
                    return Err(invariant("kind C needs overlapping level windows"));
                }
                if x != y {
                    return Err(invariant("kind C needs equal tube levels"));
                }
                if !in_window(self, x, &(j_lo, j_hi))? {
                    return Err(invariant("kind C tube level must lie in the window overlap"));
                }
            }
        }

        let left = self.resolve(&rec.left.region)?;
        let right = self.resolve(&rec.right.region)?;
        let zx = format!("{s}.x");
        let zy = format!("{s}.y");
        for id in [&zx, &zy] {
            if self.st.zero_vertex.contains_key(id) {
                return Err(SurgeryError::DuplicateName(id.clone()));
            }
        }
        let ex = self.effective(&zx, x);
        let ey = self.effective(&zy, y);
        for slot in [&left, &right] {
            self.check_level_free(s, slot, &ex)?;
            self.check_level_free(s, slot, &ey)?;
        }
        let zero = |id: &str, level: SymScalar| Zero {
            id: id.to_string(),
            host: s.to_string(),
            index: 1,
            isotropy_order: 1,
            level,
        };
        self.st.zeros.push(zero(&zx, ex.clone()));
        self.st.zeros.push(zero(&zy, ey.clone()));
        match rec.kind {
            SurgeryKind::A => self.kind_a(s, &left, &right, &zx, &zy, &ex, &ey),
            _ if ex == ey => self.kind_c(s, &left, &right, &zx, &zy, &ex),
            _ => self.kind_b(s, &left, &right, &zx, &zy, &ex, &ey),
        }
    }

    fn unsupported(s: &str, reason: &str) -> SurgeryError {
        SurgeryError::Unsupported {
            surgery: s.to_string(),
            reason: reason.to_string(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn kind_a(
        &mut self,
        s: &str,
        left: &Slot,
        right: &Slot,
        zx: &str,
        zy: &str,
        x: &SymScalar,
        y: &SymScalar,
    ) -> Result<(), SurgeryError> {
        let len = y.clone() - x.clone();
        let mut covered = Vec::new();
        for slot in [left, right] {
            if let Slot::Edge(name) = slot {
                let e = self.st.edge(name).expect("resolved edge").clone();
                if e.is_circle() {
                    covered.push(self.le(&e.weight, &len)?);
                } else {
                    if !(self.lt(&e.lo, x)? && self.lt(y, &e.hi())?) {
                        return Err(Self::unsupported(s, "tube levels must lie inside the edge family"));
                    }
                    covered.push(false);
                }
            } else {
                covered.push(false);
            }
        }
        let slots = [left, right];
        if covered.iter().any(|&c| c) {
            return self.kind_a_big(s, slots, &covered, zx, zy, x, y, &len);
        }

        let specials: Vec<String> = slots
            .iter()
            .filter_map(|sl| match sl {
                Slot::Special(n) => Some(n.clone()),
                _ => None,
            })
            .collect();
        let host = match specials.as_slice() {
            [] => None,
            [a] => Some(a.clone()),
            [a, b] => Some(self.st.union(a, b)),
            _ => unreachable!(),
        };
        self.st.vertices.push((zx.to_string(), host.clone()));
        self.st.vertices.push((zy.to_string(), host.clone()));
        self.st.zero_vertex.insert(zx.to_string(), zx.to_string());
        self.st.zero_vertex.insert(zy.to_string(), zy.to_string());

        let merged = format!("{s}.m");
        let mut insert_at = None;
        for slot in slots {
            let Slot::Edge(name) = slot else { continue };
            let (mut at, e) = self.take_edge(name);
            if e.is_circle() {
                let piece = format!("{}/{s}", e.name);
                let w = e.weight.clone() - len.clone();
                self.positive(s, &w, "remaining circle weight")?;
                self.push_edge(
                    FamilyEdge {
                        name: piece.clone(),
                        summand: e.summand,
                        lo: y.clone(),
                        weight: w,
                        src: End::Zero(zy.to_string()),
                        dst: End::Zero(zx.to_string()),
                    },
                    &mut at,
                );
                let turn = host.is_none().then(|| vec![merged.clone(), piece]);
                self.replace_in_turns(&e.name, turn);
            } else {
                let lower = format!("{}/{s}-", e.name);
                let upper = format!("{}/{s}+", e.name);
                self.push_edge(
                    FamilyEdge {
                        name: lower.clone(),
                        summand: e.summand,
                        lo: e.lo.clone(),
                        weight: x.clone() - e.lo.clone(),
                        src: e.src.clone(),
                        dst: End::Zero(zx.to_string()),
                    },
                    &mut at,
                );
                self.push_edge(
                    FamilyEdge {
                        name: upper.clone(),
                        summand: e.summand,
                        lo: y.clone(),
                        weight: e.hi() - y.clone(),
                        src: End::Zero(zy.to_string()),
                        dst: e.dst.clone(),
                    },
                    &mut at,
                );
                let turn = host.is_none().then(|| vec![lower, merged.clone(), upper]);
                self.replace_in_turns(&e.name, turn);
            }
            insert_at.get_or_insert(at);
        }
        if host.is_none() {
            let mut at = self.st.edges.len();
            self.push_edge(
                FamilyEdge {
                    name: merged,
                    summand: None,
                    lo: x.clone(),
                    weight: len,
                    src: End::Zero(zx.to_string()),
                    dst: End::Zero(zy.to_string()),
                },
                &mut at,
            );
        }
        for (zero, level) in [(zx, x), (zy, y)] {
            let leaf = format!("{s}.{}", &zero[s.len() + 1..]);
            let mut comps = self.side_components(left, Origin::Left, &leaf);
            comps.extend(self.side_components(right, Origin::Right, &leaf));
            self.st.singular.push(SingularLeaf {
                id: leaf,
                surgery: s.to_string(),
                zeros: vec![zero.to_string()],
                level: level.clone(),
                components: comps,
                special: host.clone(),
            });
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn kind_a_big(
        &mut self,
        s: &str,
        slots: [&Slot; 2],
        covered: &[bool],
        zx: &str,
        zy: &str,
        x: &SymScalar,
        y: &SymScalar,
        len: &SymScalar,
    ) -> Result<(), SurgeryError> {
        let host = match (slots[0], slots[1]) {
            (Slot::Edge(a), Slot::Edge(b)) => {
                let (wa, wb) = (
                    self.st.edge(a).expect("edge").weight.clone(),
                    self.st.edge(b).expect("edge").weight.clone(),
                );
                let circles = self.st.edge(a).expect("edge").is_circle()
                    && self.st.edge(b).expect("edge").is_circle();
                if !circles || !covered.iter().all(|&c| c) {
                    return Err(Self::unsupported(
                        s,
                        "tube longer than one circle family but not the other",
                    ));
                }
                if !self.le(&(wa.clone() + wb.clone()), len)? || q_rank(&[wa, wb]) != 2 {
                    return Err(Self::unsupported(
                        s,
                        "long tube between circle families needs incommensurable weights and length at least their sum",
                    ));
                }
                self.st.add_special(s);
                s.to_string()
            }
            (Slot::Special(sp), Slot::Edge(_)) | (Slot::Edge(_), Slot::Special(sp)) => sp.clone(),
            _ => unreachable!("covered implies a circle side"),
        };
        for slot in slots {
            if let Slot::Edge(name) = slot {
                let (_, e) = self.take_edge(name);
                self.replace_in_turns(&e.name, None);
                if let Some(i) = e.summand {
                    self.st.regions[i] = SummandRegion::Special(host.clone());
                }
            }
        }
        self.st.vertices.push((zx.to_string(), Some(host.clone())));
        self.st.vertices.push((zy.to_string(), Some(host.clone())));
        self.st.zero_vertex.insert(zx.to_string(), zx.to_string());
        self.st.zero_vertex.insert(zy.to_string(), zy.to_string());
        let absorbed = Slot::Special(host.clone());
        for (zero, level) in [(zx, x), (zy, y)] {
            let leaf = format!("{s}.{}", &zero[s.len() + 1..]);
            let mut comps = self.side_components(&absorbed, Origin::Left, &leaf);
            comps.extend(self.side_components(&absorbed, Origin::Right, &leaf));
            self.st.singular.push(SingularLeaf {
                id: leaf,
                surgery: s.to_string(),
                zeros: vec![zero.to_string()],
                level: level.clone(),
                components: comps,
                special: Some(host.clone()),
            });
        }
        Ok(())
    }

    /// Splits one side at a zero on it; returns the special the zero merges into.
    fn split_side(&mut self, s: &str, slot: &Slot, z: &str, level: &SymScalar) -> Result<Option<String>, SurgeryError> {
        match slot {
            Slot::Special(sp) => Ok(Some(sp.clone())),
            Slot::Edge(name) => {
                let e = self.st.edge(name).expect("edge").clone();
                if e.is_circle() {
                    let (mut at, e) = self.take_edge(name);
                    let piece = format!("{}/{s}", e.name);
                    self.push_edge(
                        FamilyEdge {
                            name: piece.clone(),
                            summand: e.summand,
                            lo: level.clone(),
                            weight: e.weight.clone(),
                            src: End::Zero(z.to_string()),
                            dst: End::Zero(z.to_string()),
                        },
                        &mut at,
                    );
                    self.replace_in_turns(&e.name, Some(vec![piece]));
                } else {
                    if !(self.lt(&e.lo, level)? && self.lt(level, &e.hi())?) {
                        return Err(Self::unsupported(s, "tube level must lie inside the edge family"));
                    }
                    let (mut at, e) = self.take_edge(name);
                    let lower = format!("{}/{s}-", e.name);
                    let upper = format!("{}/{s}+", e.name);
                    self.push_edge(
                        FamilyEdge {
                            name: lower.clone(),
                            summand: e.summand,
                            lo: e.lo.clone(),
                            weight: level.clone() - e.lo.clone(),
                            src: e.src.clone(),
                            dst: End::Zero(z.to_string()),
                        },
                        &mut at,
                    );
                    self.push_edge(
                        FamilyEdge {
                            name: upper.clone(),
                            summand: e.summand,
                            lo: level.clone(),
                            weight: e.hi() - level.clone(),
                            src: End::Zero(z.to_string()),
                            dst: e.dst.clone(),
                        },
                        &mut at,
                    );
                    self.replace_in_turns(&e.name, Some(vec![lower, upper]));
                }
                Ok(None)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn kind_b(
        &mut self,
        s: &str,
        left: &Slot,
        right: &Slot,
        zx: &str,
        zy: &str,
        x: &SymScalar,
        y: &SymScalar,
    ) -> Result<(), SurgeryError> {
        let hx = self.split_side(s, left, zx, x)?;
        let hy = self.split_side(s, right, zy, y)?;
        self.st.vertices.push((zx.to_string(), hx.clone()));
        self.st.vertices.push((zy.to_string(), hy.clone()));
        self.st.zero_vertex.insert(zx.to_string(), zx.to_string());
        self.st.zero_vertex.insert(zy.to_string(), zy.to_string());
        let (lo_z, hi_z, lo, hi) = if self.lt(y, x)? {
            (zy, zx, y, x)
        } else {
            (zx, zy, x, y)
        };
        let mut at = self.st.edges.len();
        self.push_edge(
            FamilyEdge {
                name: format!("{s}.t"),
                summand: None,
                lo: lo.clone(),
                weight: hi.clone() - lo.clone(),
                src: End::Zero(lo_z.to_string()),
                dst: End::Zero(hi_z.to_string()),
            },
            &mut at,
        );
        for (zero, level, slot, origin, host) in [
            (zx, x, left, Origin::Left, hx),
            (zy, y, right, Origin::Right, hy),
        ] {
            let leaf = zero.to_string();
            let mut comps = self.side_components(slot, origin, &leaf);
            comps.push(Component {
                id: format!("{leaf}#T"),
                origin: Origin::Tube,
                compact: true,
                borders_compact: true,
                special: None,
            });
            self.st.singular.push(SingularLeaf {
                id: leaf,
                surgery: s.to_string(),
                zeros: vec![zero.to_string()],
                level: level.clone(),
                components: comps,
                special: host,
            });
        }
        Ok(())
    }

    fn kind_c(
        &mut self,
        s: &str,
        left: &Slot,
        right: &Slot,
        zx: &str,
        zy: &str,
        level: &SymScalar,
    ) -> Result<(), SurgeryError> {
        let key = format!("{s}.xy");
        let hx = self.split_side(s, left, &key, level)?;
        let hy = self.split_side(s, right, &key, level)?;
        let host = match (hx, hy) {
            (Some(a), Some(b)) => Some(self.st.union(&a, &b)),
            (a, b) => a.or(b),
        };
        self.st.vertices.push((key.clone(), host.clone()));
        self.st.zero_vertex.insert(zx.to_string(), key.clone());
        self.st.zero_vertex.insert(zy.to_string(), key.clone());
        let mut comps = self.side_components(left, Origin::Left, &key);
        comps.extend(self.side_components(right, Origin::Right, &key));
        let any_compact_side = matches!(left, Slot::Edge(_)) || matches!(right, Slot::Edge(_));
        comps.push(Component {
            id: format!("{key}#T"),
            origin: Origin::Tube,
            compact: true,
            borders_compact: any_compact_side,
            special: None,
        });
        // Edge pieces end at the shared vertex, which is keyed by `key`.
        for e in self.st.edges.iter_mut() {
            for end in [&mut e.src, &mut e.dst] {
                if *end == End::Zero(key.clone()) {
                    *end = End::Zero(zx.to_string());
                }
            }
        }
        self.st.singular.push(SingularLeaf {
            id: key,
            surgery: s.to_string(),
            zeros: vec![zx.to_string(), zy.to_string()],
            level: level.clone(),
            components: comps,
            special: host,
        });
        Ok(())
    }
}

/// Rebuilds the leaf-family structure from summands and surgery records.
pub fn replay(
    summands: &[Summand],
    surgeries: &[SurgeryRecord],
    patch_bumps: &[PatchBump],
    table: &SymbolTable,
    ceiling: u32,
) -> Result<Structure, SurgeryError> {
    let mut st = Structure {
        edges: Vec::new(),
        specials: Vec::new(),
        parent: BTreeMap::new(),
        vertices: Vec::new(),
        zero_vertex: BTreeMap::new(),
        zeros: Vec::new(),
        singular: Vec::new(),
        regions: Vec::new(),
        turns: Vec::new(),
        generators: Vec::new(),
    };
    let prefixed = summands.len() > 1;
    for (i, sm) in summands.iter().enumerate() {
        if !forms::check_basic(&sm.form, &sm.orbifold) {
            return Err(SurgeryError::NotBasic(sm.name.clone()));
        }
        forms::zeros(&sm.form, &sm.orbifold, table)?;
        let gens: Vec<(String, SymScalar)> = sm
            .periods()?
            .into_iter()
            .map(|(id, v)| {
                let id = if prefixed { format!("{}.{id}", sm.name) } else { id };
                (id, v)
            })
            .collect();
        let values: Vec<SymScalar> = gens.iter().map(|(_, v)| v.clone()).collect();
        if q_rank(&values) >= 2 {
            if st.is_special(&sm.name) {
                return Err(SurgeryError::DuplicateName(sm.name.clone()));
            }
            st.add_special(&sm.name);
            st.regions.push(SummandRegion::Special(sm.name.clone()));
            st.turns.push(None);
        } else {
            let w = Lattice::new(values)
                .positive_generator(table, ceiling)?
                .ok_or(FormError::Vanishes)?;
            let name = format!("{}.e", sm.name);
            if st.edge(&name).is_some() {
                return Err(SurgeryError::DuplicateName(sm.name.clone()));
            }
            st.edges.push(FamilyEdge {
                name: name.clone(),
                summand: Some(i),
                lo: SymScalar::zero(),
                weight: w,
                src: End::Free,
                dst: End::Free,
            });
            st.regions.push(SummandRegion::Compact);
            st.turns.push(Some(vec![name]));
        }
        st.generators.push(gens);
    }
    let mut rp = Replayer {
        st,
        table,
        ceiling,
        bumps: patch_bumps,
    };
    for rec in surgeries {
        if rp.st.is_special(&rec.name) {
            return Err(SurgeryError::DuplicateName(rec.name.clone()));
        }
        rp.apply(rec)?;
    }
    let mut st = rp.st;
    for e in &st.edges {
        if e.weight.sign(table, ceiling)? != Sign::Pos {
            return Err(SurgeryError::Graph(GraphError::NonPositiveWeight(e.name.clone())));
        }
    }
    // Resolve specials recorded before later merges.
    let resolved: Vec<SummandRegion> = st
        .regions
        .iter()
        .map(|r| match r {
            SummandRegion::Special(s) => SummandRegion::Special(st.find(s)),
            SummandRegion::Compact => SummandRegion::Compact,
        })
        .collect();
    st.regions = resolved;
    let leaves: Vec<SingularLeaf> = st
        .singular
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.special = l.special.as_ref().map(|s| st.find(s));
            for c in &mut l.components {
                c.special = c.special.as_ref().map(|s| st.find(s));
            }
            l
        })
        .collect();
    st.singular = leaves;
    Ok(st)
}

/// `(X, ω̄)` with its leaf catalog, graph and decomposition.
#[derive(Debug, Clone)]
pub struct FoliationModel {
    pub table: SymbolTable,
    pub ceiling: u32,
    pub summands: Vec<Summand>,
    pub surgeries: Vec<SurgeryRecord>,
    pub patch_bumps: Vec<PatchBump>,
    pub structure: Structure,
    pub catalog: Vec<LeafClass>,
    pub graph: FoliationGraph,
    pub decomposition: Decomposition,
}

impl FoliationModel {
    pub fn single(
        name: &str,
        orbifold: OrbifoldPresentation,
        form: ClosedForm,
        table: &SymbolTable,
    ) -> Result<Self, SurgeryError> {
        Self::assemble(
            table.clone(),
            DEFAULT_PRECISION_CEILING,
            vec![Summand {
                name: name.to_string(),
                orbifold,
                form,
            }],
            Vec::new(),
            Vec::new(),
        )
    }

    pub fn with_ceiling(mut self, ceiling: u32) -> Result<Self, SurgeryError> {
        self.ceiling = ceiling;
        Self::assemble(self.table, ceiling, self.summands, self.surgeries, self.patch_bumps)
    }

    pub fn assemble(
        table: SymbolTable,
        ceiling: u32,
        summands: Vec<Summand>,
        surgeries: Vec<SurgeryRecord>,
        patch_bumps: Vec<PatchBump>,
    ) -> Result<Self, SurgeryError> {
        let structure = replay(&summands, &surgeries, &patch_bumps, &table, ceiling)?;
        let catalog = leaves::catalog(&structure, &summands);
        let decomposition = leaves::decompose_structure(&structure);
        let graph = graph::graph_from_structure(&structure);
        Ok(FoliationModel {
            table,
            ceiling,
            summands,
            surgeries,
            patch_bumps,
            structure,
            catalog,
            graph,
            decomposition,
        })
    }

    pub fn zeros(&self) -> &[Zero] {
        &self.structure.zeros
    }

    pub fn periods(&self) -> Vec<(String, SymScalar)> {
        self.structure.generators.iter().flatten().cloned().collect()
    }

    pub fn rank(&self) -> usize {
        q_rank(&self.structure.all_periods())
    }

    pub fn period_lattice(&self) -> Lattice {
        Lattice::new(self.structure.all_periods())
    }

    pub fn all_leaves_compact(&self) -> bool {
        self.catalog.iter().all(|l| l.kind.is_compact())
    }

    pub fn has_compact_leaf(&self) -> bool {
        self.catalog
            .iter()
            .any(|l| l.kind == leaves::LeafKind::CompactRegular)
    }

    pub fn has_noncompact_leaf(&self) -> bool {
        self.catalog
            .iter()
            .any(|l| l.kind == leaves::LeafKind::NoncompactRegular)
    }

    /// Whether each singular leaf has exactly one zero.
    pub fn is_generic(&self) -> bool {
        self.structure.singular.iter().all(|l| l.zeros.len() == 1)
    }

    pub fn summand_index(&self, name: &str) -> Option<usize> {
        self.summands.iter().position(|s| s.name == name)
    }
}

/// Connected sum along a tube joining a disk in each input.
pub fn connected_sum(spec: SurgerySpec) -> Result<FoliationModel, SurgeryError> {
    let SurgerySpec {
        name,
        kind,
        left,
        left_disk,
        right,
        right_disk,
        tube_levels,
    } = spec;
    if left.table.id() != right.table.id() {
        return Err(SurgeryError::MismatchedTables);
    }
    for a in &left.summands {
        if right.summands.iter().any(|b| b.name == a.name) {
            return Err(SurgeryError::DuplicateName(a.name.clone()));
        }
    }
    if left
        .surgeries
        .iter()
        .chain(right.surgeries.iter())
        .any(|r| r.name == name)
    {
        return Err(SurgeryError::DuplicateName(name));
    }
    let inputs_transitive = (is_transitive(&left)?, is_transitive(&right)?);
    let offset = left.summands.len();
    let mut summands = left.summands.clone();
    summands.extend(right.summands.iter().cloned());
    for (placement, model, shift) in [(&left_disk, &left, 0), (&right_disk, &right, offset)] {
        let host = host_summand(model, &placement.region).map(|i| i + shift);
        if let Some(d) = &placement.disk {
            let i = host.ok_or_else(|| SurgeryError::UnknownRegion(placement.region.clone()))?;
            check_disk(&name, &summands[i], d, &placement.window, &model.table)?;
        }
        if let Some(i) = host {
            summands[i].form.patches.push(SurgeryPatch {
                id: name.clone(),
                kind,
                disk: placement.disk.clone(),
            });
        }
    }
    let mut surgeries = left.surgeries.clone();
    surgeries.extend(right.surgeries.iter().cloned());
    surgeries.push(SurgeryRecord {
        name,
        kind,
        left: left_disk,
        right: right_disk,
        tube_levels,
        inputs_transitive,
    });
    let mut patch_bumps = left.patch_bumps.clone();
    patch_bumps.extend(right.patch_bumps.iter().cloned());
    FoliationModel::assemble(
        left.table.clone(),
        left.ceiling.max(right.ceiling),
        summands,
        surgeries,
        patch_bumps,
    )
}

/// The summand a region belongs to, if it can be pinned to one.
fn host_summand(model: &FoliationModel, region: &str) -> Option<usize> {
    let st = &model.structure;
    if let Some(e) = st.edge(region).or_else(|| st.edge(&format!("{region}.e"))) {
        return e.summand;
    }
    if st.is_special(region) {
        let root = st.find(region);
        return st
            .regions
            .iter()
            .position(|r| *r == SummandRegion::Special(root.clone()));
    }
    None
}

fn check_disk(
    surgery: &str,
    summand: &Summand,
    disk: &Disk,
    window: &(SymScalar, SymScalar),
    table: &SymbolTable,
) -> Result<(), SurgeryError> {
    let fail = |reason: String| SurgeryError::Invariant {
        surgery: surgery.to_string(),
        reason,
    };
    if !num_traits::Signed::is_positive(&disk.radius) {
        return Err(fail("disk radius must be positive".into()));
    }
    if !summand.orbifold.disk_is_regular(&disk.center, &disk.radius) {
        return Err(fail(format!(
            "disk in `{}` meets its orbit copies or an orbifold-singular point",
            summand.name
        )));
    }
    let (a, b) = (
        summand.form.linear.0.to_f64(table),
        summand.form.linear.1.to_f64(table),
    );
    let reach = 2.0 * crate::scalar::rational_to_f64(&disk.radius) * a.hypot(b);
    let width = (window.1.clone() - window.0.clone()).to_f64(table);
    if width > reach * (1.0 + 1e-12) {
        return Err(fail(format!(
            "window width {width} exceeds the level range {reach} of the disk in `{}`",
            summand.name
        )));
    }
    Ok(())
}

/// Replaces the zero levels by nearby levels whose pairwise differences
/// avoid the period lattice, keeping periods and zeros.
pub fn make_generic(model: &FoliationModel) -> Result<FoliationModel, SurgeryError> {
    let zeros = model.zeros().to_vec();
    if zeros.len() <= 1 {
        return Ok(model.clone());
    }
    let lattice = model.period_lattice();
    let mut amps: Vec<Rational> = Vec::new();
    for (j, zj) in zeros.iter().enumerate() {
        let mut chosen = None;
        for cand in amplitude_candidates(GENERIC_ATTEMPTS) {
            let lj = zj.level.clone() + SymScalar::rational(cand.clone());
            let separated = zeros[..j].iter().zip(&amps).all(|(zi, ai)| {
                let li = zi.level.clone() + SymScalar::rational(ai.clone());
                !lattice.contains(&(li - lj.clone()))
            });
            if !separated {
                continue;
            }
            let mut trial = amps.clone();
            trial.push(cand.clone());
            let bumps = bumps_from(&zeros[..=j], &trial, &model.patch_bumps);
            if replay(&model.summands, &model.surgeries, &bumps, &model.table, model.ceiling).is_ok() {
                chosen = Some(cand);
                break;
            }
        }
        match chosen {
            Some(a) => amps.push(a),
            None => {
                return Err(FormError::NoGenericAmplitudes {
                    attempts: GENERIC_ATTEMPTS,
                }
                .into())
            }
        }
    }
    let bumps = bumps_from(&zeros, &amps, &model.patch_bumps);
    FoliationModel::assemble(
        model.table.clone(),
        model.ceiling,
        model.summands.clone(),
        model.surgeries.clone(),
        bumps,
    )
}

fn bumps_from(zeros: &[Zero], amps: &[Rational], existing: &[PatchBump]) -> Vec<PatchBump> {
    let mut out = existing.to_vec();
    for (z, a) in zeros.iter().zip(amps) {
        if !a.is_zero() {
            out.push(PatchBump {
                zero: z.id.clone(),
                amplitude: a.clone(),
            });
        }
    }
    out
}

/// Whether some ω-positive loop passes through every regular point.
pub fn is_transitive(model: &FoliationModel) -> Result<bool, SurgeryError> {
    Ok(transitivity(model)?.transitive)
}

#[derive(Debug, Clone)]
pub struct TransitivityReport {
    pub transitive: bool,
    /// Verdict of the Calabi test on the graph as built, before genericity.
    pub raw_calabi: Option<bool>,
    pub genericized: Option<FoliationModel>,
    /// Set when a kind-A sum had exactly one transitive input.
    pub derived_only: bool,
}

pub fn transitivity(model: &FoliationModel) -> Result<TransitivityReport, SurgeryError> {
    let derived_only = model
        .surgeries
        .iter()
        .any(|r| r.kind == SurgeryKind::A && r.inputs_transitive.0 != r.inputs_transitive.1);
    if model.zeros().is_empty() {
        let transitive = model.periods().iter().any(|(_, v)| !v.is_zero());
        return Ok(TransitivityReport {
            transitive,
            raw_calabi: None,
            genericized: None,
            derived_only,
        });
    }
    let raw = graph::is_calabi(&model.graph)?;
    let generic = make_generic(model)?;
    let transitive = graph::is_calabi(&generic.graph)?;
    let changed = generic.patch_bumps != model.patch_bumps;
    Ok(TransitivityReport {
        transitive,
        raw_calabi: Some(raw),
        genericized: changed.then_some(generic),
        derived_only,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmonicity {
    IntrinsicallyHarmonic,
    NotIntrinsicallyHarmonic,
}

impl fmt::Display for Harmonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Harmonicity::IntrinsicallyHarmonic => "intrinsically harmonic",
            Harmonicity::NotIntrinsicallyHarmonic => "not intrinsically harmonic",
        })
    }
}

pub fn harmonicity_verdict(model: &FoliationModel) -> Result<Harmonicity, SurgeryError> {
    Ok(if is_transitive(model)? {
        Harmonicity::IntrinsicallyHarmonic
    } else {
        Harmonicity::NotIntrinsicallyHarmonic
    })
}
