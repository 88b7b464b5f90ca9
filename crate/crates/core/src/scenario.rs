//! Line-oriented scenario files: `[section name]` headers and `key = value`
//! lines. Parsing resolves every reference before any computation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::forms::{BumpTerm, ClosedForm, Disk, SurgeryKind};
use crate::leaves::TraceSettings;
use crate::orbifold::{Affine, GroupAction, OrbifoldPresentation, TorusPoint};
use crate::scalar::{parse_rational, Rational, ScalarError, SymScalar, SymbolTable};
use crate::surgery::{connected_sum, DiskPlacement, FoliationModel, SurgeryError, SurgerySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unresolved reference `{name}`")]
    Unresolved { line: usize, name: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("{0}")]
    Build(#[from] SurgeryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbifoldDecl {
    pub name: String,
    pub builtin: Option<String>,
    pub presentation: OrbifoldPresentation,
    pub basepoint_set: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormDecl {
    pub name: String,
    pub orbifold: String,
    pub form: ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryDecl {
    pub name: String,
    pub kind: SurgeryKind,
    pub left: String,
    pub right: String,
    pub left_place: DiskPlacement,
    pub right_place: DiskPlacement,
    pub levels: (SymScalar, SymScalar),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceDecl {
    pub form: String,
    pub seed: (Rational, Rational),
    pub step: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafMix {
    Compact,
    Noncompact,
    Mixed,
    SomeCompact,
}

impl LeafMix {
    pub fn as_str(self) -> &'static str {
        match self {
            LeafMix::Compact => "compact",
            LeafMix::Noncompact => "noncompact",
            LeafMix::Mixed => "mixed",
            LeafMix::SomeCompact => "some-compact",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "compact" => LeafMix::Compact,
            "noncompact" => LeafMix::Noncompact,
            "mixed" => LeafMix::Mixed,
            "some-compact" => LeafMix::SomeCompact,
            _ => return None,
        })
    }

    /// Whether a model's regular leaves fit this description.
    pub fn holds(self, model: &FoliationModel) -> bool {
        let (c, n) = (model.has_compact_leaf(), model.has_noncompact_leaf());
        match self {
            LeafMix::Compact => model.all_leaves_compact(),
            LeafMix::Noncompact => !c && n,
            LeafMix::Mixed => c && n,
            LeafMix::SomeCompact => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expectation {
    pub transitive: Option<bool>,
    pub leaves: Option<LeafMix>,
    pub compact_singular_components: Option<usize>,
    pub harmonic: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputDecl {
    pub dot: Option<String>,
    pub svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub title: Option<String>,
    pub target: Option<String>,
    pub table: SymbolTable,
    pub orbifolds: Vec<OrbifoldDecl>,
    pub forms: Vec<FormDecl>,
    pub surgeries: Vec<SurgeryDecl>,
    pub trace: Option<TraceDecl>,
    pub expect: Option<Expectation>,
    pub output: OutputDecl,
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

struct Section {
    line: usize,
    kind: String,
    name: Option<String>,
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    fn require(&self, key: &str) -> Result<&Entry, ScenarioError> {
        self.get(key).ok_or_else(|| ScenarioError::Syntax {
            line: self.line,
            message: format!("[{}] is missing `{key}`", self.kind),
        })
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ScenarioError> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(ScenarioError::Syntax {
                    line: e.line,
                    message: format!("unknown key `{}` in [{}]", e.key, self.kind),
                });
            }
        }
        Ok(())
    }

    fn name(&self) -> Result<String, ScenarioError> {
        self.name.clone().ok_or_else(|| ScenarioError::Syntax {
            line: self.line,
            message: format!("[{}] needs a name", self.kind),
        })
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ScenarioError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(inner) = l.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| ScenarioError::Syntax {
                line,
                message: "unterminated section header".into(),
            })?;
            let mut words = inner.split_whitespace();
            let kind = words.next().ok_or_else(|| ScenarioError::Syntax {
                line,
                message: "empty section header".into(),
            })?;
            let name = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(ScenarioError::Syntax {
                    line,
                    message: "section header takes at most a kind and a name".into(),
                });
            }
            sections.push(Section {
                line,
                kind: kind.to_string(),
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = l.split_once('=').ok_or_else(|| ScenarioError::Syntax {
            line,
            message: "expected `key = value`".into(),
        })?;
        let section = sections.last_mut().ok_or_else(|| ScenarioError::Syntax {
            line,
            message: "entry before any section header".into(),
        })?;
        section.entries.push(Entry {
            line,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }
    if sections.is_empty() {
        return Err(ScenarioError::Syntax {
            line: 1,
            message: "scenario is empty".into(),
        });
    }
    Ok(sections)
}

fn scalar_err(line: usize, e: ScalarError) -> ScenarioError {
    match e {
        ScalarError::UnknownSymbol(name) => ScenarioError::Unresolved { line, name },
        other => ScenarioError::Syntax {
            line,
            message: other.to_string(),
        },
    }
}

fn rational(e: &Entry, text: &str) -> Result<Rational, ScenarioError> {
    parse_rational(text.trim()).map_err(|err| scalar_err(e.line, err))
}

fn expr(table: &SymbolTable, e: &Entry, text: &str) -> Result<SymScalar, ScenarioError> {
    table.parse_expr(text.trim()).map_err(|err| scalar_err(e.line, err))
}

fn pair<'a>(e: &Entry, text: &'a str) -> Result<(&'a str, &'a str), ScenarioError> {
    text.split_once(',').ok_or_else(|| ScenarioError::Syntax {
        line: e.line,
        message: "expected two comma-separated values".into(),
    })
}

fn point(e: &Entry, text: &str) -> Result<TorusPoint, ScenarioError> {
    let (a, b) = pair(e, text)?;
    Ok(TorusPoint::new(rational(e, a)?, rational(e, b)?))
}

fn boolean(e: &Entry) -> Result<bool, ScenarioError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ScenarioError::Syntax {
            line: e.line,
            message: "expected `true` or `false`".into(),
        }),
    }
}

fn number<T: std::str::FromStr>(e: &Entry) -> Result<T, ScenarioError> {
    e.value.parse().map_err(|_| ScenarioError::Syntax {
        line: e.line,
        message: format!("unreadable number `{}`", e.value),
    })
}

fn parse_element(e: &Entry) -> Result<Affine, ScenarioError> {
    let (m, b) = e.value.split_once(';').ok_or_else(|| ScenarioError::Syntax {
        line: e.line,
        message: "expected `a b c d ; b1 b2`".into(),
    })?;
    let entries: Vec<i64> = m
        .split_whitespace()
        .map(|v| v.parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ScenarioError::Syntax {
            line: e.line,
            message: "matrix entries must be integers".into(),
        })?;
    let offsets: Vec<&str> = b.split_whitespace().collect();
    if entries.len() != 4 || offsets.len() != 2 {
        return Err(ScenarioError::Syntax {
            line: e.line,
            message: "expected four matrix entries and two offsets".into(),
        });
    }
    Ok(Affine::new(
        [[entries[0], entries[1]], [entries[2], entries[3]]],
        [rational(e, offsets[0])?, rational(e, offsets[1])?],
    ))
}

fn parse_disk(e: &Entry) -> Result<Disk, ScenarioError> {
    let (c, r) = e.value.split_once(';').ok_or_else(|| ScenarioError::Syntax {
        line: e.line,
        message: "expected `θ, φ ; radius`".into(),
    })?;
    Ok(Disk {
        center: point(e, c)?,
        radius: rational(e, r)?,
    })
}

fn parse_bump(table: &SymbolTable, e: &Entry) -> Result<BumpTerm, ScenarioError> {
    let parts: Vec<&str> = e.value.split(';').collect();
    if parts.len() != 3 {
        return Err(ScenarioError::Syntax {
            line: e.line,
            message: "expected `θ, φ ; radius ; amplitude`".into(),
        });
    }
    Ok(BumpTerm {
        center: point(e, parts[0])?,
        radius: rational(e, parts[1])?,
        amplitude: expr(table, e, parts[2])?,
    })
}

fn parse_placement(
    table: &SymbolTable,
    sec: &Section,
    side: &str,
) -> Result<DiskPlacement, ScenarioError> {
    let region = sec.require(&format!("{side}.region"))?.value.clone();
    let w = sec.require(&format!("{side}.window"))?;
    let (lo, hi) = pair(w, &w.value)?;
    let disk = match sec.get(&format!("{side}.disk")) {
        Some(e) => Some(parse_disk(e)?),
        None => None,
    };
    Ok(DiskPlacement {
        region,
        window: (expr(table, w, lo)?, expr(table, w, hi)?),
        disk,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let sections = split_sections(text)?;
    let mut table = SymbolTable::new();
    for sec in sections.iter().filter(|s| s.kind == "symbols") {
        for e in &sec.entries {
            table
                .declare(&e.key, &e.value)
                .map_err(|err| scalar_err(e.line, err))?;
        }
    }
    let mut sc = Scenario {
        title: None,
        target: None,
        table,
        orbifolds: Vec::new(),
        forms: Vec::new(),
        surgeries: Vec::new(),
        trace: None,
        expect: None,
        output: OutputDecl::default(),
    };
    let mut target_line = 0;
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    let mut claim = |name: &str, line: usize| -> Result<(), ScenarioError> {
        if names.insert(name.to_string(), line).is_some() {
            return Err(ScenarioError::Invalid {
                line,
                message: format!("name `{name}` is declared twice"),
            });
        }
        Ok(())
    };
    for sec in &sections {
        match sec.kind.as_str() {
            "symbols" => {}
            "scenario" => {
                sec.check_keys(&["title", "target"])?;
                sc.title = sec.get("title").map(|e| e.value.clone());
                if let Some(e) = sec.get("target") {
                    sc.target = Some(e.value.clone());
                    target_line = e.line;
                }
            }
            "orbifold" => {
                sec.check_keys(&["builtin", "element", "basepoint"])?;
                let name = sec.name()?;
                claim(&name, sec.line)?;
                let builtin = sec.get("builtin").map(|e| e.value.clone());
                let mut presentation = match (&builtin, sec.get("element")) {
                    (Some(_), Some(e)) => {
                        return Err(ScenarioError::Syntax {
                            line: e.line,
                            message: "use either `builtin` or `element`".into(),
                        })
                    }
                    (Some(b), None) => match b.as_str() {
                        "torus" => OrbifoldPresentation::torus(),
                        "pillowcase" => OrbifoldPresentation::pillowcase(),
                        other => {
                            return Err(ScenarioError::Unresolved {
                                line: sec.require("builtin")?.line,
                                name: other.to_string(),
                            })
                        }
                    },
                    (None, _) => {
                        let elements = sec
                            .all("element")
                            .map(parse_element)
                            .collect::<Result<Vec<_>, _>>()?;
                        if elements.is_empty() {
                            return Err(ScenarioError::Syntax {
                                line: sec.line,
                                message: "orbifold needs `builtin` or `element` lines".into(),
                            });
                        }
                        let action = GroupAction::new(elements).map_err(|err| ScenarioError::Invalid {
                            line: sec.line,
                            message: err.to_string(),
                        })?;
                        OrbifoldPresentation::new(&name, action)
                    }
                };
                presentation.name = name.clone();
                let basepoint_set = sec.get("basepoint").is_some();
                if let Some(e) = sec.get("basepoint") {
                    presentation = presentation
                        .with_basepoint(point(e, &e.value)?)
                        .map_err(|err| ScenarioError::Invalid {
                            line: e.line,
                            message: err.to_string(),
                        })?;
                }
                sc.orbifolds.push(OrbifoldDecl {
                    name,
                    builtin,
                    presentation,
                    basepoint_set,
                });
            }
            "form" => {
                sec.check_keys(&["orbifold", "linear", "override", "bump"])?;
                let name = sec.name()?;
                claim(&name, sec.line)?;
                let o = sec.require("orbifold")?;
                if !sc.orbifolds.iter().any(|d| d.name == o.value) {
                    return Err(ScenarioError::Unresolved {
                        line: o.line,
                        name: o.value.clone(),
                    });
                }
                let lin = sec.require("linear")?;
                let (a, b) = pair(lin, &lin.value)?;
                let mut form = ClosedForm::linear(expr(&sc.table, lin, a)?, expr(&sc.table, lin, b)?);
                if let Some(e) = sec.get("override") {
                    form.basic_override = boolean(e)?;
                }
                for e in sec.all("bump") {
                    form.bumps.push(parse_bump(&sc.table, e)?);
                }
                sc.forms.push(FormDecl {
                    name,
                    orbifold: o.value.clone(),
                    form,
                });
            }
            "surgery" => {
                sec.check_keys(&[
                    "kind",
                    "left",
                    "right",
                    "left.region",
                    "left.window",
                    "left.disk",
                    "right.region",
                    "right.window",
                    "right.disk",
                    "levels",
                ])?;
                let name = sec.name()?;
                claim(&name, sec.line)?;
                let k = sec.require("kind")?;
                let kind = match k.value.as_str() {
                    "A" | "a" => SurgeryKind::A,
                    "B" | "b" => SurgeryKind::B,
                    "C" | "c" => SurgeryKind::C,
                    _ => {
                        return Err(ScenarioError::Syntax {
                            line: k.line,
                            message: "kind is A, B or C".into(),
                        })
                    }
                };
                let mut inputs = Vec::new();
                for side in ["left", "right"] {
                    let e = sec.require(side)?;
                    let known = sc.forms.iter().any(|f| f.name == e.value)
                        || sc.surgeries.iter().any(|s| s.name == e.value);
                    if !known {
                        return Err(ScenarioError::Unresolved {
                            line: e.line,
                            name: e.value.clone(),
                        });
                    }
                    let used = sc
                        .surgeries
                        .iter()
                        .any(|s| s.left == e.value || s.right == e.value);
                    if used || inputs.contains(&e.value) {
                        return Err(ScenarioError::Invalid {
                            line: e.line,
                            message: format!("`{}` is already consumed by another surgery", e.value),
                        });
                    }
                    inputs.push(e.value.clone());
                }
                let lv = sec.require("levels")?;
                let (x, y) = pair(lv, &lv.value)?;
                sc.surgeries.push(SurgeryDecl {
                    name,
                    kind,
                    left: inputs[0].clone(),
                    right: inputs[1].clone(),
                    left_place: parse_placement(&sc.table, sec, "left")?,
                    right_place: parse_placement(&sc.table, sec, "right")?,
                    levels: (expr(&sc.table, lv, x)?, expr(&sc.table, lv, y)?),
                });
            }
            "trace" => {
                sec.check_keys(&["form", "seed", "step", "steps"])?;
                let defaults = TraceSettings::default();
                let f = sec.require("form")?;
                if !sc.forms.iter().any(|d| d.name == f.value) {
                    return Err(ScenarioError::Unresolved {
                        line: f.line,
                        name: f.value.clone(),
                    });
                }
                let seed = match sec.get("seed") {
                    Some(e) => {
                        let (a, b) = pair(e, &e.value)?;
                        (rational(e, a)?, rational(e, b)?)
                    }
                    None => {
                        let o = &sc
                            .orbifolds
                            .iter()
                            .find(|o| Some(&o.name) == sc.forms.iter().find(|d| d.name == f.value).map(|d| &d.orbifold))
                            .expect("resolved orbifold")
                            .presentation
                            .basepoint;
                        (o.theta.clone(), o.phi.clone())
                    }
                };
                sc.trace = Some(TraceDecl {
                    form: f.value.clone(),
                    seed,
                    step: sec.get("step").map(number).transpose()?.unwrap_or(defaults.step),
                    steps: sec.get("steps").map(number).transpose()?.unwrap_or(defaults.max_steps),
                });
            }
            "expect" => {
                sec.check_keys(&["transitive", "leaves", "compact_singular_components", "harmonic"])?;
                let mut ex = Expectation::default();
                if let Some(e) = sec.get("transitive") {
                    ex.transitive = Some(boolean(e)?);
                }
                if let Some(e) = sec.get("harmonic") {
                    ex.harmonic = Some(boolean(e)?);
                }
                if let Some(e) = sec.get("leaves") {
                    ex.leaves = Some(LeafMix::parse(&e.value).ok_or_else(|| ScenarioError::Syntax {
                        line: e.line,
                        message: "leaves is compact, noncompact, mixed or some-compact".into(),
                    })?);
                }
                if let Some(e) = sec.get("compact_singular_components") {
                    ex.compact_singular_components = Some(number(e)?);
                }
                sc.expect = Some(ex);
            }
            "output" => {
                sec.check_keys(&["dot", "svg"])?;
                sc.output.dot = sec.get("dot").map(|e| e.value.clone());
                sc.output.svg = sec.get("svg").map(|e| e.value.clone());
            }
            other => {
                return Err(ScenarioError::Syntax {
                    line: sec.line,
                    message: format!("unknown section `[{other}]`"),
                })
            }
        }
    }
    if sc.forms.is_empty() {
        return Err(ScenarioError::Syntax {
            line: 1,
            message: "scenario declares no form".into(),
        });
    }
    if let Some(t) = &sc.target {
        let known = sc.forms.iter().any(|f| &f.name == t) || sc.surgeries.iter().any(|s| &s.name == t);
        if !known {
            return Err(ScenarioError::Unresolved {
                line: target_line,
                name: t.clone(),
            });
        }
    }
    Ok(sc)
}

fn render_point(p: &TorusPoint) -> String {
    format!("{}, {}", p.theta, p.phi)
}

impl Scenario {
    pub fn serialize(&self) -> String {
        let t = &self.table;
        let mut out = String::new();
        if self.title.is_some() || self.target.is_some() {
            out.push_str("[scenario]\n");
            if let Some(v) = &self.title {
                let _ = writeln!(out, "title = {v}");
            }
            if let Some(v) = &self.target {
                let _ = writeln!(out, "target = {v}");
            }
            out.push('\n');
        }
        if t.len() > 1 {
            out.push_str("[symbols]\n");
            for s in &t.symbols()[1..] {
                let _ = writeln!(out, "{} = {}", s.name, s.source);
            }
            out.push('\n');
        }
        for o in &self.orbifolds {
            let _ = writeln!(out, "[orbifold {}]", o.name);
            match &o.builtin {
                Some(b) => {
                    let _ = writeln!(out, "builtin = {b}");
                }
                None => {
                    for g in o.presentation.action.elements() {
                        let m = g.matrix;
                        let _ = writeln!(
                            out,
                            "element = {} {} {} {} ; {} {}",
                            m[0][0], m[0][1], m[1][0], m[1][1], g.offset[0], g.offset[1]
                        );
                    }
                }
            }
            if o.basepoint_set {
                let _ = writeln!(out, "basepoint = {}", render_point(&o.presentation.basepoint));
            }
            out.push('\n');
        }
        for f in &self.forms {
            let _ = writeln!(out, "[form {}]", f.name);
            let _ = writeln!(out, "orbifold = {}", f.orbifold);
            let _ = writeln!(
                out,
                "linear = {}, {}",
                t.render(&f.form.linear.0),
                t.render(&f.form.linear.1)
            );
            if f.form.basic_override {
                out.push_str("override = true\n");
            }
            for b in &f.form.bumps {
                let _ = writeln!(
                    out,
                    "bump = {} ; {} ; {}",
                    render_point(&b.center),
                    b.radius,
                    t.render(&b.amplitude)
                );
            }
            out.push('\n');
        }
        for s in &self.surgeries {
            let _ = writeln!(out, "[surgery {}]", s.name);
            let _ = writeln!(out, "kind = {}", s.kind);
            let _ = writeln!(out, "left = {}", s.left);
            let _ = writeln!(out, "right = {}", s.right);
            for (side, p) in [("left", &s.left_place), ("right", &s.right_place)] {
                let _ = writeln!(out, "{side}.region = {}", p.region);
                let _ = writeln!(out, "{side}.window = {}, {}", t.render(&p.window.0), t.render(&p.window.1));
                if let Some(d) = &p.disk {
                    let _ = writeln!(out, "{side}.disk = {} ; {}", render_point(&d.center), d.radius);
                }
            }
            let _ = writeln!(out, "levels = {}, {}", t.render(&s.levels.0), t.render(&s.levels.1));
            out.push('\n');
        }
        if let Some(tr) = &self.trace {
            out.push_str("[trace]\n");
            let _ = writeln!(out, "form = {}", tr.form);
            let _ = writeln!(out, "seed = {}, {}", tr.seed.0, tr.seed.1);
            let _ = writeln!(out, "step = {}", tr.step);
            let _ = writeln!(out, "steps = {}", tr.steps);
            out.push('\n');
        }
        if let Some(ex) = &self.expect {
            out.push_str("[expect]\n");
            if let Some(v) = ex.transitive {
                let _ = writeln!(out, "transitive = {v}");
            }
            if let Some(v) = ex.leaves {
                let _ = writeln!(out, "leaves = {}", v.as_str());
            }
            if let Some(v) = ex.compact_singular_components {
                let _ = writeln!(out, "compact_singular_components = {v}");
            }
            if let Some(v) = ex.harmonic {
                let _ = writeln!(out, "harmonic = {v}");
            }
            out.push('\n');
        }
        if self.output.dot.is_some() || self.output.svg.is_some() {
            out.push_str("[output]\n");
            if let Some(v) = &self.output.dot {
                let _ = writeln!(out, "dot = {v}");
            }
            if let Some(v) = &self.output.svg {
                let _ = writeln!(out, "svg = {v}");
            }
        }
        while out.ends_with("\n\n") {
            out.pop();
        }
        out
    }

    pub fn orbifold(&self, name: &str) -> Option<&OrbifoldPresentation> {
        self.orbifolds
            .iter()
            .find(|o| o.name == name)
            .map(|o| &o.presentation)
    }

    pub fn form(&self, name: &str) -> Option<&FormDecl> {
        self.forms.iter().find(|f| f.name == name)
    }

    /// Name of the model reports describe: the declared target, else the
    /// last surgery, else the first form.
    pub fn target_name(&self) -> String {
        self.target
            .clone()
            .or_else(|| self.surgeries.last().map(|s| s.name.clone()))
            .unwrap_or_else(|| self.forms[0].name.clone())
    }

    /// Builds every form model and applies the surgeries in order.
    pub fn build(&self, ceiling: u32) -> Result<BTreeMap<String, FoliationModel>, ScenarioError> {
        let mut models = BTreeMap::new();
        for f in &self.forms {
            let o = self.orbifold(&f.orbifold).expect("resolved at parse time").clone();
            let m = FoliationModel::single(&f.name, o, f.form.clone(), &self.table)?.with_ceiling(ceiling)?;
            models.insert(f.name.clone(), m);
        }
        for s in &self.surgeries {
            let left = models.get(&s.left).expect("resolved at parse time").clone();
            let right = models.get(&s.right).expect("resolved at parse time").clone();
            let m = connected_sum(SurgerySpec {
                name: s.name.clone(),
                kind: s.kind,
                left,
                left_disk: s.left_place.clone(),
                right,
                right_disk: s.right_place.clone(),
                tube_levels: s.levels.clone(),
            })?;
            models.insert(s.name.clone(), m);
        }
        Ok(models)
    }

    pub fn target_model(&self, ceiling: u32) -> Result<FoliationModel, ScenarioError> {
        let mut models = self.build(ceiling)?;
        Ok(models.remove(&self.target_name()).expect("target resolved at parse time"))
    }
}
