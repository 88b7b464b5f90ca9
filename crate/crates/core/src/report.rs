//! Command execution and deterministic text reports.

use std::fmt::Write as _;

use thiserror::Error;

use crate::catalog;
use crate::forms::{self, FormError};
use crate::graph::{self, VertexKind};
use crate::leaves::{self, LeafError, TraceSettings, TraceVerdict};
use crate::orbifold::{NumericPoint, TorusPoint};
use crate::scalar::{rational_to_f64, Rational, ScalarError};
use crate::scenario::{parse_scenario, Expectation, LeafMix, Scenario, ScenarioError};
use crate::surgery::{self, FoliationModel, SurgeryError};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Periods,
    Classify,
    Decompose,
    Graph,
    Transitivity,
    Harmonic,
    Trace,
    Surgery,
    Examples,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("model: {0}")]
    Model(#[from] SurgeryError),
    #[error("leaf tracing: {0}")]
    Leaf(#[from] LeafError),
    #[error("{0}")]
    Usage(String),
}

fn scalar_is_numeric(e: &ScalarError) -> bool {
    matches!(e, ScalarError::PrecisionExhausted { .. })
}

fn form_is_numeric(e: &FormError) -> bool {
    matches!(e, FormError::Scalar(s) if scalar_is_numeric(s))
}

impl RunError {
    /// 2 for scenario and model errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        let numeric = match self {
            RunError::Scenario(ScenarioError::Build(e)) | RunError::Model(e) => match e {
                SurgeryError::Scalar(s) => scalar_is_numeric(s),
                SurgeryError::Form(f) => form_is_numeric(f),
                _ => false,
            },
            RunError::Leaf(LeafError::StepTooLarge { .. }) => true,
            RunError::Leaf(LeafError::Form(f)) => form_is_numeric(f),
            _ => false,
        };
        if numeric {
            3
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: Option<(Rational, Rational)>,
    pub steps: Option<usize>,
    pub precision: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub text: String,
    pub dot: Option<String>,
    pub svg: Option<String>,
    /// 0 ok, 1 examples mismatch, 3 tracer gave no verdict.
    pub status: i32,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        Some(match s {
            "periods" => Command::Periods,
            "classify" => Command::Classify,
            "decompose" => Command::Decompose,
            "graph" => Command::Graph,
            "transitivity" => Command::Transitivity,
            "harmonic" => Command::Harmonic,
            "trace" => Command::Trace,
            "surgery" => Command::Surgery,
            "examples" => Command::Examples,
            _ => return None,
        })
    }
}

/// Loads scenario text from a path, or a built-in entry via `builtin:<name>`.
pub fn load(source: &str) -> Result<String, RunError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return catalog::find(name)
            .map(|e| e.text.to_string())
            .ok_or_else(|| RunError::Usage(format!("no built-in scenario `{name}`")));
    }
    std::fs::read_to_string(source).map_err(|e| RunError::Usage(format!("cannot read `{source}`: {e}")))
}

pub fn run(cmd: Command, scenario: Option<&Scenario>, opts: &Options) -> Result<Output, RunError> {
    let ceiling = opts.precision.unwrap_or(crate::scalar::DEFAULT_PRECISION_CEILING);
    if cmd == Command::Examples {
        return examples(ceiling);
    }
    let sc = scenario.ok_or_else(|| RunError::Usage("this command needs a scenario file".into()))?;
    if cmd == Command::Trace {
        return trace(sc, opts);
    }
    let model = sc.target_model(ceiling)?;
    let mut out = Output::default();
    let t = &mut out.text;
    header(t, sc, &model);
    match cmd {
        Command::Periods => {
            basicness(t, &model);
            periods(t, &model);
        }
        Command::Classify => {
            zeros(t, &model);
            classification(t, &model);
        }
        Command::Decompose => decomposition(t, &model),
        Command::Graph => {
            graph_stats(t, &model)?;
            out.dot = Some(graph::to_dot(&model.graph, &model.table));
        }
        Command::Transitivity => {
            graph_stats(t, &model)?;
            transitivity(t, &model)?;
        }
        Command::Harmonic => {
            transitivity(t, &model)?;
            harmonic(t, &model)?;
        }
        Command::Surgery => {
            basicness(t, &model);
            zeros(t, &model);
            periods(t, &model);
            classification(t, &model);
            decomposition(t, &model);
            graph_stats(t, &model)?;
            transitivity(t, &model)?;
            harmonic(t, &model)?;
            witness(t, &model);
            if let Some(ex) = &sc.expect {
                let (lines, _) = compare(ex, &model)?;
                t.push_str("== expectations ==\n");
                t.push_str(&lines);
            }
            out.dot = Some(graph::to_dot(&model.graph, &model.table));
        }
        Command::Trace | Command::Examples => unreachable!(),
    }
    Ok(out)
}

fn header(t: &mut String, sc: &Scenario, model: &FoliationModel) {
    t.push_str("== scenario ==\n");
    if let Some(title) = &sc.title {
        let _ = writeln!(t, "title: {title}");
    }
    let _ = writeln!(t, "target: {}", sc.target_name());
    for s in &model.summands {
        let _ = writeln!(
            t,
            "summand {}: orbifold {} (group order {}), form {} dθ + {} dφ",
            s.name,
            s.orbifold.name,
            s.orbifold.action.order(),
            model.table.render(&s.form.linear.0),
            model.table.render(&s.form.linear.1)
        );
    }
    for r in &model.surgeries {
        let _ = writeln!(
            t,
            "surgery {}: kind {} joining regions {} and {}, tube levels {} and {}",
            r.name,
            r.kind,
            r.left.region,
            r.right.region,
            model.table.render(&r.tube_levels.0),
            model.table.render(&r.tube_levels.1)
        );
    }
}

fn basicness(t: &mut String, model: &FoliationModel) {
    t.push_str("== basicness ==\n");
    for s in &model.summands {
        let honest = forms::honest_basic(&s.form, &s.orbifold);
        let _ = write!(
            t,
            "{}: invariant under every group element: {honest} (check: pullback by each affine element)",
            s.name
        );
        if !honest && s.form.basic_override {
            t.push_str("; proceeding under the declared-basic override\n");
        } else {
            t.push('\n');
        }
    }
}

fn zeros(t: &mut String, model: &FoliationModel) {
    t.push_str("== zeros ==\n");
    if model.zeros().is_empty() {
        t.push_str("none\n");
    }
    for z in model.zeros() {
        let _ = writeln!(
            t,
            "{} on {}: index {}, isotropy {}, level {}",
            z.id,
            z.host,
            z.index,
            z.isotropy_order,
            model.table.render(&z.level)
        );
    }
}

fn periods(t: &mut String, model: &FoliationModel) {
    t.push_str("== periods ==\n");
    for (g, v) in model.periods() {
        let _ = writeln!(t, "Per({g}) = {}", model.table.render(&v));
    }
    let _ = writeln!(t, "rank: {} (Q-rank of the period group, exact elimination)", model.rank());
}

fn classification(t: &mut String, model: &FoliationModel) {
    t.push_str("== leaves ==\n");
    for l in &model.catalog {
        let _ = write!(t, "{}: {:?}, representative {}", l.id, l.kind, l.representative);
        if !l.zeros.is_empty() {
            let _ = write!(t, ", zeros {}", l.zeros.join(" "));
        }
        for (c, compact) in &l.components {
            let _ = write!(t, ", component {c} {}", if *compact { "compact" } else { "noncompact" });
        }
        t.push('\n');
    }
    let _ = writeln!(
        t,
        "compact regular leaves: {}; noncompact regular leaves: {} (compact iff the leaf family closes up with rational period ratio)",
        model.has_compact_leaf(),
        model.has_noncompact_leaf()
    );
}

fn units(v: &[leaves::Unit]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(" ")
}

fn decomposition(t: &mut String, model: &FoliationModel) {
    let d = &model.decomposition;
    t.push_str("== decomposition ==\n");
    let _ = writeln!(t, "X_c: {}", units(&d.x_c));
    for c in &d.x_inf {
        let rank = c.restricted_rank.map_or("none".to_string(), |r| r.to_string());
        let _ = writeln!(t, "X_inf[{}]: {} (restricted rank {rank})", c.special, units(&c.units));
    }
    if d.x_inf.is_empty() {
        t.push_str("X_inf: -\n");
    }
    let _ = writeln!(t, "boundary: {}", units(&d.boundary));
    let verdict = match d.check(&model.catalog) {
        Ok(()) => "exact".to_string(),
        Err(e) => format!("violated: {e}"),
    };
    let _ = writeln!(
        t,
        "coverage: {verdict} (X_c, X_inf and boundary partition the leaf components; boundary = compact components of noncompact singular leaves)"
    );
}

fn graph_stats(t: &mut String, model: &FoliationModel) -> Result<(), RunError> {
    let g = &model.graph;
    t.push_str("== graph ==\n");
    let count = |f: fn(&VertexKind) -> bool| g.vertices.iter().filter(|v| f(&v.kind)).count();
    let _ = writeln!(
        t,
        "vertices: {} (zero {}, special {}, marker {}, terminal {}); edges: {}",
        g.vertices.len(),
        count(|k| matches!(k, VertexKind::Zero(_))),
        count(|k| matches!(k, VertexKind::Special(_))),
        count(|k| matches!(k, VertexKind::Marker(_))),
        count(|k| matches!(k, VertexKind::Terminal(..))),
        g.edges.len()
    );
    match graph::is_calabi(g) {
        Ok(c) => {
            let _ = writeln!(
                t,
                "calabi: {c} (every edge lies on a directed cycle of the connected graph; strongly connected components)"
            );
        }
        Err(e) => {
            let _ = writeln!(t, "calabi: undefined ({e})");
        }
    }
    Ok(())
}

fn transitivity(t: &mut String, model: &FoliationModel) -> Result<(), RunError> {
    let r = surgery::transitivity(model)?;
    t.push_str("== transitivity ==\n");
    match r.raw_calabi {
        None => {
            let _ = writeln!(
                t,
                "transitive: {} (no zeros: transitive iff the form is nonzero)",
                r.transitive
            );
        }
        Some(raw) => {
            let _ = writeln!(t, "calabi on the graph as built: {raw}");
            if r.genericized.is_some() {
                t.push_str("levels separated by make_generic before testing\n");
            }
            let _ = writeln!(
                t,
                "transitive: {} (transitive iff the graph of the generic form is Calabi)",
                r.transitive
            );
        }
    }
    if r.derived_only {
        t.push_str("note: kind A with exactly one transitive input; verdict comes from the graph test alone, no general rule covers this case\n");
    }
    Ok(())
}

fn harmonic(t: &mut String, model: &FoliationModel) -> Result<(), RunError> {
    let h = surgery::harmonicity_verdict(model)?;
    t.push_str("== harmonicity ==\n");
    let _ = writeln!(
        t,
        "{h} (intrinsically harmonic iff transitive; no metric is constructed)"
    );
    Ok(())
}

fn witness(t: &mut String, model: &FoliationModel) {
    t.push_str("== witness ==\n");
    match graph::factorization_witness(model) {
        None => t.push_str("absent (some leaf is noncompact, so periods do not factor through a graph)\n"),
        Some(w) => {
            for c in &w.checks {
                let _ = writeln!(
                    t,
                    "Per({}) = {} ; W(ψ∘{}) = {} ; {}",
                    c.generator,
                    model.table.render(&c.period),
                    c.generator,
                    model.table.render(&c.graph_value),
                    if c.period == c.graph_value { "equal" } else { "DIFFERENT" }
                );
            }
            let _ = writeln!(
                t,
                "free rank {} >= period rank {}: {}",
                w.free_rank,
                w.period_rank,
                w.free_rank >= w.period_rank
            );
            let _ = writeln!(t, "sound: {} (periods factor through the graph cocycle)", w.is_sound());
        }
    }
}

fn compact_singular_components(model: &FoliationModel) -> usize {
    model
        .catalog
        .iter()
        .filter(|l| l.kind.is_singular())
        .map(|l| l.components.iter().filter(|c| c.1).count())
        .sum()
}

fn observed_mix(model: &FoliationModel) -> &'static str {
    [LeafMix::Compact, LeafMix::Mixed, LeafMix::Noncompact]
        .into_iter()
        .find(|m| m.holds(model))
        .map_or("other", |m| m.as_str())
}

/// Compares a model with an expectation, one line per stated field.
pub fn compare(ex: &Expectation, model: &FoliationModel) -> Result<(String, bool), RunError> {
    let mut t = String::new();
    let mut ok = true;
    let mut line = |name: &str, got: String, want: String, hit: bool| {
        ok &= hit;
        let _ = writeln!(t, "{name}: {got} (expected {want}) {}", if hit { "ok" } else { "MISMATCH" });
    };
    if let Some(want) = ex.transitive {
        let got = surgery::is_transitive(model)?;
        line("transitive", got.to_string(), want.to_string(), got == want);
    }
    if let Some(want) = ex.leaves {
        line("leaves", observed_mix(model).into(), want.as_str().into(), want.holds(model));
    }
    if let Some(want) = ex.compact_singular_components {
        let got = compact_singular_components(model);
        line("compact singular components", got.to_string(), want.to_string(), got == want);
    }
    if let Some(want) = ex.harmonic {
        let got = surgery::harmonicity_verdict(model)? == surgery::Harmonicity::IntrinsicallyHarmonic;
        line("harmonic", got.to_string(), want.to_string(), got == want);
    }
    Ok((t, ok))
}

fn examples(ceiling: u32) -> Result<Output, RunError> {
    let mut out = Output::default();
    let (mut total, mut matched) = (0, 0);
    for e in catalog::rows() {
        total += 1;
        let sc = parse_scenario(e.text)?;
        let model = sc.target_model(ceiling)?;
        let ex = sc.expect.clone().unwrap_or_default();
        let (lines, ok) = compare(&ex, &model)?;
        let _ = writeln!(out.text, "== {} ==", e.name);
        out.text.push_str(&lines);
        if ok {
            matched += 1;
        }
    }
    let _ = writeln!(out.text, "{matched}/{total} rows match");
    if matched != total {
        out.status = 1;
    }
    Ok(out)
}

fn trace(sc: &Scenario, opts: &Options) -> Result<Output, RunError> {
    let decl = sc.trace.clone();
    let form_name = decl.as_ref().map_or_else(|| sc.forms[0].name.clone(), |d| d.form.clone());
    let fd = sc.form(&form_name).expect("resolved at parse time");
    let orbifold = sc.orbifold(&fd.orbifold).expect("resolved at parse time");
    let mut settings = TraceSettings::default();
    if let Some(d) = &decl {
        settings.step = d.step;
        settings.max_steps = d.steps;
    }
    if let Some(n) = opts.steps {
        settings.max_steps = n;
    }
    let seed = opts
        .seed
        .clone()
        .or_else(|| decl.as_ref().map(|d| d.seed.clone()))
        .unwrap_or_else(|| (orbifold.basepoint.theta.clone(), orbifold.basepoint.phi.clone()));
    let exact_seed = TorusPoint::new(seed.0.clone(), seed.1.clone());
    let exact = leaves::classify_leaf(&fd.form, orbifold, &sc.table, &exact_seed)?;
    let start = NumericPoint::new(rational_to_f64(&seed.0), rational_to_f64(&seed.1));
    let res = leaves::trace_leaf(&fd.form, orbifold, &sc.table, start, &settings)?;
    let mut out = Output::default();
    let t = &mut out.text;
    t.push_str("== trace ==\n");
    let _ = writeln!(t, "form: {form_name} on {}", orbifold.name);
    let _ = writeln!(t, "seed: {exact_seed}");
    let _ = writeln!(t, "step: {}; steps taken: {}", settings.step, res.steps);
    let _ = writeln!(t, "exact class: {:?} (compact iff the period ratio is rational)", exact.kind);
    match &res.verdict {
        TraceVerdict::Closed { length } => {
            let _ = writeln!(
                t,
                "numeric: closed, length {length:.6}, return error {:.3e} (returned to the seed orbit)",
                res.return_error
            );
        }
        TraceVerdict::DenseEvidence { coverage, epsilon } => {
            let _ = writeln!(
                t,
                "numeric: dense evidence, coverage {:.2}% at epsilon {epsilon} (grid cells visited)",
                coverage * 100.0
            );
        }
        TraceVerdict::Inconclusive => {
            t.push_str("numeric: inconclusive (neither closed nor dense within the step budget)\n");
            out.status = 3;
        }
    }
    let singular: Vec<NumericPoint> = orbifold.singular_points().iter().map(|p| p.to_numeric()).collect();
    let zeros: Vec<NumericPoint> = fd.form.bumps.iter().map(|b| b.center.to_numeric()).collect();
    out.svg = Some(svg::render(&[res.polyline], &zeros, &singular));
    Ok(out)
}
