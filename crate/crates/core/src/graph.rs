//! The foliation graph `Γ̄_ω`: compact leaf families as weighted edges,
//! zeros and `X_∞` components as vertices.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::scalar::{q_rank, Sign, SymScalar, SymbolTable};
use crate::surgery::{End, FoliationModel, Structure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph is empty")]
    Empty,
    #[error("graph is not connected")]
    Disconnected,
    #[error("brute-force search limited to {limit} vertices, got {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("edge family `{0}` has nonpositive weight")]
    NonPositiveWeight(String),
    #[error("no edge with id {0}")]
    UnknownEdge(usize),
}

pub const BRUTEFORCE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexKind {
    /// Zeros whose singular leaf is compact and changes connectivity.
    Zero(Vec<String>),
    /// Index 0 or n zero.
    Terminal(String, u8),
    Special(String),
    /// Placeholder on a vertex-free circle family.
    Marker(String),
}

impl VertexKind {
    pub fn label(&self) -> &'static str {
        match self {
            VertexKind::Zero(_) => "Zero",
            VertexKind::Terminal(..) => "Terminal",
            VertexKind::Special(_) => "Special",
            VertexKind::Marker(_) => "Marker",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub id: usize,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub weight: SymScalar,
    pub family: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FoliationGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl FoliationGraph {
    /// A bare digraph with unit weights, for property tests.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Self {
        FoliationGraph {
            vertices: (0..n)
                .map(|id| Vertex {
                    id,
                    kind: VertexKind::Zero(vec![format!("z{id}")]),
                })
                .collect(),
            edges: arcs
                .iter()
                .enumerate()
                .map(|(id, &(src, dst))| Edge {
                    id,
                    src,
                    dst,
                    weight: SymScalar::from_int(1),
                    family: format!("e{id}"),
                })
                .collect(),
        }
    }

    pub fn to_petgraph(&self) -> DiGraph<usize, usize> {
        let mut g = DiGraph::new();
        let nodes: Vec<_> = self.vertices.iter().map(|v| g.add_node(v.id)).collect();
        for e in &self.edges {
            g.add_edge(nodes[e.src], nodes[e.dst], e.id);
        }
        g
    }

    pub fn family_edge(&self, family: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.family == family)
    }

    pub fn count(&self, label: &str) -> usize {
        self.vertices.iter().filter(|v| v.kind.label() == label).count()
    }

    fn undirected_connected(&self) -> bool {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.src].push(e.dst);
            adj[e.dst].push(e.src);
        }
        bfs(&adj, 0).iter().all(|&r| r)
    }
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Graph of a replayed structure.
pub fn graph_from_structure(st: &Structure) -> FoliationGraph {
    let mut vertices = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for s in st.live_specials() {
        index.insert(format!("special:{s}"), vertices.len());
        vertices.push(Vertex {
            id: vertices.len(),
            kind: VertexKind::Special(s),
        });
    }
    for (key, _) in &st.vertices {
        match st.vertex_special(key) {
            Some(s) => {
                let v = index[&format!("special:{s}")];
                index.insert(format!("zero:{key}"), v);
            }
            None => {
                let zeros: Vec<String> = st
                    .zero_vertex
                    .iter()
                    .filter(|(_, k)| *k == key)
                    .map(|(z, _)| z.clone())
                    .collect();
                index.insert(format!("zero:{key}"), vertices.len());
                vertices.push(Vertex {
                    id: vertices.len(),
                    kind: VertexKind::Zero(zeros),
                });
            }
        }
    }
    let mut edges = Vec::new();
    for e in &st.edges {
        let resolve = |end: &End, vertices: &mut Vec<Vertex>, index: &mut BTreeMap<String, usize>| match end {
            End::Zero(z) => index[&format!("zero:{}", st.zero_vertex[z])],
            End::Free => *index.entry(format!("marker:{}", e.name)).or_insert_with(|| {
                vertices.push(Vertex {
                    id: vertices.len(),
                    kind: VertexKind::Marker(e.name.clone()),
                });
                vertices.len() - 1
            }),
        };
        let src = resolve(&e.src, &mut vertices, &mut index);
        let dst = resolve(&e.dst, &mut vertices, &mut index);
        edges.push(Edge {
            id: edges.len(),
            src,
            dst,
            weight: e.weight.clone(),
            family: e.name.clone(),
        });
    }
    FoliationGraph { vertices, edges }
}

/// `Γ̄_ω` of a model, with weight positivity verified.
pub fn build_graph(model: &FoliationModel) -> Result<FoliationGraph, GraphError> {
    let g = graph_from_structure(&model.structure);
    for e in &g.edges {
        if e.weight.sign(&model.table, model.ceiling) != Ok(Sign::Pos) {
            return Err(GraphError::NonPositiveWeight(e.family.clone()));
        }
    }
    Ok(g)
}

pub fn edge_weight(graph: &FoliationGraph, edge: usize) -> Result<SymScalar, GraphError> {
    graph
        .edges
        .get(edge)
        .map(|e| e.weight.clone())
        .ok_or(GraphError::UnknownEdge(edge))
}

/// Every ordered pair of vertices is joined by a positive walk.
pub fn is_calabi(graph: &FoliationGraph) -> Result<bool, GraphError> {
    if graph.vertices.is_empty() {
        return Err(GraphError::Empty);
    }
    if !graph.undirected_connected() {
        return Err(GraphError::Disconnected);
    }
    Ok(kosaraju_scc(&graph.to_petgraph()).len() == 1)
}

fn out_adjacency(graph: &FoliationGraph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); graph.vertices.len()];
    for e in &graph.edges {
        adj[e.src].push(e.dst);
    }
    adj
}

fn check_small(graph: &FoliationGraph) -> Result<(), GraphError> {
    let n = graph.vertices.len();
    if n > BRUTEFORCE_LIMIT {
        return Err(GraphError::TooLarge {
            n,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    if n == 0 {
        return Err(GraphError::Empty);
    }
    Ok(())
}

/// `(cond1, cond2)`: all-pairs positive walks, and every edge on a positive
/// closed walk. Both by explicit search.
pub fn calabi_equiv_bruteforce(graph: &FoliationGraph) -> Result<(bool, bool), GraphError> {
    check_small(graph)?;
    let adj = out_adjacency(graph);
    let reach: Vec<Vec<bool>> = (0..adj.len()).map(|v| bfs(&adj, v)).collect();
    let cond1 = (0..adj.len()).all(|a| (0..adj.len()).all(|b| reach[a][b]));
    let cond2 = graph.undirected_connected() && graph.edges.iter().all(|e| reach[e.dst][e.src]);
    Ok((cond1, cond2))
}

/// Every vertex lies on some positive closed walk.
pub fn every_vertex_on_closed_walk(graph: &FoliationGraph) -> Result<bool, GraphError> {
    check_small(graph)?;
    let adj = out_adjacency(graph);
    Ok((0..adj.len()).all(|v| {
        adj[v].iter().any(|&w| bfs(&adj, w)[v])
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessCheck {
    pub generator: String,
    pub period: SymScalar,
    pub graph_value: SymScalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorizationWitness {
    pub graph: FoliationGraph,
    pub cocycle: Vec<(String, SymScalar)>,
    pub checks: Vec<WitnessCheck>,
    pub free_rank: usize,
    pub period_rank: usize,
}

impl FactorizationWitness {
    pub fn is_sound(&self) -> bool {
        self.checks.iter().all(|c| c.period == c.graph_value) && self.free_rank >= self.period_rank
    }
}

/// `Per_ξ = W ∘ ψ_*` when every leaf is compact: each generator loop is
/// projected to a walk around its summand's circle of leaves.
pub fn factorization_witness(model: &FoliationModel) -> Option<FactorizationWitness> {
    if !model.all_leaves_compact() {
        return None;
    }
    let st = &model.structure;
    let graph = graph_from_structure(st);
    let mut checks = Vec::new();
    for (i, summand) in model.summands.iter().enumerate() {
        let turn = st.turns[i].as_ref()?;
        let weights: Vec<SymScalar> = turn
            .iter()
            .map(|f| st.edge(f).map(|e| e.weight.clone()))
            .collect::<Option<_>>()?;
        let circle = weights.iter().fold(SymScalar::zero(), |a, w| a + w.clone());
        let (a, b) = &summand.form.linear;
        let x0 = &summand.orbifold.basepoint;
        let l0 = a.scale(&x0.theta) + b.scale(&x0.phi);
        let start = l0.rational_ratio(&circle)?.floor();
        for (id, period) in &st.generators[i] {
            let end = (l0.clone() + period.clone()).rational_ratio(&circle)?.floor();
            let count = end - &start;
            checks.push(WitnessCheck {
                generator: id.clone(),
                period: period.clone(),
                graph_value: circle.scale(&count),
            });
        }
    }
    let cocycle = graph
        .edges
        .iter()
        .map(|e| (e.family.clone(), e.weight.clone()))
        .collect();
    let free_rank = (graph.edges.len() + 1).saturating_sub(graph.vertices.len());
    Some(FactorizationWitness {
        cocycle,
        checks,
        free_rank,
        period_rank: q_rank(&st.all_periods()),
        graph,
    })
}

/// DOT text; vertex and edge order follow the graph's ids.
pub fn to_dot(graph: &FoliationGraph, table: &SymbolTable) -> String {
    let mut out = String::from("digraph foliation {\n");
    for v in &graph.vertices {
        let _ = writeln!(out, "v{} [kind=\"{}\"];", v.id, v.kind.label());
    }
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "v{} -> v{} [label=\"{}\"];",
            e.src,
            e.dst,
            table.render(&e.weight)
        );
    }
    out.push_str("}\n");
    out
}

/// Strongly connected components as vertex id lists, for reports.
pub fn components(graph: &FoliationGraph) -> Vec<Vec<usize>> {
    let g = graph.to_petgraph();
    let mut comps: Vec<Vec<usize>> = kosaraju_scc(&g)
        .into_iter()
        .map(|c| {
            let mut ids: Vec<usize> = c.into_iter().map(|n| g[n]).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    comps.sort();
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calabi_examples() {
        let cycle = FoliationGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(is_calabi(&cycle).unwrap());
        assert_eq!(calabi_equiv_bruteforce(&cycle).unwrap(), (true, true));
        let joined = FoliationGraph::from_arcs(4, &[(0, 1), (1, 0), (2, 3), (3, 2), (1, 2)]);
        assert!(!is_calabi(&joined).unwrap());
        assert_eq!(calabi_equiv_bruteforce(&joined).unwrap(), (false, false));
        let single = FoliationGraph::from_arcs(2, &[(0, 1)]);
        assert_eq!(calabi_equiv_bruteforce(&single).unwrap(), (false, false));
    }

    #[test]
    fn per_vertex_reading_differs() {
        let joined = FoliationGraph::from_arcs(4, &[(0, 1), (1, 0), (2, 3), (3, 2), (1, 2)]);
        assert!(every_vertex_on_closed_walk(&joined).unwrap());
        assert!(!is_calabi(&joined).unwrap());
    }

    #[test]
    fn disconnected_and_oversized() {
        let two = FoliationGraph::from_arcs(2, &[(0, 0), (1, 1)]);
        assert_eq!(is_calabi(&two), Err(GraphError::Disconnected));
        assert_eq!(is_calabi(&FoliationGraph::default()), Err(GraphError::Empty));
        let big = FoliationGraph::from_arcs(13, &[]);
        assert!(matches!(calabi_equiv_bruteforce(&big), Err(GraphError::TooLarge { .. })));
        let lone = FoliationGraph::from_arcs(1, &[]);
        assert!(is_calabi(&lone).unwrap());
    }

    #[test]
    fn dot_grammar() {
        let t = SymbolTable::new();
        let g = FoliationGraph::from_arcs(1, &[(0, 0)]);
        assert_eq!(
            to_dot(&g, &t),
            "digraph foliation {\nv0 [kind=\"Zero\"];\nv0 -> v0 [label=\"1\"];\n}\n"
        );
    }
}
