//! Causal DAGs over named nodes, d-separation, and the structural proxy
//! conditions.
//!
//! d-separation is answered with a reachability sweep over
//! `(node, direction)` states, so a query costs `O(V + E)`. Witness paths for
//! failed conditions come from a separate depth-first search that extends
//! simple paths in node-name order and prunes as soon as a triple is blocked.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed acyclic graph over uniquely named nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl CausalDag {
    /// Builds a graph from explicit node declarations and `(parent, child)`
    /// edges. Every edge endpoint must be declared.
    pub fn new<N, S, E, P, C>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = S>,
        S: Into<String>,
        E: IntoIterator<Item = (P, C)>,
        P: AsRef<str>,
        C: AsRef<str>,
    {
        let mut dag = CausalDag {
            names: Vec::new(),
            index: HashMap::new(),
            parents: Vec::new(),
            children: Vec::new(),
            edges: Vec::new(),
        };
        for name in nodes {
            dag.push_node(name.into())?;
        }
        for (p, c) in edges {
            dag.push_edge(p.as_ref(), c.as_ref())?;
        }
        dag.check_acyclic()?;
        Ok(dag)
    }

    /// Builds a graph from edges alone; nodes are declared in order of first
    /// appearance.
    pub fn from_edges<P, C>(edges: &[(P, C)]) -> Result<Self>
    where
        P: AsRef<str>,
        C: AsRef<str>,
    {
        let mut nodes: Vec<String> = Vec::new();
        for (p, c) in edges {
            for n in [p.as_ref(), c.as_ref()] {
                if !nodes.iter().any(|x| x == n) {
                    nodes.push(n.to_string());
                }
            }
        }
        Self::new(nodes, edges.iter().map(|(p, c)| (p.as_ref(), c.as_ref())))
    }

    /// Returns a copy of the graph with one extra isolated node.
    pub fn with_isolated_node(&self, name: &str) -> Result<Self> {
        let mut dag = self.clone();
        dag.push_node(name.to_string())?;
        Ok(dag)
    }

    fn push_node(&mut self, name: String) -> Result<()> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidRoles(format!("invalid node name `{name}`")));
        }
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateNode(name));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.parents.push(Vec::new());
        self.children.push(Vec::new());
        Ok(())
    }

    fn push_edge(&mut self, parent: &str, child: &str) -> Result<()> {
        let p = self.id(parent)?;
        let c = self.id(child)?;
        if p == c {
            return Err(Error::SelfLoop(parent.to_string()));
        }
        if self.children[p].contains(&c) {
            return Err(Error::DuplicateEdge(parent.to_string(), child.to_string()));
        }
        self.children[p].push(c);
        self.parents[c].push(p);
        self.edges.push((p, c));
        Ok(())
    }

    fn check_acyclic(&self) -> Result<()> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&v| indegree[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if seen == self.len() {
            Ok(())
        } else {
            let culprit = (0..self.len()).find(|&v| indegree[v] > 0).unwrap_or(0);
            Err(Error::Cycle(self.names[culprit].clone()))
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Edges as `(parent, child)` pairs in insertion order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges
            .iter()
            .map(|&(p, c)| (self.names[p].as_str(), self.names[c].as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.index.get(parent), self.index.get(child)) {
            (Some(&p), Some(&c)) => self.children[p].contains(&c),
            _ => false,
        }
    }

    pub fn parents_of(&self, name: &str) -> Result<Vec<&str>> {
        let v = self.id(name)?;
        Ok(self.parents[v].iter().map(|&p| self.names[p].as_str()).collect())
    }

    pub fn children_of(&self, name: &str) -> Result<Vec<&str>> {
        let v = self.id(name)?;
        Ok(self.children[v].iter().map(|&c| self.names[c].as_str()).collect())
    }

    fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    fn ids<S: AsRef<str>>(&self, names: &[S]) -> Result<BTreeSet<usize>> {
        names.iter().map(|n| self.id(n.as_ref())).collect()
    }

    /// Nodes of `set` together with all of their ancestors.
    fn ancestral_closure(&self, set: &BTreeSet<usize>) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(v) = stack.pop() {
            if mark[v] {
                continue;
            }
            mark[v] = true;
            stack.extend(self.parents[v].iter().copied());
        }
        mark
    }

    fn validated_sets<S: AsRef<str>>(
        &self,
        xs: &[S],
        ys: &[S],
        zs: &[S],
    ) -> Result<(BTreeSet<usize>, BTreeSet<usize>, BTreeSet<usize>)> {
        let x = self.ids(xs)?;
        let y = self.ids(ys)?;
        let z = self.ids(zs)?;
        if x.is_empty() {
            return Err(Error::EmptySet("xs"));
        }
        if y.is_empty() {
            return Err(Error::EmptySet("ys"));
        }
        for (a, b) in [(&x, &y), (&x, &z), (&y, &z)] {
            if let Some(&v) = a.intersection(b).next() {
                return Err(Error::OverlappingSets(self.names[v].clone()));
            }
        }
        Ok((x, y, z))
    }

    /// Whether `xs` and `ys` are d-separated given `zs`.
    pub fn d_separated<S: AsRef<str>>(&self, xs: &[S], ys: &[S], zs: &[S]) -> Result<bool> {
        let (x, y, z) = self.validated_sets(xs, ys, zs)?;
        Ok(!self.reachable(&x, &z).iter().enumerate().any(|(v, &r)| r && y.contains(&v)))
    }

    /// Marks every node reachable from `sources` along an active trail
    /// given `conditioned`.
    fn reachable(&self, sources: &BTreeSet<usize>, conditioned: &BTreeSet<usize>) -> Vec<bool> {
        #[derive(Clone, Copy)]
        enum Dir {
            // arrived from a child, travelling against the edge
            Up,
            // arrived from a parent, travelling along the edge
            Down,
        }
        let in_z = |v: usize| conditioned.contains(&v);
        let anc_z = self.ancestral_closure(conditioned);
        let mut visited = vec![[false; 2]; self.len()];
        let mut reached = vec![false; self.len()];
        let mut queue: VecDeque<(usize, Dir)> = sources.iter().map(|&s| (s, Dir::Up)).collect();

        while let Some((v, dir)) = queue.pop_front() {
            let slot = dir as usize;
            if visited[v][slot] {
                continue;
            }
            visited[v][slot] = true;
            if !in_z(v) {
                reached[v] = true;
            }
            match dir {
                Dir::Up if !in_z(v) => {
                    queue.extend(self.parents[v].iter().map(|&p| (p, Dir::Up)));
                    queue.extend(self.children[v].iter().map(|&c| (c, Dir::Down)));
                }
                Dir::Up => {}
                Dir::Down => {
                    if !in_z(v) {
                        queue.extend(self.children[v].iter().map(|&c| (c, Dir::Down)));
                    }
                    if anc_z[v] {
                        queue.extend(self.parents[v].iter().map(|&p| (p, Dir::Up)));
                    }
                }
            }
        }
        reached
    }

    /// The first open simple path from `from` to `to` given `given`,
    /// exploring neighbours in node-name order. `None` when the two nodes are
    /// d-separated.
    pub fn open_path<S: AsRef<str>>(&self, from: &str, to: &str, given: &[S]) -> Result<Option<Vec<String>>> {
        let (x, y, z) = self.validated_sets(&[from], &[to], &given.iter().map(|s| s.as_ref()).collect::<Vec<_>>())?;
        let (&start, &goal) = (x.first().expect("nonempty"), y.first().expect("nonempty"));
        let anc_z = self.ancestral_closure(&z);

        let mut neighbours: Vec<Vec<usize>> = (0..self.len())
            .map(|v| {
                let mut nb: Vec<usize> = self.parents[v].iter().chain(&self.children[v]).copied().collect();
                nb.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
                nb
            })
            .collect();
        neighbours.iter_mut().for_each(|nb| nb.dedup());

        let mut path = vec![start];
        let mut on_path = vec![false; self.len()];
        on_path[start] = true;
        // each frame holds the index of the next neighbour to try
        let mut cursor = vec![0usize];

        while let Some(&v) = path.last() {
            if v == goal {
                return Ok(Some(path.iter().map(|&i| self.names[i].clone()).collect()));
            }
            let depth = path.len() - 1;
            let next = loop {
                let k = cursor[depth];
                if k >= neighbours[v].len() {
                    break None;
                }
                cursor[depth] += 1;
                let w = neighbours[v][k];
                if on_path[w] {
                    continue;
                }
                if depth > 0 {
                    let prev = path[depth - 1];
                    let collider = self.children[prev].contains(&v) && self.children[w].contains(&v);
                    let open = if collider { anc_z[v] } else { !z.contains(&v) };
                    if !open {
                        continue;
                    }
                }
                break Some(w);
            };
            match next {
                Some(w) => {
                    path.push(w);
                    on_path[w] = true;
                    cursor.push(0);
                }
                None => {
                    on_path[v] = false;
                    path.pop();
                    cursor.pop();
                }
            }
        }
        Ok(None)
    }

    /// Renders a node sequence with the edge orientation between neighbours,
    /// e.g. `Z <- T_pre -> W`.
    pub fn render_path(&self, path: &[String]) -> String {
        let mut out = String::new();
        for (i, node) in path.iter().enumerate() {
            if i > 0 {
                let prev = &path[i - 1];
                out.push_str(if self.has_edge(prev, node) { " -> " } else { " <- " });
            }
            out.push_str(node);
        }
        out
    }

    /// Parses the plain-text edge-list format: one `parent -> child` per
    /// line, optional bare node declarations, `#` comments.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut nodes: Vec<String> = Vec::new();
        let mut edges: Vec<(String, String)> = Vec::new();
        let declare = |nodes: &mut Vec<String>, n: &str| {
            if !nodes.iter().any(|x| x == n) {
                nodes.push(n.to_string());
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::EdgeListSyntax { line: i + 1, msg: msg.to_string() };
            match line.split_once("->") {
                Some((p, c)) => {
                    let (p, c) = (p.trim(), c.trim());
                    if p.is_empty() || c.is_empty() || c.contains("->") {
                        return Err(bad("expected `parent -> child`"));
                    }
                    if p.contains(char::is_whitespace) || c.contains(char::is_whitespace) {
                        return Err(bad("node names cannot contain whitespace"));
                    }
                    declare(&mut nodes, p);
                    declare(&mut nodes, c);
                    edges.push((p.to_string(), c.to_string()));
                }
                None => {
                    if line.contains(char::is_whitespace) {
                        return Err(bad("expected a node name or `parent -> child`"));
                    }
                    declare(&mut nodes, line);
                }
            }
        }
        Self::new(nodes, edges)
    }

    /// Serializes to the edge-list format. All nodes are declared first so
    /// that node order and isolated nodes survive a round trip.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        for (p, c) in self.edges() {
            out.push_str(&format!("{p} -> {c}\n"));
        }
        out
    }
}

impl fmt::Display for CausalDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_edge_list())
    }
}

/// Number of categories of the proxies and of the unmeasured confounder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cardinality {
    pub w: usize,
    pub z: usize,
    pub u: usize,
}

impl Default for Cardinality {
    /// Everything binary.
    fn default() -> Self {
        Cardinality { w: 2, z: 2, u: 2 }
    }
}

/// Which graph node plays which role in the proximal setup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub treatment: String,
    pub outcome: String,
    pub unmeasured: String,
    pub observed_covariates: Vec<String>,
    pub proxy_w: String,
    pub proxy_z: String,
    #[serde(default)]
    pub cardinality: Cardinality,
}

impl RoleAssignment {
    /// The conventional naming used by the builtin graphs.
    pub fn standard() -> Self {
        RoleAssignment {
            treatment: "A".into(),
            outcome: "Y".into(),
            unmeasured: "U".into(),
            observed_covariates: vec!["C".into()],
            proxy_w: "W".into(),
            proxy_z: "Z".into(),
            cardinality: Cardinality::default(),
        }
    }

    pub fn validate(&self, g: &CausalDag) -> Result<()> {
        let scalars = [&self.treatment, &self.outcome, &self.unmeasured, &self.proxy_w, &self.proxy_z];
        for n in scalars.iter().copied().chain(&self.observed_covariates) {
            if !g.contains(n) {
                return Err(Error::UnknownNode(n.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for n in scalars {
            if !seen.insert(n) {
                return Err(Error::InvalidRoles(format!("`{n}` is assigned to more than one role")));
            }
        }
        let mut cov_seen = BTreeSet::new();
        for c in &self.observed_covariates {
            if seen.contains(c) {
                return Err(Error::InvalidRoles(format!("covariate `{c}` also has a scalar role")));
            }
            if !cov_seen.insert(c) {
                return Err(Error::InvalidRoles(format!("covariate `{c}` listed twice")));
            }
        }
        if self.cardinality.u == 0 || self.cardinality.w == 0 || self.cardinality.z == 0 {
            return Err(Error::InvalidRoles("cardinalities must be positive".into()));
        }
        Ok(())
    }
}

/// An open path witnessing a failed independence condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPath {
    pub nodes: Vec<String>,
    pub rendered: String,
}

/// Outcome of checking (P1)-(P3) by d-separation and (P4) by the
/// cardinality sufficient condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub p1_holds: bool,
    pub p2_holds: bool,
    pub p3_holds: bool,
    pub p4_cardinality_ok: bool,
    /// Keyed by `p1`, `p2`, `p3`; present exactly for the failed conditions.
    pub witness_paths: BTreeMap<String, WitnessPath>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.p1_holds && self.p2_holds && self.p3_holds && self.p4_cardinality_ok
    }
}

/// Checks the proximal conditions for `roles` on `g`:
///
/// * P1: `W ⟂ Z | U, C`
/// * P2: `W ⟂ A | U, C`
/// * P3: `Z ⟂ Y | A, U, C`
/// * P4: `min(|W|, |Z|) ≥ |U|`
pub fn check_proximal_structure(g: &CausalDag, roles: &RoleAssignment) -> Result<ConditionReport> {
    roles.validate(g)?;
    let mut u_c: Vec<&str> = vec![roles.unmeasured.as_str()];
    u_c.extend(roles.observed_covariates.iter().map(String::as_str));
    let mut a_u_c = vec![roles.treatment.as_str()];
    a_u_c.extend(u_c.iter().copied());

    // (key, path start, path end, conditioning set)
    let checks = [
        ("p1", roles.proxy_z.as_str(), roles.proxy_w.as_str(), &u_c),
        ("p2", roles.treatment.as_str(), roles.proxy_w.as_str(), &u_c),
        ("p3", roles.outcome.as_str(), roles.proxy_z.as_str(), &a_u_c),
    ];
    let mut holds = [false; 3];
    let mut witness_paths = BTreeMap::new();
    for (i, (key, from, to, given)) in checks.into_iter().enumerate() {
        holds[i] = g.d_separated(&[from], &[to], given)?;
        if !holds[i] {
            let nodes = g
                .open_path(from, to, given)?
                .expect("d-connected nodes have an open path");
            let rendered = g.render_path(&nodes);
            witness_paths.insert(key.to_string(), WitnessPath { nodes, rendered });
        }
    }
    let card = roles.cardinality;
    Ok(ConditionReport {
        p1_holds: holds[0],
        p2_holds: holds[1],
        p3_holds: holds[2],
        p4_cardinality_ok: card.w.min(card.z) >= card.u,
        witness_paths,
    })
}

/// The graphs drawn in the paper's figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinGraph {
    /// Unmeasured confounding, no proxies.
    Fig2a,
    /// Canonical proximal graph.
    Fig2b,
    /// Both proxies from post-treatment (post-outcome) text.
    Fig3a,
    /// Both proxies from one pre-treatment text instance.
    Fig3b,
    /// Two text instances, one model.
    Fig3c,
    /// Two text instances, two models (the recommended design).
    Fig3d,
    /// One pre-treatment and one post-treatment text instance.
    Fig5Posttreat,
    /// One actionable and one non-actionable text instance.
    Fig6Actionable,
}

impl BuiltinGraph {
    pub const ALL: [BuiltinGraph; 8] = [
        BuiltinGraph::Fig2a,
        BuiltinGraph::Fig2b,
        BuiltinGraph::Fig3a,
        BuiltinGraph::Fig3b,
        BuiltinGraph::Fig3c,
        BuiltinGraph::Fig3d,
        BuiltinGraph::Fig5Posttreat,
        BuiltinGraph::Fig6Actionable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinGraph::Fig2a => "fig2a",
            BuiltinGraph::Fig2b => "fig2b",
            BuiltinGraph::Fig3a => "fig3a",
            BuiltinGraph::Fig3b => "fig3b",
            BuiltinGraph::Fig3c => "fig3c",
            BuiltinGraph::Fig3d => "fig3d",
            BuiltinGraph::Fig5Posttreat => "fig5_posttreat",
            BuiltinGraph::Fig6Actionable => "fig6_actionable",
        }
    }

    fn edges(self) -> Vec<(&'static str, &'static str)> {
        let confounding = [("A", "Y"), ("U", "A"), ("U", "Y"), ("C", "A"), ("C", "Y"), ("C", "U")];
        let extra: &[(&str, &str)] = match self {
            BuiltinGraph::Fig2a => &[],
            BuiltinGraph::Fig2b => &[("C", "W"), ("C", "Z"), ("U", "W"), ("U", "Z")],
            BuiltinGraph::Fig3a => &[("C", "T"), ("U", "T"), ("T", "Z"), ("T", "W"), ("Y", "T")],
            BuiltinGraph::Fig3b => &[("C", "T_pre"), ("U", "T_pre"), ("T_pre", "Z"), ("T_pre", "W")],
            BuiltinGraph::Fig3c | BuiltinGraph::Fig3d => &[
                ("C", "T_pre1"),
                ("U", "T_pre1"),
                ("C", "T_pre2"),
                ("U", "T_pre2"),
                ("T_pre1", "Z"),
                ("T_pre2", "W"),
            ],
            BuiltinGraph::Fig5Posttreat => &[
                ("C", "T_post"),
                ("C", "T_pre"),
                ("U", "T_pre"),
                ("U", "T_post"),
                ("T_post", "Z"),
                ("T_pre", "W"),
                ("A", "T_post"),
            ],
            BuiltinGraph::Fig6Actionable => &[
                ("C", "T_act"),
                ("C", "T_pre"),
                ("U", "T_pre"),
                ("U", "T_act"),
                ("T_act", "Z"),
                ("T_pre", "W"),
                ("T_act", "A"),
            ],
        };
        confounding.iter().chain(extra).copied().collect()
    }
}

impl FromStr for BuiltinGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinGraph::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGraph(s.to_string()))
    }
}

impl fmt::Display for BuiltinGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn builtin_graph(name: BuiltinGraph) -> CausalDag {
    let edges = name.edges();
    let mut nodes: Vec<&str> = vec!["A", "Y", "U", "C"];
    for &(p, c) in &edges {
        for n in [p, c] {
            if !nodes.contains(&n) {
                nodes.push(n);
            }
        }
    }
    CausalDag::new(nodes, edges).expect("builtin graphs are valid DAGs")
}
