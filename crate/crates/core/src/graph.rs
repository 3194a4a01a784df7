use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// Node identifier. Must match `[A-Za-z][A-Za-z0-9_]*`.
pub type NodeId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Observed,
    Latent,
}

/// One share of a latent source: the part of `owner` that is consumed by the
/// alternative group `group`. For a child that was never split, `group` is
/// the child itself; for split children it is their common original name, so
/// all alternatives of one node read the same physical share.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subsystem {
    pub owner: NodeId,
    pub group: NodeId,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.owner, self.group)
    }
}

/// A thing that can carry entropy: an observed variable, one share of a
/// latent source, or (classically) a latent source as a whole.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SystemId {
    Observed(NodeId),
    Part(Subsystem),
    Whole(NodeId),
}

impl SystemId {
    pub fn part(owner: &str, group: &str) -> Self {
        SystemId::Part(Subsystem {
            owner: owner.to_string(),
            group: group.to_string(),
        })
    }

    /// Observed variables and whole latent sources carry a definite joint
    /// distribution together with other classical systems; shares do not.
    pub fn is_classical(&self) -> bool {
        !matches!(self, SystemId::Part(_))
    }

    pub fn display_name(&self) -> String {
        match self {
            SystemId::Observed(n) | SystemId::Whole(n) => n.clone(),
            SystemId::Part(s) => s.to_string(),
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_name())
    }
}

// Systems sort by display name so that canonical listings read
// alphabetically; the variant tag only breaks exact-name ties.
impl Ord for SystemId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        fn tag(s: &SystemId) -> u8 {
            match s {
                SystemId::Observed(_) => 0,
                SystemId::Part(_) => 1,
                SystemId::Whole(_) => 2,
            }
        }
        self.display_name()
            .cmp(&other.display_name())
            .then_with(|| tag(self).cmp(&tag(other)))
    }
}

impl PartialOrd for SystemId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn valid_value(value: &str) -> bool {
    !value.is_empty() && value.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A directed acyclic causal structure with observed and latent nodes.
///
/// Post-selection bookkeeping rides along: `origin` maps a split node to the
/// observed name it descends from, and `selection` records which pivot value
/// each split node belongs to. Both maps are empty for ordinary structures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CausalStructure {
    nodes: BTreeMap<NodeId, NodeKind>,
    edges: BTreeSet<(NodeId, NodeId)>,
    origin: BTreeMap<NodeId, NodeId>,
    selection: BTreeMap<NodeId, BTreeMap<NodeId, String>>,
}

impl CausalStructure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, kind: NodeKind) -> Result<()> {
        if self.nodes.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.nodes.insert(name.to_string(), kind);
        Ok(())
    }

    /// Edges may be added before their endpoints exist; `validate` catches
    /// leftovers.
    pub fn add_edge(&mut self, from: &str, to: &str) {
        self.edges.insert((from.to_string(), to.to_string()));
    }

    /// Marks `node` as the alternative of `origin` selected by `pivot = value`.
    pub fn add_split(&mut self, node: &str, origin: &str, pivot: &str, value: &str) {
        self.origin.insert(node.to_string(), origin.to_string());
        self.selection
            .entry(node.to_string())
            .or_default()
            .insert(pivot.to_string(), value.to_string());
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.contains_key(name)
    }

    pub fn kind(&self, name: &str) -> Result<NodeKind> {
        self.nodes
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn is_observed(&self, name: &str) -> bool {
        self.nodes.get(name) == Some(&NodeKind::Observed)
    }

    pub fn is_latent(&self, name: &str) -> bool {
        self.nodes.get(name) == Some(&NodeKind::Latent)
    }

    pub fn node_names(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn observed_nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes
            .iter()
            .filter(|(_, k)| **k == NodeKind::Observed)
            .map(|(n, _)| n)
    }

    pub fn latent_nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes
            .iter()
            .filter(|(_, k)| **k == NodeKind::Latent)
            .map(|(n, _)| n)
    }

    pub fn edges(&self) -> impl Iterator<Item = &(NodeId, NodeId)> {
        self.edges.iter()
    }

    pub fn parents(&self, name: &str) -> BTreeSet<NodeId> {
        self.edges
            .iter()
            .filter(|(_, t)| t == name)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn children(&self, name: &str) -> BTreeSet<NodeId> {
        self.edges
            .iter()
            .filter(|(s, _)| s == name)
            .map(|(_, t)| t.clone())
            .collect()
    }

    /// The observed name this node descends from; the node itself if it was
    /// never split.
    pub fn origin_of<'a>(&'a self, name: &'a str) -> &'a str {
        self.origin.get(name).map(|s| s.as_str()).unwrap_or(name)
    }

    /// The pivot assignment selecting this node, empty if it was never split.
    pub fn selection_of(&self, name: &str) -> BTreeMap<NodeId, String> {
        self.selection.get(name).cloned().unwrap_or_default()
    }

    pub fn is_post_selected(&self) -> bool {
        !self.selection.is_empty()
    }

    /// All pivots named in selections, with the value labels seen for each.
    pub fn pivots(&self) -> BTreeMap<NodeId, BTreeSet<String>> {
        let mut out: BTreeMap<NodeId, BTreeSet<String>> = BTreeMap::new();
        for sel in self.selection.values() {
            for (p, v) in sel {
                out.entry(p.clone()).or_default().insert(v.clone());
            }
        }
        out
    }

    /// One map per joint pivot assignment, in lexicographic order.
    pub fn branches(&self) -> Vec<BTreeMap<NodeId, String>> {
        let pivots = self.pivots();
        let mut out = vec![BTreeMap::new()];
        for (pivot, values) in &pivots {
            let mut next = Vec::with_capacity(out.len() * values.len());
            for partial in &out {
                for v in values {
                    let mut b = partial.clone();
                    b.insert(pivot.clone(), v.clone());
                    next.push(b);
                }
            }
            out = next;
        }
        out
    }

    /// Whether `node` exists in the world selected by `branch`.
    pub fn active_in(&self, node: &str, branch: &BTreeMap<NodeId, String>) -> bool {
        match self.selection.get(node) {
            None => true,
            Some(sel) => sel.iter().all(|(p, v)| branch.get(p) == Some(v)),
        }
    }

    /// Checks acyclicity, edge endpoints, node-name syntax, and that split
    /// metadata is consistent (alternatives of one origin must disagree on a
    /// shared pivot, so no two of them are ever active together).
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyStructure);
        }
        for name in self.nodes.keys() {
            if !valid_name(name) {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("invalid node name '{name}'"),
                });
            }
        }
        for (s, t) in &self.edges {
            if !self.nodes.contains_key(s) {
                return Err(Error::DanglingEdge(s.clone()));
            }
            if !self.nodes.contains_key(t) {
                return Err(Error::DanglingEdge(t.clone()));
            }
        }
        for (node, origin) in &self.origin {
            if !self.nodes.contains_key(node) {
                return Err(Error::UnknownNode(node.clone()));
            }
            if !self.is_observed(node) {
                return Err(Error::NotObserved(node.clone()));
            }
            if !valid_name(origin) {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("invalid origin name '{origin}'"),
                });
            }
            if self.selection.get(node).map_or(true, |s| s.is_empty()) {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("split node '{node}' has no pivot assignment"),
                });
            }
        }
        for node in self.selection.keys() {
            if !self.origin.contains_key(node) {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("selection for '{node}' lacks an origin"),
                });
            }
        }
        // Alternatives of one origin must conflict pairwise.
        let mut by_origin: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for (node, origin) in &self.origin {
            by_origin.entry(origin).or_default().push(node);
        }
        for (origin, members) in by_origin {
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    let sa = &self.selection[*a];
                    let sb = &self.selection[*b];
                    let conflict = sa
                        .iter()
                        .any(|(p, v)| sb.get(p).is_some_and(|w| w != v));
                    if !conflict {
                        return Err(Error::Parse {
                            line: 0,
                            column: 0,
                            message: format!(
                                "alternatives '{a}' and '{b}' of '{origin}' can coexist"
                            ),
                        });
                    }
                }
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Kahn's algorithm; surfaces a node on a cycle on failure.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let mut indegree: BTreeMap<&NodeId, usize> =
            self.nodes.keys().map(|n| (n, 0)).collect();
        for (_, t) in &self.edges {
            if let Some(d) = indegree.get_mut(t) {
                *d += 1;
            }
        }
        let mut ready: BTreeSet<&NodeId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&n) = ready.iter().next() {
            ready.remove(n);
            order.push(n.clone());
            for (s, t) in &self.edges {
                if s == n {
                    let d = indegree.get_mut(t).expect("validated edge");
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(t);
                    }
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = indegree
                .iter()
                .find(|(_, d)| **d > 0)
                .map(|(n, _)| (*n).clone())
                .unwrap_or_default();
            return Err(Error::CycleDetected(stuck));
        }
        Ok(order)
    }

    /// Strict ancestors of `name` (the node itself is excluded).
    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<NodeId>> {
        if !self.nodes.contains_key(name) {
            return Err(Error::UnknownNode(name.to_string()));
        }
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<NodeId> = self.parents(name).into_iter().collect();
        while let Some(n) = queue.pop_front() {
            if out.insert(n.clone()) {
                queue.extend(self.parents(&n));
            }
        }
        Ok(out)
    }

    /// Strict descendants of `name`.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<NodeId>> {
        if !self.nodes.contains_key(name) {
            return Err(Error::UnknownNode(name.to_string()));
        }
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<NodeId> = self.children(name).into_iter().collect();
        while let Some(n) = queue.pop_front() {
            if out.insert(n.clone()) {
                queue.extend(self.children(&n));
            }
        }
        Ok(out)
    }

    /// The shares of latent sources, one per (latent, alternative group of a
    /// child). Children that were never split form singleton groups.
    pub fn subsystems(&self) -> Vec<Subsystem> {
        let mut out = Vec::new();
        for latent in self.latent_nodes() {
            let mut groups: BTreeSet<NodeId> = BTreeSet::new();
            for child in self.children(latent) {
                groups.insert(self.origin_of(&child).to_string());
            }
            for group in groups {
                out.push(Subsystem {
                    owner: latent.clone(),
                    group,
                });
            }
        }
        out
    }

    /// Members of an alternative group as seen from its owning latent.
    pub fn group_members(&self, sub: &Subsystem) -> BTreeSet<NodeId> {
        self.children(&sub.owner)
            .into_iter()
            .filter(|c| self.origin_of(c) == sub.group)
            .collect()
    }

    /// The nodes that have `sub` as an ancestor: the group members and
    /// everything downstream of them.
    pub fn subsystem_descendants(&self, sub: &Subsystem) -> Result<BTreeSet<NodeId>> {
        if !self.is_latent(&sub.owner) {
            return Err(Error::UnknownNode(sub.owner.clone()));
        }
        let members = self.group_members(sub);
        if members.is_empty() {
            return Err(Error::UnknownNode(format!("{sub}")));
        }
        let mut out = BTreeSet::new();
        for m in members {
            out.extend(self.descendants(&m)?);
            out.insert(m);
        }
        Ok(out)
    }

    /// Ancestor closure of a system: the node itself (its owner for a share)
    /// plus all strict ancestors. Two systems with disjoint closures receive
    /// independent inputs.
    pub fn system_closure(&self, sys: &SystemId) -> Result<BTreeSet<NodeId>> {
        let root = match sys {
            SystemId::Observed(n) => n,
            SystemId::Whole(n) => n,
            SystemId::Part(s) => &s.owner,
        };
        let mut out = self.ancestors(root)?;
        out.insert(root.clone());
        Ok(out)
    }

    /// Standard d-separation: true when every path between `x` and `y` is
    /// blocked given `z` (colliders open only if they or a descendant lie in
    /// `z`).
    pub fn d_separated(
        &self,
        x: &BTreeSet<NodeId>,
        y: &BTreeSet<NodeId>,
        z: &BTreeSet<NodeId>,
    ) -> Result<bool> {
        for set in [x, y, z] {
            for n in set {
                if !self.nodes.contains_key(n) {
                    return Err(Error::UnknownNode(n.clone()));
                }
            }
        }
        for n in x {
            if y.contains(n) || z.contains(n) {
                return Err(Error::OverlappingSets(n.clone()));
            }
        }
        for n in y {
            if z.contains(n) {
                return Err(Error::OverlappingSets(n.clone()));
            }
        }
        // Nodes from which z is reachable by descent (z itself included).
        let mut z_anc: BTreeSet<NodeId> = z.clone();
        let mut queue: VecDeque<NodeId> = z.iter().cloned().collect();
        while let Some(n) = queue.pop_front() {
            for p in self.parents(&n) {
                if z_anc.insert(p.clone()) {
                    queue.push_back(p);
                }
            }
        }
        // Ball passing: state (node, entered-from-child?). Start upward from x.
        let mut seen: BTreeSet<(NodeId, bool)> = BTreeSet::new();
        let mut queue: VecDeque<(NodeId, bool)> =
            x.iter().map(|n| (n.clone(), true)).collect();
        while let Some((n, from_child)) = queue.pop_front() {
            if !seen.insert((n.clone(), from_child)) {
                continue;
            }
            if y.contains(&n) {
                return Ok(false);
            }
            let in_z = z.contains(&n);
            if from_child && !in_z {
                // Trail may continue up to parents or down to children.
                for p in self.parents(&n) {
                    queue.push_back((p, true));
                }
                for c in self.children(&n) {
                    queue.push_back((c, false));
                }
            } else if !from_child {
                if !in_z {
                    for c in self.children(&n) {
                        queue.push_back((c, false));
                    }
                }
                if z_anc.contains(&n) {
                    // Open collider: bounce back up.
                    for p in self.parents(&n) {
                        queue.push_back((p, true));
                    }
                }
            }
        }
        Ok(true)
    }

    /// Splits every observed descendant of the parentless observed `pivot`
    /// into `cardinality` alternatives and removes the pivot. Latent nodes
    /// are never split. Returns the new structure and, for each removed node,
    /// the nodes that replaced it (the pivot maps to none).
    pub fn post_select(
        &self,
        pivot: &str,
        cardinality: usize,
    ) -> Result<(CausalStructure, BTreeMap<NodeId, Vec<NodeId>>)> {
        if !self.nodes.contains_key(pivot) {
            return Err(Error::UnknownNode(pivot.to_string()));
        }
        if !self.is_observed(pivot) {
            return Err(Error::NotObserved(pivot.to_string()));
        }
        if !self.parents(pivot).is_empty() {
            return Err(Error::NotParentless(pivot.to_string()));
        }
        if cardinality < 2 {
            return Err(Error::InvalidCardinality(cardinality));
        }
        let split_set: BTreeSet<NodeId> = self
            .descendants(pivot)?
            .into_iter()
            .filter(|d| self.is_observed(d))
            .collect();
        let mut out = CausalStructure::new();
        let mut mapping: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        mapping.insert(pivot.to_string(), Vec::new());
        let alt_name = |d: &str, k: usize| format!("{d}_{pivot}{k}");
        for (name, kind) in &self.nodes {
            if name == pivot {
                continue;
            }
            if split_set.contains(name) {
                let mut alts = Vec::with_capacity(cardinality);
                for k in 0..cardinality {
                    let alt = alt_name(name, k);
                    if self.nodes.contains_key(&alt) {
                        return Err(Error::DuplicateName(alt));
                    }
                    out.add_node(&alt, *kind)?;
                    out.origin
                        .insert(alt.clone(), self.origin_of(name).to_string());
                    let mut sel = self.selection_of(name);
                    sel.insert(pivot.to_string(), k.to_string());
                    out.selection.insert(alt.clone(), sel);
                    alts.push(alt);
                }
                mapping.insert(name.clone(), alts);
            } else {
                out.add_node(name, *kind)?;
                if let Some(o) = self.origin.get(name) {
                    out.origin.insert(name.clone(), o.clone());
                    out.selection
                        .insert(name.clone(), self.selection[name].clone());
                }
            }
        }
        for (s, t) in &self.edges {
            if s == pivot {
                continue; // the selecting input disappears
            }
            let s_split = split_set.contains(s);
            let t_split = split_set.contains(t);
            match (s_split, t_split) {
                (false, false) => out.add_edge(s, t),
                (false, true) => {
                    for k in 0..cardinality {
                        out.add_edge(s, &alt_name(t, k));
                    }
                }
                (true, false) => {
                    for k in 0..cardinality {
                        out.add_edge(&alt_name(s, k), t);
                    }
                }
                // Split parents feed the matching alternative only.
                (true, true) => {
                    for k in 0..cardinality {
                        out.add_edge(&alt_name(s, k), &alt_name(t, k));
                    }
                }
            }
        }
        out.validate()?;
        Ok((out, mapping))
    }

    /// Canonical text form; `parse_structure` inverts it byte for byte.
    pub fn serialize(&self) -> String {
        let mut lines = Vec::new();
        for (name, kind) in &self.nodes {
            let k = match kind {
                NodeKind::Observed => "observed",
                NodeKind::Latent => "latent",
            };
            lines.push(format!("node {name} {k}"));
        }
        for (s, t) in &self.edges {
            lines.push(format!("edge {s} -> {t}"));
        }
        for (node, origin) in &self.origin {
            for (pivot, value) in &self.selection[node] {
                lines.push(format!("split {node} {origin} {pivot}={value}"));
            }
        }
        lines.push(String::new());
        lines.join("\n")
    }
}

/// Parses the `node`/`edge`/`split` structure format. `#` starts a comment;
/// blank lines are ignored.
pub fn parse_structure(text: &str) -> Result<CausalStructure> {
    let mut out = CausalStructure::new();
    let err = |line: usize, column: usize, message: &str| Error::Parse {
        line,
        column,
        message: message.to_string(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let col_of = |tok: &str| line.find(tok).map(|p| p + 1).unwrap_or(1);
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "node" => {
                if tokens.len() != 3 {
                    return Err(err(line_no, 1, "expected 'node <name> observed|latent'"));
                }
                if !valid_name(tokens[1]) {
                    return Err(err(line_no, col_of(tokens[1]), "invalid node name"));
                }
                let kind = match tokens[2] {
                    "observed" => NodeKind::Observed,
                    "latent" => NodeKind::Latent,
                    _ => {
                        return Err(err(
                            line_no,
                            col_of(tokens[2]),
                            "expected 'observed' or 'latent'",
                        ))
                    }
                };
                if out.nodes.contains_key(tokens[1]) {
                    return Err(Error::DuplicateName(tokens[1].to_string()));
                }
                out.add_node(tokens[1], kind)?;
            }
            "edge" => {
                if tokens.len() != 4 || tokens[2] != "->" {
                    return Err(err(line_no, 1, "expected 'edge <from> -> <to>'"));
                }
                for t in [tokens[1], tokens[3]] {
                    if !valid_name(t) {
                        return Err(err(line_no, col_of(t), "invalid node name"));
                    }
                }
                out.add_edge(tokens[1], tokens[3]);
            }
            "split" => {
                if tokens.len() != 4 {
                    return Err(err(
                        line_no,
                        1,
                        "expected 'split <node> <origin> <pivot>=<value>'",
                    ));
                }
                for t in [tokens[1], tokens[2]] {
                    if !valid_name(t) {
                        return Err(err(line_no, col_of(t), "invalid node name"));
                    }
                }
                let Some((pivot, value)) = tokens[3].split_once('=') else {
                    return Err(err(line_no, col_of(tokens[3]), "expected <pivot>=<value>"));
                };
                if !valid_name(pivot) {
                    return Err(err(line_no, col_of(tokens[3]), "invalid pivot name"));
                }
                if !valid_value(value) {
                    return Err(err(line_no, col_of(tokens[3]), "invalid pivot value"));
                }
                out.add_split(tokens[1], tokens[2], pivot, value);
            }
            other => {
                return Err(err(
                    line_no,
                    col_of(other),
                    "expected 'node', 'edge' or 'split'",
                ))
            }
        }
    }
    if out.nodes.is_empty() {
        return Err(Error::EmptyStructure);
    }
    out.validate()?;
    Ok(out)
}

pub const CATALOG_NAMES: [&str; 9] = [
    "bilocal",
    "bilocal_postselected",
    "fig2",
    "fig3a",
    "fig3b",
    "ic",
    "ic_postselected",
    "instrumental",
    "triangle",
];

/// Built-in structures used throughout the tests and the command line tool.
pub fn catalog(name: &str) -> Result<CausalStructure> {
    let mut s = CausalStructure::new();
    let obs = |s: &mut CausalStructure, names: &[&str]| -> Result<()> {
        for n in names {
            s.add_node(n, NodeKind::Observed)?;
        }
        Ok(())
    };
    let lat = |s: &mut CausalStructure, names: &[&str]| -> Result<()> {
        for n in names {
            s.add_node(n, NodeKind::Latent)?;
        }
        Ok(())
    };
    match name {
        "instrumental" => {
            obs(&mut s, &["X", "Y", "Z"])?;
            lat(&mut s, &["A"])?;
            for (f, t) in [("X", "Z"), ("Z", "Y"), ("A", "Z"), ("A", "Y")] {
                s.add_edge(f, t);
            }
        }
        "fig2" => {
            obs(&mut s, &["C", "D", "E", "F"])?;
            lat(&mut s, &["A", "B"])?;
            for (f, t) in [
                ("C", "D"),
                ("D", "E"),
                ("E", "F"),
                ("A", "E"),
                ("A", "F"),
                ("B", "D"),
                ("B", "F"),
            ] {
                s.add_edge(f, t);
            }
        }
        "fig3a" => {
            obs(&mut s, &["C", "D", "E", "F"])?;
            lat(&mut s, &["A", "B"])?;
            for (f, t) in [
                ("C", "D"),
                ("D", "E"),
                ("E", "F"),
                ("A", "D"),
                ("A", "E"),
                ("B", "D"),
                ("B", "F"),
            ] {
                s.add_edge(f, t);
            }
        }
        "fig3b" => {
            obs(&mut s, &["C", "D", "E", "F"])?;
            lat(&mut s, &["A", "B"])?;
            for (f, t) in [
                ("C", "F"),
                ("D", "E"),
                ("E", "F"),
                ("A", "C"),
                ("A", "F"),
                ("B", "C"),
                ("B", "E"),
            ] {
                s.add_edge(f, t);
            }
        }
        "bilocal" => {
            obs(&mut s, &["A", "B", "C", "X", "Y", "Z"])?;
            lat(&mut s, &["L1", "L2"])?;
            for (f, t) in [
                ("A", "X"),
                ("B", "Y"),
                ("C", "Z"),
                ("L1", "X"),
                ("L1", "Y"),
                ("L2", "Y"),
                ("L2", "Z"),
            ] {
                s.add_edge(f, t);
            }
        }
        "bilocal_postselected" => {
            obs(&mut s, &["X0", "X1", "Y0", "Y1", "Z0", "Z1"])?;
            lat(&mut s, &["L1", "L2"])?;
            for t in ["X0", "X1", "Y0", "Y1"] {
                s.add_edge("L1", t);
            }
            for t in ["Y0", "Y1", "Z0", "Z1"] {
                s.add_edge("L2", t);
            }
            for (node, origin, pivot, value) in [
                ("X0", "X", "A", "0"),
                ("X1", "X", "A", "1"),
                ("Y0", "Y", "B", "0"),
                ("Y1", "Y", "B", "1"),
                ("Z0", "Z", "C", "0"),
                ("Z1", "Z", "C", "1"),
            ] {
                s.add_split(node, origin, pivot, value);
            }
        }
        "ic" => {
            obs(&mut s, &["R", "X1", "X2", "Y", "Z"])?;
            lat(&mut s, &["A"])?;
            for (f, t) in [
                ("A", "Y"),
                ("A", "Z"),
                ("Z", "Y"),
                ("X1", "X2"),
                ("X1", "Z"),
                ("X2", "Z"),
                ("R", "Y"),
            ] {
                s.add_edge(f, t);
            }
        }
        "ic_postselected" => {
            obs(&mut s, &["X1", "X2", "Y_R1", "Y_R2", "Z"])?;
            lat(&mut s, &["A"])?;
            for (f, t) in [
                ("A", "Y_R1"),
                ("A", "Y_R2"),
                ("A", "Z"),
                ("Z", "Y_R1"),
                ("Z", "Y_R2"),
                ("X1", "X2"),
                ("X1", "Z"),
                ("X2", "Z"),
            ] {
                s.add_edge(f, t);
            }
            s.add_split("Y_R1", "Y", "R", "1");
            s.add_split("Y_R2", "Y", "R", "2");
        }
        "triangle" => {
            obs(&mut s, &["X", "Y", "Z"])?;
            lat(&mut s, &["A", "B", "C"])?;
            for (f, t) in [
                ("A", "X"),
                ("A", "Y"),
                ("B", "Y"),
                ("B", "Z"),
                ("C", "X"),
                ("C", "Z"),
            ] {
                s.add_edge(f, t);
            }
        }
        other => return Err(Error::UnknownCatalogEntry(other.to_string())),
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<NodeId> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn catalog_entries_validate() {
        for name in CATALOG_NAMES {
            let s = catalog(name).unwrap();
            s.validate().unwrap();
        }
        assert!(matches!(
            catalog("nope"),
            Err(Error::UnknownCatalogEntry(_))
        ));
    }

    #[test]
    fn ancestors_and_descendants() {
        let s = catalog("instrumental").unwrap();
        assert_eq!(s.ancestors("Y").unwrap(), set(&["A", "X", "Z"]));
        assert_eq!(s.ancestors("X").unwrap(), set(&[]));
        assert_eq!(s.descendants("X").unwrap(), set(&["Y", "Z"]));
        assert!(matches!(s.ancestors("Q"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn validate_reports_cycles_and_dangling_edges() {
        let mut s = CausalStructure::new();
        s.add_node("X", NodeKind::Observed).unwrap();
        s.add_node("Y", NodeKind::Observed).unwrap();
        s.add_edge("X", "Y");
        s.add_edge("Y", "X");
        assert!(matches!(s.validate(), Err(Error::CycleDetected(_))));

        let mut s = CausalStructure::new();
        s.add_node("X", NodeKind::Observed).unwrap();
        s.add_edge("X", "Y");
        assert!(matches!(s.validate(), Err(Error::DanglingEdge(_))));

        let mut s = CausalStructure::new();
        s.add_node("X", NodeKind::Observed).unwrap();
        assert!(matches!(
            s.add_node("X", NodeKind::Latent),
            Err(Error::DuplicateName(_))
        ));
    }

    #[test]
    fn d_separation_in_instrumental() {
        let s = catalog("instrumental").unwrap();
        // X and Y are connected through Z.
        assert!(!s.d_separated(&set(&["X"]), &set(&["Y"]), &set(&[])).unwrap());
        // Conditioning on Z opens the collider path X -> Z <- A -> Y.
        assert!(!s
            .d_separated(&set(&["X"]), &set(&["Y"]), &set(&["Z"]))
            .unwrap());
        // X is separated from A outright.
        assert!(s.d_separated(&set(&["X"]), &set(&["A"]), &set(&[])).unwrap());
        assert!(!s
            .d_separated(&set(&["X"]), &set(&["A"]), &set(&["Z"]))
            .unwrap());
        assert!(matches!(
            s.d_separated(&set(&["X"]), &set(&["X"]), &set(&[])),
            Err(Error::OverlappingSets(_))
        ));
        assert!(matches!(
            s.d_separated(&set(&["Q"]), &set(&["X"]), &set(&[])),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn d_separation_collider_descendant() {
        // X -> C <- Y, C -> D: conditioning on D opens the collider.
        let mut s = CausalStructure::new();
        for n in ["X", "Y", "C", "D"] {
            s.add_node(n, NodeKind::Observed).unwrap();
        }
        s.add_edge("X", "C");
        s.add_edge("Y", "C");
        s.add_edge("C", "D");
        s.validate().unwrap();
        assert!(s.d_separated(&set(&["X"]), &set(&["Y"]), &set(&[])).unwrap());
        assert!(!s
            .d_separated(&set(&["X"]), &set(&["Y"]), &set(&["D"]))
            .unwrap());
        assert!(!s
            .d_separated(&set(&["X"]), &set(&["Y"]), &set(&["C"]))
            .unwrap());
    }

    #[test]
    fn subsystems_group_split_children() {
        let s = catalog("bilocal_postselected").unwrap();
        let subs = s.subsystems();
        let names: Vec<String> = subs.iter().map(|x| x.to_string()).collect();
        assert_eq!(names, ["L1_X", "L1_Y", "L2_Y", "L2_Z"]);
        let l1x = Subsystem {
            owner: "L1".into(),
            group: "X".into(),
        };
        assert_eq!(s.group_members(&l1x), set(&["X0", "X1"]));
        assert_eq!(s.subsystem_descendants(&l1x).unwrap(), set(&["X0", "X1"]));
    }

    #[test]
    fn post_select_matches_catalog_bilocal() {
        let base = catalog("bilocal").unwrap();
        let (s, map) = base.post_select("A", 2).unwrap();
        assert_eq!(map["A"], Vec::<String>::new());
        assert_eq!(map["X"], vec!["X_A0".to_string(), "X_A1".to_string()]);
        assert!(!map.contains_key("Y"));
        let (s, _) = s.post_select("B", 2).unwrap();
        let (s, _) = s.post_select("C", 2).unwrap();
        let text = s
            .serialize()
            .replace("X_A", "X")
            .replace("Y_B", "Y")
            .replace("Z_C", "Z");
        assert_eq!(text, catalog("bilocal_postselected").unwrap().serialize());
    }

    #[test]
    fn post_select_rejects_bad_pivots() {
        let s = catalog("instrumental").unwrap();
        assert!(matches!(s.post_select("Z", 2), Err(Error::NotParentless(_))));
        assert!(matches!(s.post_select("A", 2), Err(Error::NotObserved(_))));
        assert!(matches!(
            s.post_select("X", 1),
            Err(Error::InvalidCardinality(1))
        ));
        assert!(matches!(s.post_select("Q", 2), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn parse_serialize_round_trip() {
        for name in CATALOG_NAMES {
            let s = catalog(name).unwrap();
            let text = s.serialize();
            let back = parse_structure(&text).unwrap();
            assert_eq!(back, s, "{name}");
            assert_eq!(back.serialize(), text, "{name}");
        }
    }

    #[test]
    fn parse_reports_positions() {
        let e = parse_structure("node X observed\nedge X > Y\n").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(matches!(parse_structure(""), Err(Error::EmptyStructure)));
        assert!(matches!(
            parse_structure("# only a comment\n"),
            Err(Error::EmptyStructure)
        ));
        let e = parse_structure("node 9X observed\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }
}
