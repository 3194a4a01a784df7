use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{CausalStructure, NodeId, SystemId};

/// The resource theory supplying latent nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Theory {
    Classical,
    Quantum,
    BoxWorld,
    GeneralGpt,
}

impl Theory {
    pub fn name(&self) -> &'static str {
        match self {
            Theory::Classical => "classical",
            Theory::Quantum => "quantum",
            Theory::BoxWorld => "boxworld",
            Theory::GeneralGpt => "gpt",
        }
    }

    pub fn parse(name: &str) -> Result<Theory> {
        match name {
            "classical" => Ok(Theory::Classical),
            "quantum" => Ok(Theory::Quantum),
            "boxworld" => Ok(Theory::BoxWorld),
            "gpt" => Ok(Theory::GeneralGpt),
            other => Err(Error::DimensionMismatch(format!(
                "unknown theory '{other}' (expected classical, quantum, boxworld or gpt)"
            ))),
        }
    }
}

/// A set of systems that exist at a common moment of some generation
/// timeline, and therefore carry a joint state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CoexistingSet {
    pub systems: BTreeSet<SystemId>,
}

impl fmt::Display for CoexistingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.systems.iter().map(|s| s.to_string()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// An entropy coordinate: H(front) or H(front|back).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntropyVariable {
    pub front: BTreeSet<SystemId>,
    pub back: BTreeSet<SystemId>,
}

impl EntropyVariable {
    pub fn joint(front: BTreeSet<SystemId>) -> Self {
        EntropyVariable {
            front,
            back: BTreeSet::new(),
        }
    }

    pub fn conditional(front: BTreeSet<SystemId>, back: BTreeSet<SystemId>) -> Self {
        EntropyVariable { front, back }
    }

    pub fn is_conditional(&self) -> bool {
        !self.back.is_empty()
    }

    fn sort_key(&self) -> (usize, Vec<String>, usize, Vec<String>) {
        (
            self.front.len(),
            self.front.iter().map(|s| s.to_string()).collect(),
            self.back.len(),
            self.back.iter().map(|s| s.to_string()).collect(),
        )
    }
}

impl fmt::Display for EntropyVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |set: &BTreeSet<SystemId>| -> String {
            let names: Vec<String> = set.iter().map(|s| s.to_string()).collect();
            names.join(",")
        };
        if self.back.is_empty() {
            write!(f, "H({})", join(&self.front))
        } else {
            write!(f, "H({}|{})", join(&self.front), join(&self.back))
        }
    }
}

// Canonical order: smaller fronts first, then front names, unconditional
// before conditional, then back names.
impl Ord for EntropyVariable {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for EntropyVariable {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One generation step of a timeline: `node` is produced from the state
/// `pre`, consuming the listed latent shares.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transition {
    pub pre: BTreeSet<SystemId>,
    pub node: NodeId,
    pub consumed: BTreeSet<SystemId>,
    pub post: BTreeSet<SystemId>,
}

/// All states and observed-node transitions reachable in one branch,
/// over every topological generation order.
#[derive(Debug, Clone)]
pub struct Timeline {
    pub branch: BTreeMap<NodeId, String>,
    pub states: Vec<BTreeSet<SystemId>>,
    pub transitions: Vec<Transition>,
}

fn active_groups(
    structure: &CausalStructure,
    latent: &str,
    branch: &BTreeMap<NodeId, String>,
) -> BTreeSet<NodeId> {
    let mut groups = BTreeSet::new();
    for child in structure.children(latent) {
        if structure.active_in(&child, branch) {
            groups.insert(structure.origin_of(&child).to_string());
        }
    }
    groups
}

fn shares_on_generation(
    structure: &CausalStructure,
    node: &str,
    branch: &BTreeMap<NodeId, String>,
) -> BTreeSet<SystemId> {
    if structure.is_latent(node) {
        active_groups(structure, node, branch)
            .into_iter()
            .map(|g| SystemId::part(node, &g))
            .collect()
    } else {
        [SystemId::Observed(node.to_string())].into_iter().collect()
    }
}

/// Latent shares a generation of `node` consumes: one per latent parent.
fn consumed_shares(structure: &CausalStructure, node: &str) -> BTreeSet<SystemId> {
    let group = structure.origin_of(node).to_string();
    structure
        .parents(node)
        .into_iter()
        .filter(|p| structure.is_latent(p))
        .map(|p| SystemId::part(&p, &group))
        .collect()
}

/// Breadth-first closure over all generation orders within one branch.
pub fn branch_timeline(
    structure: &CausalStructure,
    branch: &BTreeMap<NodeId, String>,
) -> Timeline {
    let active: Vec<NodeId> = structure
        .node_names()
        .filter(|n| structure.active_in(n, branch))
        .cloned()
        .collect();
    // Initial state: shares of parentless latents plus parentless observed.
    let mut initial: BTreeSet<SystemId> = BTreeSet::new();
    let mut generated0: BTreeSet<NodeId> = BTreeSet::new();
    for n in &active {
        if structure.parents(n).is_empty() {
            initial.extend(shares_on_generation(structure, n, branch));
            generated0.insert(n.clone());
        }
    }
    let mut states: BTreeSet<BTreeSet<SystemId>> = BTreeSet::new();
    let mut transitions: BTreeSet<Transition> = BTreeSet::new();
    let mut seen: BTreeSet<(BTreeSet<SystemId>, BTreeSet<NodeId>)> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert((initial.clone(), generated0.clone()));
    queue.push_back((initial, generated0));
    while let Some((state, generated)) = queue.pop_front() {
        states.insert(state.clone());
        for n in &active {
            if generated.contains(n) {
                continue;
            }
            // Generable: active parents observed-generated or share present.
            let consumed = consumed_shares(structure, n);
            let ready = structure.parents(n).iter().all(|p| {
                if !structure.active_in(p, branch) {
                    return true;
                }
                if structure.is_latent(p) {
                    state.contains(&SystemId::part(p, structure.origin_of(n)))
                } else {
                    generated.contains(p)
                }
            });
            if !ready {
                continue;
            }
            let mut post = state.clone();
            for c in &consumed {
                post.remove(c);
            }
            post.extend(shares_on_generation(structure, n, branch));
            if structure.is_observed(n) {
                transitions.insert(Transition {
                    pre: state.clone(),
                    node: n.clone(),
                    consumed: consumed.clone(),
                    post: post.clone(),
                });
            }
            let mut gen2 = generated.clone();
            gen2.insert(n.clone());
            if seen.insert((post.clone(), gen2.clone())) {
                queue.push_back((post, gen2));
            }
        }
    }
    Timeline {
        branch: branch.clone(),
        states: states.into_iter().collect(),
        transitions: transitions.into_iter().collect(),
    }
}

/// One timeline per branch (a single empty branch when nothing is
/// post-selected).
pub fn timelines(structure: &CausalStructure) -> Result<Vec<Timeline>> {
    structure.validate()?;
    Ok(structure
        .branches()
        .iter()
        .map(|b| branch_timeline(structure, b))
        .collect())
}

/// The canonical generation timeline: lexicographically first branch,
/// lexicographically smallest generable node at every step.
pub fn generation_order(structure: &CausalStructure) -> Result<Vec<CoexistingSet>> {
    structure.validate()?;
    let branches = structure.branches();
    let branch = branches.first().cloned().unwrap_or_default();
    let active: Vec<NodeId> = structure
        .node_names()
        .filter(|n| structure.active_in(n, &branch))
        .cloned()
        .collect();
    let mut state: BTreeSet<SystemId> = BTreeSet::new();
    let mut generated: BTreeSet<NodeId> = BTreeSet::new();
    for n in &active {
        if structure.parents(n).is_empty() {
            state.extend(shares_on_generation(structure, n, &branch));
            generated.insert(n.clone());
        }
    }
    let mut out = vec![CoexistingSet {
        systems: state.clone(),
    }];
    loop {
        let next = active.iter().find(|n| {
            !generated.contains(*n)
                && structure.parents(n).iter().all(|p| {
                    if !structure.active_in(p, &branch) {
                        return true;
                    }
                    if structure.is_latent(p) {
                        state.contains(&SystemId::part(p, structure.origin_of(n)))
                    } else {
                        generated.contains(p)
                    }
                })
        });
        let Some(n) = next else {
            break;
        };
        for c in consumed_shares(structure, n) {
            state.remove(&c);
        }
        state.extend(shares_on_generation(structure, n, &branch));
        generated.insert(n.clone());
        out.push(CoexistingSet {
            systems: state.clone(),
        });
    }
    Ok(out)
}

fn maximal_elements(sets: BTreeSet<BTreeSet<SystemId>>) -> Vec<CoexistingSet> {
    let all: Vec<BTreeSet<SystemId>> = sets.into_iter().collect();
    let mut out = Vec::new();
    for (i, s) in all.iter().enumerate() {
        let dominated = all
            .iter()
            .enumerate()
            .any(|(j, t)| j != i && s.is_subset(t) && s != t);
        if !dominated {
            out.push(CoexistingSet { systems: s.clone() });
        }
    }
    out
}

/// The inclusion-maximal coexisting sets for a theory. Classically every
/// latent enters whole and all systems of a branch coexist; otherwise the
/// states of every generation order in every branch are collected and the
/// maximal ones returned.
pub fn maximal_coexisting_sets(
    structure: &CausalStructure,
    theory: Theory,
) -> Result<Vec<CoexistingSet>> {
    structure.validate()?;
    if theory == Theory::Classical {
        // Classically every variable coexists, including all post-selected
        // copies at once: they are joint functions of the latent variables.
        let mut set: BTreeSet<SystemId> = structure
            .latent_nodes()
            .map(|l| SystemId::Whole(l.clone()))
            .collect();
        for v in structure.observed_nodes() {
            set.insert(SystemId::Observed(v.clone()));
        }
        return Ok(vec![CoexistingSet { systems: set }]);
    }
    let mut sets = BTreeSet::new();
    for timeline in timelines(structure)? {
        sets.extend(timeline.states);
    }
    Ok(maximal_elements(sets))
}

fn nonempty_subsets(items: &[SystemId]) -> Vec<BTreeSet<SystemId>> {
    let n = items.len();
    let mut out = Vec::with_capacity((1usize << n) - 1);
    for mask in 1usize..(1 << n) {
        let mut set = BTreeSet::new();
        for (i, item) in items.iter().enumerate() {
            if mask & (1 << i) != 0 {
                set.insert(item.clone());
            }
        }
        out.push(set);
    }
    out
}

/// Every entropy coordinate the theory assigns to the structure: joint
/// entropies of nonempty coexisting sets and, for theories with genuinely
/// conditional coordinates, H(front|back) for disjoint coexisting pairs that
/// are not entirely classical.
pub fn enumerate_variables(
    structure: &CausalStructure,
    theory: Theory,
) -> Result<Vec<EntropyVariable>> {
    let maximal = maximal_coexisting_sets(structure, theory)?;
    let mut vars: BTreeSet<EntropyVariable> = BTreeSet::new();
    let conditional = matches!(theory, Theory::BoxWorld | Theory::GeneralGpt);
    for set in &maximal {
        let items: Vec<SystemId> = set.systems.iter().cloned().collect();
        for front in nonempty_subsets(&items) {
            vars.insert(EntropyVariable::joint(front));
        }
        if conditional {
            // Ternary assignment: each member to front, back, or out.
            let n = items.len();
            let mut assign = vec![0u8; n];
            loop {
                let mut front = BTreeSet::new();
                let mut back = BTreeSet::new();
                for (i, a) in assign.iter().enumerate() {
                    match a {
                        1 => {
                            front.insert(items[i].clone());
                        }
                        2 => {
                            back.insert(items[i].clone());
                        }
                        _ => {}
                    }
                }
                if !front.is_empty()
                    && !back.is_empty()
                    && front.iter().chain(&back).any(|s| !s.is_classical())
                {
                    vars.insert(EntropyVariable::conditional(front, back));
                }
                // Advance the ternary counter.
                let mut i = 0;
                loop {
                    if i == n {
                        break;
                    }
                    assign[i] += 1;
                    if assign[i] < 3 {
                        break;
                    }
                    assign[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
        }
    }
    Ok(vars.into_iter().collect())
}

/// The observed-marginal coordinates: joint entropies of nonempty sets of
/// observed nodes that can coexist (within one branch).
pub fn marginal_variables(structure: &CausalStructure) -> Result<Vec<EntropyVariable>> {
    structure.validate()?;
    let mut vars: BTreeSet<EntropyVariable> = BTreeSet::new();
    for branch in structure.branches() {
        let items: Vec<SystemId> = structure
            .observed_nodes()
            .filter(|v| structure.active_in(v, &branch))
            .map(|v| SystemId::Observed(v.clone()))
            .collect();
        for front in nonempty_subsets(&items) {
            vars.insert(EntropyVariable::joint(front));
        }
    }
    Ok(vars.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::catalog;

    fn display_all(sets: &[CoexistingSet]) -> Vec<String> {
        sets.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn instrumental_timeline_and_maximal_sets() {
        let s = catalog("instrumental").unwrap();
        let order = generation_order(&s).unwrap();
        assert_eq!(
            display_all(&order),
            ["{A_Y,A_Z,X}", "{A_Y,X,Z}", "{X,Y,Z}"]
        );
        for theory in [Theory::Quantum, Theory::BoxWorld, Theory::GeneralGpt] {
            let sets = maximal_coexisting_sets(&s, theory).unwrap();
            assert_eq!(
                display_all(&sets),
                ["{A_Y,A_Z,X}", "{A_Y,X,Z}", "{X,Y,Z}"],
                "{theory:?}"
            );
        }
        let classical = maximal_coexisting_sets(&s, Theory::Classical).unwrap();
        assert_eq!(display_all(&classical), ["{A,X,Y,Z}"]);
    }

    #[test]
    fn instrumental_gpt_variable_count() {
        let s = catalog("instrumental").unwrap();
        let vars = enumerate_variables(&s, Theory::GeneralGpt).unwrap();
        assert_eq!(vars.len(), 35);
        // Spot checks from the canonical ordering.
        let names: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
        assert!(names.contains(&"H(A_Y,A_Z|X)".to_string()));
        assert!(names.contains(&"H(X|A_Y,A_Z)".to_string()));
        assert!(names.contains(&"H(X,Y,Z)".to_string()));
        assert!(!names.contains(&"H(X|Z)".to_string()), "all-classical conditional");
        // Classical and quantum have only joint coordinates.
        let q = enumerate_variables(&s, Theory::Quantum).unwrap();
        assert!(q.iter().all(|v| !v.is_conditional()));
        assert_eq!(q.len(), 15);
        let c = enumerate_variables(&s, Theory::Classical).unwrap();
        assert_eq!(c.len(), 15); // subsets of {A, X, Y, Z}
    }

    #[test]
    fn postselected_bilocal_states() {
        let s = catalog("bilocal_postselected").unwrap();
        assert_eq!(s.branches().len(), 8);
        let sets = maximal_coexisting_sets(&s, Theory::Quantum).unwrap();
        assert_eq!(sets.len(), 27);
        // The swap-ready state: Y measured, X and Z shares alive.
        assert!(sets.iter().any(|c| c.to_string() == "{L1_X,L2_Z,Y0}"));
        let classical = maximal_coexisting_sets(&s, Theory::Classical).unwrap();
        assert_eq!(classical.len(), 1);
        assert_eq!(
            classical[0].to_string(),
            "{L1,L2,X0,X1,Y0,Y1,Z0,Z1}",
            "all copies coexist classically"
        );
    }

    #[test]
    fn marginal_variable_counts() {
        for (name, expect) in [
            ("instrumental", 7),
            ("ic_postselected", 23),
            ("bilocal_postselected", 26),
        ] {
            let s = catalog(name).unwrap();
            let vars = marginal_variables(&s).unwrap();
            assert_eq!(vars.len(), expect, "{name}");
        }
    }

    #[test]
    fn marginal_order_matches_reference_table() {
        let s = catalog("bilocal_postselected").unwrap();
        let names: Vec<String> = marginal_variables(&s)
            .unwrap()
            .iter()
            .map(|v| v.to_string())
            .collect();
        assert_eq!(
            &names[..6],
            ["H(X0)", "H(X1)", "H(Y0)", "H(Y1)", "H(Z0)", "H(Z1)"]
        );
        assert_eq!(names[6], "H(X0,Y0)");
        assert_eq!(names[14], "H(Y0,Z0)");
        assert_eq!(names[18], "H(X0,Y0,Z0)");
        assert_eq!(names[25], "H(X1,Y1,Z1)");
    }

    #[test]
    fn fig2_timeline_is_forced() {
        let s = catalog("fig2").unwrap();
        let order = generation_order(&s).unwrap();
        assert_eq!(
            display_all(&order),
            [
                "{A_E,A_F,B_D,B_F,C}",
                "{A_E,A_F,B_F,C,D}",
                "{A_F,B_F,C,D,E}",
                "{C,D,E,F}"
            ]
        );
        let sets = maximal_coexisting_sets(&s, Theory::BoxWorld).unwrap();
        assert_eq!(sets.len(), 4);
    }
}
