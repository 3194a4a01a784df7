use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::BigRational;
use num::Zero;

use crate::coexist::{
    enumerate_variables, maximal_coexisting_sets, timelines, EntropyVariable, Theory,
};
use crate::error::{Error, Result};
use crate::graph::{CausalStructure, NodeId, SystemId};
use crate::poly::{InequalitySystem, Relation, Row};

/// One template of linear entropy constraints. Every generated row carries
/// the family name in its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintFamily {
    ShannonClassicalSets,
    Positivity,
    PositivityConditional,
    DataProcessing,
    Independence,
    ClassicalSubsystem,
    Subadditivity,
    ChainLower,
    ChainUpper,
    StrongSubadditivity,
    WeakMonotonicity,
    Purification,
    MonotonicityEntangled,
    DSeparationObserved,
    NonShannonZY,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 15] = [
        ConstraintFamily::ShannonClassicalSets,
        ConstraintFamily::Positivity,
        ConstraintFamily::PositivityConditional,
        ConstraintFamily::DataProcessing,
        ConstraintFamily::Independence,
        ConstraintFamily::ClassicalSubsystem,
        ConstraintFamily::Subadditivity,
        ConstraintFamily::ChainLower,
        ConstraintFamily::ChainUpper,
        ConstraintFamily::StrongSubadditivity,
        ConstraintFamily::WeakMonotonicity,
        ConstraintFamily::Purification,
        ConstraintFamily::MonotonicityEntangled,
        ConstraintFamily::DSeparationObserved,
        ConstraintFamily::NonShannonZY,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintFamily::ShannonClassicalSets => "shannon",
            ConstraintFamily::Positivity => "positivity",
            ConstraintFamily::PositivityConditional => "monotonicity",
            ConstraintFamily::DataProcessing => "data-processing",
            ConstraintFamily::Independence => "independence",
            ConstraintFamily::ClassicalSubsystem => "classical-subsystem",
            ConstraintFamily::Subadditivity => "subadditivity",
            ConstraintFamily::ChainLower => "chain-lower",
            ConstraintFamily::ChainUpper => "chain-upper",
            ConstraintFamily::StrongSubadditivity => "strong-subadditivity",
            ConstraintFamily::WeakMonotonicity => "weak-monotonicity",
            ConstraintFamily::Purification => "purification",
            ConstraintFamily::MonotonicityEntangled => "monotonicity-entangled",
            ConstraintFamily::DSeparationObserved => "d-separation",
            ConstraintFamily::NonShannonZY => "non-shannon-zy",
        }
    }

    pub fn parse(name: &str) -> Result<ConstraintFamily> {
        ConstraintFamily::ALL
            .iter()
            .find(|f| f.name() == name)
            .copied()
            .ok_or_else(|| {
                Error::DimensionMismatch(format!("unknown constraint family '{name}'"))
            })
    }

    /// Whether the family states something valid for the theory.
    fn applicable(&self, theory: Theory) -> bool {
        use ConstraintFamily::*;
        match self {
            ShannonClassicalSets | Positivity | Independence | DSeparationObserved
            | DataProcessing => true,
            PositivityConditional | StrongSubadditivity | WeakMonotonicity | Purification
            | MonotonicityEntangled => theory == Theory::Quantum,
            ClassicalSubsystem | ChainLower | ChainUpper => {
                matches!(theory, Theory::BoxWorld | Theory::GeneralGpt)
            }
            Subadditivity => theory == Theory::BoxWorld,
            NonShannonZY => theory == Theory::Classical,
        }
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the quantum system treats conditional-entropy positivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantumVariant {
    /// Weak monotonicity plus purification of parentless latents;
    /// monotonicity only between pairs that cannot be entangled.
    WeakMonotonicity,
    /// Monotonicity between every disjoint pair; no weak monotonicity and
    /// no purification.
    PositiveConditional,
}

impl QuantumVariant {
    pub fn name(&self) -> &'static str {
        match self {
            QuantumVariant::WeakMonotonicity => "weak-monotonicity",
            QuantumVariant::PositiveConditional => "positive-conditional",
        }
    }

    pub fn parse(name: &str) -> Result<QuantumVariant> {
        match name {
            "weak-monotonicity" => Ok(QuantumVariant::WeakMonotonicity),
            "positive-conditional" => Ok(QuantumVariant::PositiveConditional),
            other => Err(Error::DimensionMismatch(format!(
                "unknown quantum variant '{other}'"
            ))),
        }
    }
}

/// Options controlling which constraint families are instantiated.
#[derive(Debug, Clone)]
pub struct GenerationOptions {
    pub theory: Theory,
    pub quantum_variant: QuantumVariant,
    pub include_non_shannon: bool,
    /// When set, replaces the default family selection.
    pub enabled_families: Option<BTreeSet<ConstraintFamily>>,
}

impl GenerationOptions {
    pub fn new(theory: Theory) -> Self {
        GenerationOptions {
            theory,
            quantum_variant: QuantumVariant::WeakMonotonicity,
            include_non_shannon: false,
            enabled_families: None,
        }
    }

    /// The families this run will instantiate, after applicability and
    /// consistency checks.
    pub fn effective_families(&self) -> Result<BTreeSet<ConstraintFamily>> {
        let mut families = match &self.enabled_families {
            Some(set) => set.clone(),
            None => default_families(self.theory, self.quantum_variant),
        };
        if self.include_non_shannon {
            families.insert(ConstraintFamily::NonShannonZY);
        }
        for f in &families {
            if !f.applicable(self.theory) {
                return Err(Error::IncompatibleFamily {
                    family: f.name().to_string(),
                    theory: self.theory.name().to_string(),
                });
            }
        }
        // Purification pins latent joints to zero entropy; monotonicity over
        // entangleable pairs would then force every share to zero too.
        if families.contains(&ConstraintFamily::Purification) {
            if families.contains(&ConstraintFamily::MonotonicityEntangled) {
                return Err(Error::IncompatibleFamily {
                    family: "monotonicity-entangled".to_string(),
                    theory: "quantum with purification".to_string(),
                });
            }
            if self.quantum_variant == QuantumVariant::PositiveConditional {
                return Err(Error::IncompatibleFamily {
                    family: "purification".to_string(),
                    theory: "quantum (positive-conditional variant)".to_string(),
                });
            }
        }
        Ok(families)
    }
}

/// The default family selection per theory (and quantum variant).
pub fn default_families(theory: Theory, variant: QuantumVariant) -> BTreeSet<ConstraintFamily> {
    use ConstraintFamily::*;
    let mut f: BTreeSet<ConstraintFamily> =
        [ShannonClassicalSets, Positivity, Independence, DSeparationObserved]
            .into_iter()
            .collect();
    match theory {
        Theory::Classical => {}
        Theory::Quantum => {
            f.extend([DataProcessing, StrongSubadditivity, PositivityConditional]);
            if variant == QuantumVariant::WeakMonotonicity {
                f.extend([WeakMonotonicity, Purification]);
            }
        }
        Theory::BoxWorld => {
            f.extend([DataProcessing, ClassicalSubsystem, Subadditivity, ChainLower, ChainUpper]);
        }
        Theory::GeneralGpt => {
            f.extend([DataProcessing, ClassicalSubsystem, ChainLower, ChainUpper]);
        }
    }
    f
}

/// True if no node has two or more latent parents; box-world results then
/// transfer to arbitrary GPTs.
pub fn applicable_gpt_scope(structure: &CausalStructure) -> Result<bool> {
    structure.validate()?;
    Ok(structure.node_names().all(|n| {
        structure
            .parents(n)
            .iter()
            .filter(|p| structure.is_latent(p))
            .count()
            < 2
    }))
}

/// Whether the joint state on `s` and `t` can be entangled across the cut,
/// given the causal structure. Latents are linked directly to latent
/// parents, and through every observed member of `s ∪ t` whose generation
/// consumed shares of several latents; conditioning on such an outcome can
/// entangle the remaining shares. Marginalized outcomes outside the pair
/// never entangle, and a side without any share stays classical.
pub fn entangleable(
    structure: &CausalStructure,
    s: &BTreeSet<SystemId>,
    t: &BTreeSet<SystemId>,
) -> bool {
    let owners = |set: &BTreeSet<SystemId>| -> BTreeSet<NodeId> {
        set.iter()
            .filter_map(|sys| match sys {
                SystemId::Part(sub) => Some(sub.owner.clone()),
                _ => None,
            })
            .collect()
    };
    let owners_s = owners(s);
    let owners_t = owners(t);
    if owners_s.is_empty() || owners_t.is_empty() {
        return false;
    }
    let mut links: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let mut link = |a: &NodeId, b: &NodeId| {
        links.entry(a.clone()).or_default().insert(b.clone());
        links.entry(b.clone()).or_default().insert(a.clone());
    };
    for latent in structure.latent_nodes() {
        for p in structure.parents(latent) {
            if structure.is_latent(&p) {
                link(latent, &p);
            }
        }
    }
    for sys in s.iter().chain(t.iter()) {
        if let SystemId::Observed(v) = sys {
            let latent_parents: Vec<NodeId> = structure
                .parents(v)
                .into_iter()
                .filter(|p| structure.is_latent(p))
                .collect();
            for (i, a) in latent_parents.iter().enumerate() {
                for b in &latent_parents[i + 1..] {
                    link(a, b);
                }
            }
        }
    }
    // Connectivity between the two owner sets.
    let mut frontier: Vec<NodeId> = owners_s.iter().cloned().collect();
    let mut reached = owners_s;
    while let Some(n) = frontier.pop() {
        if owners_t.contains(&n) {
            return true;
        }
        if let Some(next) = links.get(&n) {
            for m in next {
                if reached.insert(m.clone()) {
                    frontier.push(m.clone());
                }
            }
        }
    }
    reached.intersection(&owners_t).next().is_some()
}

// Integer-coefficient expression over entropy variables.
#[derive(Default)]
struct Expr {
    terms: BTreeMap<EntropyVariable, i64>,
}

impl Expr {
    fn add(&mut self, var: EntropyVariable, c: i64) {
        let entry = self.terms.entry(var).or_insert(0);
        *entry += c;
        if *entry == 0 {
            self.terms.retain(|_, v| *v != 0);
        }
    }

    fn joint(&mut self, set: &BTreeSet<SystemId>, c: i64) {
        if !set.is_empty() {
            self.add(EntropyVariable::joint(set.clone()), c);
        }
    }
}

fn union(a: &BTreeSet<SystemId>, b: &BTreeSet<SystemId>) -> BTreeSet<SystemId> {
    a.iter().chain(b.iter()).cloned().collect()
}

fn all_classical<'a>(mut systems: impl Iterator<Item = &'a SystemId>) -> bool {
    systems.all(|s| s.is_classical())
}

fn label(set: &BTreeSet<SystemId>) -> String {
    let names: Vec<String> = set.iter().map(|s| s.to_string()).collect();
    names.join(",")
}

// Enumerates all k^n assignments of n items to k slots.
fn each_assignment(n: usize, k: u8, mut f: impl FnMut(&[u8])) {
    let mut a = vec![0u8; n];
    loop {
        f(&a);
        let mut i = 0;
        while i < n {
            a[i] += 1;
            if a[i] < k {
                break;
            }
            a[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
}

struct Generator<'a> {
    structure: &'a CausalStructure,
    theory: Theory,
    variant: QuantumVariant,
    maximal: Vec<Vec<SystemId>>,
    index: BTreeMap<EntropyVariable, usize>,
    columns: Vec<String>,
    rows: Vec<Row>,
}

impl<'a> Generator<'a> {
    /// Adds H(front|back) with the given sign: a conditional variable when
    /// the vocabulary has one, the chain-rule expansion otherwise.
    fn cond(&self, expr: &mut Expr, front: &BTreeSet<SystemId>, back: &BTreeSet<SystemId>, c: i64) {
        if back.is_empty() {
            expr.joint(front, c);
            return;
        }
        let conditional_vocab = matches!(self.theory, Theory::BoxWorld | Theory::GeneralGpt);
        if conditional_vocab && !all_classical(front.iter().chain(back.iter())) {
            expr.add(
                EntropyVariable::conditional(front.clone(), back.clone()),
                c,
            );
        } else {
            expr.joint(&union(front, back), c);
            expr.joint(back, -c);
        }
    }

    fn push(&mut self, expr: Expr, relation: Relation, provenance: String) {
        if expr.terms.is_empty() {
            return;
        }
        let mut coeffs = vec![BigRational::zero(); self.columns.len()];
        for (var, c) in expr.terms {
            let j = *self
                .index
                .get(&var)
                .unwrap_or_else(|| panic!("variable {var} missing from vocabulary"));
            coeffs[j] = BigRational::from_integer(c.into());
        }
        self.rows.push(Row {
            coeffs,
            relation,
            provenance,
        });
    }

    fn positivity(&mut self) {
        let vars: Vec<EntropyVariable> = self.index.keys().cloned().collect();
        for var in vars {
            let mut e = Expr::default();
            e.add(var.clone(), 1);
            self.push(e, Relation::Ge, format!("positivity: {var}"));
        }
    }

    fn shannon_classical_sets(&mut self) {
        for set in self.maximal.clone() {
            let classical: Vec<SystemId> =
                set.iter().filter(|s| s.is_classical()).cloned().collect();
            let n = classical.len();
            if n == 0 {
                continue;
            }
            let full: BTreeSet<SystemId> = classical.iter().cloned().collect();
            for i in 0..n {
                let mut rest = full.clone();
                rest.remove(&classical[i]);
                let mut e = Expr::default();
                e.joint(&full, 1);
                e.joint(&rest, -1);
                self.push(
                    e,
                    Relation::Ge,
                    format!("shannon: drop {} from {}", classical[i], label(&full)),
                );
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let others: Vec<SystemId> = classical
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i && *k != j)
                        .map(|(_, s)| s.clone())
                        .collect();
                    each_assignment(others.len(), 2, |mask| {
                        let k_set: BTreeSet<SystemId> = others
                            .iter()
                            .zip(mask)
                            .filter(|(_, m)| **m == 1)
                            .map(|(s, _)| s.clone())
                            .collect();
                        let mut ik = k_set.clone();
                        ik.insert(classical[i].clone());
                        let mut jk = k_set.clone();
                        jk.insert(classical[j].clone());
                        let mut ijk = ik.clone();
                        ijk.insert(classical[j].clone());
                        let mut e = Expr::default();
                        e.joint(&ik, 1);
                        e.joint(&jk, 1);
                        e.joint(&ijk, -1);
                        e.joint(&k_set, -1);
                        let p = format!(
                            "shannon: I({}:{}|{})",
                            classical[i],
                            classical[j],
                            label(&k_set)
                        );
                        self.push(e, Relation::Ge, p);
                    });
                }
            }
        }
    }

    // Ordered disjoint nonempty pairs (S, T) within one maximal set.
    fn for_disjoint_pairs(&self, mut f: impl FnMut(&BTreeSet<SystemId>, &BTreeSet<SystemId>)) {
        for set in &self.maximal {
            each_assignment(set.len(), 3, |assign| {
                let mut s = BTreeSet::new();
                let mut t = BTreeSet::new();
                for (item, a) in set.iter().zip(assign) {
                    match a {
                        1 => {
                            s.insert(item.clone());
                        }
                        2 => {
                            t.insert(item.clone());
                        }
                        _ => {}
                    }
                }
                if !s.is_empty() && !t.is_empty() {
                    f(&s, &t);
                }
            });
        }
    }

    fn positivity_conditional(&mut self, entangled_only: bool) {
        let all_pairs =
            self.variant == QuantumVariant::PositiveConditional && !entangled_only;
        let mut out: Vec<(Expr, String)> = Vec::new();
        self.for_disjoint_pairs(|s, t| {
            if all_classical(s.iter().chain(t.iter())) {
                return;
            }
            let linked = entangleable(self.structure, s, t);
            let emit = if entangled_only { linked } else { all_pairs || !linked };
            if !emit {
                return;
            }
            let mut e = Expr::default();
            e.joint(&union(s, t), 1);
            e.joint(t, -1);
            let name = if entangled_only {
                "monotonicity-entangled"
            } else {
                "monotonicity"
            };
            out.push((e, format!("{name}: H({}|{})>=0", label(s), label(t))));
        });
        for (e, p) in out {
            self.push(e, Relation::Ge, p);
        }
    }

    fn data_processing(&mut self) -> Result<()> {
        for timeline in timelines(self.structure)? {
            for tr in &timeline.transitions {
                let mut required = tr.consumed.clone();
                for p in self.structure.parents(&tr.node) {
                    if self.structure.is_observed(&p)
                        && self.structure.active_in(&p, &timeline.branch)
                    {
                        required.insert(SystemId::Observed(p));
                    }
                }
                let optional: Vec<SystemId> = tr
                    .pre
                    .iter()
                    .filter(|s| !required.contains(s))
                    .cloned()
                    .collect();
                let generated = SystemId::Observed(tr.node.clone());
                each_assignment(optional.len(), 3, |assign| {
                    let mut b = required.clone();
                    let mut a = BTreeSet::new();
                    for (item, slot) in optional.iter().zip(assign) {
                        match slot {
                            1 => {
                                b.insert(item.clone());
                            }
                            2 => {
                                a.insert(item.clone());
                            }
                            _ => {}
                        }
                    }
                    if a.is_empty() {
                        return;
                    }
                    let mut c: BTreeSet<SystemId> =
                        b.difference(&tr.consumed).cloned().collect();
                    c.insert(generated.clone());
                    let mut e = Expr::default();
                    self.cond(&mut e, &a, &c, 1);
                    self.cond(&mut e, &a, &b, -1);
                    let p = format!(
                        "data-processing: {} from A={} B={}",
                        tr.node,
                        label(&a),
                        label(&b)
                    );
                    self.push(e, Relation::Ge, p);
                });
            }
        }
        Ok(())
    }

    fn independence(&mut self) -> Result<()> {
        let mut closures: BTreeMap<SystemId, BTreeSet<NodeId>> = BTreeMap::new();
        for set in &self.maximal {
            for sys in set {
                if !closures.contains_key(sys) {
                    closures.insert(sys.clone(), self.structure.system_closure(sys)?);
                }
            }
        }
        let closure_of = |set: &BTreeSet<SystemId>| -> BTreeSet<NodeId> {
            set.iter()
                .flat_map(|s| closures[s].iter().cloned())
                .collect()
        };
        let mut out: Vec<(Expr, String)> = Vec::new();
        self.for_disjoint_pairs(|s, t| {
            if closure_of(s).intersection(&closure_of(t)).next().is_some() {
                return;
            }
            let conditional_vocab =
                matches!(self.theory, Theory::BoxWorld | Theory::GeneralGpt);
            if conditional_vocab && !all_classical(s.iter().chain(t.iter())) {
                let mut e = Expr::default();
                self.cond(&mut e, s, t, 1);
                e.joint(s, -1);
                out.push((
                    e,
                    format!("independence: H({}|{})=H({})", label(s), label(t), label(s)),
                ));
            } else {
                let mut e = Expr::default();
                e.joint(&union(s, t), 1);
                e.joint(s, -1);
                e.joint(t, -1);
                out.push((
                    e,
                    format!("independence: {} _||_ {}", label(s), label(t)),
                ));
            }
        });
        for (e, p) in out {
            self.push(e, Relation::Eq, p);
        }
        Ok(())
    }

    // Disjoint triples (A, B, C) with A, B nonempty and C possibly empty.
    fn for_disjoint_triples(
        &self,
        mut f: impl FnMut(&BTreeSet<SystemId>, &BTreeSet<SystemId>, &BTreeSet<SystemId>),
    ) {
        for set in &self.maximal {
            each_assignment(set.len(), 4, |assign| {
                let mut a = BTreeSet::new();
                let mut b = BTreeSet::new();
                let mut c = BTreeSet::new();
                for (item, slot) in set.iter().zip(assign) {
                    match slot {
                        1 => {
                            a.insert(item.clone());
                        }
                        2 => {
                            b.insert(item.clone());
                        }
                        3 => {
                            c.insert(item.clone());
                        }
                        _ => {}
                    }
                }
                if !a.is_empty() && !b.is_empty() {
                    f(&a, &b, &c);
                }
            });
        }
    }

    fn classical_subsystem(&mut self) {
        let mut out: Vec<(Expr, String)> = Vec::new();
        self.for_disjoint_triples(|a, b, c| {
            if !all_classical(a.iter().chain(b.iter())) {
                return;
            }
            if all_classical(a.iter().chain(b.iter()).chain(c.iter())) {
                return;
            }
            let ab = union(a, b);
            let mut e = Expr::default();
            self.cond(&mut e, &ab, c, 1);
            self.cond(&mut e, a, c, -1);
            out.push((
                e,
                format!(
                    "classical-subsystem: H({}|{})>=H({}|{})",
                    label(&ab),
                    label(c),
                    label(a),
                    label(c)
                ),
            ));
        });
        for (e, p) in out {
            self.push(e, Relation::Ge, p);
        }
    }

    fn subadditivity(&mut self) {
        let mut out: Vec<(Expr, String)> = Vec::new();
        self.for_disjoint_pairs(|a, b| {
            if all_classical(a.iter().chain(b.iter())) {
                return;
            }
            let mut e = Expr::default();
            e.joint(a, 1);
            e.joint(b, 1);
            e.joint(&union(a, b), -1);
            out.push((e, format!("subadditivity: {} , {}", label(a), label(b))));
        });
        for (e, p) in out {
            self.push(e, Relation::Ge, p);
        }
    }

    fn chain_lower(&mut self) {
        let mut out: Vec<(Expr, String)> = Vec::new();
        self.for_disjoint_triples(|a, b, c| {
            if !all_classical(a.iter().chain(b.iter())) {
                return;
            }
            if all_classical(a.iter().chain(b.iter()).chain(c.iter())) {
                return;
            }
            let bc = union(b, c);
            let ab = union(a, b);
            let mut e = Expr::default();
            self.cond(&mut e, a, &bc, 1);
            self.cond(&mut e, &ab, c, -1);
            e.joint(b, 1);
            out.push((
                e,
                format!(
                    "chain-lower: A={} B={} C={}",
                    label(a),
                    label(b),
                    label(c)
                ),
            ));
        });
        for (e, p) in out {
            self.push(e, Relation::Ge, p);
        }
    }

    fn chain_upper(&mut self) {
        let mut out: Vec<(Expr, Relation, String)> = Vec::new();
        self.for_disjoint_triples(|a, b, c| {
            if !all_classical(b.iter()) {
                return;
            }
            if all_classical(a.iter().chain(b.iter()).chain(c.iter())) {
                return;
            }
            let bc = union(b, c);
            let ab = union(a, b);
            let mut e = Expr::default();
            self.cond(&mut e, &ab, c, 1);
            self.cond(&mut e, b, c, -1);
            self.cond(&mut e, a, &bc, -1);
            let relation = if all_classical(c.iter()) {
                Relation::Eq
            } else {
                Relation::Ge
            };
            out.push((
                e,
                relation,
                format!(
                    "chain-upper: A={} B={} C={}",
                    label(a),
                    label(b),
                    label(c)
                ),
            ));
        });
        for (e, r, p) in out {
            self.push(e, r, p);
        }
    }

    fn strong_subadditivity(&mut self) {
        for set in self.maximal.clone() {
            if all_classical(set.iter()) {
                continue;
            }
            let n = set.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    let others: Vec<SystemId> = set
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i && *k != j)
                        .map(|(_, s)| s.clone())
                        .collect();
                    each_assignment(others.len(), 2, |mask| {
                        let k_set: BTreeSet<SystemId> = others
                            .iter()
                            .zip(mask)
                            .filter(|(_, m)| **m == 1)
                            .map(|(s, _)| s.clone())
                            .collect();
                        let mut ik = k_set.clone();
                        ik.insert(set[i].clone());
                        let mut jk = k_set.clone();
                        jk.insert(set[j].clone());
                        let mut ijk = ik.clone();
                        ijk.insert(set[j].clone());
                        let mut e = Expr::default();
                        e.joint(&ik, 1);
                        e.joint(&jk, 1);
                        e.joint(&ijk, -1);
                        e.joint(&k_set, -1);
                        let p = format!(
                            "strong-subadditivity: I({}:{}|{})",
                            set[i],
                            set[j],
                            label(&k_set)
                        );
                        self.push(e, Relation::Ge, p);
                    });
                }
            }
        }
    }

    fn weak_monotonicity(&mut self) {
        for set in self.maximal.clone() {
            if all_classical(set.iter()) {
                continue;
            }
            for x in 0..set.len() {
                let x_set: BTreeSet<SystemId> = [set[x].clone()].into_iter().collect();
                let others: Vec<SystemId> = set
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != x)
                    .map(|(_, s)| s.clone())
                    .collect();
                each_assignment(others.len(), 2, |mask| {
                    let y: BTreeSet<SystemId> = others
                        .iter()
                        .zip(mask)
                        .filter(|(_, m)| **m == 1)
                        .map(|(s, _)| s.clone())
                        .collect();
                    let z: BTreeSet<SystemId> = others
                        .iter()
                        .zip(mask)
                        .filter(|(_, m)| **m == 0)
                        .map(|(s, _)| s.clone())
                        .collect();
                    // Implied by plain monotonicity when neither side can be
                    // entangled with x.
                    if !entangleable(self.structure, &x_set, &y)
                        && !entangleable(self.structure, &x_set, &z)
                    {
                        return;
                    }
                    let mut e = Expr::default();
                    e.joint(&union(&x_set, &y), 1);
                    e.joint(&y, -1);
                    e.joint(&union(&x_set, &z), 1);
                    e.joint(&z, -1);
                    let p = format!(
                        "weak-monotonicity: x={} Y={} Z={}",
                        set[x],
                        label(&y),
                        label(&z)
                    );
                    self.push(e, Relation::Ge, p);
                });
            }
        }
    }

    fn purification(&mut self) {
        for branch in self.structure.branches() {
            for latent in self.structure.latent_nodes() {
                if !self.structure.parents(latent).is_empty() {
                    continue;
                }
                let shares: Vec<SystemId> = self
                    .structure
                    .children(latent)
                    .into_iter()
                    .filter(|c| self.structure.active_in(c, &branch))
                    .map(|c| self.structure.origin_of(&c).to_string())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .map(|g| SystemId::part(latent, &g))
                    .collect();
                if shares.is_empty() {
                    continue;
                }
                let full: BTreeSet<SystemId> = shares.iter().cloned().collect();
                let mut e = Expr::default();
                e.joint(&full, 1);
                self.push(
                    e,
                    Relation::Eq,
                    format!("purification: H({})=0", label(&full)),
                );
                each_assignment(shares.len(), 2, |mask| {
                    let s: BTreeSet<SystemId> = shares
                        .iter()
                        .zip(mask)
                        .filter(|(_, m)| **m == 1)
                        .map(|(sys, _)| sys.clone())
                        .collect();
                    if s.is_empty() || s.len() == shares.len() {
                        return;
                    }
                    let rest: BTreeSet<SystemId> = full.difference(&s).cloned().collect();
                    let mut e = Expr::default();
                    e.joint(&s, 1);
                    e.joint(&rest, -1);
                    self.push(
                        e,
                        Relation::Eq,
                        format!("purification: H({})=H({})", label(&s), label(&rest)),
                    );
                });
            }
        }
    }

    fn d_separation(&mut self) -> Result<()> {
        if self.theory == Theory::Classical {
            return self.d_separation_classical();
        }
        let mut out: Vec<(Expr, String)> = Vec::new();
        for set in &self.maximal {
            let observed: Vec<NodeId> = set
                .iter()
                .filter_map(|s| match s {
                    SystemId::Observed(n) => Some(n.clone()),
                    _ => None,
                })
                .collect();
            let mut error = None;
            each_assignment(observed.len(), 4, |assign| {
                if error.is_some() {
                    return;
                }
                let mut x = BTreeSet::new();
                let mut y = BTreeSet::new();
                let mut z = BTreeSet::new();
                for (node, slot) in observed.iter().zip(assign) {
                    match slot {
                        1 => {
                            x.insert(node.clone());
                        }
                        2 => {
                            y.insert(node.clone());
                        }
                        3 => {
                            z.insert(node.clone());
                        }
                        _ => {}
                    }
                }
                if x.is_empty() || y.is_empty() {
                    return;
                }
                // I(X:Y|Z) is symmetric; keep one ordering.
                if x.iter().next() > y.iter().next() {
                    return;
                }
                match self.structure.d_separated(&x, &y, &z) {
                    Ok(false) => {}
                    Ok(true) => {
                        let to_sys = |names: &BTreeSet<NodeId>| -> BTreeSet<SystemId> {
                            names
                                .iter()
                                .map(|n| SystemId::Observed(n.clone()))
                                .collect()
                        };
                        let xs = to_sys(&x);
                        let ys = to_sys(&y);
                        let zs = to_sys(&z);
                        let mut e = Expr::default();
                        e.joint(&union(&xs, &zs), 1);
                        e.joint(&union(&ys, &zs), 1);
                        e.joint(&union(&union(&xs, &ys), &zs), -1);
                        e.joint(&zs, -1);
                        let names =
                            |s: &BTreeSet<NodeId>| s.iter().cloned().collect::<Vec<_>>().join(",");
                        out.push((
                            e,
                            format!(
                                "d-separation: I({}:{}|{})",
                                names(&x),
                                names(&y),
                                names(&z)
                            ),
                        ));
                    }
                    Err(err) => error = Some(err),
                }
            });
            if let Some(err) = error {
                return Err(err);
            }
        }
        for (e, p) in out {
            self.push(e, Relation::Eq, p);
        }
        Ok(())
    }

    // The classical joint distribution over all variables (all copies
    // included) factorizes over the full graph: every variable is
    // independent of its non-descendants given its parents.
    fn d_separation_classical(&mut self) -> Result<()> {
        let all: BTreeSet<NodeId> = self.structure.node_names().cloned().collect();
        let to_sys = |n: &NodeId| -> SystemId {
            if self.structure.is_latent(n) {
                SystemId::Whole(n.clone())
            } else {
                SystemId::Observed(n.clone())
            }
        };
        for v in &all {
            let parents: BTreeSet<NodeId> = self.structure.parents(v).into_iter().collect();
            let mut desc: BTreeSet<NodeId> = BTreeSet::new();
            let mut frontier = vec![v.clone()];
            while let Some(n) = frontier.pop() {
                for c in self.structure.children(&n) {
                    if desc.insert(c.clone()) {
                        frontier.push(c);
                    }
                }
            }
            let nd: BTreeSet<NodeId> = all
                .iter()
                .filter(|n| *n != v && !desc.contains(*n) && !parents.contains(*n))
                .cloned()
                .collect();
            if nd.is_empty() {
                continue;
            }
            let v_set: BTreeSet<SystemId> = [to_sys(v)].into_iter().collect();
            let nd_set: BTreeSet<SystemId> = nd.iter().map(&to_sys).collect();
            let pa_set: BTreeSet<SystemId> = parents.iter().map(&to_sys).collect();
            let mut e = Expr::default();
            e.joint(&union(&v_set, &pa_set), 1);
            e.joint(&union(&nd_set, &pa_set), 1);
            e.joint(&union(&union(&v_set, &nd_set), &pa_set), -1);
            e.joint(&pa_set, -1);
            let names = |s: &BTreeSet<NodeId>| s.iter().cloned().collect::<Vec<_>>().join(",");
            let p = format!("d-separation: I({}:{}|{})", v, names(&nd), names(&parents));
            self.push(e, Relation::Eq, p);
        }
        Ok(())
    }

    fn non_shannon_zy(&mut self) {
        for set in self.maximal.clone() {
            let observed: Vec<SystemId> = set
                .iter()
                .filter(|s| matches!(s, SystemId::Observed(_)))
                .cloned()
                .collect();
            let n = observed.len();
            if n < 4 {
                continue;
            }
            for ci in 0..n {
                for di in 0..n {
                    for ei in 0..n {
                        for fi in 0..n {
                            let distinct = ci != di
                                && ci != ei
                                && ci != fi
                                && di != ei
                                && di != fi
                                && ei != fi;
                            if !distinct || di > ei {
                                // Coefficients are symmetric in (D, E).
                                continue;
                            }
                            let c = &observed[ci];
                            let d = &observed[di];
                            let e_ = &observed[ei];
                            let f = &observed[fi];
                            let set_of = |items: &[&SystemId]| -> BTreeSet<SystemId> {
                                items.iter().map(|s| (*s).clone()).collect()
                            };
                            let mut e = Expr::default();
                            // 2 I(D:E|F) + I(D:E|C) + I(F:C) - I(D:E)
                            //   + I(D:F|E) + I(E:F|D) >= 0
                            e.joint(&set_of(&[d]), -2);
                            e.joint(&set_of(&[e_]), -2);
                            e.joint(&set_of(&[f]), -1);
                            e.joint(&set_of(&[d, e_]), 3);
                            e.joint(&set_of(&[d, f]), 3);
                            e.joint(&set_of(&[e_, f]), 3);
                            e.joint(&set_of(&[d, c]), 1);
                            e.joint(&set_of(&[e_, c]), 1);
                            e.joint(&set_of(&[f, c]), -1);
                            e.joint(&set_of(&[d, e_, f]), -4);
                            e.joint(&set_of(&[d, e_, c]), -1);
                            let p =
                                format!("non-shannon-zy: C={c} D={d} E={e_} F={f}");
                            self.push(e, Relation::Ge, p);
                        }
                    }
                }
            }
        }
    }
}

/// Generates the linear entropy-constraint system for a structure under the
/// given options. Rows are canonical: integer coefficients, deduplicated,
/// sorted.
pub fn generate(
    structure: &CausalStructure,
    options: &GenerationOptions,
) -> Result<InequalitySystem> {
    structure.validate()?;
    let families = options.effective_families()?;
    let vars = enumerate_variables(structure, options.theory)?;
    let columns: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
    let index: BTreeMap<EntropyVariable, usize> = vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();
    let maximal: Vec<Vec<SystemId>> = maximal_coexisting_sets(structure, options.theory)?
        .into_iter()
        .map(|s| s.systems.into_iter().collect())
        .collect();
    let mut g = Generator {
        structure,
        theory: options.theory,
        variant: options.quantum_variant,
        maximal,
        index,
        columns,
        rows: Vec::new(),
    };
    for family in &families {
        match family {
            ConstraintFamily::Positivity => g.positivity(),
            ConstraintFamily::ShannonClassicalSets => g.shannon_classical_sets(),
            ConstraintFamily::PositivityConditional => g.positivity_conditional(false),
            ConstraintFamily::MonotonicityEntangled => g.positivity_conditional(true),
            ConstraintFamily::DataProcessing => g.data_processing()?,
            ConstraintFamily::Independence => g.independence()?,
            ConstraintFamily::ClassicalSubsystem => g.classical_subsystem(),
            ConstraintFamily::Subadditivity => g.subadditivity(),
            ConstraintFamily::ChainLower => g.chain_lower(),
            ConstraintFamily::ChainUpper => g.chain_upper(),
            ConstraintFamily::StrongSubadditivity => g.strong_subadditivity(),
            ConstraintFamily::WeakMonotonicity => g.weak_monotonicity(),
            ConstraintFamily::Purification => g.purification(),
            ConstraintFamily::DSeparationObserved => g.d_separation()?,
            ConstraintFamily::NonShannonZY => g.non_shannon_zy(),
        }
    }
    let mut system = InequalitySystem::new(g.columns.clone());
    for row in g.rows {
        system.push(row.coeffs, row.relation, row.provenance);
    }
    system.canonicalize();
    Ok(system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{catalog, CausalStructure, NodeKind};
    use crate::poly::ImpliesOutcome;

    fn build(name: &str) -> CausalStructure {
        catalog(name).unwrap()
    }

    fn system(name: &str, theory: Theory) -> InequalitySystem {
        generate(&build(name), &GenerationOptions::new(theory)).unwrap()
    }

    fn count_family(sys: &InequalitySystem, prefix: &str) -> usize {
        sys.rows
            .iter()
            .filter(|r| {
                r.provenance.starts_with(prefix)
                    && !r.provenance.starts_with(&format!("{prefix}-"))
            })
            .count()
    }

    fn row_keys(sys: &InequalitySystem) -> BTreeSet<(Vec<String>, String)> {
        sys.rows
            .iter()
            .map(|r| {
                (
                    r.coeffs.iter().map(|c| c.to_string()).collect(),
                    r.relation.to_string(),
                )
            })
            .collect()
    }

    #[test]
    fn single_node_gives_one_positivity_row() {
        let mut s = CausalStructure::new();
        s.add_node("X", NodeKind::Observed).unwrap();
        for theory in [
            Theory::Classical,
            Theory::Quantum,
            Theory::BoxWorld,
            Theory::GeneralGpt,
        ] {
            let sys = generate(&s, &GenerationOptions::new(theory)).unwrap();
            assert_eq!(sys.columns, vec!["H(X)".to_string()]);
            assert_eq!(sys.rows.len(), 1, "{theory:?}");
            assert_eq!(sys.rows[0].relation, Relation::Ge);
        }
    }

    #[test]
    fn instrumental_gpt_has_independence_equalities() {
        let sys = system("instrumental", Theory::GeneralGpt);
        let wanted = [
            "independence: H(X|A_Y,A_Z)=H(X)",
            "independence: H(A_Y,A_Z|X)=H(A_Y,A_Z)",
        ];
        for w in wanted {
            assert!(
                sys.rows
                    .iter()
                    .any(|r| r.provenance == w && r.relation == Relation::Eq),
                "missing {w}"
            );
        }
        // A's two shares share an origin, so they are never independent.
        assert!(!sys
            .rows
            .iter()
            .any(|r| r.provenance.contains("independence: H(A_Y|A_Z)")));
    }

    #[test]
    fn instrumental_gpt_rows_subset_of_boxworld() {
        let gpt = system("instrumental", Theory::GeneralGpt);
        let bw = system("instrumental", Theory::BoxWorld);
        assert_eq!(gpt.columns, bw.columns);
        let bw_keys = row_keys(&bw);
        for key in row_keys(&gpt) {
            assert!(bw_keys.contains(&key));
        }
        assert!(count_family(&bw, "subadditivity") > 0);
        assert_eq!(count_family(&gpt, "subadditivity"), 0);
    }

    #[test]
    fn instrumental_quantum_monotonicity_counts() {
        let mut pc = GenerationOptions::new(Theory::Quantum);
        pc.quantum_variant = QuantumVariant::PositiveConditional;
        let pc_sys = generate(&build("instrumental"), &pc).unwrap();
        assert_eq!(count_family(&pc_sys, "monotonicity"), 20);
        assert_eq!(count_family(&pc_sys, "weak-monotonicity"), 0);

        let wm_sys = system("instrumental", Theory::Quantum);
        assert_eq!(count_family(&wm_sys, "monotonicity"), 14);
        assert_eq!(count_family(&wm_sys, "weak-monotonicity"), 4);
        assert_eq!(count_family(&wm_sys, "purification"), 2);
    }

    #[test]
    fn entangled_monotonicity_completes_the_unfiltered_set() {
        // Filtered monotonicity plus the entangled pairs covers exactly the
        // rows the unfiltered variant emits.
        let mut pc = GenerationOptions::new(Theory::Quantum);
        pc.quantum_variant = QuantumVariant::PositiveConditional;
        let pc_sys = generate(&build("instrumental"), &pc).unwrap();

        let mut split = GenerationOptions::new(Theory::Quantum);
        let mut families = default_families(Theory::Quantum, QuantumVariant::WeakMonotonicity);
        families.remove(&ConstraintFamily::WeakMonotonicity);
        families.remove(&ConstraintFamily::Purification);
        families.insert(ConstraintFamily::MonotonicityEntangled);
        split.enabled_families = Some(families);
        let split_sys = generate(&build("instrumental"), &split).unwrap();

        assert_eq!(count_family(&split_sys, "monotonicity-entangled"), 6);
        assert_eq!(row_keys(&pc_sys), row_keys(&split_sys));
    }

    #[test]
    fn weak_monotonicity_rows_follow_from_unfiltered_monotonicity() {
        let wm_sys = system("instrumental", Theory::Quantum);
        let mut pc = GenerationOptions::new(Theory::Quantum);
        pc.quantum_variant = QuantumVariant::PositiveConditional;
        let pc_sys = generate(&build("instrumental"), &pc).unwrap();
        assert_eq!(wm_sys.columns, pc_sys.columns);
        let mut checked = 0;
        for row in &wm_sys.rows {
            if !row.provenance.starts_with("weak-monotonicity") {
                continue;
            }
            match crate::poly::implies(&pc_sys, row) {
                ImpliesOutcome::Implied { .. } => checked += 1,
                ImpliesOutcome::NotImplied { .. } => {
                    panic!("not implied: {}", row.provenance)
                }
            }
        }
        assert_eq!(checked, 4);
    }

    #[test]
    fn family_theory_mismatches_are_rejected() {
        let s = build("instrumental");
        let mut opts = GenerationOptions::new(Theory::GeneralGpt);
        let mut fams = default_families(Theory::GeneralGpt, QuantumVariant::WeakMonotonicity);
        fams.insert(ConstraintFamily::Subadditivity);
        opts.enabled_families = Some(fams);
        assert!(matches!(
            generate(&s, &opts),
            Err(Error::IncompatibleFamily { .. })
        ));

        let mut opts = GenerationOptions::new(Theory::BoxWorld);
        opts.enabled_families = Some(
            [ConstraintFamily::Positivity, ConstraintFamily::WeakMonotonicity]
                .into_iter()
                .collect(),
        );
        assert!(generate(&s, &opts).is_err());

        let mut opts = GenerationOptions::new(Theory::Quantum);
        let mut fams = default_families(Theory::Quantum, QuantumVariant::WeakMonotonicity);
        fams.insert(ConstraintFamily::MonotonicityEntangled);
        opts.enabled_families = Some(fams);
        assert!(generate(&s, &opts).is_err());

        let mut opts = GenerationOptions::new(Theory::Quantum);
        opts.quantum_variant = QuantumVariant::PositiveConditional;
        opts.enabled_families = Some(
            [ConstraintFamily::Positivity, ConstraintFamily::Purification]
                .into_iter()
                .collect(),
        );
        assert!(generate(&s, &opts).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        for theory in [Theory::Classical, Theory::Quantum, Theory::BoxWorld] {
            let a = system("instrumental", theory);
            let b = system("instrumental", theory);
            assert_eq!(a.to_tsv(), b.to_tsv());
        }
    }

    #[test]
    fn non_shannon_rows_only_on_request() {
        let s = build("fig2");
        let plain = generate(&s, &GenerationOptions::new(Theory::Classical)).unwrap();
        assert_eq!(count_family(&plain, "non-shannon-zy"), 0);
        let mut opts = GenerationOptions::new(Theory::Classical);
        opts.include_non_shannon = true;
        let extra = generate(&s, &opts).unwrap();
        // 4 observed nodes, ordered distinct 4-tuples, halved by symmetry.
        assert_eq!(count_family(&extra, "non-shannon-zy"), 12);
        assert!(extra.rows.len() > plain.rows.len());

        let mut opts = GenerationOptions::new(Theory::Quantum);
        opts.include_non_shannon = true;
        assert!(generate(&s, &opts).is_err());
    }

    #[test]
    fn gpt_scope_predicate_matches_latent_in_degree() {
        assert!(applicable_gpt_scope(&build("instrumental")).unwrap());
        assert!(applicable_gpt_scope(&build("ic_postselected")).unwrap());
        // Y has two latent parents in the bilocal structure.
        assert!(!applicable_gpt_scope(&build("bilocal")).unwrap());
        assert!(!applicable_gpt_scope(&build("triangle")).unwrap());
    }

    #[test]
    fn entangleability_follows_share_ownership() {
        let s = build("bilocal_postselected");
        let part = |o: &str, g: &str| SystemId::part(o, g);
        let set = |items: &[SystemId]| -> BTreeSet<SystemId> { items.iter().cloned().collect() };
        // Shares of one latent are always entangleable.
        assert!(entangleable(
            &s,
            &set(&[part("L1", "X")]),
            &set(&[part("L1", "Y")])
        ));
        // Shares of separate latents are not, before any joint measurement.
        assert!(!entangleable(
            &s,
            &set(&[part("L1", "X")]),
            &set(&[part("L2", "Z")])
        ));
        // Conditioning on Y0, which consumed shares of both, links them.
        assert!(entangleable(
            &s,
            &set(&[part("L1", "X"), SystemId::Observed("Y0".to_string())]),
            &set(&[part("L2", "Z")])
        ));
        // A classical side is never entangleable.
        assert!(!entangleable(
            &s,
            &set(&[SystemId::Observed("Y0".to_string())]),
            &set(&[part("L2", "Z")])
        ));
    }

    #[test]
    fn purification_ties_complementary_share_sets() {
        let sys = system("instrumental", Theory::Quantum);
        let rows: Vec<&Row> = sys
            .rows
            .iter()
            .filter(|r| r.provenance.starts_with("purification"))
            .collect();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.relation == Relation::Eq));
        assert!(rows
            .iter()
            .any(|r| r.provenance == "purification: H(A_Y,A_Z)=0"));
        assert!(rows
            .iter()
            .any(|r| r.provenance == "purification: H(A_Y)=H(A_Z)"));
    }
}
