use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num::{BigRational, Signed, Zero};

use super::lp::implies;
use super::system::{InequalitySystem, Relation, Row};
use crate::error::{Error, Result};

/// Resource limits for an elimination run. When exceeded, the error carries
/// the rows already supported on kept columns; those are valid consequences
/// of the input, just not necessarily the whole projection.
#[derive(Debug, Clone)]
pub struct EliminationBudget {
    pub max_rows: usize,
    pub time_limit: Option<Duration>,
}

impl Default for EliminationBudget {
    fn default() -> Self {
        EliminationBudget {
            max_rows: 2_000_000,
            time_limit: None,
        }
    }
}

/// Fixed-width bit set used for row ancestry tracking.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
    count: u32,
}

impl BitSet {
    fn empty(bits: usize) -> Self {
        BitSet {
            words: vec![0; bits.div_ceil(64)],
            count: 0,
        }
    }

    fn singleton(bits: usize, i: usize) -> Self {
        let mut s = Self::empty(bits);
        s.insert(i);
        s
    }

    fn insert(&mut self, i: usize) {
        let w = &mut self.words[i / 64];
        let mask = 1u64 << (i % 64);
        if *w & mask == 0 {
            *w |= mask;
            self.count += 1;
        }
    }

    fn union(&self, other: &BitSet) -> BitSet {
        let mut words = self.words.clone();
        for (w, o) in words.iter_mut().zip(&other.words) {
            *w |= o;
        }
        let count = words.iter().map(|w| w.count_ones()).sum();
        BitSet { words, count }
    }

    fn len(&self) -> u32 {
        self.count
    }
}

#[derive(Debug, Clone)]
struct WorkRow {
    coeffs: Vec<BigRational>,
    relation: Relation,
    provenance: String,
    /// Input rows this row descends from (inequality phase only).
    history: BitSet,
    /// Columns eliminated along this row's derivation.
    eliminated: BitSet,
}

impl WorkRow {
    fn normalize(&mut self) {
        let mut row = Row {
            coeffs: std::mem::take(&mut self.coeffs),
            relation: self.relation,
            provenance: String::new(),
        };
        row.normalize();
        self.coeffs = row.coeffs;
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }
}

struct Eliminator {
    columns: Vec<String>,
    rows: Vec<WorkRow>,
    keep: Vec<bool>,
    live: Vec<bool>,
    budget: EliminationBudget,
    started: Instant,
    sweep_cap: usize,
}

impl Eliminator {
    fn over_time(&self) -> bool {
        self.budget
            .time_limit
            .is_some_and(|lim| self.started.elapsed() > lim)
    }

    fn abort(&self, column: &str) -> Error {
        // Rows already supported on kept columns survive as a partial result.
        let mut partial = InequalitySystem::new(
            self.columns
                .iter()
                .enumerate()
                .filter(|(j, _)| self.keep[*j])
                .map(|(_, c)| c.clone())
                .collect(),
        );
        for row in &self.rows {
            if row
                .coeffs
                .iter()
                .enumerate()
                .all(|(j, c)| c.is_zero() || self.keep[j])
            {
                let coeffs: Vec<BigRational> = row
                    .coeffs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| self.keep[*j])
                    .map(|(_, c)| c.clone())
                    .collect();
                partial.push(coeffs, row.relation, row.provenance.clone());
            }
        }
        partial.canonicalize();
        Error::BudgetExceeded {
            budget: self.budget.max_rows,
            column: column.to_string(),
            partial: Box::new(partial),
        }
    }

    fn dedup(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.relation, &a.coeffs, a.history.len())
                .cmp(&(b.relation, &b.coeffs, b.history.len()))
        });
        self.rows
            .dedup_by(|next, prev| next.relation == prev.relation && next.coeffs == prev.coeffs);
    }

    /// Substitutes equality rows into everything else until no equality
    /// touches a column marked for elimination. The used equality and column
    /// disappear.
    fn substitute_equalities(&mut self) -> Result<()> {
        loop {
            if self.over_time() {
                return Err(self.abort("equality phase"));
            }
            // Lowest-index eliminable column named by any equality row.
            let mut target: Option<(usize, usize)> = None; // (column, row)
            for j in 0..self.columns.len() {
                if self.keep[j] || !self.live[j] {
                    continue;
                }
                let mut best: Option<usize> = None;
                for (i, row) in self.rows.iter().enumerate() {
                    if row.relation == Relation::Eq && !row.coeffs[j].is_zero() {
                        let better = match best {
                            None => true,
                            Some(b) => {
                                let cur = &self.rows[b];
                                let key = |r: &WorkRow| {
                                    (r.coeffs[j].numer().magnitude().clone(), r.coeffs.clone())
                                };
                                key(row) < key(cur)
                            }
                        };
                        if better {
                            best = Some(i);
                        }
                    }
                }
                if let Some(i) = best {
                    target = Some((j, i));
                    break;
                }
            }
            let Some((col, pivot_idx)) = target else {
                return Ok(());
            };
            let pivot = self.rows.swap_remove(pivot_idx);
            let pc = pivot.coeffs[col].clone();
            for row in self.rows.iter_mut() {
                if row.coeffs[col].is_zero() {
                    continue;
                }
                let f = &row.coeffs[col] / &pc;
                for (c, p) in row.coeffs.iter_mut().zip(&pivot.coeffs) {
                    if !p.is_zero() {
                        *c -= &f * p;
                    }
                }
                row.coeffs[col] = BigRational::zero();
                row.normalize();
            }
            self.live[col] = false;
            self.rows.retain(|r| !r.is_zero());
            self.dedup();
        }
    }

    /// One Fourier-Motzkin step on the eliminable column with the smallest
    /// positive*negative row product.
    fn eliminate_column(&mut self) -> Result<bool> {
        let mut best: Option<(usize, usize, usize)> = None; // (pos*neg, total, col)
        for j in 0..self.columns.len() {
            if self.keep[j] || !self.live[j] {
                continue;
            }
            let mut pos = 0usize;
            let mut neg = 0usize;
            for row in &self.rows {
                if row.coeffs[j].is_positive() {
                    pos += 1;
                } else if row.coeffs[j].is_negative() {
                    neg += 1;
                }
            }
            let key = (pos * neg, pos + neg, j);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        let Some((_, _, col)) = best else {
            return Ok(false);
        };
        let col_name = self.columns[col].clone();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut rest = Vec::new();
        for row in self.rows.drain(..) {
            if row.coeffs[col].is_positive() {
                pos.push(row);
            } else if row.coeffs[col].is_negative() {
                neg.push(row);
            } else {
                rest.push(row);
            }
        }
        let mut out = rest;
        for p in &pos {
            for q in &neg {
                if self.over_time() {
                    self.rows = out;
                    return Err(self.abort(&col_name));
                }
                let history = p.history.union(&q.history);
                let mut eliminated = p.eliminated.union(&q.eliminated);
                eliminated.insert(col);
                // Imbert: a derived row with more input ancestors than
                // eliminated columns plus one is redundant.
                if history.len() > eliminated.len() + 1 {
                    continue;
                }
                let pa = &p.coeffs[col];
                let na = &q.coeffs[col];
                let mut coeffs = Vec::with_capacity(p.coeffs.len());
                for (x, y) in p.coeffs.iter().zip(&q.coeffs) {
                    // pa > 0 > na: pa*y - na*x kills the column, positively.
                    coeffs.push(pa * y - na * x);
                }
                debug_assert!(coeffs[col].is_zero());
                let mut row = WorkRow {
                    coeffs,
                    relation: Relation::Ge,
                    provenance: "fme".to_string(),
                    history,
                    eliminated,
                };
                row.normalize();
                if !row.is_zero() {
                    out.push(row);
                }
                if out.len() > self.budget.max_rows {
                    self.rows = out;
                    return Err(self.abort(&col_name));
                }
            }
        }
        self.rows = out;
        self.live[col] = false;
        self.dedup();
        if self.rows.len() > self.budget.max_rows {
            return Err(self.abort(&col_name));
        }
        Ok(true)
    }

    /// Live-column view of the working rows, for LP redundancy checks.
    fn live_system(&self) -> (InequalitySystem, Vec<usize>) {
        let live_cols: Vec<usize> = (0..self.columns.len())
            .filter(|&j| self.live[j])
            .collect();
        let mut sys = InequalitySystem::new(
            live_cols.iter().map(|&j| self.columns[j].clone()).collect(),
        );
        for row in &self.rows {
            let coeffs: Vec<BigRational> =
                live_cols.iter().map(|&j| row.coeffs[j].clone()).collect();
            sys.push(coeffs, row.relation, row.provenance.clone());
        }
        (sys, live_cols)
    }

    /// Removes rows implied by the remaining ones. Deterministic order;
    /// skipped while the row count exceeds the sweep cap (the final pass
    /// always runs).
    fn lp_sweep(&mut self, force: bool) -> Result<()> {
        if !force && self.rows.len() > self.sweep_cap {
            return Ok(());
        }
        self.dedup();
        let (mut sys, _) = self.live_system();
        sys.canonicalize();
        let mut i = 0;
        while i < sys.rows.len() {
            if self.over_time() {
                return Err(self.abort("redundancy sweep"));
            }
            let candidate = sys.rows[i].clone();
            let mut rest = sys.clone();
            rest.rows.remove(i);
            if implies(&rest, &candidate).holds() {
                sys = rest;
            } else {
                i += 1;
            }
        }
        // Rebuild working rows from the swept system with fresh ancestry,
        // as if a new elimination phase started here. All bitsets share one
        // width so later unions stay aligned.
        let (_, live_cols) = self.live_system();
        let width = self.columns.len();
        let n_rows = sys.rows.len().max(1);
        self.rows = sys
            .rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let mut coeffs = vec![BigRational::zero(); width];
                for (k, &j) in live_cols.iter().enumerate() {
                    coeffs[j] = r.coeffs[k].clone();
                }
                WorkRow {
                    coeffs,
                    relation: r.relation,
                    provenance: r.provenance,
                    history: BitSet::singleton(n_rows, i),
                    eliminated: BitSet::empty(width),
                }
            })
            .collect();
        Ok(())
    }
}

/// Projects the system onto `keep` by substituting equalities through the
/// dropped columns and then running exact Fourier-Motzkin elimination with
/// redundancy control. The result is in canonical reduced form: equality
/// rows in reduced echelon form, inequality rows reduced against them and
/// irredundant.
pub fn eliminate(
    system: &InequalitySystem,
    keep: &[String],
    budget: &EliminationBudget,
) -> Result<InequalitySystem> {
    let keep_set: BTreeSet<&String> = keep.iter().collect();
    if keep_set.len() != keep.len() {
        return Err(Error::DimensionMismatch(
            "keep list contains duplicates".to_string(),
        ));
    }
    for k in keep {
        if system.column_index(k).is_none() {
            return Err(Error::DimensionMismatch(format!(
                "keep column '{k}' is not in the system"
            )));
        }
    }
    let width = system.columns.len();
    let keep_mask: Vec<bool> = system
        .columns
        .iter()
        .map(|c| keep_set.contains(c))
        .collect();
    let mut canon = system.clone();
    canon.canonicalize();
    let n_rows = canon.rows.len().max(1);
    let rows: Vec<WorkRow> = canon
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| WorkRow {
            coeffs: r.coeffs.clone(),
            relation: r.relation,
            provenance: r.provenance.clone(),
            history: BitSet::singleton(n_rows, i),
            eliminated: BitSet::empty(width),
        })
        .collect();
    let mut el = Eliminator {
        columns: system.columns.clone(),
        rows,
        keep: keep_mask,
        live: vec![true; width],
        budget: budget.clone(),
        started: Instant::now(),
        sweep_cap: 700,
    };
    el.substitute_equalities()?;
    // Fresh ancestry for the inequality phase: the Imbert bound only counts
    // Fourier-Motzkin steps.
    let n_rows = el.rows.len().max(1);
    for (i, row) in el.rows.iter_mut().enumerate() {
        row.history = BitSet::singleton(n_rows, i);
        row.eliminated = BitSet::empty(width);
    }
    loop {
        let progressed = el.eliminate_column()?;
        if !progressed {
            break;
        }
        el.lp_sweep(false)?;
    }
    el.lp_sweep(true)?;
    // Assemble over the requested columns, in the requested order.
    let mut out = InequalitySystem::new(keep.to_vec());
    let positions: Vec<usize> = keep
        .iter()
        .map(|k| system.column_index(k).expect("validated"))
        .collect();
    for row in &el.rows {
        debug_assert!(row
            .coeffs
            .iter()
            .enumerate()
            .all(|(j, c)| c.is_zero() || el.keep[j]));
        let coeffs: Vec<BigRational> = positions.iter().map(|&j| row.coeffs[j].clone()).collect();
        out.push(coeffs, row.relation, row.provenance.clone());
    }
    out.canonicalize();
    Ok(canonical_reduced_form(&out))
}

/// Canonical reduced form of a projected system: implicit equalities made
/// explicit, equalities in reduced row echelon form, inequalities reduced
/// against the echelon basis, then an exact irredundancy sweep. Two systems
/// describing the same cone reduce to the same rows.
pub fn canonical_reduced_form(system: &InequalitySystem) -> InequalitySystem {
    let mut sys = system.clone();
    sys.canonicalize();
    // Detect inequality rows whose reverse is also valid: implicit equalities.
    loop {
        let mut promoted = None;
        for (i, row) in sys.rows.iter().enumerate() {
            if row.relation != Relation::Ge {
                continue;
            }
            let reversed = Row {
                coeffs: row.coeffs.iter().map(|c| -c.clone()).collect(),
                relation: Relation::Ge,
                provenance: row.provenance.clone(),
            };
            if implies(&sys, &reversed).holds() {
                promoted = Some(i);
                break;
            }
        }
        match promoted {
            Some(i) => {
                sys.rows[i].relation = Relation::Eq;
                sys.canonicalize();
            }
            None => break,
        }
    }
    // Reduced row echelon form of the equality rows.
    let width = sys.columns.len();
    let mut eqs: Vec<Vec<BigRational>> = sys
        .rows
        .iter()
        .filter(|r| r.relation == Relation::Eq)
        .map(|r| r.coeffs.clone())
        .collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..width {
        let Some(pr) = (rank..eqs.len()).find(|&i| !eqs[i][col].is_zero()) else {
            continue;
        };
        eqs.swap(rank, pr);
        let inv = BigRational::from_integer(1.into()) / eqs[rank][col].clone();
        for c in eqs[rank].iter_mut() {
            if !c.is_zero() {
                *c *= &inv;
            }
        }
        for i in 0..eqs.len() {
            if i != rank && !eqs[i][col].is_zero() {
                let f = eqs[i][col].clone();
                let (head, tail) = if i < rank {
                    let (a, b) = eqs.split_at_mut(rank);
                    (&mut a[i], &b[0])
                } else {
                    let (a, b) = eqs.split_at_mut(i);
                    (&mut b[0], &a[rank])
                };
                for (c, p) in head.iter_mut().zip(tail.iter()) {
                    if !p.is_zero() {
                        *c -= &f * p;
                    }
                }
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == eqs.len() {
            break;
        }
    }
    eqs.truncate(rank);
    // Reduce inequality rows against the echelon basis.
    let mut out = InequalitySystem::new(sys.columns.clone());
    for (eq, _) in eqs.iter().zip(&pivots) {
        out.push(eq.clone(), Relation::Eq, "equality basis".to_string());
    }
    for row in &sys.rows {
        if row.relation != Relation::Ge {
            continue;
        }
        let mut coeffs = row.coeffs.clone();
        for (eq, &pc) in eqs.iter().zip(&pivots) {
            if !coeffs[pc].is_zero() {
                let f = coeffs[pc].clone();
                for (c, p) in coeffs.iter_mut().zip(eq) {
                    if !p.is_zero() {
                        *c -= &f * p;
                    }
                }
                coeffs[pc] = BigRational::zero();
            }
        }
        out.push(coeffs, Relation::Ge, row.provenance.clone());
    }
    out.canonicalize();
    // Final irredundancy sweep over inequality rows.
    let mut i = 0;
    while i < out.rows.len() {
        if out.rows[i].relation != Relation::Ge {
            i += 1;
            continue;
        }
        let candidate = out.rows[i].clone();
        let mut rest = out.clone();
        rest.rows.remove(i);
        if implies(&rest, &candidate).holds() {
            out = rest;
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn int(n: i64) -> BigRational {
        BigRational::from(BigInt::from(n))
    }

    fn ints(v: &[i64]) -> Vec<BigRational> {
        v.iter().map(|&n| int(n)).collect()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn eliminates_a_middle_variable() {
        // x <= m, m <= y over columns (x, m, y): projecting out m leaves x <= y.
        let mut s = InequalitySystem::new(names(&["x", "m", "y"]));
        s.push(ints(&[-1, 1, 0]), Relation::Ge, "x<=m".into());
        s.push(ints(&[0, -1, 1]), Relation::Ge, "m<=y".into());
        let out = eliminate(&s, &names(&["x", "y"]), &EliminationBudget::default()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].coeffs, ints(&[-1, 1]));
        assert_eq!(out.rows[0].relation, Relation::Ge);
    }

    #[test]
    fn equality_substitution_runs_first() {
        // m = x + y, m >= 0, z - m >= 0; eliminate m.
        let mut s = InequalitySystem::new(names(&["x", "y", "z", "m"]));
        s.push(ints(&[1, 1, 0, -1]), Relation::Eq, "m=x+y".into());
        s.push(ints(&[0, 0, 0, 1]), Relation::Ge, "m>=0".into());
        s.push(ints(&[0, 0, 1, -1]), Relation::Ge, "z>=m".into());
        let out = eliminate(&s, &names(&["x", "y", "z"]), &EliminationBudget::default()).unwrap();
        let got: BTreeSet<Vec<BigRational>> =
            out.rows.iter().map(|r| r.coeffs.clone()).collect();
        let expect: BTreeSet<Vec<BigRational>> =
            [ints(&[1, 1, 0]), ints(&[-1, -1, 1])].into_iter().collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn unconstrained_column_disappears() {
        let mut s = InequalitySystem::new(names(&["x", "m"]));
        s.push(ints(&[0, 1]), Relation::Ge, "m>=0".into());
        s.push(ints(&[1, 1]), Relation::Ge, "x+m>=0".into());
        let out = eliminate(&s, &names(&["x"]), &EliminationBudget::default()).unwrap();
        // m can absorb anything: no constraint on x survives.
        assert!(out.rows.is_empty());
    }

    #[test]
    fn projection_matches_direct_description() {
        // Simplex-ish cone: a,b,c >= 0; s = a+b+c; t - s >= 0. Keep (s, t).
        let mut s = InequalitySystem::new(names(&["a", "b", "c", "s", "t"]));
        for j in 0..3 {
            let mut v = ints(&[0, 0, 0, 0, 0]);
            v[j] = int(1);
            s.push(v, Relation::Ge, format!("v{j}>=0"));
        }
        s.push(ints(&[1, 1, 1, -1, 0]), Relation::Eq, "sum".into());
        s.push(ints(&[0, 0, 0, -1, 1]), Relation::Ge, "t>=s".into());
        let out = eliminate(&s, &names(&["s", "t"]), &EliminationBudget::default()).unwrap();
        let got: BTreeSet<(Vec<BigRational>, Relation)> = out
            .rows
            .iter()
            .map(|r| (r.coeffs.clone(), r.relation))
            .collect();
        let expect: BTreeSet<(Vec<BigRational>, Relation)> = [
            (ints(&[1, 0]), Relation::Ge),
            (ints(&[-1, 1]), Relation::Ge),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn budget_exhaustion_returns_partial() {
        // Force a tiny row budget; the kept-support rows must all be valid.
        let mut s = InequalitySystem::new(names(&["x", "y", "m"]));
        s.push(ints(&[1, 0, 0]), Relation::Ge, "x>=0".into());
        for k in 1..6i64 {
            s.push(ints(&[k, 1, 1]), Relation::Ge, format!("p{k}"));
            s.push(ints(&[-k, 1, -1]), Relation::Ge, format!("n{k}"));
        }
        let budget = EliminationBudget {
            max_rows: 3,
            time_limit: None,
        };
        match eliminate(&s, &names(&["x", "y"]), &budget) {
            Err(Error::BudgetExceeded { partial, .. }) => {
                // x >= 0 was already supported on kept columns.
                assert!(partial
                    .rows
                    .iter()
                    .any(|r| r.coeffs == ints(&[1, 0]) && r.relation == Relation::Ge));
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn implicit_equalities_are_promoted() {
        let mut s = InequalitySystem::new(names(&["x", "y"]));
        s.push(ints(&[1, -1]), Relation::Ge, "a".into());
        s.push(ints(&[-1, 1]), Relation::Ge, "b".into());
        s.push(ints(&[1, 0]), Relation::Ge, "c".into());
        let out = canonical_reduced_form(&s);
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows[0].relation, Relation::Eq);
        assert_eq!(out.rows[0].coeffs, ints(&[1, -1]));
        // The surviving inequality is reduced against the equality pivot x.
        assert_eq!(out.rows[1].coeffs, ints(&[0, 1]));
    }
}
