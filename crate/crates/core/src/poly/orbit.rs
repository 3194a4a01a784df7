use std::collections::{BTreeMap, BTreeSet};

use super::system::{InequalitySystem, Relation, Row};
use crate::error::{Error, Result};

/// A finite group of column permutations, closed under composition.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    /// Each element maps column index `i` to `perm[i]`.
    elements: Vec<Vec<usize>>,
}

fn parse_variable_name(name: &str) -> Option<(Vec<String>, Vec<String>)> {
    let inner = name.strip_prefix("H(")?.strip_suffix(')')?;
    let (front, back) = match inner.split_once('|') {
        Some((f, b)) => (f, Some(b)),
        None => (inner, None),
    };
    let split = |s: &str| -> Vec<String> {
        s.split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect()
    };
    Some((
        split(front),
        back.map(|b| split(b)).unwrap_or_default(),
    ))
}

fn rename_variable(name: &str, renaming: &BTreeMap<String, String>) -> Result<String> {
    let Some((front, back)) = parse_variable_name(name) else {
        return Err(Error::InvalidGenerator(format!(
            "column '{name}' is not an entropy variable"
        )));
    };
    let map = |tokens: Vec<String>| -> Vec<String> {
        let mut out: Vec<String> = tokens
            .into_iter()
            .map(|t| renaming.get(&t).cloned().unwrap_or(t))
            .collect();
        out.sort();
        out
    };
    let front = map(front);
    let back = map(back);
    Ok(if back.is_empty() {
        format!("H({})", front.join(","))
    } else {
        format!("H({}|{})", front.join(","), back.join(","))
    })
}

impl SymmetryGroup {
    pub fn identity(n_columns: usize) -> Self {
        SymmetryGroup {
            elements: vec![(0..n_columns).collect()],
        }
    }

    /// Builds the closure of system-name renamings acting on entropy-variable
    /// columns. Every renaming must permute the column set.
    pub fn from_renamings(
        columns: &[String],
        renamings: &[BTreeMap<String, String>],
    ) -> Result<Self> {
        let index: BTreeMap<&String, usize> =
            columns.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut generators: Vec<Vec<usize>> = Vec::new();
        for renaming in renamings {
            let mut perm = vec![usize::MAX; columns.len()];
            let mut hit = vec![false; columns.len()];
            for (i, col) in columns.iter().enumerate() {
                let renamed = rename_variable(col, renaming)?;
                let Some(&j) = index.get(&renamed) else {
                    return Err(Error::InvalidGenerator(format!(
                        "renaming maps '{col}' to '{renamed}', which is not a column"
                    )));
                };
                if hit[j] {
                    return Err(Error::InvalidGenerator(format!(
                        "renaming is not injective at '{renamed}'"
                    )));
                }
                hit[j] = true;
                perm[i] = j;
            }
            generators.push(perm);
        }
        Self::closure(columns.len(), generators)
    }

    fn closure(n: usize, generators: Vec<Vec<usize>>) -> Result<Self> {
        const CAP: usize = 1 << 20;
        let identity: Vec<usize> = (0..n).collect();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        seen.insert(identity.clone());
        let mut frontier = vec![identity];
        while let Some(p) = frontier.pop() {
            for g in &generators {
                let q: Vec<usize> = (0..n).map(|i| g[p[i]]).collect();
                if seen.insert(q.clone()) {
                    if seen.len() > CAP {
                        return Err(Error::InvalidGenerator(
                            "symmetry group exceeds the supported size".to_string(),
                        ));
                    }
                    frontier.push(q);
                }
            }
        }
        Ok(SymmetryGroup {
            elements: seen.into_iter().collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn apply(perm: &[usize], row: &Row) -> Row {
        let mut coeffs = vec![num::BigRational::from_integer(0.into()); row.coeffs.len()];
        for (i, c) in row.coeffs.iter().enumerate() {
            coeffs[perm[i]] = c.clone();
        }
        let mut out = Row {
            coeffs,
            relation: row.relation,
            provenance: row.provenance.clone(),
        };
        out.normalize();
        out
    }
}

/// One symmetry class of system rows.
#[derive(Debug, Clone)]
pub struct OrbitClass {
    /// Lexicographically smallest image over the group.
    pub representative: Row,
    /// Indices of the system rows belonging to this class.
    pub row_indices: Vec<usize>,
}

impl OrbitClass {
    pub fn size(&self) -> usize {
        self.row_indices.len()
    }
}

/// Partitions the system rows into symmetry classes. Class sizes sum to the
/// row count; representatives are lexicographic minima, and classes are
/// sorted by representative.
pub fn orbit_classify(system: &InequalitySystem, group: &SymmetryGroup) -> Vec<OrbitClass> {
    let mut classes: BTreeMap<(Relation, Vec<num::BigRational>), (Row, Vec<usize>)> =
        BTreeMap::new();
    for (i, row) in system.rows.iter().enumerate() {
        let mut best: Option<Row> = None;
        for perm in group.elements() {
            let image = SymmetryGroup::apply(perm, row);
            let better = match &best {
                None => true,
                Some(b) => image.key() < b.key(),
            };
            if better {
                best = Some(image);
            }
        }
        let rep = best.expect("group contains the identity");
        let key = (rep.relation, rep.coeffs.clone());
        classes
            .entry(key)
            .or_insert_with(|| (rep, Vec::new()))
            .1
            .push(i);
    }
    classes
        .into_values()
        .map(|(representative, row_indices)| OrbitClass {
            representative,
            row_indices,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{BigInt, BigRational};

    fn int(n: i64) -> BigRational {
        BigRational::from(BigInt::from(n))
    }

    fn ints(v: &[i64]) -> Vec<BigRational> {
        v.iter().map(|&n| int(n)).collect()
    }

    #[test]
    fn renaming_respects_canonical_sorting() {
        let map: BTreeMap<String, String> = [("X0", "X1"), ("X1", "X0")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(rename_variable("H(X0,Y0)", &map).unwrap(), "H(X1,Y0)");
        assert_eq!(rename_variable("H(X1,Y0|X0)", &map).unwrap(), "H(X0,Y0|X1)");
        assert_eq!(rename_variable("H(Y0)", &map).unwrap(), "H(Y0)");
    }

    #[test]
    fn swap_group_classifies_rows() {
        let columns: Vec<String> = ["H(X0)", "H(X1)", "H(Y0)"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let swap: BTreeMap<String, String> = [("X0", "X1"), ("X1", "X0")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let group = SymmetryGroup::from_renamings(&columns, &[swap]).unwrap();
        assert_eq!(group.order(), 2);
        let mut sys = InequalitySystem::new(columns);
        sys.push(ints(&[1, 0, 0]), Relation::Ge, "x0".into());
        sys.push(ints(&[0, 1, 0]), Relation::Ge, "x1".into());
        sys.push(ints(&[0, 0, 1]), Relation::Ge, "y0".into());
        let classes = orbit_classify(&sys, &group);
        assert_eq!(classes.len(), 2);
        let sizes: Vec<usize> = classes.iter().map(|c| c.size()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 3);
        assert!(sizes.contains(&2) && sizes.contains(&1));
    }

    #[test]
    fn non_permutation_renaming_is_rejected() {
        let columns: Vec<String> = ["H(X0)", "H(X1)"].iter().map(|s| s.to_string()).collect();
        let bad: BTreeMap<String, String> =
            [("X0".to_string(), "X1".to_string())].into_iter().collect();
        assert!(SymmetryGroup::from_renamings(&columns, &[bad]).is_err());
    }
}
