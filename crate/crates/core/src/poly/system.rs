use std::fmt;
use std::str::FromStr;

use num::integer::Integer as _;
use num::{BigInt, BigRational, One, Signed, Zero};

use crate::error::{Error, Result};

/// Row sense: the row's dot product with a point is constrained to be
/// exactly zero or nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Eq => f.write_str("=0"),
            Relation::Ge => f.write_str(">=0"),
        }
    }
}

/// One homogeneous linear constraint over the system's columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<BigRational>,
    pub relation: Relation,
    pub provenance: String,
}

impl Row {
    /// Scales to coprime integers; equalities additionally get a positive
    /// leading coefficient. Inequality signs are never flipped.
    pub fn normalize(&mut self) {
        let mut denom_lcm = BigInt::one();
        for c in &self.coeffs {
            denom_lcm = denom_lcm.lcm(c.denom());
        }
        let mut numer_gcd = BigInt::zero();
        for c in &self.coeffs {
            let scaled = c.numer() * (&denom_lcm / c.denom());
            numer_gcd = numer_gcd.gcd(&scaled);
        }
        if numer_gcd.is_zero() {
            return; // all-zero row
        }
        let factor = BigRational::new(denom_lcm, numer_gcd);
        for c in self.coeffs.iter_mut() {
            *c *= &factor;
        }
        if self.relation == Relation::Eq {
            if let Some(first) = self.coeffs.iter().find(|c| !c.is_zero()) {
                if first.is_negative() {
                    for c in self.coeffs.iter_mut() {
                        *c = -c.clone();
                    }
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Column indices with nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn dot(&self, point: &[BigRational]) -> BigRational {
        debug_assert_eq!(point.len(), self.coeffs.len());
        let mut acc = BigRational::zero();
        for (c, x) in self.coeffs.iter().zip(point) {
            if !c.is_zero() && !x.is_zero() {
                acc += c * x;
            }
        }
        acc
    }

    /// Identity used for sorting and deduplication: sense and coefficients,
    /// not provenance.
    pub fn key(&self) -> (Relation, &[BigRational]) {
        (self.relation, &self.coeffs)
    }
}

/// A finite system of homogeneous equalities and inequalities over named
/// columns. Rows are kept in canonical form: coprime integer coefficients,
/// no zero rows, sorted and deduplicated after `canonicalize`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InequalitySystem {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl InequalitySystem {
    pub fn new(columns: Vec<String>) -> Self {
        InequalitySystem {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Adds a row after normalizing it; silently drops all-zero rows.
    pub fn push(&mut self, coeffs: Vec<BigRational>, relation: Relation, provenance: String) {
        assert_eq!(
            coeffs.len(),
            self.columns.len(),
            "row width must match column count"
        );
        let mut row = Row {
            coeffs,
            relation,
            provenance,
        };
        row.normalize();
        if !row.is_zero() {
            self.rows.push(row);
        }
    }

    /// Normalizes, sorts and deduplicates rows. Equal rows keep the
    /// lexicographically smallest provenance, making output deterministic.
    pub fn canonicalize(&mut self) {
        for row in self.rows.iter_mut() {
            row.normalize();
        }
        self.rows.retain(|r| !r.is_zero());
        self.rows.sort_by(|a, b| {
            a.key()
                .cmp(&b.key())
                .then_with(|| a.provenance.cmp(&b.provenance))
        });
        self.rows.dedup_by(|next, prev| next.key() == prev.key());
    }

    /// Tab-separated export: header of column names plus a `rel` marker
    /// column and a trailing provenance column.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join("\t"));
        out.push_str("\trel\tprovenance\n");
        for row in &self.rows {
            let cells: Vec<String> = row.coeffs.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join("\t"));
            out.push('\t');
            out.push_str(&row.relation.to_string());
            out.push('\t');
            out.push_str(&row.provenance);
            out.push('\n');
        }
        out
    }

    /// One line per row: relation, nonzero `coeff*column` terms, provenance.
    pub fn to_sparse_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&row.relation.to_string());
            out.push('\t');
            let mut first = true;
            for (j, c) in row.coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if !first {
                    out.push(' ');
                }
                out.push_str(&c.to_string());
                out.push('*');
                out.push_str(&self.columns[j]);
                first = false;
            }
            out.push_str("\t# ");
            out.push_str(&row.provenance);
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::DimensionMismatch(
            "empty system file".to_string(),
        ))?;
        let mut cols: Vec<&str> = header.split('\t').collect();
        let has_provenance = cols.last() == Some(&"provenance");
        if has_provenance {
            cols.pop();
        }
        if cols.last() != Some(&"rel") {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "header must end in a 'rel' column".to_string(),
            });
        }
        cols.pop();
        let columns: Vec<String> = cols.iter().map(|s| s.to_string()).collect();
        let mut system = InequalitySystem::new(columns);
        let width = system.columns.len();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() < width + 1 {
                return Err(Error::Parse {
                    line: idx + 1,
                    column: 1,
                    message: format!("expected at least {} cells", width + 1),
                });
            }
            let mut coeffs = Vec::with_capacity(width);
            for (j, cell) in cells[..width].iter().enumerate() {
                let v = BigRational::from_str(cell.trim()).map_err(|e| Error::Parse {
                    line: idx + 1,
                    column: j + 1,
                    message: format!("bad coefficient '{cell}': {e}"),
                })?;
                coeffs.push(v);
            }
            let relation = match cells[width].trim() {
                "=0" => Relation::Eq,
                ">=0" => Relation::Ge,
                other => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        column: width + 1,
                        message: format!("bad relation '{other}'"),
                    })
                }
            };
            let provenance = cells.get(width + 1).unwrap_or(&"").to_string();
            system.push(coeffs, relation, provenance);
        }
        Ok(system)
    }

    /// Splits rows into inequality and equality views (indices into `rows`).
    pub fn partition_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut ge = Vec::new();
        let mut eq = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            match r.relation {
                Relation::Ge => ge.push(i),
                Relation::Eq => eq.push(i),
            }
        }
        (ge, eq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn int(n: i64) -> BigRational {
        rat(n, 1)
    }

    #[test]
    fn rows_normalize_to_coprime_integers() {
        let mut s = InequalitySystem::new(vec!["a".into(), "b".into()]);
        s.push(vec![rat(2, 3), rat(-4, 3)], Relation::Ge, "r".into());
        assert_eq!(s.rows[0].coeffs, vec![int(1), int(-2)]);
        // Equalities get a positive leading coefficient; inequalities keep sign.
        s.push(vec![rat(-2, 1), rat(4, 1)], Relation::Eq, "e".into());
        assert_eq!(s.rows[1].coeffs, vec![int(1), int(-2)]);
        s.push(vec![rat(-2, 1), rat(4, 1)], Relation::Ge, "g".into());
        assert_eq!(s.rows[2].coeffs, vec![int(-1), int(2)]);
        // Zero rows vanish.
        s.push(vec![int(0), int(0)], Relation::Ge, "z".into());
        assert_eq!(s.rows.len(), 3);
    }

    #[test]
    fn canonicalize_sorts_and_dedups() {
        let mut s = InequalitySystem::new(vec!["a".into(), "b".into()]);
        s.push(vec![int(1), int(0)], Relation::Ge, "later".into());
        s.push(vec![int(2), int(0)], Relation::Ge, "earlier".into());
        s.push(vec![int(0), int(1)], Relation::Eq, "eq".into());
        s.canonicalize();
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.rows[0].relation, Relation::Eq);
        assert_eq!(s.rows[1].provenance, "earlier");
    }

    #[test]
    fn tsv_round_trip() {
        let mut s = InequalitySystem::new(vec!["H(X)".into(), "H(Y)".into()]);
        s.push(vec![int(1), int(-1)], Relation::Ge, "mono".into());
        s.push(vec![int(1), int(1)], Relation::Eq, "sum".into());
        s.canonicalize();
        let text = s.to_tsv();
        let back = InequalitySystem::from_tsv(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_tsv(), text);
    }
}
