use std::collections::BTreeSet;

use num::{BigRational, One, Signed, Zero};

use super::system::{InequalitySystem, Relation, Row};

/// Outcome of the base solver on {x >= 0 : A x = b}.
#[derive(Debug, Clone)]
pub enum NonNegOutcome {
    /// A nonnegative solution of A x = b.
    Solution(Vec<BigRational>),
    /// Farkas dual: y with y^T A <= 0 and y^T b > 0.
    Infeasible(Vec<BigRational>),
}

/// Exact phase-one simplex with Bland's rule. `a` is row-major with `m`
/// rows over `n` nonnegative unknowns. Both outcomes are verified against
/// the inputs before returning; a failed verification is a solver bug and
/// panics.
pub fn solve_nonneg(a: &[Vec<BigRational>], b: &[BigRational]) -> NonNegOutcome {
    let m = a.len();
    assert_eq!(b.len(), m);
    let n = a.first().map_or(0, Vec::len);
    // Tableau [A | I | b] with rows flipped so the right side is nonnegative.
    let mut sign = vec![false; m];
    let mut tab: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    for i in 0..m {
        debug_assert_eq!(a[i].len(), n);
        let flip = b[i].is_negative();
        sign[i] = flip;
        let mut row = Vec::with_capacity(n + m + 1);
        for j in 0..n {
            row.push(if flip { -a[i][j].clone() } else { a[i][j].clone() });
        }
        for k in 0..m {
            row.push(if k == i {
                BigRational::one()
            } else {
                BigRational::zero()
            });
        }
        row.push(if flip { -b[i].clone() } else { b[i].clone() });
        tab.push(row);
    }
    let width = n + m + 1;
    let rhs = n + m;
    // Objective row: z_j - c_j for min(sum of artificials); positive entries
    // are candidate entering columns.
    let mut obj = vec![BigRational::zero(); width];
    for row in &tab {
        for (j, cell) in row.iter().enumerate() {
            if !cell.is_zero() {
                obj[j] += cell;
            }
        }
    }
    for k in 0..m {
        obj[n + k] -= BigRational::one();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0usize;
    // Dantzig entering rule; the lexicographic ratio test below rules out
    // cycling, so no fallback rule is needed.
    loop {
        let enter = (0..n + m)
            .filter(|&j| obj[j].is_positive())
            .max_by(|&p, &q| obj[p].cmp(&obj[q]).then(q.cmp(&p)));
        let Some(enter) = enter else {
            break;
        };
        pivots += 1;
        // Lexicographic ratio test: pick the row minimizing rhs/pivot, ties
        // broken by comparing whole scaled rows column by column. Rows start
        // lexicographically positive (identity block), which this rule
        // preserves, so no basis repeats.
        let mut tied: Vec<usize> = Vec::new();
        let mut best: Option<BigRational> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[enter].is_positive() {
                let ratio = &row[rhs] / &row[enter];
                match &best {
                    Some(b) if ratio > *b => {}
                    Some(b) if ratio == *b => tied.push(i),
                    _ => {
                        best = Some(ratio);
                        tied.clear();
                        tied.push(i);
                    }
                }
            }
        }
        if tied.is_empty() {
            // Unbounded phase-one objective cannot happen (z >= 0 always);
            // entering column with no positive entry means a ray, which for
            // this objective is impossible.
            unreachable!("phase-one objective is bounded below");
        }
        for j in 0..width {
            if tied.len() == 1 {
                break;
            }
            if j == rhs {
                continue;
            }
            let mut min_val: Option<BigRational> = None;
            let mut keep: Vec<usize> = Vec::new();
            for &i in &tied {
                let val = &tab[i][j] / &tab[i][enter];
                match &min_val {
                    Some(m) if val > *m => {}
                    Some(m) if val == *m => keep.push(i),
                    _ => {
                        min_val = Some(val);
                        keep.clear();
                        keep.push(i);
                    }
                }
            }
            tied = keep;
        }
        let pivot_row = tied[0];
        // Pivot.
        let piv = tab[pivot_row][enter].clone();
        let inv = BigRational::one() / piv;
        for cell in tab[pivot_row].iter_mut() {
            if !cell.is_zero() {
                *cell *= &inv;
            }
        }
        let prow = tab[pivot_row].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != pivot_row && !row[enter].is_zero() {
                let f = row[enter].clone();
                for (c, p) in row.iter_mut().zip(&prow) {
                    if !p.is_zero() {
                        *c -= &f * p;
                    }
                }
                row[enter] = BigRational::zero();
            }
        }
        if !obj[enter].is_zero() {
            let f = obj[enter].clone();
            for (c, p) in obj.iter_mut().zip(&prow) {
                if !p.is_zero() {
                    *c -= &f * p;
                }
            }
            obj[enter] = BigRational::zero();
        }
        basis[pivot_row] = enter;
    }
    if std::env::var_os("LP_TRACE").is_some() {
        let bits = tab
            .iter()
            .flatten()
            .map(|c| c.numer().bits().max(c.denom().bits()))
            .max()
            .unwrap_or(0);
        eprintln!("  simplex: m={m} n={n} pivots={pivots} maxbits={bits}");
    }
    let optimum = &obj[rhs];
    if optimum.is_zero() {
        let mut x = vec![BigRational::zero(); n];
        for (i, &bj) in basis.iter().enumerate() {
            if bj < n {
                x[bj] = tab[i][rhs].clone();
            }
            // Artificials still basic sit at zero here (optimum is zero).
        }
        for (i, arow) in a.iter().enumerate() {
            let mut acc = BigRational::zero();
            for (c, v) in arow.iter().zip(&x) {
                if !c.is_zero() && !v.is_zero() {
                    acc += c * v;
                }
            }
            assert_eq!(acc, b[i], "solver bug: solution fails equation {i}");
        }
        assert!(
            x.iter().all(|v| !v.is_negative()),
            "solver bug: negative component"
        );
        NonNegOutcome::Solution(x)
    } else {
        // y_i = (objective entry of artificial i) + 1, unflipped.
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            let yi = &obj[n + i] + BigRational::one();
            y.push(if sign[i] { -yi } else { yi });
        }
        for j in 0..n {
            let mut acc = BigRational::zero();
            for i in 0..m {
                if !a[i][j].is_zero() && !y[i].is_zero() {
                    acc += &a[i][j] * &y[i];
                }
            }
            assert!(
                !acc.is_positive(),
                "solver bug: certificate fails column {j}"
            );
        }
        let mut yb = BigRational::zero();
        for i in 0..m {
            if !b[i].is_zero() && !y[i].is_zero() {
                yb += &b[i] * &y[i];
            }
        }
        assert!(yb.is_positive(), "solver bug: certificate has y^T b <= 0");
        NonNegOutcome::Infeasible(y)
    }
}

/// Inadmissibility proof for a pinned system: nonnegative multipliers over
/// inequality rows and pin bounds plus free multipliers over equality rows
/// that combine to an identically-zero form with a positive constant part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FarkasCertificate {
    /// (row index, multiplier >= 0) over `rows` with relation `>=0`.
    pub ge_multipliers: Vec<(usize, BigRational)>,
    /// (row index, multiplier) over `rows` with relation `=0`.
    pub eq_multipliers: Vec<(usize, BigRational)>,
    /// (pin index, multiplier >= 0) against `x_j >= lo_j`.
    pub lower_multipliers: Vec<(usize, BigRational)>,
    /// (pin index, multiplier >= 0) against `x_j <= hi_j`.
    pub upper_multipliers: Vec<(usize, BigRational)>,
}

impl FarkasCertificate {
    /// Exact check: the multipliers must satisfy the sign conditions, cancel
    /// to zero on every column, and produce a positive constant.
    pub fn verify(
        &self,
        system: &InequalitySystem,
        pins: &[(usize, BigRational, BigRational)],
    ) -> bool {
        let n = system.columns.len();
        let mut combo = vec![BigRational::zero(); n];
        for (idx, lam) in &self.ge_multipliers {
            let Some(row) = system.rows.get(*idx) else {
                return false;
            };
            if row.relation != Relation::Ge || lam.is_negative() {
                return false;
            }
            for (c, v) in combo.iter_mut().zip(&row.coeffs) {
                *c += lam * v;
            }
        }
        for (idx, mu) in &self.eq_multipliers {
            let Some(row) = system.rows.get(*idx) else {
                return false;
            };
            if row.relation != Relation::Eq {
                return false;
            }
            for (c, v) in combo.iter_mut().zip(&row.coeffs) {
                *c += mu * v;
            }
        }
        let mut constant = BigRational::zero();
        for (pidx, lam) in &self.lower_multipliers {
            let Some((col, lo, _)) = pins.get(*pidx) else {
                return false;
            };
            if lam.is_negative() {
                return false;
            }
            combo[*col] += lam;
            constant -= lam * lo;
        }
        for (pidx, lam) in &self.upper_multipliers {
            let Some((col, _, hi)) = pins.get(*pidx) else {
                return false;
            };
            if lam.is_negative() {
                return false;
            }
            combo[*col] -= lam;
            constant += lam * hi;
        }
        combo.iter().all(Zero::is_zero) && constant.is_negative()
    }
}

/// Outcome of a pinned feasibility question.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(Vec<BigRational>),
    Infeasible(FarkasCertificate),
}

/// Where a working inequality row of the pinned problem came from.
#[derive(Debug, Clone, Copy)]
enum RowSource {
    /// System row with relation `>= 0`.
    Ge(usize),
    /// System row with relation `= 0`, taken negated when `bool` is set.
    Eq(usize, bool),
    /// k-th pin, side `x >= lo`.
    Lower(usize),
    /// k-th pin, side `-x >= -hi`.
    Upper(usize),
}

/// A `>= rhs` row of the pinned problem.
struct WorkRow {
    source: RowSource,
    coeffs: Vec<BigRational>,
    rhs: BigRational,
}

/// Column label inside the warm dual tableau.
#[derive(Clone, Copy, PartialEq, Eq)]
enum DualCol {
    /// Multiplier on the k-th activated row.
    Real(usize),
    /// Artificial unknown attached to the e-th balance equation.
    Art(usize),
}

impl DualCol {
    /// Stable total order for the anti-cycling rule; later additions only
    /// append larger ranks, so ranks never shift.
    fn rank(self) -> usize {
        match self {
            DualCol::Real(k) => 2 * k,
            DualCol::Art(e) => 2 * e + 1,
        }
    }
}

/// Result of running the warm dual to optimality.
enum WarmOutcome {
    /// Phase one closed at zero: `y >= 0` over the activated rows combines
    /// them into a row vanishing on every touched column with total right
    /// side one, which refutes the pinned system.
    Combination(Vec<BigRational>),
    /// Phase one stayed positive: multipliers over the balance equations
    /// (normalization first) that encode a point satisfying every
    /// activated row.
    Candidate(Vec<BigRational>),
}

/// Incremental phase-one simplex for the dual question over the activated
/// rows: find `y >= 0` whose combination vanishes on every touched column
/// while the combined right sides sum to one. Activation rounds extend the
/// tableau in place instead of resolving from scratch: a fresh balance
/// equation enters as an all-zero row with its own artificial, and a fresh
/// dual unknown is priced through the artificial block, which carries the
/// running basis inverse. The artificial objective therefore decreases
/// monotonically across the whole activation loop.
struct WarmDual {
    /// Common denominator clearing the normalization equation.
    denom: BigRational,
    /// System column behind each balance equation; equation 0 normalizes
    /// the right side and has no column.
    eq_cols: Vec<Option<usize>>,
    eq_of: std::collections::HashMap<usize, usize>,
    /// Per equation: coefficients on the dual unknowns activated so far.
    real: Vec<Vec<BigRational>>,
    /// Per equation: coefficients on the artificial block.
    art: Vec<Vec<BigRational>>,
    rhs: Vec<BigRational>,
    basis: Vec<DualCol>,
    obj_real: Vec<BigRational>,
    obj_art: Vec<BigRational>,
    obj_rhs: BigRational,
    pivots: usize,
}

impl WarmDual {
    fn new(denom: BigRational) -> Self {
        WarmDual {
            denom: denom.clone(),
            eq_cols: vec![None],
            eq_of: std::collections::HashMap::new(),
            real: vec![Vec::new()],
            art: vec![vec![BigRational::one()]],
            rhs: vec![denom.clone()],
            basis: vec![DualCol::Art(0)],
            obj_real: Vec::new(),
            obj_art: vec![BigRational::zero()],
            obj_rhs: denom,
            pivots: 0,
        }
    }

    fn has_equation(&self, syscol: usize) -> bool {
        self.eq_of.contains_key(&syscol)
    }

    /// Adds the balance equation for a column no activated row has touched
    /// yet. Every activated row has a zero there, so the new row is zero
    /// apart from its artificial, which starts basic at value zero.
    fn push_equation(&mut self, syscol: usize) {
        let e = self.rhs.len();
        self.eq_cols.push(Some(syscol));
        self.eq_of.insert(syscol, e);
        for row in &mut self.art {
            row.push(BigRational::zero());
        }
        let mut arow = vec![BigRational::zero(); e + 1];
        arow[e] = BigRational::one();
        self.real.push(vec![BigRational::zero(); self.obj_real.len()]);
        self.art.push(arow);
        self.rhs.push(BigRational::zero());
        self.basis.push(DualCol::Art(e));
        self.obj_art.push(BigRational::zero());
    }

    /// Activates a row: its raw column over the balance equations is priced
    /// through the artificial block into the current basis.
    fn push_row(&mut self, coeffs: &[BigRational], rhs: &BigRational) {
        let m = self.rhs.len();
        let mut raw: Vec<(usize, BigRational)> = Vec::new();
        let r0 = rhs * &self.denom;
        if !r0.is_zero() {
            raw.push((0, r0));
        }
        for (e, col) in self.eq_cols.iter().enumerate().skip(1) {
            let c = &coeffs[col.expect("balance equation without a column")];
            if !c.is_zero() {
                raw.push((e, c.clone()));
            }
        }
        let mut price = BigRational::zero();
        for i in 0..m {
            let mut v = BigRational::zero();
            for (e, r) in &raw {
                let a = &self.art[i][*e];
                if !a.is_zero() {
                    v += a * r;
                }
            }
            if matches!(self.basis[i], DualCol::Art(_)) && !v.is_zero() {
                price += &v;
            }
            self.real[i].push(v);
        }
        self.obj_real.push(price);
    }

    fn entry(&self, i: usize, c: DualCol) -> &BigRational {
        match c {
            DualCol::Real(k) => &self.real[i][k],
            DualCol::Art(e) => &self.art[i][e],
        }
    }

    fn obj_entry(&self, c: DualCol) -> &BigRational {
        match c {
            DualCol::Real(k) => &self.obj_real[k],
            DualCol::Art(e) => &self.obj_art[e],
        }
    }

    fn pick_entering(&self, bland: bool) -> Option<DualCol> {
        let candidates = self
            .obj_real
            .iter()
            .enumerate()
            .map(|(k, v)| (DualCol::Real(k), v))
            .chain(
                self.obj_art
                    .iter()
                    .enumerate()
                    .map(|(e, v)| (DualCol::Art(e), v)),
            )
            .filter(|(_, v)| v.is_positive());
        if bland {
            candidates.min_by_key(|(c, _)| c.rank()).map(|(c, _)| c)
        } else {
            candidates
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.rank().cmp(&a.0.rank())))
                .map(|(c, _)| c)
        }
    }

    fn pick_leaving(&self, enter: DualCol, bland: bool) -> Option<usize> {
        let m = self.rhs.len();
        let mut tied: Vec<usize> = Vec::new();
        let mut best: Option<BigRational> = None;
        for i in 0..m {
            let e = self.entry(i, enter);
            if !e.is_positive() {
                continue;
            }
            let ratio = &self.rhs[i] / e;
            match &best {
                Some(r) => match ratio.cmp(r) {
                    std::cmp::Ordering::Less => {
                        best = Some(ratio);
                        tied = vec![i];
                    }
                    std::cmp::Ordering::Equal => tied.push(i),
                    std::cmp::Ordering::Greater => {}
                },
                None => {
                    best = Some(ratio);
                    tied = vec![i];
                }
            }
        }
        if tied.len() <= 1 {
            return tied.first().copied();
        }
        if bland {
            return tied.into_iter().min_by_key(|&i| self.basis[i].rank());
        }
        // Lexicographic tie-break over the artificial block, then the real
        // block, each row scaled by its entering entry. The artificial
        // block stays nonsingular, so ties always resolve.
        let cols = self.eq_cols.len();
        for j in 0..cols + self.obj_real.len() {
            if tied.len() == 1 {
                break;
            }
            let look = |i: usize| {
                let v = if j < cols {
                    &self.art[i][j]
                } else {
                    &self.real[i][j - cols]
                };
                v / self.entry(i, enter)
            };
            let min = tied.iter().map(|&i| look(i)).min().expect("nonempty tie");
            tied.retain(|&i| look(i) == min);
        }
        tied.first().copied()
    }

    fn pivot(&mut self, r: usize, enter: DualCol) {
        self.pivots += 1;
        let p = self.entry(r, enter).clone();
        debug_assert!(p.is_positive());
        if !p.is_one() {
            for v in self.real[r].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
            for v in self.art[r].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
            if !self.rhs[r].is_zero() {
                self.rhs[r] /= &p;
            }
        }
        let prow_real = self.real[r].clone();
        let prow_art = self.art[r].clone();
        let prow_rhs = self.rhs[r].clone();
        let m = self.rhs.len();
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.entry(i, enter).clone();
            if f.is_zero() {
                continue;
            }
            for (v, pv) in self.real[i].iter_mut().zip(&prow_real) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
            for (v, pv) in self.art[i].iter_mut().zip(&prow_art) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
            if !prow_rhs.is_zero() {
                self.rhs[i] -= &f * &prow_rhs;
            }
        }
        let f = self.obj_entry(enter).clone();
        if !f.is_zero() {
            for (v, pv) in self.obj_real.iter_mut().zip(&prow_real) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
            for (v, pv) in self.obj_art.iter_mut().zip(&prow_art) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
            if !prow_rhs.is_zero() {
                self.obj_rhs -= &f * &prow_rhs;
            }
        }
        self.basis[r] = enter;
    }

    /// Pivots to optimality. Dantzig entering with a lexicographic ratio
    /// tie-break; a per-call pivot budget switches to Bland's rule, whose
    /// termination is unconditional.
    fn solve(&mut self) -> WarmOutcome {
        let start = self.pivots;
        let budget = 2000 + 20 * (self.rhs.len() + self.obj_real.len());
        let mut bland = false;
        loop {
            if self.obj_rhs.is_zero() {
                let mut y = vec![BigRational::zero(); self.obj_real.len()];
                for (i, b) in self.basis.iter().enumerate() {
                    if let DualCol::Real(k) = b {
                        y[*k] = self.rhs[i].clone();
                    }
                }
                return WarmOutcome::Combination(y);
            }
            let Some(enter) = self.pick_entering(bland) else {
                let w = self
                    .obj_art
                    .iter()
                    .map(|v| v + BigRational::one())
                    .collect();
                return WarmOutcome::Candidate(w);
            };
            let row = self
                .pick_leaving(enter, bland)
                .expect("phase-one objective is bounded below by zero");
            self.pivot(row, enter);
            if self.pivots - start > budget {
                bland = true;
            }
        }
    }
}

/// Decides whether the cone admits a point whose pinned coordinates lie in
/// the given closed intervals (`lo == hi` pins exactly). Free coordinates
/// are unrestricted beyond the system rows.
///
/// An active-set loop solves small Farkas subproblems over the rows picked
/// up so far (equality rows join as signed pairs, so every working row is
/// one-sided): a dual solution over active rows is a global infeasibility
/// proof, while a dual refutation yields a candidate point that either
/// satisfies everything or selects new rows to activate. Rows keep their
/// original sparsity, so the dual only sees the columns that active rows
/// actually mention.
pub fn lp_feasible(
    system: &InequalitySystem,
    pins: &[(usize, BigRational, BigRational)],
) -> Feasibility {
    let n = system.columns.len();
    for (col, lo, hi) in pins {
        assert!(*col < n, "pin column out of range");
        assert!(lo <= hi, "empty pin interval");
    }
    let mut work: Vec<WorkRow> = Vec::new();
    // Distinct coefficient vectors only: a multiplier on a duplicate lifts
    // to the representative without changing the certified combination.
    let mut seen: BTreeSet<Vec<BigRational>> = BTreeSet::new();
    for (i, row) in system.rows.iter().enumerate() {
        if row.coeffs.iter().all(Zero::is_zero) {
            continue;
        }
        if seen.insert(row.coeffs.clone()) {
            work.push(WorkRow {
                source: match row.relation {
                    Relation::Ge => RowSource::Ge(i),
                    Relation::Eq => RowSource::Eq(i, false),
                },
                coeffs: row.coeffs.clone(),
                rhs: BigRational::zero(),
            });
        }
        if row.relation == Relation::Eq {
            let neg: Vec<BigRational> = row.coeffs.iter().map(|c| -c.clone()).collect();
            if seen.insert(neg.clone()) {
                work.push(WorkRow {
                    source: RowSource::Eq(i, true),
                    coeffs: neg,
                    rhs: BigRational::zero(),
                });
            }
        }
    }
    let ge_count = work.len();
    let mut active: BTreeSet<usize> = BTreeSet::new();
    let mut span: BTreeSet<usize> = BTreeSet::new();
    for (k, (col, lo, hi)) in pins.iter().enumerate() {
        span.insert(*col);
        let mut unit = vec![BigRational::zero(); n];
        unit[*col] = BigRational::one();
        active.insert(work.len());
        work.push(WorkRow {
            source: RowSource::Lower(k),
            coeffs: unit.clone(),
            rhs: lo.clone(),
        });
        unit[*col] = -BigRational::one();
        active.insert(work.len());
        work.push(WorkRow {
            source: RowSource::Upper(k),
            coeffs: unit,
            rhs: -hi.clone(),
        });
    }
    // Rows living inside the pinned span join for free: they cannot enlarge
    // the dual's column set, and infeasibility proofs usually live there.
    for (i, row) in work.iter().enumerate().take(ge_count) {
        if row
            .coeffs
            .iter()
            .enumerate()
            .all(|(j, c)| c.is_zero() || span.contains(&j))
        {
            active.insert(i);
        }
    }
    let supports: Vec<Vec<usize>> = work
        .iter()
        .map(|r| {
            r.coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let norms: Vec<BigRational> = work
        .iter()
        .map(|r| r.coeffs.iter().map(|c| c.abs()).sum())
        .collect();
    // Capping what each round may activate keeps the tableau growth gradual;
    // activation is monotone, so the loop terminates.
    const ACTIVATION_CAP: usize = 32;
    let trace = std::env::var_os("LP_TRACE").is_some();
    // Only pins carry a nonzero right side, so one denominator clearing
    // covers the normalization equation for the whole run.
    let mut denom = num::BigInt::one();
    for row in &work {
        denom = num::Integer::lcm(&denom, row.rhs.denom());
    }
    let mut dual = WarmDual::new(BigRational::from_integer(denom));
    let mut in_dual: BTreeSet<usize> = BTreeSet::new();
    let mut order: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = active.iter().copied().collect();
    loop {
        for w in pending.drain(..) {
            if !in_dual.insert(w) {
                continue;
            }
            for &j in &supports[w] {
                if !dual.has_equation(j) {
                    dual.push_equation(j);
                }
            }
            dual.push_row(&work[w].coeffs, &work[w].rhs);
            order.push(w);
        }
        let round_start = std::time::Instant::now();
        let before = dual.pivots;
        let outcome = dual.solve();
        if trace {
            eprintln!(
                "lp round: {} rows, {} eqs, {} pivots (total {}), {} in {:?}",
                order.len(),
                dual.rhs.len(),
                dual.pivots - before,
                dual.pivots,
                match &outcome {
                    WarmOutcome::Combination(_) => "farkas",
                    WarmOutcome::Candidate(_) => "candidate",
                },
                round_start.elapsed()
            );
        }
        match outcome {
            WarmOutcome::Combination(y) => {
                // Activated supports cover every nonzero column of the
                // combination, so it vanishes globally.
                let mut cert = FarkasCertificate {
                    ge_multipliers: Vec::new(),
                    eq_multipliers: Vec::new(),
                    lower_multipliers: Vec::new(),
                    upper_multipliers: Vec::new(),
                };
                let mut eq_merged: std::collections::BTreeMap<usize, BigRational> =
                    std::collections::BTreeMap::new();
                for (k, &w) in order.iter().enumerate() {
                    if y[k].is_zero() {
                        continue;
                    }
                    match work[w].source {
                        RowSource::Ge(ri) => cert.ge_multipliers.push((ri, y[k].clone())),
                        RowSource::Eq(ri, negated) => {
                            let v = if negated { -y[k].clone() } else { y[k].clone() };
                            *eq_merged.entry(ri).or_insert_with(BigRational::zero) += v;
                        }
                        RowSource::Lower(p) => cert.lower_multipliers.push((p, y[k].clone())),
                        RowSource::Upper(p) => cert.upper_multipliers.push((p, y[k].clone())),
                    }
                }
                cert.eq_multipliers = eq_merged
                    .into_iter()
                    .filter(|(_, v)| !v.is_zero())
                    .collect();
                cert.ge_multipliers.sort_by_key(|(ri, _)| *ri);
                assert!(
                    cert.verify(system, pins),
                    "solver bug: Farkas certificate failed verification"
                );
                return Feasibility::Infeasible(cert);
            }
            WarmOutcome::Candidate(w) => {
                // The equation multipliers encode a point satisfying every
                // activated row, up to the denominator clearing on the
                // normalization.
                let scale = &w[0] * &dual.denom;
                assert!(scale.is_positive(), "solver bug: degenerate refutation");
                let mut x = vec![BigRational::zero(); n];
                for (e, col) in dual.eq_cols.iter().enumerate().skip(1) {
                    let j = col.expect("balance equation without a column");
                    if !w[e].is_zero() {
                        x[j] = -&w[e] / &scale;
                    }
                }
                let mut violated: Vec<(usize, BigRational)> = Vec::new();
                for (i, row) in work.iter().enumerate() {
                    if in_dual.contains(&i) {
                        continue;
                    }
                    let mut val = BigRational::zero();
                    for (c, v) in row.coeffs.iter().zip(&x) {
                        if !c.is_zero() && !v.is_zero() {
                            val += c * v;
                        }
                    }
                    if val < row.rhs {
                        violated.push((i, (val - &row.rhs) / &norms[i]));
                    }
                }
                if violated.is_empty() {
                    for row in &system.rows {
                        let val = row.dot(&x);
                        match row.relation {
                            Relation::Ge => {
                                assert!(!val.is_negative(), "solver bug: point escapes the cone")
                            }
                            Relation::Eq => {
                                assert!(val.is_zero(), "solver bug: point escapes the cone")
                            }
                        }
                    }
                    for (col, lo, hi) in pins {
                        assert!(
                            x[*col] >= *lo && x[*col] <= *hi,
                            "solver bug: point escapes a pin"
                        );
                    }
                    return Feasibility::Feasible(x);
                }
                violated.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
                pending.extend(violated.iter().take(ACTIVATION_CAP).map(|(i, _)| *i));
            }
        }
    }
}

/// Outcome of a cone-implication question.
#[derive(Debug, Clone)]
pub enum ImpliesOutcome {
    /// The candidate is a nonnegative (free for equality rows) combination
    /// of system rows; the sparse multipliers reproduce it. For equality
    /// candidates, `reverse_multipliers` covers the reversed sense.
    Implied {
        multipliers: Vec<(usize, BigRational)>,
        reverse_multipliers: Option<Vec<(usize, BigRational)>>,
    },
    /// A point satisfying every system row but violating the candidate.
    NotImplied { witness: Vec<BigRational> },
}

impl ImpliesOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, ImpliesOutcome::Implied { .. })
    }
}

fn combination_matches(
    system: &InequalitySystem,
    multipliers: &[(usize, BigRational)],
    target: &[BigRational],
) -> bool {
    let mut acc = vec![BigRational::zero(); target.len()];
    for (idx, lam) in multipliers {
        let row = &system.rows[*idx];
        if row.relation == Relation::Ge && lam.is_negative() {
            return false;
        }
        for (c, v) in acc.iter_mut().zip(&row.coeffs) {
            *c += lam * v;
        }
    }
    acc == target
}

/// Single-sided implication: is `target >= 0` forced by the row subset
/// `active` of `system`? Returns multipliers over full-system indices.
fn implies_ge_over(
    system: &InequalitySystem,
    active: &[usize],
    target: &[BigRational],
) -> Result<Vec<(usize, BigRational)>, Vec<BigRational>> {
    let n = system.columns.len();
    // Columns of the dual program: one per active Ge row, two per active Eq.
    let mut cols: Vec<(usize, bool)> = Vec::new(); // (row index, negated)
    for &ri in active {
        match system.rows[ri].relation {
            Relation::Ge => cols.push((ri, false)),
            Relation::Eq => {
                cols.push((ri, false));
                cols.push((ri, true));
            }
        }
    }
    // Equations are only needed for columns some active row or the target
    // touches; the combination is identically zero elsewhere.
    let mut touched: BTreeSet<usize> = target
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(j, _)| j)
        .collect();
    for &ri in active {
        touched.extend(system.rows[ri].support());
    }
    let touched: Vec<usize> = touched.into_iter().collect();
    let mut a = vec![vec![BigRational::zero(); cols.len()]; touched.len()];
    for (k, (ri, neg)) in cols.iter().enumerate() {
        for (jj, &j) in touched.iter().enumerate() {
            let c = &system.rows[*ri].coeffs[j];
            if !c.is_zero() {
                a[jj][k] = if *neg { -c.clone() } else { c.clone() };
            }
        }
    }
    let restricted_target: Vec<BigRational> =
        touched.iter().map(|&j| target[j].clone()).collect();
    match solve_nonneg(&a, &restricted_target) {
        NonNegOutcome::Solution(lam) => {
            let mut sparse: std::collections::BTreeMap<usize, BigRational> =
                std::collections::BTreeMap::new();
            for (k, (ri, neg)) in cols.iter().enumerate() {
                if !lam[k].is_zero() {
                    let v = if *neg { -lam[k].clone() } else { lam[k].clone() };
                    *sparse.entry(*ri).or_insert_with(BigRational::zero) += v;
                }
            }
            let multipliers: Vec<(usize, BigRational)> = sparse
                .into_iter()
                .filter(|(_, v)| !v.is_zero())
                .collect();
            debug_assert!(combination_matches(system, &multipliers, target));
            Ok(multipliers)
        }
        NonNegOutcome::Infeasible(y) => {
            // y has y . row <= 0 for Ge rows, = 0 for Eq rows, y . target > 0;
            // -y (zero outside the touched columns) satisfies every active
            // row and violates the candidate.
            let mut witness = vec![BigRational::zero(); n];
            for (jj, &j) in touched.iter().enumerate() {
                if !y[jj].is_zero() {
                    witness[j] = -y[jj].clone();
                }
            }
            Err(witness)
        }
    }
}

/// Decides whether every point of the cone satisfies `candidate`.
/// Affine content is not supported here: rows are homogeneous by
/// construction. Uses row activation: starts from rows sharing support with
/// the candidate and grows the active set only when a tentative witness is
/// refuted by an inactive row.
pub fn implies(system: &InequalitySystem, candidate: &Row) -> ImpliesOutcome {
    assert_eq!(candidate.coeffs.len(), system.columns.len());
    let senses: &[bool] = match candidate.relation {
        Relation::Ge => &[false],
        Relation::Eq => &[false, true],
    };
    let mut forward = None;
    let mut reverse = None;
    for &negated in senses {
        let target: Vec<BigRational> = if negated {
            candidate.coeffs.iter().map(|c| -c.clone()).collect()
        } else {
            candidate.coeffs.clone()
        };
        let mut active: BTreeSet<usize> = BTreeSet::new();
        if system.rows.len() <= 64 {
            active.extend(0..system.rows.len());
        } else {
            let cand_support: BTreeSet<usize> = target
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, _)| i)
                .collect();
            for (i, row) in system.rows.iter().enumerate() {
                if row.support().iter().any(|j| cand_support.contains(j)) {
                    active.insert(i);
                }
            }
        }
        loop {
            let active_vec: Vec<usize> = active.iter().copied().collect();
            match implies_ge_over(system, &active_vec, &target) {
                Ok(multipliers) => {
                    if negated {
                        reverse = Some(multipliers);
                    } else {
                        forward = Some(multipliers);
                    }
                    break;
                }
                Err(witness) => {
                    let mut grew = false;
                    for (i, row) in system.rows.iter().enumerate() {
                        if active.contains(&i) {
                            continue;
                        }
                        let val = row.dot(&witness);
                        let violated = match row.relation {
                            Relation::Ge => val.is_negative(),
                            Relation::Eq => !val.is_zero(),
                        };
                        if violated {
                            active.insert(i);
                            grew = true;
                        }
                    }
                    if !grew {
                        return ImpliesOutcome::NotImplied { witness };
                    }
                }
            }
        }
    }
    ImpliesOutcome::Implied {
        multipliers: forward.expect("forward leg always attempted"),
        reverse_multipliers: reverse,
    }
}

/// Outcome of a two-sided cone comparison over identical column lists.
#[derive(Debug, Clone)]
pub enum EqualConesOutcome {
    Equal,
    /// Row `row` of system `1` or `2` fails in the other cone; the witness
    /// satisfies the other system and violates that row.
    Differs {
        system: u8,
        row: usize,
        witness: Vec<BigRational>,
    },
}

impl EqualConesOutcome {
    pub fn is_equal(&self) -> bool {
        matches!(self, EqualConesOutcome::Equal)
    }
}

/// Mutual row implication. Panics if the column lists differ; align columns
/// before comparing.
pub fn equal_cones(a: &InequalitySystem, b: &InequalitySystem) -> EqualConesOutcome {
    assert_eq!(
        a.columns, b.columns,
        "equal_cones requires identical column lists"
    );
    for (i, row) in a.rows.iter().enumerate() {
        if let ImpliesOutcome::NotImplied { witness } = implies(b, row) {
            return EqualConesOutcome::Differs {
                system: 1,
                row: i,
                witness,
            };
        }
    }
    for (i, row) in b.rows.iter().enumerate() {
        if let ImpliesOutcome::NotImplied { witness } = implies(a, row) {
            return EqualConesOutcome::Differs {
                system: 2,
                row: i,
                witness,
            };
        }
    }
    EqualConesOutcome::Equal
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

    fn system(cols: &[&str], rows: &[(&[i64], Relation)]) -> InequalitySystem {
        let mut s = InequalitySystem::new(cols.iter().map(|c| c.to_string()).collect());
        for (i, (coeffs, rel)) in rows.iter().enumerate() {
            s.push(ints(coeffs), *rel, format!("r{i}"));
        }
        s
    }

    #[test]
    fn solve_nonneg_finds_solutions_and_certificates() {
        // x + y = 3, x - y = 1 has x=2, y=1.
        let a = vec![ints(&[1, 1]), ints(&[1, -1])];
        match solve_nonneg(&a, &ints(&[3, 1])) {
            NonNegOutcome::Solution(x) => assert_eq!(x, ints(&[2, 1])),
            other => panic!("expected solution, got {other:?}"),
        }
        // x + y = 1, x + y = 2 is contradictory.
        let a = vec![ints(&[1, 1]), ints(&[1, 1])];
        match solve_nonneg(&a, &ints(&[1, 2])) {
            NonNegOutcome::Infeasible(_) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
        // x = -1 needs a negative variable.
        let a = vec![ints(&[1])];
        match solve_nonneg(&a, &ints(&[-1])) {
            NonNegOutcome::Infeasible(_) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn pinned_feasibility_with_certificates() {
        // Cone: x >= 0, y - x >= 0. Pin y = 1, x in [2, 3]: impossible.
        let s = system(
            &["x", "y"],
            &[(&[1, 0], Relation::Ge), (&[-1, 1], Relation::Ge)],
        );
        let pins = vec![
            (1, int(1), int(1)),
            (0, int(2), int(3)),
        ];
        match lp_feasible(&s, &pins) {
            Feasibility::Infeasible(cert) => assert!(cert.verify(&s, &pins)),
            other => panic!("expected infeasible, got {other:?}"),
        }
        // Pin y = 3, x in [2, 3]: x = 2 works.
        let pins = vec![
            (1, int(3), int(3)),
            (0, int(2), int(3)),
        ];
        match lp_feasible(&s, &pins) {
            Feasibility::Feasible(x) => {
                assert!(x[0] >= int(2) && x[0] <= int(3));
                assert_eq!(x[1], int(3));
                assert!(x[1] >= x[0]);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn implication_over_elemental_shannon() {
        // Columns: H(X), H(Y), H(XY). Elemental rows imply subadditivity.
        let s = system(
            &["H(X)", "H(Y)", "H(XY)"],
            &[
                (&[-1, 0, 1], Relation::Ge),  // H(XY) >= H(X)
                (&[0, -1, 1], Relation::Ge),  // H(XY) >= H(Y)
                (&[1, 1, -1], Relation::Ge),  // I(X:Y) >= 0
                (&[1, 0, 0], Relation::Ge),
                (&[0, 1, 0], Relation::Ge),
            ],
        );
        let sub = Row {
            coeffs: ints(&[1, 1, -1]),
            relation: Relation::Ge,
            provenance: String::new(),
        };
        assert!(implies(&s, &sub).holds());
        // H(X) >= H(Y) is not implied; witness must satisfy the system.
        let bogus = Row {
            coeffs: ints(&[1, -1, 0]),
            relation: Relation::Ge,
            provenance: String::new(),
        };
        match implies(&s, &bogus) {
            ImpliesOutcome::NotImplied { witness } => {
                for row in &s.rows {
                    assert!(!row.dot(&witness).is_negative());
                }
                assert!(bogus.dot(&witness).is_negative());
            }
            other => panic!("expected a witness, got {other:?}"),
        }
        // Equality candidates need both directions.
        let eq = Row {
            coeffs: ints(&[1, -1, 0]),
            relation: Relation::Eq,
            provenance: String::new(),
        };
        assert!(!implies(&s, &eq).holds());
    }

    #[test]
    fn implied_multipliers_reconstruct_candidate() {
        let s = system(
            &["x", "y"],
            &[(&[1, -1], Relation::Eq), (&[0, 1], Relation::Ge)],
        );
        // x >= 0 follows from x = y and y >= 0.
        let cand = Row {
            coeffs: ints(&[1, 0]),
            relation: Relation::Ge,
            provenance: String::new(),
        };
        match implies(&s, &cand) {
            ImpliesOutcome::Implied { multipliers, .. } => {
                assert!(combination_matches(&s, &multipliers, &cand.coeffs));
            }
            other => panic!("expected implication, got {other:?}"),
        }
    }

    #[test]
    fn equal_cones_detects_difference() {
        let a = system(&["x", "y"], &[(&[1, 0], Relation::Ge), (&[0, 1], Relation::Ge)]);
        let b = system(
            &["x", "y"],
            &[
                (&[1, 0], Relation::Ge),
                (&[0, 1], Relation::Ge),
                (&[1, -1], Relation::Ge),
            ],
        );
        assert!(!equal_cones(&a, &b).is_equal());
        let a2 = system(
            &["x", "y"],
            &[
                (&[0, 1], Relation::Ge),
                (&[1, 0], Relation::Ge),
                (&[2, -2], Relation::Ge),
                (&[1, 1], Relation::Ge),
            ],
        );
        assert!(equal_cones(&a2, &b).is_equal());
    }
}
