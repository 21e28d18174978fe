//! Exact two-phase simplex over `BigRational` with Bland's rule.

use num_traits::{One, Signed, Zero};

use super::Q;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<Q>,
    pub rel: Relation,
    pub rhs: Q,
}

/// A linear program over variables that are nonnegative unless marked free.
#[derive(Debug, Clone)]
pub struct Lp {
    pub n_vars: usize,
    pub free: Vec<bool>,
    pub objective: Vec<Q>,
    pub maximize: bool,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: Q, x: Vec<Q> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<&Q> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

impl Lp {
    pub fn new(n_vars: usize, maximize: bool) -> Self {
        Lp {
            n_vars,
            free: vec![false; n_vars],
            objective: vec![Q::zero(); n_vars],
            maximize,
            constraints: Vec::new(),
        }
    }

    pub fn set_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    pub fn add(&mut self, coeffs: Vec<Q>, rel: Relation, rhs: Q) {
        assert_eq!(coeffs.len(), self.n_vars, "constraint width");
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        solve(self)
    }
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    obj: Vec<Q>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> &Q {
        &self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
        }
        let pivot_row = self.rows[r].clone();
        let nz: Vec<usize> = (0..=self.width).filter(|&j| !pivot_row[j].is_zero()).collect();
        let eliminate = |row: &mut Vec<Q>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for &j in &nz {
                let d = &f * &pivot_row[j];
                row[j] -= d;
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    /// Minimizes the objective row over columns accepted by `allowed`.
    /// Returns `false` if unbounded.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            let Some(c) = (0..self.width).find(|&j| allowed(j) && self.obj[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, Q)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][c];
                if a.is_positive() {
                    let ratio = self.rhs(r) / a;
                    let better = match &best {
                        None => true,
                        Some((br, bv)) => {
                            ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br])
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves `lp` exactly.
pub fn solve(lp: &Lp) -> LpOutcome {
    // column layout: split variables, then slacks/surpluses, then artificials
    let mut col_of = Vec::with_capacity(lp.n_vars);
    let mut ncols = 0;
    for j in 0..lp.n_vars {
        col_of.push(ncols);
        ncols += if lp.free[j] { 2 } else { 1 };
    }
    let n_struct = ncols;
    let m = lp.constraints.len();
    let mut rows: Vec<(Vec<Q>, Relation, Q)> = Vec::with_capacity(m);
    for con in &lp.constraints {
        let mut coeffs = vec![Q::zero(); n_struct];
        for j in 0..lp.n_vars {
            let a = &con.coeffs[j];
            if a.is_zero() {
                continue;
            }
            coeffs[col_of[j]] = a.clone();
            if lp.free[j] {
                coeffs[col_of[j] + 1] = -a.clone();
            }
        }
        let (coeffs, rel, rhs) = if con.rhs.is_negative() {
            let flipped = match con.rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            (coeffs.into_iter().map(|v| -v).collect(), flipped, -con.rhs.clone())
        } else {
            (coeffs, con.rel, con.rhs.clone())
        };
        rows.push((coeffs, rel, rhs));
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = n_struct + n_slack + n_art;
    let art_start = n_struct + n_slack;
    let mut t = Tableau {
        rows: Vec::with_capacity(m),
        obj: vec![Q::zero(); width + 1],
        basis: Vec::with_capacity(m),
        width,
    };
    let (mut s, mut a) = (n_struct, art_start);
    for (coeffs, rel, rhs) in rows {
        let mut row = coeffs;
        row.resize(width + 1, Q::zero());
        row[width] = rhs;
        match rel {
            Relation::Le => {
                row[s] = Q::one();
                t.basis.push(s);
                s += 1;
            }
            Relation::Ge => {
                row[s] = -Q::one();
                s += 1;
                row[a] = Q::one();
                t.basis.push(a);
                a += 1;
            }
            Relation::Eq => {
                row[a] = Q::one();
                t.basis.push(a);
                a += 1;
            }
        }
        t.rows.push(row);
    }

    // phase 1: minimize the sum of artificials
    if n_art > 0 {
        for j in art_start..width {
            t.obj[j] = Q::one();
        }
        for r in 0..m {
            if t.basis[r] >= art_start {
                for j in 0..=width {
                    let v = t.rows[r][j].clone();
                    if !v.is_zero() {
                        t.obj[j] -= v;
                    }
                }
            }
        }
        let bounded = t.run(&|_| true);
        debug_assert!(bounded, "phase 1 is bounded below by zero");
        if !t.obj[width].is_zero() {
            return LpOutcome::Infeasible;
        }
        // drive remaining artificials out of the basis
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] >= art_start {
                match (0..art_start).find(|&j| !t.rows[r][j].is_zero()) {
                    Some(c) => t.pivot(r, c),
                    None => {
                        t.rows.remove(r);
                        t.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // phase 2
    let mut cost = vec![Q::zero(); width + 1];
    for j in 0..lp.n_vars {
        let c = if lp.maximize {
            -lp.objective[j].clone()
        } else {
            lp.objective[j].clone()
        };
        if lp.free[j] {
            cost[col_of[j] + 1] = -c.clone();
        }
        cost[col_of[j]] = c;
    }
    t.obj = cost.clone();
    for r in 0..t.rows.len() {
        let cb = cost[t.basis[r]].clone();
        if !cb.is_zero() {
            for j in 0..=width {
                let v = &t.rows[r][j];
                if !v.is_zero() {
                    let d = &cb * v;
                    t.obj[j] -= d;
                }
            }
        }
    }
    if !t.run(&|j| j < art_start) {
        return LpOutcome::Unbounded;
    }
    let mut cols = vec![Q::zero(); width];
    for r in 0..t.rows.len() {
        cols[t.basis[r]] = t.rhs(r).clone();
    }
    let x: Vec<Q> = (0..lp.n_vars)
        .map(|j| {
            if lp.free[j] {
                &cols[col_of[j]] - &cols[col_of[j] + 1]
            } else {
                cols[col_of[j]].clone()
            }
        })
        .collect();
    let value: Q = x
        .iter()
        .zip(&lp.objective)
        .map(|(a, b)| a * b)
        .fold(Q::zero(), |acc, v| acc + v);
    LpOutcome::Optimal { value, x }
}
