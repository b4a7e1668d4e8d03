//! Exact linear algebra over `F_q`.
//!
//! [`Matrix`] is a small dense matrix used for weight-space computations and
//! block operators. [`Echelon`] is an incremental sparse row echelon form
//! used for rank certificates, complements and kernels on the large
//! coordinate spaces of truncated inductions.

use std::collections::HashMap;

use crate::field::{FieldCtx, Fq};

/// Sparse vector: strictly increasing coordinates, nonzero values.
pub type SparseVec = Vec<(usize, Fq)>;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Fq>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Fq::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Fq::ONE);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Fq>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.concat() }
    }

    /// Matrix whose `j`-th column is `cols[j]`.
    pub fn from_cols(rows: usize, cols: &[Vec<Fq>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, &x) in c.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Fq {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: Fq) {
        self.data[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> &[Fq] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Fq> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, o: &Matrix, f: &FieldCtx) -> Matrix {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let x = self.get(i, k);
                if x.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let y = o.get(k, j);
                    if !y.is_zero() {
                        let cur = out.get(i, j);
                        out.set(i, j, f.add(cur, f.mul(x, y)));
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Fq], f: &FieldCtx) -> Vec<Fq> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(Fq::ZERO, |acc, (&a, &b)| f.add(acc, f.mul(a, b))))
            .collect()
    }

    pub fn sub(&self, o: &Matrix, f: &FieldCtx) -> Matrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| f.sub(a, b)).collect(),
        }
    }

    /// Stacks `self` on top of `o`.
    pub fn vstack(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.cols, o.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&o.data);
        Matrix { rows: self.rows + o.rows, cols: self.cols, data }
    }

    /// Places `o` to the right of `self`.
    pub fn hstack(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.rows, o.rows);
        let mut out = Matrix::zeros(self.rows, self.cols + o.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
            for j in 0..o.cols {
                out.set(i, self.cols + j, o.get(i, j));
            }
        }
        out
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    pub fn rref(&mut self, f: &FieldCtx) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else {
                continue;
            };
            if pr != r {
                for j in 0..self.cols {
                    self.data.swap(pr * self.cols + j, r * self.cols + j);
                }
            }
            let inv = f.inv(self.get(r, c)).unwrap();
            for j in c..self.cols {
                let x = self.get(r, j);
                self.set(r, j, f.mul(inv, x));
            }
            for i in 0..self.rows {
                let m = self.get(i, c);
                if i == r || m.is_zero() {
                    continue;
                }
                for j in c..self.cols {
                    let x = f.sub(self.get(i, j), f.mul(m, self.get(r, j)));
                    self.set(i, j, x);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self, f: &FieldCtx) -> usize {
        self.clone().rref(f).len()
    }

    pub fn inverse(&self, f: &FieldCtx) -> Option<Matrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        if n == 0 {
            return Some(Matrix::zeros(0, 0));
        }
        let mut aug = self.hstack(&Matrix::identity(n));
        let pivots = aug.rref(f);
        if pivots.len() < n || pivots[n - 1] >= n {
            return None;
        }
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, aug.get(i, n + j));
            }
        }
        Some(out)
    }

    /// Basis of `{x : self·x = 0}`, one vector per free column.
    pub fn kernel(&self, f: &FieldCtx) -> Vec<Vec<Fq>> {
        let mut m = self.clone();
        let pivots = m.rref(f);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut x = vec![Fq::ZERO; self.cols];
                x[fc] = Fq::ONE;
                for (r, &pc) in pivots.iter().enumerate() {
                    x[pc] = f.neg(m.get(r, fc));
                }
                x
            })
            .collect()
    }

    /// Basis of the intersection of the kernels of `ms`.
    pub fn common_kernel(ms: &[Matrix], f: &FieldCtx) -> Vec<Vec<Fq>> {
        let Some(first) = ms.first() else {
            return Vec::new();
        };
        let stacked = ms[1..].iter().fold(first.clone(), |acc, m| acc.vstack(m));
        stacked.kernel(f)
    }
}

/// Which nonzero coordinate of a vector becomes its pivot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    First,
    Last,
}

/// Result of inserting a vector into an [`Echelon`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Insert {
    /// The vector was independent; its pivot coordinate.
    Pivot(usize),
    /// The vector was dependent. With tracking enabled this is the relation
    /// `Σ cᵢ·input_i = 0` (including the new input with coefficient 1);
    /// otherwise it is empty.
    Dependent(SparseVec),
}

/// Incremental row echelon form over sparse vectors.
///
/// Rows are normalized so the pivot entry is one. Reduction uses the pivot
/// rule consistently, so each insertion strictly moves the working pivot.
#[derive(Clone, Debug)]
pub struct Echelon {
    rule: PivotRule,
    rows: Vec<SparseVec>,
    combos: Option<Vec<SparseVec>>,
    by_pivot: HashMap<usize, usize>,
    inserted: usize,
}

impl Echelon {
    pub fn new(rule: PivotRule) -> Self {
        Echelon { rule, rows: Vec::new(), combos: None, by_pivot: HashMap::new(), inserted: 0 }
    }

    /// Also records, for every row, which combination of inputs produced it.
    pub fn tracking(rule: PivotRule) -> Self {
        Echelon { combos: Some(Vec::new()), ..Self::new(rule) }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Pivot coordinates in insertion order of the independent vectors.
    pub fn pivots(&self) -> Vec<usize> {
        self.rows.iter().map(|r| self.pivot_of(r).unwrap()).collect()
    }

    pub fn has_pivot(&self, c: usize) -> bool {
        self.by_pivot.contains_key(&c)
    }

    fn pivot_of(&self, v: &SparseVec) -> Option<usize> {
        match self.rule {
            PivotRule::First => v.first().map(|e| e.0),
            PivotRule::Last => v.last().map(|e| e.0),
        }
    }

    /// Reduces `v` against the stored rows.
    pub fn reduce(&self, v: SparseVec, f: &FieldCtx) -> SparseVec {
        self.reduce_tracked(v, None, f).0
    }

    fn reduce_tracked(
        &self,
        mut v: SparseVec,
        mut combo: Option<SparseVec>,
        f: &FieldCtx,
    ) -> (SparseVec, Option<SparseVec>) {
        // Entries on the far side of the current pivot are final; only look at
        // pivots moving in the rule's direction.
        let mut bound: Option<usize> = None;
        loop {
            let next = match self.rule {
                PivotRule::First => {
                    v.iter().find(|e| bound.is_none_or(|b| e.0 > b) && self.by_pivot.contains_key(&e.0))
                }
                PivotRule::Last => {
                    v.iter().rev().find(|e| bound.is_none_or(|b| e.0 < b) && self.by_pivot.contains_key(&e.0))
                }
            };
            let Some(&(c, x)) = next else { break };
            let r = self.by_pivot[&c];
            let factor = f.neg(x);
            v = axpy(&v, factor, &self.rows[r], f);
            if let (Some(cb), Some(combos)) = (combo.as_mut(), self.combos.as_ref()) {
                *cb = axpy(cb, factor, &combos[r], f);
            }
            bound = Some(c);
        }
        (v, combo)
    }

    /// Inserts a vector, returning its pivot or the dependency it satisfies.
    pub fn insert(&mut self, v: SparseVec, f: &FieldCtx) -> Insert {
        let id = self.inserted;
        self.inserted += 1;
        let combo = self.combos.as_ref().map(|_| vec![(id, Fq::ONE)]);
        let (v, combo) = self.reduce_tracked(v, combo, f);
        match self.pivot_of(&v) {
            None => Insert::Dependent(combo.unwrap_or_default()),
            Some(p) => {
                let inv = f.inv(v.iter().find(|e| e.0 == p).unwrap().1).unwrap();
                let v = scale(&v, inv, f);
                if let (Some(cb), Some(combos)) = (combo, self.combos.as_mut()) {
                    combos.push(scale(&cb, inv, f));
                }
                self.by_pivot.insert(p, self.rows.len());
                self.rows.push(v);
                Insert::Pivot(p)
            }
        }
    }

    /// True when `v` lies in the span of the stored rows.
    pub fn contains(&self, v: SparseVec, f: &FieldCtx) -> bool {
        self.reduce(v, f).is_empty()
    }
}

/// Kernel of `v ↦ (part of cols·v in coordinates ≥ cut)` on the first
/// `upto` source coordinates.
pub fn kernel_above(cols: &[SparseVec], upto: usize, cut: usize, f: &FieldCtx) -> Vec<SparseVec> {
    let mut ech = Echelon::tracking(PivotRule::Last);
    let mut kernel = Vec::new();
    for col in &cols[..upto] {
        let above: SparseVec = col.iter().copied().filter(|e| e.0 >= cut).collect();
        if let Insert::Dependent(combo) = ech.insert(above, f) {
            kernel.push(combo);
        }
    }
    kernel
}

/// `a + s·b` for sparse vectors.
pub fn axpy(a: &SparseVec, s: Fq, b: &SparseVec, f: &FieldCtx) -> SparseVec {
    if s.is_zero() {
        return a.clone();
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i]);
            i += 1;
        } else if take_b {
            out.push((b[j].0, f.mul(s, b[j].1)));
            j += 1;
        } else {
            let x = f.add(a[i].1, f.mul(s, b[j].1));
            if !x.is_zero() {
                out.push((a[i].0, x));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

pub fn scale(a: &SparseVec, s: Fq, f: &FieldCtx) -> SparseVec {
    if s.is_zero() {
        return Vec::new();
    }
    a.iter().map(|&(i, x)| (i, f.mul(s, x))).collect()
}

pub fn to_sparse(v: &[Fq]) -> SparseVec {
    v.iter().enumerate().filter(|e| !e.1.is_zero()).map(|(i, &x)| (i, x)).collect()
}

pub fn to_dense(v: &SparseVec, len: usize) -> Vec<Fq> {
    let mut out = vec![Fq::ZERO; len];
    for &(i, x) in v {
        out[i] = x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> FieldCtx {
        FieldCtx::new(3, 1).unwrap()
    }

    fn m(f: &FieldCtx, rows: &[&[u32]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.iter().map(|&x| f.elem(x).unwrap()).collect()).collect::<Vec<_>>())
    }

    #[test]
    fn rank_and_kernel() {
        let f = f3();
        let a = m(&f, &[&[1, 2, 0], &[2, 1, 0], &[0, 0, 1]]);
        // rows 1 and 2 are proportional over F_3
        assert_eq!(a.rank(&f), 2);
        let k = a.kernel(&f);
        assert_eq!(k.len(), 1);
        assert!(a.mul_vec(&k[0], &f).iter().all(|x| x.is_zero()));
    }

    #[test]
    fn rref_pivots() {
        let f = f3();
        let mut a = m(&f, &[&[0, 1, 1], &[0, 2, 2]]);
        assert_eq!(a.rref(&f), vec![1]);
        assert_eq!(a.row(0), m(&f, &[&[0, 1, 1]]).row(0));
    }

    #[test]
    fn echelon_detects_dependency() {
        let f = f3();
        for rule in [PivotRule::First, PivotRule::Last] {
            let mut e = Echelon::tracking(rule);
            let v0 = to_sparse(m(&f, &[&[1, 1, 0, 2]]).row(0));
            let v1 = to_sparse(m(&f, &[&[0, 1, 1, 0]]).row(0));
            // v2 = v0 + 2·v1
            let v2 = axpy(&v0, f.elem(2).unwrap(), &v1, &f);
            assert!(matches!(e.insert(v0, &f), Insert::Pivot(_)));
            assert!(matches!(e.insert(v1, &f), Insert::Pivot(_)));
            match e.insert(v2, &f) {
                Insert::Dependent(c) => {
                    assert_eq!(c, vec![(0, f.elem(2).unwrap()), (1, Fq::ONE), (2, Fq::ONE)]);
                }
                other => panic!("expected dependency, got {other:?}"),
            }
            assert_eq!(e.rank(), 2);
        }
    }

    #[test]
    fn pivot_rules() {
        let f = f3();
        let v = vec![(2, Fq::ONE), (5, Fq::ONE)];
        let mut first = Echelon::new(PivotRule::First);
        let mut last = Echelon::new(PivotRule::Last);
        assert_eq!(first.insert(v.clone(), &f), Insert::Pivot(2));
        assert_eq!(last.insert(v, &f), Insert::Pivot(5));
    }

    #[test]
    fn inverse_round_trip() {
        let f = f3();
        let a = m(&f, &[&[1, 2], &[0, 1]]);
        let inv = a.inverse(&f).unwrap();
        assert_eq!(a.mul(&inv, &f), Matrix::identity(2));
        assert!(m(&f, &[&[1, 2], &[2, 1]]).inverse(&f).is_none());
        assert!(Matrix::zeros(0, 0).inverse(&f).is_some());
    }

    #[test]
    fn sparse_matches_dense_rank() {
        let f = FieldCtx::new(2, 2).unwrap();
        let rows: Vec<Vec<Fq>> =
            (0..7u32).map(|i| (0..6u32).map(|j| f.elem((i * 7 + j * 3 + i * j) % 4).unwrap()).collect()).collect();
        let dense = Matrix::from_rows(&rows).rank(&f);
        for rule in [PivotRule::First, PivotRule::Last] {
            let mut e = Echelon::new(rule);
            for r in &rows {
                e.insert(to_sparse(r), &f);
            }
            assert_eq!(e.rank(), dense);
        }
    }
}
