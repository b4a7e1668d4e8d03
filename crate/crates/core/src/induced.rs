//! Finitely supported functions in `ind_{K₀}^{G}(σ_r̄)`, the `G`-action,
//! the spherical Hecke operator `τ` and the Iwahori-invariant functions `f_n`.
//!
//! An [`InducedFn`] maps coset points to weight vectors; the entry
//! `P ↦ v` stands for the standard function `[rep(P), v]`.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{FieldCtx, Fq};
use crate::linalg::{Matrix, SparseVec};
use crate::series::{precision_for_level, TruncSeries};
use crate::sl2::{reduce_coset, shell_size, CosetPoint, SL2Mat, SL2q, W0Choice};
use crate::weights::{WeightShape, WeightVec};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct InducedFn {
    entries: BTreeMap<CosetPoint, WeightVec>,
}

impl InducedFn {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(p: CosetPoint, v: WeightVec) -> Self {
        let mut out = Self::zero();
        if !v.is_zero() {
            out.entries.insert(p, v);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CosetPoint, &WeightVec)> {
        self.entries.iter()
    }

    pub fn get(&self, p: &CosetPoint) -> Option<&WeightVec> {
        self.entries.get(p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `v` at `p`, dropping the entry if it cancels.
    pub fn add_at(&mut self, p: CosetPoint, v: &WeightVec, f: &FieldCtx) {
        if v.is_zero() {
            return;
        }
        match self.entries.get_mut(&p) {
            Some(cur) => {
                cur.add_assign(v, f);
                if cur.is_zero() {
                    self.entries.remove(&p);
                }
            }
            None => {
                self.entries.insert(p, v.clone());
            }
        }
    }

    pub fn add_assign(&mut self, o: &InducedFn, f: &FieldCtx) {
        for (p, v) in &o.entries {
            self.add_at(p.clone(), v, f);
        }
    }

    pub fn add(&self, o: &InducedFn, f: &FieldCtx) -> Self {
        let mut out = self.clone();
        out.add_assign(o, f);
        out
    }

    pub fn scale(&self, c: Fq, f: &FieldCtx) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        InducedFn { entries: self.entries.iter().map(|(p, v)| (p.clone(), v.scale(c, f))).collect() }
    }

    pub fn sub(&self, o: &InducedFn, f: &FieldCtx) -> Self {
        self.add(&o.scale(f.neg(Fq::ONE), f), f)
    }

    /// `max{n : π_n(f) ≠ 0}`, or `None` for the zero function.
    pub fn top(&self) -> Option<u32> {
        self.entries.keys().map(|p| p.shell).max()
    }

    /// `π_n(f)`, the part supported in shell `n`.
    pub fn project(&self, n: u32) -> Self {
        InducedFn {
            entries: self.entries.iter().filter(|(p, _)| p.shell == n).map(|(p, v)| (p.clone(), v.clone())).collect(),
        }
    }

    /// The part supported in shells `≤ n`.
    pub fn truncate(&self, n: u32) -> Self {
        InducedFn {
            entries: self.entries.iter().filter(|(p, _)| p.shell <= n).map(|(p, v)| (p.clone(), v.clone())).collect(),
        }
    }

    pub fn shells(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.entries.keys().map(|p| p.shell).collect();
        s.dedup();
        s
    }
}

impl FromIterator<(CosetPoint, WeightVec)> for InducedFn {
    fn from_iter<I: IntoIterator<Item = (CosetPoint, WeightVec)>>(iter: I) -> Self {
        InducedFn { entries: iter.into_iter().filter(|(_, v)| !v.is_zero()).collect() }
    }
}

/// Coordinates on `B_L = ⊕_{n ≤ L} C_n`: shell by shell, then points in
/// canonical order, then weight basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    q: u32,
    dim: usize,
    offsets: Vec<usize>,
}

impl Layout {
    pub fn new(q: u32, dim: usize, level: u32) -> Self {
        let mut offsets = vec![0];
        for n in 0..=level {
            offsets.push(offsets[n as usize] + shell_size(q, n) * dim);
        }
        Layout { q, dim, offsets }
    }

    pub fn level(&self) -> u32 {
        (self.offsets.len() - 2) as u32
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn weight_dim(&self) -> usize {
        self.dim
    }

    pub fn shell_dim(&self, n: u32) -> usize {
        shell_size(self.q, n) * self.dim
    }

    pub fn shell_range(&self, n: u32) -> Range<usize> {
        self.offsets[n as usize]..self.offsets[n as usize + 1]
    }

    pub fn coord(&self, p: &CosetPoint, i: usize) -> Option<usize> {
        (p.shell <= self.level() && i < self.dim)
            .then(|| self.offsets[p.shell as usize] + p.index_in_shell(self.q) * self.dim + i)
    }

    pub fn shell_of(&self, idx: usize) -> u32 {
        (self.offsets.partition_point(|&o| o <= idx) - 1) as u32
    }

    /// Point and weight-basis index of a coordinate.
    pub fn locate(&self, idx: usize, f: &FieldCtx) -> (CosetPoint, usize) {
        let n = self.shell_of(idx);
        let rel = idx - self.offsets[n as usize];
        (CosetPoint::from_shell_index(f, n, rel / self.dim).unwrap(), rel % self.dim)
    }
}

/// The data fixing one concrete induction: field, weight, Weyl element
/// convention and working precision.
#[derive(Clone, Debug)]
pub struct Model {
    field: FieldCtx,
    shape: WeightShape,
    w0: W0Choice,
    precision: usize,
    w0_mat: Matrix,
    /// Last row of `σ([[0,1],[−1,λ₀]])` for each `λ₀`.
    m_last_rows: Vec<Vec<Fq>>,
}

impl Model {
    pub fn new(field: FieldCtx, shape: WeightShape, w0: W0Choice, precision: usize) -> Result<Self> {
        if precision == 0 {
            return Err(Error::InvalidParameter("precision must be positive".into()));
        }
        let w0_mat = shape.matrix(&w0.matrix(&field), &field);
        let last = shape.dim() - 1;
        let m1 = field.neg(Fq::ONE);
        let m_last_rows = field
            .elements()
            .map(|l0| {
                let m = SL2q { a: Fq::ZERO, b: Fq::ONE, c: m1, d: l0 };
                shape.matrix(&m, &field).row(last).to_vec()
            })
            .collect();
        Ok(Model { field, shape, w0, precision, w0_mat, m_last_rows })
    }

    /// Model with the default precision for truncation level `n`.
    pub fn for_level(field: FieldCtx, shape: WeightShape, w0: W0Choice, n: u32) -> Result<Self> {
        Self::new(field, shape, w0, precision_for_level(n))
    }

    pub fn field(&self) -> &FieldCtx {
        &self.field
    }

    pub fn shape(&self) -> &WeightShape {
        &self.shape
    }

    pub fn w0(&self) -> W0Choice {
        self.w0
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn layout(&self, level: u32) -> Layout {
        Layout::new(self.field.q(), self.shape.dim(), level)
    }

    /// `w₀·X^r̄`.
    pub fn w0_x_top(&self) -> WeightVec {
        WeightVec(self.w0_mat.col(0))
    }

    /// `[g, v]` in canonical form.
    pub fn std_fn(&self, g: &SL2Mat, v: &WeightVec) -> Result<InducedFn> {
        let (p, k) = reduce_coset(g, &self.field, self.precision)?;
        Ok(InducedFn::single(p, self.shape.act(&k, v, &self.field)))
    }

    /// Accumulates `[g, v]` into `out`.
    fn add_std(&self, out: &mut InducedFn, g: &SL2Mat, v: &WeightVec) -> Result<()> {
        if v.is_zero() {
            return Ok(());
        }
        let (p, k) = reduce_coset(g, &self.field, self.precision)?;
        out.add_at(p, &self.shape.act(&k, v, &self.field), &self.field);
        Ok(())
    }

    /// Left translation `g·f`.
    pub fn act_g(&self, g: &SL2Mat, f: &InducedFn) -> Result<InducedFn> {
        let mut out = InducedFn::zero();
        for (p, v) in f.entries() {
            self.add_std(&mut out, &g.mul(&p.rep(), &self.field)?, v)?;
        }
        Ok(out)
    }

    /// The Hecke operator applied to a function.
    pub fn tau_apply(&self, f: &InducedFn) -> Result<InducedFn> {
        let mut out = InducedFn::zero();
        for (p, v) in f.entries() {
            self.tau_entry(p, v, &mut out)?;
        }
        Ok(out)
    }

    fn tau_entry(&self, p: &CosetPoint, v: &WeightVec, out: &mut InducedFn) -> Result<()> {
        let fld = &self.field;
        let r = p.rep();
        let last = self.shape.dim() - 1;
        let w0y = WeightVec(self.w0_mat.col(last));
        let a_inv = SL2Mat::alpha0_pow(-1);
        for (i, l0) in fld.elements().enumerate() {
            let y = self.m_last_rows[i].iter().zip(&v.0).fold(Fq::ZERO, |acc, (&a, &b)| fld.add(acc, fld.mul(a, b)));
            if y.is_zero() {
                continue;
            }
            let val = w0y.scale(y, fld);
            for l1 in fld.elements() {
                let a = TruncSeries::teichmuller_sum(&[l0, l1]);
                let g = SL2Mat::product(&[r.clone(), SL2Mat::u(a), a_inv.clone()], fld)?;
                self.add_std(out, &g, &val)?;
            }
        }
        let uv = self.shape.u_project(v);
        if !uv.is_zero() {
            let alpha = SL2Mat::alpha0_pow(1);
            for mu in fld.elements() {
                let g = SL2Mat::product(&[r.clone(), SL2Mat::ubar(TruncSeries::monomial(mu, 1)), alpha.clone()], fld)?;
                self.add_std(out, &g, &uv)?;
            }
        }
        Ok(())
    }

    /// The `I_S(1)`-invariant function `f_n`.
    pub fn f_n(&self, n: i64) -> Result<InducedFn> {
        let fld = &self.field;
        let m = n.unsigned_abs() as u32;
        let mut out = InducedFn::zero();
        let params = (0..fld.q().pow(2 * m)).map(|k| {
            let mut digits = vec![Fq::ZERO; 2 * m as usize];
            let mut k = k;
            for slot in digits.iter_mut() {
                *slot = fld.elem(k % fld.q()).unwrap();
                k /= fld.q();
            }
            digits
        });
        if n <= 0 {
            let x_top = self.shape.x_top();
            for x in params {
                let g = SL2Mat::u(TruncSeries::exact(0, &x)).mul(&SL2Mat::alpha0_pow(n), fld)?;
                self.add_std(&mut out, &g, &x_top)?;
            }
        } else {
            let v = self.w0_x_top();
            for y in params.filter(|y| y[0].is_zero()) {
                let g = SL2Mat::ubar(TruncSeries::exact(0, &y)).mul(&SL2Mat::alpha0_pow(n), fld)?;
                self.add_std(&mut out, &g, &v)?;
            }
        }
        Ok(out)
    }

    /// Dense coordinates of `f` in `B_level`.
    pub fn coords(&self, f: &InducedFn, level: u32) -> Result<Vec<Fq>> {
        let lay = self.layout(level);
        let mut out = vec![Fq::ZERO; lay.total()];
        for (i, c) in self.sparse_coords(f, &lay)? {
            out[i] = c;
        }
        Ok(out)
    }

    pub fn sparse_coords(&self, f: &InducedFn, lay: &Layout) -> Result<SparseVec> {
        if let Some(top) = f.top() {
            if top > lay.level() {
                return Err(Error::TopExceedsLevel { top, level: lay.level() });
            }
        }
        let mut out = Vec::new();
        for (p, v) in f.entries() {
            let base = lay.coord(p, 0).unwrap();
            out.extend(v.0.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, &c)| (base + i, c)));
        }
        // BTreeMap order of points coincides with coordinate order.
        debug_assert!(out.windows(2).all(|w| w[0].0 < w[1].0));
        Ok(out)
    }

    pub fn from_coords(&self, v: &[Fq], level: u32) -> Result<InducedFn> {
        let lay = self.layout(level);
        if v.len() != lay.total() {
            return Err(Error::InvalidParameter(format!("expected {} coordinates, got {}", lay.total(), v.len())));
        }
        Ok(self.from_sparse(&crate::linalg::to_sparse(v), &lay))
    }

    pub fn from_sparse(&self, v: &SparseVec, lay: &Layout) -> InducedFn {
        let dim = self.shape.dim();
        let mut out = InducedFn::zero();
        for &(idx, c) in v {
            let (p, i) = lay.locate(idx, &self.field);
            let mut w = WeightVec::zero(dim);
            w.0[i] = c;
            out.add_at(p, &w, &self.field);
        }
        out
    }

    /// The standard function at coordinate `idx`.
    pub fn basis_fn(&self, idx: usize, lay: &Layout) -> InducedFn {
        let (p, i) = lay.locate(idx, &self.field);
        InducedFn::single(p, WeightVec::unit(self.shape.dim(), i))
    }

    /// Generators of `I_S(1)` modulo the congruence subgroup of depth `level`.
    pub fn i1_generators(&self, level: u32) -> Result<Vec<SL2Mat>> {
        let fld = &self.field;
        let basis: Vec<Fq> = (0..fld.deg()).map(|j| fld.elem(fld.p().pow(j)).unwrap()).collect();
        let cap = self.precision.max(2 * level as usize + 8);
        let mut out = Vec::new();
        for k in 0..level as i64 {
            for &c in &basis {
                out.push(SL2Mat::u(TruncSeries::monomial(c, k)));
                if k >= 1 {
                    out.push(SL2Mat::ubar(TruncSeries::monomial(c, k)));
                }
            }
            if k >= 1 {
                for c in fld.elements().filter(|c| !c.is_zero()) {
                    let s = TruncSeries::one().add(&TruncSeries::monomial(c, k), fld)?;
                    out.push(SL2Mat::diag(&s, fld, cap)?);
                }
            }
        }
        Ok(out)
    }

    /// True when every generator from [`i1_generators`](Self::i1_generators)
    /// fixes `f`. Requires `level ≥ 2(top(f)+1)`.
    pub fn i1_invariance_check(&self, f: &InducedFn, level: u32) -> Result<bool> {
        let need = 2 * (f.top().unwrap_or(0) + 1);
        if level < need {
            return Err(Error::InvalidParameter(format!("invariance level {level} is below {need}")));
        }
        let wide = Model { precision: self.precision.max(2 * level as usize + 8), ..self.clone() };
        for g in self.i1_generators(level)? {
            if wide.act_g(&g, f)? != *f {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Columns of `τ: B_level → B_{level+1}` in coordinates, one per basis
    /// vector of `B_level`. Evaluated in parallel; the result does not
    /// depend on the schedule.
    pub fn tau_columns(&self, level: u32) -> Result<TauMatrix> {
        let src = self.layout(level);
        let dst = self.layout(level + 1);
        let dim = self.shape.dim();
        let points = src.total() / dim;
        let cols: Result<Vec<Vec<SparseVec>>> = (0..points)
            .into_par_iter()
            .map(|k| {
                let (p, _) = src.locate(k * dim, &self.field);
                (0..dim)
                    .map(|i| {
                        let mut out = InducedFn::zero();
                        self.tau_entry(&p, &WeightVec::unit(dim, i), &mut out)?;
                        self.sparse_coords(&out, &dst)
                    })
                    .collect()
            })
            .collect();
        Ok(TauMatrix { src, dst, cols: cols?.into_iter().flatten().collect() })
    }
}

/// `τ` restricted to `B_L`, as sparse columns in `B_{L+1}` coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TauMatrix {
    pub src: Layout,
    pub dst: Layout,
    pub cols: Vec<SparseVec>,
}

impl TauMatrix {
    /// `τ(v)` for `v` given in source coordinates.
    pub fn apply(&self, v: &SparseVec, f: &FieldCtx) -> SparseVec {
        let mut acc: BTreeMap<usize, Fq> = BTreeMap::new();
        for &(j, c) in v {
            for &(i, x) in &self.cols[j] {
                let e = acc.entry(i).or_insert(Fq::ZERO);
                *e = f.add(*e, f.mul(c, x));
            }
        }
        acc.into_iter().filter(|(_, x)| !x.is_zero()).collect()
    }
}
