//! The weight `σ_r̄ = ⊗_j (Sym^{r_j} F_q²)^{Frob^j}` of `SL₂(F_q)`.
//!
//! Basis vectors are exponent tuples `ī = (i_0, …, i_{deg−1})` with
//! `0 ≤ i_j ≤ r_j`, standing for `⊗_j X^{r_j−i_j} Y^{i_j}`, in lexicographic
//! order. Index 0 is `X^r̄`, the last index is `Y^r̄`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldCtx, Fq};
use crate::linalg::Matrix;
use crate::sl2::SL2q;

/// `binom(r, i) mod p` via the base-`p` digit product.
pub fn lucas_binom(r: u64, i: u64, p: u32) -> u32 {
    let p64 = p as u64;
    let (mut r, mut i) = (r, i);
    let mut acc = 1u64;
    while r > 0 || i > 0 {
        let (rj, ij) = (r % p64, i % p64);
        if ij > rj {
            return 0;
        }
        acc = acc * small_binom(rj, ij) % p64;
        r /= p64;
        i /= p64;
    }
    acc as u32 % p
}

fn small_binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, j| acc * (n - j) / (j + 1))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightShape {
    p: u32,
    r: Vec<u32>,
}

/// A vector of `σ_r̄` in the monomial basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightVec(pub Vec<Fq>);

impl WeightVec {
    pub fn zero(dim: usize) -> Self {
        WeightVec(vec![Fq::ZERO; dim])
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zero(dim);
        v.0[i] = Fq::ONE;
        v
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, o: &Self, f: &FieldCtx) -> Self {
        WeightVec(self.0.iter().zip(&o.0).map(|(&a, &b)| f.add(a, b)).collect())
    }

    pub fn add_assign(&mut self, o: &Self, f: &FieldCtx) {
        for (a, &b) in self.0.iter_mut().zip(&o.0) {
            *a = f.add(*a, b);
        }
    }

    pub fn scale(&self, c: Fq, f: &FieldCtx) -> Self {
        WeightVec(self.0.iter().map(|&a| f.mul(c, a)).collect())
    }

    pub fn neg(&self, f: &FieldCtx) -> Self {
        WeightVec(self.0.iter().map(|&a| f.neg(a)).collect())
    }
}

impl WeightShape {
    pub fn new(f: &FieldCtx, r: Vec<u32>) -> Result<Self> {
        if r.len() != f.deg() as usize {
            return Err(Error::InvalidParameter(format!("weight needs {} digits, got {}", f.deg(), r.len())));
        }
        if let Some(bad) = r.iter().find(|&&x| x >= f.p()) {
            return Err(Error::InvalidParameter(format!("digit {bad} is not below p = {}", f.p())));
        }
        Ok(WeightShape { p: f.p(), r })
    }

    /// Every admissible digit vector for `f`, in lexicographic order.
    pub fn all(f: &FieldCtx) -> Vec<WeightShape> {
        let deg = f.deg() as usize;
        let count = (f.p() as usize).pow(deg as u32);
        (0..count)
            .map(|mut k| {
                let mut r = vec![0; deg];
                for slot in r.iter_mut().rev() {
                    *slot = (k % f.p() as usize) as u32;
                    k /= f.p() as usize;
                }
                WeightShape { p: f.p(), r }
            })
            .collect()
    }

    pub fn r(&self) -> &[u32] {
        &self.r
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// `Σ r_j p^j`, the exponent of the ambient symmetric power.
    pub fn total_degree(&self) -> u64 {
        self.r.iter().rev().fold(0u64, |acc, &x| acc * self.p as u64 + x as u64)
    }

    pub fn digit_sum(&self) -> u32 {
        self.r.iter().sum()
    }

    pub fn is_trivial(&self) -> bool {
        self.r.iter().all(|&x| x == 0)
    }

    pub fn dim(&self) -> usize {
        self.r.iter().map(|&x| x as usize + 1).product()
    }

    pub fn tuple(&self, mut idx: usize) -> Vec<u32> {
        let mut t = vec![0; self.r.len()];
        for (slot, &rj) in t.iter_mut().zip(&self.r).rev() {
            *slot = (idx % (rj as usize + 1)) as u32;
            idx /= rj as usize + 1;
        }
        t
    }

    pub fn index(&self, t: &[u32]) -> Option<usize> {
        if t.len() != self.r.len() || t.iter().zip(&self.r).any(|(i, r)| i > r) {
            return None;
        }
        Some(t.iter().zip(&self.r).fold(0, |acc, (&i, &r)| acc * (r as usize + 1) + i as usize))
    }

    pub fn basis(&self) -> Vec<Vec<u32>> {
        (0..self.dim()).map(|i| self.tuple(i)).collect()
    }

    /// Exponent `i = Σ i_j p^j` of `Y` for the basis tuple inside `Sym^r`.
    pub fn embedded_exponent(&self, t: &[u32]) -> u64 {
        t.iter().rev().fold(0u64, |acc, &x| acc * self.p as u64 + x as u64)
    }

    /// Human-readable monomial, e.g. `X^1Y^0 (x) X^0Y^1`.
    pub fn label(&self, idx: usize) -> String {
        let t = self.tuple(idx);
        t.iter().zip(&self.r).map(|(&i, &r)| format!("X^{}Y^{}", r - i, i)).collect::<Vec<_>>().join(" (x) ")
    }

    /// `X^r̄`.
    pub fn x_top(&self) -> WeightVec {
        WeightVec::unit(self.dim(), 0)
    }

    /// `Y^r̄`.
    pub fn y_top(&self) -> WeightVec {
        WeightVec::unit(self.dim(), self.dim() - 1)
    }

    /// Matrix of `k` on `σ_r̄`; column `ī` is the image of basis vector `ī`.
    ///
    /// On factor `j`, `X ↦ a^{p^j}X + c^{p^j}Y` and `Y ↦ b^{p^j}X + d^{p^j}Y`.
    pub fn matrix(&self, k: &SL2q, f: &FieldCtx) -> Matrix {
        let factors: Vec<Vec<Vec<Fq>>> = self
            .r
            .iter()
            .enumerate()
            .map(|(j, &rj)| {
                let fr = |x| f.frobenius(x, j as u32);
                let xi = [fr(k.a), fr(k.c)];
                let yi = [fr(k.b), fr(k.d)];
                // column i: coefficients by power of Y of (X-image)^{r−i}(Y-image)^i
                (0..=rj)
                    .map(|i| {
                        let mut poly = vec![Fq::ONE];
                        for _ in 0..rj - i {
                            poly = mul_linear(&poly, xi, f);
                        }
                        for _ in 0..i {
                            poly = mul_linear(&poly, yi, f);
                        }
                        poly
                    })
                    .collect()
            })
            .collect();
        let dim = self.dim();
        let tuples = self.basis();
        let mut m = Matrix::zeros(dim, dim);
        for (col, tc) in tuples.iter().enumerate() {
            for (row, tr) in tuples.iter().enumerate() {
                let mut x = Fq::ONE;
                for (j, fac) in factors.iter().enumerate() {
                    x = f.mul(x, fac[tc[j] as usize][tr[j] as usize]);
                    if x.is_zero() {
                        break;
                    }
                }
                m.set(row, col, x);
            }
        }
        m
    }

    pub fn act(&self, k: &SL2q, v: &WeightVec, f: &FieldCtx) -> WeightVec {
        WeightVec(self.matrix(k, f).mul_vec(&v.0, f))
    }

    /// Keeps only the `Y^r̄` coefficient.
    pub fn u_project(&self, v: &WeightVec) -> WeightVec {
        let last = self.dim() - 1;
        let mut out = WeightVec::zero(self.dim());
        out.0[last] = v.0[last];
        out
    }

    /// Serialized form: nonzero `(tuple, integer)` pairs in basis order.
    pub fn to_pairs(&self, v: &WeightVec) -> Vec<(Vec<u32>, u32)> {
        v.0.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (self.tuple(i), c.to_int())).collect()
    }

    pub fn from_pairs(&self, pairs: &[(Vec<u32>, u32)], f: &FieldCtx) -> Result<WeightVec> {
        let mut v = WeightVec::zero(self.dim());
        for (t, c) in pairs {
            let i = self
                .index(t)
                .ok_or_else(|| Error::Parse(format!("tuple {t:?} is not a basis label of r = {:?}", self.r)))?;
            v.0[i] = f.add(v.0[i], f.elem(*c)?);
        }
        Ok(v)
    }
}

fn mul_linear(poly: &[Fq], lin: [Fq; 2], f: &FieldCtx) -> Vec<Fq> {
    let mut out = vec![Fq::ZERO; poly.len() + 1];
    for (i, &c) in poly.iter().enumerate() {
        out[i] = f.add(out[i], f.mul(c, lin[0]));
        out[i + 1] = f.add(out[i + 1], f.mul(c, lin[1]));
    }
    out
}

/// Outcome of the structural checks on one weight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub r: Vec<u32>,
    pub dim: usize,
    /// Dimension of the `U(F_q)`-fixed space.
    pub u_fixed_dim: usize,
    pub u_fixed_is_x_line: bool,
    /// Rank of `{ū(a)·X^r̄ : a ∈ F_q}`.
    pub x_orbit_rank: usize,
    /// Dimension of the `Ū(F_q)`-fixed space.
    pub ubar_fixed_dim: usize,
    pub ubar_fixed_is_y_line: bool,
    /// Rank of `{u(a)·Y^r̄ : a ∈ F_q}`.
    pub y_orbit_rank: usize,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.u_fixed_dim == 1
            && self.u_fixed_is_x_line
            && self.x_orbit_rank == self.dim
            && self.ubar_fixed_dim == 1
            && self.ubar_fixed_is_y_line
            && self.y_orbit_rank == self.dim
    }
}

/// Computes the fixed lines of the unipotent radicals and the ranks of the
/// opposite-unipotent orbits of the extremal monomials.
pub fn structure_checks(shape: &WeightShape, f: &FieldCtx) -> Result<StructureReport> {
    let dim = shape.dim();
    let id = Matrix::identity(dim);
    let fixed = |mk: &dyn Fn(Fq) -> SL2q| {
        let ms: Vec<Matrix> = f.elements().map(|a| shape.matrix(&mk(a), f).sub(&id, f)).collect();
        Matrix::common_kernel(&ms, f)
    };
    let orbit = |mk: &dyn Fn(Fq) -> SL2q, v: &WeightVec| {
        let cols: Vec<Vec<Fq>> = f.elements().map(|a| shape.act(&mk(a), v, f).0).collect();
        Matrix::from_cols(dim, &cols).rank(f)
    };
    let is_line = |ker: &[Vec<Fq>], v: &WeightVec| {
        ker.len() == 1 && Matrix::from_cols(dim, &[ker[0].clone(), v.0.clone()]).rank(f) == 1
    };
    let u_ker = fixed(&SL2q::u);
    let ubar_ker = fixed(&SL2q::ubar);
    let report = StructureReport {
        r: shape.r().to_vec(),
        dim,
        u_fixed_dim: u_ker.len(),
        u_fixed_is_x_line: is_line(&u_ker, &shape.x_top()),
        x_orbit_rank: orbit(&SL2q::ubar, &shape.x_top()),
        ubar_fixed_dim: ubar_ker.len(),
        ubar_fixed_is_y_line: is_line(&ubar_ker, &shape.y_top()),
        y_orbit_rank: orbit(&SL2q::u, &shape.y_top()),
    };
    if !report.passed() {
        let witness = u_ker
            .iter()
            .chain(&ubar_ker)
            .map(|v| format!("{:?}", v.iter().map(|c| c.to_int()).collect::<Vec<_>>()))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::CheckFailed(format!("weight r = {:?}: {report:?}; fixed vectors [{witness}]", shape.r())));
    }
    Ok(report)
}
