//! The abstract graded criterion: `d` commuting operators on
//! `V = ⊕_{n ∈ ℕ^d} C_n`, hypothesis checks (H1)–(H5), and the inductive
//! construction of sets `A_n` whose translates `T^i(A_j)` form a basis of
//! every truncation `B_N = ⊕_{|n| ≤ N} C_n`.
//!
//! An instance stores blocks for `|n| ≤ N + 1`. Operators are given on
//! `B_N` only; their images may reach level `N + 1` (the overflow), which
//! is what (H4) at the top level needs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldCtx, Fq};
use crate::linalg::{axpy, kernel_above, to_sparse, Echelon, Insert, Matrix, PivotRule, SparseVec};

pub const INSTANCE_SCHEMA: u32 = 1;

pub type MultiIndex = Vec<u32>;

/// All multi-indices of length `d` and total `s`, lexicographically increasing.
pub fn multi_indices(d: usize, s: u32) -> Vec<MultiIndex> {
    if d == 0 {
        return if s == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=s {
        for mut rest in multi_indices(d - 1, s - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn unit_index(d: usize, j: usize) -> MultiIndex {
    let mut e = vec![0; d];
    e[j] = 1;
    e
}

fn total(n: &[u32]) -> u32 {
    n.iter().sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedInstance {
    field: FieldCtx,
    d: usize,
    level: u32,
    blocks: Vec<MultiIndex>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    lookup: HashMap<MultiIndex, usize>,
    /// Per operator, one sparse column for each coordinate of `B_level`.
    ops: Vec<Vec<SparseVec>>,
}

impl GradedInstance {
    /// `dims` must list every multi-index with `|n| ≤ level + 1`.
    pub fn new(
        field: FieldCtx,
        d: usize,
        level: u32,
        dims: &BTreeMap<MultiIndex, usize>,
        ops: Vec<Vec<SparseVec>>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("need at least one operator".into()));
        }
        let blocks: Vec<MultiIndex> = (0..=level + 1).flat_map(|s| multi_indices(d, s)).collect();
        let mut dv = Vec::with_capacity(blocks.len());
        for b in &blocks {
            match dims.get(b) {
                Some(&k) if k > 0 => dv.push(k),
                _ => return Err(Error::InvalidParameter(format!("block {b:?} needs a positive dimension"))),
            }
        }
        if dims.len() != blocks.len() {
            return Err(Error::InvalidParameter("dimension map has blocks outside the truncation".into()));
        }
        let mut offsets = vec![0];
        for &k in &dv {
            offsets.push(offsets.last().unwrap() + k);
        }
        let lookup = blocks.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        let inst = GradedInstance { field, d, level, blocks, dims: dv, offsets, lookup, ops };
        let (nb, nt) = (inst.dim_b(level), inst.total_dim());
        if inst.ops.len() != d {
            return Err(Error::InvalidParameter(format!("expected {d} operators, got {}", inst.ops.len())));
        }
        for op in &inst.ops {
            if op.len() != nb {
                return Err(Error::InvalidParameter(format!("operator needs {nb} columns, got {}", op.len())));
            }
            for col in op {
                if col.iter().any(|e| e.0 >= nt || e.1.is_zero()) || col.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::InvalidParameter("malformed operator column".into()));
                }
            }
        }
        Ok(inst)
    }

    fn empty(field: FieldCtx, d: usize, level: u32, dims: &BTreeMap<MultiIndex, usize>) -> Result<Self> {
        let nb: usize = dims.iter().filter(|(n, _)| total(n) <= level).map(|e| e.1).sum();
        GradedInstance::new(field, d, level, dims, vec![vec![Vec::new(); nb]; d])
    }

    pub fn field(&self) -> &FieldCtx {
        &self.field
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn blocks(&self) -> &[MultiIndex] {
        &self.blocks
    }

    pub fn dim(&self, n: &[u32]) -> Option<usize> {
        self.lookup.get(n).map(|&i| self.dims[i])
    }

    pub fn range(&self, n: &[u32]) -> Option<Range<usize>> {
        self.lookup.get(n).map(|&i| self.offsets[i]..self.offsets[i + 1])
    }

    /// `dim B_l`.
    pub fn dim_b(&self, l: u32) -> usize {
        let k = self.blocks.iter().take_while(|b| total(b) <= l).count();
        self.offsets[k]
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_of(&self, coord: usize) -> &MultiIndex {
        &self.blocks[self.offsets.partition_point(|&o| o <= coord) - 1]
    }

    pub fn columns(&self, j: usize) -> &[SparseVec] {
        &self.ops[j]
    }

    /// `T_j(v)`; `v` must lie in `B_level`.
    pub fn apply(&self, j: usize, v: &SparseVec) -> SparseVec {
        let f = &self.field;
        let mut acc: BTreeMap<usize, Fq> = BTreeMap::new();
        for &(c, x) in v {
            for &(i, y) in &self.ops[j][c] {
                let e = acc.entry(i).or_insert(Fq::ZERO);
                *e = f.add(*e, f.mul(x, y));
            }
        }
        acc.into_iter().filter(|e| !e.1.is_zero()).collect()
    }

    /// `T^i(v) = T_1^{i_1} ⋯ T_d^{i_d}(v)`.
    pub fn power(&self, i: &[u32], v: &SparseVec) -> SparseVec {
        let mut out = v.clone();
        for j in (0..self.d).rev() {
            for _ in 0..i[j] {
                out = self.apply(j, &out);
            }
        }
        out
    }

    /// `π_n(v)`.
    pub fn project(&self, n: &[u32], v: &SparseVec) -> SparseVec {
        let r = self.range(n).unwrap();
        v.iter().copied().filter(|e| r.contains(&e.0)).collect()
    }

    /// Dense block of operator `j` from `src` to `dst`.
    pub fn block(&self, j: usize, src: &[u32], dst: &[u32]) -> Matrix {
        let (rs, rd) = (self.range(src).unwrap(), self.range(dst).unwrap());
        let mut m = Matrix::zeros(rd.len(), rs.len());
        for (c, col) in self.ops[j][rs.clone()].iter().enumerate() {
            for &(i, x) in col {
                if rd.contains(&i) {
                    m.set(i - rd.start, c, x);
                }
            }
        }
        m
    }
}

/// Outcome of one hypothesis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
    /// A vector exhibiting the failure, as `(coordinate, value)` pairs.
    pub witness: Option<Vec<(usize, u32)>>,
}

impl Check {
    fn pass(detail: impl Into<String>) -> Self {
        Check { passed: true, detail: detail.into(), witness: None }
    }

    fn fail(detail: impl Into<String>, witness: Option<&SparseVec>) -> Self {
        Check { passed: false, detail: detail.into(), witness: witness.map(pairs) }
    }
}

fn pairs(v: &SparseVec) -> Vec<(usize, u32)> {
    v.iter().map(|&(i, x)| (i, x.to_int())).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1: Check,
    pub h2: Check,
    pub h3: Check,
    pub h4: Check,
    pub h5: Check,
    pub commute: Check,
    /// False for `d = 1`, where the construction does not use (H5).
    pub h5_required: bool,
}

impl HypothesisReport {
    pub fn h1_to_h4(&self) -> bool {
        self.h1.passed && self.h2.passed && self.h3.passed && self.h4.passed
    }

    pub fn passed(&self) -> bool {
        self.h1_to_h4() && self.commute.passed && (self.h5.passed || !self.h5_required)
    }
}

pub fn check_h1(inst: &GradedInstance) -> Check {
    let mut below = 0;
    for s in 0..=inst.level {
        let level: Vec<&MultiIndex> = inst.blocks.iter().filter(|b| total(b) == s).collect();
        for n in &level {
            let dn = inst.dim(n).unwrap();
            if s > 0 && dn <= below {
                return Check::fail(format!("dim C{n:?} = {dn} is not above {below}"), None);
            }
        }
        below += level.iter().map(|n| inst.dim(n).unwrap()).sum::<usize>();
    }
    Check::pass("growth holds on every block")
}

pub fn check_h2(inst: &GradedInstance) -> Check {
    if inst.level == 0 {
        return Check::pass("no level-one blocks");
    }
    let zero = vec![0; inst.d];
    let r0 = inst.range(&zero).unwrap();
    for j in 0..inst.d {
        let target = inst.range(&unit_index(inst.d, j)).unwrap();
        let mut ech = Echelon::tracking(PivotRule::First);
        for col in &inst.ops[j][r0.clone()] {
            if col.iter().any(|e| !target.contains(&e.0)) {
                return Check::fail(format!("T{} does not map C0 into C_e{}", j + 1, j + 1), Some(col));
            }
            if let Insert::Dependent(combo) = ech.insert(col.clone(), &inst.field) {
                return Check::fail(format!("T{} is not injective on C0", j + 1), Some(&combo));
            }
        }
    }
    Check::pass("every T_j embeds C0 into C_{e_j}")
}

pub fn check_h3(inst: &GradedInstance) -> Check {
    for n in inst.blocks.iter().filter(|b| total(b) > 0 && total(b) <= inst.level) {
        let r = inst.range(n).unwrap();
        for j in 0..inst.d {
            let mut allowed = vec![n.clone()];
            let mut up = n.clone();
            up[j] += 1;
            allowed.push(up);
            if n[j] > 0 {
                let mut down = n.clone();
                down[j] -= 1;
                allowed.push(down);
            }
            let ranges: Vec<Range<usize>> = allowed.iter().filter_map(|b| inst.range(b)).collect();
            for c in r.clone() {
                let col = &inst.ops[j][c];
                if col.iter().any(|e| !ranges.iter().any(|rg| rg.contains(&e.0))) {
                    let basis = vec![(c, Fq::ONE)];
                    return Check::fail(format!("T{} moves C{n:?} outside its neighbours", j + 1), Some(&basis));
                }
            }
        }
    }
    Check::pass("every T_j moves blocks by at most e_j")
}

pub fn check_h4(inst: &GradedInstance) -> Check {
    for j in 0..inst.d {
        for m in 0..=inst.level {
            let upto = inst.dim_b(m);
            let inner = if m == 0 { 0 } else { inst.dim_b(m - 1) };
            let kernel = kernel_above(&inst.ops[j], upto, upto, &inst.field);
            if let Some(bad) = kernel.iter().find(|k| k.iter().any(|e| e.0 >= inner)) {
                return Check::fail(format!("T{} fails to raise the top of a vector at level {m}", j + 1), Some(bad));
            }
        }
    }
    Check::pass("top(T_j f) = top(f) + 1 on every level")
}

pub fn check_commute(inst: &GradedInstance) -> Check {
    if inst.level == 0 {
        return Check::pass("nothing to compare");
    }
    let nb = inst.dim_b(inst.level - 1);
    for c in 0..nb {
        let e = vec![(c, Fq::ONE)];
        for a in 0..inst.d {
            for b in a + 1..inst.d {
                let ab = inst.apply(a, &inst.apply(b, &e));
                let ba = inst.apply(b, &inst.apply(a, &e));
                if ab != ba {
                    return Check::fail(format!("T{} and T{} differ on a basis vector", a + 1, b + 1), Some(&e));
                }
            }
        }
    }
    Check::pass(format!("operators commute on B{}", inst.level - 1))
}

/// Rank additivity of `{π_n T^{n−j}(span A_j) : j < n}` for `|n| ≥ 2`.
pub fn check_h5(inst: &GradedInstance, a_sets: &ASets) -> Check {
    let f = &inst.field;
    for n in inst.blocks.iter().filter(|b| total(b) >= 2 && total(b) <= inst.level) {
        let mut whole = Echelon::tracking(PivotRule::First);
        let mut sum = 0;
        for j in below(n) {
            let mut part = Echelon::new(PivotRule::First);
            for &a in &a_sets[&j] {
                let i: Vec<u32> = n.iter().zip(&j).map(|(x, y)| x - y).collect();
                let v = inst.project(n, &inst.power(&i, &vec![(a, Fq::ONE)]));
                part.insert(v.clone(), f);
                whole.insert(v, f);
            }
            sum += part.rank();
        }
        if whole.rank() != sum {
            return Check::fail(format!("images in C{n:?} have rank {} instead of {sum}", whole.rank()), None);
        }
    }
    Check::pass("images of lower A-sets are independent in every block")
}

/// Multi-indices `j ≤ n` coordinatewise with `j ≠ n`, lexicographically.
fn below(n: &[u32]) -> Vec<MultiIndex> {
    let mut out: Vec<MultiIndex> = vec![vec![]];
    for &x in n {
        out = out.into_iter().flat_map(|p| (0..=x).map(move |k| [p.clone(), vec![k]].concat())).collect();
    }
    out.retain(|j| j.as_slice() != n);
    out
}

pub fn check_hypotheses(inst: &GradedInstance) -> HypothesisReport {
    let (a_sets, _) = construct(inst);
    HypothesisReport {
        h1: check_h1(inst),
        h2: check_h2(inst),
        h3: check_h3(inst),
        h4: check_h4(inst),
        h5: check_h5(inst, &a_sets),
        commute: check_commute(inst),
        h5_required: inst.d > 1,
    }
}

/// Inductive choice of `A_n`: the unit vectors at coordinates of `C_n` not
/// hit by a pivot of `{π_n T^{n−j}(A_j) : j < n}`. Dependencies among those
/// images are returned instead of raised.
/// `A_n` as coordinates of unit vectors, keyed by `n`.
pub type ASets = BTreeMap<MultiIndex, Vec<usize>>;

fn construct(inst: &GradedInstance) -> (ASets, Vec<(MultiIndex, SparseVec)>) {
    let f = &inst.field;
    let mut a_sets = ASets::new();
    let mut failures = Vec::new();
    for n in inst.blocks.iter().filter(|b| total(b) <= inst.level) {
        let mut ech = Echelon::tracking(PivotRule::First);
        for j in below(n) {
            let i: Vec<u32> = n.iter().zip(&j).map(|(x, y)| x - y).collect();
            for &a in &a_sets[&j] {
                let v = inst.project(n, &inst.power(&i, &vec![(a, Fq::ONE)]));
                if let Insert::Dependent(combo) = ech.insert(v, f) {
                    failures.push((n.clone(), combo));
                }
            }
        }
        let a = inst.range(n).unwrap().filter(|&c| !ech.has_pivot(c)).collect();
        a_sets.insert(n.clone(), a);
    }
    (a_sets, failures)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisOutcome {
    /// `(n, coordinates of the unit vectors in A_n)`.
    pub a_sets: Vec<(MultiIndex, Vec<usize>)>,
    pub family_size: usize,
    /// Whether the sets `T^i(A_j)` are mutually disjoint.
    pub disjoint: bool,
    pub rank: usize,
    pub dim_b: usize,
    pub verified: bool,
}

impl BasisOutcome {
    /// `|A_n|` summed over blocks of each total degree.
    pub fn sizes_by_level(&self) -> Vec<usize> {
        let top = self.a_sets.iter().map(|(n, _)| total(n)).max().unwrap_or(0);
        (0..=top).map(|s| self.a_sets.iter().filter(|(n, _)| total(n) == s).map(|(_, a)| a.len()).sum()).collect()
    }
}

/// Builds the `A_n` and verifies that `⊔_{|i|+|j| ≤ N} T^i(A_j)` is a basis
/// of `B_N` with mutually disjoint pieces.
///
/// With `strict`, any failure is an error. Without it the naive
/// construction is carried out anyway and the outcome records what broke.
pub fn build_basis(inst: &GradedInstance, strict: bool) -> Result<BasisOutcome> {
    let f = &inst.field;
    let (a_sets, failures) = construct(inst);
    if strict {
        if let Some((n, combo)) = failures.first() {
            return Err(Error::ConstructionFailed(format!(
                "images in C{n:?} are dependent: relation {:?}",
                pairs(combo)
            )));
        }
    }
    let dim_b = inst.dim_b(inst.level);
    let mut family: Vec<(u32, SparseVec)> = Vec::new();
    for (j, a) in &a_sets {
        for s in 0..=inst.level - total(j) {
            for i in multi_indices(inst.d, s) {
                for &c in a {
                    family.push((s, inst.power(&i, &vec![(c, Fq::ONE)])));
                }
            }
        }
    }
    family.sort_by_key(|e| e.0);
    let mut seen = HashSet::new();
    let mut disjoint = true;
    let mut ech = Echelon::new(PivotRule::Last);
    for (_, v) in &family {
        if !seen.insert(v.clone()) {
            disjoint = false;
        }
        ech.insert(v.clone(), f);
    }
    let rank = ech.rank();
    let verified = disjoint && rank == dim_b && family.len() == dim_b;
    if strict && !verified {
        return Err(Error::ConstructionFailed(format!(
            "family of {} vectors has rank {rank} in a space of dimension {dim_b} (disjoint: {disjoint})",
            family.len()
        )));
    }
    Ok(BasisOutcome {
        a_sets: a_sets.into_iter().collect(),
        family_size: family.len(),
        disjoint,
        rank,
        dim_b,
        verified,
    })
}

/// Assembles an instance block by block.
#[derive(Clone, Debug)]
pub struct InstanceBuilder {
    field: FieldCtx,
    d: usize,
    level: u32,
    dims: BTreeMap<MultiIndex, usize>,
    blocks: Vec<BTreeMap<(MultiIndex, MultiIndex), Matrix>>,
}

impl InstanceBuilder {
    pub fn new(field: FieldCtx, d: usize, level: u32, dims: BTreeMap<MultiIndex, usize>) -> Self {
        InstanceBuilder { field, d, level, dims, blocks: vec![BTreeMap::new(); d] }
    }

    /// Sets the block of operator `j` from `src` to `dst`.
    pub fn set(&mut self, j: usize, src: &[u32], dst: &[u32], m: Matrix) -> Result<&mut Self> {
        let (ds, dd) = match (self.dims.get(src), self.dims.get(dst)) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::InvalidParameter(format!("unknown block {src:?} or {dst:?}"))),
        };
        if total(src) > self.level || j >= self.d || m.rows() != dd || m.cols() != ds {
            return Err(Error::InvalidParameter(format!(
                "block {src:?} -> {dst:?} of operator {j} has the wrong shape"
            )));
        }
        self.blocks[j].insert((src.to_vec(), dst.to_vec()), m);
        Ok(self)
    }

    pub fn build(&self) -> Result<GradedInstance> {
        let shell = GradedInstance::empty(self.field.clone(), self.d, self.level, &self.dims)?;
        let nb = shell.dim_b(self.level);
        let f = &self.field;
        let mut ops = vec![vec![Vec::new(); nb]; self.d];
        for (j, blocks) in self.blocks.iter().enumerate() {
            for ((src, dst), m) in blocks {
                let (rs, rd) = (shell.range(src).unwrap(), shell.range(dst).unwrap());
                for c in 0..m.cols() {
                    let col: SparseVec = to_sparse(&m.col(c)).into_iter().map(|(i, x)| (rd.start + i, x)).collect();
                    ops[j][rs.start + c] = axpy(&ops[j][rs.start + c], Fq::ONE, &col, f);
                }
            }
        }
        GradedInstance::new(self.field.clone(), self.d, self.level, &self.dims, ops)
    }
}

/// JSON form: block dimensions and dense nonzero blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub schema: u32,
    pub p: u32,
    pub deg: u32,
    pub d: usize,
    pub level: u32,
    pub dims: Vec<BlockDim>,
    /// Per operator, its nonzero blocks.
    pub operators: Vec<Vec<BlockJson>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDim {
    pub n: MultiIndex,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockJson {
    pub src: MultiIndex,
    pub dst: MultiIndex,
    pub rows: Vec<Vec<u32>>,
}

impl GradedInstance {
    pub fn to_json(&self) -> InstanceJson {
        let dims = self.blocks.iter().zip(&self.dims).map(|(n, &dim)| BlockDim { n: n.clone(), dim }).collect();
        let sources: Vec<&MultiIndex> = self.blocks.iter().filter(|b| total(b) <= self.level).collect();
        let operators = (0..self.d)
            .map(|j| {
                let mut out = Vec::new();
                for src in &sources {
                    for dst in &self.blocks {
                        let m = self.block(j, src, dst);
                        if !m.is_zero() {
                            let rows = (0..m.rows()).map(|i| m.row(i).iter().map(|x| x.to_int()).collect()).collect();
                            out.push(BlockJson { src: (*src).clone(), dst: dst.clone(), rows });
                        }
                    }
                }
                out
            })
            .collect();
        InstanceJson {
            schema: INSTANCE_SCHEMA,
            p: self.field.p(),
            deg: self.field.deg(),
            d: self.d,
            level: self.level,
            dims,
            operators,
        }
    }

    pub fn from_json(j: &InstanceJson) -> Result<Self> {
        if j.schema != INSTANCE_SCHEMA {
            return Err(Error::Parse(format!("unsupported instance schema {}", j.schema)));
        }
        let field = FieldCtx::new(j.p, j.deg)?;
        let dims = j.dims.iter().map(|b| (b.n.clone(), b.dim)).collect();
        let mut b = InstanceBuilder::new(field.clone(), j.d, j.level, dims);
        if j.operators.len() != j.d {
            return Err(Error::Parse(format!("expected {} operators", j.d)));
        }
        for (k, blocks) in j.operators.iter().enumerate() {
            for blk in blocks {
                let rows: Vec<Vec<Fq>> = blk
                    .rows
                    .iter()
                    .map(|r| r.iter().map(|&x| field.elem(x)).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                let m = if rows.is_empty() { Matrix::zeros(0, 0) } else { Matrix::from_rows(&rows) };
                b.set(k, &blk.src, &blk.dst, m)?;
            }
        }
        b.build()
    }
}

/// Parameters of the random generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub d: usize,
    pub level: u32,
    pub budget: usize,
}

const CHAIN_MAX_DIM: usize = 8;

/// A random instance together with the number of attempts it took.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub instance: GradedInstance,
    pub attempts: usize,
}

/// Draws instances until one passes every hypothesis.
///
/// For `d = 1` the operator is block-tridiagonal with an injective
/// super-diagonal. For `d ≥ 2` the operators are `X_j` plus polynomials in
/// a degree-preserving module endomorphism of a free module, conjugated by
/// a random block-diagonal change of basis; block dimensions are drawn at
/// random and rejected when growth fails.
pub fn random_instance(field: &FieldCtx, seed: u64, spec: &RandomSpec) -> Result<Sampled> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=spec.budget {
        let inst = if spec.d == 1 { draw_chain(field, &mut rng, spec)? } else { draw_free(field, &mut rng, spec)? };
        if check_hypotheses(&inst).passed() {
            return Ok(Sampled { instance: inst, attempts: attempt });
        }
    }
    Err(Error::BudgetExhausted(spec.budget))
}

fn random_matrix(field: &FieldCtx, rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, field.elem(rng.gen_range(0..field.q())).unwrap());
        }
    }
    m
}

fn random_full_rank(field: &FieldCtx, rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    loop {
        let m = random_matrix(field, rng, rows, cols);
        if m.rank(field) == rows.min(cols) {
            return m;
        }
    }
}

fn draw_chain(field: &FieldCtx, rng: &mut ChaCha8Rng, spec: &RandomSpec) -> Result<GradedInstance> {
    let mut dims = vec![rng.gen_range(1..=2usize)];
    for _ in 1..=spec.level {
        let below: usize = dims.iter().sum();
        dims.push((below + rng.gen_range(0..=2)).min(CHAIN_MAX_DIM));
    }
    dims.push(dims[spec.level as usize] + 1);
    let map = dims.iter().enumerate().map(|(n, &k)| (vec![n as u32], k)).collect();
    let mut b = InstanceBuilder::new(field.clone(), 1, spec.level, map);
    for n in 0..=spec.level as usize {
        let src = [n as u32];
        b.set(0, &src, &[n as u32 + 1], random_full_rank(field, rng, dims[n + 1], dims[n]))?;
        if n > 0 {
            b.set(0, &src, &src, random_matrix(field, rng, dims[n], dims[n]))?;
            b.set(0, &src, &[n as u32 - 1], random_matrix(field, rng, dims[n - 1], dims[n]))?;
        }
    }
    b.build()
}

/// `C_n` has basis `X^{n−k} g_{k,t}` for `k ≤ n` and `t < gens[k]`,
/// ordered by `k` then `t`.
fn free_basis(
    d: usize,
    top: u32,
    gens: &BTreeMap<MultiIndex, usize>,
) -> BTreeMap<MultiIndex, Vec<(MultiIndex, usize)>> {
    let mut basis = BTreeMap::new();
    for s in 0..=top {
        for n in multi_indices(d, s) {
            let mut b = Vec::new();
            for k in below(&n).into_iter().chain(std::iter::once(n.clone())) {
                for t in 0..gens.get(&k).copied().unwrap_or(0) {
                    b.push((k.clone(), t));
                }
            }
            basis.insert(n, b);
        }
    }
    basis
}

fn draw_free(field: &FieldCtx, rng: &mut ChaCha8Rng, spec: &RandomSpec) -> Result<GradedInstance> {
    let (d, level) = (spec.d, spec.level);
    let mut gens: BTreeMap<MultiIndex, usize> = BTreeMap::new();
    for s in 0..=level {
        let lower: usize = free_basis(d, s.saturating_sub(1), &gens)
            .iter()
            .filter(|(n, _)| s > 0 && total(n) < s)
            .map(|(_, b)| b.len())
            .sum();
        for n in multi_indices(d, s) {
            let g = if s < 2 { 1 } else { rng.gen_range(lower.saturating_sub(2).max(1)..=lower) };
            gens.insert(n, g);
        }
    }
    let basis = free_basis(d, level + 1, &gens);
    let dims: BTreeMap<MultiIndex, usize> = basis.iter().map(|(n, b)| (n.clone(), b.len())).collect();
    let shell = GradedInstance::empty(field.clone(), d, level, &dims)?;
    let (nt, nb) = (shell.total_dim(), shell.dim_b(level));
    let pos = |n: &[u32], k: &[u32], t: usize| {
        shell.range(n).unwrap().start + basis[n].iter().position(|(kk, tt)| kk.as_slice() == k && *tt == t).unwrap()
    };
    let rand_elem = |rng: &mut ChaCha8Rng| field.elem(rng.gen_range(0..field.q())).unwrap();

    // φ(g_{k,t}) = Σ c·X^{k−k'} g_{k',t'} over k' ≠ 0, extended X-linearly
    let mut phi = Matrix::zeros(nt, nt);
    let mut images: BTreeMap<(MultiIndex, usize), Vec<Fq>> = BTreeMap::new();
    for (k, &g) in gens.iter().filter(|(k, _)| total(k) > 0) {
        for t in 0..g {
            let v = basis[k].iter().map(|(kk, _)| if total(kk) == 0 { Fq::ZERO } else { rand_elem(rng) }).collect();
            images.insert((k.clone(), t), v);
        }
    }
    for (n, b) in &basis {
        for (k, t) in b.iter().filter(|(k, _)| total(k) > 0) {
            let src = pos(n, k, *t);
            for ((k2, t2), &c) in basis[k].iter().zip(&images[&(k.clone(), *t)]) {
                phi.set(pos(n, k2, *t2), src, c);
            }
        }
    }
    let phi2 = phi.mul(&phi, field);
    let mut s_mat = Matrix::zeros(nt, nt);
    for n in basis.keys() {
        let r = shell.range(n).unwrap();
        let blk = random_full_rank(field, rng, r.len(), r.len());
        for i in 0..r.len() {
            for j in 0..r.len() {
                s_mat.set(r.start + i, r.start + j, blk.get(i, j));
            }
        }
    }
    let s_inv = s_mat.inverse(field).expect("block-diagonal of invertible blocks");
    let mut ops = Vec::with_capacity(d);
    for j in 0..d {
        let (c1, c2) = (rand_elem(rng), rand_elem(rng));
        let mut t_mat = Matrix::zeros(nt, nt);
        for (n, b) in basis.iter().filter(|(n, _)| total(n) <= level) {
            let mut up = n.clone();
            up[j] += 1;
            for (k, t) in b {
                t_mat.set(pos(&up, k, *t), pos(n, k, *t), Fq::ONE);
            }
        }
        for r in 0..nt {
            for c in 0..nb {
                let x =
                    field.add(t_mat.get(r, c), field.add(field.mul(c1, phi.get(r, c)), field.mul(c2, phi2.get(r, c))));
                t_mat.set(r, c, x);
            }
        }
        let conj = s_mat.mul(&t_mat, field).mul(&s_inv, field);
        ops.push((0..nb).map(|c| to_sparse(&conj.col(c))).collect());
    }
    GradedInstance::new(field.clone(), d, level, &dims, ops)
}

/// A `d = 2`, `N = 2` instance satisfying (H1)–(H4) whose level-one data
/// collide in `C_{(1,1)}`: the images of `A_{(1,0)}` and `A_{(0,1)}`
/// coincide there.
pub fn h5_counterexample() -> GradedInstance {
    let f = FieldCtx::new(2, 1).unwrap();
    let mut dims = BTreeMap::new();
    for (s, k) in [(0, 1), (1, 2), (2, 6), (3, 12)] {
        for n in multi_indices(2, s) {
            dims.insert(n, k);
        }
    }
    let unit_map = |rows: usize, cols: usize, pairs: &[(usize, usize)]| {
        let mut m = Matrix::zeros(rows, cols);
        for &(src, dst) in pairs {
            m.set(dst, src, Fq::ONE);
        }
        m
    };
    let shift = |a: usize| -> Vec<(usize, usize)> { (0..6).map(|i| (i, if i < 2 { i } else { i + a })).collect() };
    let ident: Vec<(usize, usize)> = (0..6).map(|i| (i, i)).collect();
    let mut b = InstanceBuilder::new(f, 2, 2, dims);
    let sets = [
        (0, [0, 0], [1, 0], unit_map(2, 1, &[(0, 0)])),
        (1, [0, 0], [0, 1], unit_map(2, 1, &[(0, 0)])),
        (0, [1, 0], [2, 0], unit_map(6, 2, &[(0, 0), (1, 1)])),
        (1, [1, 0], [1, 1], unit_map(6, 2, &[(0, 0), (1, 1)])),
        (0, [0, 1], [1, 1], unit_map(6, 2, &[(0, 0), (1, 1)])),
        (1, [0, 1], [0, 2], unit_map(6, 2, &[(0, 0), (1, 1)])),
        (0, [2, 0], [3, 0], unit_map(12, 6, &ident)),
        (1, [2, 0], [2, 1], unit_map(12, 6, &ident)),
        (0, [1, 1], [2, 1], unit_map(12, 6, &shift(4))),
        (1, [1, 1], [1, 2], unit_map(12, 6, &shift(4))),
        (0, [0, 2], [1, 2], unit_map(12, 6, &shift(4))),
        (1, [0, 2], [0, 3], unit_map(12, 6, &ident)),
    ];
    for (j, src, dst, m) in sets {
        b.set(j, &src, &dst, m).unwrap();
    }
    b.build().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift_chain(level: u32) -> GradedInstance {
        let f = FieldCtx::new(2, 1).unwrap();
        let dims: BTreeMap<MultiIndex, usize> = (0..=level + 1).map(|n| (vec![n], 1usize << n)).collect();
        let mut b = InstanceBuilder::new(f, 1, level, dims);
        for n in 0..=level {
            let k = 1usize << n;
            let mut m = Matrix::zeros(2 * k, k);
            for i in 0..k {
                m.set(2 * i, i, Fq::ONE);
            }
            b.set(0, &[n], &[n + 1], m).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn indices_are_ordered() {
        assert_eq!(multi_indices(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(multi_indices(3, 1).len(), 3);
        assert_eq!(below(&[1, 1]), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn shift_chain_is_free() {
        let inst = shift_chain(3);
        let rep = check_hypotheses(&inst);
        assert!(rep.passed(), "{rep:?}");
        let out = build_basis(&inst, true).unwrap();
        assert_eq!(out.dim_b, 15);
        assert_eq!(out.sizes_by_level(), vec![1, 1, 2, 4]);
    }

    #[test]
    fn skipping_two_levels_breaks_h3() {
        let f = FieldCtx::new(3, 1).unwrap();
        let dims: BTreeMap<MultiIndex, usize> = (0..=3).map(|n| (vec![n], 2 * n as usize + 1)).collect();
        let mut b = InstanceBuilder::new(f, 1, 2, dims);
        b.set(0, &[0], &[1], Matrix::from_cols(3, &[vec![Fq::ONE, Fq::ZERO, Fq::ZERO]])).unwrap();
        let mut m = Matrix::zeros(7, 3);
        m.set(0, 0, Fq::ONE);
        b.set(0, &[1], &[3], m).unwrap();
        let rep = check_hypotheses(&b.build().unwrap());
        assert!(!rep.h3.passed);
        assert!(rep.h3.witness.is_some());
    }

    #[test]
    fn counterexample_fails_only_h5() {
        let inst = h5_counterexample();
        let rep = check_hypotheses(&inst);
        assert!(rep.h1_to_h4() && rep.commute.passed, "{rep:?}");
        assert!(!rep.h5.passed);
        assert!(rep.h5.detail.contains("[1, 1]"));
        assert!(matches!(build_basis(&inst, true), Err(Error::ConstructionFailed(_))));
        let naive = build_basis(&inst, false).unwrap();
        assert!(!naive.verified && !naive.disjoint);
    }

    #[test]
    fn json_round_trip() {
        let inst = h5_counterexample();
        let text = serde_json::to_string(&inst.to_json()).unwrap();
        let back = GradedInstance::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn builder_rejects_bad_shapes() {
        let f = FieldCtx::new(2, 1).unwrap();
        let dims: BTreeMap<MultiIndex, usize> = (0..=2).map(|n| (vec![n], 1)).collect();
        let mut b = InstanceBuilder::new(f, 1, 1, dims);
        assert!(b.set(0, &[0], &[1], Matrix::zeros(2, 1)).is_err());
        assert!(b.set(0, &[2], &[1], Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn random_instances_pass() {
        let f = FieldCtx::new(3, 1).unwrap();
        for seed in 0..6 {
            for d in [1, 2] {
                let spec = RandomSpec { d, level: if d == 1 { 1 + seed as u32 % 3 } else { 2 }, budget: 256 };
                let s = random_instance(&f, seed, &spec).unwrap();
                assert!(check_hypotheses(&s.instance).passed());
                assert!(build_basis(&s.instance, true).unwrap().verified);
            }
        }
    }

    #[test]
    fn free_pattern_with_unit_shift_has_expected_dims() {
        let gens: BTreeMap<MultiIndex, usize> =
            [(vec![0, 0], 1), (vec![1, 0], 1), (vec![0, 1], 1)].into_iter().collect();
        let b = free_basis(2, 2, &gens);
        assert_eq!(b[&vec![1, 1]].len(), 3);
        assert_eq!(b[&vec![2, 0]].len(), 2);
    }
}
