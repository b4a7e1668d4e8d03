//! Freeness of `ind_{K₀}^{G}(σ_r̄)` over the Hecke algebra, certified at a
//! finite truncation level.
//!
//! The four shell conditions are checked on the exact matrix of `τ` from
//! `B_N` to `B_{N+1}`:
//!
//! * C1: `dim C_n > Σ_{m<n} dim C_m`,
//! * C2: `τ|_{C₀}` lands in `C₁` and is injective,
//! * C3: `τ` moves every standard function by at most one shell and keeps
//!   the `Plus`/`Minus` side,
//! * C4: `f ∈ B_{n+1}` and `τf ∈ B_{n+1}` force `f ∈ B_n`.
//!
//! Then the sets `A_n` are built inductively and the family
//! `⊔_{i+j≤N} τ^i(A_j)` is shown to be a basis of `B_N`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::GradedInstance;
use crate::error::{Error, Result};
use crate::field::Fq;
use crate::induced::{InducedFn, Layout, Model, TauMatrix};
use crate::linalg::{kernel_above, Echelon, Insert, PivotRule, SparseVec};
use crate::sl2::{shell_size, CosetPoint, Form, W0Choice};

pub const CERTIFICATE_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C1Report {
    /// `(n, dim C_n, Σ_{m<n} dim C_m)` for `1 ≤ n ≤ N`.
    pub rows: Vec<(u32, usize, usize)>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C2Report {
    pub dim_sigma: usize,
    pub rank: usize,
    pub image_in_shell_one: bool,
    pub passed: bool,
    /// Kernel vector or offending column, as coordinates.
    pub witness: Option<Vec<(usize, u32)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C3Report {
    pub checked: usize,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C4Level {
    pub n: u32,
    pub kernel_dim: usize,
    pub contained: bool,
    pub witness: Option<Vec<(usize, u32)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C4Report {
    pub levels: Vec<C4Level>,
    pub passed: bool,
}

/// Expansion `τ(f_n) = Σ_m coeffs[m]·f_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TauFnRow {
    pub n: i64,
    /// Nonzero `(m, coefficient)` pairs, increasing in `m`.
    pub coeffs: Vec<(i64, u32)>,
    /// Coefficient at `f_{n+δ(n)}` (away from the centre).
    pub outer: u32,
    /// Coefficient at `f_{n−δ(n)}`.
    pub inner: u32,
    /// `c_n`, the coefficient at `f_n`.
    pub c_n: u32,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub p: u32,
    pub deg: u32,
    pub modulus: Vec<u32>,
    pub r: Vec<u32>,
    pub levels: u32,
    pub precision: usize,
    pub w0: W0Choice,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisProof {
    /// Coordinates of the unit vectors forming `A_n`, per shell.
    pub a_sets: Vec<Vec<usize>>,
    pub a_sizes: Vec<usize>,
    pub family_size: usize,
    pub rank: usize,
    /// Pivot coordinates of the assembled family, in insertion order.
    pub pivots: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreenessCertificate {
    pub schema: u32,
    pub params: Params,
    pub dims: Vec<usize>,
    pub dim_b: usize,
    pub c1: C1Report,
    pub c2: C2Report,
    pub c3: C3Report,
    pub c4: C4Report,
    pub tau_fn: Vec<TauFnRow>,
    pub basis: Option<BasisProof>,
    pub failure: Option<String>,
    pub passed: bool,
}

impl FreenessCertificate {
    /// The three counting identities every passing certificate satisfies.
    pub fn self_consistent(&self) -> bool {
        let Some(b) = &self.basis else { return false };
        let n = self.params.levels as usize;
        b.a_sizes.len() == n + 1
            && b.a_sizes[0] == self.dims[0]
            && (1..=n).all(|k| b.a_sizes[k] == self.dims[k] - self.dims[k - 1])
            && (0..=n).map(|j| (n + 1 - j) * b.a_sizes[j]).sum::<usize>() == self.dim_b
            && b.rank == self.dim_b
    }
}

/// Exact integer check of the growth condition.
pub fn verify_c1(q: u32, dim_sigma: usize, levels: u32) -> C1Report {
    let dims: Vec<usize> = (0..=levels).map(|n| shell_size(q, n) * dim_sigma).collect();
    let rows: Vec<(u32, usize, usize)> =
        (1..=levels).map(|n| (n, dims[n as usize], dims[..n as usize].iter().sum())).collect();
    let passed = rows.iter().all(|&(_, d, s)| d > s);
    C1Report { rows, passed }
}

fn to_pairs(v: &SparseVec) -> Vec<(usize, u32)> {
    v.iter().map(|&(i, c)| (i, c.to_int())).collect()
}

pub fn verify_c2(model: &Model, tau: &TauMatrix) -> C2Report {
    let f = model.field();
    let dim = model.shape().dim();
    let shell1 = tau.dst.shell_range(1);
    let mut witness = None;
    let mut inside = true;
    let mut ech = Echelon::tracking(PivotRule::First);
    for col in &tau.cols[..dim] {
        if inside && col.iter().any(|e| !shell1.contains(&e.0)) {
            inside = false;
            witness = Some(to_pairs(col));
        }
        if let Insert::Dependent(combo) = ech.insert(col.clone(), f) {
            witness.get_or_insert(to_pairs(&combo));
        }
    }
    let rank = ech.rank();
    C2Report { dim_sigma: dim, rank, image_in_shell_one: inside, passed: inside && rank == dim, witness }
}

/// Checks shell adjacency and side preservation for every basis vector.
pub fn verify_c3(model: &Model, tau: &TauMatrix) -> C3Report {
    let f = model.field();
    let origin = CosetPoint::origin();
    for (idx, col) in tau.cols.iter().enumerate() {
        let (src, _) = tau.src.locate(idx, f);
        for &(j, _) in col {
            let (dst, _) = tau.dst.locate(j, f);
            let ok = if src.shell == 0 {
                dst.shell == 1
            } else {
                dst.shell.abs_diff(src.shell) <= 1
                    && (dst.form == src.form || (src.form == Form::Minus && src.shell == 1 && dst == origin))
            };
            if !ok {
                return C3Report {
                    checked: idx + 1,
                    passed: false,
                    witness: Some(format!("basis vector {idx} at {src} maps onto {dst}")),
                };
            }
        }
    }
    C3Report { checked: tau.cols.len(), passed: true, witness: None }
}

/// C4 for an arbitrary operator given by columns from `src` to `dst` coordinates.
pub fn verify_c4_columns(model: &Model, cols: &[SparseVec], src: &Layout, dst: &Layout) -> C4Report {
    let f = model.field();
    let levels: Vec<C4Level> = (0..src.level())
        .map(|n| {
            let upto = src.shell_range(n + 1).end;
            let cut = dst.shell_range(n + 2).start;
            let inner = src.shell_range(n).end;
            let kernel = kernel_above(cols, upto, cut, f);
            let bad = kernel.iter().find(|k| k.iter().any(|e| e.0 >= inner));
            C4Level { n, kernel_dim: kernel.len(), contained: bad.is_none(), witness: bad.map(to_pairs) }
        })
        .collect();
    let passed = levels.iter().all(|l| l.contained);
    C4Report { levels, passed }
}

pub fn verify_c4(model: &Model, tau: &TauMatrix) -> C4Report {
    verify_c4_columns(model, &tau.cols, &tau.src, &tau.dst)
}

/// Coefficients of `g` at the canonical points of the `f_m`, and the check
/// that `g` equals the resulting combination.
pub fn expand_in_f(model: &Model, g: &InducedFn) -> Result<Option<Vec<(i64, Fq)>>> {
    let f = model.field();
    let w0x = model.w0_x_top();
    let k = w0x.0.iter().position(|c| !c.is_zero()).expect("w0 is invertible");
    let top = g.top().unwrap_or(0) as i64;
    let mut coeffs = Vec::new();
    let mut rebuilt = InducedFn::zero();
    for m in -top..=top {
        let shell = m.unsigned_abs() as u32;
        let zeros = vec![Fq::ZERO; 2 * shell as usize];
        let c = if m <= 0 {
            let pt = CosetPoint::plus(shell, zeros)?;
            g.get(&pt).map_or(Fq::ZERO, |v| v.0[0])
        } else {
            let pt = CosetPoint::minus(shell, zeros)?;
            g.get(&pt).map_or(Fq::ZERO, |v| f.div(v.0[k], w0x.0[k]).unwrap())
        };
        if !c.is_zero() {
            coeffs.push((m, c));
            rebuilt.add_assign(&model.f_n(m)?.scale(c, f), f);
        }
    }
    Ok((rebuilt == *g).then_some(coeffs))
}

/// `δ(n)`: the direction away from the centre.
pub fn delta(n: i64) -> i64 {
    if n <= 0 {
        -1
    } else {
        1
    }
}

/// Expansion of `τ(f_n)` for `|n| ≤ bound`.
pub fn tau_fn_table(model: &Model, bound: u32) -> Result<Vec<TauFnRow>> {
    let b = bound as i64;
    (-b..=b).map(|n| tau_fn_row(model, n)).collect()
}

pub fn tau_fn_row(model: &Model, n: i64) -> Result<TauFnRow> {
    let image = model.tau_apply(&model.f_n(n)?)?;
    let Some(coeffs) = expand_in_f(model, &image)? else {
        return Err(Error::CheckFailed(format!("τ(f_{n}) is not a combination of the f_m")));
    };
    let at = |m: i64| coeffs.iter().find(|e| e.0 == m).map_or(Fq::ZERO, |e| e.1);
    let outer = at(n + delta(n));
    let inner = at(n - delta(n));
    let c_n = at(n);
    let passed = if n == 0 {
        let lambda = if model.shape().is_trivial() { Fq::ONE } else { Fq::ZERO };
        outer == Fq::ONE && inner == lambda && c_n.is_zero()
    } else {
        outer == Fq::ONE && inner.is_zero()
    };
    Ok(TauFnRow {
        n,
        coeffs: coeffs.iter().map(|&(m, c)| (m, c.to_int())).collect(),
        outer: outer.to_int(),
        inner: inner.to_int(),
        c_n: c_n.to_int(),
        passed,
    })
}

/// Builds `A_0, …, A_N` and checks that `⊔ τ^i(A_j)` is a basis of `B_N`.
pub fn construct_basis(model: &Model, tau: &TauMatrix) -> Result<BasisProof> {
    let f = model.field();
    let lay = &tau.src;
    let levels = lay.level() as usize;
    let units = |r: std::ops::Range<usize>| -> Vec<SparseVec> { r.map(|i| vec![(i, Fq::ONE)]).collect() };
    // orbits[j][a] = [a, τa, τ²a, …] for a ∈ A_j
    let mut orbits: Vec<Vec<Vec<SparseVec>>> = Vec::new();
    let mut a_sets: Vec<Vec<usize>> = Vec::new();
    a_sets.push(lay.shell_range(0).collect());
    orbits.push(units(lay.shell_range(0)).into_iter().map(|v| vec![v]).collect());
    for s in 1..=levels {
        let range = lay.shell_range(s as u32);
        let mut ech = Echelon::tracking(PivotRule::First);
        for orb_j in orbits.iter_mut() {
            for orb in orb_j.iter_mut() {
                let next = tau.apply(orb.last().unwrap(), f);
                let top: SparseVec = next.iter().copied().filter(|e| range.contains(&e.0)).collect();
                if let Insert::Dependent(combo) = ech.insert(top, f) {
                    return Err(Error::CheckFailed(format!(
                        "images in shell {s} are dependent: relation {:?}",
                        to_pairs(&combo)
                    )));
                }
                orb.push(next);
            }
        }
        let a: Vec<usize> = range.filter(|&c| !ech.has_pivot(c)).collect();
        orbits.push(a.iter().map(|&c| vec![vec![(c, Fq::ONE)]]).collect());
        a_sets.push(a);
    }
    // Family: units first, then images by increasing exponent.
    let mut ech = Echelon::new(PivotRule::Last);
    let mut family_size = 0;
    let max_len = orbits.iter().flatten().map(|o| o.len()).max().unwrap_or(0);
    for i in 0..max_len {
        for orb in orbits.iter().flatten() {
            if let Some(v) = orb.get(i) {
                family_size += 1;
                if let Insert::Dependent(_) = ech.insert(v.clone(), f) {
                    return Err(Error::CheckFailed(format!("family member τ^{i}(a) is dependent on earlier ones")));
                }
            }
        }
    }
    Ok(BasisProof {
        a_sizes: a_sets.iter().map(|a| a.len()).collect(),
        a_sets,
        family_size,
        rank: ech.rank(),
        pivots: ech.pivots(),
    })
}

/// The operator as a one-variable graded instance: `C_s` is shell `s`,
/// with shell `N + 1` as overflow.
pub fn graded_instance(model: &Model, tau: &TauMatrix) -> Result<GradedInstance> {
    let n = tau.src.level();
    let dims: BTreeMap<Vec<u32>, usize> = (0..=n + 1).map(|s| (vec![s], tau.dst.shell_dim(s))).collect();
    GradedInstance::new(model.field().clone(), 1, n, &dims, vec![tau.cols.clone()])
}

/// Runs every check at truncation level `levels` and assembles the certificate.
///
/// Failed conditions are recorded rather than raised; precision and
/// parameter errors are returned.
pub fn certify(model: &Model, levels: u32) -> Result<FreenessCertificate> {
    if levels == 0 {
        return Err(Error::InvalidParameter("truncation level must be at least 1".into()));
    }
    let f = model.field();
    let tau = model.tau_columns(levels)?;
    let dims: Vec<usize> = (0..=levels).map(|n| tau.src.shell_dim(n)).collect();
    let c1 = verify_c1(f.q(), model.shape().dim(), levels);
    let c2 = verify_c2(model, &tau);
    let c3 = verify_c3(model, &tau);
    let c4 = verify_c4(model, &tau);
    let tau_fn = tau_fn_table(model, levels - 1)?;
    let mut failure = None;
    let basis = match construct_basis(model, &tau) {
        Ok(b) => Some(b),
        Err(Error::CheckFailed(msg)) => {
            failure = Some(msg);
            None
        }
        Err(e) => return Err(e),
    };
    let mut cert = FreenessCertificate {
        schema: CERTIFICATE_SCHEMA,
        params: Params {
            p: f.p(),
            deg: f.deg(),
            modulus: f.modulus().to_vec(),
            r: model.shape().r().to_vec(),
            levels,
            precision: model.precision(),
            w0: model.w0(),
        },
        dim_b: tau.src.total(),
        dims,
        c1,
        c2,
        c3,
        c4,
        tau_fn,
        basis,
        failure,
        passed: false,
    };
    cert.passed = cert.c1.passed
        && cert.c2.passed
        && cert.c3.passed
        && cert.c4.passed
        && cert.tau_fn.iter().all(|r| r.passed)
        && cert.self_consistent();
    Ok(cert)
}

/// Like [`certify`] but fails unless everything passes.
pub fn build_free_basis(model: &Model, levels: u32) -> Result<FreenessCertificate> {
    let cert = certify(model, levels)?;
    if !cert.passed {
        let which: Vec<&str> = [
            ("C1", cert.c1.passed),
            ("C2", cert.c2.passed),
            ("C3", cert.c3.passed),
            ("C4", cert.c4.passed),
            ("tau_fn", cert.tau_fn.iter().all(|r| r.passed)),
            ("basis", cert.self_consistent()),
        ]
        .iter()
        .filter(|e| !e.1)
        .map(|e| e.0)
        .collect();
        return Err(Error::CheckFailed(format!(
            "failed: {}{}",
            which.join(", "),
            cert.failure.as_ref().map_or(String::new(), |m| format!(" ({m})"))
        )));
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldCtx;
    use crate::weights::WeightShape;

    fn model(p: u32, deg: u32, r: Vec<u32>, n: u32) -> Model {
        let f = FieldCtx::new(p, deg).unwrap();
        let s = WeightShape::new(&f, r).unwrap();
        Model::for_level(f, s, W0Choice::Standard, n).unwrap()
    }

    #[test]
    fn growth_counts() {
        let c = verify_c1(2, 1, 2);
        assert_eq!(c.rows, vec![(1, 6, 1), (2, 24, 7)]);
        assert!(c.passed);
        assert_eq!(verify_c1(3, 1, 1).rows, vec![(1, 12, 1)]);
    }

    #[test]
    fn injective_on_origin() {
        for (p, deg, r, rank) in [(3, 1, vec![1], 2), (2, 1, vec![0], 1), (2, 2, vec![1, 1], 4)] {
            let m = model(p, deg, r, 1);
            let rep = verify_c2(&m, &m.tau_columns(1).unwrap());
            assert_eq!(rep.rank, rank);
            assert!(rep.passed);
        }
    }

    #[test]
    fn c4_negative_control() {
        let m = model(2, 1, vec![0], 2);
        let tau = m.tau_columns(2).unwrap();
        assert!(verify_c4(&m, &tau).passed);
        // drop everything outside B_{n+1}: the kernel becomes all of B_{n+1}
        let cut = tau.src.total();
        let truncated: Vec<SparseVec> =
            tau.cols.iter().map(|c| c.iter().copied().filter(|e| e.0 < cut).collect()).collect();
        let rep = verify_c4_columns(&m, &truncated, &tau.src, &tau.dst);
        assert!(!rep.passed);
    }

    #[test]
    fn c4_level_zero_kernel_is_b0() {
        let m = model(3, 1, vec![1], 1);
        let rep = verify_c4(&m, &m.tau_columns(1).unwrap());
        assert_eq!(rep.levels[0].kernel_dim, 2);
        assert!(rep.passed);
    }

    #[test]
    fn small_certificate() {
        let m = model(3, 1, vec![1], 2);
        let cert = build_free_basis(&m, 2).unwrap();
        assert_eq!(cert.dims, vec![2, 24, 216]);
        assert_eq!(cert.basis.as_ref().unwrap().a_sizes, vec![2, 22, 192]);
        assert!(cert.self_consistent());
    }

    #[test]
    fn exported_instance_matches() {
        let m = model(3, 1, vec![1], 2);
        let tau = m.tau_columns(2).unwrap();
        let inst = graded_instance(&m, &tau).unwrap();
        let rep = crate::engine::check_hypotheses(&inst);
        assert!(rep.h1_to_h4(), "{rep:?}");
        let out = crate::engine::build_basis(&inst, true).unwrap();
        assert_eq!(out.sizes_by_level(), vec![2, 22, 192]);
    }

    #[test]
    fn tau_f0_rows() {
        let m = model(3, 1, vec![1], 2);
        let row = tau_fn_row(&m, 0).unwrap();
        assert_eq!((row.outer, row.inner), (1, 0));
        let m = model(3, 1, vec![0], 2);
        let row = tau_fn_row(&m, 0).unwrap();
        assert_eq!((row.outer, row.inner), (1, 1));
    }
}
