//! End-to-end acceptance run. Prints one line per criterion and exits
//! non-zero if any criterion fails or exceeds its time budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hecke_sl2::engine::{build_basis, check_hypotheses, h5_counterexample, random_instance, RandomSpec};
use hecke_sl2::error::Error;
use hecke_sl2::field::{FieldCtx, Fq};
use hecke_sl2::freeness::{build_free_basis, graded_instance, tau_fn_row, verify_c2, verify_c3, verify_c4};
use hecke_sl2::induced::Model;
use hecke_sl2::series::TruncSeries;
use hecke_sl2::sl2::{cartan_level, reduce_coset, CosetPoint, SL2Mat, SL2q, W0Choice};
use hecke_sl2::weights::{lucas_binom, structure_checks, WeightShape};

/// `(p, deg)` grid for the weight and injectivity criteria.
const WEIGHT_GRID: [(u32, u32); 5] = [(2, 1), (3, 1), (5, 1), (2, 2), (3, 2)];

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn model(f: &FieldCtx, shape: &WeightShape, w0: W0Choice, level: u32) -> Model {
    Model::for_level(f.clone(), shape.clone(), w0, level).unwrap()
}

fn lucas() -> Outcome {
    let mut checked = 0;
    for p in [2u32, 3, 5] {
        let top = (p * p * p) as usize;
        // Pascal's triangle mod p as the oracle
        let mut row = vec![1u32];
        for r in 0..top {
            for (i, &want) in row.iter().enumerate() {
                let got = lucas_binom(r as u64, i as u64, p);
                ensure(got == want, || format!("C({r},{i}) mod {p}: {got} vs {want}"))?;
                checked += 1;
            }
            let mut next = vec![1u32; row.len() + 1];
            for i in 1..row.len() {
                next[i] = (row[i - 1] + row[i]) % p;
            }
            row = next;
        }
    }
    Ok(format!("{checked} binomials"))
}

fn weight_structure() -> Outcome {
    let mut count = 0;
    for (p, deg) in WEIGHT_GRID {
        let f = FieldCtx::new(p, deg).unwrap();
        for shape in WeightShape::all(&f) {
            let rep = structure_checks(&shape, &f).map_err(|e| e.to_string())?;
            let dim: usize = shape.r().iter().map(|&r| r as usize + 1).product();
            ensure(rep.dim == dim, || format!("r = {:?}: dim {} vs {dim}", shape.r(), rep.dim))?;
            ensure(rep.u_fixed_dim == 1 && rep.u_fixed_is_x_line && rep.x_orbit_rank == dim, || format!("{rep:?}"))?;
            ensure(rep.ubar_fixed_dim == 1 && rep.ubar_fixed_is_y_line && rep.y_orbit_rank == dim, || {
                format!("{rep:?}")
            })?;
            count += 1;
        }
    }
    Ok(format!("{count} weights"))
}

/// Whether the image of `f_0` is `f_{-1}`, plus `f_1` for the trivial weight.
fn tau_f0_holds(f: &FieldCtx, shape: &WeightShape, w0: W0Choice) -> bool {
    let m = model(f, shape, w0, 2);
    let mut want = m.f_n(-1).unwrap();
    if shape.is_trivial() {
        want = want.add(&m.f_n(1).unwrap(), f);
    }
    m.tau_apply(&m.f_n(0).unwrap()).unwrap() == want
}

fn tau_f0() -> Outcome {
    for p in [2, 3, 5] {
        let f = FieldCtx::new(p, 1).unwrap();
        for shape in WeightShape::all(&f) {
            ensure(tau_f0_holds(&f, &shape, W0Choice::Standard), || format!("q = {p}, r = {:?}", shape.r()))?;
        }
    }
    let mut passing = Vec::new();
    for w0 in [W0Choice::Standard, W0Choice::Alternate] {
        let all = [3, 5].iter().all(|&p| {
            let f = FieldCtx::new(p, 1).unwrap();
            WeightShape::all(&f).iter().all(|s| tau_f0_holds(&f, s, w0))
        });
        if all {
            passing.push(w0);
        }
    }
    ensure(passing == [W0Choice::Standard], || format!("passing w0 choices: {passing:?}"))?;
    Ok("w0 = [[0,-1],[1,0]] is the unique passing choice".into())
}

fn tau_fn() -> Outcome {
    let mut c_values = Vec::new();
    for p in [2, 3] {
        let f = FieldCtx::new(p, 1).unwrap();
        for shape in WeightShape::all(&f) {
            let m = model(&f, &shape, W0Choice::Standard, 4);
            for n in [-3i64, -2, -1, 1, 2, 3] {
                let row = tau_fn_row(&m, n).map_err(|e| e.to_string())?;
                ensure(row.passed, || format!("q = {p}, r = {:?}, n = {n}: {row:?}", shape.r()))?;
                c_values.push(row.c_n);
            }
        }
    }
    Ok(format!("{} rows, c_n values {:?}", c_values.len(), c_values))
}

fn small_cases() -> Vec<(FieldCtx, WeightShape)> {
    let mut out = Vec::new();
    for p in [2, 3] {
        let f = FieldCtx::new(p, 1).unwrap();
        for r in [0, 1] {
            out.push((f.clone(), WeightShape::new(&f, vec![r]).unwrap()));
        }
    }
    out
}

fn shell_mapping() -> Outcome {
    let mut checked = 0;
    for (f, shape) in small_cases() {
        let m = model(&f, &shape, W0Choice::Standard, 3);
        let tau = m.tau_columns(3).map_err(|e| e.to_string())?;
        let rep = verify_c3(&m, &tau);
        ensure(rep.passed, || format!("q = {}, r = {:?}: {:?}", f.q(), shape.r(), rep.witness))?;
        checked += rep.checked;
    }
    Ok(format!("{checked} basis vectors"))
}

fn injective_on_origin() -> Outcome {
    let mut count = 0;
    for (p, deg) in WEIGHT_GRID {
        let f = FieldCtx::new(p, deg).unwrap();
        for shape in WeightShape::all(&f) {
            let m = model(&f, &shape, W0Choice::Standard, 1);
            let tau = m.tau_columns(0).map_err(|e| e.to_string())?;
            let rep = verify_c2(&m, &tau);
            ensure(rep.passed && rep.rank == shape.dim(), || format!("q = {}, r = {:?}: {rep:?}", f.q(), shape.r()))?;
            count += 1;
        }
    }
    Ok(format!("{count} weights"))
}

fn top_raising() -> Outcome {
    let mut kernels = Vec::new();
    for (f, shape) in small_cases() {
        let m = model(&f, &shape, W0Choice::Standard, 3);
        let tau = m.tau_columns(3).map_err(|e| e.to_string())?;
        let rep = verify_c4(&m, &tau);
        ensure(rep.passed && rep.levels.len() == 3, || format!("q = {}, r = {:?}: {rep:?}", f.q(), shape.r()))?;
        kernels.push(rep.levels.iter().map(|l| l.kernel_dim).collect::<Vec<_>>());
    }
    Ok(format!("kernel dimensions {kernels:?}"))
}

fn certificate_parts() -> Result<(Model, hecke_sl2::freeness::FreenessCertificate), String> {
    let f = FieldCtx::new(3, 1).unwrap();
    let shape = WeightShape::new(&f, vec![1]).unwrap();
    let m = model(&f, &shape, W0Choice::Standard, 3);
    let cert = build_free_basis(&m, 3).map_err(|e| e.to_string())?;
    Ok((m, cert))
}

fn truncated_freeness() -> Outcome {
    let (_, cert) = certificate_parts()?;
    let basis = cert.basis.as_ref().ok_or("no basis in certificate")?;
    ensure(cert.dim_b == 2186, || format!("dim B_3 = {}", cert.dim_b))?;
    ensure(basis.a_sizes == [2, 22, 192, 1728], || format!("A sizes {:?}", basis.a_sizes))?;
    ensure(basis.rank == 2186 && basis.family_size == 2186, || {
        format!("rank {} of {}", basis.rank, basis.family_size)
    })?;
    Ok(format!("dim B_3 = 2186, A sizes {:?}, full rank over F_3", basis.a_sizes))
}

fn graded_engine() -> Outcome {
    let f = FieldCtx::new(3, 1).unwrap();
    let mut d2_attempts = 0;
    for d in [1usize, 2] {
        for seed in 0..100u64 {
            let level = if d == 1 { 1 + (seed % 3) as u32 } else { 2 };
            let s = random_instance(&f, seed, &RandomSpec { d, level, budget: 256 }).map_err(|e| e.to_string())?;
            let inst = &s.instance;
            let largest =
                inst.blocks().iter().filter(|n| n.iter().sum::<u32>() <= level).map(|n| inst.dim(n).unwrap()).max();
            ensure(largest <= Some(8), || format!("d = {d}, seed {seed}: block of dimension {largest:?}"))?;
            ensure(check_hypotheses(inst).passed(), || format!("d = {d}, seed {seed}: hypotheses fail"))?;
            let out = build_basis(inst, true).map_err(|e| format!("d = {d}, seed {seed}: {e}"))?;
            ensure(out.verified, || format!("d = {d}, seed {seed}: {out:?}"))?;
            if d == 2 {
                d2_attempts += s.attempts;
            }
        }
    }
    let bad = h5_counterexample();
    let rep = check_hypotheses(&bad);
    ensure(rep.h1_to_h4() && !rep.h5.passed && !rep.passed(), || format!("counterexample report {rep:?}"))?;
    ensure(matches!(build_basis(&bad, true), Err(Error::ConstructionFailed(_))), || "counterexample was built".into())?;

    let (m, cert) = certificate_parts()?;
    let tau = m.tau_columns(3).map_err(|e| e.to_string())?;
    let inst = graded_instance(&m, &tau).map_err(|e| e.to_string())?;
    let rep = check_hypotheses(&inst);
    ensure(rep.h1_to_h4(), || format!("exported instance: {rep:?}"))?;
    let out = build_basis(&inst, true).map_err(|e| e.to_string())?;
    let sizes = cert.basis.unwrap().a_sizes;
    ensure(out.sizes_by_level() == sizes, || format!("A sizes {:?} vs {sizes:?}", out.sizes_by_level()))?;
    Ok(format!(
        "200 random instances, d = 2 acceptance rate {:.3}, counterexample rejected",
        100.0 / d2_attempts as f64
    ))
}

fn coset_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let fields = [FieldCtx::new(2, 1).unwrap(), FieldCtx::new(3, 1).unwrap()];
    let groups: Vec<Vec<SL2q>> = fields.iter().map(SL2q::all).collect();
    for trial in 0..10_000 {
        let which = rng.gen_range(0..2);
        let (f, group) = (&fields[which], &groups[which]);
        let draw = |rng: &mut ChaCha8Rng, len: usize| -> Vec<Fq> {
            (0..len).map(|_| f.elem(rng.gen_range(0..f.q())).unwrap()).collect()
        };
        let n = trial % 5;
        let minus = n > 0 && trial % 2 == 1;
        let mut param = draw(&mut rng, 2 * n);
        if minus {
            param[0] = Fq::ZERO;
        }
        let point = if minus { CosetPoint::minus(n as u32, param) } else { CosetPoint::plus(n as u32, param) }.unwrap();
        let k = group[rng.gen_range(0..group.len())];
        let (a, b) = (draw(&mut rng, 3), draw(&mut rng, 3));
        let h = SL2Mat::product(
            &[SL2Mat::lift(&k), SL2Mat::u(TruncSeries::exact(1, &a)), SL2Mat::ubar(TruncSeries::exact(1, &b))],
            f,
        )
        .unwrap();
        let g = point.rep().mul(&h, f).unwrap();
        let (got, kbar) = reduce_coset(&g, f, 24).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(got == point && kbar == k, || format!("trial {trial}: {g} reduced to {got}, expected {point}"))?;
        let back = got.rep().inv(f).mul(&g, f).unwrap();
        ensure(back.is_integral() && back.residue().ok() == Some(kbar), || format!("trial {trial}: {back}"))?;
        ensure(cartan_level(&g) == got.shell, || format!("trial {trial}: cartan level of {g}"))?;
    }
    Ok("10000 reductions".into())
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "lucas factorisation", budget: Duration::from_secs(5), run: lucas },
        Criterion { id: 2, name: "weight structure", budget: Duration::from_secs(30), run: weight_structure },
        Criterion { id: 3, name: "image of f_0", budget: Duration::from_secs(60), run: tau_f0 },
        Criterion { id: 4, name: "image of f_n", budget: Duration::from_secs(60), run: tau_fn },
        Criterion { id: 5, name: "shell mapping", budget: Duration::from_secs(60), run: shell_mapping },
        Criterion { id: 6, name: "injective on C0", budget: Duration::from_secs(60), run: injective_on_origin },
        Criterion { id: 7, name: "top raising", budget: Duration::from_secs(60), run: top_raising },
        Criterion { id: 8, name: "free basis of B_3", budget: Duration::from_secs(60), run: truncated_freeness },
        Criterion { id: 9, name: "graded engine", budget: Duration::from_secs(120), run: graded_engine },
        Criterion { id: 10, name: "coset reduction", budget: Duration::from_secs(30), run: coset_reduction },
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_none_or(|k| k == c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let result = match result {
            Ok(msg) if took > c.budget => Err(format!("{msg}; took {took:.2?}, budget {:?}", c.budget)),
            other => other,
        };
        match result {
            Ok(msg) => println!("criterion {:>2} PASS  {:<22} {:>9.2?}  {msg}", c.id, c.name, took),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {:<22} {:>9.2?}  {msg}", c.id, c.name, took);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
