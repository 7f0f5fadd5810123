//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Always exits 0 so the workspace test run stays green; set
//! `DH2_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use dh2::assembly::assemble_dh2_by_interpolation;
use dh2::blocktree::{build_block_tree, sparsity_stats, Admissibility};
use dh2::clustering::{build_cluster_tree_with, ClusterTree, SplitRule};
use dh2::compression::{
    block_weights, build_basis, compress, farfield_sets, weighted_farfield_block, Adjoint, CompressionConfig,
    MatrixAccess, Side,
};
use dh2::dh2core::{save_dh2, DH2Matrix};
use dh2::directions::{build_directions, project_to_sphere, DirectionHierarchy};
use dh2::experiment::{
    random_vector, run_aca_comparison, run_assembly_experiment, run_compression_experiment, write_reports_csv,
    ExperimentParams, Problem,
};
use dh2::geometry::{build_sphere_mesh, norm, sub, KernelKind, Point3};
use dh2::linalg::{norm2, CMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const ORACLE_TOL: f64 = 1e-12;
const ORACLE_BUDGET_S: f64 = 30.0;
const ACCURACY_TOL: f64 = 1e-4;
const ACCURACY_BUDGET_S: f64 = 600.0;
const SLP_REFERENCE: f64 = 6.4e-6;
const DLP_REFERENCE: f64 = 8.8e-6;
const BOUND_SLACK: f64 = 1e-8;
const PYTHAGORAS_TOL: f64 = 1e-10;
const RECOVERY_TOL: f64 = 1e-10;
const RECOVERY_EPS: f64 = 1e-12;
const RECOVERY_MAX_RANK: usize = 27;
const COVERING_SAMPLES: usize = 100_000;
const EXPANSION_PAIRS: usize = 10_000;
const SCALING_FACTOR: f64 = 2.0;
const SCALING_BUDGET_S: f64 = 1800.0;
const SCALING_LEAF: usize = 8;
/// With eta2 = 5 every admissible block at n = 512 sits on clusters too small to
/// truncate, so the basis checks use a wider condition.
const BASIS_ETA2: f64 = 10.0;
/// eta1 = 20 leaves only the zero direction on the admissible levels at n = 512.
const BASIS_ETA1: [f64; 2] = [20.0, 2.0];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn params(level: usize, kappa: f64, leaf_size: usize) -> ExperimentParams {
    ExperimentParams {
        level,
        kappa,
        leaf_size,
        ..Default::default()
    }
}

fn problem(level: usize, kappa: f64, leaf_size: usize) -> Problem {
    Problem::new(&params(level, kappa, leaf_size)).expect("valid problem")
}

fn wide_problem(level: usize, kappa: f64, leaf_size: usize, eta1: f64) -> Problem {
    let p = ExperimentParams {
        eta1,
        eta2: BASIS_ETA2,
        ..params(level, kappa, leaf_size)
    };
    Problem::new(&p).expect("valid problem")
}

fn compress_dense(prob: &Problem, g: &CMatrix, cfg: &CompressionConfig) -> DH2Matrix {
    compress(g, &prob.tree, &prob.dirs, &prob.blocks, cfg).expect("compression").0
}

fn rel_diff(a: &[dh2::linalg::c64], b: &[dh2::linalg::c64]) -> f64 {
    let d: Vec<_> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}

fn oracle_error(a: &DH2Matrix) -> f64 {
    let d = a.expand_dense().expect("small enough to expand");
    let mut worst = 0.0f64;
    for seed in 0..2 {
        let x = random_vector(a.dim(), seed);
        worst = worst.max(rel_diff(&a.matvec(&x).unwrap(), &d.apply(&x)));
        worst = worst.max(rel_diff(&a.matvec_adjoint(&x).unwrap(), &d.apply_adjoint(&x)));
    }
    worst
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut admissible = 0;
    let (mut matrices, mut directional) = (0, 0);
    // n = 8, 128, 512; the leaf size is the largest that still yields admissible blocks.
    // eta1 = 20 puts every admissible block on a zero-direction level at these sizes,
    // eta1 = 2 exercises proper directions.
    for (level, leaf) in [(0, 16), (2, 2), (3, 4)] {
        for kappa in [0.0, 2.0, 4.0] {
            for eta1 in [20.0, 2.0] {
                if kappa == 0.0 && eta1 != 20.0 {
                    continue;
                }
                let prob = Problem::new(&ExperimentParams {
                    eta1,
                    ..params(level, kappa, leaf)
                })
                .unwrap();
                admissible += prob.blocks.admissible.len();
                directional += prob.blocks.admissible.iter().filter(|&&b| prob.blocks.block(b).direction != Some(0)).count();
                let g = prob.dense().unwrap();
                let assembled =
                    assemble_dh2_by_interpolation(&prob.mesh, &prob.spec, &prob.tree, &prob.dirs, &prob.blocks, 3).unwrap();
                let compressed = compress_dense(&prob, &g, &CompressionConfig::default());
                for a in [&assembled, &compressed] {
                    worst = worst.max(oracle_error(a));
                    matrices += 1;
                }
            }
        }
    }
    let t = start.elapsed().as_secs_f64();
    check(
        worst <= ORACLE_TOL && t < ORACLE_BUDGET_S && directional > 0,
        format!(
            "max relative deviation {worst:.2e} over {matrices} matrices ({admissible} admissible blocks, {directional} with c != 0), {t:.1} s"
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (kernel, reference) in [(KernelKind::Slp, SLP_REFERENCE), (KernelKind::Dlp, DLP_REFERENCE)] {
        let p = ExperimentParams {
            kernel,
            ..params(4, 8.0, 16)
        };
        let (_, r) = run_compression_experiment(&p).unwrap();
        let err = r.rel_error.expect("error requested");
        ok &= err <= ACCURACY_TOL;
        lines.push(format!(
            "{kernel} n={} error {err:.2e} (reference {reference:.1e}), k_max {}, {:.1} KiB/DoF",
            r.n, r.k_max, r.mem_per_dof_kib
        ));
    }
    let t = start.elapsed().as_secs_f64();
    check(ok && t < ACCURACY_BUDGET_S, format!("{}, {t:.1} s", lines.join("; ")))
}

fn positions(all: &[usize], sub: &[usize]) -> Vec<usize> {
    sub.iter().map(|i| all.iter().position(|j| j == i).expect("son index in father")).collect()
}

struct BasisCheck {
    checked: usize,
    truncated: usize,
    violations: usize,
    worst: f64,
}

/// Projection error of every `(t, c)` against the realized descendant bound.
fn bound_check<A: MatrixAccess + ?Sized>(g: &A, prob: &Problem, side: Side, cfg: &CompressionConfig) -> BasisCheck {
    let (tree, dirs) = (&prob.tree, &prob.dirs);
    let w = block_weights(g, tree, &prob.blocks, cfg).unwrap();
    let far = farfield_sets(tree, dirs, &prob.blocks, side);
    let res = build_basis(g, tree, dirs, &prob.blocks, &far, &w, cfg, false).unwrap();
    let q = res.basis.expand(tree, dirs);
    let mut out = BasisCheck {
        checked: 0,
        truncated: 0,
        violations: 0,
        worst: 0.0,
    };
    for cl in &tree.clusters {
        for &c in far.sets[cl.id].keys() {
            let gt = weighted_farfield_block(g, tree, &far, &w, cl.id, c);
            let qt = &q[cl.id][&c];
            let err = gt.sub(&qt.mul(&qt.adjoint_mul(&gt))).norm_2();
            let bound = tree
                .descendants(cl.id)
                .iter()
                .map(|&r| {
                    let cr = dirs.descend(cl.level, c, tree.cluster(r).level);
                    res.report.realized[r].get(&cr).copied().unwrap_or(0.0).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            if err > bound * (1.0 + BOUND_SLACK) + 1e-14 {
                out.violations += 1;
            }
            if bound > 0.0 {
                out.truncated += 1;
                out.worst = out.worst.max(err / bound);
            }
            out.checked += 1;
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let cfg = CompressionConfig::default();
    let (mut checked, mut truncated, mut violations, mut worst) = (0, 0, 0, 0.0f64);
    for eta1 in BASIS_ETA1 {
        let prob = wide_problem(3, 4.0, 4, eta1);
        let g = prob.dense().unwrap();
        for r in [
            bound_check(&g, &prob, Side::Row, &cfg),
            bound_check(&Adjoint(&g), &prob, Side::Col, &cfg),
        ] {
            checked += r.checked;
            truncated += r.truncated;
            violations += r.violations;
            worst = worst.max(r.worst);
        }
    }
    check(
        violations == 0 && truncated > 0,
        format!("{checked} pairs ({truncated} truncated), {violations} violations, max error/bound {worst:.3}"),
    )
}

fn pythagoras_check<A: MatrixAccess + ?Sized>(
    g: &A,
    tree: &ClusterTree,
    dirs: &DirectionHierarchy,
    prob_bt: &dh2::blocktree::BlockTree,
    side: Side,
) -> (usize, f64) {
    let cfg = CompressionConfig::default();
    let w = block_weights(g, tree, prob_bt, &cfg).unwrap();
    let far = farfield_sets(tree, dirs, prob_bt, side);
    let res = build_basis(g, tree, dirs, prob_bt, &far, &w, &cfg, false).unwrap();
    let q = res.basis.expand(tree, dirs);
    let (mut checked, mut worst) = (0, 0.0f64);
    for cl in tree.clusters.iter().filter(|c| c.sons.len() == 2) {
        for &c in far.sets[cl.id].keys() {
            let gt = weighted_farfield_block(g, tree, &far, &w, cl.id, c);
            let qt = &q[cl.id][&c];
            let lhs = gt.sub(&qt.mul(&qt.adjoint_mul(&gt))).norm_fro().powi(2);
            // residuals at roundoff level carry no relative information
            if lhs <= (1e-12 * gt.norm_fro()).powi(2) {
                continue;
            }
            let sc = dirs.son(cl.level, c);
            let all: Vec<usize> = (0..gt.cols()).collect();
            let mut rhs = 0.0;
            let mut hat = Vec::new();
            for &son in &cl.sons {
                let gs = gt.select(&positions(&cl.indices, &tree.cluster(son).indices), &all);
                let qs = &q[son][&sc];
                let proj = qs.adjoint_mul(&gs);
                rhs += gs.sub(&qs.mul(&proj)).norm_fro().powi(2);
                hat.push(proj);
            }
            let ghat = CMatrix::vstack(&hat.iter().collect::<Vec<_>>());
            let e: Vec<&CMatrix> = cl.sons.iter().map(|&son| &res.basis.transfer[son][&c]).collect();
            let qhat = CMatrix::vstack(&e);
            rhs += ghat.sub(&qhat.mul(&qhat.adjoint_mul(&ghat))).norm_fro().powi(2);
            worst = worst.max((lhs - rhs).abs() / lhs);
            checked += 1;
        }
    }
    (checked, worst)
}

fn criterion_4() -> Outcome {
    let kappa = 4.0;
    let mesh = build_sphere_mesh(3).unwrap();
    let tree = build_cluster_tree_with(&mesh.midpoints, &mesh.radii, 4, SplitRule::Bisection).unwrap();
    let g = dh2::geometry::assemble_dense_matrix(&mesh, &dh2::geometry::KernelSpec::slp(kappa)).unwrap();
    let (mut checked, mut worst) = (0, 0.0f64);
    for eta1 in BASIS_ETA1 {
        let dirs = build_directions(&tree.level_diameters(), kappa, eta1).unwrap();
        let bt = build_block_tree(&tree, &dirs, Admissibility::new(kappa, BASIS_ETA2)).unwrap();
        for (c, w) in [
            pythagoras_check(&g, &tree, &dirs, &bt, Side::Row),
            pythagoras_check(&Adjoint(&g), &tree, &dirs, &bt, Side::Col),
        ] {
            checked += c;
            worst = worst.max(w);
        }
    }
    check(
        worst <= PYTHAGORAS_TOL && checked > 0,
        format!("{checked} two-son pairs on n={}, max relative mismatch {worst:.2e}", mesh.len()),
    )
}

fn criterion_5() -> Outcome {
    let (mut worst, mut rank) = (0.0f64, 0);
    for eta1 in BASIS_ETA1 {
        let prob = wide_problem(3, 4.0, 4, eta1);
        let assembled =
            assemble_dh2_by_interpolation(&prob.mesh, &prob.spec, &prob.tree, &prob.dirs, &prob.blocks, 3).unwrap();
        let d = assembled.expand_dense().unwrap();
        let a = compress_dense(&prob, &d, &CompressionConfig::with_eps(RECOVERY_EPS));
        worst = worst.max(a.expand_dense().unwrap().sub(&d).norm_2() / d.norm_2());
        rank = rank.max(a.max_rank());
    }
    check(
        worst <= RECOVERY_TOL && rank <= RECOVERY_MAX_RANK,
        format!("relative error {worst:.2e}, max rank {rank}"),
    )
}

fn random_unit(rng: &mut ChaCha8Rng) -> Point3 {
    loop {
        let v: Point3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        if let Ok(u) = project_to_sphere(&v) {
            return u;
        }
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let samples: Vec<Point3> = (0..COVERING_SAMPLES).map(|_| random_unit(&mut rng)).collect();
    let (mut levels, mut misses) = (0, 0);
    for (mesh_level, kappa, eta1) in [(3, 4.0, 20.0), (4, 8.0, 20.0), (5, 16.0, 20.0), (5, 16.0, 5.0)] {
        let mesh = build_sphere_mesh(mesh_level).unwrap();
        let tree = dh2::clustering::build_cluster_tree_with_radii(&mesh.midpoints, &mesh.radii, 16).unwrap();
        let diams = tree.level_diameters();
        let dirs = build_directions(&diams, kappa, eta1).unwrap();
        for (l, delta) in diams.iter().enumerate() {
            if dirs.is_zero_level(l) {
                continue;
            }
            levels += 1;
            let bound = eta1 / (kappa * delta);
            for z in &samples {
                let c = dirs.direction(l, dirs.nearest(l, z).unwrap());
                if norm(&sub(z, &c)) > bound {
                    misses += 1;
                }
            }
        }
    }
    let mut expansions = 0;
    for _ in 0..EXPANSION_PAIRS {
        let x = random_unit(&mut rng).map(|v| v * rng.random_range(1.0..5.0));
        let y = random_unit(&mut rng).map(|v| v * rng.random_range(1.0..5.0));
        let lhs = norm(&sub(&project_to_sphere(&x).unwrap(), &project_to_sphere(&y).unwrap()));
        if lhs > norm(&sub(&x, &y)) * (1.0 + 1e-14) {
            expansions += 1;
        }
    }
    check(
        misses == 0 && expansions == 0 && levels > 0,
        format!("{levels} directional levels, {misses} covering misses, {expansions} expanding pairs"),
    )
}

fn criterion_7() -> Outcome {
    let mut problems = Vec::new();
    for (level, leaf) in [(2, 2), (3, 4), (4, 16)] {
        let prob = problem(level, 0.0, leaf);
        let zero_only = (0..prob.dirs.levels()).all(|l| prob.dirs.directions(l) == [[0.0; 3]]);
        let standard = build_block_tree(&prob.tree, &prob.dirs, Admissibility::standard(0.0, 5.0)).unwrap();
        let same_blocks = standard.blocks == prob.blocks.blocks;
        let g = prob.dense().unwrap();
        let compressed = compress_dense(&prob, &g, &CompressionConfig::default());
        let assembled =
            assemble_dh2_by_interpolation(&prob.mesh, &prob.spec, &prob.tree, &prob.dirs, &prob.blocks, 3).unwrap();
        let single = [&compressed, &assembled].iter().all(|a| {
            [&a.row_basis, &a.col_basis]
                .iter()
                .all(|b| b.ranks.iter().all(|m| m.keys().all(|&c| c == 0)))
        });
        if !(zero_only && same_blocks && single) {
            return Err(format!(
                "n={}: zero directions {zero_only}, blocks unchanged {same_blocks}, single bases {single}",
                prob.mesh.len()
            ));
        }
        problems.push(prob.mesh.len());
    }
    Ok(format!("n in {problems:?}: one zero direction per level, single bases, parabolic condition inert"))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut ratios = Vec::new();
    let mut lf_rows = Vec::new();
    for (level, kappa) in [(3, 4.0), (4, 8.0), (5, 16.0)] {
        let prob = problem(level, kappa, SCALING_LEAF);
        let n = prob.mesh.len();
        let (a, _) = compress(&prob.kernel(), &prob.tree, &prob.dirs, &prob.blocks, &CompressionConfig::default()).unwrap();
        let st = a.storage_report();
        ratios.push(st.total as f64 / (n * a.max_rank().max(1)) as f64);
        let sp = sparsity_stats(&prob.tree, &prob.dirs, &prob.blocks);
        let lf = prob
            .tree
            .clusters
            .iter()
            .filter(|c| prob.dirs.is_zero_level(c.level))
            .map(|c| sp.row_counts[c.id])
            .max()
            .unwrap_or(0);
        lf_rows.push(lf);
    }
    let growth: Vec<f64> = ratios.windows(2).map(|w| w[1] / w[0]).collect();
    let storage_ok = growth.iter().all(|&g| g <= SCALING_FACTOR);
    let (lo, hi) = (*lf_rows.iter().min().unwrap(), *lf_rows.iter().max().unwrap());
    let rows_ok = lo > 0 && hi as f64 <= SCALING_FACTOR * lo as f64;
    let t = start.elapsed().as_secs_f64();
    let ratio_text: Vec<String> = ratios.iter().map(|r| format!("{r:.1}")).collect();
    let growth_text: Vec<String> = growth.iter().map(|g| format!("{g:.2}")).collect();
    check(
        storage_ok && rows_ok && t < SCALING_BUDGET_S,
        format!(
            "storage/(n k_max) {} (growth {}), low-frequency max #row {lf_rows:?}, {t:.1} s",
            ratio_text.join(" -> "),
            growth_text.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = ExperimentParams {
        standard_admissibility: true,
        ..params(4, 8.0, 16)
    };
    let (dh2, aca) = run_aca_comparison(&p).unwrap();
    let (e1, e2) = (dh2.rel_error.unwrap(), aca.rel_error.unwrap());
    check(
        e1 <= ACCURACY_TOL && e2 <= ACCURACY_TOL && dh2.mem_per_dof_kib < aca.mem_per_dof_kib,
        format!(
            "DH2 {:.2} KiB/DoF error {e1:.2e}; ACA {:.2} KiB/DoF error {e2:.2e}",
            dh2.mem_per_dof_kib, aca.mem_per_dof_kib
        ),
    )
}

fn files(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files(root, &p, out);
        } else {
            out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
}

fn payload(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    files(dir, dir, &mut out);
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let p = ExperimentParams {
        seed: 3,
        order: 2,
        ..params(3, 4.0, 8)
    };
    let mut runs = Vec::new();
    for i in 0..2 {
        let (a, r) = run_compression_experiment(&p).unwrap();
        let (b, s) = run_assembly_experiment(&p).unwrap();
        let mut csv = Vec::new();
        write_reports_csv(&mut csv, &[r, s], false).unwrap();
        let (da, db) = (tmp.path().join(format!("c{i}")), tmp.path().join(format!("a{i}")));
        save_dh2(&a, &da).unwrap();
        save_dh2(&b, &db).unwrap();
        runs.push((csv, payload(&da), payload(&db)));
    }
    let bytes: usize = runs[0].1.iter().chain(&runs[0].2).map(|(_, b)| b.len()).sum();
    check(
        runs[0] == runs[1],
        format!("CSV ({} bytes) and DH2v1 payloads ({bytes} bytes) compared across two runs", runs[0].0.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", criterion_1),
        ("compression accuracy", criterion_2),
        ("basis error bound", criterion_3),
        ("Pythagoras split", criterion_4),
        ("exact recovery", criterion_5),
        ("direction covering", criterion_6),
        ("low-frequency degeneration", criterion_7),
        ("scaling trend", criterion_8),
        ("ACA comparison", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let t = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{t:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{t:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 && std::env::var_os("DH2_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
