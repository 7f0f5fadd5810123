//! End-to-end experiment pipeline: mesh, kernel matrix, trees, compression or
//! interpolation, matvec timing, error and storage report.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assembly::assemble_dh2_by_interpolation;
use crate::blocktree::{build_block_tree, sparsity_stats, Admissibility, BlockTree};
use crate::clustering::{build_cluster_tree_with_radii, ClusterTree};
use crate::compression::{aca_compress, compress, AcaMatrix, CompressionConfig, MatrixAccess};
use crate::dh2core::DH2Matrix;
use crate::directions::{build_directions, DirectionHierarchy};
use crate::error::{Error, Result};
use crate::geometry::{assemble_dense_matrix, build_sphere_mesh, KernelKind, KernelMatrix, KernelSpec, SurfaceMesh};
use crate::linalg::{c64, power_iteration_norm, CMatrix};

/// Largest dimension for which a dense oracle is built.
pub const DENSE_ORACLE_CAP: usize = 8192;
pub const ERROR_ITERATIONS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Compress,
    Assemble,
    Aca,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Compress => "compress",
            Method::Assemble => "assemble",
            Method::Aca => "aca",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub level: usize,
    pub kappa: f64,
    pub eps: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub zeta: f64,
    pub order: usize,
    pub leaf_size: usize,
    pub kernel: KernelKind,
    pub standard_admissibility: bool,
    pub seed: u64,
    /// Build the dense matrix and measure the relative spectral error.
    pub compute_error: bool,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            level: 3,
            kappa: 4.0,
            eps: 1e-4,
            eta1: 20.0,
            eta2: 5.0,
            zeta: 0.3,
            order: 4,
            leaf_size: 16,
            kernel: KernelKind::Slp,
            standard_admissibility: false,
            seed: 0,
            compute_error: true,
        }
    }
}

impl ExperimentParams {
    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            kind: self.kernel,
            wave_number: self.kappa,
        }
    }

    pub fn compression_config(&self) -> CompressionConfig {
        CompressionConfig {
            eps: self.eps,
            zeta: self.zeta,
            seed: self.seed,
            ..CompressionConfig::default()
        }
    }

    pub fn admissibility(&self) -> Admissibility {
        if self.standard_admissibility {
            Admissibility::standard(self.kappa, self.eta2)
        } else {
            Admissibility::new(self.kappa, self.eta2)
        }
    }
}

/// Geometry and trees shared by all methods.
pub struct Problem {
    pub mesh: SurfaceMesh,
    pub spec: KernelSpec,
    pub tree: ClusterTree,
    pub dirs: DirectionHierarchy,
    pub blocks: BlockTree,
}

impl Problem {
    pub fn new(p: &ExperimentParams) -> Result<Self> {
        let spec = p.spec();
        spec.validate()?;
        let mesh = build_sphere_mesh(p.level)?;
        let tree = build_cluster_tree_with_radii(&mesh.midpoints, &mesh.radii, p.leaf_size)?;
        let dirs = build_directions(&tree.level_diameters(), p.kappa, p.eta1)?;
        let blocks = build_block_tree(&tree, &dirs, p.admissibility())?;
        Ok(Self {
            mesh,
            spec,
            tree,
            dirs,
            blocks,
        })
    }

    pub fn kernel(&self) -> KernelMatrix<'_> {
        KernelMatrix::new(&self.mesh, self.spec)
    }

    pub fn dense(&self) -> Result<CMatrix> {
        check_dense_cap(self.mesh.len())?;
        assemble_dense_matrix(&self.mesh, &self.spec)
    }
}

pub fn check_dense_cap(n: usize) -> Result<()> {
    if n > DENSE_ORACLE_CAP {
        return Err(Error::CapExceeded { n, cap: DENSE_ORACLE_CAP });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub n: usize,
    pub kappa: f64,
    pub eps: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub zeta: f64,
    pub order: usize,
    pub leaf_size: usize,
    pub kernel: KernelKind,
    pub standard_admissibility: bool,
    pub seed: u64,
    pub t_row: f64,
    pub t_col: f64,
    pub t_prj: f64,
    pub t_mvm: f64,
    pub k_max: usize,
    pub mem_per_dof_kib: f64,
    pub rel_error: Option<f64>,
    pub directions: Vec<usize>,
    pub max_row: usize,
    pub max_col: usize,
}

impl ExperimentReport {
    fn new(method: Method, p: &ExperimentParams, prob: &Problem) -> Self {
        let sp = sparsity_stats(&prob.tree, &prob.dirs, &prob.blocks);
        Self {
            method,
            n: prob.mesh.len(),
            kappa: p.kappa,
            eps: p.eps,
            eta1: p.eta1,
            eta2: p.eta2,
            zeta: p.zeta,
            order: p.order,
            leaf_size: p.leaf_size,
            kernel: p.kernel,
            standard_admissibility: p.standard_admissibility,
            seed: p.seed,
            t_row: 0.0,
            t_col: 0.0,
            t_prj: 0.0,
            t_mvm: 0.0,
            k_max: 0,
            mem_per_dof_kib: 0.0,
            rel_error: None,
            directions: prob.dirs.counts(),
            max_row: sp.max_row(),
            max_col: sp.max_col(),
        }
    }
}

pub fn random_vector(n: usize, seed: u64) -> Vec<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| c64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect()
}

/// `‖G − G̃‖₂ / ‖G‖₂` by power iteration on the difference operator.
pub fn relative_error<F, FH>(g: &CMatrix, apply: F, apply_adjoint: FH, seed: u64) -> Result<f64>
where
    F: Fn(&[c64]) -> Result<Vec<c64>>,
    FH: Fn(&[c64]) -> Result<Vec<c64>>,
{
    let n = g.rows();
    let diff = |y: Vec<c64>, z: Result<Vec<c64>>| -> Vec<c64> {
        match z {
            Ok(z) => y.iter().zip(z).map(|(a, b)| a - b).collect(),
            Err(_) => vec![c64::new(f64::NAN, 0.0); y.len()],
        }
    };
    let num = power_iteration_norm(
        |x| diff(g.apply(x), apply(x)),
        |x| diff(g.apply_adjoint(x), apply_adjoint(x)),
        n,
        ERROR_ITERATIONS,
        seed,
    )?;
    let den = power_iteration_norm(|x| g.apply(x), |x| g.apply_adjoint(x), n, ERROR_ITERATIONS, seed)?;
    Ok(if den > 0.0 { num / den } else { num })
}

fn time_matvec(a: &DH2Matrix, seed: u64) -> Result<f64> {
    let x = random_vector(a.dim(), seed);
    let start = Instant::now();
    a.matvec(&x)?;
    Ok(start.elapsed().as_secs_f64())
}

fn finish_dh2(rep: &mut ExperimentReport, a: &DH2Matrix, dense: Option<&CMatrix>, seed: u64) -> Result<()> {
    rep.t_mvm = time_matvec(a, seed)?;
    rep.k_max = a.max_rank();
    rep.mem_per_dof_kib = a.storage_report().mem_per_dof_kib;
    if let Some(g) = dense {
        rep.rel_error = Some(relative_error(g, |x| a.matvec(x), |x| a.matvec_adjoint(x), seed)?);
    }
    Ok(())
}

pub fn compress_problem(p: &ExperimentParams, prob: &Problem, dense: Option<&CMatrix>) -> Result<(DH2Matrix, ExperimentReport)> {
    let cfg = p.compression_config();
    let kernel = prob.kernel();
    let g: &dyn MatrixAccess = match dense {
        Some(d) => d,
        None => &kernel,
    };
    let (a, cr) = compress(g, &prob.tree, &prob.dirs, &prob.blocks, &cfg)?;
    let mut rep = ExperimentReport::new(Method::Compress, p, prob);
    rep.t_row = cr.t_row;
    rep.t_col = cr.t_col;
    rep.t_prj = cr.t_prj;
    finish_dh2(&mut rep, &a, dense, p.seed)?;
    Ok((a, rep))
}

/// Full compression pipeline.
pub fn run_compression_experiment(p: &ExperimentParams) -> Result<(DH2Matrix, ExperimentReport)> {
    let prob = Problem::new(p)?;
    let dense = if p.compute_error { Some(prob.dense()?) } else { None };
    compress_problem(p, &prob, dense.as_ref())
}

/// Interpolation pipeline; the time to build everything is reported as `t_prj`.
pub fn run_assembly_experiment(p: &ExperimentParams) -> Result<(DH2Matrix, ExperimentReport)> {
    let prob = Problem::new(p)?;
    let start = Instant::now();
    let a = assemble_dh2_by_interpolation(&prob.mesh, &prob.spec, &prob.tree, &prob.dirs, &prob.blocks, p.order)?;
    let mut rep = ExperimentReport::new(Method::Assemble, p, &prob);
    rep.t_prj = start.elapsed().as_secs_f64();
    let dense = if p.compute_error { Some(prob.dense()?) } else { None };
    finish_dh2(&mut rep, &a, dense.as_ref(), p.seed)?;
    Ok((a, rep))
}

/// Compresses the same matrix with DH² compression and with ACA at equal `eps`.
/// The ACA row reports its construction time as `t_prj`.
pub fn run_aca_comparison(p: &ExperimentParams) -> Result<(ExperimentReport, ExperimentReport)> {
    if !p.standard_admissibility {
        return Err(Error::InvalidConfig("the ACA comparison uses standard admissibility".into()));
    }
    let prob = Problem::new(p)?;
    let dense = if p.compute_error { Some(prob.dense()?) } else { None };
    let (_, dh2) = compress_problem(p, &prob, dense.as_ref())?;

    let kernel = prob.kernel();
    let g: &dyn MatrixAccess = match dense.as_ref() {
        Some(d) => d,
        None => &kernel,
    };
    let start = Instant::now();
    let aca: AcaMatrix = aca_compress(g, &prob.tree, &prob.blocks, p.eps, usize::MAX)?;
    let mut rep = ExperimentReport::new(Method::Aca, p, &prob);
    rep.t_prj = start.elapsed().as_secs_f64();
    let x = random_vector(aca.dim(), p.seed);
    let start = Instant::now();
    aca.matvec(&x)?;
    rep.t_mvm = start.elapsed().as_secs_f64();
    rep.k_max = aca.max_rank();
    rep.mem_per_dof_kib = aca.mem_per_dof_kib();
    if let Some(g) = dense.as_ref() {
        rep.rel_error = Some(relative_error(g, |x| aca.matvec(x), |x| aca.matvec_adjoint(x), p.seed)?);
    }
    Ok((dh2, rep))
}

pub const CSV_HEADER: &str = "method,n,kappa,eps,eta1,eta2,zeta,order,leaf_size,kernel,standard_admissibility,seed,\
t_row,t_col,t_prj,t_mvm,k_max,mem_per_dof_kib,rel_error,directions,max_row,max_col";

/// Six significant digits in plain notation where that stays short.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format_sci(x)
    }
}

pub fn format_sci(x: f64) -> String {
    format!("{x:.5e}")
}

/// Writes reports as CSV. With `timings == false` the wall-clock columns stay
/// empty so that repeated runs give identical bytes.
pub fn write_reports_csv<W: Write>(mut w: W, reports: &[ExperimentReport], timings: bool) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        let t = |x: f64| if timings { format_sig(x) } else { String::new() };
        let dirs: Vec<String> = r.directions.iter().map(usize::to_string).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method.as_str(),
            r.n,
            format_sig(r.kappa),
            format_sci(r.eps),
            format_sig(r.eta1),
            format_sig(r.eta2),
            format_sig(r.zeta),
            r.order,
            r.leaf_size,
            r.kernel,
            r.standard_admissibility,
            r.seed,
            t(r.t_row),
            t(r.t_col),
            t(r.t_prj),
            t(r.t_mvm),
            r.k_max,
            format_sig(r.mem_per_dof_kib),
            r.rel_error.map(format_sci).unwrap_or_default(),
            dirs.join(";"),
            r.max_row,
            r.max_col,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(31.608154296875), "31.6082");
        assert_eq!(format_sig(0.3), "0.3");
        assert_eq!(format_sig(20.0), "20");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1234567.0), "1.23457e6");
        assert_eq!(format_sci(6.4e-6), "6.40000e-6");
    }

    #[test]
    fn small_compression_run() {
        let p = ExperimentParams {
            level: 2,
            kappa: 2.0,
            leaf_size: 4,
            ..Default::default()
        };
        let (a, r) = run_compression_experiment(&p).unwrap();
        assert_eq!(r.n, 128);
        assert_eq!(r.k_max, a.max_rank());
        assert!(r.rel_error.unwrap() <= 1e-4);
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &[r.clone()], false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert!(lines[1].starts_with("compress,128,2,1.00000e-4,20,5,0.3,4,4,slp,false,0,,,,,"));
    }

    #[test]
    fn low_frequency_run_has_one_direction_per_level() {
        let p = ExperimentParams {
            level: 2,
            kappa: 0.0,
            leaf_size: 4,
            compute_error: false,
            ..Default::default()
        };
        let (_, r) = run_compression_experiment(&p).unwrap();
        assert!(r.directions.iter().all(|&d| d == 1));
        assert!(r.rel_error.is_none());
    }

    #[test]
    fn aca_needs_standard_admissibility() {
        assert!(run_aca_comparison(&ExperimentParams::default()).is_err());
    }

    #[test]
    fn dense_oracle_cap() {
        assert!(check_dense_cap(8192).is_ok());
        assert!(matches!(check_dense_cap(32768), Err(Error::CapExceeded { .. })));
    }
}
