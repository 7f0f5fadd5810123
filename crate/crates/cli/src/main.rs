use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dh2::dh2core::{load_dh2, save_dh2};
use dh2::experiment::{
    compress_problem, random_vector, run_aca_comparison, run_assembly_experiment, write_reports_csv,
    ExperimentParams, Problem,
};
use dh2::geometry::{build_sphere_mesh, KernelKind};
use dh2::linalg::{norm2, read_cmx_file, write_cmx_file, CMatrix};
use dh2::{Error, Result};

#[derive(Parser)]
#[command(name = "dh2", version, about = "Directional H2-matrix experiments on the unit sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sphere mesh as OFF.
    Mesh {
        #[arg(long, default_value_t = 3)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the dense kernel matrix as CMX1.
    Dense {
        #[command(flatten)]
        p: Params,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a DH2 matrix by directional interpolation.
    Assemble {
        #[command(flatten)]
        p: Params,
        #[command(flatten)]
        r: Report,
    },
    /// Compress the kernel matrix (or a CMX1 input) into a DH2 matrix.
    Compress {
        #[command(flatten)]
        p: Params,
        #[command(flatten)]
        r: Report,
        /// Dense CMX1 matrix to compress instead of the kernel matrix.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Multiply a stored DH2v1 matrix with a seeded random vector.
    Matvec {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the result as an n x 1 CMX1 file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare DH2 compression with ACA under standard admissibility.
    CompareAca {
        #[command(flatten)]
        p: Params,
        #[command(flatten)]
        r: Report,
    },
    /// Per-level cluster, direction and sparsity statistics.
    Stats {
        #[command(flatten)]
        p: Params,
        /// Write the cluster tree as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the block tree as CSV.
        #[arg(long)]
        blocks: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Params {
    #[arg(long, default_value_t = 3)]
    level: usize,
    #[arg(long, default_value_t = 4.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 20.0)]
    eta1: f64,
    #[arg(long, default_value_t = 5.0)]
    eta2: f64,
    #[arg(long, default_value_t = 0.3)]
    zeta: f64,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long = "leaf-size", default_value_t = 16)]
    leaf_size: usize,
    #[arg(long, default_value = "slp")]
    kernel: KernelKind,
    #[arg(long = "standard-admissibility")]
    standard_admissibility: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct Report {
    /// Directory for the DH2v1 container.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV report file; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Skip the dense oracle and the error column.
    #[arg(long = "no-error")]
    no_error: bool,
    /// Leave the wall-clock columns empty.
    #[arg(long = "no-timings")]
    no_timings: bool,
}

impl Params {
    fn experiment(&self, compute_error: bool) -> ExperimentParams {
        ExperimentParams {
            level: self.level,
            kappa: self.kappa,
            eps: self.eps,
            eta1: self.eta1,
            eta2: self.eta2,
            zeta: self.zeta,
            order: self.order,
            leaf_size: self.leaf_size,
            kernel: self.kernel,
            standard_admissibility: self.standard_admissibility,
            seed: self.seed,
            compute_error,
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mesh { level, out } => {
            let mesh = build_sphere_mesh(level)?;
            let mut w = output(out.as_deref())?;
            mesh.write_off(&mut w)?;
            w.flush()?;
        }
        Command::Dense { p, out } => {
            let prob = Problem::new(&p.experiment(true))?;
            write_cmx_file(out, &prob.dense()?)?;
        }
        Command::Assemble { p, r } => {
            let (a, rep) = run_assembly_experiment(&p.experiment(!r.no_error))?;
            if let Some(dir) = &r.out {
                save_dh2(&a, dir)?;
            }
            let mut w = output(r.csv.as_deref())?;
            write_reports_csv(&mut w, &[rep], !r.no_timings)?;
            w.flush()?;
        }
        Command::Compress { p, r, input } => {
            let params = p.experiment(!r.no_error);
            let prob = Problem::new(&params)?;
            let dense = match &input {
                Some(path) => {
                    let g = read_cmx_file(path)?;
                    let n = prob.mesh.len();
                    if g.shape() != (n, n) {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            found: g.rows(),
                        });
                    }
                    Some(g)
                }
                None if params.compute_error => Some(prob.dense()?),
                None => None,
            };
            let (a, mut rep) = compress_problem(&params, &prob, dense.as_ref())?;
            if !params.compute_error {
                rep.rel_error = None;
            }
            if let Some(dir) = &r.out {
                save_dh2(&a, dir)?;
            }
            let mut w = output(r.csv.as_deref())?;
            write_reports_csv(&mut w, &[rep], !r.no_timings)?;
            w.flush()?;
        }
        Command::Matvec { input, seed, out } => {
            let a = load_dh2(&input)?;
            let x = random_vector(a.dim(), seed);
            let start = Instant::now();
            let y = a.matvec(&x)?;
            let t = start.elapsed().as_secs_f64();
            if let Some(path) = out {
                let m = CMatrix::from_col_major(y.len(), 1, y.clone()).expect("column vector");
                write_cmx_file(path, &m)?;
            }
            println!("n,t_mvm,norm_x,norm_y");
            println!("{},{:.6e},{:.6e},{:.6e}", a.dim(), t, norm2(&x), norm2(&y));
        }
        Command::CompareAca { mut p, r } => {
            p.standard_admissibility = true;
            let params = p.experiment(!r.no_error);
            let (dh2, aca) = run_aca_comparison(&params)?;
            let mut w = output(r.csv.as_deref())?;
            write_reports_csv(&mut w, &[dh2, aca], !r.no_timings)?;
            w.flush()?;
        }
        Command::Stats { p, out, blocks } => {
            let prob = Problem::new(&p.experiment(false))?;
            if let Some(path) = out {
                prob.tree.write_json_lines(BufWriter::new(File::create(path)?))?;
            }
            if let Some(path) = blocks {
                prob.blocks.write_csv(BufWriter::new(File::create(path)?))?;
            }
            let st = dh2::blocktree::sparsity_stats(&prob.tree, &prob.dirs, &prob.blocks);
            let diams = prob.tree.level_diameters();
            let mut w = io::stdout().lock();
            writeln!(
                w,
                "level,clusters,diameter,directions,max_row,mean_row,max_col,mean_col,max_used_row_directions,max_used_col_directions"
            )?;
            for l in &st.per_level {
                writeln!(
                    w,
                    "{},{},{:.6},{},{},{:.6},{},{:.6},{},{}",
                    l.level,
                    l.clusters,
                    diams[l.level],
                    l.directions,
                    l.max_row,
                    l.mean_row,
                    l.max_col,
                    l.mean_col,
                    l.max_used_row_directions,
                    l.max_used_col_directions
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
