use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use iopeg_core::study::{
    emit_csv, fill_rates, format_error_table, format_iteration_table, read_config_file,
    robustness_ratios, run_case, run_study, StudyConfig, StudyKind, StudyRow,
};

/// Conservation residual above which a single run is reported as failed.
const CONSERVATION_LIMIT: f64 = 1e-8;

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_NOT_CONSERVATIVE: u8 = 3;

/// Interior over-penalized enriched Galerkin solver for the anisotropic
/// Poisson problem on the unit square.
#[derive(Parser, Debug)]
#[command(name = "iopeg", version)]
struct Args {
    /// convergence, precond, gamma-sweep, alpha-sweep or single
    #[arg(long)]
    study: Option<String>,
    /// Mesh sizes, comma separated and ascending
    #[arg(long)]
    n: Option<String>,
    /// Polynomial degrees (1, 2 or "1,2")
    #[arg(long)]
    k: Option<String>,
    /// Interior penalty exponent(s)
    #[arg(long)]
    alpha: Option<String>,
    /// Penalty parameter for interior and boundary facets
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "gamma-int")]
    gamma_int: Option<String>,
    #[arg(long = "gamma-bdy")]
    gamma_bdy: Option<String>,
    /// Anisotropy values, comma separated
    #[arg(long)]
    kappa0: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "max-iters")]
    max_iters: Option<String>,
    /// exact-block, jacobi or none
    #[arg(long)]
    precond: Option<String>,
    /// CSV output path
    #[arg(long)]
    out: Option<String>,
    /// key=value file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh dump path (single mode, first case)
    #[arg(long = "dump-mesh")]
    dump_mesh: Option<PathBuf>,
    /// MatrixMarket dump path (single mode, first case)
    #[arg(long = "dump-matrix")]
    dump_matrix: Option<PathBuf>,
}

impl Args {
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let flags = [
            ("study", &self.study),
            ("n", &self.n),
            ("k", &self.k),
            ("alpha", &self.alpha),
            ("gamma", &self.gamma),
            ("gamma-int", &self.gamma_int),
            ("gamma-bdy", &self.gamma_bdy),
            ("kappa0", &self.kappa0),
            ("tol", &self.tol),
            ("max-iters", &self.max_iters),
            ("precond", &self.precond),
            ("out", &self.out),
        ];
        flags
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    fn config(&self) -> iopeg_core::Result<StudyConfig> {
        let mut pairs = match &self.config {
            Some(path) => read_config_file(path)?,
            None => Vec::new(),
        };
        pairs.extend(self.flag_pairs());
        StudyConfig::from_pairs(&pairs)
    }
}

fn write_with<F>(path: &Path, f: F) -> std::result::Result<(), String>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn run_single(cfg: &StudyConfig, args: &Args) -> std::result::Result<(Vec<StudyRow>, u8), String> {
    let mut rows = Vec::new();
    for (i, p) in cfg.cases().map_err(|e| e.to_string())?.iter().enumerate() {
        let out = run_case(p).map_err(|e| e.to_string())?;
        if i == 0 {
            if let Some(path) = &args.dump_mesh {
                write_with(path, |w| out.mesh.write_dump(w))?;
            }
            if let Some(path) = &args.dump_matrix {
                write_with(path, |w| out.matrix.write_matrix_market(w))?;
            }
        }
        rows.push(StudyRow::from_case(p, &out));
    }
    fill_rates(&mut rows);
    let code = if rows.iter().any(|r| !r.converged) {
        EXIT_NOT_CONVERGED
    } else if rows
        .iter()
        .any(|r| !(r.cons_residual <= CONSERVATION_LIMIT))
    {
        EXIT_NOT_CONSERVATIVE
    } else {
        0
    };
    Ok((rows, code))
}

fn run(args: &Args) -> std::result::Result<u8, (u8, String)> {
    let usage = |e: String| (EXIT_USAGE, e);
    let cfg = args.config().map_err(|e| usage(e.to_string()))?;
    if cfg.study != StudyKind::Single && (args.dump_mesh.is_some() || args.dump_matrix.is_some()) {
        return Err(usage(
            "--dump-mesh and --dump-matrix require --study single".into(),
        ));
    }
    let (rows, code) = if cfg.study == StudyKind::Single {
        run_single(&cfg, args).map_err(|e| (EXIT_USAGE, e))?
    } else {
        (run_study(&cfg).map_err(|e| (EXIT_USAGE, e.to_string()))?, 0)
    };

    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", format_error_table(&rows));
    if matches!(
        cfg.study,
        StudyKind::Precond | StudyKind::GammaSweep | StudyKind::AlphaSweep
    ) {
        let _ = write!(stdout, "\n{}", format_iteration_table(&rows));
        let _ = writeln!(stdout, "\nmax/min iterations over n:");
        for (alpha, kappa0, k, ratio) in robustness_ratios(&rows) {
            let _ = writeln!(stdout, "  alpha={alpha} kappa0={kappa0} k={k}: {ratio:.2}");
        }
    }
    if let Some(path) = &cfg.out {
        emit_csv(&rows, path).map_err(|e| (EXIT_USAGE, e.to_string()))?;
    }
    if code == EXIT_NOT_CONVERGED {
        eprintln!("error: solver did not converge");
    } else if code == EXIT_NOT_CONSERVATIVE {
        eprintln!("error: conservation residual exceeds {CONSERVATION_LIMIT:e}");
    }
    Ok(code)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
