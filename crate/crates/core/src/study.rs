//! Experiment driver: the manufactured test problem, end-to-end solves,
//! parameter sweeps, and their CSV and table output.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::assembly::{assemble_matrix, assemble_rhs, ModelProblem, PenaltyParams};
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::postprocess::{error_norms, ErrorReport, ExactSolution, RTNFlux};
use crate::solver::{
    block_correction, build_block_preconditioner, factorize_spd, minres_singular, MinresOptions,
    PrecondMode, SolveReport,
};
use crate::spaces::{EGFunction, EGSpace};
use crate::sparse::SparseSymMatrix;

use std::f64::consts::PI;

/// `u = x(1-x) sin(pi y)` for `-div(kappa grad u) = f`, `u = 0` on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub kappa0: f64,
}

impl Manufactured {
    pub fn u(x: Point) -> f64 {
        x[0] * (1.0 - x[0]) * (PI * x[1]).sin()
    }

    pub fn grad(x: Point) -> [f64; 2] {
        [
            (1.0 - 2.0 * x[0]) * (PI * x[1]).sin(),
            PI * x[0] * (1.0 - x[0]) * (PI * x[1]).cos(),
        ]
    }

    pub fn f(&self, x: Point) -> f64 {
        (2.0 * self.kappa0 + PI * PI * x[0] * (1.0 - x[0])) * (PI * x[1]).sin()
    }

    pub fn problem(&self) -> Result<ModelProblem> {
        let m = *self;
        ModelProblem::new(self.kappa0, move |x| m.f(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Convergence,
    Precond,
    GammaSweep,
    AlphaSweep,
    Single,
}

impl StudyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyKind::Convergence => "convergence",
            StudyKind::Precond => "precond",
            StudyKind::GammaSweep => "gamma-sweep",
            StudyKind::AlphaSweep => "alpha-sweep",
            StudyKind::Single => "single",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convergence" => StudyKind::Convergence,
            "precond" => StudyKind::Precond,
            "gamma-sweep" => StudyKind::GammaSweep,
            "alpha-sweep" => StudyKind::AlphaSweep,
            "single" => StudyKind::Single,
            other => return Err(Error::Parse(format!("unknown study '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    /// Exponents swept; a single entry except for the alpha sweep.
    pub alpha_list: Vec<f64>,
    pub gamma_int: f64,
    pub gamma_bdy: f64,
    pub kappa0_list: Vec<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub precond: PrecondMode,
    pub out: Option<std::path::PathBuf>,
}

pub const DEFAULT_ALPHA_SWEEP: [f64; 5] = [0.0, 0.5, 0.9, 1.0, 2.0];

impl StudyConfig {
    /// Defaults for each study, following the published experiment grid.
    pub fn defaults(study: StudyKind) -> Self {
        let base = Self {
            study,
            n_list: vec![4, 8, 16, 32, 64, 128],
            k_list: vec![1, 2],
            alpha_list: vec![PenaltyParams::DEFAULT_ALPHA],
            gamma_int: PenaltyParams::DEFAULT_GAMMA,
            gamma_bdy: PenaltyParams::DEFAULT_GAMMA,
            kappa0_list: vec![1.0, 10.0],
            tol: 1e-12,
            max_iters: 10_000,
            precond: PrecondMode::ExactBlock,
            out: None,
        };
        let iteration_grid = Self {
            n_list: vec![8, 16, 32, 64, 128],
            kappa0_list: vec![1.0, 2.0, 4.0, 8.0, 10.0],
            ..base.clone()
        };
        match study {
            StudyKind::Convergence => base,
            StudyKind::Precond => iteration_grid,
            StudyKind::GammaSweep => Self {
                alpha_list: vec![0.0],
                gamma_int: 200.0,
                gamma_bdy: 10.0,
                ..iteration_grid
            },
            StudyKind::AlphaSweep => Self {
                alpha_list: DEFAULT_ALPHA_SWEEP.to_vec(),
                ..iteration_grid
            },
            StudyKind::Single => Self {
                n_list: vec![16],
                k_list: vec![1],
                kappa0_list: vec![1.0],
                ..base
            },
        }
    }

    /// Builds a configuration from `key=value` pairs applied in order. The
    /// `study` key, if present anywhere, selects the defaults.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let study = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "study")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(StudyKind::Convergence);
        let mut cfg = Self::defaults(study);
        for (k, v) in pairs {
            cfg.apply(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one option from its textual form.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "study" => self.study = value.parse()?,
            "n" => self.n_list = parse_list(key, value)?,
            "k" => self.k_list = parse_list(key, value)?,
            "alpha" => self.alpha_list = parse_list(key, value)?,
            "gamma" => {
                let g = parse_one(key, value)?;
                self.gamma_int = g;
                self.gamma_bdy = g;
            }
            "gamma-int" | "gamma_int" => self.gamma_int = parse_one(key, value)?,
            "gamma-bdy" | "gamma_bdy" => self.gamma_bdy = parse_one(key, value)?,
            "kappa0" => self.kappa0_list = parse_list(key, value)?,
            "tol" => self.tol = parse_one(key, value)?,
            "max-iters" | "max_iters" => self.max_iters = parse_one(key, value)?,
            "precond" => self.precond = value.parse()?,
            "out" => self.out = Some(value.into()),
            other => return Err(Error::Parse(format!("unknown option '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n list must be nonempty and positive".into());
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!(
                "n list must be strictly ascending: {:?}",
                self.n_list
            ));
        }
        if self.k_list.is_empty() || self.k_list.iter().any(|k| *k != 1 && *k != 2) {
            return bad(format!("k must be 1 or 2: {:?}", self.k_list));
        }
        if self.alpha_list.is_empty() || self.alpha_list.iter().any(|a| !(*a >= 0.0)) {
            return bad(format!("alpha must be nonnegative: {:?}", self.alpha_list));
        }
        if self.kappa0_list.is_empty() || self.kappa0_list.iter().any(|k| !(*k > 0.0)) {
            return bad(format!("kappa0 must be positive: {:?}", self.kappa0_list));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("max-iters must be positive".into());
        }
        PenaltyParams::split(self.gamma_int, self.gamma_bdy, 0.0)?;
        Ok(())
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid value '{value}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

/// One solved case of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub kappa0: f64,
    pub k: usize,
    pub n: usize,
    pub h_max: f64,
    pub l2_error: f64,
    pub l2_rate: Option<f64>,
    pub ah_error: f64,
    pub ah_rate: Option<f64>,
    pub flux_error: f64,
    pub flux_rate: Option<f64>,
    pub cons_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub alpha: f64,
    pub gamma_int: f64,
    pub gamma_bdy: f64,
}

/// Everything produced by one end-to-end solve.
#[derive(Debug, Clone)]
pub struct CaseOutput {
    pub mesh: TriMesh,
    pub space: EGSpace,
    pub matrix: SparseSymMatrix,
    pub rhs: Vec<f64>,
    pub solution: EGFunction,
    pub solve: SolveReport,
    /// Norm of the post-solve update of the cell constants.
    pub constant_correction: f64,
    pub errors: ErrorReport,
    pub flux: RTNFlux,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseParams {
    pub n: usize,
    pub k: usize,
    pub kappa0: f64,
    pub penalty: PenaltyParams,
    pub tol: f64,
    pub max_iters: usize,
    pub precond: PrecondMode,
}

/// Result of [`solve_system`].
#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub solution: EGFunction,
    pub report: SolveReport,
    /// Norm of the post-solve update of the cell constants.
    pub constant_correction: f64,
}

/// Solves an assembled system with block-preconditioned MinRes, then fixes
/// the kernel component by centering the cell constants and, if converged,
/// solves the constant-block equations exactly for the constants.
pub fn solve_system(
    mesh: &TriMesh,
    space: &EGSpace,
    matrix: &SparseSymMatrix,
    rhs: &[f64],
    mode: PrecondMode,
    opts: &MinresOptions,
) -> Result<SystemSolution> {
    let nc = space.n_cont();
    let m_c = matrix.principal_block(0..nc);
    let m_0 = matrix.principal_block(nc..matrix.dim());
    let precond = build_block_preconditioner(&m_c, &m_0, mode)?;
    let (x, report) = minres_singular(matrix, rhs, &space.kernel_vector(), &precond, opts)?;
    let mut solution = EGFunction::new(space, x)?;
    solution.center_constants(mesh);
    // The stopping norm weights the constant rows by M_0^{-1}, so they are
    // the least resolved; they are exactly the cell balance equations.
    let constant_correction = if report.converged {
        block_correction(
            matrix,
            rhs,
            &mut solution.coeffs,
            nc..matrix.dim(),
            &factorize_spd(&m_0)?,
        )?
    } else {
        0.0
    };
    Ok(SystemSolution {
        solution,
        report,
        constant_correction,
    })
}

/// Mesh, assemble, solve, recover the flux, and measure errors for the
/// manufactured problem.
pub fn run_case(p: &CaseParams) -> Result<CaseOutput> {
    let mesh = TriMesh::structured(p.n)?;
    let space = EGSpace::new(&mesh, p.k)?;
    let problem = Manufactured { kappa0: p.kappa0 }.problem()?;
    let matrix = assemble_matrix(&mesh, &space, &problem, &p.penalty)?;
    let rhs = assemble_rhs(&mesh, &space, &problem, &p.penalty)?;
    let opts = MinresOptions {
        tol: p.tol,
        max_iters: p.max_iters,
        ..Default::default()
    };
    let system = solve_system(&mesh, &space, &matrix, &rhs, p.precond, &opts)?;
    let (solution, solve, constant_correction) =
        (system.solution, system.report, system.constant_correction);
    let exact = ExactSolution {
        u: &Manufactured::u,
        grad: &Manufactured::grad,
    };
    let (errors, flux) = error_norms(&solution, &space, &mesh, &problem, &p.penalty, &exact)?;
    Ok(CaseOutput {
        mesh,
        space,
        matrix,
        rhs,
        solution,
        solve,
        constant_correction,
        errors,
        flux,
    })
}

impl StudyRow {
    /// Row for one solved case; rates are left empty.
    pub fn from_case(p: &CaseParams, out: &CaseOutput) -> Self {
        StudyRow {
            kappa0: p.kappa0,
            k: p.k,
            n: p.n,
            h_max: out.mesh.h_max(),
            l2_error: out.errors.l2_error,
            l2_rate: None,
            ah_error: out.errors.ah_error,
            ah_rate: None,
            flux_error: out.errors.flux_error,
            flux_rate: None,
            cons_residual: out.errors.conservation_residual,
            iterations: out.solve.iterations,
            converged: out.solve.converged,
            alpha: p.penalty.alpha,
            gamma_int: p.penalty.gamma_interior,
            gamma_bdy: p.penalty.gamma_boundary,
        }
    }
}

impl StudyConfig {
    /// Every `(alpha, kappa0, k, n)` combination in that loop order.
    pub fn cases(&self) -> Result<Vec<CaseParams>> {
        self.validate()?;
        let mut cases = Vec::new();
        for &alpha in &self.alpha_list {
            let penalty = PenaltyParams::split(self.gamma_int, self.gamma_bdy, alpha)?;
            for &kappa0 in &self.kappa0_list {
                for &k in &self.k_list {
                    for &n in &self.n_list {
                        cases.push(CaseParams {
                            n,
                            k,
                            kappa0,
                            penalty,
                            tol: self.tol,
                            max_iters: self.max_iters,
                            precond: self.precond,
                        });
                    }
                }
            }
        }
        Ok(cases)
    }
}

/// Runs every case of `cfg` and fills in the rates.
pub fn run_sweep(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for p in cfg.cases()? {
        rows.push(StudyRow::from_case(&p, &run_case(&p)?));
    }
    fill_rates(&mut rows);
    Ok(rows)
}

pub fn run_convergence_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    run_sweep(cfg)
}

pub fn run_precond_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    run_sweep(cfg)
}

/// Interior penalty over-weighted relative to the boundary one.
pub fn run_gamma_sweep(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    run_sweep(cfg)
}

pub fn run_alpha_sweep(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    run_sweep(cfg)
}

pub fn run_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    match cfg.study {
        StudyKind::Convergence | StudyKind::Single => run_convergence_study(cfg),
        StudyKind::Precond => run_precond_study(cfg),
        StudyKind::GammaSweep => run_gamma_sweep(cfg),
        StudyKind::AlphaSweep => run_alpha_sweep(cfg),
    }
}

/// `log(e_prev / e) / log(n / n_prev)` between consecutive rows of the same
/// `(alpha, gamma, kappa0, k)` group.
pub fn fill_rates(rows: &mut [StudyRow]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        let same = prev.kappa0 == cur.kappa0
            && prev.k == cur.k
            && prev.alpha == cur.alpha
            && prev.gamma_int == cur.gamma_int
            && prev.gamma_bdy == cur.gamma_bdy
            && prev.n < cur.n;
        if !same {
            continue;
        }
        let scale = (cur.n as f64 / prev.n as f64).ln();
        let rate = |a: f64, b: f64| (a / b).ln() / scale;
        let (l2, ah, fl) = (
            rate(prev.l2_error, cur.l2_error),
            rate(prev.ah_error, cur.ah_error),
            rate(prev.flux_error, cur.flux_error),
        );
        let cur = &mut rows[i];
        cur.l2_rate = Some(l2);
        cur.ah_rate = Some(ah);
        cur.flux_rate = Some(fl);
    }
}

/// Largest over smallest iteration count within each `(alpha, kappa0, k)` group.
pub fn robustness_ratios(rows: &[StudyRow]) -> Vec<(f64, f64, usize, f64)> {
    let mut groups: BTreeMap<(u64, u64, usize), (usize, usize)> = BTreeMap::new();
    for r in rows {
        let e = groups
            .entry((r.alpha.to_bits(), r.kappa0.to_bits(), r.k))
            .or_insert((usize::MAX, 0));
        e.0 = e.0.min(r.iterations);
        e.1 = e.1.max(r.iterations);
    }
    groups
        .into_iter()
        .map(|((a, kp, k), (lo, hi))| {
            (
                f64::from_bits(a),
                f64::from_bits(kp),
                k,
                hi as f64 / lo.max(1) as f64,
            )
        })
        .collect()
}

pub const CSV_HEADER: [&str; 16] = [
    "kappa0",
    "k",
    "n",
    "h_max",
    "l2_error",
    "l2_rate",
    "ah_error",
    "ah_rate",
    "flux_error",
    "flux_rate",
    "cons_residual",
    "iterations",
    "converged",
    "alpha",
    "gamma_int",
    "gamma_bdy",
];

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Writes the header and one record per row. Floats use 17 significant
/// digits so parsing recovers them exactly.
pub fn write_csv<W: Write>(rows: &[StudyRow], w: W) -> std::result::Result<(), csv::Error> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.write_record([
            fmt_float(r.kappa0),
            r.k.to_string(),
            r.n.to_string(),
            fmt_float(r.h_max),
            fmt_float(r.l2_error),
            fmt_rate(r.l2_rate),
            fmt_float(r.ah_error),
            fmt_rate(r.ah_rate),
            fmt_float(r.flux_error),
            fmt_rate(r.flux_rate),
            fmt_float(r.cons_residual),
            r.iterations.to_string(),
            r.converged.to_string(),
            fmt_float(r.alpha),
            fmt_float(r.gamma_int),
            fmt_float(r.gamma_bdy),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[StudyRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(rows, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<StudyRow>> {
    let mut rd = csv::ReaderBuilder::new().from_reader(r);
    let headers = rd
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header: {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let f = |i: usize| -> Result<f64> { parse_one(CSV_HEADER[i], &rec[i]) };
        let u = |i: usize| -> Result<usize> { parse_one(CSV_HEADER[i], &rec[i]) };
        let rate = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        rows.push(StudyRow {
            kappa0: f(0)?,
            k: u(1)?,
            n: u(2)?,
            h_max: f(3)?,
            l2_error: f(4)?,
            l2_rate: rate(5)?,
            ah_error: f(6)?,
            ah_rate: rate(7)?,
            flux_error: f(8)?,
            flux_rate: rate(9)?,
            cons_residual: f(10)?,
            iterations: u(11)?,
            converged: parse_one(CSV_HEADER[12], &rec[12])?,
            alpha: f(13)?,
            gamma_int: f(14)?,
            gamma_bdy: f(15)?,
        });
    }
    Ok(rows)
}

pub fn parse_csv(path: &Path) -> Result<Vec<StudyRow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

fn rate_cell(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.2}"),
        None => "--".into(),
    }
}

/// Error table in the layout of the published convergence tables.
pub fn format_error_table(rows: &[StudyRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>5} {:>2} {:>7} | {:>11} {:>5} | {:>11} {:>5} | {:>11} {:>5} | {:>11} | {:>5} {:>4}",
        "alpha", "kap0", "k", "h", "L2 error", "rate", "ah error", "rate", "flux error", "rate", "cons", "iters", "conv"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6} {:>5} {:>2} {:>7} | {:>11.4e} {:>5} | {:>11.4e} {:>5} | {:>11.4e} {:>5} | {:>11.4e} | {:>5} {:>4}",
            r.alpha,
            r.kappa0,
            r.k,
            format!("1/{}", r.n),
            r.l2_error,
            rate_cell(r.l2_rate),
            r.ah_error,
            rate_cell(r.ah_rate),
            r.flux_error,
            rate_cell(r.flux_rate),
            r.cons_residual,
            r.iterations,
            if r.converged { "yes" } else { "NO" }
        );
    }
    s
}

/// Iteration counts with one line per `(alpha, k, kappa0)` and one column per `n`.
pub fn format_iteration_table(rows: &[StudyRow]) -> String {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut lines: BTreeMap<(u64, usize, u64), BTreeMap<usize, String>> = BTreeMap::new();
    for r in rows {
        let cell = if r.converged {
            r.iterations.to_string()
        } else {
            format!("{}*", r.iterations)
        };
        lines
            .entry((r.alpha.to_bits(), r.k, r.kappa0.to_bits()))
            .or_default()
            .insert(r.n, cell);
    }
    let mut s = String::new();
    let _ = write!(s, "{:>6} {:>2} {:>6}", "alpha", "k", "kappa0");
    for n in &ns {
        let _ = write!(s, " {:>6}", n);
    }
    s.push('\n');
    for ((a, k, kp), cells) in &lines {
        let _ = write!(
            s,
            "{:>6} {:>2} {:>6}",
            f64::from_bits(*a),
            k,
            f64::from_bits(*kp)
        );
        for n in &ns {
            let _ = write!(s, " {:>6}", cells.get(n).map(String::as_str).unwrap_or("-"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<StudyRow> {
        let mut rows = vec![
            StudyRow {
                kappa0: 1.0,
                k: 1,
                n: 4,
                h_max: 2f64.sqrt() / 4.0,
                l2_error: 1.7308e-2,
                l2_rate: None,
                ah_error: 0.23161,
                ah_rate: None,
                flux_error: 0.18076,
                flux_rate: None,
                cons_residual: 1.1e-16,
                iterations: 14,
                converged: true,
                alpha: 1.0,
                gamma_int: 10.0,
                gamma_bdy: 10.0,
            },
            StudyRow {
                n: 8,
                h_max: 2f64.sqrt() / 8.0,
                l2_error: 5.1275e-3,
                ah_error: 0.11741,
                flux_error: 0.0824,
                converged: false,
                ..sample_first()
            },
        ];
        fill_rates(&mut rows);
        rows
    }

    fn sample_first() -> StudyRow {
        StudyRow {
            kappa0: 1.0,
            k: 1,
            n: 4,
            h_max: 0.1,
            l2_error: 1.0,
            l2_rate: None,
            ah_error: 1.0,
            ah_rate: None,
            flux_error: 1.0,
            flux_rate: None,
            cons_residual: 0.0,
            iterations: 14,
            converged: true,
            alpha: 1.0,
            gamma_int: 10.0,
            gamma_bdy: 10.0,
        }
    }

    #[test]
    fn manufactured_source_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for kappa0 in [1.0, 10.0] {
            let m = Manufactured { kappa0 };
            for _ in 0..20 {
                let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
                let h = 1e-4;
                let u = Manufactured::u;
                let uxx = (u([x[0] + h, x[1]]) - 2.0 * u(x) + u([x[0] - h, x[1]])) / (h * h);
                let uyy = (u([x[0], x[1] + h]) - 2.0 * u(x) + u([x[0], x[1] - h])) / (h * h);
                assert!((m.f(x) + kappa0 * uxx + uyy).abs() < 1e-5 * m.f(x).abs().max(1.0));
                let g = Manufactured::grad(x);
                let gx = (u([x[0] + h, x[1]]) - u([x[0] - h, x[1]])) / (2.0 * h);
                let gy = (u([x[0], x[1] + h]) - u([x[0], x[1] - h])) / (2.0 * h);
                assert!((g[0] - gx).abs() < 1e-7 && (g[1] - gy).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rates_and_first_row() {
        let rows = sample_rows();
        assert_eq!(rows[0].l2_rate, None);
        assert!((rows[1].l2_rate.unwrap() - (1.7308e-2f64 / 5.1275e-3).log2()).abs() < 1e-14);
        let table = format_error_table(&rows);
        assert!(table.contains("1.76"));
        assert!(table.contains("--"));
        assert!(table.contains("NO"));
    }

    #[test]
    fn rate_formatting() {
        assert_eq!(rate_cell(Some(1.9932)), "1.99");
    }

    #[test]
    fn csv_round_trip() {
        let rows = sample_rows();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
        let mut again = Vec::new();
        write_csv(&rows, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, format!("{}\n", CSV_HEADER.join(",")));
        assert!(read_csv(s.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn config_parsing_and_overrides() {
        let text = "# sweep\nstudy = precond\nn = 8, 16 ,32\nkappa0=1,10 # two\ngamma=20\n";
        let mut pairs = parse_config_text(text).unwrap();
        pairs.push(("gamma-int".into(), "200".into()));
        let cfg = StudyConfig::from_pairs(&pairs).unwrap();
        assert_eq!(cfg.study, StudyKind::Precond);
        assert_eq!(cfg.n_list, vec![8, 16, 32]);
        assert_eq!(cfg.kappa0_list, vec![1.0, 10.0]);
        assert_eq!((cfg.gamma_int, cfg.gamma_bdy), (200.0, 20.0));
        assert!(parse_config_text("novalue").is_err());
        assert!(StudyConfig::from_pairs(&[("k".into(), "3".into())]).is_err());
        assert!(StudyConfig::from_pairs(&[("n".into(), "8,4".into())]).is_err());
        assert!(StudyConfig::from_pairs(&[("tol".into(), "2".into())]).is_err());
        assert!(StudyConfig::from_pairs(&[("bogus".into(), "1".into())]).is_err());
    }

    #[test]
    fn study_defaults() {
        let g = StudyConfig::defaults(StudyKind::GammaSweep);
        assert_eq!(
            (g.alpha_list[0], g.gamma_int, g.gamma_bdy),
            (0.0, 200.0, 10.0)
        );
        let a = StudyConfig::defaults(StudyKind::AlphaSweep);
        assert_eq!(a.alpha_list, DEFAULT_ALPHA_SWEEP.to_vec());
        let c = StudyConfig::defaults(StudyKind::Convergence);
        assert_eq!(c.n_list, vec![4, 8, 16, 32, 64, 128]);
    }

    #[test]
    fn small_single_run() {
        let cfg = StudyConfig {
            n_list: vec![4],
            ..StudyConfig::defaults(StudyKind::Single)
        };
        let rows = run_study(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].converged);
        assert!(rows[0].l2_rate.is_none());
        assert!(rows[0].cons_residual < 1e-10);
    }

    #[test]
    fn iteration_table_layout() {
        let rows = sample_rows();
        let t = format_iteration_table(&rows);
        assert!(t.lines().next().unwrap().ends_with("     4      8"));
        assert!(t.contains("14*"));
        let ratios = robustness_ratios(&rows);
        assert_eq!(ratios.len(), 1);
        assert_eq!(ratios[0].3, 1.0);
    }
}
