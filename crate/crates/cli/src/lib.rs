//! Command implementations behind the `posbvp` binary. Each command returns
//! its process exit code; reports go to stdout or to files under `--out`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use posbvp::analysis::{self, AnalysisError, RPolicy, Verdict};
use posbvp::eigen;
use posbvp::greenop::{self, verification_grid};
use posbvp::problem::CoefficientSelector;
use posbvp::radial::{self, AnnulusProblem, DEFAULT_RADIAL_GRID};
use posbvp::solver::{self, MultiplicityReport, SolverSettings};
use posbvp::Problem;

pub mod csvio;

use csvio::{read_solution_csv, write_csv, SolutionTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Largest radial residual accepted for a lifted profile.
pub const RADIAL_TOL: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(
    name = "posbvp",
    version,
    about = "Positive solutions of indefinite Sturm-Liouville problems"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    #[arg(long, global = true)]
    pub tol_abs: Option<f64>,
    #[arg(long, global = true)]
    pub tol_rel: Option<f64>,
    #[arg(long, global = true)]
    pub scan_points: Option<usize>,
    #[arg(long, global = true)]
    pub scan_smax: Option<f64>,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl GlobalOpts {
    fn apply(&self, s: &mut SolverSettings) {
        if let Some(v) = self.tol_abs {
            s.tol_abs = v;
        }
        if let Some(v) = self.tol_rel {
            s.tol_rel = v;
        }
        if let Some(v) = self.scan_points {
            s.scan_points = v;
        }
        if let Some(v) = self.scan_smax {
            s.scan_smax = Some(v);
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the structural and eigenvalue hypotheses.
    Check {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the constant ledger ending in beta_star.
    Constants {
        config: PathBuf,
        /// `auto` or a positive number.
        #[arg(long = "R", default_value = "auto")]
        big_r: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Principal eigenvalues of the linearized problems.
    Eigen {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search, verify and classify positive solutions.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-solve for a list of coefficient values.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        coef: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce an annulus problem, solve it and lift the radial profiles.
    Radial {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RADIAL_GRID)]
        grid: usize,
    },
    /// Recompute the residuals of solution CSVs in a directory.
    Verify {
        config: PathBuf,
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Constants { .. } => "constants",
            Command::Eigen { .. } => "eigen",
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Radial { .. } => "radial",
            Command::Verify { .. } => "verify",
        }
    }
}

/// Error carrying an exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: e.into(),
        }
    }
}

fn fail(code: i32, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.global.threads {
        // a pool may already exist when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Check { config, out } => cmd_check(g, config, out.as_deref()),
        Command::Constants { config, big_r, out } => {
            cmd_constants(g, config, big_r, out.as_deref())
        }
        Command::Eigen { config, out } => cmd_eigen(g, config, out.as_deref()),
        Command::Solve { config, out } => cmd_solve(cli, config, out),
        Command::Sweep {
            config,
            coef,
            values,
            out,
        } => cmd_sweep(g, config, coef, values, out.as_deref()),
        Command::Radial { config, out, grid } => cmd_radial(cli, config, out, *grid),
        Command::Verify { config, dir, out } => cmd_verify(g, config, dir, out.as_deref()),
    }
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_problem(g: &GlobalOpts, path: &Path) -> std::result::Result<Problem, Failure> {
    let text = read_config(path)?;
    let mut p = Problem::load(&text).map_err(|e| {
        let msg = e.to_string();
        if msg.starts_with(e.code()) {
            anyhow!("{}: {msg}", path.display())
        } else {
            anyhow!("{}: {}: {msg}", path.display(), e.code())
        }
    })?;
    g.apply(p.settings_mut());
    Ok(p)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn analysis_failure(e: AnalysisError) -> Failure {
    fail(EXIT_FAILED, anyhow!(e))
}

pub fn cmd_check(g: &GlobalOpts, config: &Path, out: Option<&Path>) -> Outcome {
    let p = load_problem(g, config)?;
    let report = analysis::check_hypotheses(&p).map_err(analysis_failure)?;
    emit(&to_json(&report)?, out)?;
    Ok(match report.overall {
        Verdict::Fail => EXIT_FAILED,
        Verdict::Pass | Verdict::Warn => EXIT_OK,
    })
}

fn parse_r_policy(text: &str) -> Result<RPolicy> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(RPolicy::Auto);
    }
    let value: f64 = text
        .parse()
        .with_context(|| format!("--R expects `auto` or a number, got `{text}`"))?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(anyhow!("--R must be positive, got {value}"));
    }
    Ok(RPolicy::Fixed { value })
}

pub fn cmd_constants(g: &GlobalOpts, config: &Path, big_r: &str, out: Option<&Path>) -> Outcome {
    let policy = parse_r_policy(big_r)?;
    let p = load_problem(g, config)?;
    let ledger = analysis::proof_constants(&p, policy).map_err(analysis_failure)?;
    emit(&to_json(&ledger)?, out)?;
    Ok(EXIT_OK)
}

pub fn cmd_eigen(g: &GlobalOpts, config: &Path, out: Option<&Path>) -> Outcome {
    let p = load_problem(g, config)?;
    let eig = |e: eigen::EigenError| fail(EXIT_FAILED, anyhow!(e));
    let lambda0 = eigen::lambda0(&p).map_err(eig)?.lambda;
    let mut humps = Vec::new();
    for i in 1..=p.hump_count() {
        humps.push(json!({"i": i, "lambda1": eigen::lambda1(&p, i).map_err(eig)?.lambda}));
    }
    emit(&to_json(&json!({"lambda0": lambda0, "humps": humps}))?, out)?;
    Ok(EXIT_OK)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Run metadata kept apart from the deterministic report.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub settings: SolverSettings,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputFile>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

struct OutDir {
    dir: PathBuf,
    written: Vec<OutputFile>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn finish(
        mut self,
        cli: &Cli,
        config: &Path,
        settings: &SolverSettings,
        started_at: String,
    ) -> Result<()> {
        let config_bytes = fs::read(config)?;
        let manifest = RunManifest {
            command: cli.command.name().to_string(),
            config_path: config.display().to_string(),
            config_sha256: sha256_hex(&config_bytes),
            settings: settings.clone(),
            seed: cli.global.seed,
            threads: cli.global.threads,
            started_at,
            finished_at: now(),
            outputs: std::mem::take(&mut self.written),
        };
        let path = self.dir.join("manifest.json");
        fs::write(&path, to_json(&manifest)?)
            .with_context(|| format!("cannot write {}", path.display()))
    }
}

pub fn solution_file_name(index: usize) -> String {
    format!("solution_{index}.csv")
}

fn solution_table(sol: &solver::Solution) -> SolutionTable {
    let pts = sol.trajectory.sample(4);
    SolutionTable {
        x: pts.iter().map(|p| p.x).collect(),
        u: pts.iter().map(|p| p.u).collect(),
        du: pts.iter().map(|p| p.du).collect(),
    }
}

fn solve_json(rep: &MultiplicityReport, files: &[String]) -> Value {
    let mut v = serde_json::to_value(rep).expect("report serializes");
    if let Some(list) = v.get_mut("solutions").and_then(Value::as_array_mut) {
        for (entry, file) in list.iter_mut().zip(files) {
            entry["file"] = json!(file);
        }
    }
    v
}

pub fn cmd_solve(cli: &Cli, config: &Path, out: &Path) -> Outcome {
    let started = now();
    let p = load_problem(&cli.global, config)?;
    let rep = solver::solve(&p).map_err(|e| fail(EXIT_FAILED, anyhow!(e)))?;
    let mut dir = OutDir::create(out)?;
    let mut files = Vec::new();
    for (k, sol) in rep.solutions.iter().enumerate() {
        let name = solution_file_name(k);
        dir.write(
            &name,
            write_csv(&["x", "u", "uprime"], &solution_table(sol)).as_bytes(),
        )?;
        files.push(name);
    }
    let report = json!({
        "command": "solve",
        "warnings": p.warnings(),
        "report": solve_json(&rep, &files),
    });
    dir.write("report.json", to_json(&report)?.as_bytes())?;
    dir.finish(cli, config, p.settings(), started)?;
    Ok(if rep.complete { EXIT_OK } else { EXIT_PARTIAL })
}

fn format_subset(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(usize::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

pub fn cmd_sweep(
    g: &GlobalOpts,
    config: &Path,
    coef: &str,
    values: &[f64],
    out: Option<&Path>,
) -> Outcome {
    if values.is_empty() {
        return Err(anyhow!("--values needs at least one number").into());
    }
    let p = load_problem(g, config)?;
    let sel = CoefficientSelector::parse(coef, &p).map_err(|e| anyhow!(e))?;
    let rows = analysis::sweep(&p, sel, values);
    let mut text = String::from("value,count,covered_subsets\n");
    for row in &rows {
        let covered: Vec<String> = row.covered.iter().map(|s| format_subset(s)).collect();
        text.push_str(&format!(
            "{:.16e},{},\"{}\"\n",
            row.value,
            row.count,
            covered.join(";")
        ));
    }
    emit(&text, out)?;
    Ok(if rows.iter().all(|r| r.ok) {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

pub fn cmd_radial(cli: &Cli, config: &Path, out: &Path, grid: usize) -> Outcome {
    let started = now();
    let text = read_config(config)?;
    let mut ap = AnnulusProblem::load(&text).map_err(|e| anyhow!("{}: {}", config.display(), e))?;
    cli.global.apply(ap.settings_mut());
    let (reduced, _) = radial::reduce(&ap);
    let rep = radial::solve_annulus(&ap, grid).map_err(|e| fail(EXIT_FAILED, anyhow!(e)))?;
    let mut dir = OutDir::create(out)?;
    dir.write(
        "reduced.json",
        to_json(&reduced.to_config_json())?.as_bytes(),
    )?;
    let mut files = Vec::new();
    for prof in &rep.profiles {
        let name = format!("profile_{}.csv", prof.index);
        let table = SolutionTable {
            x: prof.profile.iter().map(|q| q.r).collect(),
            u: prof.profile.iter().map(|q| q.u).collect(),
            du: prof.profile.iter().map(|q| q.du).collect(),
        };
        dir.write(&name, write_csv(&["r", "u", "uprime"], &table).as_bytes())?;
        files.push(name);
    }
    let mut report = serde_json::to_value(&rep)?;
    if let Some(list) = report.get_mut("profiles").and_then(Value::as_array_mut) {
        for (entry, file) in list.iter_mut().zip(&files) {
            entry["file"] = json!(file);
        }
    }
    report["radial_tol"] = json!(RADIAL_TOL);
    dir.write("report.json", to_json(&report)?.as_bytes())?;
    dir.finish(cli, config, reduced.settings(), started)?;
    let residuals_ok = rep.profiles.iter().all(|q| q.residual < RADIAL_TOL);
    Ok(if rep.reduced.complete && residuals_ok {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

#[derive(Debug, Serialize)]
pub struct VerifyRow {
    pub file: String,
    pub status: &'static str,
    pub bc: Option<f64>,
    pub phi: Option<f64>,
    pub ode: Option<f64>,
    pub positivity: Option<f64>,
}

/// Piecewise cubic Hermite interpolant of a solution table. `u` uses the
/// tabulated slopes; `u′` uses `u″ = −f̃(x, u)` from the equation, taken on
/// the interval that owns each table step.
pub struct HermiteSolution<'a> {
    p: &'a Problem,
    t: &'a SolutionTable,
}

impl<'a> HermiteSolution<'a> {
    pub fn new(p: &'a Problem, t: &'a SolutionTable) -> Self {
        Self { p, t }
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        let xs = &self.t.x;
        let n = xs.len();
        let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (xs[k], xs[k + 1]);
        let h = x1 - x0;
        let s = ((x - x0) / h).clamp(0.0, 1.0);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s).powi(2);
        let h10 = s * (1.0 - s).powi(2);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (u0, u1) = (self.t.u[k], self.t.u[k + 1]);
        let (d0, d1) = (self.t.du[k], self.t.du[k + 1]);
        let piece = self
            .p
            .interval_at(0.5 * (x0 + x1))
            .expect("table lies inside [0, L]");
        let dd0 = -self.p.f_extended_in(piece, x0, u0);
        let dd1 = -self.p.f_extended_in(piece, x1, u1);
        let u = h00 * u0 + h10 * h * d0 + h01 * u1 + h11 * h * d1;
        let du = h00 * d0 + h10 * h * dd0 + h01 * d1 + h11 * h * dd1;
        (u, du)
    }
}

fn verify_table(p: &Problem, name: &str, t: &SolutionTable) -> VerifyRow {
    let s = p.settings();
    let sup = t.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if sup == 0.0 {
        return VerifyRow {
            file: name.to_string(),
            status: "TRIVIAL",
            bc: None,
            phi: None,
            ode: None,
            positivity: None,
        };
    }
    let h = HermiteSolution::new(p, t);
    let n = t.x.len();
    let bc_res = p.bc().right_residual(t.u[n - 1], t.du[n - 1]).abs();
    let phi = greenop::phi_residual_with(p, |x| h.eval(x).0, s.quad_tol).unwrap_or(f64::NAN);
    let grid = verification_grid(p);
    let ode = solver::ode_residual_with(p, |x| h.eval(x), &grid, s.quad_tol);
    let l = p.length();
    let positivity = grid[1..grid.len() - 1]
        .iter()
        .map(|&x| h.eval(x).0)
        .chain(
            t.x.iter()
                .zip(&t.u)
                .filter(|(x, _)| **x > 0.0 && **x < l)
                .map(|(_, u)| *u),
        )
        .fold(f64::INFINITY, f64::min);
    let pass = bc_res < s.bc_tol && phi < s.phi_tol && ode < s.ode_tol && positivity > 0.0;
    VerifyRow {
        file: name.to_string(),
        status: if pass { "PASS" } else { "FAIL" },
        bc: Some(bc_res),
        phi: Some(phi),
        ode: Some(ode),
        positivity: Some(positivity),
    }
}

pub fn cmd_verify(g: &GlobalOpts, config: &Path, dir: &Path, out: Option<&Path>) -> Outcome {
    let p = load_problem(g, config)?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|path| path.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(anyhow!("no CSV files in {}", dir.display()).into());
    }
    let l = p.length();
    let mut rows = Vec::new();
    for path in &files {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let table = read_solution_csv(path)?;
        let (first, last) = (table.x[0], table.x[table.x.len() - 1]);
        let span_tol = 1e-9 * l.max(1.0);
        if first.abs() > span_tol || (last - l).abs() > span_tol {
            return Err(anyhow!("{name}: rows span [{first}, {last}], expected [0, {l}]").into());
        }
        rows.push(verify_table(&p, &name, &table));
    }
    let all_pass = rows.iter().all(|r| r.status != "FAIL");
    let s = p.settings();
    let report = json!({
        "command": "verify",
        "tolerances": {"bc": s.bc_tol, "phi": s.phi_tol, "ode": s.ode_tol},
        "solutions": rows,
        "all_pass": all_pass,
    });
    emit(&to_json(&report)?, out)?;
    Ok(if all_pass { EXIT_OK } else { EXIT_FAILED })
}
