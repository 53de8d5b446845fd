//! Command-line front end: run configuration, CSV emission, the on-disk
//! spectrum cache, and the `sweep`/`fig1`/`fig2`/`resonance`/`verify`/
//! `converge` subcommands.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 partial results with
//! flagged rows, 64 configuration error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::fockspin::{self, FockSpinBasis, Spin};
use crate::grid1d::{self, GridEigenproblem};
use crate::model::{DimensionlessCoupling, ModelParams};
use crate::resonance;
use crate::rotation;
use crate::{quadrature, Error, Result};

/// Everything a run needs, parsed from a flat `key = value` file. Unknown or
/// duplicate keys are errors; serialization round-trips losslessly.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub delta_e: f64,
    pub hbar_omega0: f64,
    pub coupling_u: f64,
    pub n_mean: usize,
    pub n_max: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub g_steps: usize,
    pub k_list: Vec<usize>,
    pub tol_quadrature: f64,
    pub tol_eigensolve: f64,
    pub tol_rootfind: f64,
    pub output_dir: PathBuf,
    pub cache: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            delta_e: 11.0,
            hbar_omega0: 1.0,
            coupling_u: 0.0,
            n_mean: 60,
            n_max: 200,
            g_min: 0.0,
            g_max: 1.0,
            g_steps: 21,
            k_list: vec![6, 7, 8, 9, 10],
            tol_quadrature: 1e-10,
            tol_eigensolve: 1e-8,
            tol_rootfind: 1e-8,
            output_dir: PathBuf::from("out"),
            cache: true,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Config(format!(
            "line {line}: invalid value `{value}` for key `{key}`"
        ))
    })
}

fn parse_k_list(value: &str, line: usize) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| parse_num("k_list", s.trim(), line))
        .collect()
}

impl RunConfig {
    /// Parse the flat `key = value` format. Blank lines and `#` comments are
    /// skipped; every other line must be `key = value` with a known key, and
    /// no key may repeat.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {line}: expected `key = value`, got `{trimmed}`"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {line}: duplicate key `{key}`")));
            }
            match key {
                "delta_e" => cfg.delta_e = parse_num(key, value, line)?,
                "hbar_omega0" => cfg.hbar_omega0 = parse_num(key, value, line)?,
                "coupling_u" => cfg.coupling_u = parse_num(key, value, line)?,
                "n_mean" => cfg.n_mean = parse_num(key, value, line)?,
                "n_max" => cfg.n_max = parse_num(key, value, line)?,
                "g_min" => cfg.g_min = parse_num(key, value, line)?,
                "g_max" => cfg.g_max = parse_num(key, value, line)?,
                "g_steps" => cfg.g_steps = parse_num(key, value, line)?,
                "k_list" => cfg.k_list = parse_k_list(value, line)?,
                "tol_quadrature" => cfg.tol_quadrature = parse_num(key, value, line)?,
                "tol_eigensolve" => cfg.tol_eigensolve = parse_num(key, value, line)?,
                "tol_rootfind" => cfg.tol_rootfind = parse_num(key, value, line)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "cache" => {
                    cfg.cache = match value {
                        "on" => true,
                        "off" => false,
                        other => {
                            return Err(Error::Config(format!(
                                "line {line}: cache must be `on` or `off`, got `{other}`"
                            )))
                        }
                    }
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: unknown config key `{other}`"
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(serialize(c)) == c` for any valid config
    /// (floats print in shortest round-trip form).
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "delta_e = {}", self.delta_e);
        let _ = writeln!(s, "hbar_omega0 = {}", self.hbar_omega0);
        let _ = writeln!(s, "coupling_u = {}", self.coupling_u);
        let _ = writeln!(s, "n_mean = {}", self.n_mean);
        let _ = writeln!(s, "n_max = {}", self.n_max);
        let _ = writeln!(s, "g_min = {}", self.g_min);
        let _ = writeln!(s, "g_max = {}", self.g_max);
        let _ = writeln!(s, "g_steps = {}", self.g_steps);
        let k: Vec<String> = self.k_list.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "k_list = {}", k.join(","));
        let _ = writeln!(s, "tol_quadrature = {}", self.tol_quadrature);
        let _ = writeln!(s, "tol_eigensolve = {}", self.tol_eigensolve);
        let _ = writeln!(s, "tol_rootfind = {}", self.tol_rootfind);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "cache = {}", if self.cache { "on" } else { "off" });
        s
    }

    /// Invariants: `g_min < g_max`, `g_steps >= 2`, all tolerances positive,
    /// and the model parameters themselves valid.
    pub fn validate(&self) -> Result<()> {
        if !self.g_min.is_finite() || !self.g_max.is_finite() || self.g_min >= self.g_max {
            return Err(Error::Config(format!(
                "g_min ({}) must be < g_max ({})",
                self.g_min, self.g_max
            )));
        }
        if self.g_min < 0.0 {
            return Err(Error::Config(format!("g_min must be >= 0, got {}", self.g_min)));
        }
        if self.g_steps < 2 {
            return Err(Error::Config(format!(
                "g_steps must be >= 2, got {}",
                self.g_steps
            )));
        }
        for (name, tol) in [
            ("tol_quadrature", self.tol_quadrature),
            ("tol_eigensolve", self.tol_eigensolve),
            ("tol_rootfind", self.tol_rootfind),
        ] {
            if tol <= 0.0 || !tol.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {tol}")));
            }
        }
        if self.n_mean < 1 {
            return Err(Error::Config("n_mean must be >= 1".into()));
        }
        self.params().map(|_| ())
    }

    /// Model parameters at the configured coupling.
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.delta_e,
            self.hbar_omega0,
            self.coupling_u,
            self.n_mean as f64,
        )
    }

    /// Model parameters at dimensionless coupling `g` instead of the
    /// configured `coupling_u`.
    pub fn params_at_g(&self, g: f64) -> Result<ModelParams> {
        self.params()?.at_g(DimensionlessCoupling::new(g))
    }

    /// The sweep's evenly spaced g grid.
    pub fn g_grid(&self) -> Vec<f64> {
        let n = self.g_steps;
        (0..n)
            .map(|i| self.g_min + (self.g_max - self.g_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

// --- CSV -----------------------------------------------------------------------

/// Floats in CSV bodies: 17 significant digits, enough to round-trip f64.
fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comment preamble shared by every CSV: tool version, then the full
/// effective config, one `# config:` line per key.
fn csv_preamble(cfg: &RunConfig, header: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# version: spinboson {}", env!("CARGO_PKG_VERSION"));
    for line in cfg.serialize().lines() {
        let _ = writeln!(s, "# config: {line}");
    }
    let _ = writeln!(s, "{header}");
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

// --- spectrum cache ------------------------------------------------------------

/// Cache key: content hash of everything the eigenvalue list depends on.
/// (The spectrum depends on the coupling only through `coupling_u`, not on
/// the reference occupation used to define g.)
fn cache_key(params: &ModelParams, n_max: usize) -> String {
    let mut h = Sha256::new();
    h.update(b"spinboson-eigenvalues-v1");
    for x in [params.delta_e(), params.hbar_omega0(), params.coupling_u()] {
        h.update(x.to_le_bytes());
    }
    h.update((n_max as u64).to_le_bytes());
    let digest = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Eigenvalue cache: two binary dumps per key (one per parity block),
/// written via temp-file + atomic rename so concurrent readers never see a
/// partial file and concurrent writers of the same key are safe.
struct SpectrumCache {
    dir: Option<PathBuf>,
}

impl SpectrumCache {
    fn new(cfg: &RunConfig, out_dir: &Path) -> Result<Self> {
        let dir = if cfg.cache {
            let dir = out_dir.join("cache");
            fs::create_dir_all(&dir)?;
            Some(dir)
        } else {
            None
        };
        Ok(SpectrumCache { dir })
    }

    fn paths(&self, key: &str) -> Option<(PathBuf, PathBuf)> {
        let dir = self.dir.as_ref()?;
        Some((
            dir.join(format!("{key}-even.bin")),
            dir.join(format!("{key}-odd.bin")),
        ))
    }

    fn load(&self, key: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let (pe, po) = self.paths(key)?;
        let even = fockspin::read_eigenvalue_dump(&mut fs::File::open(pe).ok()?).ok()?;
        let odd = fockspin::read_eigenvalue_dump(&mut fs::File::open(po).ok()?).ok()?;
        Some((even, odd))
    }

    fn store(&self, key: &str, even: &[f64], odd: &[f64]) -> Result<()> {
        let Some((pe, po)) = self.paths(key) else {
            return Ok(());
        };
        for (path, values) in [(pe, even), (po, odd)] {
            if path.exists() {
                continue;
            }
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            let mut f = fs::File::create(&tmp)?;
            fockspin::write_eigenvalue_dump(&mut f, values)?;
            f.flush()?;
            drop(f);
            fs::rename(&tmp, &path)?;
        }
        Ok(())
    }
}

/// All eigenvalues of both parity blocks, each ascending.
fn parity_eigenvalues(params: &ModelParams, basis: FockSpinBasis) -> Result<(Vec<f64>, Vec<f64>)> {
    let even = fockspin::parity_block(params, basis, 1)?;
    let even = even.eigenvalues_lowest(even.dim())?;
    let odd = fockspin::parity_block(params, basis, -1)?;
    let odd = odd.eigenvalues_lowest(odd.dim())?;
    Ok((even, odd))
}

/// Merge the two parity-resolved lists into one ascending spectrum with
/// labels; exact ties resolve even-first so reconstruction from cached
/// dumps is byte-identical to a fresh computation.
fn merge_labeled(even: &[f64], odd: &[f64]) -> Vec<(f64, i8)> {
    let mut out = Vec::with_capacity(even.len() + odd.len());
    let (mut i, mut j) = (0, 0);
    while i < even.len() || j < odd.len() {
        let take_even = match (even.get(i), odd.get(j)) {
            (Some(e), Some(o)) => e <= o,
            (Some(_), None) => true,
            _ => false,
        };
        if take_even {
            out.push((even[i], 1));
            i += 1;
        } else {
            out.push((odd[j], -1));
            j += 1;
        }
    }
    out
}

// --- CLI surface -----------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "spinboson",
    version,
    about = "Spin-boson spectra, rotated-frame analysis, and multiphoton resonance splittings"
)]
pub struct Cli {
    /// Run configuration file (flat key = value); defaults apply if omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Also write grid eigenfunctions (y, u) as CSV where applicable.
    #[arg(long, global = true)]
    pub dump_wavefunctions: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalue sweep over the configured g grid (CSV: g,index,energy,parity).
    Sweep,
    /// Exact vs closed-form weak-coupling splittings per resonance.
    Fig1,
    /// Exact vs degenerate-perturbation-theory splittings per resonance.
    Fig2,
    /// Full per-resonance summary table (all three methods).
    Resonance,
    /// Self-checks; prints one `SUITE name: PASS/FAIL` line per suite.
    Verify,
    /// Basis-size convergence of the exact splittings.
    Converge,
}

/// Parse `std::env::args`, execute, and map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Execute a parsed invocation; returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        // Ignore the error if a global pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let out_dir = cfg.output_dir.clone();
    fs::create_dir_all(&out_dir)?;
    match cli.command {
        Command::Sweep => cmd_sweep(&cfg, &out_dir),
        Command::Fig1 => cmd_fig1(&cfg, &out_dir),
        Command::Fig2 => cmd_fig2(&cfg, &out_dir, cli.dump_wavefunctions),
        Command::Resonance => cmd_resonance(&cfg, &out_dir, cli.dump_wavefunctions),
        Command::Verify => cmd_verify(&cfg),
        Command::Converge => cmd_converge(&cfg, &out_dir),
    }
}

// --- sweep -----------------------------------------------------------------------

fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let basis = FockSpinBasis::new(cfg.n_max)?;
    let cache = SpectrumCache::new(cfg, out_dir)?;
    let gs = cfg.g_grid();
    let points: Vec<Result<(Vec<f64>, Vec<f64>)>> = gs
        .par_iter()
        .map(|&g| {
            let params = cfg.params_at_g(g)?;
            let key = cache_key(&params, cfg.n_max);
            if let Some(hit) = cache.load(&key) {
                return Ok(hit);
            }
            let (even, odd) = parity_eigenvalues(&params, basis)?;
            cache.store(&key, &even, &odd)?;
            Ok((even, odd))
        })
        .collect();

    let mut body = csv_preamble(cfg, "g,index,energy,parity");
    let mut flagged = 0usize;
    for (g, point) in gs.iter().zip(points) {
        let (even, odd) = point?;
        for (index, (energy, parity)) in merge_labeled(&even, &odd).into_iter().enumerate() {
            // A non-finite eigenvalue marks a failed solve for that row:
            // parity prints 0 and the run exits with code 2.
            let parity = if energy.is_finite() { parity } else { 0 };
            if parity == 0 {
                flagged += 1;
            }
            let _ = writeln!(body, "{},{index},{},{parity}", fnum(*g), fnum(energy));
        }
    }
    let path = out_dir.join("sweep.csv");
    write_file(&path, &body)?;
    println!("wrote {}", path.display());
    if flagged > 0 {
        eprintln!("warning: {flagged} flagged rows (parity column 0)");
        return Ok(2);
    }
    Ok(0)
}

// --- figure tables ---------------------------------------------------------------

fn cmd_fig1(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let params = cfg.params()?;
    let basis = FockSpinBasis::new(cfg.n_max)?;
    let mut body = csv_preamble(cfg, "two_k_plus_one,g0,gap_exact,gap_shirley");
    for &k in &cfg.k_list {
        let root = resonance::find_resonance(&params, k, resonance::ResonanceMethod::Wkb)?;
        let exact = resonance::exact_splitting(&params, basis, k)?;
        let shirley = resonance::shirley_splitting(&params, k, root.g0);
        let _ = writeln!(
            body,
            "{},{},{},{}",
            exact.two_k_plus_one,
            fnum(root.g0),
            fnum(exact.gap),
            fnum(shirley.gap)
        );
    }
    let path = out_dir.join("fig1.csv");
    write_file(&path, &body)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_fig2(cfg: &RunConfig, out_dir: &Path, dump: bool) -> Result<i32> {
    let params = cfg.params()?;
    let basis = FockSpinBasis::new(cfg.n_max)?;
    let mut body = csv_preamble(cfg, "two_k_plus_one,g0,gap_exact,gap_pt");
    for &k in &cfg.k_list {
        let root = resonance::find_resonance(&params, k, resonance::ResonanceMethod::Wkb)?;
        let exact = resonance::exact_splitting(&params, basis, k)?;
        let pt = resonance::degenerate_pt_splitting(&params, k)?;
        let _ = writeln!(
            body,
            "{},{},{},{}",
            exact.two_k_plus_one,
            fnum(root.g0),
            fnum(exact.gap),
            fnum(pt.gap)
        );
        if dump {
            dump_pair_wavefunctions(cfg, &params, out_dir, k)?;
        }
    }
    let path = out_dir.join("fig2.csv");
    write_file(&path, &body)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_resonance(cfg: &RunConfig, out_dir: &Path, dump: bool) -> Result<i32> {
    let params = cfg.params()?;
    let basis = FockSpinBasis::new(cfg.n_max)?;
    let header = "k,two_k_plus_one,g0,gap_exact,gap_shirley,gap_pt,n_mean,n_max,residual";
    let mut body = csv_preamble(cfg, header);
    for &k in &cfg.k_list {
        let s = resonance::resonance_summary(&params, basis, k)?;
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{},{}",
            s.k,
            s.two_k_plus_one,
            fnum(s.g0),
            fnum(s.exact.gap),
            fnum(s.shirley.gap),
            fnum(s.pt.gap),
            cfg.n_mean,
            cfg.n_max,
            fnum(s.pt.residual)
        );
        if dump {
            dump_pair_wavefunctions(cfg, &params, out_dir, k)?;
        }
    }
    let path = out_dir.join("resonance.csv");
    write_file(&path, &body)?;
    println!("wrote {}", path.display());
    Ok(0)
}

/// Write the fine-grid eigenfunctions of the resonant pair at the
/// pair-crossing coupling as two-column (y, u) CSVs.
fn dump_pair_wavefunctions(
    cfg: &RunConfig,
    params: &ModelParams,
    out_dir: &Path,
    k: usize,
) -> Result<()> {
    let q = 2 * k + 1;
    let n_low = resonance::band_center(params);
    let n_high = n_low + q;
    let (g0, _) = resonance::pair_crossing(params, n_low, q)?;
    let at = params.at_g(DimensionlessCoupling::new(g0))?;
    let (l, n0) = grid1d::standard_box(n_high);
    for (spin, level, tag) in [(Spin::Up, n_low, "up"), (Spin::Down, n_high, "down")] {
        let problem = GridEigenproblem::with_box(&at, spin, n_high, l, n0)?;
        let f = problem.eigenfunction(2, level)?;
        let mut body = csv_preamble(cfg, "y,u");
        for i in 0..f.len() {
            let _ = writeln!(body, "{},{}", fnum(f.y(i)), fnum(f.values()[i]));
        }
        let path = out_dir.join(format!("wavefunction-q{q}-{tag}.csv"));
        write_file(&path, &body)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// --- converge ----------------------------------------------------------------------

fn cmd_converge(cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    let params = cfg.params()?;
    let n_base = cfg.n_max;
    let n_check = cfg.n_max + cfg.n_max / 2;
    let basis_base = FockSpinBasis::new(n_base)?;
    let basis_check = FockSpinBasis::new(n_check)?;
    let header = "k,two_k_plus_one,n_max_base,gap_base,n_max_check,gap_check,rel_change";
    let mut body = csv_preamble(cfg, header);
    for &k in &cfg.k_list {
        let base = resonance::exact_splitting(&params, basis_base, k)?;
        let check = resonance::exact_splitting(&params, basis_check, k)?;
        let rel = (check.gap - base.gap).abs() / check.gap.abs().max(f64::MIN_POSITIVE);
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            k,
            2 * k + 1,
            n_base,
            fnum(base.gap),
            n_check,
            fnum(check.gap),
            fnum(rel)
        );
    }
    let path = out_dir.join("converge.csv");
    write_file(&path, &body)?;
    println!("wrote {}", path.display());
    Ok(0)
}

// --- verify ----------------------------------------------------------------------

struct SuiteReport {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn suite<F: FnOnce() -> Result<(bool, String)>>(name: &'static str, f: F) -> SuiteReport {
    match f() {
        Ok((pass, detail)) => SuiteReport { name, pass, detail },
        Err(e) => SuiteReport {
            name,
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// A coupling that exercises the machinery even when the configured
/// `coupling_u` is zero: the midpoint of the sweep window, or 0.5.
fn representative_g(cfg: &RunConfig) -> f64 {
    let mid = 0.5 * (cfg.g_min + cfg.g_max);
    if mid > 0.0 {
        mid
    } else {
        0.5
    }
}

fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let g_ver = representative_g(cfg);
    let n_ver = cfg.n_max.min(120);
    let reports = vec![
        suite("parameters", || verify_parameters(cfg)),
        suite("quadrature", || verify_quadrature(cfg)),
        suite("rotation", || verify_rotation(cfg, g_ver, n_ver)),
        suite("parity", || verify_parity(cfg, g_ver, n_ver)),
        suite("wkb-grid", || verify_wkb_grid(cfg, g_ver)),
        suite("rootfind", || verify_rootfind(cfg)),
        suite("truncation", || verify_truncation(cfg)),
        suite("grid-convergence", || verify_grid_convergence(cfg, g_ver)),
    ];
    let mut all_pass = true;
    for r in &reports {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        println!("SUITE {}: {verdict} ({})", r.name, r.detail);
        all_pass &= r.pass;
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn verify_parameters(cfg: &RunConfig) -> Result<(bool, String)> {
    let params = cfg.params()?;
    FockSpinBasis::new(cfg.n_max)?;
    let detail = match params.regime_warning() {
        Some(w) => format!("valid; note: {w}"),
        None => "valid; regime ok".to_string(),
    };
    Ok((true, detail))
}

/// Gauss-Legendre self-check on a closed form: two orders must agree with
/// the analytic value to `tol_quadrature` (relative).
fn verify_quadrature(cfg: &RunConfig) -> Result<(bool, String)> {
    let (a, b) = (-2.0, 3.0);
    let exact = 3.0f64.atan() + 2.0f64.atan();
    let mut worst = 0.0f64;
    for n in [40, 80] {
        let (nodes, weights) = quadrature::gauss_legendre(n)?;
        let q = quadrature::integrate(|x| 1.0 / (1.0 + x * x), a, b, &nodes, &weights);
        worst = worst.max((q - exact).abs() / exact.abs());
    }
    Ok((
        worst <= cfg.tol_quadrature,
        format!("max relative error {worst:.3e} vs tol {:.3e}", cfg.tol_quadrature),
    ))
}

/// Unitary orthogonality, additive decomposition of the rotated operator,
/// and spectrum preservation on the lower half of the spectrum.
fn verify_rotation(cfg: &RunConfig, g_ver: f64, n_ver: usize) -> Result<(bool, String)> {
    let params = cfg.params_at_g(g_ver)?;
    let basis = FockSpinBasis::new(n_ver)?;
    let calc = rotation::QuadratureCalculus::new(basis)?;
    let u = rotation::build_unitary(&params, &calc)?;
    let orth = rotation::orthogonality_residual(&u);

    let h = fockspin::build_hamiltonian(&params, basis);
    let rotated = rotation::rotate_hamiltonian(&h, &u)?;
    let h0 = rotation::build_h0(&params, &calc)?;
    let v = rotation::build_v(&params, &calc)?;
    let w = rotation::build_w(&params, &calc)?;
    let sum = h0.add(&v)?.add(&w)?;
    let diff = rotated.matrix() - sum.matrix();
    // Interior block: Fock levels below half the cutoff on both indices.
    let interior = basis.dim() / 2;
    let mut decomp = 0.0f64;
    for i in 0..interior {
        for j in 0..interior {
            decomp = decomp.max(diff[(i, j)].abs());
        }
    }
    let decomp_tol = 1e-6 * params.hbar_omega0();

    let spec_h = fockspin::diagonalize(&h)?;
    let spec_r = fockspin::diagonalize(&rotated)?;
    let mut drift = 0.0f64;
    let mut drift_tol = 0.0f64;
    for i in 0..basis.dim() / 2 {
        drift = drift.max((spec_h.eigenvalue(i) - spec_r.eigenvalue(i)).abs());
        drift_tol = drift_tol
            .max(cfg.tol_eigensolve * spec_h.eigenvalue(i).abs().max(params.hbar_omega0()));
    }

    let pass = orth <= rotation::ROTATION_ORTHOGONALITY_TOL
        && decomp <= decomp_tol
        && drift <= drift_tol;
    Ok((
        pass,
        format!(
            "orthogonality {orth:.3e}, interior decomposition {decomp:.3e} (tol {decomp_tol:.3e}), \
             lower-half spectrum drift {drift:.3e} (tol {drift_tol:.3e})"
        ),
    ))
}

/// Parity labels from the dense solve must reproduce the independently
/// computed parity-block spectra.
fn verify_parity(cfg: &RunConfig, g_ver: f64, n_ver: usize) -> Result<(bool, String)> {
    let params = cfg.params_at_g(g_ver)?;
    let basis = FockSpinBasis::new(n_ver)?;
    let h = fockspin::build_hamiltonian(&params, basis);
    let spec = fockspin::diagonalize(&h)?;
    let labels = spec
        .parity_labels()
        .ok_or_else(|| Error::Eigensolve("spectrum carries no parity labels".into()))?;
    let (even, odd) = parity_eigenvalues(&params, basis)?;
    let mut worst = 0.0f64;
    let mut gate = 0.0f64;
    for (wanted, block) in [(1i8, &even), (-1i8, &odd)] {
        let from_full: Vec<f64> = spec
            .eigenvalues()
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == wanted)
            .map(|(&e, _)| e)
            .collect();
        if from_full.len() != block.len() {
            return Ok((
                false,
                format!(
                    "parity {wanted}: dense solve found {} states, block solve {}",
                    from_full.len(),
                    block.len()
                ),
            ));
        }
        for (a, b) in from_full.iter().zip(block) {
            worst = worst.max((a - b).abs());
            gate = gate.max(cfg.tol_eigensolve * a.abs().max(params.hbar_omega0()));
        }
    }
    Ok((
        worst <= gate,
        format!("max |dense - block| {worst:.3e} (tol {gate:.3e})"),
    ))
}

/// WKB dressed transition vs the grid solver: 1% agreement at finite g and
/// exact reduction to the bare splitting at g = 0.
fn verify_wkb_grid(cfg: &RunConfig, g_ver: f64) -> Result<(bool, String)> {
    let params = cfg.params()?;
    let at_zero = grid1d::wkb_dressed_energy(&params, 0.0, cfg.n_mean as f64)?;
    let zero_err = (at_zero - params.delta_e()).abs() / params.delta_e();

    let mut gs = vec![g_ver.max(0.1)];
    if cfg.g_max > gs[0] * 1.5 {
        gs.push(cfg.g_max);
    }
    let mut worst = 0.0f64;
    for g in gs {
        let wkb = grid1d::wkb_dressed_energy(&params, g, cfg.n_mean as f64)?;
        let grid = grid1d::dressed_transition(&cfg.params_at_g(g)?, cfg.n_mean)?;
        worst = worst.max((wkb - grid.value).abs() / grid.value.abs());
    }
    let pass = zero_err <= 1e-10 && worst <= 0.01;
    Ok((
        pass,
        format!("g=0 relative error {zero_err:.3e}, max WKB-vs-grid relative difference {worst:.3e}"),
    ))
}

/// The resonance-condition root solve must leave a residual below
/// `tol_rootfind` of the target energy.
fn verify_rootfind(cfg: &RunConfig) -> Result<(bool, String)> {
    let params = cfg.params()?;
    // Smallest k whose (2k+1)-quantum energy reaches the bare splitting.
    let k_floor = ((params.delta_e() / params.hbar_omega0() - 1.0) / 2.0).ceil().max(0.0) as usize;
    let k = cfg.k_list.iter().copied().min().unwrap_or(k_floor).max(k_floor);
    let root = resonance::find_resonance(&params, k, resonance::ResonanceMethod::Wkb)?;
    let target = (2 * k + 1) as f64 * params.hbar_omega0();
    let gate = cfg.tol_rootfind * target;
    Ok((
        root.residual <= gate,
        format!(
            "k={k} root g0={:.6}, residual {:.3e} (tol {gate:.3e})",
            root.g0, root.residual
        ),
    ))
}

/// The requested resonances must fit inside the reliable part of the basis.
fn verify_truncation(cfg: &RunConfig) -> Result<(bool, String)> {
    let Some(&k_max) = cfg.k_list.iter().max() else {
        return Ok((true, "no resonances requested".to_string()));
    };
    let params = cfg.params()?;
    let n_high = resonance::band_center(&params) + 2 * k_max + 1;
    if (n_high as f64) > 0.9 * cfg.n_max as f64 {
        let needed = (n_high as f64 / 0.9).ceil() as usize;
        return Ok((
            false,
            format!(
                "resonance k={k_max} reaches Fock level {n_high} but only levels below \
                 0.9 * n_max = {} are reliable; raise n_max to at least {needed}",
                (0.9 * cfg.n_max as f64) as usize
            ),
        ));
    }
    Ok((
        true,
        format!("highest tracked level {n_high} within 0.9 * n_max = {}", (0.9 * cfg.n_max as f64) as usize),
    ))
}

/// Richardson error estimate of the grid eigenvalue at the working level.
fn verify_grid_convergence(cfg: &RunConfig, g_ver: f64) -> Result<(bool, String)> {
    let params = cfg.params_at_g(g_ver)?;
    let problem = GridEigenproblem::new(&params, Spin::Up, cfg.n_mean)?;
    let e = problem.energy(cfg.n_mean)?;
    let gate = 1e-6 * e.value.abs().max(1.0);
    Ok((
        e.error <= gate,
        format!(
            "level {} energy {:.6} with Richardson error {:.3e} (tol {gate:.3e})",
            cfg.n_mean, e.value, e.error
        ),
    ))
}
