//! Command-line front end for the sweep and its supporting checks.
//!
//! Exit codes: 0 success, 1 failed invariant, 2 bad input, 3 I/O failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{path_loss_linear, sample_scenario, LinkClass};
use crate::linalg::{CMatrix, CVector};
use crate::metrics::LinkBudget;
use crate::optimizer::{
    alternating_optimize, brute_force_oracle, wirtinger_gradient, Objective, OptimizerSettings,
};
use crate::scattering::{
    elements_per_group, gaussian_blocks, hardware_complexity, nonzero_count, project_feasible, validate_blocks,
    Architecture, Mode, RisConfig, ScatteringMatrix,
};
use crate::scenario::{run_sweep, Aggregate, Scheme, SweepConfig, SweepRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Header of `records.csv`.
pub const RECORDS_HEADER: &str = "scheme,n,trial,seed,se_bits_per_hz,p_v_watts,converged,iterations";

#[derive(Debug, Parser)]
#[command(name = "bdris", version, about = "Beyond-diagonal RIS V2V underlay simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the element-count sweep and write records, aggregates, manifest and plot.
    Sweep {
        /// JSON sweep configuration or a manifest from an earlier run; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the number of trials per element count.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed.
        #[arg(long, env = "BDRIS_SEED")]
        seed: Option<u64>,
        /// Worker threads (all cores by default).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the invariant battery and print a pass/fail table.
    Validate {
        /// Smaller sample counts.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Print the per-mode structure and hardware cost of each architecture.
    Table1 {
        #[arg(long, value_delimiter = ',', default_values_t = vec![16, 32, 64])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 4, 8])]
        g: Vec<usize>,
        /// Sector count of the multi-sector column.
        #[arg(long, default_value_t = 3)]
        sectors: usize,
    },
    /// Print the fully materialized configuration.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Deliberate defects for exercising the failure path of `validate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Scale every projected matrix by 1.001.
    BrokenProjection,
}

/// Everything needed to reproduce the files of a sweep directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_path: Option<String>,
    pub base_seed: u64,
    pub created_utc: String,
    pub config: SweepConfig,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_BAD_INPUT, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }
}

/// Entry point of the binary.
pub fn main_entry() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Sweep { config, out: dir, trials, seed, threads } => {
            cmd_sweep(config.as_deref(), &dir, trials, seed, threads, out)
        }
        Command::Validate { quick, config, inject_fault } => cmd_validate(config.as_deref(), quick, inject_fault, out),
        Command::Table1 { n, g, sectors } => cmd_table1(&n, &g, sectors, out),
        Command::PrintConfig { config } => load_config(config.as_deref()).and_then(|cfg| {
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
            writeln!(out, "{text}").map_err(|e| CliError { code: EXIT_IO, message: e.to_string() })?;
            Ok(EXIT_OK)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Reads a sweep configuration, or the `config` member of a manifest.
/// Missing fields take their defaults; unknown fields are rejected.
pub fn parse_config(text: &str) -> Result<SweepConfig, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let is_manifest = value.get("tool_version").is_some() && value.get("config").is_some();
    let cfg = if is_manifest {
        serde_json::from_str::<RunManifest>(text).map_err(|e| e.to_string())?.config
    } else {
        serde_json::from_str::<SweepConfig>(text).map_err(|e| e.to_string())?
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn load_config(path: Option<&Path>) -> Result<SweepConfig, CliError> {
    let Some(path) = path else {
        return Ok(SweepConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(|m| CliError::input(format!("{}: {m}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn cmd_sweep(
    config: Option<&Path>,
    dir: &Path,
    trials: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut cfg = load_config(config)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if threads == Some(0) {
        return Err(CliError::input("--threads must be at least 1"));
    }
    cfg.validate().map_err(|e| CliError::input(e.to_string()))?;

    let result = run_sweep(&cfg, threads).map_err(|e| CliError { code: EXIT_INVARIANT, message: e.to_string() })?;

    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_path: config.map(|p| p.display().to_string()),
        base_seed: cfg.base_seed,
        created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: cfg,
    };
    write_file(&dir.join("records.csv"), &records_csv(&result.records))?;
    write_file(&dir.join("aggregates.csv"), &aggregates_csv(&result.aggregates))?;
    write_file(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))?;
    write_file(&dir.join("sweep.svg"), &render_svg(&result.aggregates))?;

    let _ = writeln!(out, "{} records written to {}", result.records.len(), dir.display());
    for a in &result.aggregates {
        let _ = writeln!(out, "{:<20} N={:<3} SE {:.4} ± {:.4}", a.scheme.label(), a.n, a.mean_se, a.std_error);
    }
    Ok(EXIT_OK)
}

pub fn records_csv(records: &[SweepRecord]) -> String {
    let mut s = String::from(RECORDS_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{},{},{},{}", r.scheme.label(), r.n, r.trial, r.seed, r.se, r.p_v_opt, r.converged, r.iterations);
    }
    s
}

pub fn aggregates_csv(aggregates: &[Aggregate]) -> String {
    let mut s = String::from("scheme,n,trials,mean_se_bits_per_hz,std_error,mean_p_v_watts,converged_fraction\n");
    for a in aggregates {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", a.scheme.label(), a.n, a.trials, a.mean_se, a.std_error, a.mean_p_v, a.converged_fraction);
    }
    s
}

/// Mean SE against N, one polyline per scheme with standard-error bars.
pub fn render_svg(aggregates: &[Aggregate]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 460.0;
    const L: f64 = 70.0;
    const R: f64 = 190.0;
    const T: f64 = 30.0;
    const B: f64 = 60.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (0.0_f64, f64::NEG_INFINITY);
    for a in aggregates {
        x0 = x0.min(a.n as f64);
        x1 = x1.max(a.n as f64);
        y0 = y0.min(a.mean_se - a.std_error);
        y1 = y1.max(a.mean_se + a.std_error);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 *= 1.05;
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{L}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - B, W - R, H - B);
    let _ = writeln!(s, r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{}" stroke="black"/>"#, H - B);
    for k in 0..=5 {
        let y = y0 + (y1 - y0) * k as f64 / 5.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{:.1}" x2="{L}" y2="{:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, L - 4.0, py(y), py(y), L - 6.0, py(y) + 4.0);
    }
    let mut ns: Vec<usize> = aggregates.iter().map(|a| a.n).collect();
    ns.sort_unstable();
    ns.dedup();
    for n in &ns {
        let x = px(*n as f64);
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/><text x="{x:.1}" y="{}" text-anchor="middle">{n}</text>"#, H - B, H - B + 4.0, H - B + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">Number of elements N</text>"#, (L + W - R) / 2.0, H - 15.0);
    let _ = writeln!(s, r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">Spectral efficiency (bits/s/Hz)</text>"#, (T + H - B) / 2.0, (T + H - B) / 2.0);

    let mut schemes: Vec<Scheme> = aggregates.iter().map(|a| a.scheme).collect();
    schemes.dedup();
    for (i, scheme) in schemes.iter().enumerate() {
        let color = colors[i % colors.len()];
        let pts: Vec<&Aggregate> = aggregates.iter().filter(|a| a.scheme == *scheme).collect();
        let path: Vec<String> = pts.iter().map(|a| format!("{:.1},{:.1}", px(a.n as f64), py(a.mean_se))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        for a in &pts {
            let x = px(a.n as f64);
            let (lo, hi) = (py(a.mean_se - a.std_error), py(a.mean_se + a.std_error));
            let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{lo:.1}" x2="{x:.1}" y2="{hi:.1}" stroke="{color}"/><line x1="{:.1}" y1="{lo:.1}" x2="{:.1}" y2="{lo:.1}" stroke="{color}"/><line x1="{:.1}" y1="{hi:.1}" x2="{:.1}" y2="{hi:.1}" stroke="{color}"/><circle cx="{x:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, x - 4.0, x + 4.0, x - 4.0, x + 4.0, py(a.mean_se));
        }
        let ly = T + 10.0 + 20.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, W - R + 15.0, W - R + 40.0, W - R + 46.0, ly + 4.0, scheme.label());
    }
    s.push_str("</svg>\n");
    s
}

/// One line of the characteristics table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table1Row {
    pub architecture: String,
    pub n: usize,
    pub groups: usize,
    pub group_dimension: usize,
    pub elements_per_group: u64,
    pub nonzeros: u64,
    pub complexity_reflective: u64,
    pub complexity_transmissive: u64,
    pub complexity_hybrid: u64,
    pub complexity_multi_sector: u64,
}

pub const TABLE1_HEADER: &str = "architecture,n,groups,group_dimension,elements_per_group,nonzeros,\
complexity_reflective,complexity_transmissive,complexity_hybrid,complexity_multi_sector";

/// Rows for every `n`: single-connected, fully-connected, then one
/// group-connected row per `g`.
pub fn table1_rows(ns: &[usize], gs: &[usize], sectors: usize) -> Result<Vec<Table1Row>, String> {
    let modes = [Mode::Reflective, Mode::Transmissive, Mode::Hybrid, Mode::MultiSector { sectors }];
    let mut rows = Vec::new();
    for &n in ns {
        let mut archs = vec![Architecture::SingleConnected, Architecture::FullyConnected];
        for &g in gs {
            if g == 0 || n % g != 0 {
                return Err(format!("G = {g} does not divide N = {n}"));
            }
            archs.push(Architecture::GroupConnected { groups: g });
        }
        for arch in archs {
            let cfgs: Vec<RisConfig> = modes
                .iter()
                .map(|&m| RisConfig::new(arch, m, n))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let c = |i: usize| hardware_complexity(&cfgs[i]).components;
            rows.push(Table1Row {
                architecture: arch.to_string(),
                n,
                groups: cfgs[0].group_count(),
                group_dimension: cfgs[0].group_dimension(),
                elements_per_group: elements_per_group(&cfgs[0]),
                nonzeros: nonzero_count(&cfgs[0]),
                complexity_reflective: c(0),
                complexity_transmissive: c(1),
                complexity_hybrid: c(2),
                complexity_multi_sector: c(3),
            });
        }
    }
    Ok(rows)
}

fn cmd_table1(ns: &[usize], gs: &[usize], sectors: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(CliError::input("--n needs positive element counts"));
    }
    if sectors < 2 {
        return Err(CliError::input("--sectors must be at least 2"));
    }
    let rows = table1_rows(ns, gs, sectors).map_err(CliError::input)?;
    let mut s = String::from(TABLE1_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.architecture,
            r.n,
            r.groups,
            r.group_dimension,
            r.elements_per_group,
            r.nonzeros,
            r.complexity_reflective,
            r.complexity_transmissive,
            r.complexity_hybrid,
            r.complexity_multi_sector
        );
    }
    out.write_all(s.as_bytes()).map_err(|e| CliError { code: EXIT_IO, message: e.to_string() })?;
    Ok(EXIT_OK)
}

/// Result of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn all_configs(n: usize) -> Vec<RisConfig> {
    let archs = [Architecture::SingleConnected, Architecture::FullyConnected, Architecture::GroupConnected { groups: 2 }];
    let modes = [Mode::Reflective, Mode::Transmissive, Mode::Hybrid, Mode::MultiSector { sectors: 3 }];
    archs.iter().flat_map(|&a| modes.iter().map(move |&m| RisConfig::new(a, m, n).expect("valid"))).collect()
}

fn check_table() -> CheckOutcome {
    let mut mismatches = 0;
    let mut count = 0;
    for n in [16u64, 32, 64] {
        for g in [2u64, 4, 8] {
            let rows = table1_rows(&[n as usize], &[g as usize], 3).expect("divides");
            let d = n / g;
            let expect = [
                ("single", n, n, [n, n, (3 * n).div_ceil(2), (4 * n).div_ceil(2)]),
                ("fully", 1, n * n, [(n + 1) * n / 2; 4]),
                ("group", g, g * d * d, [(d + 1) * n / 2; 4]),
            ];
            for (row, (_, groups, nnz, cx)) in rows.iter().zip(expect) {
                count += 1;
                let got = [row.complexity_reflective, row.complexity_transmissive, row.complexity_hybrid, row.complexity_multi_sector];
                if row.groups as u64 != groups || row.nonzeros != nnz || got != cx {
                    mismatches += 1;
                }
            }
        }
    }
    outcome("table formulas", mismatches == 0, format!("{count} rows, {mismatches} mismatches"))
}

fn check_projections(samples: u64, fault: Option<Fault>) -> Vec<CheckOutcome> {
    let mut worst_residual = 0.0_f64;
    let mut sparsity = 0;
    let mut worst_idem = 0.0_f64;
    let mut failures = 0;
    for cfg in all_configs(8) {
        for seed in 0..samples {
            let Ok(m) = project_feasible(&gaussian_blocks(&cfg, seed), &cfg) else {
                failures += 1;
                continue;
            };
            let mut blocks = m.into_blocks();
            if fault == Some(Fault::BrokenProjection) {
                for b in &mut blocks {
                    *b *= Complex64::new(1.001, 0.0);
                }
            }
            let report = validate_blocks(&cfg, &blocks, 1e-10).expect("shapes");
            worst_residual = worst_residual.max(report.residual);
            sparsity += report.sparsity_violations;
            match project_feasible(&blocks, &cfg) {
                Ok(again) => {
                    let d: f64 = again.blocks().iter().zip(&blocks).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
                    worst_idem = worst_idem.max(d);
                }
                Err(_) => failures += 1,
            }
        }
    }
    let total = samples * 12;
    vec![
        outcome("unitarity residual", worst_residual <= 1e-10 && failures == 0, format!("max {worst_residual:.2e} over {total} projections (tol 1e-10)")),
        outcome("sparsity pattern", sparsity == 0, format!("{sparsity} non-zero entries outside the pattern")),
        outcome("projection idempotence", worst_idem <= 1e-12, format!("max change {worst_idem:.2e} (tol 1e-12)")),
    ]
}

fn unit_channels(n: usize, seed: u64) -> crate::channel::ScenarioChannels {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut z = || Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    crate::channel::ScenarioChannels {
        h_d: z(),
        h_t: CVector::from_fn(n, |_, _| z()),
        g_r: CVector::from_fn(n, |_, _| z()),
        f_d: z(),
        f_t: CVector::from_fn(n, |_, _| z()),
        q_d: z(),
        q_r: CVector::from_fn(n, |_, _| z()),
    }
}

/// Largest relative Frobenius error between the Wirtinger gradient and
/// central differences with step `h`, over `instances` random draws at
/// each of `N = 2` and `N = 4`, for both objectives.
pub fn gradient_check(instances: u64, h: f64) -> f64 {
    let b = LinkBudget { p_v: 1.0, p_c: 1.0, sigma2: 0.1, i_max: 0.3 };
    let mut worst = 0.0_f64;
    for n in [2, 4] {
        let cfg = RisConfig::reflective(Architecture::FullyConnected, n).expect("valid");
        for seed in 0..instances {
            let ch = unit_channels(n, 10_000 + 100 * n as u64 + seed);
            let m = crate::scattering::random_feasible(&cfg, seed).expect("projection");
            for obj in [Objective::FixedPower(0.6), Objective::CappedPower { p_max: 1.0 }] {
                let g = wirtinger_gradient(&obj, &ch, &m, &b).expect("dims");
                let eval = |phi: CMatrix| obj.value(&ch, Some(&ScatteringMatrix::new(cfg, vec![phi]).expect("shape")), &b).expect("dims");
                let fd = CMatrix::from_fn(n, n, |i, j| {
                    let mut d = [0.0; 2];
                    for (k, step) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
                        let mut plus = m.primary_block().clone();
                        let mut minus = plus.clone();
                        plus[(i, j)] += step;
                        minus[(i, j)] -= step;
                        d[k] = (eval(plus) - eval(minus)) / (2.0 * h);
                    }
                    Complex64::new(d[0], d[1]) * 0.5
                });
                worst = worst.max((&g - &fd).norm() / g.norm());
            }
        }
    }
    worst
}

fn check_oracle(quick: bool) -> CheckOutcome {
    let b = LinkBudget { p_v: 1.0, p_c: 1.0, sigma2: 1.0, i_max: 0.5 };
    let cases: &[(Architecture, usize, usize)] = if quick {
        &[(Architecture::SingleConnected, 2, 256), (Architecture::FullyConnected, 2, 48)]
    } else {
        &[(Architecture::SingleConnected, 2, 1024), (Architecture::SingleConnected, 3, 128), (Architecture::FullyConnected, 2, 96)]
    };
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for &(arch, n, points) in cases {
        let cfg = RisConfig::reflective(arch, n).expect("valid");
        for seed in 0..3 {
            let ch = unit_channels(n, 20_000 + seed);
            let oracle = brute_force_oracle(&ch, &cfg, &b, 1.0, points).expect("small instance");
            let ao = alternating_optimize(&ch, &cfg, &b, 1.0, &OptimizerSettings::default()).expect("valid");
            worst = worst.max(oracle.se - ao.se);
            count += 1;
        }
    }
    outcome("oracle agreement", worst <= 1e-2, format!("oracle exceeds optimizer by at most {worst:.2e} bits/s/Hz on {count} instances (tol 1e-2)"))
}

fn check_channel_moments(cfg: &SweepConfig, draws: u64) -> CheckOutcome {
    let g = &cfg.geometry;
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let pl_direct = path_loss_linear(dist(g.v2v_tx, g.v2v_rx), LinkClass::Direct, &cfg.fading).expect("positive distance");
    let pl_ris = path_loss_linear(dist(g.v2v_tx, g.ris), LinkClass::Ris, &cfg.fading).expect("positive distance");
    let (mut sd, mut sr) = (0.0, 0.0);
    for seed in 0..draws {
        let ch = sample_scenario(g, &cfg.fading, 1, seed).expect("valid geometry");
        sd += ch.h_d.norm_sqr() / pl_direct;
        sr += ch.h_t[0].norm_sqr() / pl_ris;
    }
    let (md, mr) = (sd / draws as f64, sr / draws as f64);
    // |h|²/PL has unit mean and standard deviation at most 1
    let tol = 5.0 / (draws as f64).sqrt();
    outcome(
        "channel second moments",
        (md - 1.0).abs() <= tol && (mr - 1.0).abs() <= tol,
        format!("normalized E|h|² direct {md:.4}, surface {mr:.4} over {draws} draws (tol {tol:.3})"),
    )
}

fn check_ascent(cfg: &SweepConfig, trials: u64) -> Vec<CheckOutcome> {
    let mut violations = 0;
    let mut unconverged = 0;
    let mut runs = 0;
    let mut dominance = 0;
    for seed in 0..trials {
        let ch = sample_scenario(&cfg.geometry, &cfg.fading, 16, seed).expect("valid geometry");
        let mut last = f64::NEG_INFINITY;
        for arch in [Architecture::SingleConnected, Architecture::FullyConnected] {
            let rc = RisConfig::reflective(arch, 16).expect("valid");
            let r = alternating_optimize(&ch, &rc, &cfg.budget, cfg.budget.p_v, &cfg.optimizer).expect("valid inputs");
            runs += 1;
            violations += r.trace.windows(2).filter(|w| w[1] < w[0]).count();
            unconverged += usize::from(!r.converged);
            if arch == Architecture::FullyConnected && r.se < last - 1e-9 {
                dominance += 1;
            }
            last = r.se;
        }
    }
    vec![
        outcome("monotone ascent", violations == 0, format!("{violations} decreasing steps over {runs} runs")),
        outcome("convergence", unconverged == 0, format!("{unconverged} of {runs} runs hit the iteration limit")),
        outcome("fully-connected dominance", dominance == 0, format!("{dominance} of {trials} trials below single-connected")),
    ]
}

/// Runs the invariant battery.
pub fn validation_battery(cfg: &SweepConfig, quick: bool, fault: Option<Fault>) -> Vec<CheckOutcome> {
    let mut checks = vec![check_table()];
    checks.extend(check_projections(if quick { 50 } else { 1000 }, fault));
    let tol = 1e-5;
    let grad = gradient_check(if quick { 10 } else { 100 }, 1e-6);
    checks.push(outcome("gradient finite differences", grad <= tol, format!("max relative error {grad:.2e} (tol {tol:e})")));
    checks.push(check_oracle(quick));
    checks.push(check_channel_moments(cfg, if quick { 2_000 } else { 20_000 }));
    checks.extend(check_ascent(cfg, if quick { 5 } else { 25 }));
    checks
}

fn cmd_validate(config: Option<&Path>, quick: bool, fault: Option<Fault>, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = load_config(config)?;
    let mut s = String::from("hardware complexity (reflective / transmissive / hybrid / multi-sector S=3)\n");
    for row in table1_rows(&[16, 32, 64], &[2, 4, 8], 3).expect("divides") {
        let _ = writeln!(
            s,
            "  N={:<3} {:<28} {:>5} {:>5} {:>5} {:>5}",
            row.n,
            row.architecture,
            row.complexity_reflective,
            row.complexity_transmissive,
            row.complexity_hybrid,
            row.complexity_multi_sector
        );
    }
    s.push('\n');
    let checks = validation_battery(&cfg, quick, fault);
    for c in &checks {
        let _ = writeln!(s, "{}  {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        s.push_str("all invariants hold\n");
    } else {
        let _ = writeln!(s, "failed: {}", failed.join(", "));
    }
    out.write_all(s.as_bytes()).map_err(|e| CliError { code: EXIT_IO, message: e.to_string() })?;
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_INVARIANT })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("bdris").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn table1_rows_for_sixteen_elements() {
        let (code, out, _) = run_capture(&["table1", "--n", "16", "--g", "4"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], TABLE1_HEADER);
        assert_eq!(lines[1], "single-connected,16,16,1,1,16,16,16,24,32");
        assert_eq!(lines[2], "fully-connected,16,1,16,256,256,136,136,136,136");
        assert_eq!(lines[3], "group-connected (G=4),16,4,4,16,64,40,40,40,40");
    }

    #[test]
    fn table1_rejects_non_divisor() {
        let (code, _, err) = run_capture(&["table1", "--n", "16", "--g", "3"]);
        assert_eq!(code, EXIT_BAD_INPUT);
        assert!(err.contains("does not divide"));
    }

    #[test]
    fn config_errors_name_the_field_and_line() {
        let err = parse_config("{\n  \"trials\": 5,\n  \"trails\": 3\n}").unwrap_err();
        assert!(err.contains("trails") && err.contains("line 3"), "{err}");
        let err = parse_config("{\"budget\": {\"p_v\": \"x\"}}").unwrap_err();
        assert!(err.contains("line 1"), "{err}");
        let err = parse_config("{\"trials\": 0}").unwrap_err();
        assert!(err.contains("trials"), "{err}");
    }

    #[test]
    fn config_defaults_are_materialized_and_manifests_accepted() {
        let cfg = parse_config("{\"trials\": 7}").unwrap();
        assert_eq!(cfg, SweepConfig { trials: 7, ..SweepConfig::default() });
        let manifest = RunManifest {
            tool_version: "0.1.0".into(),
            config_path: None,
            base_seed: 9,
            created_utc: "2026-01-01T00:00:00Z".into(),
            config: SweepConfig { base_seed: 9, trials: 2, ..SweepConfig::default() },
        };
        let text = serde_json::to_string_pretty(&manifest).unwrap();
        assert_eq!(parse_config(&text).unwrap(), manifest.config);
    }

    #[test]
    fn csv_header_is_stable() {
        assert_eq!(records_csv(&[]), format!("{RECORDS_HEADER}\n"));
    }

    #[test]
    fn svg_has_one_series_per_scheme() {
        let agg = |scheme, n, m| Aggregate { scheme, n, trials: 2, mean_se: m, std_error: 0.1, mean_p_v: 1.0, converged_fraction: 1.0 };
        let svg = render_svg(&[
            agg(Scheme::FullyConnected, 16, 2.0),
            agg(Scheme::FullyConnected, 32, 3.0),
            agg(Scheme::NoRis, 16, 0.5),
            agg(Scheme::NoRis, 32, 0.5),
        ]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("fully_connected") && svg.contains("no_ris"));
    }

    #[test]
    fn bad_flags_are_input_errors() {
        assert_eq!(run_capture(&["sweep"]).0, EXIT_BAD_INPUT);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_BAD_INPUT);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }
}
