//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use bdris::channel::{sample_scenario, ScenarioChannels};
use bdris::cli;
use bdris::linalg::{CMatrix, CVector};
use bdris::metrics::LinkBudget;
use bdris::optimizer::{alternating_optimize, brute_force_oracle, wirtinger_gradient, Objective, OptimizerSettings};
use bdris::scattering::{project_feasible, Architecture, Mode, RisConfig, ScatteringMatrix};
use bdris::scenario::{trial_seed, SweepConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn cn_channels(n: usize, seed: u64) -> ScenarioChannels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = |rng: &mut ChaCha8Rng| CVector::from_fn(n, |_, _| cn(rng));
    ScenarioChannels {
        h_d: cn(&mut rng),
        h_t: v(&mut rng),
        g_r: v(&mut rng),
        f_d: cn(&mut rng),
        f_t: v(&mut rng),
        q_d: cn(&mut rng),
        q_r: v(&mut rng),
    }
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("bdris").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

/// Hand-evaluated characteristics: `(groups, nonzeros, [R, T, H, M])`.
fn table_by_hand(arch: &str, n: u64, g: u64, s: u64) -> (u64, u64, [u64; 4]) {
    let half_up = |x: u64| (x + 1) / 2;
    match arch {
        "single" => (n, n, [n, n, half_up(3 * n), half_up((s + 1) * n)]),
        "fully" => (1, n * n, [(n + 1) * n / 2; 4]),
        _ => {
            let d = n / g;
            (g, g * d * d, [(d + 1) * n / 2; 4])
        }
    }
}

fn criterion_1() -> Verdict {
    let (code, out, err) = run_cli(&["table1", "--n", "16,32,64", "--g", "2,4,8", "--sectors", "3"]);
    if code != 0 {
        return verdict(false, format!("exit {code}: {err}"));
    }
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for line in out.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let n: u64 = f[1].parse().unwrap();
        let (kind, g) = if f[0].starts_with("single") {
            ("single", 0)
        } else if f[0].starts_with("fully") {
            ("fully", 0)
        } else {
            ("group", f[0].trim_start_matches("group-connected (G=").trim_end_matches(')').parse().unwrap())
        };
        let (eg, enz, ec) = table_by_hand(kind, n, g, 3);
        let nums: Vec<u64> = f[2..].iter().map(|x| x.parse().unwrap()).collect();
        let expected = [eg, n / eg, (n / eg) * (n / eg), enz, ec[0], ec[1], ec[2], ec[3]];
        if nums != expected {
            mismatches.push(line.to_string());
        }
        checked += 1;
    }
    // N=16, G=4 spot values
    let spot = out.lines().any(|l| l == "group-connected (G=4),16,4,4,16,64,40,40,40,40")
        && out.lines().any(|l| l == "fully-connected,16,1,16,256,256,136,136,136,136")
        && out.lines().any(|l| l.starts_with("single-connected,16,") && l.split(',').nth(8) == Some("24"));
    verdict(
        checked == 15 && mismatches.is_empty() && spot,
        format!("{checked} rows × 4 modes, {} mismatches", mismatches.len()),
    )
}

fn group_residual(cfg: &RisConfig, blocks: &[CMatrix]) -> f64 {
    let d = cfg.group_dimension();
    (0..cfg.group_count())
        .map(|g| {
            let s = cfg.group_range(g).start;
            let mut gram = CMatrix::identity(d, d) * Complex64::new(-1.0, 0.0);
            for b in blocks {
                let sub = b.view((s, s), (d, d)).clone_owned();
                gram += sub.adjoint() * sub;
            }
            gram.norm()
        })
        .fold(0.0, f64::max)
}

fn criterion_2() -> Verdict {
    let n = 8;
    let archs = [
        Architecture::SingleConnected,
        Architecture::FullyConnected,
        Architecture::GroupConnected { groups: 2 },
        Architecture::GroupConnected { groups: 4 },
    ];
    let modes = [Mode::Reflective, Mode::Transmissive, Mode::Hybrid, Mode::MultiSector { sectors: 3 }];
    let (mut worst_res, mut worst_idem, mut sparsity, mut failures, mut total) = (0.0_f64, 0.0_f64, 0usize, 0usize, 0usize);
    for (ai, arch) in archs.iter().enumerate() {
        for (mi, mode) in modes.iter().enumerate() {
            let cfg = RisConfig::new(*arch, *mode, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * ai as u64 + mi as u64);
            for _ in 0..1000 {
                total += 1;
                let raw: Vec<CMatrix> = (0..mode.sectors()).map(|_| CMatrix::from_fn(n, n, |_, _| cn(&mut rng))).collect();
                let Ok(m) = project_feasible(&raw, &cfg) else {
                    failures += 1;
                    continue;
                };
                worst_res = worst_res.max(group_residual(&cfg, m.blocks()));
                if !m.validate(1e-10).passed {
                    failures += 1;
                }
                for b in m.blocks() {
                    for i in 0..n {
                        for j in 0..n {
                            if i / cfg.group_dimension() != j / cfg.group_dimension() && b[(i, j)] != Complex64::new(0.0, 0.0) {
                                sparsity += 1;
                            }
                        }
                    }
                }
                let again = project_feasible(m.blocks(), &cfg).unwrap();
                let d = again.blocks().iter().zip(m.blocks()).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
                worst_idem = worst_idem.max(d);
            }
        }
    }
    verdict(
        worst_res <= 1e-10 && worst_idem <= 1e-12 && sparsity == 0 && failures == 0,
        format!("{total} projections: max residual {worst_res:.1e}, max idempotence gap {worst_idem:.1e}, {sparsity} sparsity violations, {failures} failures"),
    )
}

fn criterion_3() -> Verdict {
    let b = LinkBudget { p_v: 1.0, p_c: 1.0, sigma2: 1.0, i_max: 0.5 };
    let p_max = 1.0;
    let settings = OptimizerSettings::default();
    let mut cases = Vec::new();
    for k in 0..25 {
        cases.push((Architecture::FullyConnected, 2, 315, 30_000 + k));
    }
    for k in 0..13 {
        cases.push((Architecture::SingleConnected, 2, 1024, 31_000 + k));
    }
    for k in 0..12 {
        cases.push((Architecture::SingleConnected, 3, 1024, 32_000 + k));
    }
    let (mut worst, mut binding) = (0.0_f64, 0);
    let mut worst_case = String::new();
    for &(arch, n, points, seed) in &cases {
        let ch = cn_channels(n, seed);
        let cfg = RisConfig::reflective(arch, n).unwrap();
        let oracle = brute_force_oracle(&ch, &cfg, &b, p_max, points).unwrap();
        let ao = alternating_optimize(&ch, &cfg, &b, p_max, &settings).unwrap();
        if ao.p_v_opt < p_max {
            binding += 1;
        }
        let gap = (ao.se - oracle.se).abs();
        if gap >= worst {
            worst = gap;
            worst_case = format!("{arch} N={n} seed {seed}: optimizer {:.6} vs oracle {:.6}", ao.se, oracle.se);
        }
    }
    verdict(
        worst <= 1e-2,
        format!("{} instances ({binding} with the interference cap binding), max |gap| {worst:.2e} bits/s/Hz at {worst_case}", cases.len()),
    )
}

fn criterion_4() -> Verdict {
    let b = LinkBudget { p_v: 1.0, p_c: 1.0, sigma2: 0.5, i_max: 0.4 };
    let h = 1e-6;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for n in [2usize, 4] {
        let cfg = RisConfig::reflective(Architecture::FullyConnected, n).unwrap();
        for k in 0..100u64 {
            let ch = cn_channels(n, 40_000 + 1000 * n as u64 + k);
            let m = bdris::scattering::random_feasible(&cfg, k).unwrap();
            for obj in [Objective::FixedPower(0.8), Objective::CappedPower { p_max: 1.0 }] {
                let g = wirtinger_gradient(&obj, &ch, &m, &b).unwrap();
                let f = |phi: CMatrix| obj.value(&ch, Some(&ScatteringMatrix::new(cfg, vec![phi]).unwrap()), &b).unwrap();
                let fd = CMatrix::from_fn(n, n, |i, j| {
                    let partial = |step: Complex64| {
                        let mut plus = m.primary_block().clone();
                        let mut minus = plus.clone();
                        plus[(i, j)] += step;
                        minus[(i, j)] -= step;
                        (f(plus) - f(minus)) / (2.0 * h)
                    };
                    Complex64::new(partial(Complex64::new(h, 0.0)), partial(Complex64::new(0.0, h))) * 0.5
                });
                worst = worst.max((&g - &fd).norm() / g.norm());
                count += 1;
            }
        }
    }
    verdict(worst <= 1e-5, format!("{count} gradients at N ∈ {{2, 4}}: max relative error {worst:.2e}"))
}

struct AggRow {
    scheme: String,
    n: usize,
    mean: f64,
    se: f64,
}

fn read_aggregates(dir: &Path) -> Vec<AggRow> {
    let text = std::fs::read_to_string(dir.join("aggregates.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            AggRow { scheme: f[0].into(), n: f[1].parse().unwrap(), mean: f[3].parse().unwrap(), se: f[4].parse().unwrap() }
        })
        .collect()
}

fn criterion_5(dir: &Path) -> Verdict {
    let (code, _, err) = run_cli(&["sweep", "--out", dir.to_str().unwrap(), "--threads", "1"]);
    if code != 0 {
        return verdict(false, format!("sweep exit {code}: {err}"));
    }
    let cfg = SweepConfig::default();
    let rows = read_aggregates(dir);
    let series = |name: &str| -> Vec<&AggRow> { rows.iter().filter(|r| r.scheme == name).collect() };
    let (fully, single, none) = (series("fully_connected"), series("single_connected"), series("no_ris"));
    let mut problems = Vec::new();
    if fully.len() != cfg.n_values.len() || single.len() != cfg.n_values.len() || none.len() != cfg.n_values.len() {
        return verdict(false, "missing series points".into());
    }
    let mut min_z = f64::INFINITY;
    for i in 0..cfg.n_values.len() {
        let z_fs = (fully[i].mean - single[i].mean) / fully[i].se.hypot(single[i].se);
        let z_sn = (single[i].mean - none[i].mean) / single[i].se.hypot(none[i].se);
        min_z = min_z.min(z_fs).min(z_sn);
        if !(z_fs > 3.0 && z_sn > 3.0) {
            problems.push(format!("ordering gap at N={}", fully[i].n));
        }
    }
    for s in [&fully, &single] {
        for w in s.windows(2) {
            if w[1].mean < w[0].mean - w[0].se.max(w[1].se) {
                problems.push(format!("{} decreases from N={} to N={}", w[0].scheme, w[0].n, w[1].n));
            }
        }
    }
    let lo = none.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    let hi = none.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    let se = none.iter().map(|r| r.se).fold(f64::INFINITY, f64::min);
    if hi - lo > se {
        problems.push(format!("no_ris spread {:.2e} exceeds one standard error {se:.2e}", hi - lo));
    }
    verdict(
        problems.is_empty(),
        format!(
            "{} trials: SE at N=16 {:.3}/{:.3}/{:.4}, N=64 {:.3}/{:.3}/{:.4} (fully/single/none); smallest gap {min_z:.1} SE; no_ris spread {:.1e}{}",
            cfg.trials,
            fully[0].mean,
            single[0].mean,
            none[0].mean,
            fully[6].mean,
            single[6].mean,
            none[6].mean,
            hi - lo,
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn criterion_6(sweep_dir: &Path) -> Verdict {
    let cfg = SweepConfig::default();
    let text = std::fs::read_to_string(sweep_dir.join("records.csv")).unwrap();
    let (mut total, mut converged) = (0usize, 0usize);
    for l in text.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        if f[0] == "no_ris" {
            continue;
        }
        total += 1;
        converged += usize::from(f[6] == "true");
    }
    let sweep_fraction = converged as f64 / total as f64;

    let mut runs = 0;
    let mut decreasing = 0;
    let mut run_converged = 0;
    let mut max_iters = 0;
    for n in [16usize, 64] {
        for trial in 0..cfg.trials {
            let ch = sample_scenario(&cfg.geometry, &cfg.fading, n, trial_seed(cfg.base_seed, trial)).unwrap();
            for arch in [Architecture::SingleConnected, Architecture::FullyConnected] {
                let rc = RisConfig::reflective(arch, n).unwrap();
                let r = alternating_optimize(&ch, &rc, &cfg.budget, cfg.budget.p_v, &cfg.optimizer).unwrap();
                runs += 1;
                decreasing += r.trace.windows(2).filter(|w| !(w[1] >= w[0])).count();
                run_converged += usize::from(r.converged);
                max_iters = max_iters.max(r.iterations);
            }
        }
    }
    let run_fraction = run_converged as f64 / runs as f64;
    verdict(
        decreasing == 0 && sweep_fraction >= 0.99 && run_fraction >= 0.99,
        format!(
            "{runs} traced runs with {decreasing} decreasing steps; converged {:.1}% of traced runs (max {max_iters} outer iterations) and {:.1}% of {total} sweep optimizations",
            100.0 * run_fraction,
            100.0 * sweep_fraction
        ),
    )
}

fn criterion_7(first: &Path, second: &Path) -> Verdict {
    let manifest = first.join("manifest.json");
    let (code, _, err) = run_cli(&["sweep", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap(), "--threads", "4"]);
    if code != 0 {
        return verdict(false, format!("rerun exit {code}: {err}"));
    }
    let a = std::fs::read(first.join("records.csv")).unwrap();
    let b = std::fs::read(second.join("records.csv")).unwrap();
    verdict(a == b, format!("records.csv from 1 and 4 threads: {} vs {} bytes, identical: {}", a.len(), b.len(), a == b))
}

fn report(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let passed = v.passed && took <= limit;
    println!(
        "{} criterion {id}: {name}: {} [{:.1} s, limit {} s]",
        if passed { "PASS" } else { "FAIL" },
        v.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    passed
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("sweep");
    let second = tmp.path().join("rerun");
    let results = [
        report(1, "characteristics table", Duration::from_secs(1), criterion_1),
        report(2, "constraint suite", Duration::from_secs(30), criterion_2),
        report(3, "oracle equivalence", Duration::from_secs(120), criterion_3),
        report(4, "gradient correctness", Duration::from_secs(60), criterion_4),
        report(5, "element-count sweep ordering", Duration::from_secs(300), || criterion_5(&first)),
        report(6, "monotone ascent and convergence", Duration::from_secs(300), || criterion_6(&first)),
        report(7, "determinism across thread counts", Duration::from_secs(300), || criterion_7(&first, &second)),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
