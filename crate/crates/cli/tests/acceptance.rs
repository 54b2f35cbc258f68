//! Acceptance gate. Eleven numbered checks, one test each, asserting the
//! tolerances this project commits to. Run with
//!
//!   cargo test -p sskcw-cli --test acceptance -- --nocapture
//!
//! to see one margin line per check next to its pass/fail status. The three
//! expensive disorder runs are shared between checks through lazy statics, so
//! the whole gate finishes in a few minutes on one core.

use std::process::Command;
use std::sync::LazyLock;
use std::time::Instant;

use sskcw::analytics::{self, Moments, Regime, StatisticKind, TransitionParams};
use sskcw::ensembles::{
    assemble_deformed, make_two_point, sample_wigner, EnsembleConfig, EntryDistribution,
};
use sskcw::montecarlo::{self, ExperimentPlan, Observables, TestFn, TrialRecord};
use sskcw::partition::{self, DirectMethod};
use sskcw::quad;
use sskcw::rng::{domain, trial_seed, Stream};
use sskcw::special::norm_cdf;
use sskcw::spectral::Spectrum;

fn spectra(n: usize, count: usize, master: u64, dist: EntryDistribution, j: f64) -> Vec<Spectrum> {
    (0..count)
        .map(|i| {
            let seed = trial_seed(master, i as u64);
            let config = EnsembleConfig::new(n, j, dist, seed);
            let m = assemble_deformed(&sample_wigner(&config).unwrap());
            Spectrum::from_deformed(&m, j, Some(seed)).unwrap()
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct SharedRun {
    plan: ExperimentPlan,
    records: Vec<TrialRecord>,
    seconds: f64,
}

fn run_shared(plan: ExperimentPlan) -> SharedRun {
    let t = Instant::now();
    let records = montecarlo::run_experiment(&plan).unwrap();
    SharedRun { plan, records, seconds: t.elapsed().as_secs_f64() }
}

/// GOE, J=2, B=0, N=400, 2000 trials; feeds checks 7 and the control half of 8.
static RUN_CLT: LazyLock<SharedRun> = LazyLock::new(|| {
    run_shared(ExperimentPlan {
        ensemble: EnsembleConfig::new(400, 2.0, EntryDistribution::goe(), 0),
        transition: TransitionParams::new(2.0, 0.0).unwrap(),
        trials: 2000,
        observables: Observables {
            chi: true,
            partial_ls: vec![TestFn::G, TestFn::X2],
            ..Observables::default()
        },
        master_seed: 700,
        workers: 1,
    })
});

/// Two-point entries with W3 = 1, J=2, N=400, 4000 trials; feeds check 8.
static RUN_TWO_POINT: LazyLock<SharedRun> = LazyLock::new(|| {
    run_shared(ExperimentPlan {
        ensemble: EnsembleConfig::new(400, 2.0, make_two_point(1.0), 0),
        transition: TransitionParams::new(2.0, 0.0).unwrap(),
        trials: 4000,
        observables: Observables {
            chi: true,
            partial_ls: vec![TestFn::X2],
            ..Observables::default()
        },
        master_seed: 800,
        workers: 1,
    })
});

/// GOE, J=2, B=0, N=400, 1000 trials with exact free energies; feeds check 9.
static RUN_LAW: LazyLock<SharedRun> = LazyLock::new(|| {
    run_shared(ExperimentPlan {
        ensemble: EnsembleConfig::new(400, 2.0, EntryDistribution::goe(), 0),
        transition: TransitionParams::new(2.0, 0.0).unwrap(),
        trials: 1000,
        observables: Observables { f_exact: true, ..Observables::default() },
        master_seed: 900,
        workers: 1,
    })
});

#[test]
fn acceptance_01_sphere_integral_asymptotics() {
    let t = Instant::now();
    let large = analytics::i_alpha(100.0).unwrap() * (100.0 / (4.0 * std::f64::consts::PI)).sqrt();
    let small =
        analytics::i_alpha(1e-3).unwrap() / (8.0 * std::f64::consts::PI / std::f64::consts::E).sqrt();
    let mut min_val = f64::INFINITY;
    for k in 0..50 {
        let alpha = 10f64.powf(-4.0 + 8.0 * k as f64 / 49.0);
        min_val = min_val.min(analytics::i_alpha(alpha).unwrap());
    }
    let secs = t.elapsed().as_secs_f64();
    println!(
        "check 1: I(100) ratio err {:.2e} (<= 0.05), I(1e-3) ratio err {:.2e} (<= 0.01), grid min {:.3e} (> 0), {:.2}s (< 5s)",
        (large - 1.0).abs(),
        (small - 1.0).abs(),
        min_val,
        secs
    );
    assert!((large - 1.0).abs() <= 0.05);
    assert!((small - 1.0).abs() <= 0.01);
    assert!(min_val > 0.0);
    assert!(secs < 5.0);
}

#[test]
fn acceptance_02_saddle_location_identity() {
    // B + s/(J^2-1) = 1/(s-x) must hold at the reported fixed point
    let mut worst: f64 = 0.0;
    for xi in 0..10 {
        let x = -3.0 + 6.0 * xi as f64 / 9.0;
        for ji in 0..10 {
            let j = 1.1 + 0.4 * ji as f64;
            for bi in 0..10 {
                let b = -5.0 + 10.0 * bi as f64 / 9.0;
                let p = TransitionParams::new(j, b).unwrap();
                let s = analytics::s_of_x(x, &p);
                worst = worst.max((b + s / (j * j - 1.0) - 1.0 / (s - x)).abs());
            }
        }
    }
    println!("check 2: max fixed-point residual {worst:.2e} over 1000 (x, J, B) points (<= 1e-10)");
    assert!(worst <= 1e-10);
}

#[test]
fn acceptance_03_small_system_oracles() {
    let t = Instant::now();
    // exact sphere quadrature at N <= 3
    let mut worst_rel: f64 = 0.0;
    for n in [1usize, 2, 3] {
        for i in 0..20u64 {
            let seed = trial_seed(303, n as u64 * 100 + i);
            let beta = 0.15 + 0.05 * (i % 8) as f64;
            let config = EnsembleConfig::new(n, 2.0, EntryDistribution::gaussian(), seed);
            let m = assemble_deformed(&sample_wigner(&config).unwrap());
            let s = Spectrum::from_deformed(&m, 2.0, Some(seed)).unwrap();
            let c = partition::contour_log_partition(&s, beta).unwrap();
            let d = partition::direct_log_partition(&m, beta, DirectMethod::Quadrature).unwrap();
            worst_rel = worst_rel.max(((c - d.log_z) / d.log_z).abs());
        }
    }
    // sphere Monte Carlo at N in {6, 10}
    let mut worst_z: f64 = 0.0;
    for n in [6usize, 10] {
        for i in 0..3u64 {
            let seed = trial_seed(606, n as u64 * 10 + i);
            let beta = 0.2 + 0.1 * i as f64;
            let config = EnsembleConfig::new(n, 2.0, EntryDistribution::gaussian(), seed);
            let m = assemble_deformed(&sample_wigner(&config).unwrap());
            let s = Spectrum::from_deformed(&m, 2.0, Some(seed)).unwrap();
            let c = partition::contour_log_partition(&s, beta).unwrap();
            let est = partition::direct_log_partition(
                &m,
                beta,
                DirectMethod::MonteCarlo { samples: 1_000_000, seed: seed ^ 0xABCD },
            )
            .unwrap();
            worst_z = worst_z.max((c - est.log_z).abs() / est.std_error.unwrap());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    println!(
        "check 3: quadrature max rel err {worst_rel:.2e} (<= 1e-6), Monte Carlo max {worst_z:.2} se (<= 3), {secs:.1}s (< 120s)"
    );
    assert!(worst_rel <= 1e-6);
    assert!(worst_z <= 3.0);
    assert!(secs < 120.0);
}

#[test]
fn acceptance_04_contour_abscissa_invariance() {
    let mut worst: f64 = 0.0;
    let beta = TransitionParams::new(2.0, 0.0).unwrap().beta(50);
    for i in 0..10u64 {
        let seed = trial_seed(505, i);
        let config = EnsembleConfig::new(50, 2.0, EntryDistribution::goe(), seed);
        let m = assemble_deformed(&sample_wigner(&config).unwrap());
        let s = Spectrum::from_deformed(&m, 2.0, Some(seed)).unwrap();
        let base = partition::contour_log_partition(&s, beta).unwrap();
        for off in [0.3, 1.0, 2.5] {
            let alt = partition::contour_log_partition_at(&s, beta, s.lambda1() + off).unwrap();
            worst = worst.max(((alt - base) / base).abs());
        }
    }
    println!("check 4: max relative shift {worst:.2e} over 10 instances x 3 abscissas (<= 1e-8)");
    assert!(worst <= 1e-8);
}

#[test]
fn acceptance_05_steepest_descent_accuracy() {
    let plan = ExperimentPlan {
        ensemble: EnsembleConfig::new(200, 2.0, EntryDistribution::goe(), 0),
        transition: TransitionParams::new(2.0, 0.0).unwrap(),
        trials: 100,
        observables: Observables { f_exact: true, f_steepest: true, ..Observables::default() },
        master_seed: 55,
        workers: 1,
    };
    let recs = montecarlo::run_experiment(&plan).unwrap();
    let diffs: Vec<f64> =
        recs.iter().filter_map(|r| Some((r.f_steepest? - r.f_exact?).abs())).collect();
    assert_eq!(diffs.len(), 100);
    let within = diffs.iter().filter(|d| **d <= 1e-3).count();
    let max = diffs.iter().cloned().fold(0.0, f64::max);
    println!("check 5: {within}/100 trials within 1e-3 (need >= 95), worst |F_sd - F_exact| {max:.2e}");
    assert!(within >= 95);
}

#[test]
fn acceptance_06_transitional_formula_convergence() {
    // For each size, 100 spectra are shared across the three window positions.
    // The per-size statistic is the median absolute error pooled over B; the
    // per-B medians are printed alongside because the spread across B is wide.
    let mut pooled = Vec::new();
    for n in [100usize, 200, 400] {
        let specs = spectra(n, 100, 600 + n as u64, EntryDistribution::goe(), 2.0);
        let mut all = Vec::new();
        for b in [-2.0, 0.0, 2.0] {
            let p = TransitionParams::new(2.0, b).unwrap();
            let beta = p.beta(n);
            let diffs: Vec<f64> = specs
                .iter()
                .map(|s| {
                    let fe = partition::contour_log_partition(s, beta).unwrap() / n as f64;
                    let ft = partition::transitional_free_energy(s, &p).unwrap().total();
                    (ft - fe).abs()
                })
                .collect();
            println!("check 6: N={n} B={b}: median |F_tr - F_exact| {:.3e}", median(diffs.clone()));
            all.extend(diffs);
        }
        pooled.push(median(all));
    }
    println!(
        "check 6: pooled medians {:.3e} -> {:.3e} -> {:.3e} (N=100 <= 5e-3, nonincreasing)",
        pooled[0], pooled[1], pooled[2]
    );
    assert!(pooled[0] <= 5e-3);
    assert!(pooled[1] <= pooled[0] && pooled[2] <= pooled[1]);
}

#[test]
fn acceptance_07_partial_statistic_clt() {
    // limit values for phi = ln(J_hat - x) at J = 2, GOE entries;
    // computed with 30-digit arithmetic (mpmath)
    let mean_target = -0.549306144334055;
    let var_target = 0.575364144903562;
    let run = &*RUN_CLT;
    let params = analytics::clt_params(
        &TestFn::G.make(2.0),
        StatisticKind::Partial,
        2.0,
        Moments::goe(),
    )
    .unwrap();
    assert!((params.mean - mean_target).abs() <= 1e-9);
    assert!((params.variance - var_target).abs() <= 1e-9);
    let sum = montecarlo::check_linear_statistic_clt(&run.plan, &run.records, TestFn::G, &params)
        .unwrap();
    let n = sum.used_trials as f64;
    let mean_z = (sum.means[0] - mean_target) / (sum.variances[0] / n).sqrt();
    let var_ratio = sum.variances[0] / var_target;
    println!(
        "check 7: mean {:.5} vs {:.5} (|z| {:.2} <= 4), variance ratio {:.4} (within 20%), KS D {:.4} p {:.3}, run {:.0}s (< 1800s)",
        sum.means[0],
        mean_target,
        mean_z.abs(),
        var_ratio,
        sum.ks[0].statistic,
        sum.ks[0].p_value,
        run.seconds
    );
    assert!(mean_z.abs() <= 4.0);
    assert!((var_ratio - 1.0).abs() <= 0.20);
    // desk-scale budget for the 2000-trial N=400 run
    assert!(run.seconds < 1800.0);
}

#[test]
fn acceptance_08_joint_covariance_with_edge() {
    // cov(N2(x^2), chi) = 2 W3 (1 - 1/J^2) = 3/2 and E chi = W3 (1/J^2 - 1/J^4)
    // = 3/16 at J = 2, W3 = 1; both vanish for GOE entries
    let run = &*RUN_TWO_POINT;
    let joint = montecarlo::check_joint_covariance(&run.plan, &run.records, TestFn::X2).unwrap();
    let cov = &joint.checks[0];
    let chi = &joint.checks[1];
    assert!((cov.predicted - 1.5).abs() <= 1e-12);
    assert!((chi.predicted - 0.1875).abs() <= 1e-12);
    let control_run = &*RUN_CLT;
    let control =
        montecarlo::check_joint_covariance(&control_run.plan, &control_run.records, TestFn::X2)
            .unwrap();
    let ctl = &control.checks[0];
    println!(
        "check 8: cov {:.4} vs 1.5 (off by {:.1}%, {:.1} se from zero), chi mean {:.4} vs 0.1875 (|z| {:.2} <= 4), control cov {:+.4} ({:.2} se, <= 4)",
        cov.observed,
        100.0 * (cov.observed / cov.predicted - 1.0).abs(),
        cov.observed / cov.std_error,
        chi.observed,
        chi.z.abs(),
        ctl.observed,
        ctl.z.abs()
    );
    assert!((cov.observed / cov.predicted - 1.0).abs() <= 0.30);
    assert!(cov.observed >= 4.0 * cov.std_error);
    assert!(chi.z.abs() <= 4.0);
    assert!(ctl.z.abs() <= 4.0);
}

#[test]
fn acceptance_09_transitional_fluctuation_law() {
    let run = &*RUN_LAW;
    let p = TransitionParams::new(2.0, 0.0).unwrap();
    let law = analytics::transition_law(&p, Moments::goe());
    let sum = montecarlo::check_transition_law(&run.plan, &run.records, &law).unwrap();
    // independent quadrature oracle for the limit's first two moments:
    // E[G1 + Q(G2)] and Var[G1 + Q(G2)] by Gauss-Hermite integration of Q
    // against the G2 marginal, with the G1 part folded in through the
    // regression of G1 on G2
    let q = |x: f64| analytics::q_of_x(x, &p).unwrap();
    let sd2 = law.var2.sqrt();
    let eq = quad::gauss_hermite_expect(&q, law.mean2, sd2, 80).unwrap();
    let eq2 = quad::gauss_hermite_expect(&|x: f64| q(x) * q(x), law.mean2, sd2, 80).unwrap();
    let eg2q = quad::gauss_hermite_expect(&|x: f64| x * q(x), law.mean2, sd2, 80).unwrap();
    let var_q = eq2 - eq * eq;
    let cov_g2q = eg2q - law.mean2 * eq;
    let limit_mean = law.mean1 + eq;
    let limit_var = law.var1 + var_q + 2.0 * (law.cov / law.var2) * cov_g2q;
    let mean_gap = (sum.means[0] - limit_mean).abs() / limit_var.sqrt();
    let var_ratio = sum.variances[0] / limit_var;
    println!(
        "check 9: KS D {:.4} (<= 0.08) p {:.3}, mean {:.4} vs oracle {:.4} ({:.3} limit sd, <= 0.25), variance ratio {:.4} (within 25%)",
        sum.ks[0].statistic, sum.ks[0].p_value, sum.means[0], limit_mean, mean_gap, var_ratio
    );
    assert!(sum.ks[0].statistic <= 0.08);
    assert!(mean_gap <= 0.25);
    assert!((var_ratio - 1.0).abs() <= 0.25);
}

#[test]
fn acceptance_10_window_matching_and_boundaries() {
    // deep-window behavior of the shift functional at J = 2
    let mut worst_pos: f64 = 0.0;
    let mut worst_neg: f64 = 0.0;
    for x in [-1.0, 0.0, 1.0] {
        for b in [10.0, 30.0, 100.0] {
            let p = TransitionParams::new(2.0, b).unwrap();
            let q = analytics::q_of_x(x, &p).unwrap();
            let margin = (q - b * x / 2.0).abs() / (3.0 * b.ln());
            worst_pos = worst_pos.max(margin);
            assert!((q - b * x / 2.0).abs() <= 3.0 * b.ln(), "x={x} B={b}");
        }
        for b in [-10.0, -30.0, -100.0] {
            let p = TransitionParams::new(2.0, b).unwrap();
            let q = analytics::q_of_x(x, &p).unwrap();
            let lhs =
                (q + b * b * 3.0 / 4.0 - (4.0 * std::f64::consts::PI / b.abs()).sqrt().ln()).abs();
            worst_neg = worst_neg.max(lhs);
            assert!(lhs <= 0.5, "x={x} B={b}");
        }
    }

    // phase-boundary continuity; closed forms restated here as the oracle
    let para = |beta: f64| beta * beta;
    let ferro = |beta: f64, j: f64| {
        beta * (j + 1.0 / j) - 0.5 * (2.0 * beta * j).ln() - 1.0 / (4.0 * j * j) - 0.5
    };
    let glass = |beta: f64| 2.0 * beta - 0.5 * (2.0 * beta).ln() - 0.75;
    let h = 1e-9;
    let mut worst_jump: f64 = 0.0;
    for j in [1.2, 2.0, 3.0] {
        let bstar = 1.0 / (2.0 * j);
        worst_jump = worst_jump.max((ferro(bstar, j) - para(bstar)).abs());
        let (lo, rl) = analytics::limiting_free_energy(bstar - h, j).unwrap();
        let (hi, rh) = analytics::limiting_free_energy(bstar + h, j).unwrap();
        assert_eq!(rl, Regime::Paramagnetic);
        assert_eq!(rh, Regime::Ferromagnetic);
        assert!((lo - para(bstar - h)).abs() <= 1e-14);
        assert!((hi - ferro(bstar + h, j)).abs() <= 1e-14);
    }
    for j in [0.3, 0.7, 0.99] {
        let bstar = 0.5;
        worst_jump = worst_jump.max((glass(bstar) - para(bstar)).abs());
        let (lo, rl) = analytics::limiting_free_energy(bstar - h, j).unwrap();
        let (hi, rh) = analytics::limiting_free_energy(bstar + h, j).unwrap();
        assert_eq!(rl, Regime::Paramagnetic);
        assert_eq!(rh, Regime::SpinGlass);
        assert!((lo - para(bstar - h)).abs() <= 1e-14);
        assert!((hi - glass(bstar + h)).abs() <= 1e-14);
    }
    println!(
        "check 10: positive-B margin {:.2} of bound, negative-B worst {:.3} (<= 0.5), boundary jump {:.1e} (<= 1e-12)",
        worst_pos, worst_neg, worst_jump
    );
    assert!(worst_jump <= 1e-12);
}

#[test]
fn acceptance_11_density_curves() {
    // the emitted figure: one kernel density curve of Q(G2) per window position
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_sskcw"))
        .args([
            "--out",
            dir.path().to_str().unwrap(),
            "--seed",
            "4141",
            "density",
            "--b-list",
            "-1,0,1",
            "--samples",
            "20000",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let mut curves: std::collections::BTreeMap<String, Vec<(f64, f64)>> =
        std::collections::BTreeMap::new();
    for line in text.lines().skip(2) {
        let mut it = line.split(',');
        let b = it.next().unwrap().to_string();
        let x: f64 = it.next().unwrap().parse().unwrap();
        let y: f64 = it.next().unwrap().parse().unwrap();
        curves.entry(b).or_default().push((x, y));
    }
    assert_eq!(curves.len(), 3);
    for (b, pts) in &curves {
        assert_eq!(pts.len(), 1024);
        assert!(pts.iter().all(|(_, y)| *y > 0.0), "B={b}: density not strictly positive");
        let mass: f64 =
            pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
        let peak = pts.iter().map(|(_, y)| *y).fold(0.0, f64::max);
        let mut modes = 0;
        for i in 1..pts.len() - 1 {
            if pts[i].1 > pts[i - 1].1 && pts[i].1 >= pts[i + 1].1 && pts[i].1 > 0.01 * peak {
                modes += 1;
            }
        }
        println!("check 11: B={b}: integral {mass:.6} (1 +- 1e-3), modes {modes} (= 1)");
        assert!((mass - 1.0).abs() <= 1e-3);
        assert_eq!(modes, 1);
    }

    // far-window normality: at B = 50 the standardized shift sample is close
    // to Gaussian (the linear term dominates)
    let p = TransitionParams::new(2.0, 50.0).unwrap();
    let law = analytics::transition_law(&p, Moments::goe());
    let n = 20_000usize;
    let mut xs: Vec<f64> = (0..n)
        .map(|i| {
            let g2 = law.mean2
                + law.var2.sqrt() * Stream::for_cell(4141, domain::TRIAL, i as u64, 7).next_normal();
            analytics::q_of_x(g2, &p).unwrap()
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0)).sqrt();
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = norm_cdf((x - mean) / sd);
        d = d.max(f - i as f64 / nf).max((i as f64 + 1.0) / nf - f);
    }
    println!("check 11: B=50 standardized sample vs fitted normal: KS D {d:.4} (<= 0.02)");
    assert!(d <= 0.02);
}
