//! End-to-end acceptance checks. Runs without the libtest harness so that
//! each criterion prints one PASS/FAIL line with its measurement and
//! runtime; the process exits non-zero if any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::time::{Duration, Instant};

use rand_distr::{Distribution, StandardNormal};

use fdensity::central::{median_curve, modal_curve};
use fdensity::curvespace::{inner_product, l2_distance, Curve, Grid};
use fdensity::fpca::{decompose, CovarianceMatrix, FpcaModel};
use fdensity::rng::substream;
use fdensity::score_density::{
    equivalence_gap, fit_score_densities, BandwidthRule, GapConfig, Kernel, ScoreDensityEstimator,
};
use fdensity::simulation::{
    generate_sample, run_mode_study, ModalEstimator, ModeStudyConfig, ModelId, SimScenario, Simulator,
};
use fdensity::smallball::{
    effective_dimension, q_approx, small_ball_mc, small_ball_mc_many, unit_ball_volume, validate_approximation,
    DecayKind, EigenDecaySpec, ProcessSpec, Regime, ScoreLaw, ValidationConfig,
};
use fdensity::stats::{median, spearman};
use fdensity::surrogate::log_density_from_scores;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn run(id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let ok = o.passed && in_time;
    let limit = budget.map_or_else(String::new, |b| format!(" / limit {:.0}s", b.as_secs_f64()));
    println!(
        "{} {:>2} {:<28} {} [{:.2}s{}]",
        if ok { "PASS" } else { "FAIL" },
        id,
        name,
        o.detail,
        elapsed.as_secs_f64(),
        limit
    );
    ok
}

fn cosine_basis(grid: &std::sync::Arc<Grid<f64>>, j: usize) -> Curve<f64> {
    Curve::from_fn(grid.clone(), |t| SQRT_2 * (PI * j as f64 * t).cos()).unwrap()
}

fn eigen_recovery() -> Outcome {
    let grid = Grid::uniform(0.0, 1.0, 201).unwrap();
    let k = |s: f64, t: f64| -> f64 {
        (1..=5).map(|j| (j as f64).powi(-3) * 2.0 * (PI * j as f64 * s).cos() * (PI * j as f64 * t).cos()).sum()
    };
    let cov = CovarianceMatrix::from_kernel(&grid, k).unwrap();
    let dec = decompose(&cov, &grid, 5).unwrap();
    let mut worst_theta: f64 = 0.0;
    let mut worst_align: f64 = 1.0;
    for j in 1..=5 {
        worst_theta = worst_theta.max((dec.eigenvalues()[j - 1] - (j as f64).powi(-3)).abs());
        let a = inner_product(&dec.eigenfunctions()[j - 1], &cosine_basis(&grid, j)).unwrap().abs();
        worst_align = worst_align.min(a);
    }
    outcome(
        worst_theta < 1e-3 && worst_align > 0.999,
        format!("max |θ̂-θ| = {worst_theta:.2e}, min |<ψ̂,ψ>| = {worst_align:.6}"),
    )
}

fn statistical_fpca() -> Outcome {
    let sim = Simulator::new(ModelId::Iii, 201).unwrap();
    let truth = ModelId::Iii.eigenvalues(3);
    let mut good = 0;
    for seed in 0..20 {
        let s = generate_sample(&SimScenario::new(ModelId::Iii, 1000, seed)).unwrap();
        let model = FpcaModel::fit(&s.sample, 3).unwrap();
        let ok = (0..3).all(|j| {
            let rel = (model.eigenvalues()[j] / truth[j] - 1.0).abs();
            let align = inner_product(&model.eigenfunctions()[j], &sim.eigenfunctions()[j]).unwrap().abs();
            rel < 0.2 && align > 0.95
        });
        good += usize::from(ok);
    }
    outcome(good >= 18, format!("{good}/20 seeds within tolerance (need 18)"))
}

fn kde_accuracy() -> Outcome {
    let phi0 = 1.0 / (2.0 * PI).sqrt();
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = substream(seed, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let est = ScoreDensityEstimator::with_rule(xs, Kernel::Gaussian, BandwidthRule::NormalReference).unwrap();
        let err = (est.evaluate(0.0) - phi0).abs();
        worst = worst.max(err);
        good += usize::from(err < 0.02);
    }
    outcome(good >= 18, format!("{good}/20 seeds with |f̂(0)-φ(0)| < 0.02 (worst {worst:.4})"))
}

fn equivalence_trend() -> Outcome {
    let sim = Simulator::new(ModelId::Iii, 201).unwrap();
    let mut small = Vec::new();
    let mut large = Vec::new();
    for seed in 0..20 {
        let cfg = GapConfig {
            component: 1,
            n_list: vec![400, 1600],
            n_test: 50,
            kernel: Kernel::Gaussian,
            radius: None,
            seed,
        };
        let rows = equivalence_gap(&sim, &cfg).unwrap();
        small.push(rows[0].scaled_max_gap);
        large.push(rows[1].scaled_max_gap);
    }
    let (a, b) = (median(&small), median(&large));
    outcome(b < a, format!("median scaled max gap n=400: {a:.4}, n=1600: {b:.4}"))
}

fn geometric_process() -> ProcessSpec {
    let decay = EigenDecaySpec::new(DecayKind::Geometric(0.5), 15).unwrap();
    ProcessSpec::new(decay, ScoreLaw::Gaussian, vec![]).unwrap()
}

/// Smallest radius resolving dimension `r` under the λ-rule.
fn resolving_radius(spec: &ProcessSpec, r: usize, lambda: f64) -> f64 {
    (lambda * lambda * spec.decay().theta(r + 1) * 1.001).sqrt()
}

fn small_ball_approximation() -> Outcome {
    let spec = geometric_process();
    let radii: Vec<f64> = (3..=5).map(|r| resolving_radius(&spec, r, 3.0)).collect();
    let cfg = ValidationConfig { regime: Regime::Exponential, lambda: 3.0, n_mc: 2_000_000, seed: 2024 };
    let reports = validate_approximation(&spec, &radii, &cfg).unwrap();
    let dims: Vec<usize> = reports.iter().map(|r| r.r).collect();
    let ok = dims == [3, 4, 5]
        && reports.iter().all(|r| r.p_mc.hits >= 500 && r.per_dim_error <= 0.35);
    let parts: Vec<String> = reports
        .iter()
        .map(|r| format!("r={} err={:.3} hits={}", r.r, r.per_dim_error, r.p_mc.hits))
        .collect();
    outcome(ok, parts.join(", "))
}

fn surrogate_monotonicity() -> Outcome {
    let spec = geometric_process();
    let h = resolving_radius(&spec, 4, 3.0);
    let r = effective_dimension(spec.decay(), h, Regime::Exponential, 3.0, None).unwrap();
    let mut rng = substream(77, 0);
    let mut log_p = Vec::new();
    let mut surrogate = Vec::new();
    for c in 0..30u64 {
        let center: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
        let at = spec.recentered(center).unwrap();
        let p = small_ball_mc(&at, h, 1_000_000, 1000 + c).unwrap();
        log_p.push(p.estimate.ln());
        surrogate.push(at.log_density_sum(r));
    }
    let rho = spearman(&log_p, &surrogate);
    outcome(r == 4 && rho >= 0.9, format!("r={r}, spearman = {rho:.4}"))
}

fn mode_study_orderings() -> Outcome {
    let uni = ModeStudyConfig {
        models: vec![ModelId::I, ModelId::Iii, ModelId::Iv],
        replications: 100,
        n: 100,
        truncations: vec![1, 2, 3, 4],
        estimators: vec![ModalEstimator::Univariate],
        seed: 11,
        ..Default::default()
    };
    let rows = run_mode_study(&uni).unwrap();
    let imse = |rows: &[fdensity::simulation::ModeStudyRow], m: ModelId, e: ModalEstimator, t: usize| {
        rows.iter()
            .find(|r| r.model == m && r.estimator == e && r.truncation == t)
            .map(|r| r.imse)
            .unwrap()
    };
    use ModalEstimator::{Multivariate as Mv, Univariate as Uv};
    let mut checks = Vec::new();
    for m in [ModelId::Iii, ModelId::Iv] {
        let (a, b) = (imse(&rows, m, Uv, 1), imse(&rows, m, Uv, 4));
        checks.push((format!("{m}: T1 {a:.4} <= T4 {b:.4}"), a <= b));
    }
    let (a, b) = (imse(&rows, ModelId::I, Uv, 3), imse(&rows, ModelId::I, Uv, 1));
    checks.push((format!("(i): T3 {a:.4} <= T1 {b:.4}"), a <= b));

    let both = ModeStudyConfig {
        models: vec![ModelId::I],
        replications: 50,
        n: 100,
        truncations: vec![2, 3, 4],
        estimators: vec![Uv, Mv],
        seed: 12,
        ..Default::default()
    };
    let rows = run_mode_study(&both).unwrap();
    for t in 2..=4 {
        let (a, b) = (imse(&rows, ModelId::I, Uv, t), imse(&rows, ModelId::I, Mv, t));
        checks.push((format!("(i) T{t}: uni {a:.4} <= multi {b:.4}"), a <= b));
    }
    let ok = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(s, ok)| if *ok { s.clone() } else { format!("{s} VIOLATED") })
        .collect();
    outcome(ok, detail.join("; "))
}

fn gaussian_coincidence() -> Outcome {
    let mut good = 0;
    let mut worst = Vec::new();
    for seed in 0..20 {
        let s = generate_sample(&SimScenario::new(ModelId::Iii, 1000, 500 + seed)).unwrap();
        let model = FpcaModel::fit(&s.sample, 4).unwrap();
        let dens = fit_score_densities(&model, Kernel::Gaussian, BandwidthRule::NormalReference).unwrap();
        let mean = model.mean().clone();
        let mode = modal_curve(&model, &dens, 4).unwrap();
        let med = median_curve(&s.sample, 1e-8, 500).unwrap().curve;
        let d = [
            l2_distance(&mean, &mode).unwrap(),
            l2_distance(&mean, &med).unwrap(),
            l2_distance(&mode, &med).unwrap(),
        ];
        let max = d.iter().copied().fold(0.0, f64::max);
        worst.push(max);
        good += usize::from(max < 0.15);
    }
    worst.sort_by(f64::total_cmp);
    outcome(
        good >= 18,
        format!("{good}/20 seeds with all pairwise distances < 0.15 (median max {:.3}, worst {:.3})", median(&worst), worst[19]),
    )
}

fn exact_arithmetic() -> Outcome {
    let vols = [unit_ball_volume(1), unit_ball_volume(2), unit_ball_volume(3)];
    let want = [2.0, PI, 4.0 * PI / 3.0];
    let vol_err = vols.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut q_err: f64 = 0.0;
    for (theta, f1, h) in [(1.0, 0.398_942_280_401_432_7, 0.2), (0.25, 0.1, 0.05), (3.0, 0.7, 1.3)] {
        let spec = ProcessSpec::new(EigenDecaySpec::explicit(vec![theta, theta / 2.0]).unwrap(), ScoreLaw::Gaussian, vec![]).unwrap();
        let q = q_approx(&spec, h, 1, &[f1], &[0.0]).unwrap();
        let exact = 2.0 * h * theta.powf(-0.5) * f1;
        q_err = q_err.max((q / exact - 1.0).abs());
    }
    outcome(vol_err <= 1e-12 && q_err <= 1e-12, format!("volume err {vol_err:.1e}, q relative err {q_err:.1e}"))
}

fn permutation_invariance() -> Outcome {
    use rand::seq::SliceRandom;
    use rand::Rng as _;
    let mut rng = substream(99, 0);
    let mut mismatches = 0;
    let trials = 300;
    for _ in 0..trials {
        let r = rng.random_range(2..12);
        let dens: Vec<ScoreDensityEstimator<f64>> = (0..r)
            .map(|_| {
                let n = rng.random_range(1..40);
                let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
                let kernel = if rng.random_bool(0.5) { Kernel::Gaussian } else { Kernel::Epanechnikov };
                ScoreDensityEstimator::new(xs, kernel, rng.random_range(0.05..2.0)).unwrap()
            })
            .collect();
        let scores: Vec<f64> = (0..r).map(|_| rng.random_range(-6.0..6.0)).collect();
        let base = log_density_from_scores(&dens, &scores, r).unwrap().value;
        let mut idx: Vec<usize> = (0..r).collect();
        idx.shuffle(&mut rng);
        let pd: Vec<_> = idx.iter().map(|&k| dens[k].clone()).collect();
        let ps: Vec<f64> = idx.iter().map(|&k| scores[k]).collect();
        let perm = log_density_from_scores(&pd, &ps, r).unwrap().value;
        mismatches += usize::from(base.to_bits() != perm.to_bits());
    }
    outcome(mismatches == 0, format!("{mismatches}/{trials} permutations changed ℓ̂ bits"))
}

/// Debug output prints every float in round-trip form, so equal strings
/// mean bit-identical results.
fn pipeline_fingerprint() -> String {
    let s = generate_sample(&SimScenario::new(ModelId::I, 150, 3).with_grid_points(101)).unwrap();
    let model = FpcaModel::fit(&s.sample, 6).unwrap();
    let dens = fit_score_densities(&model, Kernel::Gaussian, BandwidthRule::NormalReference).unwrap();
    let modes: Vec<f64> = dens.iter().map(|d| d.mode()).collect();
    let lds: Vec<f64> = (0..model.sample_size())
        .map(|i| log_density_from_scores(&dens, &model.score_row(i), 4).unwrap().value)
        .collect();
    let med = median_curve(&s.sample, 1e-8, 200).unwrap();

    let spec = geometric_process();
    let radii: Vec<f64> = (3..=4).map(|r| resolving_radius(&spec, r, 3.0)).collect();
    let cfg = ValidationConfig { n_mc: 300_000, seed: 5, ..Default::default() };
    let reports = validate_approximation(&spec, &radii, &cfg).unwrap();
    let many = small_ball_mc_many(&spec, &radii, 200_000, 8).unwrap();

    let study = run_mode_study(&ModeStudyConfig {
        models: vec![ModelId::Ii],
        replications: 12,
        n: 60,
        m: 51,
        truncations: vec![1, 3],
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let gap = equivalence_gap(
        &Simulator::new(ModelId::Iii, 51).unwrap(),
        &GapConfig { component: 1, n_list: vec![100, 200], n_test: 10, kernel: Kernel::Gaussian, radius: None, seed: 1 },
    )
    .unwrap();
    format!("{model:?}{modes:?}{lds:?}{med:?}{reports:?}{many:?}{study:?}{gap:?}")
}

fn determinism() -> Outcome {
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(pipeline_fingerprint)
    };
    let one = in_pool(1);
    let four = in_pool(4);
    let again = in_pool(4);
    outcome(
        one == four && four == again,
        format!("fingerprints of {} bytes identical across 1/4/4 threads: {}", one.len(), one == four && four == again),
    )
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let results = [
        run(1, "eigen recovery", secs(5), eigen_recovery),
        run(2, "statistical fpca", secs(30), statistical_fpca),
        run(3, "kde pointwise accuracy", None, kde_accuracy),
        run(4, "density equivalence trend", secs(120), equivalence_trend),
        run(5, "small-ball approximation", secs(120), small_ball_approximation),
        run(6, "surrogate monotonicity", None, surrogate_monotonicity),
        run(7, "mode-study orderings", secs(600), mode_study_orderings),
        run(8, "gaussian coincidence", None, gaussian_coincidence),
        run(9, "exact arithmetic", None, exact_arithmetic),
        run(10, "permutation invariance", None, permutation_invariance),
        run(11, "determinism", None, determinism),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
