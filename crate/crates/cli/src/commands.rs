//! The pipelines behind each subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fdensity::central::{median_curve, modal_curve};
use fdensity::fpca::variance_explained;
use fdensity::score_density::{fit_score_densities, BandwidthRule};
use fdensity::simulation::{generate_sample, run_mode_study, ModalEstimator, ModeStudyConfig, ModelId, SimScenario};
use fdensity::smallball::{
    validate_approximation, DecayKind, EigenDecaySpec, ProcessSpec, Regime, ScoreLaw, ValidationConfig,
    DEFAULT_LAMBDA, DEFAULT_TRUNCATION,
};
use fdensity::surrogate::{density_product_grid, log_density_from_scores, rank_by_density, ScorePlaneGrid};
use fdensity::{FpcaModel, FunctionalSample, ScoreDensityEstimator};

use crate::config::{positive, Config};
use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, read_curves, write_curves, write_json, write_table};

pub const DEFAULT_COMPONENTS: usize = 20;
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const DENSITY_GRID_POINTS: usize = 201;
pub const MEDIAN_TOLERANCE: f64 = 1e-8;
pub const MEDIAN_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub component: usize,
    pub eigenvalue: f64,
    pub proportion: f64,
    pub cumulative: f64,
}

/// Contents of `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub sample_size: usize,
    pub components: usize,
    pub active_components: usize,
    pub grid: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub variance_explained: Vec<VarianceRow>,
    pub mean: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityComponent {
    pub component: usize,
    pub bandwidth: f64,
    pub mode: f64,
    pub density_at_mode: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Contents of `densities.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitiesArtifact {
    pub kernel: String,
    pub components: Vec<DensityComponent>,
}

/// Contents of `truth.json` written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthArtifact {
    pub model: String,
    pub seed: u64,
    pub eigenvalues: Vec<f64>,
    pub modal_curve: Vec<f64>,
}

fn prepare_out(cfg: &Config) -> CliResult<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn fit_model(sample: &FunctionalSample<f64>, cfg: &Config) -> CliResult<FpcaModel<f64>> {
    let j = positive("components", cfg.components.unwrap_or(DEFAULT_COMPONENTS))?;
    let model = FpcaModel::fit(sample, j)?;
    if model.active_components() == 0 {
        return Err(CliError::Numeric("zero total variance: every eigenvalue is below the floor".into()));
    }
    Ok(model)
}

pub fn model_artifact(model: &FpcaModel<f64>) -> CliResult<ModelArtifact> {
    let eigs = model.eigenvalues();
    let total: f64 = eigs.iter().sum();
    let variance_explained = (1..=eigs.len())
        .map(|j| {
            Ok(VarianceRow {
                component: j,
                eigenvalue: eigs[j - 1],
                proportion: eigs[j - 1] / total,
                cumulative: variance_explained(model, j)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ModelArtifact {
        sample_size: model.sample_size(),
        components: model.components(),
        active_components: model.active_components(),
        grid: model.grid().points().to_vec(),
        eigenvalues: eigs.to_vec(),
        variance_explained,
        mean: model.mean().values().to_vec(),
        eigenfunctions: model.eigenfunctions().iter().map(|c| c.values().to_vec()).collect(),
    })
}

fn write_scores(path: &Path, model: &FpcaModel<f64>) -> CliResult<()> {
    let mut header = vec!["curve".to_string()];
    header.extend((1..=model.active_components()).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..model.sample_size())
        .map(|i| {
            std::iter::once(i.to_string())
                .chain(model.score_row(i).into_iter().map(fmt_f64))
                .collect()
        })
        .collect();
    write_table(path, &header, rows)
}

/// `fpca`: writes `model.json` and `scores.csv`.
pub fn run_fpca(input: &Path, cfg: &Config) -> CliResult<Vec<PathBuf>> {
    let sample = read_curves(input)?;
    let model = fit_model(&sample, cfg)?;
    let dir = prepare_out(cfg)?;
    let model_path = dir.join("model.json");
    write_json(&model_path, &model_artifact(&model)?)?;
    let scores_path = dir.join("scores.csv");
    write_scores(&scores_path, &model)?;
    Ok(vec![model_path, scores_path])
}

fn axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

fn padded_range(est: &ScoreDensityEstimator<f64>) -> (f64, f64) {
    let (lo, hi) = est.data_range();
    let pad = 3.0 * est.bandwidth();
    (lo - pad, hi + pad)
}

pub fn densities_artifact(dens: &[ScoreDensityEstimator<f64>]) -> DensitiesArtifact {
    let kernel = dens.first().map_or("gaussian", |d| d.kernel().name()).to_string();
    let components = dens
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let (lo, hi) = padded_range(d);
            let grid = axis(lo, hi, DENSITY_GRID_POINTS);
            let density = grid.iter().map(|&u| d.evaluate(u)).collect();
            DensityComponent {
                component: j + 1,
                bandwidth: d.bandwidth(),
                mode: d.mode(),
                density_at_mode: d.evaluate(d.mode()),
                grid,
                density,
            }
        })
        .collect();
    DensitiesArtifact { kernel, components }
}

/// `analyze`: the full pipeline, seven artifacts.
pub fn run_analysis(input: &Path, cfg: &Config) -> CliResult<Vec<PathBuf>> {
    let sample = read_curves(input)?;
    let model = fit_model(&sample, cfg)?;
    let active = model.active_components();
    let n = sample.len();

    let rule = match cfg.bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => BandwidthRule::Fixed(h),
        Some(h) => return Err(CliError::input(format!("bandwidth must be positive, got {h}"))),
        None => BandwidthRule::NormalReference,
    };
    let dens = fit_score_densities(&model, cfg.kernel()?, rule)?;

    let rs = cfg.r.clone().unwrap_or_else(|| (1..=active.min(3)).collect());
    if rs.is_empty() {
        return Err(CliError::input("r list is empty"));
    }
    for &r in &rs {
        if r == 0 || r > active {
            return Err(CliError::input(format!("r = {r} is outside 1..={active} (active components)")));
        }
    }
    let truncation = positive("truncation", cfg.truncation.unwrap_or(active.min(2)))?;
    if truncation > active {
        return Err(CliError::input(format!("truncation {truncation} exceeds the {active} active components")));
    }
    let groups = positive("groups", cfg.groups.unwrap_or(n.min(4)))?;
    let contour_points = positive("contour_points", cfg.contour_points.unwrap_or(41))?;

    let dir = prepare_out(cfg)?;
    let mut written = Vec::new();

    let p = dir.join("model.json");
    write_json(&p, &model_artifact(&model)?)?;
    written.push(p);

    let p = dir.join("scores.csv");
    write_scores(&p, &model)?;
    written.push(p);

    let p = dir.join("densities.json");
    write_json(&p, &densities_artifact(&dens))?;
    written.push(p);

    let p = dir.join("logdensity.csv");
    let mut header = vec!["curve".to_string()];
    header.extend(rs.iter().map(|r| format!("r{r}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..n)
        .map(|i| {
            let scores = model.score_row(i);
            let mut row = vec![i.to_string()];
            for &r in &rs {
                row.push(fmt_f64(log_density_from_scores(&dens, &scores, r)?.value));
            }
            Ok(row)
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_table(&p, &header_refs, rows)?;
    written.push(p);

    let p = dir.join("groups.csv");
    let group_r = *rs.iter().max().expect("non-empty");
    let g = rank_by_density(&model, &dens, group_r, groups)?;
    let mut rank = vec![0; n];
    for (k, &i) in g.order.iter().enumerate() {
        rank[i] = k;
    }
    let rows = (0..n)
        .map(|i| {
            vec![
                i.to_string(),
                group_r.to_string(),
                fmt_f64(g.log_density[i]),
                rank[i].to_string(),
                g.groups[i].to_string(),
            ]
        })
        .collect();
    write_table(&p, &["curve", "r", "log_density", "rank", "group"], rows)?;
    written.push(p);

    let p = dir.join("contour.csv");
    let mut rows = Vec::new();
    if active >= 2 {
        let spec = ScorePlaneGrid {
            u_range: padded_range(&dens[0]),
            v_range: padded_range(&dens[1]),
            u_count: contour_points,
            v_count: contour_points,
        };
        let surface = density_product_grid(&model, &dens, (0, 1), &spec)?;
        for (a, &u) in surface.u.iter().enumerate() {
            for (b, &v) in surface.v.iter().enumerate() {
                rows.push(vec!["grid".into(), fmt_f64(u), fmt_f64(v), fmt_f64(surface.get(a, b))]);
            }
        }
        for &(u, v, f) in &surface.data_points {
            rows.push(vec!["data".into(), fmt_f64(u), fmt_f64(v), fmt_f64(f)]);
        }
    } else {
        eprintln!("warning: only one active component; contour.csv has no rows");
    }
    write_table(&p, &["kind", "u", "v", "product"], rows)?;
    written.push(p);

    let p = dir.join("central.csv");
    let mode = modal_curve(&model, &dens, truncation)?;
    let median = median_curve(&sample, MEDIAN_TOLERANCE, MEDIAN_MAX_ITER)?;
    if !median.converged {
        eprintln!("warning: median iteration stopped after {} steps", median.iterations);
    }
    let rows = model
        .grid()
        .points()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            vec![
                fmt_f64(t),
                fmt_f64(model.mean().values()[k]),
                fmt_f64(mode.values()[k]),
                fmt_f64(median.curve.values()[k]),
            ]
        })
        .collect();
    write_table(&p, &["t", "mean", "mode", "median"], rows)?;
    written.push(p);

    Ok(written)
}

fn parse_number(text: &str, what: &str) -> CliResult<f64> {
    text.trim()
        .parse()
        .map_err(|_| CliError::input(format!("cannot parse {what} '{text}'")))
}

/// Parses `power:<a>`, `geometric:<rho>`, `gaussian:<c>` or
/// `explicit:<t1>,<t2>,...`.
pub fn parse_decay(text: &str, jmax: Option<usize>) -> CliResult<EigenDecaySpec> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| CliError::input(format!("decay '{text}' must look like kind:value")))?;
    let trunc = jmax.unwrap_or(DEFAULT_TRUNCATION);
    let spec = match kind.trim().to_ascii_lowercase().as_str() {
        "power" => EigenDecaySpec::new(DecayKind::Power(parse_number(arg, "exponent")?), trunc),
        "geometric" => EigenDecaySpec::new(DecayKind::Geometric(parse_number(arg, "ratio")?), trunc),
        "gaussian" => {
            let c = parse_number(arg, "rate")?;
            match jmax {
                Some(j) => EigenDecaySpec::new(DecayKind::GaussianLike(c), j),
                None => EigenDecaySpec::gaussian_like(c),
            }
        }
        "explicit" => {
            if jmax.is_some() {
                return Err(CliError::input("jmax does not apply to explicit eigenvalues"));
            }
            let values = arg
                .split(',')
                .map(|v| parse_number(v, "eigenvalue"))
                .collect::<CliResult<Vec<f64>>>()?;
            EigenDecaySpec::explicit(values)
        }
        other => return Err(CliError::input(format!("unknown decay kind '{other}'"))),
    };
    Ok(spec?)
}

pub const SMALLBALL_HEADER: [&str; 16] = [
    "h",
    "r",
    "regime",
    "p_mc",
    "ci_lower",
    "ci_upper",
    "hits",
    "draws",
    "q_hat",
    "log_q_hat",
    "leading_order",
    "log_leading_order",
    "log_ratio",
    "per_dim_error",
    "unreliable",
    "truncation_negligible",
];

/// `smallball`: writes `smallball.csv`, one row per radius in decreasing
/// order.
pub fn run_smallball(cfg: &Config) -> CliResult<PathBuf> {
    let decay_text = cfg
        .decay
        .as_deref()
        .ok_or_else(|| CliError::input("smallball needs a decay, e.g. --decay geometric:0.5"))?;
    let decay = parse_decay(decay_text, cfg.jmax)?;
    let law: ScoreLaw = match &cfg.law {
        Some(l) => l.parse()?,
        None => ScoreLaw::Gaussian,
    };
    let spec = ProcessSpec::new(decay, law, cfg.center.clone().unwrap_or_default())?;
    let regime: Regime = match &cfg.regime {
        Some(r) => r.parse()?,
        None => Regime::Exponential,
    };
    let lambda = cfg.lambda.unwrap_or(DEFAULT_LAMBDA);
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CliError::input(format!("lambda must be positive, got {lambda}")));
    }
    let n_mc = positive("mc_samples", cfg.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES))?;
    let mut radii = cfg.radii.clone().unwrap_or_default();
    if let Some(h) = radii.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(CliError::input(format!("radii must be positive, got {h}")));
    }
    radii.sort_by(|a, b| b.total_cmp(a));
    if radii.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::input("radii contain duplicates"));
    }

    let vcfg = ValidationConfig { regime, lambda, n_mc, seed: cfg.seed() };
    let reports = validate_approximation(&spec, &radii, &vcfg)?;
    let dir = prepare_out(cfg)?;
    let path = dir.join("smallball.csv");
    let rows = reports
        .iter()
        .map(|x| {
            vec![
                fmt_f64(x.radius),
                x.r.to_string(),
                regime.label().to_string(),
                fmt_f64(x.p_mc.estimate),
                fmt_f64(x.p_mc.lower),
                fmt_f64(x.p_mc.upper),
                x.p_mc.hits.to_string(),
                x.p_mc.draws.to_string(),
                fmt_f64(x.q_hat),
                fmt_f64(x.log_q_hat),
                fmt_f64(x.asymptotic.value),
                fmt_f64(x.asymptotic.log_value),
                fmt_f64(x.log_ratio),
                fmt_f64(x.per_dim_error),
                x.unreliable.to_string(),
                x.truncation_negligible.map_or_else(|| "na".to_string(), |b| b.to_string()),
            ]
        })
        .collect();
    write_table(&path, &SMALLBALL_HEADER, rows)?;
    Ok(path)
}

/// `simulate`: writes `curves.csv`, `scores.csv` (true scores) and
/// `truth.json`.
pub fn run_simulate(cfg: &Config) -> CliResult<Vec<PathBuf>> {
    let model: ModelId = cfg.model.as_deref().unwrap_or("iii").parse()?;
    let n = positive("n", cfg.n.unwrap_or(100))?;
    let m = cfg.m.unwrap_or(fdensity::simulation::DEFAULT_GRID_POINTS);
    let seed = cfg.seed();
    let sim = generate_sample(&SimScenario::new(model, n, seed).with_grid_points(m))?;
    let dir = prepare_out(cfg)?;

    let curves = dir.join("curves.csv");
    write_curves(&curves, &sim.sample)?;

    let scores = dir.join("scores.csv");
    let k = sim.eigenvalues.len();
    let mut header = vec!["curve".to_string()];
    header.extend((1..=k).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = sim
        .scores
        .iter()
        .enumerate()
        .map(|(i, s)| std::iter::once(i.to_string()).chain(s.iter().map(|&v| fmt_f64(v))).collect())
        .collect();
    write_table(&scores, &header, rows)?;

    let truth = dir.join("truth.json");
    write_json(
        &truth,
        &TruthArtifact {
            model: model.label().to_string(),
            seed,
            eigenvalues: sim.eigenvalues.clone(),
            modal_curve: sim.modal_curve.values().to_vec(),
        },
    )?;
    Ok(vec![curves, scores, truth])
}

/// `mode-study`: writes `mode_study.csv`.
pub fn run_mode_study_cmd(cfg: &Config) -> CliResult<PathBuf> {
    let defaults = ModeStudyConfig::default();
    let models = match &cfg.models {
        Some(v) => v.iter().map(|s| s.parse()).collect::<Result<Vec<ModelId>, _>>()?,
        None => defaults.models,
    };
    let estimators = match &cfg.estimators {
        Some(v) => v.iter().map(|s| s.parse()).collect::<Result<Vec<ModalEstimator>, _>>()?,
        None => defaults.estimators,
    };
    let study = ModeStudyConfig {
        models,
        replications: positive("replications", cfg.replications.unwrap_or(defaults.replications))?,
        n: positive("n", cfg.n.unwrap_or(defaults.n))?,
        m: cfg.m.unwrap_or(defaults.m),
        truncations: cfg.truncations.clone().unwrap_or(defaults.truncations),
        estimators,
        kernel: cfg.kernel()?,
        seed: cfg.seed(),
    };
    let rows = run_mode_study(&study)?;
    let dir = prepare_out(cfg)?;
    let path = dir.join("mode_study.csv");
    let table = rows
        .iter()
        .map(|r| {
            vec![
                r.model.label().to_string(),
                r.estimator.label().to_string(),
                r.truncation.to_string(),
                r.replications.to_string(),
                fmt_f64(r.imse),
            ]
        })
        .collect();
    write_table(&path, &["model", "estimator", "truncation", "replications", "imse"], table)?;
    Ok(path)
}
