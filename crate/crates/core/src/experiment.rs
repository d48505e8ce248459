//! Configured experiment runs: a closed registry of named experiments, each
//! parallel across seeds and deterministic per seed, emitting CSV rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::advantage::{advantage_pipeline, default_nu, q_as_reward_gap, Planner};
use crate::error::{Error, Result};
use crate::fixtures::{self, DpoLadder, RewardLadder};
use crate::mdp::random::{random_mdp, random_policy, RandomMdpConfig};
use crate::mdp::{
    default_cap, deterministic_policies, enumerate_trajectories, optimal_value, policy_return,
    value_tables, LayeredMdp, MdpSpec, TabularPolicy,
};
use crate::measure_lemma::{
    cancellation_functional, lemma_certificate, random_functional, tightness_probe, ProbeFamily,
};
use crate::outcome::{
    collect_outcome_dataset, outcome_to_process, population_excess_risk, sup_reward_evaluation_gap,
};
use crate::preference::{collect_preferences, dpo_fit, kl_optimal_policy, mle_reward, sigmoid};
use crate::solvers::{
    armor_total_reward, calibrate_alpha_constant, choose_alpha, ModelClass, Solver, VersionSpace,
    DEFAULT_ALPHA_CONSTANT,
};

/// Names accepted in `experiment = "..."`.
pub const REGISTRY: [&str; 10] = [
    "thm31_rate",
    "lemma_sweep",
    "tightness",
    "dpo_rate",
    "mle_pref_rate",
    "armor_coverage",
    "advantage_pipeline",
    "q_counterexample",
    "advantage_identity",
    "bt_calibration",
];

/// Slope window for the `n^{-1/2}` rate checks on reward evaluation error.
pub const REWARD_RATE_WINDOW: (f64, f64) = (-0.65, -0.35);
/// Slope window for the DPO suboptimality rate.
pub const DPO_RATE_WINDOW: (f64, f64) = (-0.7, -0.3);
/// Tolerance for exact identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Derive the seed for replicate `i` from a base seed (splitmix64 mix).
pub fn sub_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, i))
}

/// Parsed experiment config. Relative paths are resolved against the
/// directory of the config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub k_grid: Vec<usize>,
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    /// Reward differences for `bt_calibration`.
    #[serde(default)]
    pub reward_gaps: Vec<f64>,
    /// Instances (or probes) per seed.
    pub trials: Option<usize>,
    pub enumeration_cap: Option<usize>,
    pub output: Option<PathBuf>,
    /// MDP spec file replacing the built-in instance, where supported.
    pub mdp: Option<PathBuf>,
    /// Model class file for `armor_coverage`.
    pub model_class: Option<PathBuf>,
    /// Behaviour policy rows for `armor_coverage` with a custom model class.
    pub behaviour: Option<Vec<Vec<Vec<f64>>>>,
    /// Confidence level for the version space.
    pub delta: Option<f64>,
    /// Downstream solver for `thm31_rate`.
    pub solver: Option<String>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::UnresolvableSpec {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn cap(&self) -> usize {
        self.enumeration_cap.unwrap_or_else(default_cap)
    }

    pub fn output_path(&self) -> Option<PathBuf> {
        self.output.as_deref().map(|p| self.resolve(p))
    }

    fn need(&self, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("`{}` needs {what}", self.experiment)))
        }
    }

    /// Checks names, grids and referenced files without running anything.
    pub fn validate(&self) -> Result<()> {
        if !REGISTRY.contains(&self.experiment.as_str()) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed grid is empty".into()));
        }
        if self.enumeration_cap == Some(0) {
            return Err(Error::InvalidConfig("enumeration_cap must be positive".into()));
        }
        if self.n_grid.contains(&0) || self.k_grid.contains(&0) {
            return Err(Error::InvalidConfig("grid sizes must be positive".into()));
        }
        match self.experiment.as_str() {
            "thm31_rate" | "mle_pref_rate" => {
                self.need(self.n_grid.len() >= 3, "at least 3 sizes in n_grid")?
            }
            "dpo_rate" => {
                self.need(self.n_grid.len() >= 3, "at least 3 sizes in n_grid")?;
                self.need(!self.beta_grid.is_empty(), "a nonempty beta_grid")?;
                self.need(
                    self.beta_grid.iter().all(|b| *b > 0.0 && b.is_finite()),
                    "positive betas",
                )?;
            }
            "armor_coverage" => self.need(!self.n_grid.is_empty(), "a nonempty n_grid")?,
            "advantage_pipeline" => self.need(!self.k_grid.is_empty(), "a nonempty k_grid")?,
            "bt_calibration" => {
                self.need(!self.n_grid.is_empty(), "a nonempty n_grid")?;
                self.need(!self.reward_gaps.is_empty(), "nonempty reward_gaps")?;
                self.need(
                    self.reward_gaps.iter().all(|g| (0.0..=1.0).contains(g)),
                    "reward_gaps in [0, 1]",
                )?;
            }
            _ => {}
        }
        if self.trials == Some(0) {
            return Err(Error::InvalidConfig("trials must be positive".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {d}")));
            }
        }
        if let Some(name) = &self.solver {
            Solver::from_name(name).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        self.load_mdp()?;
        self.load_model_class()?;
        Ok(())
    }

    fn load_mdp(&self) -> Result<Option<LayeredMdp>> {
        let Some(path) = &self.mdp else {
            return Ok(None);
        };
        let path = self.resolve(path);
        let spec = MdpSpec::load(&path).map_err(|e| unresolvable(&path, e))?;
        spec.build().map(Some).map_err(|e| unresolvable(&path, e))
    }

    fn load_model_class(&self) -> Result<Option<ModelClass>> {
        let Some(path) = &self.model_class else {
            return Ok(None);
        };
        let path = self.resolve(path);
        ModelClass::load(&path)
            .map(Some)
            .map_err(|e| unresolvable(&path, e))
    }
}

fn unresolvable(path: &Path, e: Error) -> Error {
    match e {
        Error::UnresolvableSpec { .. } => e,
        other => Error::UnresolvableSpec {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// One CSV row. `seed = None` marks a summary row.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub seed: Option<u64>,
    pub grid: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentResult {
    pub rows: Vec<Row>,
}

impl ExperimentResult {
    /// Summary rows whose metric starts with `pass`.
    pub fn pass_flags(&self) -> impl Iterator<Item = &Row> {
        self.rows
            .iter()
            .filter(|r| r.seed.is_none() && r.metric.starts_with("pass"))
    }

    pub fn passed(&self) -> bool {
        self.pass_flags().all(|r| r.value == 1.0)
    }

    /// First summary row with this metric (and grid, when given).
    pub fn summary(&self, metric: &str, grid: Option<&str>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.seed.is_none() && r.metric == metric && grid.map_or(true, |g| r.grid == g))
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,seed,grid,metric,value\n");
        for r in &self.rows {
            let seed = r.seed.map_or_else(|| "summary".to_string(), |s| s.to_string());
            writeln!(out, "{},{},{},{},{:.16e}", r.experiment, seed, r.grid, r.metric, r.value)
                .expect("writing to a string");
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Least-squares line through `(ln n, ln error)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(&(_, e)) = points.iter().find(|(n, e)| !(*e > 0.0) || !(*n > 0.0)) {
        return Err(Error::NonPositiveError(e));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (sse / m).sqrt(),
    })
}

/// Instances shared by every seed, built once.
struct Context<'a> {
    cfg: &'a ExperimentConfig,
    cap: usize,
    mdp: Option<LayeredMdp>,
    ladder: Option<RewardLadder>,
    dpo: Vec<DpoLadder>,
    armor: Option<ArmorSetup>,
}

struct ArmorSetup {
    mdp: LayeredMdp,
    pi_off: TabularPolicy,
    models: ModelClass,
    rewards: Option<crate::outcome::RewardClass>,
    policies: Vec<TabularPolicy>,
    /// `(n, alpha constant, alpha)`.
    alphas: Vec<(usize, f64, f64)>,
}

/// Seeds of the calibration runs for the version-space radius; disjoint from
/// the configured seeds by construction of the stream.
const CALIBRATION_STREAM: u64 = 0xA1FA_CA11;
const CALIBRATION_RUNS: u64 = 200;
const CALIBRATION_GRID: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
const CALIBRATION_COVERAGE: f64 = 0.99;

fn prepare<'a>(cfg: &'a ExperimentConfig) -> Result<Context<'a>> {
    let cap = cfg.cap();
    let mut ctx = Context {
        cfg,
        cap,
        mdp: cfg.load_mdp()?,
        ladder: None,
        dpo: Vec::new(),
        armor: None,
    };
    match cfg.experiment.as_str() {
        "thm31_rate" | "mle_pref_rate" => ctx.ladder = Some(fixtures::reward_ladder()),
        "dpo_rate" => {
            ctx.dpo = cfg
                .beta_grid
                .iter()
                .map(|&b| fixtures::dpo_ladder(b, cap))
                .collect::<Result<_>>()?
        }
        "armor_coverage" => ctx.armor = Some(prepare_armor(cfg, cap)?),
        _ => {}
    }
    Ok(ctx)
}

fn prepare_armor(cfg: &ExperimentConfig, cap: usize) -> Result<ArmorSetup> {
    let (mdp, pi_off, models, rewards) = match cfg.load_model_class()? {
        Some(models) => {
            let truth = models.true_index.ok_or_else(|| {
                Error::InvalidConfig("model class needs `true_index` for armor_coverage".into())
            })?;
            let pi_off = match &cfg.behaviour {
                Some(rows) => TabularPolicy::new(rows.clone())?,
                None => TabularPolicy::uniform(models.shape()),
            };
            if !pi_off.matches(models.shape()) {
                return Err(Error::InvalidConfig("behaviour policy does not match the models".into()));
            }
            (models.candidates()[truth].clone(), pi_off, models, None)
        }
        None => {
            let inst = fixtures::armor_instance();
            (inst.mdp, inst.pi_off, inst.models, Some(inst.rewards))
        }
    };
    let truth = models.true_index.expect("checked above");
    let delta = cfg.delta.unwrap_or(0.05);
    let policies = deterministic_policies(mdp.shape(), cap)?;
    let mut alphas = Vec::new();
    for &n in &cfg.n_grid {
        let deficits: Vec<f64> = (0..CALIBRATION_RUNS)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(CALIBRATION_STREAM ^ n as u64, i);
                let data = collect_outcome_dataset(&mdp, &pi_off, n, &mut rng)?;
                Ok(VersionSpace::build(&models, &data, f64::INFINITY)?.deficit(truth))
            })
            .collect::<Result<_>>()?;
        let c = calibrate_alpha_constant(
            &deficits,
            models.len(),
            delta,
            &CALIBRATION_GRID,
            CALIBRATION_COVERAGE,
        )?
        .unwrap_or(DEFAULT_ALPHA_CONSTANT);
        alphas.push((n, c, choose_alpha(models.len(), delta, c)?));
    }
    Ok(ArmorSetup {
        mdp,
        pi_off,
        models,
        rewards,
        policies,
        alphas,
    })
}

/// Validates, then runs the configured experiment on a pool of `threads`
/// workers (0 = rayon default). Results do not depend on `threads`.
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        let ctx = prepare(cfg)?;
        let per_seed: Vec<Vec<Row>> = cfg
            .seeds
            .par_iter()
            .map(|&seed| run_seed(&ctx, seed))
            .collect::<Result<_>>()?;
        let mut rows: Vec<Row> = per_seed.into_iter().flatten().collect();
        let summary = summarize(&ctx, &rows)?;
        rows.extend(summary);
        Ok(ExperimentResult { rows })
    })
}

/// Runs and writes the CSV to the configured (or given) output path. No
/// file is written when the run fails.
pub fn run_to_file(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    threads: usize,
) -> Result<(ExperimentResult, Option<PathBuf>)> {
    let result = run(cfg, threads)?;
    let path = out.map(Path::to_path_buf).or_else(|| cfg.output_path());
    if let Some(path) = &path {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, result.to_csv())?;
    }
    Ok((result, path))
}

struct Rows<'a> {
    experiment: &'a str,
    seed: Option<u64>,
    rows: Vec<Row>,
}

impl<'a> Rows<'a> {
    fn new(experiment: &'a str, seed: Option<u64>) -> Self {
        Self {
            experiment,
            seed,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, grid: impl ToString, metric: &str, value: f64) {
        self.rows.push(Row {
            experiment: self.experiment.to_string(),
            seed: self.seed,
            grid: grid.to_string(),
            metric: metric.to_string(),
            value,
        });
    }

    fn flag(&mut self, grid: impl ToString, metric: &str, ok: bool) {
        self.push(grid, metric, if ok { 1.0 } else { 0.0 });
    }
}

fn run_seed(ctx: &Context<'_>, seed: u64) -> Result<Vec<Row>> {
    let mut out = Rows::new(&ctx.cfg.experiment, Some(seed));
    match ctx.cfg.experiment.as_str() {
        "q_counterexample" => q_counterexample(&mut out),
        "advantage_identity" => advantage_identity(ctx, seed, &mut out),
        "lemma_sweep" => lemma_sweep(ctx, seed, &mut out)?,
        "tightness" => tightness(ctx, seed, &mut out)?,
        "thm31_rate" => thm31_rate(ctx, seed, &mut out)?,
        "mle_pref_rate" => mle_pref_rate(ctx, seed, &mut out)?,
        "dpo_rate" => dpo_rate(ctx, seed, &mut out)?,
        "armor_coverage" => armor_coverage(ctx, seed, &mut out)?,
        "advantage_pipeline" => advantage_pipeline_runs(ctx, seed, &mut out)?,
        "bt_calibration" => bt_calibration(ctx, seed, &mut out)?,
        other => return Err(Error::UnknownExperiment(other.to_string())),
    }
    Ok(out.rows)
}

fn q_counterexample(out: &mut Rows<'_>) {
    let (mdp, mu) = fixtures::counterexample();
    let (_, gap) = q_as_reward_gap(&mdp, &mu);
    out.push("-", "gap", gap);
    let q = value_tables(&mdp, &mu, mdp.rewards()).q;
    for (h, s, a, x) in q.iter() {
        out.push(format!("h{h}_s{s}_a{a}"), "q", x);
    }
}

/// Random `(mdp, mu, pi)` triples: `J_{A^mu}(pi) = J(pi) - J(mu)` and the
/// optimum under `A^mu` is `J(pi*) - J(mu)`.
fn advantage_identity(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) {
    let trials = ctx.cfg.trials.unwrap_or(1);
    let (mut worst_identity, mut worst_optimum) = (0.0f64, 0.0f64);
    for i in 0..trials {
        let mut rng = rng_for(seed, i as u64);
        let mdp = match &ctx.mdp {
            Some(m) => m.clone(),
            None => random_mdp(&mut rng, &RandomMdpConfig::default()),
        };
        let mu = random_policy(&mut rng, mdp.shape(), false);
        let pi = random_policy(&mut rng, mdp.shape(), false);
        let adv = value_tables(&mdp, &mu, mdp.rewards()).advantage;
        let j_mu = policy_return(&mdp, &mu, mdp.rewards());
        let lhs = policy_return(&mdp, &pi, &adv);
        let rhs = policy_return(&mdp, &pi, mdp.rewards()) - j_mu;
        worst_identity = worst_identity.max((lhs - rhs).abs());
        let opt_adv = optimal_value(&mdp, &adv);
        let opt = optimal_value(&mdp, mdp.rewards()) - j_mu;
        worst_optimum = worst_optimum.max((opt_adv - opt).abs());
    }
    out.push("-", "trials", trials as f64);
    out.push("-", "max_identity_error", worst_identity);
    out.push("-", "max_optimum_error", worst_optimum);
}

/// Attempts per requested instance before giving up on finding finite
/// coverage.
const MAX_DRAWS_PER_INSTANCE: usize = 50;

fn lemma_sweep(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    let trials = ctx.cfg.trials.unwrap_or(10);
    let (mut certified, mut failed, mut vacuous) = (0usize, 0usize, 0usize);
    let (mut worst_ratio, mut worst_abs) = (0.0f64, 0.0f64);
    let mut rng = rng_for(seed, 0);
    let mut draws = 0;
    while certified + failed < trials && draws < trials * MAX_DRAWS_PER_INSTANCE {
        draws += 1;
        let mdp = match &ctx.mdp {
            Some(m) => m.clone(),
            None => random_mdp(&mut rng, &RandomMdpConfig::default()),
        };
        let pi = random_policy(&mut rng, mdp.shape(), false);
        let full_support = rng.gen_bool(0.5);
        let pi_off = random_policy(&mut rng, mdp.shape(), full_support);
        let f = if rng.gen_bool(0.5) {
            random_functional(&mut rng, &mdp)
        } else {
            cancellation_functional(&mut rng, &mdp)
        };
        let cert = lemma_certificate(&mdp, &pi, &pi_off, &f, ctx.cap)?;
        if cert.vacuous {
            vacuous += 1;
            continue;
        }
        if cert.passes() && cert.pass_cauchy_schwarz {
            certified += 1;
        } else {
            failed += 1;
        }
        if let Some(r) = cert.ratio {
            worst_ratio = worst_ratio.max(r / cert.bound_ratio);
        }
        if cert.bound_abs > 0.0 {
            worst_abs = worst_abs.max(cert.abs_pi / cert.bound_abs);
        }
    }
    out.push("-", "certified", certified as f64);
    out.push("-", "failed", failed as f64);
    out.push("-", "vacuous_skipped", vacuous as f64);
    out.push("-", "max_ratio_over_bound", worst_ratio);
    out.push("-", "max_abs_over_bound", worst_abs);
    Ok(())
}

fn tightness(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    let trials = ctx.cfg.trials.unwrap_or(100);
    let random = tightness_probe(
        &ProbeFamily::Random(RandomMdpConfig::default()),
        seed,
        trials,
        ctx.cap,
    )?;
    out.push("random", "scored", random.scored as f64);
    out.push("random", "max_ratio_over_h3c", random.max_score());
    out.push("random", "max_ratio_over_c", random.max_ratio_over_c);
    for horizon in 1..=4 {
        let report = tightness_probe(
            &ProbeFamily::IndependentCoordinates { horizon },
            seed,
            1,
            ctx.cap,
        )?;
        let grid = format!("independent_h{horizon}");
        out.push(&grid, "max_ratio_over_h3c", report.max_score());
        out.push(&grid, "max_ratio_over_c", report.max_ratio_over_c);
    }
    Ok(())
}

fn thm31_rate(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    let ladder = ctx.ladder.as_ref().expect("prepared");
    let solver = Solver::from_name(ctx.cfg.solver.as_deref().unwrap_or("model_based_greedy"))?;
    let mdp = &ladder.mdp;
    let best = optimal_value(mdp, mdp.rewards());
    for &n in &ctx.cfg.n_grid {
        let mut rng = rng_for(seed, n as u64);
        let data = collect_outcome_dataset(mdp, &ladder.pi_off, n, &mut rng)?;
        let t = outcome_to_process(&data, &ladder.class, solver, mdp.shape(), sub_seed(seed, !(n as u64)))?;
        out.push(n, "sup_gap", sup_reward_evaluation_gap(mdp, &t.fit.reward));
        out.push(n, "excess_risk", population_excess_risk(mdp, &ladder.pi_off, &t.fit.reward));
        out.push(n, "suboptimality", best - policy_return(mdp, &t.policy, mdp.rewards()));
        out.push(n, "class_index", t.fit.index as f64);
    }
    Ok(())
}

fn mle_pref_rate(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    let ladder = ctx.ladder.as_ref().expect("prepared");
    let mdp = &ladder.mdp;
    for &n in &ctx.cfg.n_grid {
        let mut rng = rng_for(seed, n as u64);
        let data = collect_preferences(mdp, &ladder.pi_off, mdp.rewards(), n, &mut rng);
        let fit = mle_reward(&data, &ladder.class)?;
        // Preferences only identify rewards up to a shift in the total.
        out.push(n, "sup_gap", shifted_sup_gap(mdp, &fit.reward));
        out.push(n, "class_index", fit.index as f64);
    }
    Ok(())
}

/// Worst-case evaluation error after removing the best constant shift:
/// `(max_pi D(pi) - min_pi D(pi)) / 2` with `D = J_rhat - J`.
fn shifted_sup_gap(mdp: &LayeredMdp, r_hat: &crate::mdp::RewardTable) -> f64 {
    let diff = r_hat.sub(mdp.rewards());
    let hi = optimal_value(mdp, &diff);
    let lo = -optimal_value(mdp, &diff.scale(-1.0));
    0.5 * (hi - lo)
}

fn dpo_rate(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    for (ladder, beta) in ctx.dpo.iter().zip(&ctx.cfg.beta_grid) {
        for &n in &ctx.cfg.n_grid {
            let mut rng = rng_for(seed, n as u64);
            let data = collect_preferences(&ladder.mdp, &ladder.pi_ref, &ladder.reward, n, &mut rng);
            let fit = dpo_fit(&data, &ladder.class, &ladder.pi_ref, ladder.cfg.beta)?;
            let grid = format!("beta{beta}_n{n}");
            out.push(&grid, "suboptimality", ladder.gaps[fit.index]);
            out.push(&grid, "class_index", fit.index as f64);
        }
    }
    Ok(())
}

/// `max_tau |pi*_beta(tau) - pi_ref(tau) exp(r(tau) / beta) / Z|`.
pub fn kl_closed_form_error(ladder: &DpoLadder, cap: usize) -> Result<f64> {
    let pi = kl_optimal_policy(&ladder.mdp, &ladder.reward, &ladder.pi_ref, ladder.cfg.beta)?;
    let trajs = enumerate_trajectories(&ladder.mdp, &ladder.pi_ref, cap)?;
    let weights: Vec<f64> = trajs
        .iter()
        .map(|(t, d)| d * (ladder.reward.trajectory_sum(t) / ladder.cfg.beta).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    Ok(trajs
        .iter()
        .zip(&weights)
        .map(|((t, _), w)| (pi.trajectory_probability(t) - w / z).abs())
        .fold(0.0, f64::max))
}

fn armor_coverage(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    let setup = ctx.armor.as_ref().expect("prepared");
    let mdp = &setup.mdp;
    let best = optimal_value(mdp, mdp.rewards());
    for &(n, _, alpha) in &setup.alphas {
        let mut rng = rng_for(seed, n as u64);
        let data = collect_outcome_dataset(mdp, &setup.pi_off, n, &mut rng)?;
        let armor = armor_total_reward(&data, &setup.models, alpha, &setup.policies)?;
        out.push(n, "armor_suboptimality", best - policy_return(mdp, &armor.policy, mdp.rewards()));
        out.push(n, "version_space_size", armor.version_space.members.len() as f64);
        if let Some(rewards) = &setup.rewards {
            let t = outcome_to_process(
                &data,
                rewards,
                Solver::PlugInGreedy,
                mdp.shape(),
                sub_seed(seed, !(n as u64)),
            )?;
            out.push(n, "naive_suboptimality", best - policy_return(mdp, &t.policy, mdp.rewards()));
        }
    }
    Ok(())
}

fn advantage_pipeline_runs(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    let mut rng = rng_for(seed, 0);
    let (mdp, mu) = match &ctx.mdp {
        Some(m) => (m.clone(), random_policy(&mut rng, m.shape(), false)),
        None => {
            let mdp = fixtures::with_bounded_suffixes(&random_mdp(&mut rng, &RandomMdpConfig::default()));
            let mu = random_policy(&mut rng, mdp.shape(), false);
            (mdp, mu)
        }
    };
    let class = fixtures::advantage_reward_class(&mdp, &mu)?;
    let nu = default_nu(&mdp);
    for &k in &ctx.cfg.k_grid {
        let mut rng = rng_for(seed, k as u64);
        let report = advantage_pipeline(&mdp, &mu, &class, &nu, k, Planner::Exact, ctx.cap, &mut rng)?;
        out.push(k, "suboptimality", report.suboptimality);
        out.push(k, "eps_stat", report.eps_stat);
        out.push(k, "eps_alg", report.eps_alg);
        out.push(k, "c_nu", report.c_nu);
        out.push(k, "bound_sqrt", report.bound_sqrt);
        out.push(k, "bound_linear", report.bound_linear);
        out.flag(k, "holds_sqrt", report.pass_sqrt);
        out.flag(k, "holds_linear", report.pass_linear);
    }
    Ok(())
}

/// Preference frequency of the better arm against `sigmoid(gap)`, counting
/// only pairs with distinct arms.
fn bt_calibration(ctx: &Context<'_>, seed: u64, out: &mut Rows<'_>) -> Result<()> {
    for &gap in &ctx.cfg.reward_gaps {
        let mdp = fixtures::two_armed_bandit(0.0, gap);
        let pi_ref = TabularPolicy::uniform(mdp.shape());
        for &n in &ctx.cfg.n_grid {
            let mut rng = rng_for(seed, sub_seed(gap.to_bits(), n as u64));
            let data = collect_preferences(&mdp, &pi_ref, mdp.rewards(), n, &mut rng);
            let distinct: Vec<_> = data
                .pairs
                .iter()
                .filter(|p| p.win.steps()[0].action != p.lose.steps()[0].action)
                .collect();
            let m = distinct.len() as f64;
            let wins = distinct.iter().filter(|p| p.win.steps()[0].action == 1).count() as f64;
            let p = sigmoid(gap);
            let se = (p * (1.0 - p) / m).sqrt();
            let grid = format!("gap{gap}_n{n}");
            out.push(&grid, "frequency", wins / m);
            out.push(&grid, "sigmoid", p);
            out.push(&grid, "z_score", (wins / m - p) / se);
        }
    }
    Ok(())
}

/// Per-grid mean of `metric` over seeds, in first-seen grid order.
fn grid_means(rows: &[Row], metric: &str) -> Vec<(String, f64)> {
    let mut order = Vec::new();
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let e = acc.entry(r.grid.clone()).or_insert_with(|| {
            order.push(r.grid.clone());
            (0.0, 0)
        });
        e.0 += r.value;
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|g| {
            let (s, c) = acc[&g];
            (g, s / c as f64)
        })
        .collect()
}

fn metric_values<'r>(rows: &'r [Row], metric: &'r str) -> impl Iterator<Item = &'r Row> + 'r {
    rows.iter().filter(move |r| r.metric == metric)
}

/// Mean rows, fitted slope and a pass flag for one sweep. `group` labels the
/// summary rows; mean rows use `<group>_n<n>`, or bare `n` for group `-`.
fn rate_summary(
    out: &mut Rows<'_>,
    group: &str,
    means: &[(f64, f64)],
    window: Option<(f64, f64)>,
) -> Result<()> {
    for &(n, m) in means {
        let grid = if group == "-" { n.to_string() } else { format!("{group}_n{n}") };
        out.push(grid, "mean", m);
    }
    match fit_rate(means) {
        Ok(fit) => {
            out.push(group, "slope", fit.slope);
            out.push(group, "intercept", fit.intercept);
            out.push(group, "residual", fit.residual);
            let ok = match window {
                Some((lo, hi)) => (lo..=hi).contains(&fit.slope),
                None => fit.slope < 0.0,
            };
            out.flag(group, "pass_slope", ok);
        }
        // A mean of exactly zero at some size: no rate can be fitted.
        Err(Error::NonPositiveError(_)) => out.flag(group, "pass_slope", false),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn summarize(ctx: &Context<'_>, rows: &[Row]) -> Result<Vec<Row>> {
    let cfg = ctx.cfg;
    let mut out = Rows::new(&cfg.experiment, None);
    let n_means = |metric: &str| -> Vec<(f64, f64)> {
        grid_means(rows, metric)
            .into_iter()
            .map(|(g, m)| (g.parse::<f64>().expect("numeric grid"), m))
            .collect()
    };
    match cfg.experiment.as_str() {
        "q_counterexample" => {
            let gap = metric_values(rows, "gap").map(|r| r.value).fold(f64::NAN, f64::max);
            let expected = [1.0, 0.0, 2.0 / 3.0, 0.5, 0.0, 0.5];
            let q: Vec<f64> = metric_values(rows, "q")
                .filter(|r| r.seed == cfg.seeds.first().copied())
                .map(|r| r.value)
                .collect();
            // Rows come per layer: (s0,a0), (s0,a1), then layer 1.
            let reordered = [q[2], q[3], q[4], q[5], q[0], q[1]];
            out.push("-", "gap", gap);
            out.flag("-", "pass_gap", (gap - 1.0 / 3.0).abs() <= 1e-12);
            let q_ok = reordered.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-12);
            out.flag("-", "pass_q_entries", q_ok);
        }
        "advantage_identity" => {
            let id = metric_values(rows, "max_identity_error").map(|r| r.value).fold(0.0, f64::max);
            let opt = metric_values(rows, "max_optimum_error").map(|r| r.value).fold(0.0, f64::max);
            let trials: f64 = metric_values(rows, "trials").map(|r| r.value).sum();
            out.push("-", "trials", trials);
            out.push("-", "max_identity_error", id);
            out.push("-", "max_optimum_error", opt);
            out.flag("-", "pass_identity", id <= IDENTITY_TOL && opt <= IDENTITY_TOL);
        }
        "lemma_sweep" => {
            let certified: f64 = metric_values(rows, "certified").map(|r| r.value).sum();
            let failed: f64 = metric_values(rows, "failed").map(|r| r.value).sum();
            let requested = (cfg.trials.unwrap_or(10) * cfg.seeds.len()) as f64;
            out.push("-", "certified", certified);
            out.push("-", "failed", failed);
            for metric in ["max_ratio_over_bound", "max_abs_over_bound"] {
                let worst = metric_values(rows, metric).map(|r| r.value).fold(0.0, f64::max);
                out.push("-", metric, worst);
            }
            out.flag("-", "pass_certified", failed == 0.0 && certified >= requested);
        }
        "tightness" => {
            let worst = metric_values(rows, "max_ratio_over_h3c")
                .map(|r| r.value)
                .fold(0.0, f64::max);
            out.push("-", "max_ratio_over_h3c", worst);
            out.push("-", "constant", crate::measure_lemma::LEMMA_CONSTANT);
            out.flag("-", "pass_below_constant", worst <= crate::measure_lemma::LEMMA_CONSTANT);
        }
        "thm31_rate" => {
            rate_summary(&mut out, "-", &n_means("sup_gap"), Some(REWARD_RATE_WINDOW))?;
            let ladder = ctx.ladder.as_ref().expect("prepared");
            let mdp = &ladder.mdp;
            let c = crate::coverage::all_policy_concentrability(mdp, &ladder.pi_off).value;
            let h = mdp.horizon() as f64;
            let log_r = (ladder.class.len() as f64).ln();
            let kappa = metric_values(rows, "sup_gap")
                .map(|r| {
                    let n: f64 = r.grid.parse().expect("numeric grid");
                    r.value / (h.powf(1.5) * (c * log_r / (n / 2.0)).sqrt())
                })
                .fold(0.0, f64::max);
            out.push("-", "c_sa", c);
            out.push("-", "kappa", kappa);
        }
        "mle_pref_rate" => rate_summary(&mut out, "-", &n_means("sup_gap"), None)?,
        "dpo_rate" => {
            for (ladder, beta) in ctx.dpo.iter().zip(&cfg.beta_grid) {
                let group = format!("beta{beta}");
                let label = format!("{group}_");
                let means: Vec<(f64, f64)> = grid_means(rows, "suboptimality")
                    .into_iter()
                    .filter_map(|(g, m)| {
                        g.strip_prefix(&label)
                            .and_then(|rest| rest.strip_prefix('n'))
                            .map(|n| (n.parse::<f64>().expect("numeric grid"), m))
                    })
                    .collect();
                rate_summary(&mut out, &group, &means, Some(DPO_RATE_WINDOW))?;
                let err = kl_closed_form_error(ladder, ctx.cap)?;
                out.push(&group, "closed_form_error", err);
                out.flag(&group, "pass_closed_form", err <= 1e-10);
            }
        }
        "armor_coverage" => {
            let setup = ctx.armor.as_ref().expect("prepared");
            let seeds = cfg.seeds.len() as f64;
            for &(n, c, alpha) in &setup.alphas {
                let grid = n.to_string();
                out.push(&grid, "alpha_constant", c);
                out.push(&grid, "alpha", alpha);
                let at_n = |metric: &'static str| {
                    metric_values(rows, metric)
                        .filter(|r| r.grid == grid)
                        .map(|r| r.value)
                        .collect::<Vec<_>>()
                };
                let good = at_n("armor_suboptimality").iter().filter(|&&x| x <= 0.05).count() as f64;
                out.push(&grid, "armor_within_0.05", good);
                out.flag(&grid, "pass_armor", good >= 0.95 * seeds);
                if setup.rewards.is_some() {
                    let bad = at_n("naive_suboptimality").iter().filter(|&&x| x > 0.2).count() as f64;
                    out.push(&grid, "naive_above_0.2", bad);
                    out.flag(&grid, "pass_naive_fails", bad >= 0.5 * seeds);
                }
            }
        }
        "advantage_pipeline" => {
            for metric in ["holds_sqrt", "holds_linear"] {
                let held = metric_values(rows, metric).filter(|r| r.value == 1.0).count();
                out.push("-", metric, held as f64);
            }
            let runs = metric_values(rows, "holds_sqrt").count() as f64;
            out.push("-", "runs", runs);
            let all = metric_values(rows, "holds_sqrt").all(|r| r.value == 1.0);
            out.flag("-", "pass_sqrt_bound", all);
        }
        "bt_calibration" => {
            let worst = metric_values(rows, "z_score").map(|r| r.value.abs()).fold(0.0, f64::max);
            out.push("-", "max_abs_z", worst);
            out.flag("-", "pass_within_3se", worst <= 3.0);
        }
        other => return Err(Error::UnknownExperiment(other.to_string())),
    }
    Ok(out.rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn exact_square_root_rate() {
        let pts: Vec<(f64, f64)> = (7..15).map(|k| {
            let n = 2f64.powi(k);
            (n, 3.0 / n.sqrt())
        }).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn constant_errors_have_zero_slope() {
        let fit = fit_rate(&[(1.0, 0.2), (10.0, 0.2), (100.0, 0.2)]).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn rate_fit_rejects_bad_points() {
        assert!(matches!(fit_rate(&[(1.0, 1.0), (2.0, 0.5)]), Err(Error::TooFewPoints(2))));
        assert!(matches!(
            fit_rate(&[(1.0, 1.0), (2.0, 0.0), (4.0, 0.5)]),
            Err(Error::NonPositiveError(_))
        ));
    }

    #[test]
    fn sub_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| sub_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(sub_seed(1, 0), sub_seed(2, 0));
    }

    #[test]
    fn validation_errors() {
        let e = config("experiment = \"nope\"\nseeds = [1]").validate().unwrap_err();
        assert_eq!(e.code(), "E_UNKNOWN_EXPERIMENT");
        let e = config("experiment = \"q_counterexample\"\nseeds = []").validate().unwrap_err();
        assert_eq!(e.code(), "E_INVALID_CONFIG");
        let e = config("experiment = \"thm31_rate\"\nseeds = [1]\nn_grid = [8, 16]")
            .validate()
            .unwrap_err();
        assert_eq!(e.code(), "E_INVALID_CONFIG");
        let e = config("experiment = \"lemma_sweep\"\nseeds = [1]\nmdp = \"/nonexistent/m.toml\"")
            .validate()
            .unwrap_err();
        assert_eq!(e.code(), "E_UNRESOLVABLE_SPEC");
        let e = ExperimentConfig::from_toml_str("experiment = \"x\"\nseeds = [1]\nbogus = 1").unwrap_err();
        assert_eq!(e.code(), "E_INVALID_CONFIG");
    }

    #[test]
    fn counterexample_summary_passes() {
        let res = run(&config("experiment = \"q_counterexample\"\nseeds = [0]"), 1).unwrap();
        assert!(res.passed());
        assert!((res.summary("gap", None).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_is_identical_across_thread_counts() {
        let cfg = config(
            "experiment = \"advantage_pipeline\"\nseeds = [1, 2, 3, 4]\nk_grid = [2, 8]",
        );
        let a = run(&cfg, 1).unwrap().to_csv();
        let b = run(&cfg, 4).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("experiment,seed,grid,metric,value\n"));
    }
}
