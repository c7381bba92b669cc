//! Experiment drivers behind the CLI subcommands.

use std::path::PathBuf;

use rayon::prelude::*;
use rbpomdp::planners::RuleSpec;
use rbpomdp::quadrature::{gauss_hermite_rule, smolyak_rule, Growth};
use rbpomdp::RngStream;
use serde::Serialize;

use crate::config::{ExperimentConfig, FilterConfig, FilterKind, PlannerKind};
use crate::episode::{replay_filter, run_episode, scripted_run, EpisodeResult, FilterStep, StepRecord};
use crate::error::{HarnessError, Result};
use crate::output::{write_csv, write_jsonl, Provenance};
use crate::stats::{chi2_bounds, Summary};

/// Index reserved for the untimed warm-up episode.
pub const WARMUP_INDEX: u64 = u64::MAX;

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// Runs `cfg.run.episodes` episodes in parallel, in index order.
pub fn run_episodes(cfg: &ExperimentConfig) -> Result<Vec<EpisodeResult>> {
    cfg.validate()?;
    let model = cfg.model()?;
    if cfg.run.warmup {
        run_episode(cfg, &model, WARMUP_INDEX)?;
    }
    pool(cfg.run.threads)?.install(|| {
        (0..cfg.run.episodes as u64)
            .into_par_iter()
            .map(|i| run_episode(cfg, &model, i))
            .collect()
    })
}

/// Per-episode row of the aggregate CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub episode: u64,
    pub outcome: String,
    pub solved: bool,
    pub actions: usize,
    pub discounted_return: f64,
    pub mean_plan_ms: f64,
    pub mean_update_ms: f64,
}

impl From<&EpisodeResult> for EpisodeRow {
    fn from(e: &EpisodeResult) -> Self {
        Self {
            episode: e.episode,
            outcome: serde_json::to_value(e.outcome)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            solved: e.outcome.solved(),
            actions: e.actions_taken(),
            discounted_return: e.discounted_return,
            mean_plan_ms: e.mean_plan_ms(),
            mean_update_ms: e.mean_update_ms(),
        }
    }
}

#[derive(Serialize)]
struct StepLine<'a> {
    config_hash: &'a str,
    seed: u64,
    episode: u64,
    #[serde(flatten)]
    record: &'a StepRecord,
}

fn provenance(cfg: &ExperimentConfig, episodes: usize) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.run.seed,
        episodes,
    }
}

/// `simulate`: per-step JSONL plus per-episode CSV. Returns the paths.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(Vec<EpisodeResult>, PathBuf, PathBuf)> {
    let results = run_episodes(cfg)?;
    let prov = provenance(cfg, results.len());
    let hash = prov.config_hash.clone();
    let lines: Vec<StepLine> = results
        .iter()
        .flat_map(|e| {
            e.steps.iter().map(|r| StepLine {
                config_hash: &hash,
                seed: cfg.run.seed,
                episode: e.episode,
                record: r,
            })
        })
        .collect();
    let dir = &cfg.run.output_dir;
    let steps_path = dir.join(format!("simulate_seed{}.jsonl", cfg.run.seed));
    let episodes_path = dir.join(format!("simulate_seed{}_episodes.csv", cfg.run.seed));
    write_jsonl(&steps_path, &prov, &lines)?;
    let rows: Vec<EpisodeRow> = results.iter().map(EpisodeRow::from).collect();
    write_csv(&episodes_path, &prov, &rows)?;
    Ok((results, steps_path, episodes_path))
}

/// Scripted runs replayed through several filters. `traces[e][f]` is the
/// trace of filter `f` on episode `e`.
pub struct ReplaySuite {
    pub filters: Vec<FilterConfig>,
    pub traces: Vec<Vec<Vec<FilterStep>>>,
}

/// Scripted runs, one per episode, replayed through every filter in
/// `filters`. Episodes run in parallel; each filter sees the same script.
pub fn replay_suite(cfg: &ExperimentConfig, episodes: usize, filters: &[FilterConfig]) -> Result<ReplaySuite> {
    let model = cfg.model()?;
    let base = RngStream::new(cfg.run.seed);
    let traces = pool(cfg.run.threads)?.install(|| {
        (0..episodes as u64)
            .into_par_iter()
            .map(|i| {
                let ep = base.child(i);
                let script = scripted_run(&model, &mut ep.child(0))?;
                filters
                    .iter()
                    .enumerate()
                    .map(|(k, f)| replay_filter(f, cfg.ukf, &model, &script, &mut ep.child(1 + k as u64)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ReplaySuite {
        filters: filters.to_vec(),
        traces,
    })
}

fn filter_name(kind: FilterKind) -> &'static str {
    match kind {
        FilterKind::Rbpf => "rbpf",
        FilterKind::Sirpf => "sirpf",
        FilterKind::Oracle => "oracle",
    }
}

fn filter_with(cfg: &ExperimentConfig, kind: FilterKind, particles: usize) -> FilterConfig {
    FilterConfig {
        kind,
        particles,
        ..cfg.filter.clone()
    }
}

/// One row of the filter timing table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterBenchRow {
    pub filter: String,
    pub particles: usize,
    pub sequences: usize,
    pub steps: usize,
    pub mean_update_ms: f64,
    pub std_update_ms: f64,
    pub median_update_ms: f64,
    pub mean_ess_normalized: f64,
    pub frac_ess_above_half: f64,
}

/// `bench-filters`: per-step update time and ESS for RBPF and SIRPF at
/// each particle count. Runs single-threaded; each (filter, count) pair
/// gets one untimed warm-up replay, then `timing_repeats` timed passes
/// over the same scripts.
pub fn bench_filters(cfg: &ExperimentConfig, counts: &[usize]) -> Result<Vec<FilterBenchRow>> {
    cfg.validate()?;
    if counts.contains(&0) {
        return Err(HarnessError::Config("particle counts must be positive".into()));
    }
    let model = cfg.model()?;
    let base = RngStream::new(cfg.run.seed);
    let scripts = (0..cfg.bench.filter_sequences as u64)
        .map(|i| scripted_run(&model, &mut base.child(i).child(0)))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<FilterConfig> = counts
        .iter()
        .flat_map(|&n| [FilterKind::Rbpf, FilterKind::Sirpf].map(|k| filter_with(cfg, k, n)))
        .collect();
    if cfg.run.warmup {
        if let Some(s) = scripts.first() {
            for f in &cells {
                replay_filter(f, cfg.ukf, &model, s, &mut base.child(WARMUP_INDEX))?;
            }
        }
    }
    // Timed passes sweep every cell in turn, so slow spells on a shared
    // machine hit all particle counts alike; per script the fastest pass
    // is kept.
    let mut best: Vec<Vec<Option<Vec<FilterStep>>>> = vec![vec![None; scripts.len()]; cells.len()];
    for _ in 0..cfg.bench.timing_repeats.max(1) {
        for (c, f) in cells.iter().enumerate() {
            for (i, s) in scripts.iter().enumerate() {
                let trace = replay_filter(f, cfg.ukf, &model, s, &mut base.child(i as u64).child(1))?;
                let total: f64 = trace.iter().map(|t| t.update_time_ms).sum();
                let slot = &mut best[c][i];
                if slot
                    .as_ref()
                    .is_none_or(|b| total < b.iter().map(|t| t.update_time_ms).sum::<f64>())
                {
                    *slot = Some(trace);
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (f, traces) in cells.iter().zip(best) {
        let steps: Vec<FilterStep> = traces.into_iter().flatten().flatten().collect();
        let times: Vec<f64> = steps.iter().map(|t| t.update_time_ms).collect();
        let ess: Vec<f64> = steps.iter().map(|t| t.ess_normalized).collect();
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        let t = Summary::of(&times);
        rows.push(FilterBenchRow {
            filter: filter_name(f.kind).into(),
            particles: f.particles,
            sequences: scripts.len(),
            steps: times.len(),
            mean_update_ms: t.mean,
            std_update_ms: t.std_dev,
            median_update_ms: sorted.get(sorted.len() / 2).copied().unwrap_or(f64::NAN),
            mean_ess_normalized: Summary::of(&ess).mean,
            frac_ess_above_half: ess.iter().filter(|&&v| v > 0.5).count() as f64 / ess.len().max(1) as f64,
        });
    }
    let prov = provenance(cfg, cfg.bench.filter_sequences);
    write_csv(&cfg.run.output_dir.join("bench_filters.csv"), &prov, &rows)?;
    Ok(rows)
}

/// One planner/belief combination in the planning sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanningCell {
    pub label: String,
    pub config: ExperimentConfig,
}

/// Cells of the planning sweep: RB-POMCPOW at each sparse-grid level,
/// then POMCPOW at each iteration budget on a SIRPF belief and,
/// optionally, on an RBPF belief.
pub fn planning_cells(cfg: &ExperimentConfig, q_levels: &[usize], pomcpow_iters: &[usize]) -> Vec<PlanningCell> {
    let mut cells = Vec::new();
    for &q in q_levels {
        let mut c = cfg.clone();
        c.planner.kind = PlannerKind::RbPomcpow;
        c.planner.params.iterations = cfg.bench.rb_iterations;
        c.planner.params.simulate_rule = RuleSpec::smolyak(q);
        c.filter = filter_with(cfg, FilterKind::Rbpf, cfg.bench.rb_particles);
        cells.push(PlanningCell {
            label: format!("rb-pomcpow/q{q}"),
            config: c,
        });
    }
    let mut bases = vec![(FilterKind::Sirpf, cfg.bench.pomcpow_particles)];
    if cfg.bench.pomcpow_on_rbpf {
        bases.push((FilterKind::Rbpf, cfg.bench.rb_particles));
    }
    for (kind, n) in bases {
        for &iters in pomcpow_iters {
            let mut c = cfg.clone();
            c.planner.kind = PlannerKind::Pomcpow;
            c.planner.params.iterations = iters;
            c.filter = filter_with(cfg, kind, n);
            cells.push(PlanningCell {
                label: format!("pomcpow-{}/{iters}", filter_name(kind)),
                config: c,
            });
        }
    }
    cells
}

/// One row of the planning table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanningRow {
    pub cell: String,
    pub planner: String,
    pub filter: String,
    pub particles: usize,
    pub iterations: usize,
    pub sparse_grid_level: Option<usize>,
    pub episodes: usize,
    pub seed: u64,
    pub mean_reward: f64,
    pub std_err: f64,
    pub ci95: f64,
    pub success_rate: f64,
    pub mean_plan_ms: f64,
    pub upper_bound: f64,
}

fn level_of(rule: &RuleSpec) -> Option<usize> {
    match rule {
        RuleSpec::Smolyak { level, .. } => Some(*level),
        _ => None,
    }
}

/// Aggregates the episodes of one cell.
pub fn planning_row(cell: &PlanningCell, episodes: &[EpisodeResult], upper_bound: f64) -> PlanningRow {
    let c = &cell.config;
    let rewards: Vec<f64> = episodes.iter().map(|e| e.discounted_return).collect();
    let s = Summary::of(&rewards);
    let plan: Vec<f64> = episodes.iter().map(EpisodeResult::mean_plan_ms).collect();
    let rb = c.planner.kind != PlannerKind::Pomcpow;
    PlanningRow {
        cell: cell.label.clone(),
        planner: serde_json::to_value(c.planner.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        filter: filter_name(c.filter.kind).into(),
        particles: c.filter.particles,
        iterations: c.planner.params.iterations,
        sparse_grid_level: if rb {
            level_of(&c.planner.params.simulate_rule)
        } else {
            None
        },
        episodes: episodes.len(),
        seed: c.run.seed,
        mean_reward: s.mean,
        std_err: s.std_err,
        ci95: s.ci95,
        success_rate: episodes.iter().filter(|e| e.outcome.solved()).count() as f64 / episodes.len().max(1) as f64,
        mean_plan_ms: Summary::of(&plan).mean,
        upper_bound,
    }
}

/// `bench-planning`: every cell runs `run.episodes` episodes under the
/// same base seed. Writes the aggregate table and a per-episode table.
pub fn bench_planning(
    cfg: &ExperimentConfig,
    q_levels: &[usize],
    pomcpow_iters: &[usize],
) -> Result<(Vec<PlanningRow>, Vec<Vec<EpisodeResult>>)> {
    cfg.validate()?;
    let upper = cfg.model()?.ideal_return();
    let cells = planning_cells(cfg, q_levels, pomcpow_iters);
    let mut rows = Vec::new();
    let mut all = Vec::new();
    let mut per_episode = Vec::new();
    for cell in &cells {
        let eps = run_episodes(&cell.config)?;
        rows.push(planning_row(cell, &eps, upper));
        per_episode.extend(eps.iter().map(|e| CellEpisodeRow::new(&cell.label, e)));
        all.push(eps);
    }
    let prov = provenance(cfg, cfg.run.episodes);
    write_csv(&cfg.run.output_dir.join("bench_planning.csv"), &prov, &rows)?;
    write_csv(
        &cfg.run.output_dir.join("bench_planning_episodes.csv"),
        &prov,
        &per_episode,
    )?;
    Ok((rows, all))
}

#[derive(Serialize)]
struct CellEpisodeRow {
    cell: String,
    episode: u64,
    outcome: String,
    solved: bool,
    actions: usize,
    discounted_return: f64,
    mean_plan_ms: f64,
    mean_update_ms: f64,
}

impl CellEpisodeRow {
    fn new(cell: &str, e: &EpisodeResult) -> Self {
        let r = EpisodeRow::from(e);
        Self {
            cell: cell.to_string(),
            episode: r.episode,
            outcome: r.outcome,
            solved: r.solved,
            actions: r.actions,
            discounted_return: r.discounted_return,
            mean_plan_ms: r.mean_plan_ms,
            mean_update_ms: r.mean_update_ms,
        }
    }
}

/// Per-filter row of the consistency table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub filter: String,
    pub particles: usize,
    pub episodes: usize,
    pub steps: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub frac_inside: f64,
    pub frac_below: f64,
    pub frac_above: f64,
    /// Fraction below the lower bound when the reported covariance is
    /// doubled.
    pub frac_below_inflated: f64,
    pub mean_nees: f64,
    pub mean_nis: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyStepRow {
    pub filter: String,
    pub episode: usize,
    pub step: usize,
    pub ess_normalized: f64,
    pub nees: Option<f64>,
    pub nis: Option<f64>,
}

/// Position-NEES fractions against a two-sided χ² interval with two
/// degrees of freedom. Steps with a singular covariance count as outside.
pub fn consistency_row(filter: &FilterConfig, traces: &[Vec<FilterStep>], coverage: f64) -> ConsistencyRow {
    let (lo, hi) = chi2_bounds(2, coverage);
    let steps: Vec<&FilterStep> = traces.iter().flatten().collect();
    let n = steps.len().max(1) as f64;
    let nees: Vec<f64> = steps.iter().filter_map(|s| s.nees).collect();
    let nis: Vec<f64> = steps.iter().filter_map(|s| s.nis).collect();
    let frac = |pred: &dyn Fn(f64) -> bool| nees.iter().filter(|&&v| pred(v)).count() as f64 / n;
    ConsistencyRow {
        filter: filter_name(filter.kind).into(),
        particles: filter.particles,
        episodes: traces.len(),
        steps: steps.len(),
        lower_bound: lo,
        upper_bound: hi,
        frac_inside: frac(&|v| v >= lo && v <= hi),
        frac_below: frac(&|v| v < lo),
        frac_above: frac(&|v| v > hi),
        frac_below_inflated: frac(&|v| 0.5 * v < lo),
        mean_nees: Summary::of(&nees).mean,
        mean_nis: Summary::of(&nis).mean,
    }
}

/// `consistency`: filter-only runs with scripted actions; NEES and NIS
/// per step for RBPF and SIRPF.
pub fn consistency(cfg: &ExperimentConfig) -> Result<(Vec<ConsistencyRow>, Vec<ConsistencyStepRow>)> {
    cfg.validate()?;
    let c = &cfg.consistency;
    let filters = [
        filter_with(cfg, FilterKind::Rbpf, c.rb_particles),
        filter_with(cfg, FilterKind::Sirpf, c.sir_particles),
    ];
    let suite = replay_suite(cfg, c.episodes, &filters)?;
    let mut rows = Vec::new();
    let mut step_rows = Vec::new();
    for (k, f) in filters.iter().enumerate() {
        let traces: Vec<Vec<FilterStep>> = suite.traces.iter().map(|ep| ep[k].clone()).collect();
        rows.push(consistency_row(f, &traces, c.coverage));
        for (e, trace) in traces.iter().enumerate() {
            step_rows.extend(trace.iter().map(|s| ConsistencyStepRow {
                filter: filter_name(f.kind).into(),
                episode: e,
                step: s.step,
                ess_normalized: s.ess_normalized,
                nees: s.nees,
                nis: s.nis,
            }));
        }
    }
    let prov = provenance(cfg, c.episodes);
    write_csv(&cfg.run.output_dir.join("consistency.csv"), &prov, &rows)?;
    write_csv(&cfg.run.output_dir.join("consistency_steps.csv"), &prov, &step_rows)?;
    Ok((rows, step_rows))
}

/// Which rule `quadrature-table` prints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureRequest {
    Hermite { points: usize },
    Smolyak { q: usize, dim: usize },
}

/// Nodes and weights as CSV: `x1, ..., xd, weight`.
pub fn quadrature_table(req: QuadratureRequest, out: &mut dyn std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match req {
        QuadratureRequest::Hermite { points } => {
            let r = gauss_hermite_rule(points)?;
            w.write_record(["x1", "weight"])?;
            for (x, wt) in r.nodes().iter().zip(r.weights()) {
                w.write_record([format!("{x:e}"), format!("{wt:e}")])?;
            }
        }
        QuadratureRequest::Smolyak { q, dim } => {
            let r = smolyak_rule(q, dim, Growth::Linear)?;
            let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
            header.push("weight".into());
            w.write_record(&header)?;
            for (x, wt) in r.nodes().zip(r.weights()) {
                let mut rec: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
                rec.push(format!("{wt:e}"));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
