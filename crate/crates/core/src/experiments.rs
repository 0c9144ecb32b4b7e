//! Parameter sweeps and profitability-threshold estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{MinerSpec, Protocol, SimulationConfig};
use crate::engine::run_simulation;
use crate::error::{Error, Result};
use crate::rng::{derive_run_seed, mix64, SplitMix64};

/// How attacker power is laid out for a grid value `alpha`.
///
/// Miner 0 is always the aggregate honest miner and miner 1 is the attacker
/// whose revenue is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerLayout {
    /// `attackers` selfish miners with `alpha` each.
    Symmetric { attackers: usize },
    /// Attacker 1 has `alpha`; the rivals keep fixed powers. Zero-power
    /// rivals are left out.
    FixedRivals { rivals: Vec<f64> },
}

impl AttackerLayout {
    pub fn attackers(&self) -> usize {
        match self {
            AttackerLayout::Symmetric { attackers } => *attackers,
            AttackerLayout::FixedRivals { rivals } => {
                1 + rivals.iter().filter(|p| **p > 0.0).count()
            }
        }
    }

    pub fn miners(&self, alpha: f64) -> Result<Vec<MinerSpec>> {
        let attacker_powers: Vec<f64> = match self {
            AttackerLayout::Symmetric { attackers } => {
                if *attackers == 0 {
                    return Err(Error::config(
                        "sweep.attackers",
                        "at least one attacker is required",
                    ));
                }
                vec![alpha; *attackers]
            }
            AttackerLayout::FixedRivals { rivals } => std::iter::once(alpha)
                .chain(rivals.iter().copied().filter(|p| *p > 0.0))
                .collect(),
        };
        if attacker_powers.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::config(
                "sweep.alpha_grid",
                format!("attacker powers {attacker_powers:?} must lie in (0, 1)"),
            ));
        }
        let selfish: f64 = attacker_powers.iter().sum();
        let honest = 1.0 - selfish;
        if honest <= 1e-9 {
            return Err(Error::config(
                "sweep.alpha_grid",
                format!(
                    "attackers hold {selfish} of the power at alpha = {alpha}; must be below 1"
                ),
            ));
        }
        let mut miners = vec![MinerSpec::honest(0, honest)];
        miners.extend(
            attacker_powers
                .iter()
                .enumerate()
                .map(|(i, p)| MinerSpec::selfish(i + 1, *p)),
        );
        Ok(miners)
    }

    /// Miner ids whose revenues are averaged into the revenue of record.
    /// Symmetric attackers are exchangeable, so their pooled mean estimates
    /// attacker 1's expected revenue with less variance.
    pub fn recorded_miners(&self) -> std::ops::RangeInclusive<usize> {
        match self {
            AttackerLayout::Symmetric { attackers } => 1..=*attackers,
            AttackerLayout::FixedRivals { .. } => 1..=1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AttackerLayout::Symmetric { attackers } => format!("k{attackers}"),
            AttackerLayout::FixedRivals { rivals } => {
                let parts: Vec<String> = rivals.iter().map(|r| format!("{r}")).collect();
                format!("rivals{}", parts.join("_"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Protocol, parameters, gamma, seed and end condition. Its miners are
    /// replaced per grid point.
    pub base: SimulationConfig,
    pub alpha_grid: Vec<f64>,
    pub layout: AttackerLayout,
    pub repeats: usize,
    pub rounds: u64,
}

impl SweepConfig {
    pub fn new(base: SimulationConfig, alpha_grid: Vec<f64>, layout: AttackerLayout) -> Self {
        Self {
            base,
            alpha_grid,
            layout,
            repeats: 5,
            rounds: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::config("sweep.alpha_grid", "grid is empty"));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "sweep.alpha_grid",
                "grid must be strictly ascending",
            ));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats", "must be positive"));
        }
        for &alpha in &self.alpha_grid {
            self.cell_config(alpha, 0)?.validate()?;
        }
        Ok(())
    }

    /// Digest of everything but the grid, so a point's seeds depend only on
    /// its alpha.
    pub fn template_digest(&self) -> u64 {
        let mut key = self.base.clone();
        key.miners.clear();
        key.rounds = self.rounds;
        key.record_rounds = false;
        let text = serde_json::to_string(&(key, &self.layout)).unwrap_or_default();
        crate::io::digest_str(&text)
    }

    pub fn cell_digest(&self, alpha: f64) -> u64 {
        mix64(self.template_digest() ^ alpha.to_bits())
    }

    pub fn cell_config(&self, alpha: f64, run_index: usize) -> Result<SimulationConfig> {
        let mut cfg = self.base.clone();
        cfg.miners = self.layout.miners(alpha)?;
        cfg.rounds = self.rounds;
        cfg.record_rounds = false;
        cfg.master_seed = derive_run_seed(
            self.base.master_seed,
            run_index as u64,
            self.cell_digest(alpha),
        );
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_index: usize,
    pub seed: u64,
    /// Relative revenue of every miner, by miner id.
    pub revenues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenuePoint {
    pub alpha: f64,
    /// Revenue of record per repeat: attacker 1, or the per-attacker mean
    /// for symmetric layouts.
    pub run_revenues: Vec<f64>,
    pub mean_revenue: f64,
    pub miners: Vec<MinerSpec>,
    pub runs: Vec<RunOutcome>,
}

impl RevenuePoint {
    fn from_runs(
        alpha: f64,
        miners: Vec<MinerSpec>,
        runs: Vec<RunOutcome>,
        recorded: std::ops::RangeInclusive<usize>,
    ) -> Self {
        let run_revenues: Vec<f64> = runs
            .iter()
            .map(|r| mean(&r.revenues[recorded.clone()]))
            .collect();
        Self {
            alpha,
            mean_revenue: mean(&run_revenues),
            run_revenues,
            miners,
            runs,
        }
    }

    /// Mean relative revenue of each miner over the repeats.
    pub fn miner_means(&self) -> Vec<f64> {
        let n = self.miners.len();
        (0..n)
            .map(|i| self.runs.iter().map(|r| r.revenues[i]).sum::<f64>() / self.runs.len() as f64)
            .collect()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs every grid point `repeats` times. Cells run in parallel; output is
/// in grid order and independent of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<RevenuePoint>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = (0..cfg.alpha_grid.len())
        .flat_map(|p| (0..cfg.repeats).map(move |r| (p, r)))
        .collect();
    let outcomes: Vec<Result<((usize, usize), RunOutcome)>> = cells
        .par_iter()
        .map(|&(p, r)| {
            let sim = cfg.cell_config(cfg.alpha_grid[p], r)?;
            let result = run_simulation(&sim)?;
            Ok((
                (p, r),
                RunOutcome {
                    run_index: r,
                    seed: sim.master_seed,
                    revenues: result.revenues,
                },
            ))
        })
        .collect();
    let mut grouped: Vec<Vec<Option<RunOutcome>>> =
        vec![vec![None; cfg.repeats]; cfg.alpha_grid.len()];
    for outcome in outcomes {
        let ((p, r), run) = outcome?;
        grouped[p][r] = Some(run);
    }
    cfg.alpha_grid
        .iter()
        .zip(grouped)
        .map(|(&alpha, runs)| {
            let runs: Vec<RunOutcome> = runs.into_iter().flatten().collect();
            Ok(RevenuePoint::from_runs(
                alpha,
                cfg.layout.miners(alpha)?,
                runs,
                cfg.layout.recorded_miners(),
            ))
        })
        .collect()
}

/// Runs one configuration `repeats` times with derived per-run seeds.
pub fn run_repeated(cfg: &SimulationConfig, repeats: usize) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    if repeats == 0 {
        return Err(Error::config("repeats", "must be positive"));
    }
    let mut key = cfg.clone();
    key.master_seed = 0;
    let digest = crate::io::digest_str(&serde_json::to_string(&key).unwrap_or_default());
    (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut run = cfg.clone();
            run.master_seed = derive_run_seed(cfg.master_seed, r as u64, digest);
            let result = run_simulation(&run)?;
            Ok(RunOutcome {
                run_index: r,
                seed: run.master_seed,
                revenues: result.revenues,
            })
        })
        .collect()
}

/// One-percentage-point grid from 0.01 up to the largest alpha below one
/// half that still leaves honest power.
pub fn default_grid(layout: &AttackerLayout) -> Vec<f64> {
    let (attackers, fixed) = match layout {
        AttackerLayout::Symmetric { attackers } => (*attackers as f64, 0.0),
        AttackerLayout::FixedRivals { rivals } => (1.0, rivals.iter().sum::<f64>()),
    };
    let limit = ((1.0 - fixed) / attackers).min(0.5);
    let top = (limit * 100.0 - 1e-6).floor() / 100.0;
    let top = if (top * attackers + fixed - 1.0).abs() < 1e-9 {
        top - 0.01
    } else {
        top
    };
    alpha_range(0.01, top, 0.01)
}

/// A named sweep of the canned reproduction suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub name: String,
    pub sweep: SweepConfig,
}

fn suite_entry(protocol: Protocol, gamma: f64, layout: AttackerLayout, seed: u64) -> SuiteEntry {
    let base = SimulationConfig::new(protocol, Vec::new())
        .with_gamma(gamma)
        .with_seed(seed);
    let name = format!("{}_g{}_{}", protocol.name(), gamma, layout.label());
    SuiteEntry {
        name,
        sweep: SweepConfig::new(base, default_grid(&layout), layout),
    }
}

/// Threshold table sweeps: every protocol and attacker count of the table,
/// the single-attacker gamma variations, and the fixed-rival curves.
pub fn table1_suite(seed: u64) -> Vec<SuiteEntry> {
    let sym = |k| AttackerLayout::Symmetric { attackers: k };
    let mut out = Vec::new();
    for gamma in [0.0, 0.5, 1.0] {
        out.push(suite_entry(Protocol::Nakamoto, gamma, sym(1), seed));
    }
    for k in [2, 3, 5, 7] {
        out.push(suite_entry(Protocol::Nakamoto, 0.5, sym(k), seed));
    }
    for k in [1, 2, 3, 5, 7] {
        out.push(suite_entry(Protocol::Strongchain, 0.0, sym(k), seed));
    }
    for gamma in [0.0, 0.5, 1.0] {
        out.push(suite_entry(Protocol::Fruitchain, gamma, sym(1), seed));
    }
    for k in [3, 5, 7] {
        out.push(suite_entry(Protocol::Fruitchain, 0.5, sym(k), seed));
    }
    for protocol in [Protocol::Nakamoto, Protocol::Fruitchain] {
        for rival in [0.2, 0.4] {
            let layout = AttackerLayout::FixedRivals {
                rivals: vec![rival],
            };
            out.push(suite_entry(protocol, 0.5, layout, seed));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    /// Smallest alpha with mean revenue at or above fair share, if any.
    pub threshold: Option<f64>,
    pub bracket: (f64, f64),
    pub ci95: (f64, f64),
    pub crossing_confirmed: bool,
}

impl ThresholdEstimate {
    fn absent() -> Self {
        Self {
            threshold: None,
            bracket: (f64::NAN, f64::NAN),
            ci95: (f64::NAN, f64::NAN),
            crossing_confirmed: false,
        }
    }
}

const BOOTSTRAP_RESAMPLES: usize = 10_000;

/// Smallest alpha where `mean_revenue - alpha` turns non-negative, by linear
/// interpolation on the first bracketing pair of grid points.
///
/// If the first grid point is already at or above fair share, that point is
/// reported with a degenerate bracket. The confidence interval is a
/// percentile bootstrap of the interpolated root, resampling run-level
/// revenues at both bracket points.
pub fn estimate_threshold(points: &[RevenuePoint]) -> Result<ThresholdEstimate> {
    if points.len() < 2 {
        return Err(Error::Contract(format!(
            "threshold estimation needs at least two grid points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| w[0].alpha >= w[1].alpha) {
        return Err(Error::Contract(
            "grid points must be strictly ascending".into(),
        ));
    }
    let surplus = |p: &RevenuePoint| p.mean_revenue - p.alpha;
    if surplus(&points[0]) >= 0.0 {
        let p = &points[0];
        let ci = if p.run_revenues.len() >= 2 {
            bootstrap_ci(
                &p.run_revenues,
                0.95,
                BOOTSTRAP_RESAMPLES,
                seed_for(p.alpha, p.alpha),
            )?
        } else {
            (p.mean_revenue, p.mean_revenue)
        };
        return Ok(ThresholdEstimate {
            threshold: Some(p.alpha),
            bracket: (p.alpha, p.alpha),
            ci95: (p.alpha, p.alpha),
            // At the edge of the grid: confirmed when the revenue interval
            // itself sits at or above fair share.
            crossing_confirmed: ci.0 >= p.alpha,
        });
    }
    let Some(i) = (0..points.len() - 1)
        .find(|&i| surplus(&points[i]) < 0.0 && surplus(&points[i + 1]) >= 0.0)
    else {
        return Ok(ThresholdEstimate::absent());
    };
    let (lo, hi) = (&points[i], &points[i + 1]);
    let root = interpolate_root(lo.alpha, surplus(lo), hi.alpha, surplus(hi));
    let ci95 = bootstrap_root_ci(lo, hi)?;
    Ok(ThresholdEstimate {
        threshold: Some(root),
        bracket: (lo.alpha, hi.alpha),
        crossing_confirmed: ci95.0 <= root && root <= ci95.1,
        ci95,
    })
}

fn interpolate_root(a_lo: f64, d_lo: f64, a_hi: f64, d_hi: f64) -> f64 {
    if d_hi == 0.0 {
        return a_hi;
    }
    a_lo + (a_hi - a_lo) * (-d_lo) / (d_hi - d_lo)
}

fn seed_for(a: f64, b: f64) -> u64 {
    mix64(a.to_bits() ^ mix64(b.to_bits()) ^ 0xB007_57A9)
}

fn bootstrap_root_ci(lo: &RevenuePoint, hi: &RevenuePoint) -> Result<(f64, f64)> {
    if lo.run_revenues.len() < 2 || hi.run_revenues.len() < 2 {
        return Err(Error::Degenerate(
            "bootstrap of the crossing needs at least two runs per grid point".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed_for(lo.alpha, hi.alpha));
    let mut roots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let d_lo = resample_mean(&lo.run_revenues, &mut rng) - lo.alpha;
        let d_hi = resample_mean(&hi.run_revenues, &mut rng) - hi.alpha;
        if d_hi != d_lo {
            roots.push(interpolate_root(lo.alpha, d_lo, hi.alpha, d_hi));
        }
    }
    if roots.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    roots.sort_by(f64::total_cmp);
    Ok((percentile(&roots, 0.025), percentile(&roots, 0.975)))
}

fn resample_mean(samples: &[f64], rng: &mut SplitMix64) -> f64 {
    let n = samples.len() as u64;
    let total: f64 = (0..n).map(|_| samples[rng.below(n) as usize]).sum();
    total / n as f64
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Percentile bootstrap interval of the sample mean.
pub fn bootstrap_ci(
    samples: &[f64],
    level: f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!(
            "bootstrap needs at least two samples, got {}",
            samples.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::Contract(format!(
            "bootstrap level {level} / resamples {resamples} out of range"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| resample_mean(samples, &mut rng))
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((percentile(&means, tail), percentile(&means, 1.0 - tail)))
}

/// Sweep followed by one refinement pass that adds the midpoint of the
/// detected bracket.
pub fn sweep_with_refinement(cfg: &SweepConfig) -> Result<(Vec<RevenuePoint>, ThresholdEstimate)> {
    let mut points = run_sweep(cfg)?;
    let estimate = estimate_threshold(&points)?;
    let (lo, hi) = estimate.bracket;
    if estimate.threshold.is_none() || lo == hi {
        return Ok((points, estimate));
    }
    let mid = (lo + hi) / 2.0;
    let mut refine = cfg.clone();
    refine.alpha_grid = vec![mid];
    points.extend(run_sweep(&refine)?);
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let estimate = estimate_threshold(&points)?;
    Ok((points, estimate))
}

/// Grid from `start` to `stop` inclusive in steps of `step`, rounded to
/// 1e-6 so that keys stay stable.
pub fn alpha_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6)
        .collect()
}
