//! Recursive time-interval segmentation by data-range comparison.
//!
//! Split lines partition the horizon into subintervals whose data ranges
//! differ. A line survives when the min/max of the data on its two adjacent
//! subintervals differ by at least `eps` (range test) and the subinterval it
//! closes is at least `delta` long (length test). Retained lines trigger
//! recursive refinement inside the subinterval they close; when a pass
//! retains nothing, the search restarts from a denser evenly spaced guess.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::SnapshotMatrix;

/// Ordered split lines `{t_0, ..., t_n}` with `t_0 = 0`-like fixed endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitSet {
    lines: Vec<f64>,
}

impl SplitSet {
    /// Builds from the full list of lines including both endpoints.
    pub fn new(lines: Vec<f64>) -> Result<Self> {
        if lines.len() < 2 {
            return Err(Error::Domain(
                "a split set needs at least its two endpoints".into(),
            ));
        }
        if !lines.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain(format!(
                "split lines must be strictly ascending: {lines:?}"
            )));
        }
        Ok(Self { lines })
    }

    /// Builds from interior lines and the interval `[t_start, t_end]`.
    pub fn from_interior(t_start: f64, t_end: f64, interior: &[f64]) -> Result<Self> {
        let mut lines = Vec::with_capacity(interior.len() + 2);
        lines.push(t_start);
        lines.extend_from_slice(interior);
        lines.push(t_end);
        Self::new(lines)
    }

    pub fn lines(&self) -> &[f64] {
        &self.lines
    }

    pub fn interior(&self) -> &[f64] {
        &self.lines[1..self.lines.len() - 1]
    }

    pub fn num_subintervals(&self) -> usize {
        self.lines.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.lines[0]
    }

    pub fn end(&self) -> f64 {
        *self.lines.last().unwrap()
    }

    /// Subinterval `[t_{k-1}, t_k]` for `k` in `1..=num_subintervals()`.
    pub fn subinterval(&self, k: usize) -> (f64, f64) {
        (self.lines[k - 1], self.lines[k])
    }
}

/// Tuning for the segmentation search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsplitConfig {
    /// Range tolerance as a fraction of the sup norm of the tested row.
    pub eps_fraction: f64,
    /// Length tolerance as a fraction of the horizon.
    pub delta_fraction: f64,
    /// Shared iteration budget across passes, restarts and recursion.
    pub max_iterations: usize,
    /// Interior line count of the first evenly spaced guess.
    pub initial_num_splits: usize,
    /// Number of spatial nodes sampled for the consensus vote.
    pub num_x_tests: usize,
    pub rng_seed: u64,
    /// Fraction of runs that must propose a line for it to survive.
    pub consensus_threshold: f64,
    /// Lines closer than this merge into one; `None` means `delta / 2`.
    pub merge_tolerance: Option<f64>,
}

impl Default for NsplitConfig {
    fn default() -> Self {
        Self {
            eps_fraction: 0.1,
            delta_fraction: 0.1,
            max_iterations: 40,
            initial_num_splits: 4,
            num_x_tests: 5,
            rng_seed: 0,
            consensus_threshold: 0.6,
            merge_tolerance: None,
        }
    }
}

impl NsplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_fraction > 0.0 && self.eps_fraction < 1.0) {
            return Err(Error::Config("eps_fraction must lie in (0, 1)".into()));
        }
        if !(self.delta_fraction > 0.0 && self.delta_fraction < 1.0) {
            return Err(Error::Config("delta_fraction must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 || self.initial_num_splits == 0 || self.num_x_tests == 0 {
            return Err(Error::Config(
                "iteration, split and test counts must be positive".into(),
            ));
        }
        if !(self.consensus_threshold > 0.0 && self.consensus_threshold <= 1.0) {
            return Err(Error::Config(
                "consensus_threshold must lie in (0, 1]".into(),
            ));
        }
        if let Some(m) = self.merge_tolerance {
            if m < 0.0 {
                return Err(Error::Config("merge_tolerance must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn effective_merge_tolerance(&self, horizon: f64) -> f64 {
        self.merge_tolerance
            .unwrap_or(self.delta_fraction * horizon / 2.0)
    }
}

/// One range/length test evaluation, for the diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub line: f64,
    pub node: usize,
    pub eps: f64,
    pub max_diff: f64,
    pub min_diff: f64,
    pub delta: f64,
    pub leading_length: f64,
    /// Only checked for the last interior line.
    pub trailing_length: Option<f64>,
    pub retained: bool,
}

/// Segmentation result for a single tested node.
#[derive(Debug, Clone, PartialEq)]
pub struct NsplitOutcome {
    pub splits: SplitSet,
    pub iterations: usize,
    /// False when the iteration budget ran out before a stable pass.
    pub stable: bool,
    pub log: Vec<ProbeRecord>,
}

/// Min and max of row `x_node` over snapshot columns with `t` in the closed
/// interval `[t_a, t_b]`.
pub fn subinterval_range(
    z: &SnapshotMatrix,
    x_node: usize,
    t_a: f64,
    t_b: f64,
) -> Result<(f64, f64)> {
    if x_node >= z.num_nodes() {
        return Err(Error::Index(format!(
            "node {x_node} out of range for {} nodes",
            z.num_nodes()
        )));
    }
    let cols = z.columns_in(t_a, t_b)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in cols {
        let v = z.values[(x_node, k)];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Range test for interior line `k`: the line is discarded (returns false)
/// only when both the max difference and the min difference between the two
/// adjacent subintervals are strictly below `eps`.
pub fn epsilon_test(
    z: &SnapshotMatrix,
    x_node: usize,
    splits: &SplitSet,
    k: usize,
    eps: f64,
) -> Result<bool> {
    check_interior_index(splits, k)?;
    let lines = splits.lines();
    let (lo_a, hi_a) = subinterval_range(z, x_node, lines[k - 1], lines[k])?;
    let (lo_b, hi_b) = subinterval_range(z, x_node, lines[k], lines[k + 1])?;
    let max_diff = (hi_a - hi_b).abs();
    let min_diff = (lo_a - lo_b).abs();
    Ok(!(max_diff < eps && min_diff < eps))
}

/// Length test for interior line `k`: discards the line when the subinterval
/// it closes is strictly shorter than `delta`; the last interior line also
/// requires the trailing subinterval to be at least `delta` long. Lengths
/// within one part in 1e9 of `delta` count as equal, so grid-snapped lines at
/// exactly `delta` spacing survive roundoff.
pub fn delta_test(splits: &SplitSet, k: usize, delta: f64) -> Result<bool> {
    check_interior_index(splits, k)?;
    let lines = splits.lines();
    let leading = lines[k] - lines[k - 1];
    if strictly_below(leading, delta) {
        return Ok(false);
    }
    if k == lines.len() - 2 {
        let trailing = lines[k + 1] - lines[k];
        if strictly_below(trailing, delta) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn strictly_below(length: f64, delta: f64) -> bool {
    length < delta * (1.0 - 1e-9)
}

fn check_interior_index(splits: &SplitSet, k: usize) -> Result<()> {
    if k == 0 || k + 1 >= splits.lines().len() {
        return Err(Error::Index(format!(
            "k = {k} is not an interior line index (1..={})",
            splits.lines().len().saturating_sub(2)
        )));
    }
    Ok(())
}

fn snap_to_grid(t: f64, grid: &[f64]) -> f64 {
    let i = grid.partition_point(|&g| g < t);
    if i == 0 {
        grid[0]
    } else if i >= grid.len() {
        grid[grid.len() - 1]
    } else if (grid[i] - t).abs() < (t - grid[i - 1]).abs() {
        grid[i]
    } else {
        grid[i - 1]
    }
}

fn evenly_spaced_interior(a: f64, b: f64, count: usize, grid: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = (1..=count)
        .map(|i| snap_to_grid(a + (b - a) * i as f64 / (count + 1) as f64, grid))
        .filter(|&t| t > a && t < b)
        .collect();
    out.dedup();
    out
}

/// Clusters lines closer than `tol`, replacing each cluster by its snapped
/// mean; lines falling on or within `tol` of an endpoint are absorbed.
fn merge_redundant(lines: &[f64], a: f64, b: f64, tol: f64, grid: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = lines.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sorted.dedup();
    let mut merged = vec![a];
    let mut cluster: Vec<f64> = Vec::new();
    let flush = |cluster: &mut Vec<f64>, merged: &mut Vec<f64>| {
        if cluster.is_empty() {
            return;
        }
        let mean = cluster.iter().sum::<f64>() / cluster.len() as f64;
        let snapped = snap_to_grid(mean, grid);
        if snapped - a > tol && b - snapped > tol && *merged.last().unwrap() < snapped {
            merged.push(snapped);
        }
        cluster.clear();
    };
    for &t in sorted.iter().filter(|&&t| t > a && t < b) {
        if let Some(&last) = cluster.last() {
            if t - last > tol {
                flush(&mut cluster, &mut merged);
            }
        }
        cluster.push(t);
    }
    flush(&mut cluster, &mut merged);
    merged.push(b);
    merged
}

struct SearchContext<'a> {
    z: &'a SnapshotMatrix,
    x_node: usize,
    eps: f64,
    delta: f64,
    merge_tol: f64,
    max_iterations: usize,
}

/// One test pass over the current lines (batch semantics: every line is
/// judged against the same input configuration; discards apply afterwards).
/// Retained lines trigger recursive refinement of the subinterval they close,
/// and the last retained line also refines its trailing subinterval.
fn pass(
    ctx: &SearchContext<'_>,
    lines: &[f64],
    iterations: &mut usize,
    log: &mut Vec<ProbeRecord>,
) -> Result<Vec<f64>> {
    let a = lines[0];
    let b = *lines.last().unwrap();
    let splits = SplitSet::new(lines.to_vec())?;
    let mut retained = vec![a, b];
    let last_interior = lines.len() - 2;
    for k in 1..lines.len() - 1 {
        let eps_ok = {
            let (lo_a, hi_a) = subinterval_range(ctx.z, ctx.x_node, lines[k - 1], lines[k])?;
            let (lo_b, hi_b) = subinterval_range(ctx.z, ctx.x_node, lines[k], lines[k + 1])?;
            let max_diff = (hi_a - hi_b).abs();
            let min_diff = (lo_a - lo_b).abs();
            let keep = !(max_diff < ctx.eps && min_diff < ctx.eps);
            log.push(ProbeRecord {
                line: lines[k],
                node: ctx.x_node,
                eps: ctx.eps,
                max_diff,
                min_diff,
                delta: ctx.delta,
                leading_length: lines[k] - lines[k - 1],
                trailing_length: (k == last_interior).then(|| lines[k + 1] - lines[k]),
                retained: false,
            });
            keep
        };
        let delta_ok = delta_test(&splits, k, ctx.delta)?;
        let keep = eps_ok && delta_ok;
        log.last_mut().unwrap().retained = keep;
        if !keep {
            continue;
        }
        retained.push(lines[k]);
        refine_into(ctx, lines[k - 1], lines[k], &mut retained, iterations, log)?;
        if k == last_interior {
            refine_into(ctx, lines[k], lines[k + 1], &mut retained, iterations, log)?;
        }
    }
    Ok(merge_redundant(&retained, a, b, ctx.merge_tol, &ctx.z.t_grid))
}

/// Recursive refinement: drop one bisecting candidate into `[a, b]` and run
/// the search restricted to that span, keeping whatever survives.
fn refine_into(
    ctx: &SearchContext<'_>,
    a: f64,
    b: f64,
    retained: &mut Vec<f64>,
    iterations: &mut usize,
    log: &mut Vec<ProbeRecord>,
) -> Result<()> {
    if *iterations >= ctx.max_iterations || strictly_below(b - a, 2.0 * ctx.delta) {
        return Ok(());
    }
    let mid = snap_to_grid(0.5 * (a + b), &ctx.z.t_grid);
    if mid <= a || mid >= b {
        return Ok(());
    }
    let sub = search_span(ctx, a, b, vec![a, mid, b], false, iterations, log)?;
    retained.extend_from_slice(&sub[1..sub.len() - 1]);
    Ok(())
}

/// Iterated passes over a span until the line set reaches a fixpoint, the
/// budget runs out, or (at top level) denser restart guesses become
/// infeasible under the length tolerance.
fn search_span(
    ctx: &SearchContext<'_>,
    a: f64,
    b: f64,
    init: Vec<f64>,
    top_level: bool,
    iterations: &mut usize,
    log: &mut Vec<ProbeRecord>,
) -> Result<Vec<f64>> {
    let mut lines = init;
    let mut guess_count = lines.len().saturating_sub(2);
    loop {
        if lines.len() <= 2 && !top_level {
            return Ok(vec![a, b]);
        }
        if *iterations >= ctx.max_iterations {
            return Ok(lines);
        }
        *iterations += 1;
        let out = pass(ctx, &lines, iterations, log)?;
        if out.len() <= 2 {
            if !top_level {
                return Ok(vec![a, b]);
            }
            // Restart with one more line than the previous guess, until the
            // spacing of a fresh evenly spaced guess drops below delta.
            guess_count += 1;
            if strictly_below((b - a) / (guess_count + 1) as f64, ctx.delta) {
                return Ok(vec![a, b]);
            }
            let interior = evenly_spaced_interior(a, b, guess_count, &ctx.z.t_grid);
            if interior.is_empty() {
                return Ok(vec![a, b]);
            }
            let mut fresh = vec![a];
            fresh.extend(interior);
            fresh.push(b);
            lines = fresh;
            continue;
        }
        if out == lines {
            return Ok(out);
        }
        lines = out;
    }
}

/// Segmentation search along a single spatial node, starting from the given
/// split lines. Returns the surviving lines, the iteration count, and whether
/// the search reached a stable pass within budget.
pub fn n_split(
    z: &SnapshotMatrix,
    x_node: usize,
    init: &SplitSet,
    cfg: &NsplitConfig,
) -> Result<NsplitOutcome> {
    z.validate()?;
    cfg.validate()?;
    if x_node >= z.num_nodes() {
        return Err(Error::Index(format!(
            "node {x_node} out of range for {} nodes",
            z.num_nodes()
        )));
    }
    let t0 = z.t_grid[0];
    let t_end = *z.t_grid.last().unwrap();
    if (init.start() - t0).abs() > 0.0 || (init.end() - t_end).abs() > 0.0 {
        return Err(Error::Domain(format!(
            "split set endpoints [{}, {}] do not match the data horizon [{}, {}]",
            init.start(),
            init.end(),
            t0,
            t_end
        )));
    }
    let horizon = t_end - t0;
    let row_norm = (0..z.num_snapshots())
        .map(|k| z.values[(x_node, k)].abs())
        .fold(0.0, f64::max);
    let ctx = SearchContext {
        z,
        x_node,
        eps: cfg.eps_fraction * row_norm,
        delta: cfg.delta_fraction * horizon,
        merge_tol: cfg.effective_merge_tolerance(horizon),
        max_iterations: cfg.max_iterations,
    };
    let mut iterations = 0;
    let mut log = Vec::new();
    let lines = search_span(
        &ctx,
        t0,
        t_end,
        init.lines().to_vec(),
        true,
        &mut iterations,
        &mut log,
    )?;
    let stable = iterations < cfg.max_iterations;
    Ok(NsplitOutcome {
        splits: SplitSet::new(lines)?,
        iterations,
        stable,
        log,
    })
}

/// Consensus segmentation report.
#[derive(Debug, Clone)]
pub struct RobustSplitReport {
    pub splits: SplitSet,
    /// Per-node outcomes in sampling order.
    pub runs: Vec<(usize, NsplitOutcome)>,
}

/// Runs [`n_split`] on several randomly chosen spatial nodes and keeps the
/// lines proposed by at least `consensus_threshold` of the runs; surviving
/// clusters are averaged, snapped to the snapshot grid, and re-validated
/// against the tests on the final configuration.
pub fn robust_split(z: &SnapshotMatrix, cfg: &NsplitConfig) -> Result<SplitSet> {
    Ok(robust_split_detailed(z, cfg)?.splits)
}

pub fn robust_split_detailed(z: &SnapshotMatrix, cfg: &NsplitConfig) -> Result<RobustSplitReport> {
    z.validate()?;
    cfg.validate()?;
    let m = z.num_nodes();
    let t0 = z.t_grid[0];
    let t_end = *z.t_grid.last().unwrap();
    let horizon = t_end - t0;
    let merge_tol = cfg.effective_merge_tolerance(horizon);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let count = cfg.num_x_tests.min(m);
    let nodes: Vec<usize> = sample(&mut rng, m, count).into_vec();

    let init_interior =
        evenly_spaced_interior(t0, t_end, cfg.initial_num_splits, &z.t_grid);
    let init = SplitSet::from_interior(t0, t_end, &init_interior)?;

    let runs: Vec<(usize, NsplitOutcome)> = nodes
        .par_iter()
        .map(|&node| n_split(z, node, &init, cfg).map(|out| (node, out)))
        .collect::<Result<_>>()?;

    // Cluster proposals across runs; a cluster survives when enough distinct
    // runs contributed to it.
    let mut proposals: Vec<(f64, usize)> = Vec::new();
    for (node, outcome) in &runs {
        for &line in outcome.splits.interior() {
            proposals.push((line, *node));
        }
    }
    proposals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let needed = cfg.consensus_threshold * runs.len() as f64 - 1e-9;
    let mut survivors: Vec<f64> = Vec::new();
    let mut cluster: Vec<(f64, usize)> = Vec::new();
    let flush = |cluster: &mut Vec<(f64, usize)>, survivors: &mut Vec<f64>| {
        if cluster.is_empty() {
            return;
        }
        let mut voters: Vec<usize> = cluster.iter().map(|&(_, n)| n).collect();
        voters.sort_unstable();
        voters.dedup();
        if voters.len() as f64 >= needed {
            let mean = cluster.iter().map(|&(t, _)| t).sum::<f64>() / cluster.len() as f64;
            survivors.push(snap_to_grid(mean, &z.t_grid));
        }
        cluster.clear();
    };
    for (t, node) in proposals {
        if let Some(&(last, _)) = cluster.last() {
            if t - last > merge_tol {
                flush(&mut cluster, &mut survivors);
            }
        }
        cluster.push((t, node));
    }
    flush(&mut cluster, &mut survivors);
    survivors.dedup();

    // Lines must still pass both tests on the final configuration for the
    // consensus nodes; dropping one changes the neighbors, so iterate.
    let eps_by_node: Vec<(usize, f64)> = runs
        .iter()
        .map(|(node, _)| {
            let norm = (0..z.num_snapshots())
                .map(|k| z.values[(*node, k)].abs())
                .fold(0.0, f64::max);
            (*node, cfg.eps_fraction * norm)
        })
        .collect();
    let delta = cfg.delta_fraction * horizon;
    loop {
        let candidate = SplitSet::from_interior(t0, t_end, &survivors)?;
        let mut keep = vec![true; survivors.len()];
        let mut changed = false;
        for (idx, _) in survivors.iter().enumerate() {
            let k = idx + 1;
            let mut votes = 0usize;
            for &(node, eps) in &eps_by_node {
                if epsilon_test(z, node, &candidate, k, eps)? && delta_test(&candidate, k, delta)? {
                    votes += 1;
                }
            }
            if (votes as f64) < needed {
                keep[idx] = false;
                changed = true;
            }
        }
        if !changed {
            return Ok(RobustSplitReport {
                splits: candidate,
                runs,
            });
        }
        survivors = survivors
            .iter()
            .zip(&keep)
            .filter_map(|(&t, &k)| k.then_some(t))
            .collect();
    }
}
