//! Section evaluation: playability under a jump envelope, style distance
//! against the training sections, and parameter sweeps with summary
//! statistics.
//!
//! Playability walks the section left to right over standable solid tiles
//! with a greedy farthest-hop policy. Style distance optimally matches
//! generated sprites to an original's sprites per type and charges a full
//! frame diagonal for anything unmatched. Sweeps vary one generation
//! parameter at a time, sample outputs deterministically, and report
//! playability and style trends with correlations.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::{generate_all, reconstruct_originals, GenerationParams};
use crate::model::StyleModel;
use crate::trace::Frame;

/// What the player's jump can cross: at most `max_rise` tiles up, at most
/// `max_gap` tiles forward, and at most `max_drop` tiles down (None means
/// falls are never fatal).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpEnvelope {
    pub max_rise: i32,
    pub max_gap: i32,
    pub max_drop: Option<i32>,
}

impl Default for JumpEnvelope {
    fn default() -> Self {
        JumpEnvelope {
            max_rise: 4,
            max_gap: 4,
            max_drop: None,
        }
    }
}

/// Why a section was judged unplayable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// No standable tile close enough to the left edge to enter.
    NoEntry,
    /// No standable tile close enough to the right edge to exit.
    NoExit,
    /// Entries and exits exist but no greedy hop sequence connects them.
    NoPath,
}

/// Playability verdict plus the witnessing hop sequence when playable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayabilityReport {
    pub playable: bool,
    pub failure: Option<FailureReason>,
    /// Standable tiles visited, entry first, when playable.
    pub path: Vec<(i32, i32)>,
}

/// Tiles a player can stand on: solid-typed cells with at least two
/// solid-free cells directly above. Sorted by (x, y).
pub fn standable_tiles(frame: &Frame, solid: &BTreeSet<u16>) -> Vec<(i32, i32)> {
    let solid_cells: BTreeSet<(i32, i32)> = frame
        .instances
        .iter()
        .filter(|i| solid.contains(&i.type_id))
        .map(|i| (i.x, i.y))
        .collect();
    let mut tiles: Vec<(i32, i32)> = solid_cells
        .iter()
        .filter(|&&(x, y)| {
            !solid_cells.contains(&(x, y - 1)) && !solid_cells.contains(&(x, y - 2))
        })
        .copied()
        .collect();
    tiles.sort_unstable();
    tiles
}

fn reachable(from: (i32, i32), to: (i32, i32), envelope: &JumpEnvelope) -> bool {
    let dx = to.0 - from.0;
    if dx < 1 || dx > envelope.max_gap {
        return false;
    }
    let rise = (from.1 - to.1).max(0);
    if rise > envelope.max_rise {
        return false;
    }
    let drop = (to.1 - from.1).max(0);
    match envelope.max_drop {
        Some(limit) => drop <= limit,
        None => true,
    }
}

fn is_entry(tile: (i32, i32), envelope: &JumpEnvelope) -> bool {
    tile.0 < envelope.max_gap
}

fn is_exit(tile: (i32, i32), width: u32, envelope: &JumpEnvelope) -> bool {
    tile.0 >= width as i32 - envelope.max_gap
}

/// Greedy traversal: from `entry`, always hop to the farthest-forward
/// reachable standable tile (highest on ties) until no progress is
/// possible; succeed if the stopping tile can exit on the right.
fn greedy_path(
    entry: (i32, i32),
    tiles: &[(i32, i32)],
    width: u32,
    envelope: &JumpEnvelope,
) -> Option<Vec<(i32, i32)>> {
    let mut path = vec![entry];
    let mut cur = entry;
    loop {
        if is_exit(cur, width, envelope) {
            return Some(path);
        }
        let next = tiles
            .iter()
            .filter(|&&t| reachable(cur, t, envelope))
            .max_by_key(|&&(x, y)| (x, -y));
        match next {
            Some(&t) => {
                path.push(t);
                cur = t;
            }
            None => return None,
        }
    }
}

/// Judge a section traversable left to right under the jump envelope.
pub fn is_playable(
    frame: &Frame,
    solid: &BTreeSet<u16>,
    envelope: &JumpEnvelope,
) -> PlayabilityReport {
    let tiles = standable_tiles(frame, solid);
    let entries: Vec<(i32, i32)> = tiles.iter().filter(|&&t| is_entry(t, envelope)).copied().collect();
    if entries.is_empty() {
        return PlayabilityReport {
            playable: false,
            failure: Some(FailureReason::NoEntry),
            path: Vec::new(),
        };
    }
    if !tiles.iter().any(|&t| is_exit(t, frame.width, envelope)) {
        return PlayabilityReport {
            playable: false,
            failure: Some(FailureReason::NoExit),
            path: Vec::new(),
        };
    }
    for entry in entries {
        if let Some(path) = greedy_path(entry, &tiles, frame.width, envelope) {
            return PlayabilityReport {
                playable: true,
                failure: None,
                path,
            };
        }
    }
    PlayabilityReport {
        playable: false,
        failure: Some(FailureReason::NoPath),
        path: Vec::new(),
    }
}

// --- style distance ---------------------------------------------------------

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// total cost. Shortest-augmenting-path formulation with potentials.
fn hungarian_min_cost(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        if matched_row[j] > 0 {
            total += cost[matched_row[j] - 1][j - 1];
        }
    }
    total
}

/// Optimal per-type matching cost between two instance sets of one frame
/// pair. Unmatched instances on either side cost one frame diagonal each.
fn type_matching_cost(a: &[(f64, f64)], b: &[(f64, f64)], diagonal: f64) -> f64 {
    let n = a.len().max(b.len());
    if n == 0 {
        return 0.0;
    }
    let mut cost = vec![vec![0.0f64; n]; n];
    for (i, row) in cost.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = match (a.get(i), b.get(j)) {
                (Some(&(ax, ay)), Some(&(bx, by))) => {
                    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
                }
                (None, None) => 0.0,
                _ => diagonal,
            };
        }
    }
    hungarian_min_cost(&cost)
}

/// How far a generated section sits from its nearest training section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyleScore {
    /// Total optimal displacement divided by the generated instance count.
    pub score: f64,
    /// Index of the nearest original (lowest index on ties).
    pub nearest_original: usize,
    /// True when the generated section was empty and the score is vacuous.
    pub degenerate: bool,
}

/// Per sprite type, optimally match generated instances to an original's
/// instances (Euclidean cost, one frame diagonal per unmatched instance),
/// average the total over the generated instance count, and take the
/// closest original.
pub fn style_distance(generated: &Frame, originals: &[Frame]) -> Result<StyleScore> {
    if originals.is_empty() {
        return Err(Error::validation("style distance needs at least one original section"));
    }
    if generated.instances.is_empty() {
        return Ok(StyleScore {
            score: 0.0,
            nearest_original: 0,
            degenerate: true,
        });
    }
    let diagonal = ((generated.width as f64).powi(2) + (generated.height as f64).powi(2)).sqrt();
    let types: BTreeSet<u16> = generated
        .instances
        .iter()
        .map(|i| i.type_id)
        .chain(originals.iter().flat_map(|o| o.instances.iter().map(|i| i.type_id)))
        .collect();
    let points_of = |frame: &Frame, t: u16| -> Vec<(f64, f64)> {
        frame
            .instances
            .iter()
            .filter(|i| i.type_id == t)
            .map(|i| (i.x as f64, i.y as f64))
            .collect()
    };
    let mut best: Option<(f64, usize)> = None;
    for (oi, original) in originals.iter().enumerate() {
        let total: f64 = types
            .iter()
            .map(|&t| type_matching_cost(&points_of(generated, t), &points_of(original, t), diagonal))
            .sum();
        let score = total / generated.instances.len() as f64;
        if best.map_or(true, |(b, _)| score < b) {
            best = Some((score, oi));
        }
    }
    let (score, nearest_original) = best.expect("at least one original");
    Ok(StyleScore {
        score,
        nearest_original,
        degenerate: false,
    })
}

// --- statistics ---------------------------------------------------------------

/// Midpoint median; None for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN medians"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Pearson correlation; None when fewer than two points or either series is
/// constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Average ranks, ties sharing their midpoint rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN ranks"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; None under the same conditions as Pearson.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    pearson(&ranks(xs), &ranks(ys))
}

// --- sweeps --------------------------------------------------------------------

/// Which generation knob a sweep row varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariedParam {
    Coexistence,
    EdgeThreshold,
}

impl VariedParam {
    pub fn label(self) -> &'static str {
        match self {
            VariedParam::Coexistence => "p_C",
            VariedParam::EdgeThreshold => "p_E",
        }
    }
}

/// Sweep plan: which values to vary, what to hold fixed, how to sample and
/// judge the outputs.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub p_c_values: Vec<f64>,
    pub p_e_values: Vec<f64>,
    pub held_p_c: f64,
    pub held_p_e: f64,
    pub sample_size: usize,
    pub envelope: JumpEnvelope,
    pub solid_types: BTreeSet<u16>,
    pub seed: u64,
    pub base: GenerationParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p_c_values: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            p_e_values: vec![0.05, 0.1],
            held_p_c: 0.8,
            held_p_e: 0.1,
            sample_size: 20,
            envelope: JumpEnvelope::default(),
            solid_types: BTreeSet::new(),
            seed: 0,
            base: GenerationParams::default(),
        }
    }
}

/// One sweep measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub varied: VariedParam,
    pub p_c: f64,
    pub p_e: f64,
    /// Sections actually sampled (may fall short of the plan).
    pub sample_size: usize,
    /// None when nothing could be sampled.
    pub percent_playable: Option<f64>,
    pub median_style: Option<f64>,
    pub raw_count: usize,
    pub kept_count: usize,
    /// True when fewer novel sections existed than the plan asked for.
    pub under_sampled: bool,
}

/// Correlation of one varied parameter against one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEntry {
    pub parameter: &'static str,
    pub measure: &'static str,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub correlations: Vec<CorrelationEntry>,
}

fn row_rng(seed: u64, row_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (row_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn measure_row(
    model: &StyleModel,
    originals: &[Frame],
    config: &SweepConfig,
    varied: VariedParam,
    params: &GenerationParams,
    row_index: usize,
) -> Result<SweepRow> {
    let result = generate_all(model, params)?;
    let kept = &result.kept;
    let take = config.sample_size.min(kept.len());
    let mut rng = row_rng(config.seed, row_index);
    let chosen = rand::seq::index::sample(&mut rng, kept.len(), take);
    let mut playable = 0usize;
    let mut styles = Vec::with_capacity(take);
    for idx in chosen.iter() {
        let frame = &kept[idx].frame;
        if is_playable(frame, &config.solid_types, &config.envelope).playable {
            playable += 1;
        }
        styles.push(style_distance(frame, originals)?.score);
    }
    Ok(SweepRow {
        varied,
        p_c: params.p_c,
        p_e: params.p_e,
        sample_size: take,
        percent_playable: (take > 0).then(|| 100.0 * playable as f64 / take as f64),
        median_style: median(&styles),
        raw_count: result.raw.len(),
        kept_count: kept.len(),
        under_sampled: kept.len() < config.sample_size,
    })
}

/// Vary the coexistence threshold, then the edge threshold, holding the
/// other fixed; measure playability and style per row and correlate each
/// varied parameter against both measures.
pub fn sweep(model: &StyleModel, config: &SweepConfig) -> Result<SweepReport> {
    let originals = reconstruct_originals(model);
    let mut rows = Vec::new();
    let mut row_index = 0usize;
    for &p_c in &config.p_c_values {
        let params = GenerationParams {
            p_c,
            p_e: config.held_p_e,
            ..config.base
        };
        rows.push(measure_row(model, &originals, config, VariedParam::Coexistence, &params, row_index)?);
        row_index += 1;
    }
    for &p_e in &config.p_e_values {
        let params = GenerationParams {
            p_e,
            p_c: config.held_p_c,
            ..config.base
        };
        rows.push(measure_row(
            model,
            &originals,
            config,
            VariedParam::EdgeThreshold,
            &params,
            row_index,
        )?);
        row_index += 1;
    }
    let mut correlations = Vec::new();
    for varied in [VariedParam::Coexistence, VariedParam::EdgeThreshold] {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.varied == varied).collect();
        let value_of = |r: &SweepRow| match varied {
            VariedParam::Coexistence => r.p_c,
            VariedParam::EdgeThreshold => r.p_e,
        };
        for (measure, pick) in [
            ("percent_playable", (|r: &SweepRow| r.percent_playable) as fn(&SweepRow) -> Option<f64>),
            ("median_style", |r: &SweepRow| r.median_style),
        ] {
            let pairs: Vec<(f64, f64)> = group
                .iter()
                .filter_map(|r| pick(r).map(|y| (value_of(r), y)))
                .collect();
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            correlations.push(CorrelationEntry {
                parameter: varied.label(),
                measure,
                r: pearson(&xs, &ys),
            });
        }
    }
    Ok(SweepReport { rows, correlations })
}

/// Render a sweep as CSV: a data table, one blank line, a correlation table.
pub fn sweep_csv(report: &SweepReport) -> String {
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x}"),
        None => "NaN".to_string(),
    };
    let mut out = String::from("p_C,p_E,sample_size,percent_playable,median_style,raw_count\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.p_c,
            row.p_e,
            row.sample_size,
            fmt_opt(row.percent_playable),
            fmt_opt(row.median_style),
            row.raw_count,
        ));
    }
    out.push('\n');
    out.push_str("parameter,measure,pearson_r\n");
    for c in &report.correlations {
        out.push_str(&format!("{},{},{}\n", c.parameter, c.measure, fmt_opt(c.r)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        build_edge_probability_table, DNode, GNode, LNode, ModelProvenance, Relation, SNode,
    };
    use crate::trace::{SpriteCatalog, SpriteInstance};
    use proptest::prelude::*;
    use rand::Rng;

    fn frame(width: u32, height: u32, instances: &[(u16, i32, i32)]) -> Frame {
        let inst = instances
            .iter()
            .map(|&(t, x, y)| SpriteInstance::new(t, x, y))
            .collect();
        Frame::new(0, width, height, inst).unwrap()
    }

    fn solid_only() -> BTreeSet<u16> {
        [0u16].into_iter().collect()
    }

    // -- standable tiles --

    #[test]
    fn solid_with_clear_headroom_is_standable() {
        let f = frame(8, 8, &[(0, 3, 5)]);
        assert_eq!(standable_tiles(&f, &solid_only()), vec![(3, 5)]);
    }

    #[test]
    fn solid_directly_below_another_solid_is_not_standable() {
        let f = frame(8, 8, &[(0, 3, 5), (0, 3, 4)]);
        assert_eq!(standable_tiles(&f, &solid_only()), vec![(3, 4)]);
        // Two above also blocks.
        let g = frame(8, 8, &[(0, 3, 5), (0, 3, 3)]);
        assert_eq!(standable_tiles(&g, &solid_only()), vec![(3, 3)]);
    }

    #[test]
    fn decor_overhead_does_not_block_standing() {
        let f = frame(8, 8, &[(0, 3, 5), (1, 3, 4)]);
        assert_eq!(standable_tiles(&f, &solid_only()), vec![(3, 5)]);
    }

    #[test]
    fn top_rows_count_as_open_air() {
        let f = frame(8, 8, &[(0, 2, 0), (0, 4, 1)]);
        let tiles = standable_tiles(&f, &solid_only());
        assert_eq!(tiles, vec![(2, 0), (4, 1)]);
    }

    // -- playability --

    fn floor(width: u32, height: u32, y: i32, xs: impl Iterator<Item = i32>) -> Frame {
        let cells: Vec<(u16, i32, i32)> = xs.map(|x| (0u16, x, y)).collect();
        frame(width, height, &cells)
    }

    #[test]
    fn full_floor_is_playable() {
        let f = floor(16, 8, 6, 0..16);
        let report = is_playable(&f, &solid_only(), &JumpEnvelope::default());
        assert!(report.playable);
        assert_eq!(report.failure, None);
        assert_eq!(report.path.first(), Some(&(0, 6)));
        assert!(report.path.last().unwrap().0 >= 12);
        // Greedy takes four-tile strides.
        assert_eq!(report.path, vec![(0, 6), (4, 6), (8, 6), (12, 6)]);
    }

    #[test]
    fn missing_entry_is_reported_first() {
        // Platforms only on the right half.
        let f = floor(16, 8, 6, 8..16);
        let report = is_playable(&f, &solid_only(), &JumpEnvelope::default());
        assert!(!report.playable);
        assert_eq!(report.failure, Some(FailureReason::NoEntry));
    }

    #[test]
    fn missing_exit_is_reported_before_pathing() {
        let f = floor(16, 8, 6, 0..6);
        let report = is_playable(&f, &solid_only(), &JumpEnvelope::default());
        assert!(!report.playable);
        assert_eq!(report.failure, Some(FailureReason::NoExit));
    }

    #[test]
    fn unbridgeable_gap_fails_with_no_path() {
        // Entry cluster and exit platform separated by five empty columns.
        let f = frame(16, 8, &[(0, 0, 6), (0, 1, 6), (0, 2, 6), (0, 13, 6), (0, 14, 6)]);
        let report = is_playable(&f, &solid_only(), &JumpEnvelope::default());
        assert!(!report.playable);
        assert_eq!(report.failure, Some(FailureReason::NoPath));
    }

    #[test]
    fn rise_and_drop_limits_bind() {
        // A ledge five tiles up blocks the default envelope.
        let f = frame(16, 12, &[(0, 2, 10), (0, 5, 5), (0, 9, 5), (0, 12, 5)]);
        let report = is_playable(&f, &solid_only(), &JumpEnvelope::default());
        assert!(!report.playable);
        // With a generous rise the same section passes.
        let loose = JumpEnvelope { max_rise: 5, ..JumpEnvelope::default() };
        assert!(is_playable(&f, &solid_only(), &loose).playable);
        // Falls can be limited too.
        let g = frame(16, 12, &[(0, 2, 2), (0, 6, 10), (0, 10, 10), (0, 13, 10)]);
        let strict = JumpEnvelope { max_drop: Some(3), ..JumpEnvelope::default() };
        assert!(!is_playable(&g, &solid_only(), &strict).playable);
        assert!(is_playable(&g, &solid_only(), &JumpEnvelope::default()).playable);
    }

    /// Exhaustive breadth-first reachability with the same hop rule.
    fn bfs_playable(frame: &Frame, solid: &BTreeSet<u16>, envelope: &JumpEnvelope) -> bool {
        let tiles = standable_tiles(frame, solid);
        let mut queue: Vec<(i32, i32)> =
            tiles.iter().filter(|&&t| is_entry(t, envelope)).copied().collect();
        let mut seen: BTreeSet<(i32, i32)> = queue.iter().copied().collect();
        while let Some(cur) = queue.pop() {
            if is_exit(cur, frame.width, envelope) {
                return true;
            }
            for &t in &tiles {
                if !seen.contains(&t) && reachable(cur, t, envelope) {
                    seen.insert(t);
                    queue.push(t);
                }
            }
        }
        false
    }

    #[test]
    fn greedy_success_implies_exhaustive_success() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let envelope = JumpEnvelope::default();
        let mut greedy_wins = 0;
        for _ in 0..200 {
            let mut cells = BTreeSet::new();
            let n = rng.random_range(3..30);
            for _ in 0..n {
                cells.insert((0u16, rng.random_range(0..16i32), rng.random_range(2..10i32)));
            }
            let f = frame(16, 10, &cells.iter().copied().collect::<Vec<_>>());
            let greedy = is_playable(&f, &solid_only(), &envelope).playable;
            let exhaustive = bfs_playable(&f, &solid_only(), &envelope);
            if greedy {
                greedy_wins += 1;
                assert!(exhaustive, "greedy found a path the oracle rejects: {cells:?}");
            }
        }
        assert!(greedy_wins > 0, "the random pool never produced a playable section");
    }

    #[test]
    fn greedy_can_strand_where_exhaustive_search_survives() {
        // Two tiles share x=4: the greedy policy prefers the higher one,
        // which (with a capped drop) is a dead end. The lower route works,
        // and the exhaustive oracle finds it.
        let f = frame(
            16,
            12,
            &[(0, 0, 10), (0, 4, 6), (0, 4, 10), (0, 8, 10), (0, 12, 10)],
        );
        let envelope = JumpEnvelope { max_drop: Some(2), ..JumpEnvelope::default() };
        assert!(bfs_playable(&f, &solid_only(), &envelope));
        let report = is_playable(&f, &solid_only(), &envelope);
        assert!(!report.playable);
        assert_eq!(report.failure, Some(FailureReason::NoPath));
    }

    // -- Hungarian --

    fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        if cost.is_empty() {
            return 0.0;
        }
        go(cost, 0, &mut vec![false; cost.len()])
    }

    #[test]
    fn assignment_matches_brute_force_on_random_matrices() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..=5usize);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| (rng.random_range(0..100) as f64) / 4.0).collect())
                .collect();
            let fast = hungarian_min_cost(&cost);
            let slow = brute_force_min_cost(&cost);
            assert!(
                (fast - slow).abs() < 1e-9,
                "hungarian {fast} != brute force {slow} on {cost:?}"
            );
        }
    }

    // -- style distance --

    #[test]
    fn identical_sections_have_zero_style_distance() {
        let f = frame(16, 12, &[(0, 1, 1), (0, 5, 5), (1, 9, 9)]);
        let score = style_distance(&f, &[f.clone()]).unwrap();
        assert_eq!(score.score, 0.0);
        assert_eq!(score.nearest_original, 0);
        assert!(!score.degenerate);
    }

    #[test]
    fn one_moved_sprite_costs_its_displacement_over_the_count() {
        // Ten sprites; one moved two tiles: 2 / 10 = 0.2.
        let mut original_cells: Vec<(u16, i32, i32)> = (0..10).map(|i| (0u16, i, 5)).collect();
        let original = frame(16, 12, &original_cells);
        original_cells[9] = (0, 9, 7); // moved down two tiles
        let perturbed = frame(16, 12, &original_cells);
        let score = style_distance(&perturbed, &[original]).unwrap();
        assert!((score.score - 0.2).abs() < 1e-9);
    }

    #[test]
    fn unmatched_sprites_cost_a_frame_diagonal() {
        // 16x12 frame: diagonal 20. Eleven generated sprites, ten matched
        // exactly, one extra: 20 / 11.
        let original: Vec<(u16, i32, i32)> = (0..10).map(|i| (0u16, i, 5)).collect();
        let mut generated = original.clone();
        generated.push((0, 12, 2));
        let score = style_distance(
            &frame(16, 12, &generated),
            &[frame(16, 12, &original)],
        )
        .unwrap();
        assert!((score.score - 20.0 / 11.0).abs() < 1e-9);
    }

    #[test]
    fn nearest_original_wins_with_low_index_ties() {
        let gen = frame(16, 12, &[(0, 5, 5)]);
        let near = frame(16, 12, &[(0, 6, 5)]);
        let far = frame(16, 12, &[(0, 1, 1)]);
        let score = style_distance(&gen, &[far.clone(), near.clone()]).unwrap();
        assert_eq!(score.nearest_original, 1);
        assert_eq!(score.score, 1.0);
        // Exact tie: both originals identical; the first index is reported.
        let tie = style_distance(&gen, &[near.clone(), near]).unwrap();
        assert_eq!(tie.nearest_original, 0);
    }

    #[test]
    fn empty_generated_section_is_degenerate() {
        let gen = frame(16, 12, &[]);
        let orig = frame(16, 12, &[(0, 1, 1)]);
        let score = style_distance(&gen, &[orig]).unwrap();
        assert!(score.degenerate);
        assert_eq!(score.score, 0.0);
    }

    #[test]
    fn missing_originals_are_an_error() {
        let gen = frame(16, 12, &[(0, 1, 1)]);
        assert!(style_distance(&gen, &[]).is_err());
    }

    // -- statistics --

    #[test]
    fn median_takes_midpoints() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[1.0, 9.0]), Some(5.0));
        assert_eq!(median(&[5.0, 1.0, 9.0]), Some(5.0));
        assert_eq!(median(&[4.0, 1.0, 9.0, 6.0]), Some(5.0));
    }

    #[test]
    fn pearson_matches_hand_values() {
        let xs = [1.0, 2.0, 3.0];
        assert!((pearson(&xs, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&xs, &[5.0, 5.0, 5.0]), None);
        assert_eq!(pearson(&[1.0], &[2.0]), None);
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        let xs = [0.5, 0.6, 0.7, 0.8, 0.9];
        let ys = [55.0, 55.0, 70.0, 100.0, 100.0];
        let rho = spearman(&xs, &ys).unwrap();
        assert!(rho > 0.9, "expected a strong monotone signal, got {rho}");
        // A strictly decreasing series is exactly -1 regardless of scale.
        let down = [9.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// The greedy verdict never contradicts exhaustive reachability.
        #[test]
        fn prop_greedy_is_sound(
            cells in proptest::collection::btree_set((0i32..16, 2i32..10), 1..25),
            max_drop in proptest::option::of(0i32..6),
        ) {
            let typed: Vec<(u16, i32, i32)> = cells.iter().map(|&(x, y)| (0u16, x, y)).collect();
            let f = frame(16, 10, &typed);
            let envelope = JumpEnvelope { max_drop, ..JumpEnvelope::default() };
            let greedy = is_playable(&f, &solid_only(), &envelope);
            if greedy.playable {
                prop_assert!(bfs_playable(&f, &solid_only(), &envelope));
                // The reported path is a real hop sequence.
                for pair in greedy.path.windows(2) {
                    prop_assert!(reachable(pair[0], pair[1], &envelope));
                }
            }
        }

        /// Style distance is non-negative and zero against self.
        #[test]
        fn prop_style_distance_axioms(
            cells in proptest::collection::btree_set((0u16..3, 0i32..16, 0i32..12), 1..15),
        ) {
            let listed: Vec<(u16, i32, i32)> = cells.iter().copied().collect();
            let f = frame(16, 12, &listed);
            let self_score = style_distance(&f, &[f.clone()]).unwrap();
            prop_assert!(self_score.score.abs() < 1e-9);
            // Against a shifted copy the score is positive.
            let shifted: Vec<(u16, i32, i32)> = listed
                .iter()
                .map(|&(t, x, y)| (t, (x + 1).min(15), y))
                .collect();
            if shifted != listed {
                let g = frame(16, 12, &shifted);
                let cross = style_distance(&g, &[f]).unwrap();
                prop_assert!(cross.score > 0.0);
            }
        }
    }

    // -- sweeps --

    fn rel(target: u16, vec: (i32, i32)) -> Relation {
        Relation {
            target_type: target,
            vec_corner: vec,
            vec_center: (vec.0 as f64, vec.1 as f64),
        }
    }

    fn unit_shape(type_id: u16, anchor: (i32, i32)) -> GNode {
        GNode {
            sprite_type: type_id,
            cells: [(0, 0)].into_iter().collect(),
            anchor,
            source_section: 0,
        }
    }

    /// A model that emits one novel section: type 1 has a second shape
    /// variant whose relation offsets by one row.
    fn noveling_model() -> StyleModel {
        let g0 = unit_shape(0, (2, 2));
        let d0 = DNode { relations: vec![rel(1, (3, 0))] };
        let m0 = vec![(g0, d0)];
        let g1a = unit_shape(1, (5, 2));
        let d1a = DNode { relations: vec![rel(0, (-3, 0))] };
        let g1b = unit_shape(1, (5, 1));
        let d1b = DNode { relations: vec![rel(0, (-3, 1))] };
        let m1 = vec![(g1a, d1a), (g1b, d1b)];
        let t0 = build_edge_probability_table(&m0, 4.0, 100).unwrap();
        let t1 = build_edge_probability_table(&m1, 4.0, 100).unwrap();
        StyleModel {
            catalog: SpriteCatalog::from_names(&["block", "gem"], 8).unwrap(),
            width: 16,
            height: 8,
            s_nodes: vec![
                SNode { id: 0, sprite_type: 0, table: t0, members: m0, medoid: 0 },
                SNode { id: 1, sprite_type: 1, table: t1, members: m1, medoid: 0 },
            ],
            l_nodes: vec![LNode { id: 0, s_nodes: vec![0, 1], n_rows: vec![vec![1, 1]] }],
            n_rows: vec![vec![1, 1]],
            provenance: ModelProvenance {
                section_ids: vec!["t:0-0".into()],
                rng_seed: 0,
                shape_weight: 0.5,
                bucket_count: 100,
                fk_threshold_applied: true,
            },
        }
    }

    #[test]
    fn sweeps_are_deterministic_and_flag_undersampling() {
        let model = noveling_model();
        let config = SweepConfig {
            p_c_values: vec![0.5, 0.8],
            p_e_values: vec![0.1],
            solid_types: solid_only(),
            ..SweepConfig::default()
        };
        let a = sweep(&model, &config).unwrap();
        let b = sweep(&model, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(sweep_csv(&a), sweep_csv(&b));
        assert_eq!(a.rows.len(), 3);
        for row in &a.rows {
            assert!(row.under_sampled, "tiny model cannot fill a 20-section sample");
            assert!(row.sample_size <= 20);
            assert_eq!(row.sample_size, row.kept_count.min(20));
        }
        // The CSV has the expected header and one line per row.
        let csv = sweep_csv(&a);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("p_C,p_E,sample_size,percent_playable,median_style,raw_count")
        );
        assert_eq!(csv.lines().filter(|l| !l.is_empty()).count(), 1 + 3 + 1 + 4);
    }

    #[test]
    fn empty_outputs_leave_measures_unset() {
        let model = noveling_model();
        // p_c = 1.0 prunes everything; no samples, flagged row.
        let config = SweepConfig {
            p_c_values: vec![1.0],
            p_e_values: vec![],
            solid_types: solid_only(),
            ..SweepConfig::default()
        };
        let report = sweep(&model, &config).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.sample_size, 0);
        assert_eq!(row.percent_playable, None);
        assert_eq!(row.median_style, None);
        let csv = sweep_csv(&report);
        assert!(csv.contains("NaN"));
    }
}
