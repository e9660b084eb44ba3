//! Section generation by recursive constraint solving over a learned
//! style model.
//!
//! Starting from every stored member shape as its own seed, the generator
//! grows a partial section one shape at a time. At every step it either
//! chases the sprite-count deficit toward the nearest observed count row or
//! satisfies the highest-probability unmet relation; candidates for the
//! chosen type are admitted when their relations agree with what is already
//! placed, and anchored off their strongest connection. Complete sections
//! are emitted, deduplicated against the originals and each other, and
//! returned in a canonical order.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{DNode, GNode, SNode, StyleModel};
use crate::trace::{is_duplicate, Frame, SpriteInstance, DUPLICATE_THRESHOLD};

/// Knobs for one generation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    /// Minimum relation probability for an edge to be required. Lower keeps
    /// more relations in play.
    pub p_e: f64,
    /// Coexistence threshold: a candidate joins only if the fraction of its
    /// checkable relations that agree with placed shapes exceeds this.
    pub p_c: f64,
    /// Maximum shapes placed beyond the seed before a branch is cut.
    pub max_depth: usize,
    /// Ceiling on raw emitted sections.
    pub max_outputs: usize,
    /// Chebyshev slack, in tiles, when checking whether a relation points at
    /// a placed shape.
    pub match_tolerance: i32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            p_e: 0.1,
            p_c: 0.8,
            max_depth: 64,
            max_outputs: 10_000,
            match_tolerance: 1,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_e > 0.0 && self.p_e <= 1.0) {
            return Err(Error::validation(format!("p_e must be in (0, 1], got {}", self.p_e)));
        }
        if !(0.0..=1.0).contains(&self.p_c) {
            return Err(Error::validation(format!("p_c must be in [0, 1], got {}", self.p_c)));
        }
        if self.max_depth == 0 {
            return Err(Error::validation("max_depth must be at least 1"));
        }
        if self.max_outputs == 0 {
            return Err(Error::validation("max_outputs must be at least 1"));
        }
        if self.match_tolerance < 0 {
            return Err(Error::validation("match_tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// One placed shape inside a partial section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub s_node_id: u32,
    pub member_index: usize,
    pub anchor: (i32, i32),
}

/// A finished generated section plus how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSection {
    pub frame: Frame,
    pub seed_index: usize,
    pub placements: Vec<Placement>,
}

/// Everything a generation run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    /// Every emitted section in discovery order, duplicates included.
    pub raw: Vec<GeneratedSection>,
    /// Deduplicated novel sections in canonical (sprite-list) order.
    pub kept: Vec<GeneratedSection>,
    /// True if `max_outputs` stopped the run early.
    pub truncated: bool,
    /// True if any branch hit `max_depth` before completing.
    pub depth_capped: bool,
    /// Order-sensitive digest of the emission sequence, for provenance.
    pub trace_hash: u64,
}

// --- growth state ----------------------------------------------------------

struct PartialSection<'m> {
    model: &'m StyleModel,
    placements: Vec<Placement>,
    occupied: BTreeSet<(i32, i32)>,
    counts: Vec<u64>,
}

impl<'m> PartialSection<'m> {
    fn new(model: &'m StyleModel) -> Self {
        PartialSection {
            model,
            placements: Vec::new(),
            occupied: BTreeSet::new(),
            counts: vec![0; model.catalog.len()],
        }
    }

    fn member(&self, p: &Placement) -> (&'m SNode, &'m (GNode, DNode)) {
        let node = self
            .model
            .s_node(p.s_node_id)
            .expect("placement references a model shape style");
        (node, &node.members[p.member_index])
    }

    fn push(&mut self, p: Placement) {
        let (_, (g, _)) = self.member(&p);
        for &(dx, dy) in &g.cells {
            self.occupied.insert((p.anchor.0 + dx, p.anchor.1 + dy));
        }
        self.counts[g.sprite_type as usize] += g.cells.len() as u64;
        self.placements.push(p);
    }

    fn pop(&mut self) {
        let p = self.placements.pop().expect("pop matches a push");
        let (_, (g, _)) = self.member(&p);
        for &(dx, dy) in &g.cells {
            self.occupied.remove(&(p.anchor.0 + dx, p.anchor.1 + dy));
        }
        self.counts[g.sprite_type as usize] -= g.cells.len() as u64;
    }

    fn has_type(&self, type_id: u16) -> bool {
        self.counts.get(type_id as usize).is_some_and(|&c| c > 0)
    }

    /// Is some placed shape of `type_id` within `tol` of `target`, skipping
    /// placement `exclude` (usize::MAX to skip nothing)?
    fn type_near(&self, type_id: u16, target: (i32, i32), tol: i32, exclude: usize) -> bool {
        self.placements.iter().enumerate().any(|(i, p)| {
            if i == exclude {
                return false;
            }
            let (_, (g, _)) = self.member(p);
            g.sprite_type == type_id && chebyshev(p.anchor, target) <= tol
        })
    }

    fn to_frame(&self, index: u64) -> Frame {
        let mut instances = Vec::new();
        for p in &self.placements {
            let (_, (g, _)) = self.member(p);
            for &(dx, dy) in &g.cells {
                instances.push(SpriteInstance::new(
                    g.sprite_type,
                    p.anchor.0 + dx,
                    p.anchor.1 + dy,
                ));
            }
        }
        Frame::new(index, self.model.width, self.model.height, instances)
            .expect("placed cells are validated in bounds")
    }
}

fn chebyshev(a: (i32, i32), b: (i32, i32)) -> i32 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

// --- step decisions ----------------------------------------------------------

/// Against the nearest observed count row (Euclidean, ties to the earliest
/// row), the type with the greatest remaining deficit and that deficit.
/// A non-positive deficit means the counts are satisfied.
pub fn nearest_row_deficit(rows: &[Vec<u64>], counts: &[u64]) -> (u16, i64) {
    assert!(!rows.is_empty(), "a model always carries at least one count row");
    let mut best_row = 0;
    let mut best_dist = f64::INFINITY;
    for (i, row) in rows.iter().enumerate() {
        let d: f64 = row
            .iter()
            .zip(counts)
            .map(|(&r, &c)| {
                let diff = r as f64 - c as f64;
                diff * diff
            })
            .sum();
        if d < best_dist {
            best_dist = d;
            best_row = i;
        }
    }
    let row = &rows[best_row];
    let mut best: Option<(u16, i64)> = None;
    for (t, (&r, &c)) in row.iter().zip(counts).enumerate() {
        let deficit = r as i64 - c as i64;
        if best.map_or(true, |(_, d)| deficit > d) {
            best = Some((t as u16, deficit));
        }
    }
    best.expect("count rows are non-empty")
}

/// The target type of the strongest unmet relation among placed shapes:
/// relations whose probability under their own style's table reaches `p_e`
/// must point at a placed shape of the right type (within `tol`); the
/// highest-probability violation wins, ties to the lower type id. None means
/// every required relation is met.
fn next_required_edge(state: &PartialSection, p_e: f64, tol: i32) -> Option<u16> {
    let mut best: Option<(f64, u16)> = None;
    for (pi, p) in state.placements.iter().enumerate() {
        let (node, (g, d)) = state.member(p);
        for rel in &d.relations {
            let bucket = node.table.bucket(rel.magnitude());
            let prob = node.table.probability((g.sprite_type, rel.target_type, bucket));
            if prob < p_e {
                continue;
            }
            let target = (p.anchor.0 + rel.vec_corner.0, p.anchor.1 + rel.vec_corner.1);
            if state.type_near(rel.target_type, target, tol, pi) {
                continue;
            }
            let better = match best {
                None => true,
                Some((bp, bt)) => {
                    prob > bp || (prob == bp && rel.target_type < bt)
                }
            };
            if better {
                best = Some((prob, rel.target_type));
            }
        }
    }
    best.map(|(_, t)| t)
}

/// Fraction of the candidate's checkable relations that agree with the
/// partial section when anchored at `anchor`. A relation is checkable when
/// some shape of its target type is already placed; with nothing checkable
/// the candidate is unconstrained and scores 1.
fn coexist_probability(
    state: &PartialSection,
    d: &DNode,
    anchor: (i32, i32),
    tol: i32,
) -> f64 {
    let mut checkable = 0u32;
    let mut matched = 0u32;
    for rel in &d.relations {
        if !state.has_type(rel.target_type) {
            continue;
        }
        checkable += 1;
        let target = (anchor.0 + rel.vec_corner.0, anchor.1 + rel.vec_corner.1);
        if state.type_near(rel.target_type, target, tol, usize::MAX) {
            matched += 1;
        }
    }
    if checkable == 0 {
        1.0
    } else {
        matched as f64 / checkable as f64
    }
}

/// Displacements of Chebyshev radius ≤ tol, nearest ring first, each ring
/// scanned top-to-bottom then left-to-right.
fn displacement_order(tol: i32) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for r in 0..=tol {
        let mut ring = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs().max(dy.abs()) == r {
                    ring.push((dx, dy));
                }
            }
        }
        ring.sort_by_key(|&(dx, dy)| (dy, dx));
        out.extend(ring);
    }
    out
}

fn fits(state: &PartialSection, g: &GNode, anchor: (i32, i32)) -> bool {
    g.cells.iter().all(|&(dx, dy)| {
        let x = anchor.0 + dx;
        let y = anchor.1 + dy;
        x >= 0
            && y >= 0
            && (x as u32) < state.model.width
            && (y as u32) < state.model.height
            && !state.occupied.contains(&(x, y))
    })
}

fn satisfied_relations(state: &PartialSection, d: &DNode, anchor: (i32, i32), tol: i32) -> u32 {
    d.relations
        .iter()
        .filter(|rel| {
            let target = (anchor.0 + rel.vec_corner.0, anchor.1 + rel.vec_corner.1);
            state.type_near(rel.target_type, target, tol, usize::MAX)
        })
        .count() as u32
}

/// Anchor a candidate off its strongest connection to something placed:
/// pick the candidate's highest-probability relation whose target type is
/// placed, derive the anchor from each such placed shape in turn, nudging by
/// at most `tol` to dodge collisions and stay in bounds, and keep the fit
/// that satisfies the most relations (earliest placement on ties). None
/// means the candidate cannot join this partial section.
fn fit_candidate(
    state: &PartialSection,
    node: &SNode,
    g: &GNode,
    d: &DNode,
    tol: i32,
) -> Option<(i32, i32)> {
    if state.placements.is_empty() {
        return fits(state, g, g.anchor).then_some(g.anchor);
    }
    let mut best_rel: Option<(f64, &crate::model::Relation)> = None;
    for rel in &d.relations {
        if !state.has_type(rel.target_type) {
            continue;
        }
        let bucket = node.table.bucket(rel.magnitude());
        let prob = node.table.probability((g.sprite_type, rel.target_type, bucket));
        let better = match best_rel {
            None => true,
            Some((bp, br)) => {
                prob > bp
                    || (prob == bp
                        && (rel.target_type, rel.vec_corner)
                            < (br.target_type, br.vec_corner))
            }
        };
        if better {
            best_rel = Some((prob, rel));
        }
    }
    let (_, rel) = best_rel?;
    let mut best_fit: Option<(u32, (i32, i32))> = None;
    for p in &state.placements {
        let (_, (pg, _)) = state.member(p);
        if pg.sprite_type != rel.target_type {
            continue;
        }
        let base = (p.anchor.0 - rel.vec_corner.0, p.anchor.1 - rel.vec_corner.1);
        let fitted = displacement_order(tol)
            .into_iter()
            .map(|(dx, dy)| (base.0 + dx, base.1 + dy))
            .find(|&a| fits(state, g, a));
        if let Some(anchor) = fitted {
            let score = satisfied_relations(state, d, anchor, tol);
            if best_fit.map_or(true, |(bs, _)| score > bs) {
                best_fit = Some((score, anchor));
            }
        }
    }
    best_fit.map(|(_, a)| a)
}

// --- the recursion -----------------------------------------------------------

struct RunState<'m> {
    model: &'m StyleModel,
    params: GenerationParams,
    raw: Vec<GeneratedSection>,
    seed_index: usize,
    truncated: bool,
    depth_capped: bool,
    hash: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= b as u64;
        *hash = hash.wrapping_mul(FNV_PRIME);
    }
}

impl<'m> RunState<'m> {
    fn emit(&mut self, state: &PartialSection) {
        if self.raw.len() >= self.params.max_outputs {
            self.truncated = true;
            return;
        }
        let frame = state.to_frame(self.raw.len() as u64);
        fnv1a(&mut self.hash, &(self.seed_index as u64).to_le_bytes());
        for p in &state.placements {
            fnv1a(&mut self.hash, &p.s_node_id.to_le_bytes());
            fnv1a(&mut self.hash, &(p.member_index as u64).to_le_bytes());
            fnv1a(&mut self.hash, &p.anchor.0.to_le_bytes());
            fnv1a(&mut self.hash, &p.anchor.1.to_le_bytes());
        }
        self.raw.push(GeneratedSection {
            frame,
            seed_index: self.seed_index,
            placements: state.placements.clone(),
        });
    }

    fn expand(&mut self, state: &mut PartialSection<'m>, depth: usize) {
        if self.truncated {
            return;
        }
        let (deficit_type, deficit) = nearest_row_deficit(&self.model.n_rows, &state.counts);
        let required = next_required_edge(state, self.params.p_e, self.params.match_tolerance);
        if deficit <= 0 && required.is_none() {
            self.emit(state);
            return;
        }
        if depth >= self.params.max_depth {
            self.depth_capped = true;
            return;
        }
        let next_type = if deficit > 0 {
            deficit_type
        } else {
            required.expect("non-terminal state has a required edge")
        };
        for node in &self.model.s_nodes {
            if node.sprite_type != next_type {
                continue;
            }
            for (mi, (g, d)) in node.members.iter().enumerate() {
                if self.truncated {
                    return;
                }
                let Some(anchor) = fit_candidate(state, node, g, d, self.params.match_tolerance)
                else {
                    continue;
                };
                if coexist_probability(state, d, anchor, self.params.match_tolerance)
                    <= self.params.p_c
                {
                    continue;
                }
                state.push(Placement {
                    s_node_id: node.id,
                    member_index: mi,
                    anchor,
                });
                self.expand(state, depth + 1);
                state.pop();
            }
        }
    }
}

// --- public entry points -------------------------------------------------------

/// Rebuild the original sections the model was trained on, one frame per
/// section, from the shapes stored in the model.
pub fn reconstruct_originals(model: &StyleModel) -> Vec<Frame> {
    let mut per_section: Vec<Vec<SpriteInstance>> = vec![Vec::new(); model.n_rows.len()];
    for node in &model.s_nodes {
        for (g, _) in &node.members {
            for &(dx, dy) in &g.cells {
                per_section[g.source_section].push(SpriteInstance::new(
                    g.sprite_type,
                    g.anchor.0 + dx,
                    g.anchor.1 + dy,
                ));
            }
        }
    }
    per_section
        .into_iter()
        .enumerate()
        .map(|(i, instances)| {
            Frame::new(i as u64, model.width, model.height, instances)
                .expect("model shapes reassemble into valid frames")
        })
        .collect()
}

/// Grow and emit every section reachable from every seed, in discovery
/// order, without any deduplication. Every stored member of every shape
/// style seeds one run, placed at its original anchor, styles in listed
/// order and members in stored order.
pub fn generate_raw(model: &StyleModel, params: &GenerationParams) -> Result<GenerationResult> {
    params.validate()?;
    if model.s_nodes.is_empty() {
        return Err(Error::validation("model has no shape styles to seed from"));
    }
    if model.n_rows.is_empty() {
        return Err(Error::validation("model has no count rows to steer toward"));
    }
    if model.n_rows.iter().any(|r| r.len() != model.catalog.len()) {
        return Err(Error::validation(
            "model count rows disagree with the catalog arity".to_string(),
        ));
    }
    for node in &model.s_nodes {
        if node.medoid >= node.members.len() {
            return Err(Error::validation(format!(
                "shape style {} has medoid index {} out of bounds",
                node.id, node.medoid
            )));
        }
    }
    let mut run = RunState {
        model,
        params: *params,
        raw: Vec::new(),
        seed_index: 0,
        truncated: false,
        depth_capped: false,
        hash: FNV_OFFSET,
    };
    let mut seed_counter = 0usize;
    for node in &model.s_nodes {
        for (mi, (g, _)) in node.members.iter().enumerate() {
            run.seed_index = seed_counter;
            seed_counter += 1;
            let mut state = PartialSection::new(model);
            if !fits(&state, g, g.anchor) {
                continue;
            }
            state.push(Placement {
                s_node_id: node.id,
                member_index: mi,
                anchor: g.anchor,
            });
            run.expand(&mut state, 0);
            state.pop();
        }
    }
    Ok(GenerationResult {
        raw: run.raw,
        kept: Vec::new(),
        truncated: run.truncated,
        depth_capped: run.depth_capped,
        trace_hash: run.hash,
    })
}

/// True when two frames could plausibly clear the duplicate threshold, by
/// instance counts alone; cheap pre-filter for dedup loops.
fn counts_compatible(a: &Frame, b: &Frame) -> bool {
    let (na, nb) = (a.instances.len(), b.instances.len());
    if na == 0 && nb == 0 {
        return true;
    }
    (na.min(nb) as f64) >= DUPLICATE_THRESHOLD * (na.max(nb) as f64)
}

/// Full generation: grow everything, drop near-duplicates of the training
/// sections and of earlier outputs, and order the survivors by their sprite
/// lists.
pub fn generate_all(model: &StyleModel, params: &GenerationParams) -> Result<GenerationResult> {
    let mut result = generate_raw(model, params)?;
    let originals = reconstruct_originals(model);
    let mut kept: Vec<GeneratedSection> = Vec::new();
    for section in &result.raw {
        let dup_of_original = originals.iter().any(|o| {
            counts_compatible(&section.frame, o) && is_duplicate(&section.frame, o, DUPLICATE_THRESHOLD)
        });
        if dup_of_original {
            continue;
        }
        let dup_of_kept = kept.iter().any(|k| {
            counts_compatible(&section.frame, &k.frame)
                && is_duplicate(&section.frame, &k.frame, DUPLICATE_THRESHOLD)
        });
        if !dup_of_kept {
            kept.push(section.clone());
        }
    }
    kept.sort_by(|a, b| a.frame.instances.cmp(&b.frame.instances));
    for (i, section) in kept.iter_mut().enumerate() {
        section.frame.index = i as u64;
    }
    result.kept = kept;
    Ok(result)
}
