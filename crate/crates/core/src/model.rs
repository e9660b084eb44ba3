//! The learned design model: observed shape, relation, and count nodes, plus
//! latent shape-style and section-style clusters with edge-probability
//! tables.
//!
//! A section's frame is decomposed into *shapes* (4-connected components per
//! sprite type). Each shape carries its *relations* — one vector per other
//! shape in the same section. Shapes of a type are clustered into shape
//! styles by a blended shape/relation distance; shape styles are clustered
//! into section styles by the overlap of their relation-probability tables.
//! Generation consumes the styles, tables, and per-section count rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{estimate_k_metric, kmedoids, Centers, FK_THRESHOLD};
use crate::error::{Error, Result};
use crate::segmentation::LevelSection;
use crate::trace::{Frame, SpriteCatalog};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// One shape: a maximal 4-connected component of same-type sprite cells.
/// `cells` are offsets from the component's top-left bounding corner, so two
/// translated copies of an arrangement have equal cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GNode {
    pub sprite_type: u16,
    pub cells: BTreeSet<(i32, i32)>,
    pub anchor: (i32, i32),
    pub source_section: usize,
}

impl GNode {
    /// Centroid of the cells, in offsets from the anchor.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.cells.len() as f64;
        let (sx, sy) = self
            .cells
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(dx, dy)| (sx + dx as f64, sy + dy as f64));
        (sx / n, sy / n)
    }
}

/// One directed relation from a shape to another shape in its section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub target_type: u16,
    /// Target's top-left corner minus this shape's top-left corner.
    pub vec_corner: (i32, i32),
    /// Target's cell centroid minus this shape's top-left corner.
    pub vec_center: (f64, f64),
}

impl Relation {
    pub fn magnitude(&self) -> f64 {
        let (dx, dy) = self.vec_corner;
        ((dx * dx + dy * dy) as f64).sqrt()
    }
}

/// All of one shape's relations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DNode {
    pub relations: Vec<Relation>,
}

/// Relation frequencies for one shape style, bucketed by vector magnitude.
/// Probabilities are stored as exact counts over a total so serialization
/// stays integral and reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilityTable {
    pub max_distance: f64,
    pub bucket_count: u32,
    pub total: u64,
    /// (source type, target type, bucket) → occurrence count.
    pub entries: BTreeMap<(u16, u16, u32), u64>,
}

impl EdgeProbabilityTable {
    pub fn probability(&self, key: (u16, u16, u32)) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.entries.get(&key).unwrap_or(&0) as f64 / self.total as f64
    }

    pub fn bucket(&self, magnitude: f64) -> u32 {
        bucket_index(magnitude, self.max_distance, self.bucket_count)
    }

    /// Smallest non-zero entry probability, or None for an empty table.
    pub fn min_probability(&self) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        self.entries
            .values()
            .map(|&c| c as f64 / self.total as f64)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

fn bucket_index(magnitude: f64, max_distance: f64, bucket_count: u32) -> u32 {
    if max_distance == 0.0 {
        return 0;
    }
    let raw = (bucket_count as f64 * magnitude / max_distance).floor() as i64;
    raw.clamp(0, bucket_count as i64 - 1) as u32
}

/// A shape style: interchangeable (shape, relations) pairs of one type.
#[derive(Debug, Clone, PartialEq)]
pub struct SNode {
    pub id: u32,
    pub sprite_type: u16,
    pub members: Vec<(GNode, DNode)>,
    /// Index into `members` of the cluster medoid, the style's most central
    /// pair.
    pub medoid: usize,
    pub table: EdgeProbabilityTable,
}

/// A section style: a cluster of shape styles plus the per-section count
/// rows of the sections those styles were observed in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LNode {
    pub id: u32,
    pub s_nodes: Vec<u32>,
    pub n_rows: Vec<Vec<u64>>,
}

/// Where a model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub section_ids: Vec<String>,
    pub rng_seed: u64,
    pub shape_weight: f64,
    pub bucket_count: u32,
    pub fk_threshold_applied: bool,
}

/// The full learned model for one cluster of sections.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleModel {
    pub catalog: SpriteCatalog,
    /// Section frame size, bounding all generated placements.
    pub width: u32,
    pub height: u32,
    pub s_nodes: Vec<SNode>,
    pub l_nodes: Vec<LNode>,
    /// Per-section sprite-count rows, in section order.
    pub n_rows: Vec<Vec<u64>>,
    pub provenance: ModelProvenance,
}

impl StyleModel {
    pub fn s_node(&self, id: u32) -> Option<&SNode> {
        self.s_nodes.iter().find(|s| s.id == id)
    }
}

/// Knobs for model building.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Weight of the shape component in the blended pair distance; the
    /// relation component gets the complement.
    pub shape_weight: f64,
    pub bucket_count: u32,
    /// Effective dimensionality fed to cluster-count estimation for shape
    /// styles (pairs live in a metric space, not a vector space).
    pub s_effective_dim: usize,
    pub rng_seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            shape_weight: 0.5,
            bucket_count: 100,
            s_effective_dim: 2,
            rng_seed: 0,
        }
    }
}

// --- shape extraction ----------------------------------------------------

/// Decompose a frame into shapes: per sprite type, the 4-connected
/// components of occupied tiles. Output is sorted by (type, anchor y,
/// anchor x, first cell) and is exhaustive — each instance lands in exactly
/// one shape.
pub fn extract_g_nodes(frame: &Frame) -> Vec<GNode> {
    let mut by_type: BTreeMap<u16, BTreeSet<(i32, i32)>> = BTreeMap::new();
    for inst in &frame.instances {
        by_type.entry(inst.type_id).or_default().insert((inst.x, inst.y));
    }
    let mut shapes = Vec::new();
    for (&type_id, cells) in &by_type {
        let mut unvisited: BTreeSet<(i32, i32)> = cells.clone();
        while let Some(&start) = unvisited.iter().next() {
            unvisited.remove(&start);
            let mut component = vec![start];
            let mut queue = vec![start];
            while let Some((x, y)) = queue.pop() {
                for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
                    if unvisited.remove(&(nx, ny)) {
                        component.push((nx, ny));
                        queue.push((nx, ny));
                    }
                }
            }
            let min_x = component.iter().map(|c| c.0).min().unwrap();
            let min_y = component.iter().map(|c| c.1).min().unwrap();
            shapes.push(GNode {
                sprite_type: type_id,
                cells: component.iter().map(|&(x, y)| (x - min_x, y - min_y)).collect(),
                anchor: (min_x, min_y),
                source_section: 0,
            });
        }
    }
    shapes.sort_by_key(|g| {
        let first = g
            .cells
            .iter()
            .map(|&(dx, dy)| (dy, dx))
            .min()
            .unwrap();
        (g.sprite_type, g.anchor.1, g.anchor.0, first)
    });
    shapes
}

/// The relations of `g` to every other shape in its section.
pub fn build_d_node(g: &GNode, all_shapes: &[GNode]) -> DNode {
    let relations = all_shapes
        .iter()
        .filter(|other| !std::ptr::eq(*other, g))
        .map(|other| {
            let centroid = other.centroid();
            Relation {
                target_type: other.sprite_type,
                vec_corner: (other.anchor.0 - g.anchor.0, other.anchor.1 - g.anchor.1),
                vec_center: (
                    other.anchor.0 as f64 + centroid.0 - g.anchor.0 as f64,
                    other.anchor.1 as f64 + centroid.1 - g.anchor.1 as f64,
                ),
            }
        })
        .collect();
    DNode { relations }
}

// --- distances -----------------------------------------------------------

/// Cells differing between two same-type shapes after top-left alignment.
pub fn shape_edit_distance(g1: &GNode, g2: &GNode) -> Result<u32> {
    if g1.sprite_type != g2.sprite_type {
        return Err(Error::validation(format!(
            "shape distance between types {} and {}",
            g1.sprite_type, g2.sprite_type
        )));
    }
    Ok(g1.cells.symmetric_difference(&g2.cells).count() as u32)
}

/// Relation-list distance: sort both lists by corner vector, pair up the
/// common prefix and sum the Euclidean size of each pairwise difference,
/// then add the magnitude of every unpaired leftover.
pub fn d_distance(d1: &DNode, d2: &DNode) -> f64 {
    let sorted = |d: &DNode| {
        let mut v: Vec<(i32, i32)> = d.relations.iter().map(|r| r.vec_corner).collect();
        v.sort_unstable();
        v
    };
    let a = sorted(d1);
    let b = sorted(d2);
    let common = a.len().min(b.len());
    let mut total = 0.0;
    for i in 0..common {
        let dx = (a[i].0 - b[i].0) as f64;
        let dy = (a[i].1 - b[i].1) as f64;
        total += (dx * dx + dy * dy).sqrt();
    }
    for &(x, y) in a[common..].iter().chain(b[common..].iter()) {
        total += ((x * x + y * y) as f64).sqrt();
    }
    total
}

/// Normalization maxima for the blended pair distance of one sprite type.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GdNorms {
    pub max_shape: f64,
    pub max_d: f64,
}

impl GdNorms {
    /// Maxima over all unordered pairs of the given population.
    pub fn from_pairs(pairs: &[(GNode, DNode)]) -> Result<GdNorms> {
        let mut norms = GdNorms::default();
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                let sed = shape_edit_distance(&pairs[i].0, &pairs[j].0)? as f64;
                let dd = d_distance(&pairs[i].1, &pairs[j].1);
                norms.max_shape = norms.max_shape.max(sed);
                norms.max_d = norms.max_d.max(dd);
            }
        }
        Ok(norms)
    }
}

/// Blended shape/relation distance in [0,1]. A zero maximum means that
/// component never varies in the population and contributes 0.
pub fn gd_distance(
    p1: &(GNode, DNode),
    p2: &(GNode, DNode),
    norms: &GdNorms,
    shape_weight: f64,
) -> Result<f64> {
    let sed = shape_edit_distance(&p1.0, &p2.0)? as f64;
    let dd = d_distance(&p1.1, &p2.1);
    let shape_part = if norms.max_shape > 0.0 { sed / norms.max_shape } else { 0.0 };
    let d_part = if norms.max_d > 0.0 { dd / norms.max_d } else { 0.0 };
    Ok(shape_weight * shape_part + (1.0 - shape_weight) * d_part)
}

// --- table and latent-node derivation -------------------------------------

/// Frequency table over all relations of the given members: each entry
/// counts occurrences of (source type, target type, magnitude bucket),
/// normalized by the total relation count at query time.
pub fn build_edge_probability_table(
    members: &[(GNode, DNode)],
    max_distance: f64,
    bucket_count: u32,
) -> Result<EdgeProbabilityTable> {
    let mut entries: BTreeMap<(u16, u16, u32), u64> = BTreeMap::new();
    let mut total = 0u64;
    for (g, d) in members {
        for rel in &d.relations {
            let magnitude = rel.magnitude();
            if magnitude > 0.0 && max_distance == 0.0 {
                return Err(Error::validation(
                    "relation vectors present but the maximum distance is zero".to_string(),
                ));
            }
            let bucket = bucket_index(magnitude, max_distance, bucket_count);
            *entries.entry((g.sprite_type, rel.target_type, bucket)).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok(EdgeProbabilityTable {
        max_distance,
        bucket_count,
        total,
        entries,
    })
}

fn derive_seed(base: u64, salt: u64) -> u64 {
    // splitmix64 round, so per-stage streams are decorrelated but reproducible.
    let mut z = base.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn kmax_for(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// Cluster each type's (shape, relations) pairs into shape styles. The
/// cluster count comes from the distortion-ratio estimate with k capped at
/// ⌊√n⌋; each style then gets its frequency table.
pub fn derive_s_nodes(
    pairs_by_type: &BTreeMap<u16, Vec<(GNode, DNode)>>,
    max_distance: f64,
    params: &ModelParams,
) -> Result<Vec<SNode>> {
    let mut s_nodes = Vec::new();
    let mut next_id = 0u32;
    for (&type_id, pairs) in pairs_by_type {
        if pairs.is_empty() {
            continue;
        }
        let norms = GdNorms::from_pairs(pairs)?;
        let dist = |i: usize, j: usize| {
            gd_distance(&pairs[i], &pairs[j], &norms, params.shape_weight)
                .expect("pairs grouped by type")
        };
        let n = pairs.len();
        let seed = derive_seed(params.rng_seed, 0x5000 + type_id as u64);
        let k_max = kmax_for(n).max(1);
        let k = estimate_k_metric(n, &dist, params.s_effective_dim, k_max, seed, FK_THRESHOLD)?;
        let result = kmedoids(n, &dist, k, seed)?;
        let medoids = match &result.centers {
            Centers::Medoids(m) => m.clone(),
            Centers::Means(_) => unreachable!("kmedoids returns medoid centers"),
        };
        // Group member indices per cluster, ordered by first appearance so
        // SNode ids are stable. Keep each cluster's medoid alongside it.
        let mut clusters: Vec<(Vec<usize>, usize)> =
            medoids.into_iter().map(|m| (Vec::new(), m)).collect();
        for (i, &c) in result.assignment.iter().enumerate() {
            clusters[c].0.push(i);
        }
        clusters.retain(|(c, _)| !c.is_empty());
        clusters.sort_by_key(|(c, _)| c[0]);
        for (member_idx, medoid_global) in clusters {
            let members: Vec<(GNode, DNode)> =
                member_idx.iter().map(|&i| pairs[i].clone()).collect();
            // A medoid can only be missing from its own cluster when another
            // medoid sits at distance zero and captured it; any member is
            // then equally central.
            let medoid = member_idx
                .iter()
                .position(|&i| i == medoid_global)
                .unwrap_or(0);
            let table = build_edge_probability_table(&members, max_distance, params.bucket_count)?;
            s_nodes.push(SNode {
                id: next_id,
                sprite_type: type_id,
                members,
                medoid,
                table,
            });
            next_id += 1;
        }
    }
    Ok(s_nodes)
}

/// Binary signature of a shape style: which (source, target, bucket) keys
/// its table holds, over the union of keys across all styles.
fn signatures(s_nodes: &[SNode]) -> (Vec<(u16, u16, u32)>, Vec<Vec<bool>>) {
    let universe: BTreeSet<(u16, u16, u32)> = s_nodes
        .iter()
        .flat_map(|s| s.table.entries.keys().copied())
        .collect();
    let keys: Vec<(u16, u16, u32)> = universe.into_iter().collect();
    let sigs = s_nodes
        .iter()
        .map(|s| keys.iter().map(|k| s.table.entries.contains_key(k)).collect())
        .collect();
    (keys, sigs)
}

/// Cluster shape styles into section styles by Hamming distance between
/// table signatures. Each style cluster carries the count rows of the
/// sections its member shapes came from.
pub fn derive_l_nodes(
    s_nodes: &[SNode],
    n_rows: &[Vec<u64>],
    params: &ModelParams,
) -> Result<Vec<LNode>> {
    if s_nodes.is_empty() {
        return Err(Error::validation("no shape styles to cluster".to_string()));
    }
    let (keys, sigs) = signatures(s_nodes);
    let dist = |i: usize, j: usize| {
        sigs[i]
            .iter()
            .zip(&sigs[j])
            .filter(|(a, b)| a != b)
            .count() as f64
    };
    let n = s_nodes.len();
    let seed = derive_seed(params.rng_seed, 0x1000);
    let k_max = kmax_for(n).max(1);
    let effective_dim = keys.len().max(1);
    let k = estimate_k_metric(n, &dist, effective_dim, k_max, seed, FK_THRESHOLD)?;
    let result = kmedoids(n, &dist, k, seed)?;
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); result.k];
    for (i, &c) in result.assignment.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    clusters.sort_by_key(|c| c[0]);
    let mut l_nodes = Vec::new();
    for (id, member_idx) in clusters.into_iter().enumerate() {
        let sections: BTreeSet<usize> = member_idx
            .iter()
            .flat_map(|&si| s_nodes[si].members.iter().map(|(g, _)| g.source_section))
            .collect();
        l_nodes.push(LNode {
            id: id as u32,
            s_nodes: member_idx.iter().map(|&i| s_nodes[i].id).collect(),
            n_rows: sections.iter().map(|&s| n_rows[s].clone()).collect(),
        });
    }
    Ok(l_nodes)
}

/// Build the full model from one cluster of sections.
pub fn build_style_model(
    sections: &[LevelSection],
    catalog: &SpriteCatalog,
    params: &ModelParams,
) -> Result<StyleModel> {
    if sections.is_empty() {
        return Err(Error::validation("cannot build a model from zero sections".to_string()));
    }
    let width = sections[0].representative.width;
    let height = sections[0].representative.height;
    for s in sections {
        if s.representative.width != width || s.representative.height != height {
            return Err(Error::validation(
                "sections disagree on frame dimensions".to_string(),
            ));
        }
    }

    let mut pairs_by_type: BTreeMap<u16, Vec<(GNode, DNode)>> = BTreeMap::new();
    let mut n_rows = Vec::new();
    let mut max_distance = 0.0f64;
    let mut all_pairs: Vec<Vec<(GNode, DNode)>> = Vec::new();
    for (si, section) in sections.iter().enumerate() {
        let mut shapes = extract_g_nodes(&section.representative);
        for g in &mut shapes {
            g.source_section = si;
        }
        let pairs: Vec<(GNode, DNode)> = shapes
            .iter()
            .map(|g| (g.clone(), build_d_node(g, &shapes)))
            .collect();
        for (_, d) in &pairs {
            for rel in &d.relations {
                max_distance = max_distance.max(rel.magnitude());
            }
        }
        n_rows.push(
            section
                .representative
                .count_vector(catalog)
                .into_iter()
                .map(|c| c as u64)
                .collect(),
        );
        all_pairs.push(pairs);
    }
    for pairs in all_pairs {
        for pair in pairs {
            pairs_by_type.entry(pair.0.sprite_type).or_default().push(pair);
        }
    }

    let s_nodes = derive_s_nodes(&pairs_by_type, max_distance, params)?;
    let l_nodes = derive_l_nodes(&s_nodes, &n_rows, params)?;
    Ok(StyleModel {
        catalog: catalog.clone(),
        width,
        height,
        s_nodes,
        l_nodes,
        n_rows,
        provenance: ModelProvenance {
            section_ids: sections
                .iter()
                .map(|s| format!("{}:{}-{}", s.trace_id, s.start_frame, s.end_frame))
                .collect(),
            rng_seed: params.rng_seed,
            shape_weight: params.shape_weight,
            bucket_count: params.bucket_count,
            fk_threshold_applied: true,
        },
    })
}

// --- serialization ---------------------------------------------------------

/// Serialized form: map keys must be strings in JSON, so table entries are
/// stored as arrays of tuples.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    catalog: CatalogFile,
    width: u32,
    height: u32,
    s_nodes: Vec<SNodeFile>,
    l_nodes: Vec<LNode>,
    n_rows: Vec<Vec<u64>>,
    provenance: ModelProvenance,
}

/// First-pass probe so a version mismatch is reported as such even when the
/// rest of the file does not parse under the current schema.
#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    tile_size_px: u32,
    entries: Vec<(u16, String, u32, u32)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SNodeFile {
    id: u32,
    sprite_type: u16,
    members: Vec<(GNode, DNode)>,
    medoid: usize,
    max_distance: f64,
    bucket_count: u32,
    total: u64,
    entries: Vec<(u16, u16, u32, u64)>,
}

pub fn save_model(model: &StyleModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = ModelFile {
        version: MODEL_SCHEMA_VERSION,
        catalog: CatalogFile {
            tile_size_px: model.catalog.tile_size_px(),
            entries: model
                .catalog
                .entries()
                .iter()
                .map(|e| (e.id, e.name.clone(), e.tile_w, e.tile_h))
                .collect(),
        },
        width: model.width,
        height: model.height,
        s_nodes: model
            .s_nodes
            .iter()
            .map(|s| SNodeFile {
                id: s.id,
                sprite_type: s.sprite_type,
                members: s.members.clone(),
                medoid: s.medoid,
                max_distance: s.table.max_distance,
                bucket_count: s.table.bucket_count,
                total: s.table.total,
                entries: s
                    .table
                    .entries
                    .iter()
                    .map(|(&(ti, tj, b), &c)| (ti, tj, b, c))
                    .collect(),
            })
            .collect(),
        l_nodes: model.l_nodes.clone(),
        n_rows: model.n_rows.clone(),
        provenance: model.provenance.clone(),
    };
    let out = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut writer, &file).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    writer
        .write_all(b"\n")
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StyleModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
    if probe.version != MODEL_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found: probe.version,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let m: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let entries = m
        .catalog
        .entries
        .iter()
        .map(|(id, name, w, h)| crate::trace::CatalogEntry {
            id: *id,
            name: name.clone(),
            tile_w: *w,
            tile_h: *h,
        })
        .collect();
    let catalog = SpriteCatalog::new(entries, m.catalog.tile_size_px)?;
    let s_nodes = m
        .s_nodes
        .into_iter()
        .map(|s| {
            if s.medoid >= s.members.len() {
                return Err(Error::validation(format!(
                    "shape style {} names member {} as medoid but has only {} members",
                    s.id,
                    s.medoid,
                    s.members.len()
                )));
            }
            Ok(SNode {
                id: s.id,
                sprite_type: s.sprite_type,
                members: s.members,
                medoid: s.medoid,
                table: EdgeProbabilityTable {
                    max_distance: s.max_distance,
                    bucket_count: s.bucket_count,
                    total: s.total,
                    entries: s.entries.into_iter().map(|(ti, tj, b, c)| ((ti, tj, b), c)).collect(),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StyleModel {
        catalog,
        width: m.width,
        height: m.height,
        s_nodes,
        l_nodes: m.l_nodes,
        n_rows: m.n_rows,
        provenance: m.provenance,
    })
}
