//! Raster-to-symbol ingestion: turning PNG frames into sprite-instance
//! frames by template matching against a sprite atlas.
//!
//! Matching is grid-aligned: a global pixel scroll offset is recovered first
//! (the offset that makes the most tiles match a template), then every
//! tile-aligned anchor is scored against every template by mean squared error
//! over the template's opaque pixels. Template pixels falling outside the
//! canvas are ignored, so sprites clipped at the frame edge still match.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{CatalogEntry, Frame, SpriteCatalog, SpriteInstance, Trace};

pub const ATLAS_SCHEMA_VERSION: u32 = 1;

/// RGBA artwork for one sprite type. Pixels with alpha 0 are transparent and
/// never compared.
#[derive(Debug, Clone, PartialEq)]
pub struct SpriteTemplate {
    pub type_id: u16,
    pub width_px: u32,
    pub height_px: u32,
    /// Row-major RGBA8.
    pub rgba: Vec<u8>,
}

impl SpriteTemplate {
    pub fn new(type_id: u16, width_px: u32, height_px: u32, rgba: Vec<u8>) -> Result<Self> {
        if rgba.len() != (width_px * height_px * 4) as usize {
            return Err(Error::validation(format!(
                "template {type_id}: buffer holds {} bytes, expected {}",
                rgba.len(),
                width_px * height_px * 4
            )));
        }
        let template = SpriteTemplate {
            type_id,
            width_px,
            height_px,
            rgba,
        };
        if template.opaque_count() == 0 {
            return Err(Error::validation(format!(
                "template {type_id} has no opaque pixels"
            )));
        }
        Ok(template)
    }

    fn opaque_count(&self) -> usize {
        self.rgba.chunks_exact(4).filter(|px| px[3] != 0).count()
    }
}

/// All templates for a catalog, aligned by type id.
#[derive(Debug, Clone, PartialEq)]
pub struct SpriteAtlas {
    pub tile_size_px: u32,
    pub templates: Vec<SpriteTemplate>,
}

impl SpriteAtlas {
    /// Check the atlas against a catalog: one template per entry, with pixel
    /// dimensions matching the entry's tile footprint.
    pub fn validate(&self, catalog: &SpriteCatalog) -> Result<()> {
        if self.tile_size_px != catalog.tile_size_px() {
            return Err(Error::validation(format!(
                "atlas tile size {} differs from catalog tile size {}",
                self.tile_size_px,
                catalog.tile_size_px()
            )));
        }
        if self.templates.len() != catalog.len() {
            return Err(Error::validation(format!(
                "atlas has {} templates for a {}-entry catalog",
                self.templates.len(),
                catalog.len()
            )));
        }
        for (i, t) in self.templates.iter().enumerate() {
            let entry = catalog.entry(i as u16).unwrap();
            if t.type_id as usize != i {
                return Err(Error::validation(format!(
                    "atlas template {i} carries type id {}",
                    t.type_id
                )));
            }
            let want = (entry.tile_w * self.tile_size_px, entry.tile_h * self.tile_size_px);
            if (t.width_px, t.height_px) != want {
                return Err(Error::validation(format!(
                    "template {:?} is {}x{} px, expected {}x{}",
                    entry.name, t.width_px, t.height_px, want.0, want.1
                )));
            }
        }
        Ok(())
    }
}

/// One raster frame, row-major RGBA8.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterFrame {
    pub width_px: u32,
    pub height_px: u32,
    pub rgba: Vec<u8>,
}

impl RasterFrame {
    pub fn filled(width_px: u32, height_px: u32, color: [u8; 4]) -> Self {
        let mut rgba = Vec::with_capacity((width_px * height_px * 4) as usize);
        for _ in 0..width_px * height_px {
            rgba.extend_from_slice(&color);
        }
        RasterFrame {
            width_px,
            height_px,
            rgba,
        }
    }

    #[inline]
    fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let at = ((y * self.width_px + x) * 4) as usize;
        &self.rgba[at..at + 4]
    }
}

/// Inclusive tile-coordinate rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileRect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl TileRect {
    fn contains(&self, x: i32, y: i32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Matching controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    /// Maximum mean squared error per opaque pixel channel for a template to
    /// count as present. 0 demands pixel-exact matches.
    pub tolerance: f64,
    /// Optional region (status bars, score displays) excluded from matching.
    pub ignore_region: Option<TileRect>,
    /// Recover a global scroll offset before matching.
    pub detect_offset: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            tolerance: 0.0,
            ignore_region: None,
            detect_offset: true,
        }
    }
}

/// Squared-error sum over the template's opaque pixels visible on the canvas,
/// plus the number of such pixels. `None` when no opaque pixel is visible or
/// the sum already exceeds `budget` (early exit for tight tolerances).
fn template_error_sum(
    frame: &RasterFrame,
    template: &SpriteTemplate,
    px: i32,
    py: i32,
    budget: f64,
) -> Option<(f64, u32)> {
    let mut sum = 0.0f64;
    let mut visible = 0u32;
    for ty in 0..template.height_px {
        let fy = py + ty as i32;
        if fy < 0 || fy >= frame.height_px as i32 {
            continue;
        }
        for tx in 0..template.width_px {
            let fx = px + tx as i32;
            if fx < 0 || fx >= frame.width_px as i32 {
                continue;
            }
            let at = ((ty * template.width_px + tx) * 4) as usize;
            let tpx = &template.rgba[at..at + 4];
            if tpx[3] == 0 {
                continue;
            }
            visible += 1;
            let fpx = frame.pixel(fx as u32, fy as u32);
            for c in 0..3 {
                let d = tpx[c] as f64 - fpx[c] as f64;
                sum += d * d;
            }
            if sum > budget {
                return None;
            }
        }
    }
    if visible == 0 {
        None
    } else {
        Some((sum, visible))
    }
}

/// Best matching template at a tile anchor, as (mse, type_id). Ties in error
/// go to the lower type id because templates are scanned in id order.
fn best_match_at(
    frame: &RasterFrame,
    atlas: &SpriteAtlas,
    px: i32,
    py: i32,
    tolerance: f64,
) -> Option<(f64, u16)> {
    let mut best: Option<(f64, u16)> = None;
    for template in &atlas.templates {
        // The budget is the loosest possible allowance: tolerance over every
        // opaque pixel, whether or not it ends up visible.
        let budget = tolerance * 3.0 * template.opaque_count() as f64;
        if let Some((sum, visible)) = template_error_sum(frame, template, px, py, budget) {
            let mse = sum / (3.0 * visible as f64);
            if mse <= tolerance && best.map_or(true, |(b, _)| mse < b) {
                best = Some((mse, template.type_id));
            }
        }
    }
    best
}

/// Recover the global (dx, dy) pixel scroll offset in
/// `[0, tile_size) x [0, tile_size)` that maximizes the number of tile
/// anchors with a passing template match. Ties prefer the smallest (dy, dx);
/// a frame matching nowhere reports (0, 0).
pub fn detect_scroll_offset(
    frame: &RasterFrame,
    atlas: &SpriteAtlas,
    grid_w: u32,
    grid_h: u32,
    tolerance: f64,
) -> (u32, u32) {
    let ts = atlas.tile_size_px as i32;
    let mut best = (0u32, 0u32);
    let mut best_count = 0usize;
    for dy in 0..atlas.tile_size_px {
        for dx in 0..atlas.tile_size_px {
            let mut count = 0;
            for ty in 0..grid_h {
                for tx in 0..grid_w {
                    let px = tx as i32 * ts + dx as i32;
                    let py = ty as i32 * ts + dy as i32;
                    if best_match_at(frame, atlas, px, py, tolerance).is_some() {
                        count += 1;
                    }
                }
            }
            if count > best_count {
                best_count = count;
                best = (dx, dy);
            }
        }
    }
    best
}

/// Match one raster frame against the atlas on a `grid_w` x `grid_h` tile
/// grid whose pixel origin sits at `offset`.
///
/// Every anchor contributes at most its best template; multi-tile templates
/// claim all the tiles they cover, and contested claims go to the candidate
/// with the lower error, then the lower type id. Output is sorted by
/// (y, x, type_id).
pub fn match_frame(
    frame: &RasterFrame,
    atlas: &SpriteAtlas,
    catalog: &SpriteCatalog,
    grid_w: u32,
    grid_h: u32,
    offset: (u32, u32),
    params: &MatchParams,
) -> Vec<SpriteInstance> {
    let ts = atlas.tile_size_px as i32;
    let mut candidates: Vec<(f64, u16, u32, u32)> = Vec::new();
    for ty in 0..grid_h {
        for tx in 0..grid_w {
            if let Some(region) = &params.ignore_region {
                if region.contains(tx as i32, ty as i32) {
                    continue;
                }
            }
            let px = tx as i32 * ts + offset.0 as i32;
            let py = ty as i32 * ts + offset.1 as i32;
            if let Some((err, type_id)) = best_match_at(frame, atlas, px, py, params.tolerance) {
                candidates.push((err, type_id, tx, ty));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.3.cmp(&b.3))
            .then(a.2.cmp(&b.2))
    });

    let mut claimed = vec![false; (grid_w * grid_h) as usize];
    let mut instances = Vec::new();
    for (_, type_id, tx, ty) in candidates {
        let entry = catalog.entry(type_id).unwrap();
        let cells: Vec<usize> = (0..entry.tile_h)
            .flat_map(|cy| (0..entry.tile_w).map(move |cx| (cx, cy)))
            .filter(|&(cx, cy)| tx + cx < grid_w && ty + cy < grid_h)
            .map(|(cx, cy)| ((ty + cy) * grid_w + tx + cx) as usize)
            .collect();
        if cells.iter().any(|&c| claimed[c]) {
            continue;
        }
        for c in cells {
            claimed[c] = true;
        }
        instances.push(SpriteInstance::new(type_id, tx as i32, ty as i32));
    }
    instances.sort_by_key(SpriteInstance::key);
    instances
}

/// Render a symbolic frame back to pixels: background fill, then each
/// instance's template drawn at its tile position shifted by `offset`.
/// Transparent template pixels leave the background visible; pixels falling
/// outside the canvas are clipped.
pub fn render_frame(
    frame: &Frame,
    atlas: &SpriteAtlas,
    offset: (u32, u32),
    background: [u8; 4],
) -> RasterFrame {
    let ts = atlas.tile_size_px;
    let mut raster = RasterFrame::filled(frame.width * ts, frame.height * ts, background);
    for inst in &frame.instances {
        let template = &atlas.templates[inst.type_id as usize];
        let ox = inst.x * ts as i32 + offset.0 as i32;
        let oy = inst.y * ts as i32 + offset.1 as i32;
        for ty in 0..template.height_px {
            let fy = oy + ty as i32;
            if fy < 0 || fy >= raster.height_px as i32 {
                continue;
            }
            for tx in 0..template.width_px {
                let fx = ox + tx as i32;
                if fx < 0 || fx >= raster.width_px as i32 {
                    continue;
                }
                let at = ((ty * template.width_px + tx) * 4) as usize;
                let px = &template.rgba[at..at + 4];
                if px[3] == 0 {
                    continue;
                }
                let dst = ((fy as u32 * raster.width_px + fx as u32) * 4) as usize;
                raster.rgba[dst..dst + 4].copy_from_slice(px);
            }
        }
    }
    raster
}

// --- PNG and atlas manifest I/O ----------------------------------------

pub fn save_raster(raster: &RasterFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = image::RgbaImage::from_raw(raster.width_px, raster.height_px, raster.rgba.clone())
        .expect("raster buffer matches dimensions");
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterFrame> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgba8();
    Ok(RasterFrame {
        width_px: img.width(),
        height_px: img.height(),
        rgba: img.into_raw(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtlasManifest {
    version: u32,
    tile_size_px: u32,
    sprites: Vec<AtlasSprite>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtlasSprite {
    id: u16,
    name: String,
    w: u32,
    h: u32,
    path: String,
}

/// Write an atlas next to a manifest file: one PNG per sprite type plus
/// `atlas.json` in `dir`.
pub fn save_atlas(catalog: &SpriteCatalog, atlas: &SpriteAtlas, dir: impl AsRef<Path>) -> Result<()> {
    atlas.validate(catalog)?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut sprites = Vec::new();
    for (entry, template) in catalog.entries().iter().zip(&atlas.templates) {
        let file = format!("{}.png", entry.name);
        let raster = RasterFrame {
            width_px: template.width_px,
            height_px: template.height_px,
            rgba: template.rgba.clone(),
        };
        save_raster(&raster, dir.join(&file))?;
        sprites.push(AtlasSprite {
            id: entry.id,
            name: entry.name.clone(),
            w: entry.tile_w,
            h: entry.tile_h,
            path: file,
        });
    }
    let manifest = AtlasManifest {
        version: ATLAS_SCHEMA_VERSION,
        tile_size_px: atlas.tile_size_px,
        sprites,
    };
    let path = dir.join("atlas.json");
    let file = File::create(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, &manifest).map_err(|source| Error::Parse {
        path: path.clone(),
        source,
    })?;
    use std::io::Write as _;
    writer.write_all(b"\n").map_err(|source| Error::Io { path, source })?;
    Ok(())
}

/// Load an atlas manifest (written by [`save_atlas`]) and its PNGs, deriving
/// the sprite catalog from the manifest entries.
pub fn load_atlas(manifest_path: impl AsRef<Path>) -> Result<(SpriteCatalog, SpriteAtlas)> {
    let manifest_path = manifest_path.as_ref();
    let file = File::open(manifest_path).map_err(|source| Error::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let manifest: AtlasManifest =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Parse {
            path: manifest_path.to_path_buf(),
            source,
        })?;
    if manifest.version != ATLAS_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: manifest_path.to_path_buf(),
            found: manifest.version,
            expected: ATLAS_SCHEMA_VERSION,
        });
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    let mut templates = Vec::new();
    for sprite in &manifest.sprites {
        entries.push(CatalogEntry {
            id: sprite.id,
            name: sprite.name.clone(),
            tile_w: sprite.w,
            tile_h: sprite.h,
        });
        let raster = load_raster(dir.join(&sprite.path))?;
        templates.push(SpriteTemplate::new(
            sprite.id,
            raster.width_px,
            raster.height_px,
            raster.rgba,
        )?);
    }
    let catalog = SpriteCatalog::new(entries, manifest.tile_size_px)?;
    let atlas = SpriteAtlas {
        tile_size_px: manifest.tile_size_px,
        templates,
    };
    atlas.validate(&catalog)?;
    Ok((catalog, atlas))
}

// --- directory ingestion ------------------------------------------------

/// A frame file that could not be ingested, with the reason.
#[derive(Debug, Clone)]
pub struct FrameSkip {
    pub path: PathBuf,
    pub reason: String,
}

/// Frame-rate and grid metadata for ingestion.
#[derive(Debug, Clone, Copy)]
pub struct IngestMeta {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

/// Ingest every `frame_<index>.png` in a directory into a trace. Unreadable
/// or ill-sized frames are skipped and reported; a directory without any
/// frame file is a validation error.
pub fn ingest_frames(
    dir: impl AsRef<Path>,
    catalog: &SpriteCatalog,
    atlas: &SpriteAtlas,
    meta: IngestMeta,
    params: &MatchParams,
) -> Result<(Trace, Vec<FrameSkip>)> {
    let dir = dir.as_ref();
    atlas.validate(catalog)?;
    let read_dir = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut indexed: BTreeMap<u64, PathBuf> = BTreeMap::new();
    for entry in read_dir {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(index) = name
            .strip_prefix("frame_")
            .and_then(|rest| rest.strip_suffix(".png"))
            .and_then(|digits| digits.parse::<u64>().ok())
        else {
            continue;
        };
        if let Some(previous) = indexed.insert(index, entry.path()) {
            return Err(Error::validation(format!(
                "frame index {index} appears twice: {} and {}",
                previous.display(),
                entry.path().display()
            )));
        }
    }
    if indexed.is_empty() {
        return Err(Error::validation(format!(
            "no frame_<index>.png files found in {}",
            dir.display()
        )));
    }

    let mut frames = Vec::new();
    let mut skips = Vec::new();
    for (index, path) in indexed {
        let raster = match load_raster(&path) {
            Ok(r) => r,
            Err(e) => {
                skips.push(FrameSkip {
                    path,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let want = (meta.width * atlas.tile_size_px, meta.height * atlas.tile_size_px);
        if (raster.width_px, raster.height_px) != want {
            skips.push(FrameSkip {
                path,
                reason: format!(
                    "frame is {}x{} px, expected {}x{}",
                    raster.width_px, raster.height_px, want.0, want.1
                ),
            });
            continue;
        }
        let offset = if params.detect_offset {
            detect_scroll_offset(&raster, atlas, meta.width, meta.height, params.tolerance)
        } else {
            (0, 0)
        };
        let instances = match_frame(
            &raster,
            atlas,
            catalog,
            meta.width,
            meta.height,
            offset,
            params,
        );
        frames.push(Frame::new(index, meta.width, meta.height, instances)?);
    }
    let trace = Trace::new(None, meta.fps, meta.width, meta.height, catalog.clone(), frames)?;
    Ok((trace, skips))
}
