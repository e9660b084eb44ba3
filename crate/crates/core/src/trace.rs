//! Symbolic gameplay traces: sprite catalogs, frames of sprite instances,
//! and the normalized frame-difference metric used for both section
//! segmentation and duplicate detection.
//!
//! Traces serialize to a versioned JSON schema:
//!
//! ```json
//! {
//!   "version": 1,
//!   "meta": { "tile_size_px": 16, "width": 16, "height": 14, "fps": 30.0 },
//!   "catalog": [ { "id": 0, "name": "bark", "w": 1, "h": 1 } ],
//!   "frames": [ { "i": 0, "instances": [[0, 3, 10], [0, 4, 10]] } ]
//! }
//! ```
//!
//! Frame instances are `[type_id, x, y]` triples in tile coordinates with the
//! origin at the top-left. Frames may be omitted (dropped frames), but indices
//! must be strictly increasing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Default overlap threshold above which two frames count as duplicates.
pub const DUPLICATE_THRESHOLD: f64 = 0.9;

/// One sprite type: a stable small id, a human-readable name, and the
/// sprite's footprint in whole tiles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: u16,
    pub name: String,
    pub tile_w: u32,
    pub tile_h: u32,
}

/// Ordered table of sprite types. Ids are dense: entry `i` has id `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpriteCatalog {
    entries: Vec<CatalogEntry>,
    tile_size_px: u32,
}

impl SpriteCatalog {
    pub fn new(entries: Vec<CatalogEntry>, tile_size_px: u32) -> Result<Self> {
        if tile_size_px == 0 {
            return Err(Error::validation("catalog tile_size_px must be positive"));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i {
                return Err(Error::validation(format!(
                    "catalog entry {} has id {}; ids must be dense and ordered",
                    i, e.id
                )));
            }
            if e.tile_w == 0 || e.tile_h == 0 {
                return Err(Error::validation(format!(
                    "catalog entry {:?} has an empty footprint",
                    e.name
                )));
            }
            if entries[..i].iter().any(|prev| prev.name == e.name) {
                return Err(Error::validation(format!(
                    "catalog entry name {:?} appears twice",
                    e.name
                )));
            }
        }
        Ok(SpriteCatalog {
            entries,
            tile_size_px,
        })
    }

    /// Convenience constructor for 1x1-tile sprite types.
    pub fn from_names(names: &[&str], tile_size_px: u32) -> Result<Self> {
        let entries = names
            .iter()
            .enumerate()
            .map(|(i, n)| CatalogEntry {
                id: i as u16,
                name: (*n).to_string(),
                tile_w: 1,
                tile_h: 1,
            })
            .collect();
        SpriteCatalog::new(entries, tile_size_px)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tile_size_px(&self) -> u32 {
        self.tile_size_px
    }

    pub fn entry(&self, type_id: u16) -> Option<&CatalogEntry> {
        self.entries.get(type_id as usize)
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn id_of(&self, name: &str) -> Option<u16> {
        self.entries.iter().position(|e| e.name == name).map(|i| i as u16)
    }
}

/// One sprite occurrence at a tile position. For multi-tile sprite types the
/// position is the anchor (top-left tile).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpriteInstance {
    pub type_id: u16,
    pub x: i32,
    pub y: i32,
}

impl SpriteInstance {
    pub fn new(type_id: u16, x: i32, y: i32) -> Self {
        SpriteInstance { type_id, x, y }
    }

    /// Canonical sort key: row-major position, then type.
    pub fn key(&self) -> (i32, i32, u16) {
        (self.y, self.x, self.type_id)
    }
}

/// One observed frame: the set of sprite instances visible at a frame index.
/// Instances are kept sorted by [`SpriteInstance::key`] and are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub width: u32,
    pub height: u32,
    pub instances: Vec<SpriteInstance>,
}

impl Frame {
    pub fn new(
        index: u64,
        width: u32,
        height: u32,
        mut instances: Vec<SpriteInstance>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "frame {} has empty dimensions {}x{}",
                index, width, height
            )));
        }
        for inst in &instances {
            if inst.x < 0 || inst.y < 0 || inst.x >= width as i32 || inst.y >= height as i32 {
                return Err(Error::validation(format!(
                    "frame {}: instance ({}, {}, {}) is outside the {}x{} grid",
                    index, inst.type_id, inst.x, inst.y, width, height
                )));
            }
        }
        instances.sort_by_key(SpriteInstance::key);
        for pair in instances.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::validation(format!(
                    "frame {}: duplicate instance ({}, {}, {})",
                    index, pair[0].type_id, pair[0].x, pair[0].y
                )));
            }
        }
        Ok(Frame {
            index,
            width,
            height,
            instances,
        })
    }

    /// Per-type instance counts, indexed by type id.
    pub fn count_vector(&self, catalog: &SpriteCatalog) -> Vec<u32> {
        let mut counts = vec![0u32; catalog.len()];
        for inst in &self.instances {
            counts[inst.type_id as usize] += 1;
        }
        counts
    }
}

/// A full gameplay trace: metadata, sprite catalog, and observed frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Optional stable identifier, carried through to section provenance.
    pub id: Option<String>,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub catalog: SpriteCatalog,
    pub frames: Vec<Frame>,
}

impl Trace {
    pub fn new(
        id: Option<String>,
        fps: f64,
        width: u32,
        height: u32,
        catalog: SpriteCatalog,
        frames: Vec<Frame>,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::validation(format!("fps must be positive, got {fps}")));
        }
        let mut prev: Option<u64> = None;
        for frame in &frames {
            if frame.width != width || frame.height != height {
                return Err(Error::validation(format!(
                    "frame {} is {}x{} but the trace is {}x{}",
                    frame.index, frame.width, frame.height, width, height
                )));
            }
            if let Some(p) = prev {
                if frame.index <= p {
                    return Err(Error::validation(format!(
                        "frame indices must be strictly increasing: {} follows {}",
                        frame.index, p
                    )));
                }
            }
            prev = Some(frame.index);
            for inst in &frame.instances {
                if catalog.entry(inst.type_id).is_none() {
                    return Err(Error::validation(format!(
                        "frame {}: instance type_id {} is outside the {}-entry catalog",
                        frame.index,
                        inst.type_id,
                        catalog.len()
                    )));
                }
            }
        }
        Ok(Trace {
            id,
            fps,
            width,
            height,
            catalog,
            frames,
        })
    }

    /// Identifier used in reports and provenance when none was recorded.
    pub fn id_or_default(&self) -> &str {
        self.id.as_deref().unwrap_or("trace")
    }
}

/// Size of the intersection of two canonically sorted instance lists.
fn intersection_size(a: &[SpriteInstance], b: &[SpriteInstance]) -> usize {
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].key().cmp(&b[j].key()) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared
}

/// Normalized difference between two instance lists:
/// `1 - |shared| / max(|a|, |b|)`, and `0.0` when both are empty.
///
/// Ranges over `[0, 1]`; `0` means identical content, `1` means nothing in
/// common. Both lists must be canonically sorted (guaranteed by [`Frame`]).
pub fn instance_difference(a: &[SpriteInstance], b: &[SpriteInstance]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let shared = intersection_size(a, b);
    1.0 - shared as f64 / a.len().max(b.len()) as f64
}

/// [`instance_difference`] applied to two frames of the same trace.
pub fn frame_difference(a: &Frame, b: &Frame) -> f64 {
    instance_difference(&a.instances, &b.instances)
}

/// Two frames are duplicates when their overlap `1 - frame_difference`
/// reaches `threshold` (default [`DUPLICATE_THRESHOLD`]).
pub fn is_duplicate(a: &Frame, b: &Frame, threshold: f64) -> bool {
    1.0 - frame_difference(a, b) >= threshold
}

// --- serialization -----------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFile {
    version: u32,
    meta: MetaFile,
    catalog: Vec<CatalogEntryFile>,
    frames: Vec<FrameFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    tile_size_px: u32,
    width: u32,
    height: u32,
    fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogEntryFile {
    id: u16,
    name: String,
    w: u32,
    h: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFile {
    i: u64,
    instances: Vec<(u16, i32, i32)>,
}

/// Read a trace from a JSON reader. `origin` is only used in error messages.
pub fn read_trace(reader: impl Read, origin: &Path) -> Result<Trace> {
    let file: TraceFile = serde_json::from_reader(reader).map_err(|source| Error::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    if file.version != TRACE_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: origin.to_path_buf(),
            found: file.version,
            expected: TRACE_SCHEMA_VERSION,
        });
    }
    let entries = file
        .catalog
        .into_iter()
        .map(|e| CatalogEntry {
            id: e.id,
            name: e.name,
            tile_w: e.w,
            tile_h: e.h,
        })
        .collect();
    let catalog = SpriteCatalog::new(entries, file.meta.tile_size_px)?;
    let frames = file
        .frames
        .into_iter()
        .map(|f| {
            let instances = f
                .instances
                .into_iter()
                .map(|(t, x, y)| SpriteInstance::new(t, x, y))
                .collect();
            Frame::new(f.i, file.meta.width, file.meta.height, instances)
        })
        .collect::<Result<Vec<_>>>()?;
    Trace::new(
        file.meta.id,
        file.meta.fps,
        file.meta.width,
        file.meta.height,
        catalog,
        frames,
    )
}

/// Write a trace as pretty-printed JSON. Output is canonical: instances are
/// stored in sorted order, so identical traces serialize to identical bytes.
pub fn write_trace(trace: &Trace, mut writer: impl Write, origin: &Path) -> Result<()> {
    let file = TraceFile {
        version: TRACE_SCHEMA_VERSION,
        meta: MetaFile {
            tile_size_px: trace.catalog.tile_size_px(),
            width: trace.width,
            height: trace.height,
            fps: trace.fps,
            id: trace.id.clone(),
        },
        catalog: trace
            .catalog
            .entries()
            .iter()
            .map(|e| CatalogEntryFile {
                id: e.id,
                name: e.name.clone(),
                w: e.tile_w,
                h: e.tile_h,
            })
            .collect(),
        frames: trace
            .frames
            .iter()
            .map(|f| FrameFile {
                i: f.index,
                instances: f.instances.iter().map(|s| (s.type_id, s.x, s.y)).collect(),
            })
            .collect(),
    };
    let io_err = |source: std::io::Error| Error::Io {
        path: origin.to_path_buf(),
        source,
    };
    let mut buf = serde_json::to_vec_pretty(&file).map_err(|source| Error::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    buf.push(b'\n');
    writer.write_all(&buf).map_err(io_err)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_trace(BufReader::new(file), path)
}

pub fn save_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_trace(trace, BufWriter::new(file), path)
}
