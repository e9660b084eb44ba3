//! Synthetic gameplay corpora with known ground truth.
//!
//! A corpus script describes a sequence of level sections the camera holds
//! on, each for a fixed number of frames (its dwell), optionally with a
//! roaming sprite to provide small frame-to-frame motion. Building the
//! script yields both the symbolic trace and the ground truth a recovery
//! stage should reproduce, so pipeline stages can be tested end to end
//! without any hand labeling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trace::{frame_difference, Frame, SpriteCatalog, SpriteInstance, Trace};
use crate::vision::{SpriteAtlas, SpriteTemplate};

/// Deterministic per-type artwork for a catalog: every template pixel is a
/// pure function of (type id, pixel position), every pixel is opaque, and
/// distinct types never share a red value, so exact matching is unambiguous.
pub fn synthetic_atlas(catalog: &SpriteCatalog) -> SpriteAtlas {
    let ts = catalog.tile_size_px();
    let templates = catalog
        .entries()
        .iter()
        .map(|entry| {
            let w = entry.tile_w * ts;
            let h = entry.tile_h * ts;
            let mut rgba = Vec::with_capacity((w * h * 4) as usize);
            for y in 0..h {
                for x in 0..w {
                    let id = entry.id as u32;
                    let r = (40 + 97 * id) % 256;
                    let g = (x * 23 + y * 47 + id * 13) % 256;
                    let b = (x * 59 + y * 31 + 100) % 256;
                    rgba.extend_from_slice(&[r as u8, g as u8, b as u8, 255]);
                }
            }
            SpriteTemplate::new(entry.id, w, h, rgba).expect("synthetic template is opaque")
        })
        .collect();
    SpriteAtlas {
        tile_size_px: ts,
        templates,
    }
}

/// Sky color used when rendering synthetic corpora. No synthetic template
/// with a type id below 191 shares this red value, so the background never
/// matches a template.
pub const SKY: [u8; 4] = [135, 206, 235, 255];

/// A sprite that moves along a scripted path, one step per frame. The path
/// is cycled when shorter than the section's dwell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkerSpec {
    pub type_id: u16,
    pub path: Vec<(i32, i32)>,
}

/// One camera hold: a static arrangement shown for `dwell` consecutive
/// frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSpec {
    pub name: String,
    pub blueprint: Vec<SpriteInstance>,
    pub dwell: u32,
    pub walker: Option<WalkerSpec>,
}

/// A full scripted recording.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub id: Option<String>,
    pub catalog: SpriteCatalog,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub sections: Vec<SectionSpec>,
}

/// What a recovery stage should find in a built corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    /// Inclusive (start, end) frame index of each camera hold, in order.
    pub section_spans: Vec<(u64, u64)>,
    /// Frame indices that begin a hold sharing no instance with the frame
    /// before it (a complete scene change).
    pub endpoints: Vec<u64>,
    /// Indices (into `section_spans`) of holds whose dwell is strictly
    /// above the mean dwell.
    pub high_interaction: Vec<usize>,
}

fn section_frame(spec: &SectionSpec, step: u32) -> Vec<SpriteInstance> {
    let mut instances = spec.blueprint.clone();
    if let Some(walker) = &spec.walker {
        let (x, y) = walker.path[step as usize % walker.path.len()];
        instances.push(SpriteInstance::new(walker.type_id, x, y));
    }
    instances
}

/// Build the trace a scripted corpus records, plus its ground truth.
///
/// Besides the structural checks every frame gets, this enforces the
/// properties the downstream boundary sweep relies on:
/// - within a hold, every frame stays within difference 0.10 of the hold's
///   first frame (walker motion must be a small fraction of the scene);
/// - across a cut, the first frames of adjacent holds differ by more
///   than 0.10.
pub fn build_corpus(spec: &CorpusSpec) -> Result<(Trace, GroundTruth)> {
    if spec.sections.is_empty() {
        return Err(Error::validation("corpus has no sections"));
    }
    for section in &spec.sections {
        if section.dwell == 0 {
            return Err(Error::validation(format!(
                "section {:?} has zero dwell",
                section.name
            )));
        }
        if let Some(walker) = &section.walker {
            if walker.path.is_empty() {
                return Err(Error::validation(format!(
                    "section {:?} has a walker with an empty path",
                    section.name
                )));
            }
        }
    }

    let mut frames = Vec::new();
    let mut section_spans = Vec::new();
    let mut endpoints = Vec::new();
    let mut index = 0u64;
    for (si, section) in spec.sections.iter().enumerate() {
        let start = index;
        let mut first_of_section = None;
        for step in 0..section.dwell {
            let frame = Frame::new(index, spec.width, spec.height, section_frame(section, step))
                .map_err(|e| {
                    Error::validation(format!("section {:?}, step {step}: {e}", section.name))
                })?;
            if step == 0 {
                if let Some(prev) = frames.last() {
                    let cut = frame_difference(prev, &frame);
                    if cut >= 1.0 {
                        endpoints.push(index);
                    }
                }
                first_of_section = Some(frame.clone());
            } else {
                let drift = frame_difference(first_of_section.as_ref().unwrap(), &frame);
                if drift > 0.10 {
                    return Err(Error::validation(format!(
                        "section {:?}, step {step}: drift {drift:.3} from the hold's first \
                         frame exceeds 0.10; add static instances or shorten the walker path",
                        section.name
                    )));
                }
            }
            frames.push(frame);
            index += 1;
        }
        section_spans.push((start, index - 1));
        if si > 0 {
            let prev_first = &frames[section_spans[si - 1].0 as usize];
            let cut = frame_difference(prev_first, first_of_section.as_ref().unwrap());
            if cut <= 0.10 {
                return Err(Error::validation(format!(
                    "sections {:?} and {:?} differ by only {cut:.3}; cuts must exceed 0.10",
                    spec.sections[si - 1].name, section.name
                )));
            }
        }
    }

    let mean_dwell =
        spec.sections.iter().map(|s| s.dwell as f64).sum::<f64>() / spec.sections.len() as f64;
    let high_interaction = spec
        .sections
        .iter()
        .enumerate()
        .filter(|(_, s)| s.dwell as f64 > mean_dwell)
        .map(|(i, _)| i)
        .collect();

    let trace = Trace::new(
        spec.id.clone(),
        spec.fps,
        spec.width,
        spec.height,
        spec.catalog.clone(),
        frames,
    )?;
    Ok((
        trace,
        GroundTruth {
            section_spans,
            endpoints,
            high_interaction,
        },
    ))
}

/// A seeded random corpus: `n_sections` camera holds over a shared catalog,
/// each a fresh random arrangement of 10–18 static instances with mixed
/// dwells, roughly half with a one-sprite walker. Type 0 is reserved for the
/// walker so its motion can never collide with scenery of its own type.
///
/// Arrangements are resampled until adjacent holds differ by more than 0.25,
/// comfortably past the 0.10 boundary sweep; with 14 independent cells on a
/// 16x14 grid collisions that deep are vanishingly rare, so the retry loop
/// is a formality.
pub fn random_corpus(seed: u64, n_sections: usize) -> CorpusSpec {
    let catalog = SpriteCatalog::from_names(
        &["scout", "slab", "brick", "vine", "coin", "spike"],
        16,
    )
    .expect("static catalog is valid");
    let width = 16u32;
    let height = 14u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sections: Vec<SectionSpec> = Vec::new();
    for si in 0..n_sections {
        let blueprint = loop {
            let candidate = random_blueprint(&mut rng, width, height, catalog.len() as u16);
            let distinct_enough = match sections.last() {
                None => true,
                Some(prev) => blueprint_difference(&prev.blueprint, &candidate) > 0.25,
            };
            if distinct_enough {
                break candidate;
            }
        };
        let walker = if rng.random::<f64>() < 0.5 {
            Some(random_walker(&mut rng, &blueprint, width, height))
        } else {
            None
        };
        let dwell = rng.random_range(2..=12);
        sections.push(SectionSpec {
            name: format!("hold_{si}"),
            blueprint,
            dwell,
            walker,
        });
    }
    CorpusSpec {
        id: Some(format!("random_{seed}")),
        catalog,
        width,
        height,
        fps: 30.0,
        sections,
    }
}

fn random_blueprint(rng: &mut ChaCha8Rng, width: u32, height: u32, n_types: u16) -> Vec<SpriteInstance> {
    let n = rng.random_range(10..=18);
    let mut cells = std::collections::BTreeSet::new();
    while cells.len() < n {
        let x = rng.random_range(0..width as i32);
        let y = rng.random_range(0..height as i32);
        cells.insert((x, y));
    }
    cells
        .into_iter()
        .map(|(x, y)| SpriteInstance::new(rng.random_range(1..n_types), x, y))
        .collect()
}

fn random_walker(
    rng: &mut ChaCha8Rng,
    blueprint: &[SpriteInstance],
    width: u32,
    height: u32,
) -> WalkerSpec {
    let occupied: std::collections::BTreeSet<(i32, i32)> =
        blueprint.iter().map(|i| (i.x, i.y)).collect();
    let mut path = Vec::new();
    while path.len() < 4 {
        let x = rng.random_range(0..width as i32);
        let y = rng.random_range(0..height as i32);
        if !occupied.contains(&(x, y)) {
            path.push((x, y));
        }
    }
    WalkerSpec { type_id: 0, path }
}

fn blueprint_difference(a: &[SpriteInstance], b: &[SpriteInstance]) -> f64 {
    let fa = Frame::new(0, 1000, 1000, a.to_vec()).expect("blueprint already validated");
    let fb = Frame::new(0, 1000, 1000, b.to_vec()).expect("blueprint already validated");
    frame_difference(&fa, &fb)
}

/// Horizontal offsets (trunk, step, perch, post) per hold of a wide-trunk
/// family. Any two rows differ in enough columns that no two holds of a
/// family come close to the 0.9 duplicate threshold.
const WIDE_ROWS: [[i32; 4]; 4] = [[0, 0, 0, 0], [1, 0, 1, 0], [0, 1, 1, 1], [1, 1, 0, 1]];

/// Offsets for the five holds of the tall-trunk family. The post offset
/// never exceeds the trunk offset, which keeps the final hop within reach
/// in every hold.
const TALL_ROWS: [[i32; 4]; 5] = [
    [0, 0, 0, 0],
    [1, 0, 0, 0],
    [0, 1, 1, 0],
    [1, 0, 1, 1],
    [1, 1, 0, 1],
];

/// Base placement of one layout family: where its trunk, step, perch, and
/// post sit before per-hold jitter. The shared canopy block is fixed.
struct FamilyLayout {
    trunk: (i32, i32),
    wide_trunk: bool,
    step: (i32, i32),
    perch: (i32, i32),
    post: (i32, i32),
}

const FAMILIES: [FamilyLayout; 4] = [
    FamilyLayout {
        trunk: (8, 9),
        wide_trunk: true,
        step: (1, 9),
        perch: (14, 5),
        post: (16, 1),
    },
    FamilyLayout {
        trunk: (8, 7),
        wide_trunk: true,
        step: (1, 9),
        perch: (13, 3),
        post: (16, 3),
    },
    FamilyLayout {
        trunk: (8, 5),
        wide_trunk: true,
        step: (2, 7),
        perch: (14, 1),
        post: (16, 5),
    },
    FamilyLayout {
        trunk: (11, 3),
        wide_trunk: false,
        step: (2, 7),
        perch: (8, 4),
        post: (16, 7),
    },
];

fn push_rect(cells: &mut Vec<SpriteInstance>, type_id: u16, x0: i32, y0: i32, w: i32, h: i32) {
    for dy in 0..h {
        for dx in 0..w {
            cells.push(SpriteInstance::new(type_id, x0 + dx, y0 + dy));
        }
    }
}

fn family_hold(family: &FamilyLayout, jitter: [i32; 4], ordinal: usize, name: String) -> SectionSpec {
    let [jt, js, jm, jp] = jitter;
    let mut cells = Vec::new();
    push_rect(&mut cells, 0, 9, 0, 3, 3);
    let (tx, ty) = family.trunk;
    if family.wide_trunk {
        push_rect(&mut cells, 1, tx + jt, ty, 4, 2);
    } else {
        push_rect(&mut cells, 1, tx + jt, ty, 2, 4);
    }
    let (sx, sy) = family.step;
    push_rect(&mut cells, 2, sx + js, sy, 6, 1);
    let (mx, my) = family.perch;
    push_rect(&mut cells, 3, mx + jm, my, 2, 2);
    cells.push(SpriteInstance::new(3, mx + jm, my + 2));
    let (px, py) = family.post;
    push_rect(&mut cells, 4, px + jp, py, 1, 4);
    SectionSpec {
        name,
        blueprint: cells,
        dwell: 12 + (ordinal as u32 % 3),
        walker: None,
    }
}

fn filler_hold(j: usize) -> SectionSpec {
    let cells = (0..8)
        .map(|x| SpriteInstance::new(1, x, (x + j as i32) % 6))
        .collect();
    SectionSpec {
        name: format!("filler_{j}"),
        blueprint: cells,
        dwell: 2,
        walker: None,
    }
}

/// Hand-built deterministic corpus exercising the whole pipeline with known
/// ground truth.
///
/// Four platform-layout families share a five-type tile vocabulary on a
/// 20x12 grid; every family places one canopy, trunk, step, perch, and post.
/// Each family contributes four or five camera holds whose shapes are
/// jittered horizontally by at most one cell, keeping holds of a family
/// clearly related without ever crossing the duplicate threshold. Two-frame
/// filler holds that share no cell with any family scene separate the
/// groups, so every boundary is an unambiguous cut, family-to-filler cuts
/// are complete scene changes, and exactly the seventeen family holds sit
/// above the mean dwell.
///
/// The placements are tuned for the downstream stages:
/// - every family hold admits a left-to-right traversal under the default
///   jump envelope when types 1-4 are solid and the canopy is scenery;
/// - trunks come in two genuinely different shapes (4x2 slab, 2x4 column)
///   at four different heights, giving shape clustering a real split and
///   keeping trunk placements from standing in for one another;
/// - families pair up through shared step placement (the two low-trunk
///   families, and the two high-trunk families), so a perch learned in one
///   family transplants into its partner scene only at permissive
///   coexistence settings, while strict settings admit pure rebuilds only.
pub fn treetop_fixture() -> CorpusSpec {
    let catalog = SpriteCatalog::from_names(&["canopy", "trunk", "step", "perch", "post"], 16)
        .expect("static catalog is valid");
    let mut sections = Vec::new();
    let mut ordinal = 0usize;
    for round in 0..4 {
        sections.push(filler_hold(round));
        for (g, family) in FAMILIES.iter().enumerate() {
            let jitter = if g < 3 {
                WIDE_ROWS[round]
            } else {
                TALL_ROWS[round]
            };
            sections.push(family_hold(family, jitter, ordinal, format!("g{g}_s{round}")));
            ordinal += 1;
        }
    }
    sections.push(filler_hold(4));
    sections.push(family_hold(&FAMILIES[3], TALL_ROWS[4], ordinal, "g3_s4".to_string()));
    sections.push(filler_hold(5));
    CorpusSpec {
        id: Some("treetop".into()),
        catalog,
        width: 20,
        height: 12,
        fps: 30.0,
        sections,
    }
}
