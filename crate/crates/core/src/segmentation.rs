//! Splitting a trace into level sections.
//!
//! A section is a maximal run of frames that stay visually close to the
//! section's first frame (its representative). A new section opens at the
//! first frame whose difference from the representative exceeds the boundary
//! threshold; a boundary where the frame differs completely from the
//! immediately preceding frame is additionally flagged as a level endpoint
//! (death, fade-out, level transition).
//!
//! The number of frames a section spans is its interaction value: how long
//! the player stayed there. Sections well above the per-trace mean are the
//! high-interaction sections that downstream modeling consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{frame_difference, Frame, SpriteCatalog, Trace};

/// Thresholds controlling section boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    /// A frame differing from the section representative by more than this
    /// opens a new section.
    pub boundary_threshold: f64,
    /// A boundary frame differing from its immediate predecessor by at least
    /// this much is an endpoint.
    pub endpoint_threshold: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            boundary_threshold: 0.10,
            endpoint_threshold: 1.0,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("boundary_threshold", self.boundary_threshold),
            ("endpoint_threshold", self.endpoint_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::validation(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// One level section of a trace. `interaction_value` is the ordinal span
/// `end_frame - start_frame + 1`, i.e. dwell time in frames (dropped frames
/// included).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSection {
    pub trace_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub interaction_value: u64,
    /// The trace frame at `start_frame`; stands in for the whole section.
    pub representative: Frame,
}

/// All sections of one trace plus the endpoint frame ordinals.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSet {
    pub trace_id: String,
    pub sections: Vec<LevelSection>,
    pub endpoints: Vec<u64>,
}

/// Segment a trace into sections. Errors on an empty trace.
///
/// Sections whose representative frame is empty (blackouts between levels)
/// are dropped from the result; for traces without such frames the sections
/// tile the trace exactly.
pub fn segment_trace(trace: &Trace, params: &SegmentationParams) -> Result<SectionSet> {
    params.validate()?;
    if trace.frames.is_empty() {
        return Err(Error::validation("trace has no frames"));
    }
    let trace_id = trace.id_or_default().to_string();
    let mut sections = Vec::new();
    let mut endpoints = Vec::new();

    let mut rep = &trace.frames[0];
    let mut prev = &trace.frames[0];
    let mut start = trace.frames[0].index;
    for frame in &trace.frames[1..] {
        if frame_difference(rep, frame) > params.boundary_threshold {
            sections.push(LevelSection {
                trace_id: trace_id.clone(),
                start_frame: start,
                end_frame: frame.index - 1,
                interaction_value: frame.index - start,
                representative: rep.clone(),
            });
            if frame_difference(prev, frame) >= params.endpoint_threshold {
                endpoints.push(frame.index);
            }
            rep = frame;
            start = frame.index;
        }
        prev = frame;
    }
    let last = trace.frames.last().unwrap().index;
    sections.push(LevelSection {
        trace_id: trace_id.clone(),
        start_frame: start,
        end_frame: last,
        interaction_value: last - start + 1,
        representative: rep.clone(),
    });

    sections.retain(|s| !s.representative.instances.is_empty());
    Ok(SectionSet {
        trace_id,
        sections,
        endpoints,
    })
}

/// Interaction values in frames, aligned with `set.sections`.
pub fn interaction_values(set: &SectionSet) -> Vec<u64> {
    set.sections.iter().map(|s| s.interaction_value).collect()
}

/// Interaction values in seconds at the given frame rate.
pub fn interaction_seconds(set: &SectionSet, fps: f64) -> Vec<f64> {
    set.sections
        .iter()
        .map(|s| s.interaction_value as f64 / fps)
        .collect()
}

/// Indices of sections whose interaction value is strictly above the
/// arithmetic mean over the set. Empty input yields an empty result.
pub fn select_high_interaction(set: &SectionSet) -> Vec<usize> {
    if set.sections.is_empty() {
        return Vec::new();
    }
    let total: u64 = set.sections.iter().map(|s| s.interaction_value).sum();
    let mean = total as f64 / set.sections.len() as f64;
    set.sections
        .iter()
        .enumerate()
        .filter(|(_, s)| s.interaction_value as f64 > mean)
        .map(|(i, _)| i)
        .collect()
}

/// Per-type instance counts of a section's representative frame.
pub fn count_vector(section: &LevelSection, catalog: &SpriteCatalog) -> Vec<u32> {
    section.representative.count_vector(catalog)
}
