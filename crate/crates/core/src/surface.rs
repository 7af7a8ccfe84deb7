//! Flat-surface candidates from a depth map.
//!
//! Pixels whose depth gradient stays under a threshold form a flatness mask;
//! a 3x3 opening then closing removes speckle and fills pinholes; the
//! 4-connected components that are large enough become candidate surfaces.
//! When none qualify the image is split into quadrants instead.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, PixelRect};
use crate::sensor::{RgbImage, SensorFrame};

pub const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("gradient threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("mask is {mask_w}x{mask_h} but the frame is {frame_w}x{frame_h}")]
    ShapeMismatch {
        mask_w: usize,
        mask_h: usize,
        frame_w: usize,
        frame_h: usize,
    },
    #[error("invalid context level {0:?}")]
    InvalidContext(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatnessMask {
    pub raw: Grid<bool>,
    pub refined: Grid<bool>,
}

/// Central difference along one axis, one-sided at the ends.
fn axis_diff(n: usize, i: usize, at: impl Fn(usize) -> f64) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 {
        at(1) - at(0)
    } else if i == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        (at(i + 1) - at(i - 1)) / 2.0
    }
}

fn gradient(depth: &Grid<f64>, u: usize, v: usize) -> f64 {
    let du = axis_diff(depth.width(), u, |x| *depth.get(x, v));
    let dv = axis_diff(depth.height(), v, |y| *depth.get(u, y));
    du.abs().max(dv.abs())
}

fn erode(mask: &Grid<bool>) -> Grid<bool> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    Grid::from_fn(mask.width(), mask.height(), |u, v| {
        (-1..=1).all(|dv| {
            (-1..=1).all(|du| {
                let (x, y) = (u as i64 + du, v as i64 + dv);
                // Outside the image counts as set, so borders do not erode.
                x < 0 || y < 0 || x >= w || y >= h || *mask.get(x as usize, y as usize)
            })
        })
    })
}

fn dilate(mask: &Grid<bool>) -> Grid<bool> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    Grid::from_fn(mask.width(), mask.height(), |u, v| {
        (-1..=1).any(|dv| {
            (-1..=1).any(|du| {
                let (x, y) = (u as i64 + du, v as i64 + dv);
                x >= 0 && y >= 0 && x < w && y < h && *mask.get(x as usize, y as usize)
            })
        })
    })
}

pub fn opening(mask: &Grid<bool>) -> Grid<bool> {
    dilate(&erode(mask))
}

pub fn closing(mask: &Grid<bool>) -> Grid<bool> {
    erode(&dilate(mask))
}

/// Marks pixels whose depth gradient magnitude, `max(|dD/du|, |dD/dv|)`, is
/// at most `grad_threshold` metres per pixel.
pub fn flatness_mask(depth: &Grid<f64>, grad_threshold: f64) -> Result<FlatnessMask, SurfaceError> {
    if !(grad_threshold.is_finite() && grad_threshold > 0.0) {
        return Err(SurfaceError::InvalidThreshold(grad_threshold));
    }
    let raw = Grid::from_fn(depth.width(), depth.height(), |u, v| {
        gradient(depth, u, v) <= grad_threshold
    });
    let refined = closing(&opening(&raw));
    Ok(FlatnessMask { raw, refined })
}

/// Gradient threshold scaled with range: depth error grows linearly with
/// distance, so the tolerance does too.
pub fn range_scaled_threshold(grad_threshold: f64, range_m: f64, reference_range_m: f64) -> f64 {
    grad_threshold * range_m / reference_range_m
}

/// One 4-connected set of mask pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub bbox: PixelRect,
    pub area_px: u64,
    /// Membership within `bbox`, indexed from its top-left corner.
    pub mask: Grid<bool>,
}

/// All 4-connected components of `mask`, in raster order of their first pixel.
pub fn label_components(mask: &Grid<bool>) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![usize::MAX; w * h];
    let mut comps: Vec<(PixelRect, u64)> = Vec::new();
    for start in 0..w * h {
        if !mask.as_slice()[start] || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut rect = PixelRect::new(u32::MAX, u32::MAX, 0, 0);
        let mut area = 0;
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        while let Some(i) = queue.pop_front() {
            let (u, v) = (i % w, i / w);
            area += 1;
            rect.u_min = rect.u_min.min(u as u32);
            rect.v_min = rect.v_min.min(v as u32);
            rect.u_max = rect.u_max.max(u as u32 + 1);
            rect.v_max = rect.v_max.max(v as u32 + 1);
            let mut visit = |j: usize| {
                if mask.as_slice()[j] && label[j] == usize::MAX {
                    label[j] = id;
                    queue.push_back(j);
                }
            };
            if u > 0 {
                visit(i - 1);
            }
            if u + 1 < w {
                visit(i + 1);
            }
            if v > 0 {
                visit(i - w);
            }
            if v + 1 < h {
                visit(i + w);
            }
        }
        comps.push((rect, area));
    }
    comps
        .into_iter()
        .enumerate()
        .map(|(id, (bbox, area_px))| {
            let sub = Grid::from_fn(bbox.width() as usize, bbox.height() as usize, |x, y| {
                label[(bbox.v_min as usize + y) * w + bbox.u_min as usize + x] == id
            });
            Component {
                bbox,
                area_px,
                mask: sub,
            }
        })
        .collect()
}

/// How much of the frame accompanies a candidate sent to the judge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ContextLevel {
    #[default]
    Cropped,
    /// Bounding box grown by this percentage of its size on every side.
    Padded(u32),
    /// The whole frame with the candidate outlined.
    FullImage,
}

impl fmt::Display for ContextLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextLevel::Cropped => f.write_str("cropped"),
            ContextLevel::Padded(p) => write!(f, "padded{p}"),
            ContextLevel::FullImage => f.write_str("full_image"),
        }
    }
}

impl FromStr for ContextLevel {
    type Err = SurfaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cropped" => Ok(ContextLevel::Cropped),
            "full_image" | "full" => Ok(ContextLevel::FullImage),
            _ => {
                let pct = s
                    .strip_prefix("padded")
                    .map(|p| p.trim_start_matches([':', '-', '=']))
                    .and_then(|p| p.parse::<u32>().ok())
                    .filter(|p| (1..=100).contains(p))
                    .ok_or_else(|| SurfaceError::InvalidContext(s.to_string()))?;
                Ok(ContextLevel::Padded(pct))
            }
        }
    }
}

impl TryFrom<String> for ContextLevel {
    type Error = SurfaceError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ContextLevel> for String {
    fn from(c: ContextLevel) -> Self {
        c.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrigin {
    Detected,
    QuadrantFallback,
    /// Centre window of a post-move frame, shown for confirmation.
    Closeup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    Nw,
    Ne,
    Sw,
    Se,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSurface {
    pub bbox: PixelRect,
    /// Frame region shown in `crop`.
    pub crop_rect: PixelRect,
    pub crop: RgbImage,
    pub context: ContextLevel,
    pub origin: CandidateOrigin,
    pub quadrant: Option<Quadrant>,
    pub area_px: u64,
    /// Pixels of the surface itself, relative to `bbox`. All set for
    /// quadrants and close-ups.
    pub mask: Grid<bool>,
}

impl CandidateSurface {
    fn new(
        frame: &SensorFrame,
        bbox: PixelRect,
        area_px: u64,
        mask: Grid<bool>,
        context: ContextLevel,
        origin: CandidateOrigin,
    ) -> Self {
        let (w, h) = (frame.intrinsics.width, frame.intrinsics.height);
        let (crop_rect, crop) = match context {
            ContextLevel::Cropped => (bbox, frame.crop(bbox)),
            ContextLevel::Padded(p) => {
                let r = bbox.padded(p, w, h);
                (r, frame.crop(r))
            }
            ContextLevel::FullImage => {
                let full = frame.full_rect();
                let mut img = frame.crop(full);
                img.outline(bbox, [255, 255, 255]);
                (full, img)
            }
        };
        Self {
            bbox,
            crop_rect,
            crop,
            context,
            origin,
            quadrant: None,
            area_px,
            mask,
        }
    }

    /// Frame pixels belonging to the surface.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let b = self.bbox;
        (b.v_min..b.v_max).flat_map(move |v| {
            (b.u_min..b.u_max).filter_map(move |u| {
                self.mask
                    .get((u - b.u_min) as usize, (v - b.v_min) as usize)
                    .then_some((u, v))
            })
        })
    }
}

/// Components of the refined mask with at least `min_area` pixels, largest
/// first (ties by top-left corner), at most `max_candidates` of them.
pub fn extract_candidates(
    mask: &FlatnessMask,
    frame: &SensorFrame,
    min_area: u64,
    max_candidates: usize,
    context: ContextLevel,
) -> Result<Vec<CandidateSurface>, SurfaceError> {
    if !mask.refined.same_shape(&frame.raster) {
        return Err(SurfaceError::ShapeMismatch {
            mask_w: mask.refined.width(),
            mask_h: mask.refined.height(),
            frame_w: frame.raster.width(),
            frame_h: frame.raster.height(),
        });
    }
    let mut comps: Vec<Component> = label_components(&mask.refined)
        .into_iter()
        .filter(|c| c.area_px >= min_area)
        .collect();
    comps.sort_by(|a, b| {
        b.area_px
            .cmp(&a.area_px)
            .then((a.bbox.u_min, a.bbox.v_min).cmp(&(b.bbox.u_min, b.bbox.v_min)))
    });
    comps.truncate(max_candidates.min(MAX_CANDIDATES));
    Ok(comps
        .into_iter()
        .map(|c| {
            CandidateSurface::new(
                frame,
                c.bbox,
                c.area_px,
                c.mask,
                context,
                CandidateOrigin::Detected,
            )
        })
        .collect())
}

/// The four quadrants, ordered NW, NE, SW, SE. Odd sizes give the extra
/// column to the western pair and the extra row to the northern pair.
pub fn quadrant_rects(width: u32, height: u32) -> [(Quadrant, PixelRect); 4] {
    let left = width - width / 2;
    let top = height - height / 2;
    [
        (Quadrant::Nw, PixelRect::new(0, 0, left, top)),
        (Quadrant::Ne, PixelRect::new(left, 0, width, top)),
        (Quadrant::Sw, PixelRect::new(0, top, left, height)),
        (Quadrant::Se, PixelRect::new(left, top, width, height)),
    ]
}

pub fn quadrant_fallback(frame: &SensorFrame, context: ContextLevel) -> Vec<CandidateSurface> {
    quadrant_rects(frame.intrinsics.width, frame.intrinsics.height)
        .into_iter()
        .map(|(q, rect)| {
            let mask = Grid::filled(rect.width() as usize, rect.height() as usize, true);
            let mut c = CandidateSurface::new(
                frame,
                rect,
                rect.area(),
                mask,
                context,
                CandidateOrigin::QuadrantFallback,
            );
            c.quadrant = Some(q);
            c
        })
        .collect()
}

/// Window of `width x height` pixels centred on the principal point.
pub fn closeup(frame: &SensorFrame, width: u32, height: u32) -> CandidateSurface {
    let k = &frame.intrinsics;
    let (w, h) = (width.clamp(1, k.width), height.clamp(1, k.height));
    let cu = (k.cx.round() as u32).min(k.width - 1);
    let cv = (k.cy.round() as u32).min(k.height - 1);
    let u0 = cu.saturating_sub(w / 2).min(k.width - w);
    let v0 = cv.saturating_sub(h / 2).min(k.height - h);
    let rect = PixelRect::new(u0, v0, u0 + w, v0 + h);
    let mask = Grid::filled(w as usize, h as usize, true);
    CandidateSurface::new(
        frame,
        rect,
        rect.area(),
        mask,
        ContextLevel::Cropped,
        CandidateOrigin::Closeup,
    )
}

/// Detection parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Metres per pixel at `reference_range_m`.
    pub grad_threshold: f64,
    pub reference_range_m: f64,
    /// Minimum component size as a fraction of the image area.
    pub min_area_fraction: f64,
    pub context: ContextLevel,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            grad_threshold: 0.05,
            reference_range_m: 50.0,
            min_area_fraction: 0.01,
            context: ContextLevel::Cropped,
        }
    }
}

impl DetectorConfig {
    pub fn min_area_px(&self, width: u32, height: u32) -> u64 {
        ((f64::from(width) * f64::from(height) * self.min_area_fraction).ceil() as u64).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub mask: FlatnessMask,
    pub threshold: f64,
    pub candidates: Vec<CandidateSurface>,
    /// True when `candidates` are the four quadrants.
    pub fallback: bool,
}

/// Mask, candidates and, if nothing qualifies, the quadrant fallback.
pub fn detect(frame: &SensorFrame, cfg: &DetectorConfig) -> Result<Detection, SurfaceError> {
    let threshold =
        range_scaled_threshold(cfg.grad_threshold, frame.rangefinder, cfg.reference_range_m);
    let mask = flatness_mask(&frame.depth, threshold)?;
    let min_area = cfg.min_area_px(frame.intrinsics.width, frame.intrinsics.height);
    let mut candidates = extract_candidates(&mask, frame, min_area, MAX_CANDIDATES, cfg.context)?;
    let fallback = candidates.is_empty();
    if fallback {
        candidates = quadrant_fallback(frame, cfg.context);
    }
    Ok(Detection {
        mask,
        threshold,
        candidates,
        fallback,
    })
}
