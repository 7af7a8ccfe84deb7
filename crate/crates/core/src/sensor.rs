//! Downward-looking camera, range sensor and rangefinder over a [`SceneModel`].
//!
//! Rays are cast through the height field with a 2-D DDA walk. A cell is hit
//! on a side wall when the ray enters it below its surface, otherwise on its
//! top when the ray drops below the surface before leaving. Agents raise the
//! surface of the cells they occupy.

use std::collections::BTreeSet;
use std::io::Cursor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{frd_to_ned, normalize_yaw, CameraIntrinsics, PointFrd};
use crate::grid::{Grid, PixelRect};
use crate::scene::{
    step_agents, AgentKind, CellIndex, Occupancy, SceneError, SceneModel, SurfaceClass,
};

/// Vehicle pose in NED with altitude = -down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub north: f64,
    pub east: f64,
    pub down: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(north: f64, east: f64, altitude: f64, yaw: f64) -> Self {
        Self {
            north,
            east,
            down: -altitude,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn altitude(&self) -> f64 {
        -self.down
    }

    pub fn with_altitude(self, altitude: f64) -> Self {
        Self {
            down: -altitude,
            ..self
        }
    }

    pub fn planar_distance(&self, other: &Pose) -> f64 {
        (self.north - other.north).hypot(self.east - other.east)
    }
}

/// Multiplicative depth error `D' = D * (1 + e)`, where `e` is a smooth
/// zero-mean Gaussian field: independent samples on a lattice of spacing
/// `correlation_px`, bilinearly interpolated. Monocular depth networks err in
/// smooth, low-frequency patches rather than per-pixel speckle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthNoiseConfig {
    pub sigma: f64,
    pub correlation_px: u32,
    pub seed: u64,
}

impl DepthNoiseConfig {
    pub const DEFAULT_SIGMA: f64 = 0.02;
    pub const DEFAULT_CORRELATION_PX: u32 = 64;

    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            correlation_px: Self::DEFAULT_CORRELATION_PX,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            correlation_px: Self::DEFAULT_CORRELATION_PX,
            seed,
        }
    }
}

/// Camera plus range sensor mounted looking straight down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    pub intrinsics: CameraIntrinsics,
    pub noise: DepthNoiseConfig,
    /// Range-sensor sampling stride in pixels along both image axes.
    pub point_stride: u32,
}

impl SensorRig {
    pub const DEFAULT_POINT_STRIDE: u32 = 8;

    pub fn new(intrinsics: CameraIntrinsics, noise: DepthNoiseConfig) -> Self {
        Self {
            intrinsics,
            noise,
            point_stride: Self::DEFAULT_POINT_STRIDE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Top,
    Wall,
}

/// What the ray through one pixel hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterPixel {
    pub class: SurfaceClass,
    pub agent: Option<AgentKind>,
    /// `None` when the ray left the grid and hit the datum plane.
    pub cell: Option<CellIndex>,
    pub face: Face,
}

impl RasterPixel {
    pub fn occupied(&self) -> bool {
        self.agent.is_some()
    }
}

/// One observation.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorFrame {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    pub tick: u64,
    /// Depth along the optical axis as the pipeline sees it (noisy).
    pub depth: Grid<f64>,
    /// Noise-free depth, kept for ground truth.
    pub true_depth: Grid<f64>,
    pub raster: Grid<RasterPixel>,
    pub point_cloud: Vec<PointFrd>,
    /// Noise-free range straight down along the optical axis.
    pub rangefinder: f64,
}

impl SensorFrame {
    /// World position `(north, east, altitude)` of the surface seen at a pixel.
    pub fn world_point(&self, u: u32, v: u32) -> (f64, f64, f64) {
        let depth = *self.true_depth.get(u as usize, v as usize);
        let p = self
            .intrinsics
            .back_project(f64::from(u), f64::from(v), depth);
        let (dn, de) = frd_to_ned(&p, self.pose.yaw);
        (
            self.pose.north + dn,
            self.pose.east + de,
            self.pose.altitude() - depth,
        )
    }

    pub fn color(&self, u: u32, v: u32) -> [u8; 3] {
        let px = self.raster.get(u as usize, v as usize);
        let base = match px.agent {
            Some(AgentKind::Vehicle) => [200, 30, 30],
            Some(AgentKind::Pedestrian) => [235, 200, 40],
            None => class_color(px.class),
        };
        match px.face {
            Face::Top => base,
            Face::Wall => base.map(|c| (u16::from(c) * 3 / 5) as u8),
        }
    }

    /// RGB rendering of a window of the frame.
    pub fn crop(&self, rect: PixelRect) -> RgbImage {
        let mut pixels = Vec::with_capacity(rect.area() as usize);
        for v in rect.v_min..rect.v_max {
            for u in rect.u_min..rect.u_max {
                pixels.push(self.color(u, v));
            }
        }
        RgbImage {
            width: rect.width(),
            height: rect.height(),
            pixels,
        }
    }

    pub fn full_rect(&self) -> PixelRect {
        PixelRect::new(0, 0, self.intrinsics.width, self.intrinsics.height)
    }

    /// Tight box around the top-face pixels showing any of `cells`.
    pub fn footprint_bbox(&self, cells: &BTreeSet<CellIndex>) -> Option<PixelRect> {
        let mut bbox: Option<PixelRect> = None;
        for v in 0..self.raster.height() {
            for u in 0..self.raster.width() {
                let px = self.raster.get(u, v);
                let hit = px.face == Face::Top && px.cell.is_some_and(|c| cells.contains(&c));
                if !hit {
                    continue;
                }
                let (u, v) = (u as u32, v as u32);
                bbox = Some(match bbox {
                    None => PixelRect::new(u, v, u + 1, v + 1),
                    Some(b) => PixelRect::new(
                        b.u_min.min(u),
                        b.v_min.min(v),
                        b.u_max.max(u + 1),
                        b.v_max.max(v + 1),
                    ),
                });
            }
        }
        bbox
    }
}

pub fn class_color(class: SurfaceClass) -> [u8; 3] {
    match class {
        SurfaceClass::Rooftop => [150, 150, 158],
        SurfaceClass::RooftopObstacle => [72, 72, 84],
        SurfaceClass::Road => [52, 52, 58],
        SurfaceClass::Sidewalk => [192, 186, 170],
        SurfaceClass::Pier => [140, 108, 78],
        SurfaceClass::Water => [40, 90, 165],
        SurfaceClass::Ground => [122, 160, 92],
        SurfaceClass::Vegetation => [38, 110, 44],
        SurfaceClass::WallEdge => [112, 100, 96],
    }
}

/// Small owned RGB raster used for judge attachments and debug output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    fn to_buffer(&self) -> image::RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width, self.height, raw)
            .expect("pixel count matches dimensions")
    }

    /// Draws a one-pixel rectangle outline.
    pub fn outline(&mut self, rect: PixelRect, color: [u8; 3]) {
        if rect.is_empty() {
            return;
        }
        let (u1, v1) = (rect.u_max - 1, rect.v_max - 1);
        for v in rect.v_min..rect.v_max {
            for u in rect.u_min..rect.u_max {
                let edge = u == rect.u_min || u == u1 || v == rect.v_min || v == v1;
                if edge && u < self.width && v < self.height {
                    self.pixels[(v * self.width + u) as usize] = color;
                }
            }
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.to_buffer()
            .write_to(&mut out, image::ImageFormat::Png)
            .expect("in-memory PNG encoding");
        out.into_inner()
    }

    /// Binary PPM (P6), an uncompressed format any viewer opens.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().flatten());
        out
    }

    pub fn sha256_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        for p in &self.pixels {
            h.update(p);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

struct Hit {
    depth: f64,
    pixel: RasterPixel,
}

fn cast_ray(scene: &SceneModel, occ: &Occupancy, pose: &Pose, dn: f64, de: f64) -> Hit {
    let cs = scene.cell_size;
    let alt = pose.altitude();
    let mut row = (pose.north / cs).floor() as i64;
    let mut col = (pose.east / cs).floor() as i64;
    let axis = |origin: f64, d: f64, idx: i64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, ((idx + 1) as f64 * cs - origin) / d, cs / d)
        } else if d < 0.0 {
            (-1, (idx as f64 * cs - origin) / d, -cs / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_r, mut t_max_r, dt_r) = axis(pose.north, dn, row);
    let (step_c, mut t_max_c, dt_c) = axis(pose.east, de, col);
    let mut t_in = 0.0_f64;
    loop {
        if !scene.in_grid(row, col) {
            return Hit {
                depth: alt.max(t_in),
                pixel: RasterPixel {
                    class: SurfaceClass::Ground,
                    agent: None,
                    cell: None,
                    face: Face::Top,
                },
            };
        }
        let idx = CellIndex::new(row as u32, col as u32);
        let agent = occ.at(idx);
        let surface = scene.surface_height(idx, occ);
        let t_out = t_max_r.min(t_max_c);
        let hit = |depth: f64, face: Face| Hit {
            depth,
            pixel: RasterPixel {
                class: scene.cell(idx).class,
                agent,
                cell: Some(idx),
                face,
            },
        };
        if alt - t_in <= surface {
            return hit(t_in, Face::Wall);
        }
        if alt - t_out <= surface {
            return hit(alt - surface, Face::Top);
        }
        if t_max_r < t_max_c {
            row += step_r;
            t_in = t_max_r;
            t_max_r += dt_r;
        } else {
            col += step_c;
            t_in = t_max_c;
            t_max_c += dt_c;
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-pixel multiplicative noise field for one tick.
fn noise_field(noise: &DepthNoiseConfig, width: usize, height: usize, tick: u64) -> Grid<f64> {
    let spacing = noise.correlation_px.max(1) as usize;
    let nu = width.div_ceil(spacing) + 1;
    let nv = height.div_ceil(spacing) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(noise.seed ^ tick));
    let lattice: Vec<f64> = (0..nu * nv)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let at = |i: usize, j: usize| lattice[j * nu + i];
    Grid::from_fn(width, height, |u, v| {
        let (i, j) = (u / spacing, v / spacing);
        let fu = (u % spacing) as f64 / spacing as f64;
        let fv = (v % spacing) as f64 / spacing as f64;
        let top = at(i, j) * (1.0 - fu) + at(i + 1, j) * fu;
        let bottom = at(i, j + 1) * (1.0 - fu) + at(i + 1, j + 1) * fu;
        noise.sigma * (top * (1.0 - fv) + bottom * fv)
    })
}

/// Renders one observation at `tick`.
pub fn render_frame(
    scene: &SceneModel,
    pose: &Pose,
    rig: &SensorRig,
    tick: u64,
) -> Result<SensorFrame, SceneError> {
    rig.intrinsics
        .validate()
        .map_err(|e| SceneError::Invalid(e.to_string()))?;
    if !scene.contains_point(pose.north, pose.east) {
        return Err(SceneError::OutOfBounds {
            north: pose.north,
            east: pose.east,
        });
    }
    let occ = step_agents(scene, tick);
    let surface = scene.surface_height_at(pose.north, pose.east, &occ)?;
    if pose.altitude() <= surface {
        return Err(SceneError::Collision {
            altitude: pose.altitude(),
            surface,
        });
    }

    let k = &rig.intrinsics;
    let (w, h) = (k.width as usize, k.height as usize);
    let mut true_depth = Vec::with_capacity(w * h);
    let mut raster = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let ray = PointFrd::new(
                (u as f64 - k.cx) / k.focal_px,
                (v as f64 - k.cy) / k.focal_px,
                1.0,
            );
            let (dn, de) = frd_to_ned(&ray, pose.yaw);
            let hit = cast_ray(scene, &occ, pose, dn, de);
            true_depth.push(hit.depth);
            raster.push(hit.pixel);
        }
    }
    let true_depth = Grid::from_vec(w, h, true_depth);
    let depth = if rig.noise.sigma > 0.0 {
        let field = noise_field(&rig.noise, w, h, tick);
        Grid::from_fn(w, h, |u, v| {
            true_depth.get(u, v) * (1.0 + field.get(u, v)).max(0.05)
        })
    } else {
        true_depth.clone()
    };

    let stride = rig.point_stride.max(1) as usize;
    let mut point_cloud = Vec::new();
    for v in (0..h).step_by(stride) {
        for u in (0..w).step_by(stride) {
            point_cloud.push(k.back_project(u as f64, v as f64, *depth.get(u, v)));
        }
    }

    let ray = PointFrd::new(0.0, 0.0, 1.0);
    let rangefinder = cast_ray(scene, &occ, pose, ray.x, ray.y).depth;

    Ok(SensorFrame {
        intrinsics: *k,
        pose: *pose,
        tick,
        depth,
        true_depth,
        raster: Grid::from_vec(w, h, raster),
        point_cloud,
        rangefinder,
    })
}
