//! Coordinate mathematics for the movement planner.
//!
//! Covers the pinhole projection of body-frame (Forward-Right-Down) points
//! into the downward camera, the sparse pixel-to-point lookup table built
//! from the range sensor, the yaw-only FRD to NED rotation, and the 2-D
//! Halton sampler used to spread launch sites over a map.
//!
//! The projection keeps the body-x axis on the image `u` axis and body-y on
//! `v`, with no sign flip. The simulator's camera follows the same
//! convention, so back-projection is the exact inverse.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (z_frd = {0})")]
    BehindCamera(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("pixel-to-point table is empty")]
    EmptyTable,
    #[error("degenerate sampling bounds")]
    DegenerateBounds,
    #[error("point count must be positive")]
    ZeroCount,
}

/// Ideal pinhole intrinsics in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        focal_px: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let intrinsics = Self {
            focal_px,
            cx,
            cy,
            width,
            height,
        };
        intrinsics.validate()?;
        Ok(intrinsics)
    }

    /// Square image with the principal point at the central pixel.
    pub fn centered(focal_px: f64, size: u32) -> Result<Self, GeometryError> {
        let c = f64::from(size / 2);
        Self::new(focal_px, c, c, size, size)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.focal_px.is_finite() && self.focal_px > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal length must be positive, got {}",
                self.focal_px
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics(
                "image has zero size".into(),
            ));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "c_x = {} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "c_y = {} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && u < i64::from(self.width) && v < i64::from(self.height)
    }

    /// Ground footprint side length (along `u`) seen at the given range.
    pub fn footprint_m(&self, range_m: f64) -> f64 {
        f64::from(self.width) * range_m / self.focal_px
    }

    /// Inverse of [`project`] for a pixel at a known depth.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> PointFrd {
        PointFrd {
            x: (u - self.cx) * depth / self.focal_px,
            y: (v - self.cy) * depth / self.focal_px,
            z: depth,
        }
    }
}

/// A point in the body Forward-Right-Down frame, metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFrd {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PointFrd {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Pinhole projection of a body-frame point into continuous pixel coordinates.
pub fn project(
    point: &PointFrd,
    intrinsics: &CameraIntrinsics,
) -> Result<(f64, f64), GeometryError> {
    if !(point.z > 0.0) {
        return Err(GeometryError::BehindCamera(point.z));
    }
    let u = point.x * intrinsics.focal_px / point.z + intrinsics.cx;
    let v = point.y * intrinsics.focal_px / point.z + intrinsics.cy;
    Ok((u, v))
}

/// Round-half-up, the single pixel rounding rule used throughout.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Sparse mapping from image pixels to the range-sensor point seen there.
///
/// Rebuilt from scratch for every frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PixelToPointTable {
    entries: BTreeMap<(u32, u32), PointFrd>,
}

impl PixelToPointTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, u: u32, v: u32) -> Option<&PointFrd> {
        self.entries.get(&(u, v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &PointFrd)> {
        self.entries.iter()
    }
}

/// Projects every point and stores it at its rounded pixel. Out-of-image
/// points are dropped; on a pixel collision the nearer point (smaller z) wins.
pub fn build_table(
    cloud: &[PointFrd],
    intrinsics: &CameraIntrinsics,
) -> Result<PixelToPointTable, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyTable);
    }
    let mut entries: BTreeMap<(u32, u32), PointFrd> = BTreeMap::new();
    for p in cloud {
        let Ok((u, v)) = project(p, intrinsics) else {
            continue;
        };
        let (ui, vi) = (round_half_up(u), round_half_up(v));
        if !intrinsics.contains(ui, vi) {
            continue;
        }
        let key = (ui as u32, vi as u32);
        match entries.get(&key) {
            Some(existing) if existing.z <= p.z => {}
            _ => {
                entries.insert(key, *p);
            }
        }
    }
    if entries.is_empty() {
        return Err(GeometryError::EmptyTable);
    }
    Ok(PixelToPointTable { entries })
}

/// Point stored at `pixel`, else the one at the nearest stored pixel
/// (Euclidean pixel distance, ties to smaller `u` then smaller `v`).
///
/// Returns `None` only for an empty table.
pub fn lookup(table: &PixelToPointTable, pixel: (u32, u32)) -> Option<PointFrd> {
    if let Some(p) = table.entries.get(&pixel) {
        return Some(*p);
    }
    let (qu, qv) = (i64::from(pixel.0), i64::from(pixel.1));
    // BTreeMap iterates in (u, v) order, so keeping the first strict minimum
    // implements the tie-break.
    let mut best: Option<(i64, PointFrd)> = None;
    for (&(u, v), p) in &table.entries {
        let du = i64::from(u) - qu;
        let dv = i64::from(v) - qv;
        let d2 = du * du + dv * dv;
        if best.as_ref().is_none_or(|(bd, _)| d2 < *bd) {
            best = Some((d2, *p));
        }
    }
    best.map(|(_, p)| p)
}

/// Yaw-only rotation of the planar FRD components into NED. The vertical
/// component is dropped.
pub fn frd_to_ned(point: &PointFrd, yaw: f64) -> (f64, f64) {
    let (s, c) = yaw.sin_cos();
    (c * point.x - s * point.y, s * point.x + c * point.y)
}

/// Inverse rotation of [`frd_to_ned`]: NED planar offset to body x/y.
pub fn ned_to_frd_planar(north: f64, east: f64, yaw: f64) -> (f64, f64) {
    let (s, c) = yaw.sin_cos();
    (c * north + s * east, -s * north + c * east)
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_yaw(yaw: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = yaw % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Van der Corput radical inverse of `index` in `base`, computed as an exact
/// integer ratio before the single final division.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    assert!(base >= 2, "radical inverse base must be at least 2");
    let mut numerator: u64 = 0;
    let mut denominator: u64 = 1;
    while index > 0 {
        numerator = numerator * base + index % base;
        denominator *= base;
        index /= base;
    }
    numerator as f64 / denominator as f64
}

/// Planar sampling rectangle in NED metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarBounds {
    pub north_min: f64,
    pub north_max: f64,
    pub east_min: f64,
    pub east_max: f64,
}

impl PlanarBounds {
    pub fn new(north_min: f64, north_max: f64, east_min: f64, east_max: f64) -> Self {
        Self {
            north_min,
            north_max,
            east_min,
            east_max,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.north_max > self.north_min && self.east_max > self.east_min)
            || !(self.north_min.is_finite()
                && self.north_max.is_finite()
                && self.east_min.is_finite()
                && self.east_max.is_finite())
    }
}

/// First `count` points of the 2-D Halton sequence (base 2 north, base 3
/// east), starting at sequence index `skip + 1`, scaled into `bounds`.
pub fn halton_points(
    count: usize,
    bounds: &PlanarBounds,
    skip: u64,
) -> Result<Vec<(f64, f64)>, GeometryError> {
    if count == 0 {
        return Err(GeometryError::ZeroCount);
    }
    if bounds.is_degenerate() {
        return Err(GeometryError::DegenerateBounds);
    }
    let dn = bounds.north_max - bounds.north_min;
    let de = bounds.east_max - bounds.east_min;
    Ok((0..count as u64)
        .map(|i| {
            let index = i + skip + 1;
            (
                bounds.north_min + radical_inverse(index, 2) * dn,
                bounds.east_min + radical_inverse(index, 3) * de,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 64.0, 64.0, 128, 128).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project(&PointFrd::new(0.0, 0.0, 10.0), &cam()).unwrap(),
            (64.0, 64.0)
        );
        let (u, v) = project(&PointFrd::new(1.0, 2.0, 10.0), &cam()).unwrap();
        assert!(close(u, 74.0) && close(v, 84.0));
        let (u, v) = project(&PointFrd::new(-1.0, 0.0, 10.0), &cam()).unwrap();
        assert!(close(u, 54.0) && close(v, 64.0));
    }

    #[test]
    fn projection_rejects_points_behind_camera() {
        assert!(matches!(
            project(&PointFrd::new(1.0, 1.0, 0.0), &cam()),
            Err(GeometryError::BehindCamera(_))
        ));
        assert!(project(&PointFrd::new(1.0, 1.0, -3.0), &cam()).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(10.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(10.0, 3.0, 3.0, 4, 4).is_ok());
    }

    #[test]
    fn table_single_axis_point() {
        let t = build_table(&[PointFrd::new(0.0, 0.0, 10.0)], &cam()).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.get(64, 64).is_some());
    }

    #[test]
    fn table_collision_keeps_nearer_point() {
        // (1, 0, 10) and (1.2, 0, 12) both project to u = 74, v = 64.
        let far = PointFrd::new(1.2, 0.0, 12.0);
        let near = PointFrd::new(1.0, 0.0, 10.0);
        for cloud in [[far, near], [near, far]] {
            let t = build_table(&cloud, &cam()).unwrap();
            assert_eq!(t.len(), 1);
            assert_eq!(t.get(74, 64).unwrap().z, 10.0);
        }
    }

    #[test]
    fn table_drops_out_of_bounds_points() {
        let cloud = [
            PointFrd::new(0.0, 0.0, 10.0),
            PointFrd::new(100.0, 0.0, 10.0),
        ];
        let t = build_table(&cloud, &cam()).unwrap();
        assert_eq!(t.len(), 1);
        assert!(matches!(
            build_table(&[], &cam()),
            Err(GeometryError::EmptyTable)
        ));
        assert!(matches!(
            build_table(&[PointFrd::new(100.0, 0.0, 10.0)], &cam()),
            Err(GeometryError::EmptyTable)
        ));
    }

    #[test]
    fn lookup_exact_and_nearest() {
        let p = PointFrd::new(0.0, 0.0, 10.0);
        let t = build_table(&[p], &cam()).unwrap();
        assert_eq!(lookup(&t, (64, 64)), Some(p));
        assert_eq!(lookup(&t, (65, 64)), Some(p));
        assert_eq!(lookup(&t, (0, 0)), Some(p));
    }

    #[test]
    fn lookup_tie_prefers_smaller_u() {
        // Stored at u = 54 and u = 74 on row 64; query 64 is 10 px from both.
        let left = PointFrd::new(-1.0, 0.0, 10.0);
        let right = PointFrd::new(1.0, 0.0, 10.0);
        let t = build_table(&[right, left], &cam()).unwrap();
        assert_eq!(lookup(&t, (64, 64)), Some(left));
        // Vertical tie: (64, 54) and (64, 74), query (64, 64) -> smaller v.
        let up = PointFrd::new(0.0, -1.0, 10.0);
        let down = PointFrd::new(0.0, 1.0, 10.0);
        let t = build_table(&[down, up], &cam()).unwrap();
        assert_eq!(lookup(&t, (64, 64)), Some(up));
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(frd_to_ned(&PointFrd::new(1.0, 2.0, 5.0), 0.0), (1.0, 2.0));
        let (n, e) = frd_to_ned(&PointFrd::new(1.0, 0.0, 5.0), PI / 2.0);
        assert!(n.abs() < 1e-12 && close(e, 1.0));
        let (n, e) = frd_to_ned(&PointFrd::new(1.0, 2.0, 5.0), PI);
        assert!(close(n, -1.0) && close(e, -2.0));
    }

    #[test]
    fn radical_inverse_first_terms() {
        let b2: Vec<f64> = (1..=3).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(b2, vec![0.5, 0.25, 0.75]);
        let b3: Vec<f64> = (1..=3).map(|i| radical_inverse(i, 3)).collect();
        assert_eq!(b3, vec![1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0]);
    }

    #[test]
    fn halton_scaling() {
        let pts = halton_points(3, &PlanarBounds::new(0.0, 100.0, 0.0, 100.0), 0).unwrap();
        assert!(close(pts[0].0, 50.0) && close(pts[0].1, 100.0 / 3.0));
        assert!(close(pts[1].0, 25.0) && close(pts[1].1, 200.0 / 3.0));
        let skipped = halton_points(1, &PlanarBounds::new(0.0, 100.0, 0.0, 100.0), 1).unwrap();
        assert_eq!(skipped[0], pts[1]);
    }

    #[test]
    fn halton_rejects_degenerate_input() {
        let flat = PlanarBounds::new(0.0, 0.0, 0.0, 10.0);
        assert_eq!(
            halton_points(4, &flat, 0),
            Err(GeometryError::DegenerateBounds)
        );
        let ok = PlanarBounds::new(0.0, 1.0, 0.0, 1.0);
        assert_eq!(halton_points(0, &ok, 0), Err(GeometryError::ZeroCount));
    }

    #[test]
    fn yaw_normalization_range() {
        assert!(close(normalize_yaw(PI), PI));
        assert!(close(normalize_yaw(-PI), PI));
        assert!(close(normalize_yaw(3.0 * PI / 2.0), -PI / 2.0));
        assert!(close(normalize_yaw(0.25), 0.25));
    }

    proptest! {
        #[test]
        fn rotation_preserves_planar_norm(x in -1e3f64..1e3, y in -1e3f64..1e3, yaw in -10.0f64..10.0) {
            let (n, e) = frd_to_ned(&PointFrd::new(x, y, 1.0), yaw);
            let before = x.hypot(y);
            let after = n.hypot(e);
            prop_assert!((before - after).abs() <= 1e-9 * before.max(1e-12));
        }

        #[test]
        fn zero_yaw_is_identity(x in -1e3f64..1e3, y in -1e3f64..1e3) {
            prop_assert_eq!(frd_to_ned(&PointFrd::new(x, y, 2.0), 0.0), (x, y));
        }

        #[test]
        fn ned_frd_roundtrip(x in -1e3f64..1e3, y in -1e3f64..1e3, yaw in -4.0f64..4.0) {
            let (n, e) = frd_to_ned(&PointFrd::new(x, y, 1.0), yaw);
            let (bx, by) = ned_to_frd_planar(n, e, yaw);
            prop_assert!((bx - x).abs() < 1e-9 && (by - y).abs() < 1e-9);
        }

        #[test]
        fn halton_points_lie_strictly_inside(count in 1usize..200, skip in 0u64..1000,
                                             n0 in -500.0f64..500.0, e0 in -500.0f64..500.0,
                                             dn in 0.5f64..400.0, de in 0.5f64..400.0) {
            let b = PlanarBounds::new(n0, n0 + dn, e0, e0 + de);
            let pts = halton_points(count, &b, skip).unwrap();
            prop_assert_eq!(pts.len(), count);
            for (n, e) in pts {
                prop_assert!(n > b.north_min && n < b.north_max);
                prop_assert!(e > b.east_min && e < b.east_max);
            }
        }
    }
}
