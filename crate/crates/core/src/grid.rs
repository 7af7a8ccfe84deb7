//! Row-major 2-D rasters and half-open pixel rectangles shared by the
//! sensor, surface detection and metrics code.

use serde::{Deserialize, Serialize};

/// Dense row-major raster indexed by `(u, v)` where `u` is the column and
/// `v` the row.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps `data` laid out row by row. Panics when the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> &T {
        &self.data[v * self.width + u]
    }

    #[inline]
    pub fn get_mut(&mut self, u: usize, v: usize) -> &mut T {
        &mut self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[v * self.width + u] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

/// Axis-aligned pixel rectangle with half-open extents `[u_min, u_max) x [v_min, v_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelRect {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl PixelRect {
    pub const fn new(u_min: u32, v_min: u32, u_max: u32, v_max: u32) -> Self {
        Self {
            u_min,
            v_min,
            u_max,
            v_max,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.u_min <= self.u_max && self.v_min <= self.v_max
    }

    pub fn width(&self) -> u32 {
        self.u_max.saturating_sub(self.u_min)
    }

    pub fn height(&self) -> u32 {
        self.v_max.saturating_sub(self.v_min)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.u_min && u < self.u_max && v >= self.v_min && v < self.v_max
    }

    /// Pixel nearest the geometric centre, rounding half up on both axes.
    pub fn center_pixel(&self) -> (u32, u32) {
        // Pixel centres run from min to max - 1, so the midpoint is (min + max - 1) / 2;
        // rounding that half up gives floor((min + max) / 2).
        let cu = (u64::from(self.u_min) + u64::from(self.u_max.max(self.u_min + 1))) / 2;
        let cv = (u64::from(self.v_min) + u64::from(self.v_max.max(self.v_min + 1))) / 2;
        (cu as u32, cv as u32)
    }

    /// Intersection, or `None` when the rectangles do not overlap.
    pub fn intersect(&self, other: &PixelRect) -> Option<PixelRect> {
        let r = PixelRect {
            u_min: self.u_min.max(other.u_min),
            v_min: self.v_min.max(other.v_min),
            u_max: self.u_max.min(other.u_max),
            v_max: self.v_max.min(other.v_max),
        };
        (r.u_min < r.u_max && r.v_min < r.v_max).then_some(r)
    }

    /// Grows the rectangle by `percent` of its width/height on every side,
    /// clamped to a `width x height` image.
    pub fn padded(&self, percent: u32, width: u32, height: u32) -> PixelRect {
        let pad_u = (u64::from(self.width()) * u64::from(percent) + 50) / 100;
        let pad_v = (u64::from(self.height()) * u64::from(percent) + 50) / 100;
        let pad_u = pad_u.min(u64::from(u32::MAX)) as u32;
        let pad_v = pad_v.min(u64::from(u32::MAX)) as u32;
        PixelRect {
            u_min: self.u_min.saturating_sub(pad_u),
            v_min: self.v_min.saturating_sub(pad_v),
            u_max: self.u_max.saturating_add(pad_u).min(width),
            v_max: self.v_max.saturating_add(pad_v).min(height),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_pixel_rounds_half_up() {
        assert_eq!(PixelRect::new(0, 0, 128, 128).center_pixel(), (64, 64));
        assert_eq!(PixelRect::new(0, 0, 3, 3).center_pixel(), (1, 1));
        assert_eq!(PixelRect::new(10, 4, 11, 5).center_pixel(), (10, 4));
        assert_eq!(PixelRect::new(2, 2, 6, 5).center_pixel(), (4, 3));
    }

    #[test]
    fn padding_clamps_to_image() {
        let r = PixelRect::new(0, 0, 10, 10);
        assert_eq!(r.padded(40, 64, 64), PixelRect::new(0, 0, 14, 14));
        let r = PixelRect::new(20, 20, 30, 40);
        assert_eq!(r.padded(20, 64, 64), PixelRect::new(18, 16, 32, 44));
    }

    #[test]
    fn intersection_of_disjoint_is_none() {
        let a = PixelRect::new(0, 0, 2, 2);
        let b = PixelRect::new(2, 0, 4, 2);
        assert!(a.intersect(&b).is_none());
        assert_eq!(
            a.intersect(&PixelRect::new(1, 1, 5, 5)),
            Some(PixelRect::new(1, 1, 2, 2))
        );
    }
}
