//! Polar <-> Cartesian resampling.
//!
//! Cartesian rasters are `N x N` top-down images centred on the radar: row 0
//! is furthest ahead (+x), column 0 furthest left (+y). The centre of pixel
//! `(row, col)` sits at `x = (N/2 - row - 0.5) m`, `y = (N/2 - col - 0.5) m`,
//! scaled by `metres_per_pixel`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensors::PolarGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianGeometry {
    pub size: usize,
    pub metres_per_pixel: f64,
}

impl CartesianGeometry {
    pub fn new(size: usize, metres_per_pixel: f64) -> Result<Self> {
        if size == 0 || !(metres_per_pixel > 0.0) {
            return Err(Error::invalid("Cartesian geometry fields must be positive"));
        }
        Ok(CartesianGeometry {
            size,
            metres_per_pixel,
        })
    }

    /// Raster that exactly covers the polar grid's range disc.
    pub fn covering(polar: &PolarGeometry, size: usize) -> Result<Self> {
        Self::new(size, 2.0 * polar.max_range() / size as f64)
    }

    pub fn pixel_centre(&self, row: usize, col: usize) -> (f64, f64) {
        let half = self.size as f64 / 2.0;
        (
            (half - row as f64 - 0.5) * self.metres_per_pixel,
            (half - col as f64 - 0.5) * self.metres_per_pixel,
        )
    }

    /// Continuous `(row, col)` pixel coordinates of a position, with pixel
    /// centres at half-integers.
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let half = self.size as f64 / 2.0;
        (half - x / self.metres_per_pixel, half - y / self.metres_per_pixel)
    }

    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (r, c) = self.to_pixel(x, y);
        let n = self.size as f64;
        (r >= 0.0 && c >= 0.0 && r < n && c < n).then_some((r as usize, c as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Nearest,
    Bilinear,
}

/// Cell values the resamplers can carry.
pub trait Resample: Copy + Default + Send + Sync {
    /// Categorical values only support nearest sampling.
    const CATEGORICAL: bool;
    fn blend(values: [Self; 4], weights: [f64; 4]) -> Self;
}

impl Resample for u8 {
    const CATEGORICAL: bool = true;
    fn blend(values: [Self; 4], _: [f64; 4]) -> Self {
        values[0]
    }
}

impl Resample for f32 {
    const CATEGORICAL: bool = false;
    fn blend(values: [Self; 4], w: [f64; 4]) -> Self {
        (0..4).map(|i| values[i] as f64 * w[i]).sum::<f64>() as f32
    }
}

fn check_mode<T: Resample>(mode: Sampling) -> Result<()> {
    if T::CATEGORICAL && mode == Sampling::Bilinear {
        return Err(Error::invalid("categorical grids only support nearest sampling"));
    }
    Ok(())
}

/// Value of a polar grid at a radar-frame position; default beyond range.
pub fn sample_polar<T: Resample>(
    grid: &Array2<T>,
    geom: &PolarGeometry,
    x: f64,
    y: f64,
    mode: Sampling,
) -> T {
    match mode {
        Sampling::Nearest => geom.bin_of(x, y).map(|c| grid[c]).unwrap_or_default(),
        Sampling::Bilinear => {
            let range = x.hypot(y);
            if !(range < geom.max_range()) {
                return T::default();
            }
            let (na, nr) = (geom.azimuths, geom.range_bins);
            let az = y.atan2(x).rem_euclid(std::f64::consts::TAU);
            let fa = az / geom.azimuth_step() - 0.5;
            let fr = (range / geom.range_resolution - 0.5).clamp(0.0, (nr - 1) as f64);
            let a0f = fa.floor();
            let ta = fa - a0f;
            let a0 = (a0f as i64).rem_euclid(na as i64) as usize;
            let a1 = (a0 + 1) % na;
            let r0 = fr.floor() as usize;
            let r1 = (r0 + 1).min(nr - 1);
            let tr = fr - r0 as f64;
            T::blend(
                [grid[[a0, r0]], grid[[a0, r1]], grid[[a1, r0]], grid[[a1, r1]]],
                [
                    (1.0 - ta) * (1.0 - tr),
                    (1.0 - ta) * tr,
                    ta * (1.0 - tr),
                    ta * tr,
                ],
            )
        }
    }
}

fn sample_cartesian<T: Resample>(
    grid: &Array2<T>,
    cart: &CartesianGeometry,
    x: f64,
    y: f64,
    mode: Sampling,
) -> T {
    match mode {
        Sampling::Nearest => cart.pixel_of(x, y).map(|p| grid[p]).unwrap_or_default(),
        Sampling::Bilinear => {
            let n = cart.size;
            let (r, c) = cart.to_pixel(x, y);
            if !(r >= 0.0 && c >= 0.0 && r < n as f64 && c < n as f64) {
                return T::default();
            }
            let fr = (r - 0.5).clamp(0.0, (n - 1) as f64);
            let fc = (c - 0.5).clamp(0.0, (n - 1) as f64);
            let (r0, c0) = (fr.floor() as usize, fc.floor() as usize);
            let (r1, c1) = ((r0 + 1).min(n - 1), (c0 + 1).min(n - 1));
            let (tr, tc) = (fr - r0 as f64, fc - c0 as f64);
            T::blend(
                [grid[[r0, c0]], grid[[r0, c1]], grid[[r1, c0]], grid[[r1, c1]]],
                [
                    (1.0 - tr) * (1.0 - tc),
                    (1.0 - tr) * tc,
                    tr * (1.0 - tc),
                    tr * tc,
                ],
            )
        }
    }
}

/// Resamples an `A x R` polar grid onto an `N x N` Cartesian raster.
/// Pixels whose centre lies beyond the last range bin are zero.
pub fn polar_to_cartesian<T: Resample>(
    grid: &Array2<T>,
    polar: &PolarGeometry,
    cart: &CartesianGeometry,
    mode: Sampling,
) -> Result<Array2<T>> {
    check_mode::<T>(mode)?;
    if grid.dim() != (polar.azimuths, polar.range_bins) {
        return Err(Error::invalid("grid shape does not match its polar geometry"));
    }
    Ok(Array2::from_shape_fn((cart.size, cart.size), |(row, col)| {
        let (x, y) = cart.pixel_centre(row, col);
        sample_polar(grid, polar, x, y, mode)
    }))
}

/// Resamples an `N x N` Cartesian raster back onto polar bin centres.
pub fn cartesian_to_polar<T: Resample>(
    grid: &Array2<T>,
    cart: &CartesianGeometry,
    polar: &PolarGeometry,
    mode: Sampling,
) -> Result<Array2<T>> {
    check_mode::<T>(mode)?;
    if grid.dim() != (cart.size, cart.size) {
        return Err(Error::invalid("grid shape does not match its Cartesian geometry"));
    }
    Ok(Array2::from_shape_fn(
        (polar.azimuths, polar.range_bins),
        |(a, r)| {
            let (bearing, range) = polar.bin_centre(a, r);
            sample_cartesian(grid, cart, range * bearing.cos(), range * bearing.sin(), mode)
        },
    ))
}
