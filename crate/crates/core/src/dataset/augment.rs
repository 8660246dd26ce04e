//! Random horizontal and vertical flips.
//!
//! A row flip mirrors Cartesian grids front to back (`x -> -x`), a column
//! flip mirrors them left to right (`y -> -y`). Polar grids are permuted in
//! azimuth to match, so every grid of an item keeps describing the same
//! mirrored scene.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::geometry::Timestamp;
use crate::grid::RadarStack;
use crate::projection::item_seed;

use super::index::IndexRecord;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flips {
    pub rows: bool,
    pub cols: bool,
}

impl Flips {
    /// Each axis flipped independently with probability one half.
    pub fn draw(seed: u64, t: Timestamp) -> Flips {
        let mut rng = ChaCha8Rng::seed_from_u64(item_seed(seed, t));
        Flips {
            rows: rng.random_bool(0.5),
            cols: rng.random_bool(0.5),
        }
    }
}

pub fn flip_cartesian<T: Clone>(grid: &Array2<T>, flips: Flips) -> Array2<T> {
    let mut view = grid.view();
    if flips.rows {
        view.invert_axis(Axis(0));
    }
    if flips.cols {
        view.invert_axis(Axis(1));
    }
    view.to_owned()
}

/// Azimuth permutation of a polar grid matching [`flip_cartesian`]. Needs
/// an even azimuth count when rows are flipped.
pub fn flip_polar<T: Clone>(grid: &Array2<T>, flips: Flips) -> Result<Array2<T>> {
    let a = grid.nrows();
    if flips.rows && !a.is_multiple_of(2) {
        return Err(Error::invalid("front-back flip of a polar grid needs an even azimuth count"));
    }
    // Bin k spans [k, k+1) steps; y -> -y maps it to A-1-k, x -> -x to A/2-1-k.
    let source = |k: usize| -> usize {
        let mut k = k as i64;
        let n = a as i64;
        if flips.cols {
            k = n - 1 - k;
        }
        if flips.rows {
            k = (n / 2 - 1 - k).rem_euclid(n);
        }
        k as usize
    };
    Ok(Array2::from_shape_fn(grid.dim(), |(k, r)| grid[[source(k), r]].clone()))
}

pub fn flip_stack(stack: &RadarStack, flips: Flips) -> RadarStack {
    RadarStack {
        channels: stack.channels.clone().map(|c| flip_cartesian(&c, flips)),
        geometry: stack.geometry,
        times: stack.times,
    }
}

/// Writes a flipped copy of every item under `out` and returns the new
/// records, each tagged with the flips applied.
pub fn augment_dataset(src: &Path, records: &[IndexRecord], out: &Path, seed: u64) -> Result<Vec<IndexRecord>> {
    use rayon::prelude::*;
    records
        .par_iter()
        .map(|rec| {
            let flips = Flips::draw(seed, Timestamp(rec.time));
            let stack = formats::read_stack(&src.join(&rec.stack))?;
            formats::write_stack(&out.join(&rec.stack), &flip_stack(&stack, flips))?;
            let label = formats::read_label_png(&src.join(&rec.label))?;
            formats::write_label_png(&out.join(&rec.label), &flip_cartesian(&label, flips))?;
            for rel in std::iter::once(&rec.label_polar).chain(&rec.truth) {
                let grid = formats::read_label_png(&src.join(rel))?;
                formats::write_label_png(&out.join(rel), &flip_polar(&grid, flips)?)?;
            }
            Ok(IndexRecord {
                flips: Some(flips),
                ..rec.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{polar_to_cartesian, CartesianGeometry, Sampling};
    use crate::sensors::PolarGeometry;
    use proptest::prelude::*;

    const ALL: [Flips; 4] = [
        Flips { rows: false, cols: false },
        Flips { rows: true, cols: false },
        Flips { rows: false, cols: true },
        Flips { rows: true, cols: true },
    ];

    #[test]
    fn double_flip_is_identity() {
        let g = Array2::from_shape_fn((6, 5), |(r, c)| (r * 5 + c) as u8);
        for f in ALL {
            assert_eq!(flip_cartesian(&flip_cartesian(&g, f), f), g);
            assert_eq!(flip_polar(&flip_polar(&g, f).unwrap(), f).unwrap(), g);
        }
    }

    #[test]
    fn draws_are_reproducible_and_balanced() {
        let draws: Vec<Flips> = (0..4000).map(|t| Flips::draw(11, Timestamp(t))).collect();
        let again: Vec<Flips> = (0..4000).map(|t| Flips::draw(11, Timestamp(t))).collect();
        assert_eq!(draws, again);
        for f in ALL {
            let n = draws.iter().filter(|d| **d == f).count();
            assert!((850..1150).contains(&n), "{f:?}: {n}");
        }
    }

    #[test]
    fn point_target_moves_to_mirrored_position() {
        // A target at (x, y) = (30, 12) must appear at (-30, 12), (30, -12) or (-30, -12).
        let polar = PolarGeometry::new(400, 200, 0.25).unwrap();
        let cart = CartesianGeometry::covering(&polar, 400).unwrap();
        let mut power = Array2::<f32>::zeros((400, 200));
        let (a, r) = polar.bin_of(30.0, 12.0).unwrap();
        power[[a, r]] = 1.0;
        let mut labels = Array2::<u8>::zeros((400, 200));
        labels[[a, r]] = 4;
        for f in ALL {
            let expect = (if f.rows { -30.0 } else { 30.0 }, if f.cols { -12.0 } else { 12.0 });
            let lp = flip_polar(&labels, f).unwrap();
            assert_eq!(Some(lp.indexed_iter().find(|(_, v)| **v == 4).unwrap().0), polar.bin_of(expect.0, expect.1));
            let img = flip_cartesian(&polar_to_cartesian(&power, &polar, &cart, Sampling::Nearest).unwrap(), f);
            let lit: Vec<(usize, usize)> = img.indexed_iter().filter(|(_, v)| **v > 0.0).map(|(i, _)| i).collect();
            assert!(!lit.is_empty());
            let (row, col) = cart.pixel_of(expect.0, expect.1).unwrap();
            for (pr, pc) in lit {
                assert!(pr.abs_diff(row) <= 1 && pc.abs_diff(col) <= 1, "{f:?}");
            }
        }
    }

    #[test]
    fn odd_azimuth_count_cannot_flip_rows() {
        let g = Array2::<u8>::zeros((5, 3));
        assert!(flip_polar(&g, ALL[1]).is_err());
        assert!(flip_polar(&g, ALL[2]).is_ok());
    }

    proptest! {
        #[test]
        fn polar_flip_commutes_with_cartesian_view(seed in any::<u64>(), rows in any::<bool>(), cols in any::<bool>()) {
            let f = Flips { rows, cols };
            let polar = PolarGeometry::new(64, 24, 1.0).unwrap();
            let cart = CartesianGeometry::covering(&polar, 48).unwrap();
            let g = Array2::from_shape_fn((64, 24), |(a, r)| ((seed >> ((a * 7 + r) % 60)) & 7) as u8);
            let lhs = polar_to_cartesian(&flip_polar(&g, f).unwrap(), &polar, &cart, Sampling::Nearest).unwrap();
            let rhs = flip_cartesian(&polar_to_cartesian(&g, &polar, &cart, Sampling::Nearest).unwrap(), f);
            // Pixel centres exactly on an azimuth edge may round either way.
            for ((row, col), v) in lhs.indexed_iter() {
                let (x, y) = cart.pixel_centre(row, col);
                let k = y.atan2(x) / polar.azimuth_step();
                if (k - k.round()).abs() > 1e-9 {
                    prop_assert_eq!(*v, rhs[[row, col]], "pixel {:?}", (row, col));
                }
            }
        }
    }
}
