use rayon::prelude::*;

use crate::domain::{ScalarMap, MISSING};
use crate::error::Result;

/// Median over the valid pixels of the `(2h + 1) x (2h + 1)` neighborhood.
/// `h = 0` returns the map unchanged.
pub fn denoise_map(map: &ScalarMap, half_width: usize) -> Result<ScalarMap> {
    if half_width == 0 {
        return Ok(map.clone());
    }
    let (rows, cols) = (map.rows(), map.cols());
    let h = half_width as isize;
    let values: Vec<f64> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            if !map.is_valid(r, c) {
                return MISSING;
            }
            let mut window = Vec::with_capacity((2 * half_width + 1).pow(2));
            for dr in -h..=h {
                for dc in -h..=h {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                        continue;
                    }
                    let (rr, cc) = (rr as usize, cc as usize);
                    if map.is_valid(rr, cc) {
                        window.push(map.get(rr, cc));
                    }
                }
            }
            window.sort_by(f64::total_cmp);
            let n = window.len();
            if n % 2 == 1 {
                window[n / 2]
            } else {
                0.5 * (window[n / 2 - 1] + window[n / 2])
            }
        })
        .collect();
    ScalarMap::new(map.kind(), rows, cols, map.pixel_spacing_mm(), values, map.mask().to_vec())
}
