use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::domain::{StrainField, StrainSequence};
use crate::error::{Error, Result};

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to every
/// pixel of every axial and lateral frame.
///
/// Frame `k` draws from ChaCha8 stream `k` of the generator seeded with
/// `seed`, axial values first, so the result does not depend on thread count.
pub fn add_noise(seq: &StrainSequence, sigma: f64, seed: u64) -> Result<StrainSequence> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(seq.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let (axial, lateral): (Vec<_>, Vec<_>) = seq
        .axial()
        .par_iter()
        .zip(seq.lateral())
        .enumerate()
        .map(|(k, (ax, lat))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut perturb = |f: &StrainField| {
                let values = f.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
                StrainField::new(f.rows(), f.cols(), f.pixel_spacing_mm(), f.timestamp_s(), values)
            };
            Ok((perturb(ax)?, perturb(lat)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    StrainSequence::new(axial, lateral)
}
