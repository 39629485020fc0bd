//! 8-bit binary PGM (P5) previews, min-max scaled per map. The scaling goes to
//! a sidecar `<name>.scale` file as `min=<v> max=<v>`.

use std::fs;
use std::path::Path;

use crate::domain::ScalarMap;
use crate::error::{Error, Result};

pub fn write_pgm(map: &ScalarMap, path: &Path) -> Result<()> {
    let valid: Vec<f64> = map.values().iter().copied().filter(|v| !v.is_nan()).collect();
    let lo = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let mut bytes = format!("P5\n{} {}\n255\n", map.cols(), map.rows()).into_bytes();
    bytes.extend(map.values().iter().map(|&v| {
        if v.is_nan() {
            0
        } else if range > 0.0 {
            (1.0 + 254.0 * (v - lo) / range).round() as u8
        } else {
            128
        }
    }));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = path.with_extension("scale");
    let line = if valid.is_empty() {
        "min=nan max=nan\n".to_string()
    } else {
        format!("min={lo} max={hi}\n")
    };
    fs::write(&sidecar, line).map_err(|e| Error::io(&sidecar, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MapKind;

    #[test]
    fn header_and_scaling() {
        let mask = vec![true, true, false, true];
        let map = ScalarMap::from_mask(MapKind::PressureKpa, 2, 2, 0.1, mask, |r, c| (r * 2 + c) as f64).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.pgm");
        write_pgm(&map, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[1, 86, 0, 255]);
        assert_eq!(fs::read_to_string(dir.path().join("p.scale")).unwrap(), "min=0 max=3\n");
    }
}
