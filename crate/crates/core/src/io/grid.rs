//! Grid CSV: a header line `# rows=<r> cols=<c> spacing_mm=<s> t_s=<t>`
//! followed by `r` lines of `c` comma-separated values. Missing pixels are
//! written as `nan`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::domain::{MapKind, ScalarMap, StrainField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    pub t_s: f64,
}

/// Ten significant digits; `nan` for missing values.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.9e}")
    }
}

fn render(header: GridHeader, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 17 + 64);
    let _ = writeln!(
        out,
        "# rows={} cols={} spacing_mm={} t_s={}",
        header.rows, header.cols, header.spacing_mm, header.t_s
    );
    for row in values.chunks(header.cols) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_grid_csv(field: &StrainField, path: &Path) -> Result<()> {
    let header = GridHeader {
        rows: field.rows(),
        cols: field.cols(),
        spacing_mm: field.pixel_spacing_mm(),
        t_s: field.timestamp_s(),
    };
    write_file(path, &render(header, field.values()))
}

/// Writes a map in the grid format; `t_s` is the acquisition time the map refers to.
pub fn write_map_csv(map: &ScalarMap, t_s: f64, path: &Path) -> Result<()> {
    let header = GridHeader {
        rows: map.rows(),
        cols: map.cols(),
        spacing_mm: map.pixel_spacing_mm(),
        t_s,
    };
    write_file(path, &render(header, map.values()))
}

fn parse_header(line: &str, path: &Path) -> Result<GridHeader> {
    let err = |msg: String| Error::format(path, 1, msg);
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| err("missing '# rows=.. cols=.. spacing_mm=.. t_s=..' header".into()))?;
    let mut rows = None;
    let mut cols = None;
    let mut spacing = None;
    let mut t = None;
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header token '{tok}'")))?;
        let bad = || err(format!("bad value '{v}' for '{k}'"));
        match k {
            "rows" => rows = Some(v.parse::<usize>().map_err(|_| bad())?),
            "cols" => cols = Some(v.parse::<usize>().map_err(|_| bad())?),
            "spacing_mm" => spacing = Some(v.parse::<f64>().map_err(|_| bad())?),
            "t_s" => t = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(err(format!("unknown header key '{k}'"))),
        }
    }
    match (rows, cols, spacing, t) {
        (Some(rows), Some(cols), Some(spacing_mm), Some(t_s)) => Ok(GridHeader {
            rows,
            cols,
            spacing_mm,
            t_s,
        }),
        _ => Err(err("header must define rows, cols, spacing_mm and t_s".into())),
    }
}

fn parse_value(tok: &str) -> Option<f64> {
    let tok = tok.trim();
    if tok.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses grid CSV text. `path` only labels error messages.
pub fn parse_grid_csv(text: &str, path: &Path) -> Result<(GridHeader, Vec<f64>)> {
    let mut lines = text.lines();
    let header = parse_header(lines.next().unwrap_or(""), path)?;
    let mut values = Vec::with_capacity(header.rows * header.cols);
    let mut n_rows = 0;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        if n_rows == header.rows {
            return Err(Error::format(path, line_no, format!("more than {} data rows", header.rows)));
        }
        let before = values.len();
        for tok in line.split(',') {
            let v = parse_value(tok)
                .ok_or_else(|| Error::format(path, line_no, format!("unparseable value '{}'", tok.trim())))?;
            values.push(v);
        }
        let got = values.len() - before;
        if got != header.cols {
            return Err(Error::format(
                path,
                line_no,
                format!("expected {} values, found {got}", header.cols),
            ));
        }
        n_rows += 1;
    }
    if n_rows != header.rows {
        return Err(Error::format(
            path,
            n_rows + 2,
            format!("expected {} data rows, found {n_rows}", header.rows),
        ));
    }
    Ok((header, values))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_grid_csv(path: &Path) -> Result<StrainField> {
    let (h, values) = parse_grid_csv(&read_text(path)?, path)?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::format(path, 0, "strain grids may not contain missing values"));
    }
    StrainField::new(h.rows, h.cols, h.spacing_mm, h.t_s, values).map_err(|e| Error::format(path, 1, e.to_string()))
}

/// Reads a map written by [`write_map_csv`]; the mask is wherever a value is present.
pub fn read_map_csv(path: &Path, kind: MapKind) -> Result<(ScalarMap, f64)> {
    let (h, values) = parse_grid_csv(&read_text(path)?, path)?;
    let mask = values.iter().map(|v| !v.is_nan()).collect();
    let map = ScalarMap::new(kind, h.rows, h.cols, h.spacing_mm, values, mask)?;
    Ok((map, h.t_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(field: &StrainField) -> StrainField {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_grid_csv(field, &path).unwrap();
        read_grid_csv(&path).unwrap()
    }

    #[test]
    fn single_pixel_grid() {
        let f = StrainField::new(1, 1, 0.3125, 10.0, vec![-1.234e-3]).unwrap();
        let g = roundtrip(&f);
        assert_eq!((g.rows(), g.cols(), g.timestamp_s()), (1, 1, 10.0));
        assert!((g.get(0, 0) / f.get(0, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn header_grammar() {
        let f = StrainField::new(2, 3, 0.1, 0.5, vec![0.0, 1.0, -2.0, 3.5, 4.0, 5.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_grid_csv(&f, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "# rows=2 cols=3 spacing_mm=0.1 t_s=0.5");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn truncated_file_names_line() {
        let text = "# rows=3 cols=2 spacing_mm=0.1 t_s=0\n1,2\n3,4\n";
        match parse_grid_csv(text, Path::new("x.csv")) {
            Err(Error::Format { line, msg, .. }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("expected 3 data rows"));
            }
            other => panic!("{other:?}"),
        }
        let short_row = "# rows=2 cols=2 spacing_mm=0.1 t_s=0\n1,2\n3\n";
        assert!(matches!(parse_grid_csv(short_row, Path::new("x")), Err(Error::Format { line: 3, .. })));
    }

    #[test]
    fn bad_tokens_and_headers() {
        let bad = "# rows=1 cols=2 spacing_mm=0.1 t_s=0\n1,abc\n";
        assert!(matches!(parse_grid_csv(bad, Path::new("x")), Err(Error::Format { line: 2, .. })));
        assert!(matches!(parse_grid_csv("1,2\n", Path::new("x")), Err(Error::Format { line: 1, .. })));
        assert!(matches!(
            parse_grid_csv("# rows=1 cols=1\n1\n", Path::new("x")),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(parse_grid_csv("", Path::new("x")).is_err());
    }

    #[test]
    fn map_sentinel_roundtrip() {
        let mask = vec![true, false, true, true];
        let map = ScalarMap::from_mask(MapKind::PressureKpa, 2, 2, 0.1, mask.clone(), |r, c| (r + c) as f64 + 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_map_csv(&map, 10.0, &path).unwrap();
        assert!(fs::read_to_string(&path).unwrap().contains("nan"));
        let (back, t) = read_map_csv(&path, MapKind::PressureKpa).unwrap();
        assert_eq!(t, 10.0);
        assert_eq!(back.mask(), &mask[..]);
        assert_eq!(back.get(1, 1), 2.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn roundtrip_within_1e9(rows in 1usize..6, cols in 1usize..6, seed in proptest::collection::vec(-1.0f64..1.0, 36), exp in -8i32..3) {
            let values: Vec<f64> = seed[..rows * cols].iter().map(|v| v * 10f64.powi(exp)).collect();
            let f = StrainField::new(rows, cols, 0.3125, 1.7, values).unwrap();
            let g = roundtrip(&f);
            prop_assert_eq!((g.rows(), g.cols()), (rows, cols));
            for (a, b) in f.values().iter().zip(g.values()) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs());
            }
        }
    }
}
