//! CSV tables and PGM rasters. Writers return bytes so that callers can
//! compare artifacts directly.

use std::path::Path;

use crate::correspondence::Word;
use crate::dimension::LambdaRow;
use crate::error::{Error, Result};
use crate::measures::{Atom, AtomicMeasure, RepellingPoint, ShrinkReport, WordFixedPoint};
use crate::sphere::P1Point;

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `(re, im, at_infinity)`; infinity is written as `0, 0, true`.
fn point_fields(p: &P1Point) -> [String; 3] {
    match p.affine() {
        Some(z) => [z.re.to_string(), z.im.to_string(), "false".into()],
        None => ["0".into(), "0".into(), "true".into()],
    }
}

pub fn points_csv(points: &[P1Point]) -> Result<Vec<u8>> {
    table(
        &["re", "im", "at_infinity"],
        points.iter().map(|p| point_fields(p).to_vec()),
    )
}

pub fn measure_csv(m: &AtomicMeasure) -> Result<Vec<u8>> {
    table(
        &["re", "im", "at_infinity", "weight"],
        m.atoms().iter().map(|a| {
            let mut r = point_fields(&a.point).to_vec();
            r.push(a.weight.to_string());
            r
        }),
    )
}

/// Affine coordinates, `inf` at infinity.
fn affine_fields(p: &P1Point) -> [String; 2] {
    match p.affine() {
        Some(z) => [z.re.to_string(), z.im.to_string()],
        None => ["inf".into(), "inf".into()],
    }
}

pub fn repelling_csv(points: &[RepellingPoint]) -> Result<Vec<u8>> {
    table(
        &["re", "im", "word_indices", "multiplier", "weight"],
        points.iter().map(|r| {
            let [re, im] = affine_fields(&r.point);
            vec![
                re,
                im,
                r.word.label(),
                r.multiplier.to_string(),
                r.weight.to_string(),
            ]
        }),
    )
}

pub fn fixed_points_csv(points: &[WordFixedPoint]) -> Result<Vec<u8>> {
    table(
        &[
            "re",
            "im",
            "at_infinity",
            "word_indices",
            "multiplicity",
            "multiplier",
            "weight",
        ],
        points.iter().map(|f| {
            let mut r = point_fields(&f.point).to_vec();
            r.extend([
                f.word.label(),
                f.multiplicity.to_string(),
                f.multiplier.to_string(),
                f.weight.to_string(),
            ]);
            r
        }),
    )
}

pub fn words_csv(words: &[Word]) -> Result<Vec<u8>> {
    table(
        &["indices", "weight"],
        words.iter().map(|w| vec![w.label(), w.weight.to_string()]),
    )
}

pub fn lambda_csv(rows: &[LambdaRow]) -> Result<Vec<u8>> {
    table(
        &["k", "R_k", "lambda_k"],
        rows.iter()
            .map(|r| vec![r.k.to_string(), r.r.to_string(), r.lambda.to_string()]),
    )
}

pub fn shrink_csv(r: &ShrinkReport) -> Result<Vec<u8>> {
    table(
        &["level", "median_diam", "quantile_diam"],
        r.per_level
            .iter()
            .zip(&r.per_level_quantile)
            .enumerate()
            .map(|(i, (m, q))| vec![i.to_string(), m.to_string(), q.to_string()]),
    )
}

/// Reads a measure CSV with header `re,im,at_infinity,weight`.
pub fn parse_measure_csv(text: &str) -> Result<AtomicMeasure> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["re", "im", "at_infinity", "weight"] {
        return Err(Error::config(
            "input",
            "expected header re,im,at_infinity,weight",
        ));
    }
    let mut atoms = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::config("input", format!("row {}: bad {what}", i + 1));
        let num = |k: usize, what: &str| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(what))
        };
        let at_inf = match rec.get(2).map(str::trim) {
            Some("true") => true,
            Some("false") => false,
            _ => return Err(bad("at_infinity")),
        };
        let weight = num(3, "weight")?;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(bad("weight"));
        }
        let point = if at_inf {
            P1Point::INFINITY
        } else {
            let (re, im) = (num(0, "re")?, num(1, "im")?);
            if !(re.is_finite() && im.is_finite()) {
                return Err(bad("coordinates"));
            }
            P1Point::from_re_im(re, im)
        };
        atoms.push(Atom { point, weight });
    }
    Ok(AtomicMeasure::new(atoms))
}

/// Mass per pixel over the affine window `[re_min, re_max, im_min, im_max]`;
/// row 0 is the top (largest imaginary part).
pub fn density_grid(m: &AtomicMeasure, window: [f64; 4], width: usize, height: usize) -> Vec<f64> {
    let [x0, x1, y0, y1] = window;
    let mut grid = vec![0.0; width * height];
    for a in m.atoms() {
        let Some(z) = a.point.affine() else { continue };
        let fx = (z.re - x0) / (x1 - x0);
        let fy = (y1 - z.im) / (y1 - y0);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            continue;
        }
        let (col, row) = ((fx * width as f64) as usize, (fy * height as f64) as usize);
        grid[row * width + col] += a.weight;
    }
    grid
}

/// Binary 8-bit PGM of the log-scaled density. Empty pixels are 0; occupied
/// pixels map `log(1 + c/c_min)` onto `1..=255`.
pub fn render_pgm(m: &AtomicMeasure, window: [f64; 4], width: usize, height: usize) -> Vec<u8> {
    let grid = density_grid(m, window, width, height);
    let c_min = grid
        .iter()
        .copied()
        .filter(|c| *c > 0.0)
        .fold(f64::INFINITY, f64::min);
    let c_max = grid.iter().copied().fold(0.0, f64::max);
    let denom = (1.0 + c_max / c_min).ln();
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(grid.iter().map(|&c| {
        if c <= 0.0 {
            0u8
        } else if denom <= 0.0 || !denom.is_finite() {
            255
        } else {
            1 + (254.0 * (1.0 + c / c_min).ln() / denom).round() as u8
        }
    }));
    out
}

/// Splits a PGM produced by [`render_pgm`] into `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let bad = || Error::InvalidArgument("not a P5 8-bit PGM".into());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?);
    }
    pos += 1;
    let dim = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let (w, h) = (dim(fields[1])?, dim(fields[2])?);
    if fields[0] != "P5"
        || fields[3] != "255"
        || bytes.len() < pos
        || bytes.len() - pos != w.checked_mul(h).ok_or_else(bad)?
    {
        return Err(bad());
    }
    Ok((w, h, &bytes[pos..]))
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::write(dir.join(name), bytes)?;
    Ok(())
}
