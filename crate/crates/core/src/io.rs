//! CSV dataset interchange and 8-bit PGM images.
//!
//! Dataset CSV: a header, then one row per instance with either feature
//! columns `z0..z{d-1}` or an `img_path` column, a `hard_label` column and
//! optionally soft-label columns `p0..p{K-1}`. Relative image paths resolve
//! against the CSV file's directory.

use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use crate::data::{ClassDistribution, Dataset, FeatureVector, ImageGrid, Inputs};
use crate::error::{Error, Result};

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn indexed_columns(headers: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>> {
    let mut cols = Vec::new();
    for k in 0.. {
        match headers.iter().position(|h| h == format!("{prefix}{k}")) {
            Some(c) => cols.push(c),
            None => break,
        }
    }
    let stray = headers
        .iter()
        .filter(|h| {
            h.strip_prefix(prefix)
                .is_some_and(|r| r.parse::<usize>().is_ok())
        })
        .count();
    if stray != cols.len() {
        return Err(parse_err(
            1,
            format!("{prefix}* columns must be numbered contiguously from 0"),
        ));
    }
    Ok(cols)
}

fn field(rec: &csv::StringRecord, col: usize, line: u64) -> Result<&str> {
    rec.get(col).ok_or_else(|| parse_err(line, "missing field"))
}

fn number(rec: &csv::StringRecord, col: usize, line: u64, name: &str) -> Result<f64> {
    let s = field(rec, col, line)?.trim();
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("{name}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name}: {s:?} is not finite")));
    }
    Ok(v)
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

/// Reads a dataset CSV. `K` is the number of `p*` columns when present,
/// otherwise `max(2, largest label + 1)`.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "hard_label")
        .ok_or_else(|| parse_err(1, "missing hard_label column"))?;
    let z_cols = indexed_columns(&headers, "z")?;
    let p_cols = indexed_columns(&headers, "p")?;
    let img_col = headers.iter().position(|h| h == "img_path");
    if z_cols.is_empty() == img_col.is_none() {
        return Err(parse_err(
            1,
            "need exactly one of z0.. feature columns or img_path",
        ));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut feats = Vec::new();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut soft = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let y_text = field(&rec, label_col, line)?.trim();
        let y: usize = y_text
            .parse()
            .map_err(|_| parse_err(line, format!("hard_label: {y_text:?} is not a class index")))?;
        labels.push(y);
        match img_col {
            Some(c) => {
                let rel = PathBuf::from(field(&rec, c, line)?);
                let full = if rel.is_absolute() {
                    rel
                } else {
                    base.join(rel)
                };
                images.push(read_pgm(&full)?);
            }
            None => {
                let v = z_cols
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| number(&rec, c, line, &format!("z{k}")))
                    .collect::<Result<Vec<_>>>()?;
                feats.push(FeatureVector::new(v).map_err(|e| parse_err(line, e.to_string()))?);
            }
        }
        if !p_cols.is_empty() {
            let p = p_cols
                .iter()
                .enumerate()
                .map(|(k, &c)| number(&rec, c, line, &format!("p{k}")))
                .collect::<Result<Vec<_>>>()?;
            soft.push(ClassDistribution::new(p).map_err(|e| parse_err(line, e.to_string()))?);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = if p_cols.is_empty() {
        labels.iter().copied().max().unwrap_or(0).max(1) + 1
    } else {
        p_cols.len()
    };
    let inputs = if img_col.is_some() {
        Inputs::Images(images)
    } else {
        Inputs::Features(feats)
    };
    Dataset::new(inputs, labels, (!soft.is_empty()).then_some(soft), k)
}

/// Writes a dataset CSV. Images are written as `img_{i:05}.pgm` next to the
/// CSV and referenced by relative path.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                line: 0,
                message: format!("{other:?}"),
            },
        })?;
    let k = data.num_classes();
    let mut header: Vec<String> = match data.inputs() {
        Inputs::Features(f) => (0..f.first().map_or(0, |v| v.dim()))
            .map(|j| format!("z{j}"))
            .collect(),
        Inputs::Images(_) => vec!["img_path".into()],
    };
    header.push("hard_label".into());
    if data.soft_labels().is_some() {
        header.extend((0..k).map(|j| format!("p{j}")));
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = match data.inputs() {
            Inputs::Features(f) => f[i].values().iter().map(|v| v.to_string()).collect(),
            Inputs::Images(imgs) => {
                let name = format!("img_{i:05}.pgm");
                write_pgm(&imgs[i], &dir.join(&name))?;
                vec![name]
            }
        };
        row.push(data.hard_labels()[i].to_string());
        if let Some(s) = data.soft_labels() {
            row.extend(s[i].probs().iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads an 8-bit grayscale PGM; intensities become `byte / 255`.
pub fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm)?.into_luma8();
    let (w, h) = img.dimensions();
    ImageGrid::new(
        h as usize,
        w as usize,
        img.into_raw()
            .into_iter()
            .map(|b| b as f64 / 255.0)
            .collect(),
    )
}

/// Writes a binary (P5) PGM, rounding intensities to the nearest byte.
pub fn write_pgm(image: &ImageGrid, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = image
        .intensities()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            &bytes,
            image.width() as u32,
            image.height() as u32,
            ExtendedColorType::L8,
        )?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a `score,label` CSV (extra columns ignored).
pub fn read_scores_csv(path: &Path) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(1, format!("missing {name} column")))
    };
    let (sc, lc) = (find("score")?, find("label")?);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let s = number(&rec, sc, line, "score")?;
        if !(0.0..=1.0).contains(&s) {
            return Err(parse_err(line, format!("score {s} outside [0, 1]")));
        }
        let l = field(&rec, lc, line)?.trim();
        let y = match l {
            "0" => 0,
            "1" => 1,
            _ => return Err(parse_err(line, format!("label {l:?} must be 0 or 1"))),
        };
        scores.push(s);
        labels.push(y);
    }
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((scores, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let feats = vec![
            FeatureVector::new(vec![0.1, -2.5]).unwrap(),
            FeatureVector::new(vec![1e-300, 3.0]).unwrap(),
        ];
        let soft = vec![
            ClassDistribution::new(vec![0.3, 0.7]).unwrap(),
            ClassDistribution::new(vec![1.0, 0.0]).unwrap(),
        ];
        let d = Dataset::from_features(feats, vec![1, 0], 2)
            .unwrap()
            .with_soft_labels(soft)
            .unwrap();
        write_dataset_csv(&d, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("z0,z1,hard_label,p0,p1\n"));
        assert_eq!(read_dataset_csv(&p).unwrap(), d);
    }

    #[test]
    fn image_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("imgs.csv");
        let px: Vec<f64> = (0..12).map(|i| i as f64 * 20.0 / 255.0).collect();
        let img = ImageGrid::new(3, 4, px).unwrap();
        let d = Dataset::new(Inputs::Images(vec![img.clone()]), vec![1], None, 2).unwrap();
        write_dataset_csv(&d, &p).unwrap();
        let back = read_dataset_csv(&p).unwrap();
        let got = &back.images().unwrap()[0];
        assert_eq!(got.height(), 3);
        for (a, b) in got.intensities().iter().zip(img.intensities()) {
            assert!((a - b).abs() < 1e-12);
        }
        let raw = std::fs::read(dir.path().join("img_00000.pgm")).unwrap();
        assert!(raw.starts_with(b"P5"));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "z0,hard_label\n0.5,1\nabc,0\n").unwrap();
        match read_dataset_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "score,label\n0.2,0\n0.9,1\n0.4,x\n").unwrap();
        match read_scores_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "z0,z2,hard_label\n0.5,1,1\n").unwrap();
        assert!(read_dataset_csv(&p).is_err());
    }

    #[test]
    fn scores_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "id,score,label\na,0.25,0\nb,1,1\n").unwrap();
        assert_eq!(read_scores_csv(&p).unwrap(), (vec![0.25, 1.0], vec![0, 1]));
    }
}
