//! ASCII PGM (P2, maxval 65535) images and `x0,x1,y` point CSV files.

use std::fmt::Write as _;
use std::path::Path;

use super::{one_hot, DatasetKind, Pair, PairedDataset};
use crate::error::{Error, Result};
use crate::fmt_num as fmt_value;
use crate::metrics::Image;

pub const PGM_MAXVAL: u32 = 65535;

/// Pixels are `round(clamp(v, 0, 1) * 65535)`, one image row per line.
pub fn render_pgm(img: &Image) -> String {
    let mut out = format!("P2\n{} {}\n{}\n", img.width(), img.height(), PGM_MAXVAL);
    for row in img.data().chunks(img.width().max(1)) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v.clamp(0.0, 1.0) * PGM_MAXVAL as f64).round() as u32).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_pgm(text: &str, origin: &Path) -> Result<Image> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let err = |msg: String| Error::format(origin, msg);
    match tokens.next() {
        Some("P2") => {}
        Some(magic) => {
            return Err(err(format!(
                "unsupported PGM magic `{magic}`, only ASCII P2 is read"
            )))
        }
        None => return Err(err("empty file".into())),
    }
    let mut header = |what: &str| -> Result<u64> {
        let tok = tokens
            .next()
            .ok_or_else(|| err(format!("missing {what}")))?;
        tok.parse().map_err(|_| err(format!("bad {what} `{tok}`")))
    };
    let width = header("width")? as usize;
    let height = header("height")? as usize;
    let maxval = header("maxval")?;
    if maxval != PGM_MAXVAL as u64 {
        return Err(err(format!("maxval must be {PGM_MAXVAL}, got {maxval}")));
    }
    let mut data = Vec::with_capacity(width * height);
    for tok in tokens {
        let v: u64 = tok.parse().map_err(|_| err(format!("bad pixel `{tok}`")))?;
        if v > maxval {
            return Err(err(format!("pixel {v} exceeds maxval")));
        }
        data.push(v as f64 / maxval as f64);
    }
    if data.len() != width * height {
        return Err(err(format!(
            "expected {} pixels, found {}",
            width * height,
            data.len()
        )));
    }
    Image::new(width, height, data)
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(text).map_err(|_| Error::format(path, "not an ASCII PGM file"))?;
    parse_pgm(&text, path)
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, render_pgm(img)).map_err(|e| Error::io(path, e))
}

/// Header `x0,x1,y`; coordinates in 9-significant-digit scientific notation,
/// `y` the class index of the one-hot condition.
pub fn render_csv_points(dataset: &PairedDataset) -> Result<String> {
    let mut out = String::from("x0,x1,y\n");
    for (i, p) in dataset.pairs.iter().enumerate() {
        let [x0, x1] = p.target[..] else {
            return Err(Error::InvalidArgument(format!(
                "pair {i} is not a 2-D point"
            )));
        };
        let label = p
            .cond
            .iter()
            .position(|v| *v == 1.0)
            .ok_or_else(|| Error::InvalidArgument(format!("pair {i} has no one-hot label")))?;
        let _ = writeln!(out, "{},{},{}", fmt_value(x0), fmt_value(x1), label);
    }
    Ok(out)
}

pub fn parse_csv_points(text: &str, origin: &Path) -> Result<PairedDataset> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x0,x1,y" => {}
        _ => return Err(Error::format(origin, "expected header `x0,x1,y`")),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format(origin, format!("bad row {}: `{line}`", n + 2));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [a, b, y] = fields[..] else {
            return Err(bad());
        };
        let x0: f64 = a.parse().map_err(|_| bad())?;
        let x1: f64 = b.parse().map_err(|_| bad())?;
        let label: usize = y.parse().map_err(|_| bad())?;
        rows.push((x0, x1, label));
    }
    let classes = rows.iter().map(|r| r.2 + 1).max().unwrap_or(0).max(2);
    let pairs = rows
        .into_iter()
        .map(|(x0, x1, y)| Pair {
            target: vec![x0, x1],
            cond: one_hot(y, classes),
        })
        .collect();
    Ok(PairedDataset {
        kind: DatasetKind::Gmm2d,
        side: None,
        seed: None,
        pairs,
    })
}

pub fn read_csv_points(path: &Path) -> Result<PairedDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_points(&text, path)
}

pub fn write_csv_points(path: &Path, dataset: &PairedDataset) -> Result<()> {
    std::fs::write(path, render_csv_points(dataset)?).map_err(|e| Error::io(path, e))
}

fn pair_path(dir: &Path, index: usize, modality: &str) -> std::path::PathBuf {
    dir.join(format!("pair_{index:04}_{modality}.pgm"))
}

/// Writes each pair as `pair_%04d_mr.pgm` (condition) and `pair_%04d_ct.pgm` (target).
pub fn write_phantom_dir(dir: &Path, dataset: &PairedDataset) -> Result<()> {
    let side = dataset
        .side
        .ok_or_else(|| Error::InvalidArgument("dataset has no image side length".into()))?;
    for (i, p) in dataset.pairs.iter().enumerate() {
        write_pgm(
            &pair_path(dir, i, "mr"),
            &Image::square(side, p.cond.clone())?,
        )?;
        write_pgm(
            &pair_path(dir, i, "ct"),
            &Image::square(side, p.target.clone())?,
        )?;
    }
    Ok(())
}

/// Reads consecutive `pair_%04d_{mr,ct}.pgm` files starting at index 0.
pub fn read_phantom_dir(dir: &Path) -> Result<PairedDataset> {
    let mut pairs = Vec::new();
    let mut side = None;
    loop {
        let (mr_path, ct_path) = (
            pair_path(dir, pairs.len(), "mr"),
            pair_path(dir, pairs.len(), "ct"),
        );
        if !mr_path.exists() {
            break;
        }
        let mr = read_pgm(&mr_path)?;
        let ct = read_pgm(&ct_path)?;
        if mr.width() != mr.height() || (ct.width(), ct.height()) != (mr.width(), mr.height()) {
            return Err(Error::format(
                &ct_path,
                "pair images must be square and equally sized",
            ));
        }
        if *side.get_or_insert(mr.width()) != mr.width() {
            return Err(Error::format(&mr_path, "all pairs must share one size"));
        }
        pairs.push(Pair {
            target: ct.into_data(),
            cond: mr.into_data(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::format(dir, "no pair_0000_mr.pgm found"));
    }
    Ok(PairedDataset {
        kind: DatasetKind::Phantom,
        side,
        seed: None,
        pairs,
    })
}

/// A point CSV file or a directory of phantom pairs.
pub fn load_dataset(path: &Path) -> Result<PairedDataset> {
    if path.is_dir() {
        read_phantom_dir(path)
    } else {
        read_csv_points(path)
    }
}
