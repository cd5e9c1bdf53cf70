use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use deskscale::dataio::{
    generate_movies, generate_reviews, generate_synthetic, split_parts, write_dense_file,
    write_split, write_tabular, Cell, Column, TabularFrame,
};
use deskscale::{Error, Result};
use serde::Serialize;

use crate::config::write_effective;
use crate::{load_dense, Common, Labels};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// Two Gaussian classes: `label,f1,...,fd`.
    Dense,
    /// Movie metadata with a rating target.
    Movies,
    /// Tourism reviews with 1..5 polarity.
    Reviews,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "dense")]
    pub kind: Kind,
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    /// Dense only.
    #[arg(long, default_value_t = 50)]
    pub features: usize,
    /// Distance between the class means (dense only).
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    /// Label encoding written for dense data.
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    /// Output file; effective-config.json goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn write_frame(frame: &TabularFrame, path: &Path) -> Result<()> {
    write_tabular(frame, BufWriter::new(File::create(path)?))
}

pub fn reviews_frame(reviews: &[(String, u8)]) -> Result<TabularFrame> {
    let mut frame = TabularFrame::new(vec![Column::text("review"), Column::number("polarity")]);
    for (text, label) in reviews {
        frame.push_row(vec![Cell::Text(text.clone()), Cell::Number(f64::from(*label))])?;
    }
    Ok(frame)
}

pub fn gen(a: &GenArgs) -> Result<()> {
    let dir = parent_dir(&a.out);
    std::fs::create_dir_all(&dir)?;
    match a.kind {
        Kind::Dense => {
            let ds = generate_synthetic(a.rows, a.features, a.separation, a.common.seed)?;
            write_dense_file(&ds, &a.out, a.labels.into())?;
        }
        Kind::Movies => write_frame(&generate_movies(a.rows, a.common.seed)?, &a.out)?,
        Kind::Reviews => {
            if a.rows == 0 {
                return Err(Error::Config("rows must be positive".into()));
            }
            write_frame(&reviews_frame(&generate_reviews(a.rows, a.common.seed))?, &a.out)?
        }
    }
    write_effective(&dir, a)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SplitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dense input file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    #[arg(long, default_value_t = 5)]
    pub parts: usize,
    /// Manifest name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn split(a: &SplitArgs) -> Result<()> {
    let ds = load_dense(&a.data, a.labels)?;
    let (parts, mut manifest) = split_parts(&ds, a.parts, a.common.seed)?;
    manifest.name = a.name.clone().unwrap_or_else(|| {
        a.data
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let path = write_split(&a.out, &parts, &manifest)?;
    sayln!("{}", path.display());
    write_effective(&a.out, a)
}
