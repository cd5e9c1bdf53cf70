use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dense::{read_dense_file, write_dense_file, DenseDataset, LabelMap};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Binary,
    Continuous,
}

/// Bookkeeping for a dataset stored as several part files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub num_rows: usize,
    pub num_features: usize,
    /// Part file paths, relative to the manifest's directory.
    pub parts: Vec<String>,
    pub label_kind: LabelKind,
    pub seed: Option<u64>,
}

impl DatasetManifest {
    fn label_map(&self) -> LabelMap {
        match self.label_kind {
            LabelKind::Binary => LabelMap::ZeroOne,
            LabelKind::Continuous => LabelMap::Continuous,
        }
    }
}

/// Seeded shuffle, then `k` contiguous slices whose sizes differ by at most one.
///
/// The first `num_rows % k` parts receive the extra row.
pub fn split_parts(
    ds: &DenseDataset,
    k: usize,
    shuffle_seed: u64,
) -> Result<(Vec<DenseDataset>, DatasetManifest)> {
    if k < 2 {
        return Err(Error::config(format!("k must be at least 2, got {k}")));
    }
    if k > ds.len() {
        return Err(Error::config(format!(
            "cannot split {} rows into {k} parts",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seed::rng(shuffle_seed));

    let base = ds.len() / k;
    let extra = ds.len() % k;
    let mut parts = Vec::with_capacity(k);
    let mut start = 0;
    for p in 0..k {
        let size = base + usize::from(p < extra);
        parts.push(ds.select(&order[start..start + size]));
        start += size;
    }
    let manifest = DatasetManifest {
        name: "dataset".to_owned(),
        num_rows: ds.len(),
        num_features: ds.num_features(),
        parts: (0..k).map(|p| format!("part-{p}.csv")).collect(),
        label_kind: if ds.is_binary() {
            LabelKind::Binary
        } else {
            LabelKind::Continuous
        },
        seed: Some(shuffle_seed),
    };
    Ok((parts, manifest))
}

/// Writes each part plus `manifest.json` into `dir`. Returns the manifest path.
pub fn write_split(
    dir: impl AsRef<Path>,
    parts: &[DenseDataset],
    manifest: &DatasetManifest,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if parts.len() != manifest.parts.len() {
        return Err(Error::Dimension {
            expected: manifest.parts.len(),
            got: parts.len(),
        });
    }
    fs::create_dir_all(dir)?;
    for (part, name) in parts.iter().zip(&manifest.parts) {
        write_dense_file(part, dir.join(name), manifest.label_map())?;
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(manifest)?)?;
    Ok(path)
}

/// Reads a manifest and all of its parts, checking the declared row count.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<DenseDataset>)> {
    let path = path.as_ref();
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(path)?)?;
    if manifest.parts.is_empty() {
        return Err(Error::data("manifest lists no parts"));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let parts = manifest
        .parts
        .iter()
        .map(|p| read_dense_file(base.join(p), manifest.num_features, manifest.label_map()))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = parts.iter().map(DenseDataset::len).sum();
    if total != manifest.num_rows {
        return Err(Error::data(format!(
            "manifest declares {} rows but parts hold {total}",
            manifest.num_rows
        )));
    }
    Ok((manifest, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::generate_synthetic;
    use proptest::prelude::*;

    fn sorted_rows(ds: &DenseDataset) -> Vec<Vec<u64>> {
        let mut rows: Vec<Vec<u64>> = (0..ds.len())
            .map(|i| {
                std::iter::once(ds.labels()[i].to_bits())
                    .chain(ds.row(i).iter().map(|v| v.to_bits()))
                    .collect()
            })
            .collect();
        rows.sort();
        rows
    }

    #[test]
    fn equal_parts() {
        let ds = generate_synthetic(100, 3, 1.0, 1).unwrap();
        let (parts, manifest) = split_parts(&ds, 5, 9).unwrap();
        assert!(parts.iter().all(|p| p.len() == 20));
        assert_eq!(manifest.num_rows, 100);
        assert_eq!(manifest.parts.len(), 5);
    }

    #[test]
    fn remainder_rule() {
        let ds = generate_synthetic(101, 3, 1.0, 1).unwrap();
        let (parts, _) = split_parts(&ds, 5, 9).unwrap();
        let mut sizes: Vec<usize> = parts.iter().map(DenseDataset::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![20, 20, 20, 20, 21]);
    }

    #[test]
    fn too_many_parts() {
        let ds = generate_synthetic(4, 2, 1.0, 1).unwrap();
        assert!(split_parts(&ds, 5, 0).is_err());
        assert!(split_parts(&ds, 1, 0).is_err());
    }

    #[test]
    fn manifest_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(23, 4, 2.0, 3).unwrap();
        let (parts, manifest) = split_parts(&ds, 3, 11).unwrap();
        let path = write_split(dir.path(), &parts, &manifest).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["label_kind", "name", "num_features", "num_rows", "parts", "seed"]);
        let (back, loaded) = load_manifest(&path).unwrap();
        assert_eq!(back, manifest);
        assert_eq!(loaded, parts);
    }

    #[test]
    fn manifest_row_count_checked() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic(10, 2, 2.0, 3).unwrap();
        let (parts, mut manifest) = split_parts(&ds, 2, 1).unwrap();
        manifest.num_rows = 11;
        let path = write_split(dir.path(), &parts, &manifest).unwrap();
        assert!(load_manifest(path).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn split_conserves_rows(rows in 10usize..60, k in 2usize..=10, seed in any::<u64>()) {
            let ds = generate_synthetic(rows, 3, 1.0, seed).unwrap();
            let (parts, manifest) = split_parts(&ds, k, seed).unwrap();
            let sizes: Vec<usize> = parts.iter().map(DenseDataset::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(manifest.num_rows, sizes.iter().sum::<usize>());
            let joined = DenseDataset::concat(&parts).unwrap();
            prop_assert_eq!(sorted_rows(&joined), sorted_rows(&ds));
        }
    }
}
