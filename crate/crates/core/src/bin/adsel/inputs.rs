//! Dataset flags and loading. Every file is read once; the same bytes are
//! hashed for the manifest and parsed.

use std::path::{Path, PathBuf};

use adsel::data::{parse_csv_matrix, parse_groups, Orientation};
use adsel::harness::binarize_labels;
use adsel::{Dataset, Error, FeatureMatrix, LabelMatrix, MaskMatrix, Result};
use clap::{Args, ValueEnum};

use crate::manifest::InputDigest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// One row per sample, one column per feature.
    Samples,
    /// One row per feature, one column per sample.
    Features,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Feature matrix CSV.
    #[arg(long)]
    pub features: PathBuf,
    /// Label matrix CSV, one row per sample, entries in {0, 1}.
    #[arg(long)]
    pub labels: PathBuf,
    /// Observation mask CSV (1 observed, 0 missing). Defaults to all observed.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Single-column CSV (with header) of participant ids, one per sample.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Row layout of the features file.
    #[arg(long, value_enum, default_value = "samples")]
    pub layout: Layout,
    /// Labels file holds raw ratings; binarise at the configured threshold.
    #[arg(long)]
    pub ratings: bool,
}

pub fn read(role: &str, path: &Path, digests: &mut Vec<InputDigest>) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|source| Error::Config(format!("{}: {source}", path.display())))?;
    digests.push(InputDigest::new(role, path, &bytes));
    Ok(bytes)
}

pub fn load_labels(path: &Path, ratings: Option<f64>, digests: &mut Vec<InputDigest>) -> Result<LabelMatrix> {
    let bytes = read("labels", path, digests)?;
    let m = parse_csv_matrix(bytes.as_slice(), path)?;
    let labels = match ratings {
        Some(threshold) => binarize_labels(&m.values, threshold),
        None => LabelMatrix::new(m.values),
    };
    Ok(labels.with_names(m.header))
}

impl DataArgs {
    /// Loads and validates the dataset.
    pub fn load(&self, binarization_threshold: f64) -> Result<(Dataset, Vec<InputDigest>)> {
        let mut digests = Vec::new();
        let bytes = read("features", &self.features, &mut digests)?;
        let orientation = match self.layout {
            Layout::Samples => Orientation::RowsAreSamples,
            Layout::Features => Orientation::RowsAreFeatures,
        };
        let m = parse_csv_matrix(bytes.as_slice(), &self.features)?.into_orientation(orientation);
        let names = match orientation {
            Orientation::RowsAreSamples => m.header,
            Orientation::RowsAreFeatures => None,
        };
        let features = FeatureMatrix::new(m.values, names)?;
        let labels = load_labels(
            &self.labels,
            self.ratings.then_some(binarization_threshold),
            &mut digests,
        )?;
        let mask = match &self.mask {
            Some(path) => {
                let bytes = read("mask", path, &mut digests)?;
                Some(MaskMatrix::new(parse_csv_matrix(bytes.as_slice(), path)?.values))
            }
            None => None,
        };
        let mut ds = Dataset::from_parts(features, labels, mask);
        if let Some(path) = &self.groups {
            let bytes = read("groups", path, &mut digests)?;
            ds.groups = Some(parse_groups(bytes.as_slice(), path)?);
        }
        Ok((ds.validated()?, digests))
    }
}
