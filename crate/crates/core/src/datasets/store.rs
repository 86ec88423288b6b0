//! Dataset directory:
//!
//! ```text
//! manifest.toml   format version, n, d, feature mode, grid, patch refs
//! features.f32    "FRGLFEAT", u32 version, u64 n, u64 d, n*d f32 (LE, row-major)
//! labels.u8       "FRGLLABL", u32 version, u64 n, one byte per sample (0, 1, 0xFF)
//! ids.txt         one id per line
//! patches/        {id}/ref.png, {id}/test.png (optional)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_atomic, FeatureMode, PatchGrid};
use crate::error::{Error, Result};
use crate::model::{Dataset, Label, LabelVector, PatchRef};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const FEATURES_FILE: &str = "features.f32";
pub const LABELS_FILE: &str = "labels.u8";
pub const IDS_FILE: &str = "ids.txt";

const FEATURES_MAGIC: &[u8; 8] = b"FRGLFEAT";
const LABELS_MAGIC: &[u8; 8] = b"FRGLLABL";
const FEATURES_HEADER: usize = 8 + 4 + 8 + 8;
const LABELS_HEADER: usize = 8 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n: usize,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_mode: Option<FeatureMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<PatchGrid>,
    pub features: String,
    pub labels: String,
    pub ids: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patches: Vec<PatchRef>,
}

/// Writes `dataset` (and `labels`, all unknown when absent) into `dir`.
pub fn save_dataset(
    dataset: &Dataset,
    labels: Option<&LabelVector>,
    feature_mode: Option<FeatureMode>,
    grid: Option<PatchGrid>,
    dir: &Path,
) -> Result<DatasetManifest> {
    let n = dataset.n();
    let labels = labels.cloned().unwrap_or_else(|| LabelVector::unknown(n));
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if let Some(bad) = dataset.ids().iter().find(|id| id.contains(['\n', '\r'])) {
        return Err(Error::InvalidArgument(format!("id {bad:?} contains a line break")));
    }

    let mut feat = Vec::with_capacity(FEATURES_HEADER + dataset.features().len() * 4);
    feat.extend_from_slice(FEATURES_MAGIC);
    feat.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    feat.extend_from_slice(&(n as u64).to_le_bytes());
    feat.extend_from_slice(&(dataset.d() as u64).to_le_bytes());
    for v in dataset.features() {
        feat.extend_from_slice(&v.to_le_bytes());
    }

    let mut lab = Vec::with_capacity(LABELS_HEADER + n);
    lab.extend_from_slice(LABELS_MAGIC);
    lab.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    lab.extend_from_slice(&(n as u64).to_le_bytes());
    lab.extend(labels.0.iter().map(|l| l.map_or(0i8, Label::as_i8) as u8));

    let mut ids = dataset.ids().join("\n");
    ids.push('\n');

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        n,
        d: dataset.d(),
        feature_mode,
        grid,
        features: FEATURES_FILE.into(),
        labels: LABELS_FILE.into(),
        ids: IDS_FILE.into(),
        patches: dataset.patch_refs().map(<[_]>::to_vec).unwrap_or_default(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;

    write_atomic(&dir.join(FEATURES_FILE), &feat)?;
    write_atomic(&dir.join(LABELS_FILE), &lab)?;
    write_atomic(&dir.join(IDS_FILE), ids.as_bytes())?;
    write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn check_header(
    bytes: &[u8],
    magic: &[u8; 8],
    header: usize,
    path: &Path,
) -> Result<u64> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(Error::Version {
            path: path.to_path_buf(),
            detail: format!("missing {} header", String::from_utf8_lossy(magic)),
        });
    }
    if bytes.len() < header {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: header as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            detail: format!("format version {version}, expected {FORMAT_VERSION}"),
        });
    }
    Ok(u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")))
}

fn expect_len(bytes: &[u8], expected: u64, path: &Path) -> Result<()> {
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Reads a directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<(Dataset, LabelVector, DatasetManifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = String::from_utf8(read(&manifest_path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
    let manifest: DatasetManifest = toml::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            path: manifest_path,
            detail: format!(
                "format version {}, expected {FORMAT_VERSION}",
                manifest.format_version
            ),
        });
    }
    let (n, d) = (manifest.n, manifest.d);

    let feat_path = dir.join(&manifest.features);
    let feat = read(&feat_path)?;
    let file_n = check_header(&feat, FEATURES_MAGIC, FEATURES_HEADER, &feat_path)?;
    let file_d = u64::from_le_bytes(feat[20..28].try_into().expect("8 bytes"));
    if (file_n, file_d) != (n as u64, d as u64) {
        return Err(Error::Format(format!(
            "{} holds {file_n}x{file_d}, manifest says {n}x{d}",
            feat_path.display()
        )));
    }
    expect_len(&feat, (FEATURES_HEADER + n * d * 4) as u64, &feat_path)?;
    let features: Vec<f32> = feat[FEATURES_HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();

    let lab_path = dir.join(&manifest.labels);
    let lab = read(&lab_path)?;
    let lab_n = check_header(&lab, LABELS_MAGIC, LABELS_HEADER, &lab_path)?;
    if lab_n != n as u64 {
        return Err(Error::Format(format!(
            "{} holds {lab_n} labels, manifest says {n}",
            lab_path.display()
        )));
    }
    expect_len(&lab, (LABELS_HEADER + n) as u64, &lab_path)?;
    let labels = lab[LABELS_HEADER..]
        .iter()
        .enumerate()
        .map(|(i, &b)| match b as i8 {
            0 => Ok(None),
            v => Label::from_i64(i64::from(v)).map(Some).ok_or_else(|| {
                Error::Format(format!("{}: label byte {b:#x} at {i}", lab_path.display()))
            }),
        })
        .collect::<Result<Vec<_>>>()?;

    let ids_path = dir.join(&manifest.ids);
    let ids_text = String::from_utf8(read(&ids_path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", ids_path.display())))?;
    let ids: Vec<String> = ids_text.lines().map(str::to_owned).collect();
    if ids.len() != n {
        return Err(Error::Format(format!(
            "{} lists {} ids, manifest says {n}",
            ids_path.display(),
            ids.len()
        )));
    }
    let patches = if manifest.patches.is_empty() {
        None
    } else {
        Some(manifest.patches.clone())
    };
    let dataset = Dataset::new(features, d, ids, patches)?;
    Ok((dataset, LabelVector(labels), manifest))
}

/// Reads a feature table with header `id,y,f_1,...,f_d`. `y` is `1`, `-1`,
/// or `0`/empty for unknown.
pub fn import_csv(path: &Path) -> Result<(Dataset, LabelVector)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let d = header.len().saturating_sub(2);
    let expected: Vec<String> = ["id".to_string(), "y".to_string()]
        .into_iter()
        .chain((1..=d).map(|j| format!("f_{j}")))
        .collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format(format!(
            "{}: header must be id,y,f_1..f_d",
            path.display()
        )));
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut features = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = line + 2;
        if record.len() != d + 2 {
            return Err(Error::Format(format!(
                "{} line {row}: {} fields, expected {}",
                path.display(),
                record.len(),
                d + 2
            )));
        }
        ids.push(record[0].to_string());
        labels.push(match record[1].trim() {
            "" | "0" => None,
            "1" | "+1" => Some(Label::Positive),
            "-1" => Some(Label::Negative),
            other => {
                return Err(Error::Format(format!(
                    "{} line {row}: label {other:?} is not 1, -1 or 0",
                    path.display()
                )))
            }
        });
        for field in record.iter().skip(2) {
            features.push(field.trim().parse::<f32>().map_err(|e| {
                Error::Format(format!("{} line {row}: {field:?}: {e}", path.display()))
            })?);
        }
    }
    Ok((Dataset::new(features, d, ids, None)?, LabelVector(labels)))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(format!("reading {}", path.display()), io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}
