//! The biased synthetic slice dataset: records, rendering, on-disk layout
//! (PGM for viewing, TNSR for the pipeline) and augmentation.

mod augment;
mod pgm;
mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, shape_err, Error, Result};
use crate::tensor::{decode_tnsr, encode_tnsr, DType, Tensor};

pub use augment::{augment, AugmentConfig, CropMode};
pub use pgm::{decode_pgm, encode_pgm, from_byte, to_byte};
pub use synth::{render_slice, synth_dataset, BiasMode, ClassCounts, SynthSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Acquisition texture: A is the contrast-protocol analog, B the
/// non-contrast analog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bias {
    A,
    B,
}

impl Bias {
    pub fn other(self) -> Bias {
        match self {
            Bias::A => Bias::B,
            Bias::B => Bias::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    RealSynthetic,
    Generated { structure_id: u64, texture_id: u64 },
}

/// One image with its labels. `lesion_mask` is the ground-truth lesion
/// region (1 inside) when known.
#[derive(Clone, Debug)]
pub struct SliceRecord {
    pub slice_id: u64,
    pub image: Tensor,
    pub class_label: usize,
    pub bias_label: Bias,
    pub split: Split,
    pub provenance: Provenance,
    pub lesion_mask: Option<Tensor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordMeta {
    pub slice_id: u64,
    pub class_label: usize,
    pub bias_label: Bias,
    pub split: Split,
    pub provenance: Provenance,
    pub has_mask: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountEntry {
    pub split: Split,
    pub class_label: usize,
    pub bias_label: Bias,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub generation_seed: u64,
    pub spec: Option<SynthSpec>,
    pub image_size: usize,
    pub records: Vec<RecordMeta>,
    pub counts: Vec<CountEntry>,
    /// SHA-256 over every image file, in path order, of path and bytes.
    pub checksum: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl SliceRecord {
    pub fn meta(&self) -> RecordMeta {
        RecordMeta {
            slice_id: self.slice_id,
            class_label: self.class_label,
            bias_label: self.bias_label,
            split: self.split,
            provenance: self.provenance,
            has_mask: self.lesion_mask.is_some(),
        }
    }

    fn stem(&self) -> String {
        format!("{}/{}", self.split.name(), self.slice_id)
    }
}

pub fn count_records(records: &[SliceRecord]) -> Vec<CountEntry> {
    let mut m: BTreeMap<(Split, usize, Bias), usize> = BTreeMap::new();
    for r in records {
        *m.entry((r.split, r.class_label, r.bias_label)).or_default() += 1;
    }
    m.into_iter()
        .map(|((split, class_label, bias_label), count)| CountEntry { split, class_label, bias_label, count })
        .collect()
}

pub fn in_split(records: &[SliceRecord], split: Split) -> Vec<SliceRecord> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}

/// Pearson correlation between class label and bias label (B = 1), zero when
/// either is constant.
pub fn class_bias_correlation(records: &[SliceRecord]) -> f64 {
    let n = records.len() as f64;
    if records.is_empty() {
        return 0.0;
    }
    let (mut sc, mut sb, mut scb) = (0.0, 0.0, 0.0);
    for r in records {
        let (c, b) = (r.class_label as f64, r.bias_label.index() as f64);
        sc += c;
        sb += b;
        scb += c * b;
    }
    let cov = scb / n - (sc / n) * (sb / n);
    let vc = sc / n - (sc / n).powi(2);
    let vb = sb / n - (sb / n).powi(2);
    if vc <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        cov / (vc * vb).sqrt()
    }
}

/// Stacks `[1,H,W]` images into `[N,1,H,W]`.
pub fn stack_images<'a>(images: impl IntoIterator<Item = &'a Tensor>) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut shape: Option<Vec<usize>> = None;
    let mut n = 0;
    for im in images {
        match &shape {
            None => shape = Some(im.shape().to_vec()),
            Some(s) if s != im.shape() => return shape_err(format!("cannot stack {:?} with {:?}", s, im.shape())),
            _ => {}
        }
        data.extend_from_slice(&im.data());
        n += 1;
    }
    let Some(s) = shape else {
        return invalid("cannot stack zero images");
    };
    let mut full = vec![n];
    full.extend(s);
    Tensor::new(data, &full)
}

fn image_files(r: &SliceRecord) -> Result<Vec<(String, Vec<u8>)>> {
    let stem = r.stem();
    let mut files = vec![
        (format!("{stem}.pgm"), encode_pgm(&r.image)?),
        (format!("{stem}.tnsr"), encode_tnsr(r.image.shape(), &r.image.data(), DType::F64)),
    ];
    if let Some(m) = &r.lesion_mask {
        files.push((format!("{stem}.mask.pgm"), encode_pgm(&m.mul_scalar(2.0).add_scalar(-1.0))?));
    }
    Ok(files)
}

fn checksum(dir: &Path, paths: &mut [String]) -> Result<String> {
    paths.sort();
    let mut h = Sha256::new();
    for p in paths.iter() {
        h.update(p.as_bytes());
        h.update([0u8]);
        h.update(fs::read(dir.join(p))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn relative_paths(records: &[RecordMeta]) -> Vec<String> {
    let mut out = Vec::with_capacity(records.len() * 3);
    for m in records {
        let stem = format!("{}/{}", m.split.name(), m.slice_id);
        out.push(format!("{stem}.pgm"));
        out.push(format!("{stem}.tnsr"));
        if m.has_mask {
            out.push(format!("{stem}.mask.pgm"));
        }
    }
    out
}

/// Writes images and `manifest.json` under `dir`.
pub fn write_dataset(dir: &Path, records: &[SliceRecord], generation_seed: u64, spec: Option<&SynthSpec>) -> Result<DatasetManifest> {
    let Some(first) = records.first() else {
        return invalid("refusing to write an empty dataset");
    };
    let image_size = first.image.shape()[1];
    let mut seen = std::collections::HashSet::new();
    let mut paths = Vec::new();
    for split in Split::ALL {
        fs::create_dir_all(dir.join(split.name()))?;
    }
    for r in records {
        if !seen.insert(r.slice_id) {
            return invalid(format!("duplicate slice id {}", r.slice_id));
        }
        for (p, bytes) in image_files(r)? {
            fs::write(dir.join(&p), bytes)?;
            paths.push(p);
        }
    }
    let manifest = DatasetManifest {
        generation_seed,
        spec: spec.cloned(),
        image_size,
        records: records.iter().map(SliceRecord::meta).collect(),
        counts: count_records(records),
        checksum: checksum(dir, &mut paths)?,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?)
}

/// Recomputes the checksum from the files on disk.
pub fn verify_dataset(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let actual = checksum(dir, &mut relative_paths(&manifest.records))?;
    if actual != manifest.checksum {
        return Err(Error::Format(format!(
            "dataset at {} fails its checksum (manifest {}, files {actual})",
            dir.display(),
            manifest.checksum
        )));
    }
    Ok(())
}

/// Loads a dataset written by [`write_dataset`], verifying the checksum and
/// the recorded counts. Images come from the lossless TNSR files.
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<SliceRecord>)> {
    let manifest = read_manifest(dir)?;
    verify_dataset(dir, &manifest)?;
    let mut records = Vec::with_capacity(manifest.records.len());
    for m in &manifest.records {
        let stem = PathBuf::from(m.split.name()).join(m.slice_id.to_string());
        let (shape, data, _) = decode_tnsr(&fs::read(dir.join(stem.with_extension("tnsr")))?)?;
        let lesion_mask = if m.has_mask {
            let mask = decode_pgm(&fs::read(dir.join(format!("{}.mask.pgm", stem.display())))?)?;
            let binary = mask.data().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
            Some(Tensor::new(binary, mask.shape())?)
        } else {
            None
        };
        records.push(SliceRecord {
            slice_id: m.slice_id,
            image: Tensor::new(data, &shape)?,
            class_label: m.class_label,
            bias_label: m.bias_label,
            split: m.split,
            provenance: m.provenance,
            lesion_mask,
        });
    }
    if count_records(&records) != manifest.counts {
        return Err(Error::Format("manifest counts disagree with its records".into()));
    }
    Ok((manifest, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec {
            image_size: 16,
            train: ClassCounts { class0: 3, class1: 2 },
            val: ClassCounts { class0: 1, class1: 1 },
            test: ClassCounts { class0: 2, class1: 2 },
            ..Default::default()
        }
    }

    #[test]
    fn write_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synth_dataset(&spec(), 9).unwrap();
        let m = write_dataset(dir.path(), &recs, 9, Some(&spec())).unwrap();
        assert!(dir.path().join("train/0.pgm").exists());
        assert!(dir.path().join("test/10.mask.pgm").exists());
        let (m2, back) = load_dataset(dir.path()).unwrap();
        assert_eq!(m, m2);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.image.to_vec(), b.image.to_vec());
            assert_eq!(a.lesion_mask.as_ref().unwrap().to_vec(), b.lesion_mask.as_ref().unwrap().to_vec());
            assert_eq!(a.meta(), b.meta());
        }
    }

    #[test]
    fn same_seed_same_checksum() {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let a = write_dataset(d1.path(), &synth_dataset(&spec(), 3).unwrap(), 3, None).unwrap();
        let b = write_dataset(d2.path(), &synth_dataset(&spec(), 3).unwrap(), 3, None).unwrap();
        assert_eq!(a.checksum, b.checksum);
    }

    #[test]
    fn single_byte_corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_dataset(dir.path(), &synth_dataset(&spec(), 3).unwrap(), 3, None).unwrap();
        let p = dir.path().join("val/5.pgm");
        let mut bytes = fs::read(&p).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&p, bytes).unwrap();
        assert!(verify_dataset(dir.path(), &m).is_err());
        assert!(load_dataset(dir.path()).is_err());
    }

    #[test]
    fn correlation_examples() {
        let recs = synth_dataset(&spec(), 1).unwrap();
        let train = in_split(&recs, Split::Train);
        assert!((class_bias_correlation(&train) - 1.0).abs() < 1e-12);
        let mut mixed = train.clone();
        mixed.extend(train.iter().map(|r| SliceRecord { bias_label: r.bias_label.other(), ..r.clone() }));
        assert!(class_bias_correlation(&mixed).abs() < 1e-12);
        assert_eq!(class_bias_correlation(&[]), 0.0);
    }

    #[test]
    fn stacking() {
        let recs = synth_dataset(&spec(), 1).unwrap();
        let t = stack_images(recs.iter().map(|r| &r.image)).unwrap();
        assert_eq!(t.shape(), &[recs.len(), 1, 16, 16]);
        assert!(stack_images(std::iter::empty()).is_err());
    }
}
