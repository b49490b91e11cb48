//! The canonical windowed-dataset container.
//!
//! A [`WindowedDataset`] holds `N` fixed-length multi-channel windows as a
//! row-major `[N, C, L]` tensor together with class labels, subject ids and
//! channel metadata. On disk it is a directory with three files:
//!
//! * `manifest.json` — metadata, shapes, normalization state and the SHA-256
//!   of the tensor file,
//! * `windows.f32` — little-endian 32-bit floats, row-major `[N, C, L]`,
//! * `labels.csv` — columns `index,class_id,subject_id`.
//!
//! Round-trips through [`write_canonical`] / [`read_canonical`] are bit-exact
//! for the tensor and lossless for the metadata.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CONTAINER_SCHEMA_VERSION: &str = "1";
const TENSOR_FILE: &str = "windows.f32";
const LABELS_FILE: &str = "labels.csv";
const MANIFEST_FILE: &str = "manifest.json";

/// Qualitative signal character; informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    QuasiPeriodic,
    SlowVarying,
}

/// Per-channel acquisition metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    /// Native sampling rate of the source recording, in samples/second.
    pub native_rate: f64,
    pub kind: ChannelKind,
    /// Optional low-pass cutoff applied during preparation, in Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowpass_cutoff: Option<f64>,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.native_rate > 0.0) {
            return Err(Error::Manifest(format!(
                "channel {}: native_rate must be positive, got {}",
                self.name, self.native_rate
            )));
        }
        if let Some(cutoff) = self.lowpass_cutoff {
            if !(cutoff > 0.0) || cutoff >= self.native_rate / 2.0 {
                return Err(Error::Manifest(format!(
                    "channel {}: lowpass_cutoff {} must lie in (0, native_rate/2 = {})",
                    self.name,
                    cutoff,
                    self.native_rate / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// Per-channel z-score statistics fitted on the reference partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
    /// True when the channel was constant on the fit partition; such a
    /// channel is centered only.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum NormalizationState {
    Raw,
    ZScore { channels: Vec<ChannelStats> },
}

impl NormalizationState {
    pub fn is_raw(&self) -> bool {
        matches!(self, NormalizationState::Raw)
    }
}

/// N labeled, fixed-length, multi-channel windows at a common sample rate.
///
/// Immutable after construction; safe to share across concurrent readers.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    data: Vec<f32>,
    n: usize,
    c: usize,
    l: usize,
    pub labels: Vec<u32>,
    pub subjects: Vec<String>,
    pub channels: Vec<ChannelSpec>,
    pub rate: f64,
    pub window_seconds: f64,
    pub n_classes: usize,
    pub normalization: NormalizationState,
    /// Set by the reference generators to name the transformation that
    /// produced a synthetic dataset.
    pub provenance: Option<String>,
}

impl WindowedDataset {
    /// Builds a dataset and checks every container invariant:
    /// `L = rate * window_seconds` exactly, all values finite, labels within
    /// `[0, n_classes)` and `N > 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        data: Vec<f32>,
        shape: (usize, usize, usize),
        labels: Vec<u32>,
        subjects: Vec<String>,
        channels: Vec<ChannelSpec>,
        rate: f64,
        window_seconds: f64,
        n_classes: usize,
        normalization: NormalizationState,
    ) -> Result<Self> {
        let (n, c, l) = shape;
        if n == 0 {
            return Err(Error::InvalidInput("dataset must contain windows".into()));
        }
        if data.len() != n * c * l {
            return Err(Error::ShapeMismatch(format!(
                "tensor holds {} values but shape [{n}, {c}, {l}] needs {}",
                data.len(),
                n * c * l
            )));
        }
        if labels.len() != n || subjects.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} labels and subjects, got {} and {}",
                labels.len(),
                subjects.len()
            )));
        }
        if channels.len() != c {
            return Err(Error::ShapeMismatch(format!(
                "{} channel specs for a {c}-channel tensor",
                channels.len()
            )));
        }
        let expected_l = rate * window_seconds;
        if expected_l.fract() != 0.0 || expected_l as usize != l {
            return Err(Error::InvalidInput(format!(
                "window length {l} != rate {rate} x window_seconds {window_seconds}"
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at tensor offset {bad}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&lb| lb as usize >= n_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            data,
            n,
            c,
            l,
            labels,
            subjects,
            channels,
            rate,
            window_seconds,
            n_classes,
            normalization,
            provenance: None,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.n
    }

    pub fn n_channels(&self) -> usize {
        self.c
    }

    pub fn window_len(&self) -> usize {
        self.l
    }

    /// Row-major `[N, C, L]` tensor.
    pub fn values(&self) -> &[f32] {
        &self.data
    }

    /// One window of one channel, `L` contiguous samples.
    pub fn window(&self, index: usize, channel: usize) -> &[f32] {
        let start = (index * self.c + channel) * self.l;
        &self.data[start..start + self.l]
    }

    /// All channels of one window, `C*L` contiguous samples.
    pub fn window_all_channels(&self, index: usize) -> &[f32] {
        let start = index * self.c * self.l;
        &self.data[start..start + self.c * self.l]
    }

    /// Window indices per class, in ascending window order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.n_classes];
        for (i, &label) in self.labels.iter().enumerate() {
            by_class[label as usize].push(i);
        }
        by_class
    }

    /// Per-class window counts; sums to `N`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &label in &self.labels {
            counts[label as usize] += 1;
        }
        counts
    }

    /// New dataset holding the given windows (metadata shared).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("empty window selection".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.c * self.l);
        let mut labels = Vec::with_capacity(indices.len());
        let mut subjects = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.window_all_channels(i));
            labels.push(self.labels[i]);
            subjects.push(self.subjects[i].clone());
        }
        let mut out = Self::new(
            data,
            (indices.len(), self.c, self.l),
            labels,
            subjects,
            self.channels.clone(),
            self.rate,
            self.window_seconds,
            self.n_classes,
            self.normalization.clone(),
        )?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// Replaces the tensor, keeping shape and metadata.
    pub fn with_values(&self, data: Vec<f32>) -> Result<Self> {
        let mut out = Self::new(
            data,
            (self.n, self.c, self.l),
            self.labels.clone(),
            self.subjects.clone(),
            self.channels.clone(),
            self.rate,
            self.window_seconds,
            self.n_classes,
            self.normalization.clone(),
        )?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// Shape-compatibility fingerprint: two datasets can be compared when
    /// channel layout, window geometry and class structure agree.
    pub fn shape_fingerprint(&self) -> String {
        let names: Vec<&str> = self.channels.iter().map(|ch| ch.name.as_str()).collect();
        format!(
            "c={};l={};rate={};win={};classes={};channels={}",
            self.c,
            self.l,
            self.rate,
            self.window_seconds,
            self.n_classes,
            names.join("+")
        )
    }

    /// Content fingerprint: SHA-256 over the little-endian tensor bytes.
    pub fn content_fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.data {
            hasher.update(v.to_le_bytes());
        }
        hex(&hasher.finalize())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ContainerManifest {
    schema_version: String,
    name: String,
    n: usize,
    c: usize,
    l: usize,
    rate: f64,
    window_seconds: f64,
    n_classes: usize,
    channels: Vec<ChannelSpec>,
    normalization: NormalizationState,
    tensor_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the canonical three-file container into `dir` (created if absent).
pub fn write_canonical(dataset: &WindowedDataset, dir: &Path, name: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let tensor_path = dir.join(TENSOR_FILE);
    {
        let file = fs::File::create(&tensor_path).map_err(|e| Error::io(&tensor_path, e))?;
        let mut writer = BufWriter::new(file);
        for v in dataset.values() {
            writer
                .write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(&tensor_path, e))?;
        }
        writer.flush().map_err(|e| Error::io(&tensor_path, e))?;
    }

    let labels_path = dir.join(LABELS_FILE);
    {
        let file = fs::File::create(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "index,class_id,subject_id").map_err(|e| Error::io(&labels_path, e))?;
        for i in 0..dataset.n_windows() {
            writeln!(writer, "{},{},{}", i, dataset.labels[i], dataset.subjects[i])
                .map_err(|e| Error::io(&labels_path, e))?;
        }
        writer.flush().map_err(|e| Error::io(&labels_path, e))?;
    }

    let manifest = ContainerManifest {
        schema_version: CONTAINER_SCHEMA_VERSION.to_string(),
        name: name.to_string(),
        n: dataset.n_windows(),
        c: dataset.n_channels(),
        l: dataset.window_len(),
        rate: dataset.rate,
        window_seconds: dataset.window_seconds,
        n_classes: dataset.n_classes,
        channels: dataset.channels.clone(),
        normalization: dataset.normalization.clone(),
        tensor_sha256: dataset.content_fingerprint(),
        provenance: dataset.provenance.clone(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

/// Reads a canonical container, verifying shapes and the tensor checksum.
pub fn read_canonical(dir: &Path) -> Result<WindowedDataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_text =
        fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: ContainerManifest = serde_json::from_str(&manifest_text)?;
    if manifest.schema_version != CONTAINER_SCHEMA_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported container schema version {:?}",
            manifest.schema_version
        )));
    }

    let tensor_path = dir.join(TENSOR_FILE);
    let mut bytes = Vec::new();
    fs::File::open(&tensor_path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&tensor_path, e))?;
    let expected_len = manifest.n * manifest.c * manifest.l * 4;
    if bytes.len() != expected_len {
        return Err(Error::ShapeMismatch(format!(
            "tensor file holds {} bytes but manifest shape [{}, {}, {}] needs {}",
            bytes.len(),
            manifest.n,
            manifest.c,
            manifest.l,
            expected_len
        )));
    }
    let actual_sha = {
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hex(&hasher.finalize())
    };
    if actual_sha != manifest.tensor_sha256 {
        return Err(Error::Checksum {
            path: tensor_path,
            expected: manifest.tensor_sha256,
            actual: actual_sha,
        });
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|chunk| f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
        .collect();

    let labels_path = dir.join(LABELS_FILE);
    let file = fs::File::open(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    let mut labels = Vec::with_capacity(manifest.n);
    let mut subjects = Vec::with_capacity(manifest.n);
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&labels_path, e))?;
        if lineno == 0 {
            continue; // header
        }
        let mut fields = line.splitn(3, ',');
        let parse_err = |msg: &str| Error::Parse {
            file: labels_path.clone(),
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let index: usize = fields
            .next()
            .ok_or_else(|| parse_err("missing index"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("bad index"))?;
        if index != labels.len() {
            return Err(parse_err("rows out of order"));
        }
        let class: u32 = fields
            .next()
            .ok_or_else(|| parse_err("missing class_id"))?
            .trim()
            .parse()
            .map_err(|_| parse_err("bad class_id"))?;
        let subject = fields
            .next()
            .ok_or_else(|| parse_err("missing subject_id"))?
            .trim()
            .to_string();
        labels.push(class);
        subjects.push(subject);
    }
    if labels.len() != manifest.n {
        return Err(Error::ShapeMismatch(format!(
            "labels.csv holds {} rows but manifest expects {}",
            labels.len(),
            manifest.n
        )));
    }

    let mut dataset = WindowedDataset::new(
        data,
        (manifest.n, manifest.c, manifest.l),
        labels,
        subjects,
        manifest.channels,
        manifest.rate,
        manifest.window_seconds,
        manifest.n_classes,
        manifest.normalization,
    )?;
    dataset.provenance = manifest.provenance;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_dataset() -> WindowedDataset {
        let channels = vec![
            ChannelSpec {
                name: "ecg".into(),
                native_rate: 700.0,
                kind: ChannelKind::QuasiPeriodic,
                lowpass_cutoff: None,
            },
            ChannelSpec {
                name: "eda".into(),
                native_rate: 4.0,
                kind: ChannelKind::SlowVarying,
                lowpass_cutoff: Some(1.5),
            },
        ];
        let n = 4;
        let (c, l) = (2, 10);
        let data: Vec<f32> = (0..n * c * l).map(|i| (i as f32) * 0.25 - 3.0).collect();
        WindowedDataset::new(
            data,
            (n, c, l),
            vec![0, 1, 0, 1],
            vec!["s1".into(), "s1".into(), "s2".into(), "s2".into()],
            channels,
            5.0,
            2.0,
            2,
            NormalizationState::Raw,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let dataset = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_canonical(&dataset, dir.path(), "tiny").unwrap();
        let back = read_canonical(dir.path()).unwrap();
        assert_eq!(dataset, back);
    }

    #[test]
    fn truncated_tensor_is_a_shape_error() {
        let dataset = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_canonical(&dataset, dir.path(), "tiny").unwrap();
        let tensor = dir.path().join(TENSOR_FILE);
        let bytes = fs::read(&tensor).unwrap();
        fs::write(&tensor, &bytes[..bytes.len() - 8]).unwrap();
        match read_canonical(dir.path()) {
            Err(Error::ShapeMismatch(_)) => {}
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_tensor_fails_checksum() {
        let dataset = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_canonical(&dataset, dir.path(), "tiny").unwrap();
        let tensor = dir.path().join(TENSOR_FILE);
        let mut bytes = fs::read(&tensor).unwrap();
        bytes[0] ^= 0xff;
        fs::write(&tensor, &bytes).unwrap();
        match read_canonical(dir.path()) {
            Err(Error::Checksum { .. }) => {}
            other => panic!("expected checksum failure, got {other:?}"),
        }
    }

    #[test]
    fn channel_count_mismatch_is_rejected() {
        let dataset = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_canonical(&dataset, dir.path(), "tiny").unwrap();
        let manifest_path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        // Claim three channels over the two-channel tensor.
        value["c"] = serde_json::json!(3);
        let spec = value["channels"][0].clone();
        value["channels"].as_array_mut().unwrap().push(spec);
        fs::write(&manifest_path, serde_json::to_string(&value).unwrap()).unwrap();
        match read_canonical(dir.path()) {
            Err(Error::ShapeMismatch(_)) => {}
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn invariants_are_enforced() {
        let mut d = tiny_dataset();
        d = d.with_values(vec![0.0; 4 * 2 * 10]).unwrap();
        assert!(WindowedDataset::new(
            vec![f32::NAN; 80],
            (4, 2, 10),
            d.labels.clone(),
            d.subjects.clone(),
            d.channels.clone(),
            5.0,
            2.0,
            2,
            NormalizationState::Raw,
        )
        .is_err());
        // L must equal rate * window_seconds exactly.
        assert!(WindowedDataset::new(
            vec![0.0; 80],
            (4, 2, 10),
            d.labels.clone(),
            d.subjects.clone(),
            d.channels.clone(),
            5.0,
            1.9,
            2,
            NormalizationState::Raw,
        )
        .is_err());
        // Labels must stay within [0, n_classes).
        assert!(WindowedDataset::new(
            vec![0.0; 80],
            (4, 2, 10),
            vec![0, 1, 2, 1],
            d.subjects.clone(),
            d.channels.clone(),
            5.0,
            2.0,
            2,
            NormalizationState::Raw,
        )
        .is_err());
    }

    #[test]
    fn class_counts_sum_to_n() {
        let d = tiny_dataset();
        assert_eq!(d.class_counts().iter().sum::<usize>(), d.n_windows());
    }
}
