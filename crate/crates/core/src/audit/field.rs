//! Gridded solver output and the SFD1 dump format.
//!
//! An SFD1 file is one ASCII header line
//! `SFD1 shape=<n1,n2,...> spacing=<h1,...> dtype=f64 order=row-major`
//! followed by exactly `n1*n2*...` little-endian binary64 values. A series
//! manifest is a text file of `<time> <path>` lines, paths relative to the
//! manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("values length {len} does not match shape {shape:?}")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
    #[error("spacing has {spacing} axes but shape has {shape}")]
    SpacingMismatch { shape: usize, spacing: usize },
    #[error("series times must be strictly increasing (at frame {0})")]
    TimesNotIncreasing(usize),
    #[error("series frame {0} differs in shape or spacing from frame 0")]
    FrameMismatch(usize),
    #[error("series needs at least one frame and one time per frame")]
    EmptySeries,
    #[error("malformed SFD1 data: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A field on a tensor-product grid, values in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionField {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl SolutionField {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, values: Vec<f64>) -> Result<Self, FieldError> {
        if shape.iter().product::<usize>() != values.len() {
            return Err(FieldError::ShapeMismatch { shape, len: values.len() });
        }
        if spacing.len() != shape.len() {
            return Err(FieldError::SpacingMismatch { shape: shape.len(), spacing: spacing.len() });
        }
        Ok(SolutionField { shape, spacing, values, metadata: BTreeMap::new() })
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for k in (0..self.shape.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn same_grid(&self, other: &SolutionField) -> bool {
        self.shape == other.shape && self.spacing == other.spacing
    }

    pub fn to_sfd1(&self) -> Vec<u8> {
        let join = |v: Vec<String>| v.join(",");
        let header = format!(
            "SFD1 shape={} spacing={} dtype=f64 order=row-major\n",
            join(self.shape.iter().map(|n| n.to_string()).collect()),
            join(self.spacing.iter().map(|h| format!("{h:?}")).collect()),
        );
        let mut out = header.into_bytes();
        out.reserve(self.values.len() * 8);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_sfd1(bytes: &[u8]) -> Result<Self, FieldError> {
        let bad = |m: &str| FieldError::Format(m.to_string());
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII"))?;
        let mut words = header.split_ascii_whitespace();
        if words.next() != Some("SFD1") {
            return Err(bad("header must start with `SFD1`"));
        }
        let mut fields = BTreeMap::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| bad("header attributes must be key=value"))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| FieldError::Format(format!("header lacks `{k}`")));
        if get("dtype")? != "f64" {
            return Err(bad("only dtype=f64 is supported"));
        }
        if get("order")? != "row-major" {
            return Err(bad("only order=row-major is supported"));
        }
        let shape = get("shape")?
            .split(',')
            .map(|s| s.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("shape must be comma-separated integers"))?;
        let spacing = get("spacing")?
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("spacing must be comma-separated reals"))?;
        let payload = &bytes[nl + 1..];
        let n: usize = shape.iter().product();
        if payload.len() != n * 8 {
            return Err(FieldError::Format(format!(
                "payload has {} bytes, shape needs {}",
                payload.len(),
                n * 8
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        SolutionField::new(shape, spacing, values)
    }

    pub fn write_sfd1(&self, path: &Path) -> Result<(), FieldError> {
        fs::write(path, self.to_sfd1()).map_err(|source| FieldError::Io { path: path.into(), source })
    }

    pub fn read_sfd1(path: &Path) -> Result<Self, FieldError> {
        let bytes = fs::read(path).map_err(|source| FieldError::Io { path: path.into(), source })?;
        Self::from_sfd1(&bytes)
    }
}

/// Frames of one field over strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSeries {
    pub times: Vec<f64>,
    pub frames: Vec<SolutionField>,
}

impl SolutionSeries {
    pub fn new(times: Vec<f64>, frames: Vec<SolutionField>) -> Result<Self, FieldError> {
        if frames.is_empty() || times.len() != frames.len() {
            return Err(FieldError::EmptySeries);
        }
        if let Some(i) = (1..times.len()).find(|&i| !(times[i] > times[i - 1])) {
            return Err(FieldError::TimesNotIncreasing(i));
        }
        if let Some(i) = (1..frames.len()).find(|&i| !frames[i].same_grid(&frames[0])) {
            return Err(FieldError::FrameMismatch(i));
        }
        Ok(SolutionSeries { times, frames })
    }

    pub fn single(field: SolutionField) -> Self {
        SolutionSeries { times: vec![0.0], frames: vec![field] }
    }

    pub fn last(&self) -> &SolutionField {
        self.frames.last().expect("series has at least one frame")
    }

    /// Writes each frame as `<stem>_<k>.sfd` next to a `<stem>.series`
    /// manifest and returns the manifest path.
    pub fn write_manifest(&self, dir: &Path, stem: &str) -> Result<PathBuf, FieldError> {
        let mut manifest = String::new();
        for (k, (t, f)) in self.times.iter().zip(&self.frames).enumerate() {
            let name = format!("{stem}_{k:05}.sfd");
            f.write_sfd1(&dir.join(&name))?;
            manifest.push_str(&format!("{t:?} {name}\n"));
        }
        let path = dir.join(format!("{stem}.series"));
        fs::write(&path, manifest).map_err(|source| FieldError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn read_manifest(path: &Path) -> Result<Self, FieldError> {
        let text = fs::read_to_string(path).map_err(|source| FieldError::Io { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut times = Vec::new();
        let mut frames = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (t, p) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| FieldError::Format(format!("manifest line `{line}` is not `<time> <path>`")))?;
            times.push(t.parse().map_err(|_| FieldError::Format(format!("bad time `{t}`")))?);
            frames.push(SolutionField::read_sfd1(&base.join(p.trim()))?);
        }
        SolutionSeries::new(times, frames)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sfd1_round_trip_is_bit_exact() {
        let f = SolutionField::new(vec![2, 3], vec![0.5, 0.1], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, 0.1, -7.25]).unwrap();
        let bytes = f.to_sfd1();
        assert!(bytes.starts_with(b"SFD1 shape=2,3 spacing=0.5,0.1 dtype=f64 order=row-major\n"));
        let g = SolutionField::from_sfd1(&bytes).unwrap();
        assert_eq!(
            f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            g.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(g.shape, f.shape);
    }

    #[test]
    fn sfd1_rejects_truncated_payload_and_bad_dtype() {
        let f = SolutionField::new(vec![3], vec![1.0], vec![1.0, 2.0, 3.0]).unwrap();
        let bytes = f.to_sfd1();
        assert!(SolutionField::from_sfd1(&bytes[..bytes.len() - 1]).is_err());
        let text = String::from_utf8_lossy(&bytes).replace("dtype=f64", "dtype=f32");
        assert!(SolutionField::from_sfd1(text.as_bytes()).is_err());
    }

    #[test]
    fn shape_and_series_invariants() {
        assert!(SolutionField::new(vec![2, 2], vec![1.0, 1.0], vec![0.0; 3]).is_err());
        let f = SolutionField::new(vec![2], vec![1.0], vec![0.0; 2]).unwrap();
        assert!(matches!(
            SolutionSeries::new(vec![0.0, 0.0], vec![f.clone(), f.clone()]),
            Err(FieldError::TimesNotIncreasing(1))
        ));
        let g = SolutionField::new(vec![3], vec![1.0], vec![0.0; 3]).unwrap();
        assert!(matches!(SolutionSeries::new(vec![0.0, 1.0], vec![f, g]), Err(FieldError::FrameMismatch(1))));
        assert_eq!(SolutionField::new(vec![2, 3, 4], vec![1.0; 3], vec![0.0; 24]).unwrap().strides(), vec![12, 4, 1]);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = std::env::temp_dir().join(format!("sfd1-manifest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let frames: Vec<_> = (0..3)
            .map(|k| SolutionField::new(vec![2], vec![0.5], vec![k as f64, 1.0]).unwrap())
            .collect();
        let s = SolutionSeries::new(vec![0.0, 0.5, 1.0], frames).unwrap();
        let path = s.write_manifest(&dir, "run").unwrap();
        assert_eq!(SolutionSeries::read_manifest(&path).unwrap(), s);
        fs::remove_dir_all(&dir).unwrap();
    }
}
