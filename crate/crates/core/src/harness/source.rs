//! Source signals: synthetic generators, binary PGM/PPM and raw tensors.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matio::{load_matrix, save_matrix, RawMatrix};
use crate::nle::GaussMixture;
use crate::rng::seeded;
use crate::vecops::all_finite;

/// Row-major `height × width × channels` samples, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSignal {
    pub values: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl SourceSignal {
    pub fn new(values: Vec<f64>, height: usize, width: usize, channels: usize) -> Result<Self> {
        if height * width * channels != values.len() || values.is_empty() {
            return Err(Error::InvalidDimension(format!(
                "{} values for geometry {height}x{width}x{channels}",
                values.len()
            )));
        }
        if !all_finite(&values) {
            return Err(Error::InvalidParameter("source has non-finite samples".into()));
        }
        Ok(SourceSignal {
            values,
            height,
            width,
            channels,
        })
    }

    /// A 1-D signal.
    pub fn flat(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, 1, n, 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_image(&self) -> bool {
        self.height > 1
    }
}

fn default_mean() -> f64 {
    0.5
}

fn default_std() -> f64 {
    0.25
}

fn default_weights() -> Vec<f64> {
    vec![0.3, 0.4, 0.3]
}

fn default_means() -> Vec<f64> {
    vec![0.15, 0.5, 0.85]
}

fn default_stds() -> Vec<f64> {
    vec![0.05; 3]
}

fn default_segments() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    /// i.i.d. `N(mean, std²)`.
    Gaussian {
        n: usize,
        #[serde(default = "default_mean")]
        mean: f64,
        #[serde(default = "default_std")]
        std: f64,
        #[serde(default)]
        seed: u64,
    },
    /// i.i.d. Gaussian mixture.
    Gmm {
        n: usize,
        #[serde(default = "default_weights")]
        weights: Vec<f64>,
        #[serde(default = "default_means")]
        means: Vec<f64>,
        #[serde(default = "default_stds")]
        stds: Vec<f64>,
        #[serde(default)]
        seed: u64,
    },
    /// Random breakpoints with uniform `[0, 1]` levels.
    Piecewise {
        n: usize,
        #[serde(default = "default_segments")]
        segments: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Binary PGM (P5) or PPM (P6), 8-bit.
    Image { path: PathBuf },
    /// `OAMPMAT1` matrix read as a one-channel `rows × cols` image.
    Tensor { path: PathBuf },
}

impl SourceSpec {
    /// The i.i.d. distribution behind a synthetic source, if it has one.
    pub fn distribution(&self) -> Option<GaussMixture> {
        match self {
            SourceSpec::Gaussian { mean, std, .. } => Some(GaussMixture::gaussian(*mean, std * std)),
            SourceSpec::Gmm {
                weights,
                means,
                stds,
                ..
            } => GaussMixture::new(
                weights.clone(),
                means.clone(),
                stds.iter().map(|s| s * s).collect(),
            )
            .ok(),
            _ => None,
        }
    }

    /// Same spec with the seed offset by `trial`. File sources are unchanged.
    pub fn for_trial(&self, trial: u64) -> SourceSpec {
        let mut s = self.clone();
        match &mut s {
            SourceSpec::Gaussian { seed, .. }
            | SourceSpec::Gmm { seed, .. }
            | SourceSpec::Piecewise { seed, .. } => *seed = seed.wrapping_add(trial),
            _ => {}
        }
        s
    }
}

pub fn load_source(spec: &SourceSpec) -> Result<SourceSignal> {
    match spec {
        SourceSpec::Gaussian { n, seed, .. } | SourceSpec::Gmm { n, seed, .. } => {
            if *n == 0 {
                return Err(Error::InvalidDimension("source length must be >= 1".into()));
            }
            let dist = spec
                .distribution()
                .ok_or_else(|| Error::InvalidParameter("invalid mixture parameters".into()))?;
            SourceSignal::flat(dist.sample(*n, &mut seeded(*seed)))
        }
        SourceSpec::Piecewise { n, segments, seed } => piecewise(*n, *segments, *seed),
        SourceSpec::Image { path } => load_netpbm(path),
        SourceSpec::Tensor { path } => {
            let m = load_matrix(path)?;
            SourceSignal::new(m.data, m.rows, m.cols, 1)
        }
    }
}

fn piecewise(n: usize, segments: usize, seed: u64) -> Result<SourceSignal> {
    if n == 0 || segments == 0 || segments > n {
        return Err(Error::InvalidParameter(format!(
            "piecewise source needs 1 <= segments <= n, got {segments} and {n}"
        )));
    }
    let mut rng = seeded(seed);
    let mut cuts: Vec<usize> = (1..n).collect();
    crate::rm::fisher_yates(&mut cuts, segments - 1, &mut rng);
    let mut bounds: Vec<usize> = cuts[..segments - 1].to_vec();
    bounds.sort_unstable();
    bounds.push(n);
    let mut values = Vec::with_capacity(n);
    for &end in &bounds {
        let level: f64 = rng.random();
        values.resize(end, level);
    }
    SourceSignal::flat(values)
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    loop {
        let mut b = [0u8; 1];
        if r.read(&mut b)? == 0 {
            break;
        }
        match b[0] {
            b'#' if tok.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            c => tok.push(c),
        }
    }
    if tok.is_empty() {
        return Err(Error::Format("truncated image header".into()));
    }
    String::from_utf8(tok).map_err(|_| Error::Format("non-ascii image header".into()))
}

fn header_number<R: BufRead>(r: &mut R, what: &str) -> Result<usize> {
    let t = header_token(r)?;
    t.parse()
        .map_err(|_| Error::Format(format!("bad {what} {t:?} in image header")))
}

/// Reads an 8-bit binary PGM or PPM, scaling samples by `1/maxval`.
pub fn read_netpbm<R: Read>(reader: R) -> Result<SourceSignal> {
    let mut r = BufReader::new(reader);
    let channels = match header_token(&mut r)?.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("unsupported image magic {other:?}"))),
    };
    let width = header_number(&mut r, "width")?;
    let height = header_number(&mut r, "height")?;
    let maxval = header_number(&mut r, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported bit depth (maxval {maxval})")));
    }
    let mut bytes = vec![0u8; width * height * channels];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated image data".into()))?;
    let values = bytes.iter().map(|&b| b as f64 / maxval as f64).collect();
    SourceSignal::new(values, height, width, channels)
}

pub fn load_netpbm(path: &Path) -> Result<SourceSignal> {
    read_netpbm(std::fs::File::open(path)?)
}

/// Writes an 8-bit PGM (one channel) or PPM (three channels); samples are
/// clipped to `[0, 1]` and rounded.
pub fn write_netpbm<W: Write>(w: &mut W, img: &SourceSignal) -> Result<()> {
    let magic = match img.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::InvalidParameter(format!("cannot write {c}-channel image"))),
    };
    write!(w, "{magic}\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img
        .values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn save_netpbm(path: &Path, img: &SourceSignal) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_netpbm(&mut f, img)?;
    f.flush()?;
    Ok(())
}

/// Writes the samples as a `height × (width·channels)` `OAMPMAT1` matrix.
pub fn save_tensor(path: &Path, sig: &SourceSignal) -> Result<()> {
    save_matrix(
        path,
        &RawMatrix {
            rows: sig.height,
            cols: sig.width * sig.channels,
            data: sig.values.clone(),
        },
    )
}
