//! Dataset files.
//!
//! Two encodings share one header:
//!
//! * `json`: a single JSON object `{"header": {...}, "x": [...], "s": [...]}`
//!   where `x` and `s` are flat arrays of interleaved real/imaginary parts.
//! * `bin`: the header as one line of JSON terminated by `\n`, followed by
//!   little-endian `f64` values: `x` (`N x d`, row-major, interleaved re/im)
//!   and then `s` (`N`, interleaved re/im).

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, MixtureConfig};
use crate::error::{Error, Result};
use crate::ggd::GgdParams;
use crate::model::{MixingPath, SeparatingVector};
use crate::numerics::C64;

pub const FORMAT_VERSION: u32 = 1;

const LAYOUT: &str = "x: N*d complex row-major (samples x sensors), then s: N complex; complex = (re, im) f64";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Json,
    Binary,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(DatasetFormat::Json),
            "bin" | "binary" => Ok(DatasetFormat::Binary),
            other => Err(Error::InvalidConfig(format!("unknown dataset format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub blocks: usize,
    #[serde(rename = "N_b")]
    pub nb: usize,
    pub seed: u64,
    pub ggd: GgdParams,
    pub tau: f64,
    pub path: MixingPath,
    pub separator: SeparatingVector,
    pub layout: String,
}

impl DatasetHeader {
    pub fn from_config(cfg: &MixtureConfig) -> Result<Self> {
        Ok(Self {
            format_version: FORMAT_VERSION,
            d: cfg.d,
            n: cfg.n,
            blocks: cfg.blocks(),
            nb: cfg.samples_per_block()?,
            seed: cfg.seed,
            ggd: cfg.ggd,
            tau: cfg.tau,
            path: cfg.path.clone(),
            separator: cfg.separator.clone(),
            layout: LAYOUT.to_string(),
        })
    }

    pub fn to_config(&self) -> Result<MixtureConfig> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {}", self.format_version)));
        }
        let cfg = MixtureConfig::new(self.n, self.ggd, self.tau, self.path.clone(), self.separator.clone(), self.seed)?;
        if cfg.d != self.d || cfg.blocks() != self.blocks || cfg.samples_per_block()? != self.nb {
            return Err(Error::Format("header dimensions are inconsistent".into()));
        }
        Ok(cfg)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonFile {
    header: DatasetHeader,
    x: Vec<f64>,
    s: Vec<f64>,
}

fn interleave(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(v: &[f64]) -> Vec<C64> {
    v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

fn assemble(header: DatasetHeader, x: Vec<C64>, s: Vec<C64>) -> Result<(MixtureConfig, Dataset)> {
    let cfg = header.to_config()?;
    if x.len() != cfg.n * cfg.d || s.len() != cfg.n {
        return Err(Error::Format(format!(
            "payload has {} observations and {} SOI samples, header says N = {}, d = {}",
            x.len(),
            s.len(),
            cfg.n,
            cfg.d
        )));
    }
    let nb = cfg.samples_per_block()?;
    let block_index = (0..cfg.n).map(|n| n / nb + 1).collect();
    let data = Dataset { d: cfg.d, blocks: cfg.blocks(), x, s, block_index };
    Ok((cfg, data))
}

pub fn encode(cfg: &MixtureConfig, data: &Dataset, format: DatasetFormat) -> Result<Vec<u8>> {
    let header = DatasetHeader::from_config(cfg)?;
    match format {
        DatasetFormat::Json => {
            let file = JsonFile { header, x: interleave(&data.x), s: interleave(&data.s) };
            let mut out = serde_json::to_vec(&file)?;
            out.push(b'\n');
            Ok(out)
        }
        DatasetFormat::Binary => {
            let mut out = serde_json::to_vec(&header)?;
            out.push(b'\n');
            out.reserve(16 * (data.x.len() + data.s.len()));
            for z in data.x.iter().chain(&data.s) {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
            Ok(out)
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<(MixtureConfig, Dataset)> {
    let newline = bytes.iter().position(|&b| b == b'\n');
    if let Some(pos) = newline {
        if let Ok(header) = serde_json::from_slice::<DatasetHeader>(&bytes[..pos]) {
            let payload = &bytes[pos + 1..];
            if payload.len() % 8 != 0 {
                return Err(Error::Format("binary payload is not a whole number of f64 values".into()));
            }
            let floats: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            let nx = 2 * header.n * header.d;
            if floats.len() != nx + 2 * header.n {
                return Err(Error::Format(format!(
                    "binary payload holds {} values, expected {}",
                    floats.len(),
                    nx + 2 * header.n
                )));
            }
            let x = deinterleave(&floats[..nx]);
            let s = deinterleave(&floats[nx..]);
            return assemble(header, x, s);
        }
    }
    let file: JsonFile = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("not a dataset file: {e}")))?;
    if file.x.len() % 2 != 0 || file.s.len() % 2 != 0 {
        return Err(Error::Format("odd number of interleaved values".into()));
    }
    assemble(file.header, deinterleave(&file.x), deinterleave(&file.s))
}

pub fn write_dataset(path: &Path, cfg: &MixtureConfig, data: &Dataset, format: DatasetFormat) -> Result<()> {
    fs::write(path, encode(cfg, data, format)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(MixtureConfig, Dataset)> {
    decode(&fs::read(path)?)
}
