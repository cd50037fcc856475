//! Policy artifacts on disk.
//!
//! Binary layout, all integers and reals little-endian:
//!
//! ```text
//! magic "LKPOLICY" | version u16 | kind u8 | mode u8 | level u8
//! | dim count u32 | dims u64... | seed u64 | config hash [u8; 32]
//! | converged u8 | value count u64 | values f64...
//! ```
//!
//! Tables are stored row-major (message, action); networks store the flat
//! parameter vector of [`Mlp`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::tabular::TabularPolicy;

const MAGIC: &[u8; 8] = b"LKPOLICY";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "2d")]
    Planar,
    #[serde(rename = "3d")]
    Spatial,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Planar => "2d",
            Mode::Spatial => "3d",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyData {
    Tabular(TabularPolicy),
    Network(Mlp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyArtifact {
    pub level: u8,
    pub mode: Mode,
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub converged: bool,
    pub data: PolicyData,
}

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("not a policy file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("corrupt policy file: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// `level{k}_{2d|3d}_{hash}.policy`, with the first 16 hex digits of the
/// configuration hash.
pub fn artifact_name(level: u8, mode: Mode, config_hash: &[u8; 32]) -> String {
    format!("level{level}_{}_{}.policy", mode.tag(), &hex(config_hash)[..16])
}

impl PolicyArtifact {
    fn dims_and_values(&self) -> (u8, Vec<u64>, &[f64]) {
        match &self.data {
            PolicyData::Tabular(p) => (0, vec![p.n_messages() as u64, p.n_actions() as u64], p.probs()),
            PolicyData::Network(n) => (1, n.sizes().iter().map(|s| *s as u64).collect(), n.params()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (kind, dims, values) = self.dims_and_values();
        let mut out = Vec::with_capacity(80 + 8 * (dims.len() + values.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(kind);
        out.push(match self.mode {
            Mode::Planar => 2,
            Mode::Spatial => 3,
        });
        out.push(self.level);
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        out.push(self.converged as u8);
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PersistError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(PersistError::BadMagic);
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != FORMAT_VERSION {
            return Err(PersistError::Version(version));
        }
        let kind = r.u8()?;
        let mode = match r.u8()? {
            2 => Mode::Planar,
            3 => Mode::Spatial,
            _ => return Err(PersistError::Corrupt("mode")),
        };
        let level = r.u8()?;
        let n_dims = u32::from_le_bytes(r.array()?) as usize;
        if n_dims > 64 {
            return Err(PersistError::Corrupt("dimension count"));
        }
        let dims: Vec<usize> = (0..n_dims).map(|_| r.u64().map(|d| d as usize)).collect::<Result<_, _>>()?;
        let seed = r.u64()?;
        let config_hash: [u8; 32] = r.array()?;
        let converged = r.u8()? != 0;
        let count = r.u64()? as usize;
        if count.checked_mul(8) != Some(bytes.len() - r.pos) {
            return Err(PersistError::Corrupt("value count"));
        }
        let values: Vec<f64> = (0..count).map(|_| r.array().map(f64::from_le_bytes)).collect::<Result<_, _>>()?;
        let data = match (kind, dims.as_slice()) {
            (0, &[m, a]) => PolicyData::Tabular(TabularPolicy::from_probs(m, a, values).ok_or(PersistError::Corrupt("table shape"))?),
            (1, sizes) => PolicyData::Network(Mlp::from_params(sizes, values).map_err(|_| PersistError::Corrupt("network shape"))?),
            _ => return Err(PersistError::Corrupt("kind")),
        };
        Ok(Self { level, mode, seed, config_hash, converged, data })
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Line-oriented text form. Reals use Rust's shortest round-trip
    /// formatting, so [`PolicyArtifact::from_text`] restores them exactly.
    pub fn to_text(&self) -> String {
        let (kind, dims, values) = self.dims_and_values();
        let mut s = String::new();
        let _ = writeln!(s, "format {FORMAT_VERSION}");
        let _ = writeln!(s, "kind {}", if kind == 0 { "table" } else { "network" });
        let _ = writeln!(s, "mode {}", self.mode.tag());
        let _ = writeln!(s, "level {}", self.level);
        let _ = writeln!(s, "dims {}", dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "));
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "config_hash {}", hex(&self.config_hash));
        let _ = writeln!(s, "converged {}", self.converged);
        let _ = writeln!(s, "values {}", values.len());
        for v in values {
            let _ = writeln!(s, "{v:?}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, PersistError> {
        let mut lines = text.lines();
        let mut field = |name: &'static str| -> Result<&str, PersistError> {
            let line = lines.next().ok_or(PersistError::Corrupt(name))?;
            line.strip_prefix(name).and_then(|r| r.strip_prefix(' ')).ok_or(PersistError::Corrupt(name))
        };
        let bad = PersistError::Corrupt;
        let version: u16 = field("format")?.parse().map_err(|_| bad("format"))?;
        if version != FORMAT_VERSION {
            return Err(PersistError::Version(version));
        }
        let kind = field("kind")?.to_string();
        let mode = match field("mode")? {
            "2d" => Mode::Planar,
            "3d" => Mode::Spatial,
            _ => return Err(bad("mode")),
        };
        let level = field("level")?.parse().map_err(|_| bad("level"))?;
        let dims: Vec<usize> = field("dims")?.split_whitespace().map(|d| d.parse().map_err(|_| bad("dims"))).collect::<Result<_, _>>()?;
        let seed = field("seed")?.parse().map_err(|_| bad("seed"))?;
        let hash_hex = field("config_hash")?;
        if hash_hex.len() != 64 {
            return Err(bad("config_hash"));
        }
        let mut config_hash = [0u8; 32];
        for (i, b) in config_hash.iter_mut().enumerate() {
            *b = u8::from_str_radix(&hash_hex[2 * i..2 * i + 2], 16).map_err(|_| bad("config_hash"))?;
        }
        let converged = field("converged")?.parse().map_err(|_| bad("converged"))?;
        let count: usize = field("values")?.parse().map_err(|_| bad("values"))?;
        let values: Vec<f64> = lines.map(|l| l.trim().parse().map_err(|_| bad("value"))).collect::<Result<_, _>>()?;
        if values.len() != count {
            return Err(bad("value count"));
        }
        let data = match (kind.as_str(), dims.as_slice()) {
            ("table", &[m, a]) => PolicyData::Tabular(TabularPolicy::from_probs(m, a, values).ok_or(bad("table shape"))?),
            ("network", sizes) => PolicyData::Network(Mlp::from_params(sizes, values).map_err(|_| bad("network shape"))?),
            _ => return Err(bad("kind")),
        };
        Ok(Self { level, mode, seed, config_hash, converged, data })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or(PersistError::Corrupt("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], PersistError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_artifact() -> PolicyArtifact {
        let probs: Vec<f64> = (0..12).map(|i| [0.1, 0.7, 0.2][i % 3] + if i % 3 == 0 { 1e-17 * i as f64 } else { 0.0 }).collect();
        PolicyArtifact {
            level: 1,
            mode: Mode::Planar,
            seed: 99,
            config_hash: [7; 32],
            converged: true,
            data: PolicyData::Tabular(TabularPolicy::from_probs(4, 3, probs).unwrap()),
        }
    }

    fn net_artifact() -> PolicyArtifact {
        PolicyArtifact {
            level: 2,
            mode: Mode::Spatial,
            seed: u64::MAX,
            config_hash: core::array::from_fn(|i| i as u8 * 7),
            converged: false,
            data: PolicyData::Network(Mlp::random(&[15, 20, 20, 1], 4).unwrap()),
        }
    }

    #[test]
    fn binary_round_trip() {
        for a in [table_artifact(), net_artifact()] {
            assert_eq!(PolicyArtifact::from_bytes(&a.to_bytes()).unwrap(), a);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        for a in [table_artifact(), net_artifact()] {
            let back = PolicyArtifact::from_text(&a.to_text()).unwrap();
            assert_eq!(back, a);
            assert_eq!(back.to_bytes(), a.to_bytes());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = net_artifact();
        let path = dir.path().join(artifact_name(a.level, a.mode, &a.config_hash));
        a.save(&path).unwrap();
        assert_eq!(PolicyArtifact::load(&path).unwrap(), a);
    }

    #[test]
    fn rejects_damage() {
        let mut b = table_artifact().to_bytes();
        assert!(matches!(PolicyArtifact::from_bytes(&b[..b.len() - 3]), Err(PersistError::Corrupt(_))));
        b[8] = 9;
        assert!(matches!(PolicyArtifact::from_bytes(&b), Err(PersistError::Version(_))));
        b[0] = b'X';
        assert!(matches!(PolicyArtifact::from_bytes(&b), Err(PersistError::BadMagic)));
    }

    #[test]
    fn names_follow_convention() {
        assert_eq!(artifact_name(1, Mode::Planar, &[0xab; 32]), "level1_2d_abababababababab.policy");
    }
}
