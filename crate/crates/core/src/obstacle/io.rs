//! Environment files: a magic line, one JSON header line, then the centers
//! as little-endian `f64` triples (or d-tuples).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, PointCloud};
use crate::obstacle::Environment;

pub const ENV_MAGIC: &str = "SBMO-ENV";
pub const ENV_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentHeader {
    pub version: u32,
    pub dim: usize,
    pub eps: f64,
    pub region: Aabb,
    pub count: usize,
    /// Hex SHA-256 of the payload bytes.
    pub sha256: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

fn payload(env: &Environment) -> Vec<u8> {
    let mut out = Vec::with_capacity(env.centers().coords.len() * 8);
    for v in &env.centers().coords {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Environment {
    /// SHA-256 of the serialized centers.
    pub fn content_hash(&self) -> String {
        hex_digest(&payload(self))
    }
}

pub fn write_environment<W: Write>(
    env: &Environment,
    meta: BTreeMap<String, String>,
    mut w: W,
) -> Result<EnvironmentHeader> {
    let bytes = payload(env);
    let header = EnvironmentHeader {
        version: ENV_FORMAT_VERSION,
        dim: env.dim(),
        eps: env.eps(),
        region: env.gen_region().clone(),
        count: env.len(),
        sha256: hex_digest(&bytes),
        meta,
    };
    writeln!(w, "{ENV_MAGIC}")?;
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(header)
}

pub fn read_environment<R: Read>(r: R) -> Result<(Environment, EnvironmentHeader)> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != ENV_MAGIC {
        return Err(Error::Format(format!("bad magic line {:?}", line.trim_end())));
    }
    line.clear();
    r.read_line(&mut line)?;
    let header: EnvironmentHeader = serde_json::from_str(line.trim_end())?;
    if header.version != ENV_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported environment version {}", header.version)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.count * header.dim * 8 {
        return Err(Error::Format(format!(
            "payload has {} bytes, header promises {} centers in d = {}",
            bytes.len(),
            header.count,
            header.dim
        )));
    }
    if hex_digest(&bytes) != header.sha256 {
        return Err(Error::Format("payload hash mismatch".into()));
    }
    let coords = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let centers = PointCloud::from_coords(header.dim, coords)?;
    let env = Environment::from_centers(header.eps, header.region.clone(), centers)?;
    Ok((env, header))
}

impl Environment {
    pub fn save(&self, path: &Path, meta: BTreeMap<String, String>) -> Result<EnvironmentHeader> {
        write_environment(self, meta, BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<(Environment, EnvironmentHeader)> {
        read_environment(File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::generate_environment;
    use crate::rng::RandomSource;
    use crate::stochastic::IntensityField;

    #[test]
    fn roundtrip_preserves_centers_and_hash() {
        let mut rng = RandomSource::new(4, 4);
        let region = Aabb::cube(&[0.0; 3], 1.0).unwrap();
        let c = IntensityField::constant(1.0).unwrap();
        let env = generate_environment(&mut rng, 0.05, &c, &region, 3, None).unwrap();
        let mut buf = Vec::new();
        let mut meta = BTreeMap::new();
        meta.insert("seed".into(), "4".into());
        let h = write_environment(&env, meta, &mut buf).unwrap();
        let (back, h2) = read_environment(&buf[..]).unwrap();
        assert_eq!(h, h2);
        assert_eq!(back.centers(), env.centers());
        assert_eq!(back.content_hash(), env.content_hash());
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let mut rng = RandomSource::new(4, 5);
        let region = Aabb::cube(&[0.0; 2], 1.0).unwrap();
        let c = IntensityField::constant(3.0).unwrap();
        let env = generate_environment(&mut rng, 0.05, &c, &region, 2, None).unwrap();
        assert!(!env.is_empty());
        let mut buf = Vec::new();
        write_environment(&env, BTreeMap::new(), &mut buf).unwrap();
        let n = buf.len();
        buf[n - 1] ^= 0x55;
        assert!(matches!(read_environment(&buf[..]), Err(Error::Format(_))));
        assert!(read_environment(&b"nope\n{}\n"[..]).is_err());
    }
}
