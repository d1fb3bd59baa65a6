//! Weight-vector serialization.
//!
//! File layout: a little-endian `u64` header length, the JSON header (layer
//! specs plus the init seed), then the flat parameter vector as little-endian
//! `f64`s.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{param_count, LayerSpec, Network};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightHeader {
    pub layers: Vec<LayerSpec>,
    pub seed: Option<u64>,
}

pub fn save_weights(path: &Path, net: &Network, seed: Option<u64>) -> Result<()> {
    let header = WeightHeader {
        layers: net.layers().to_vec(),
        seed,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for v in net.weights() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<(Network, Option<u64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut len_buf = [0u8; 8];
    r.read_exact(&mut len_buf)?;
    let header_len = u64::from_le_bytes(len_buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: WeightHeader = serde_json::from_slice(&header_bytes)?;

    let n = param_count(&header.layers);
    let mut weights = vec![0.0f64; n];
    let mut buf = [0u8; 8];
    for w in &mut weights {
        r.read_exact(&mut buf)?;
        *w = f64::from_le_bytes(buf);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint(format!(
            "trailing bytes in weight file {}",
            path.display()
        )));
    }
    let net = Network::from_flat(header.layers, weights)?;
    Ok((net, header.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    #[test]
    fn weights_roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.weights.bin");
        let net = Network::uniform_init(
            Network::mlp(&[4, 8, 2], Activation::Tanh, Activation::Linear).unwrap(),
            99,
        )
        .unwrap();
        save_weights(&path, &net, Some(99)).unwrap();
        let (loaded, seed) = load_weights(&path).unwrap();
        assert_eq!(seed, Some(99));
        assert_eq!(loaded.layers(), net.layers());
        assert_eq!(loaded.weights(), net.weights());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        let net = Network::uniform_init(
            Network::mlp(&[2, 3, 1], Activation::Tanh, Activation::Linear).unwrap(),
            1,
        )
        .unwrap();
        save_weights(&path, &net, None).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(load_weights(&path).is_err());
    }
}
