//! Binary checkpoints.
//!
//! One text header line
//!
//! ```text
//! GAALCKPT v1 <shared|joint> img=<d0,d1,...> tab=<d0,d1,...> head=<in,classes>
//! ```
//!
//! followed by little-endian `f64` values for every tensor in declaration
//! order: image encoder layers (weight row-major, then bias), tabular encoder
//! layers, head weight, head bias.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::TrainedModel;
use crate::model::{Dense, JointState, MlpParams, ModelState, SharedClassifier};
use crate::numerics::Matrix;

const MAGIC: &str = "GAALCKPT";
const VERSION: &str = "v1";

fn join(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn parts(model: &TrainedModel) -> (&'static str, &MlpParams, &MlpParams, &SharedClassifier) {
    match model {
        TrainedModel::Shared(s) => ("shared", &s.encoder_image, &s.encoder_tabular, &s.head),
        TrainedModel::Joint(j) => ("joint", &j.encoder_image, &j.encoder_tabular, &j.head),
    }
}

pub fn to_bytes(model: &TrainedModel) -> Vec<u8> {
    let (kind, img, tab, head) = parts(model);
    let header = format!(
        "{MAGIC} {VERSION} {kind} img={} tab={} head={},{}\n",
        join(&img.dims()),
        join(&tab.dims()),
        head.latent_dim(),
        head.classes()
    );
    let mut out = header.into_bytes();
    for v in img.params().chain(tab.params()).chain(head.flatten().iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_dims(token: &str, key: &str) -> Result<Vec<usize>> {
    let value = token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::Checkpoint(format!("expected {key}=..., found {token:?}")))?;
    value
        .split(',')
        .map(|d| {
            d.parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::Checkpoint(format!("bad dimension {d:?} in {token:?}")))
        })
        .collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        let end = self.pos + n * 8;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated parameter data".into()));
        }
        let vals = self.bytes[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        self.pos = end;
        Ok(vals)
    }

    fn mlp(&mut self, dims: &[usize]) -> Result<MlpParams> {
        if dims.len() < 2 {
            return Err(Error::Checkpoint(format!("encoder needs at least two widths, got {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let weight = Matrix::new(w[1], w[0], self.take(w[0] * w[1])?)?;
                Dense::new(weight, self.take(w[1])?)
            })
            .collect::<Result<Vec<_>>>()?;
        MlpParams::new(layers)
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 6 || tokens[0] != MAGIC {
        return Err(Error::Checkpoint(format!("not a checkpoint header: {header:?}")));
    }
    if tokens[1] != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", tokens[1])));
    }
    let img = parse_dims(tokens[3], "img")?;
    let tab = parse_dims(tokens[4], "tab")?;
    let head_dims = parse_dims(tokens[5], "head")?;
    if head_dims.len() != 2 {
        return Err(Error::Checkpoint("head needs exactly two dims".into()));
    }
    let mut r = Reader {
        bytes: &bytes[nl + 1..],
        pos: 0,
    };
    let encoder_image = r.mlp(&img)?;
    let encoder_tabular = r.mlp(&tab)?;
    let (latent, classes) = (head_dims[0], head_dims[1]);
    let head = SharedClassifier::new(Matrix::new(classes, latent, r.take(latent * classes)?)?, r.take(classes)?)?;
    if r.pos != r.bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after parameters",
            r.bytes.len() - r.pos
        )));
    }
    match tokens[2] {
        "shared" => Ok(TrainedModel::Shared(
            ModelState::new(encoder_image, encoder_tabular, head).map_err(|e| Error::Checkpoint(e.to_string()))?,
        )),
        "joint" => {
            if encoder_image.output_dim() + encoder_tabular.output_dim() != latent
                || encoder_image.output_dim() != encoder_tabular.output_dim()
            {
                return Err(Error::Checkpoint("joint head width must be twice the latent width".into()));
            }
            Ok(TrainedModel::Joint(JointState {
                encoder_image,
                encoder_tabular,
                head,
            }))
        }
        other => Err(Error::Checkpoint(format!("unknown model kind {other:?}"))),
    }
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_joint, init_params, ModelDims};
    use crate::numerics::RngStream;

    fn dims() -> ModelDims {
        ModelDims {
            hidden: vec![5, 4],
            latent: 3,
            ..ModelDims::new(6, 2, 3)
        }
    }

    #[test]
    fn header_and_size() {
        let m = TrainedModel::Shared(init_params(&dims(), &RngStream::new(1, 0)).unwrap());
        let bytes = to_bytes(&m);
        let header = "GAALCKPT v1 shared img=6,5,4,3 tab=2,5,4,3 head=3,3\n";
        assert!(bytes.starts_with(header.as_bytes()));
        let n_params = (6 * 5 + 5) + (5 * 4 + 4) + (4 * 3 + 3) + (2 * 5 + 5) + (5 * 4 + 4) + (4 * 3 + 3) + (3 * 3 + 3);
        assert_eq!(bytes.len(), header.len() + 8 * n_params);
    }

    #[test]
    fn round_trips_both_kinds() {
        let shared = TrainedModel::Shared(init_params(&dims(), &RngStream::new(1, 0)).unwrap());
        let joint = TrainedModel::Joint(init_joint(&dims(), &RngStream::new(2, 0)).unwrap());
        for m in [shared, joint] {
            assert_eq!(from_bytes(&to_bytes(&m)).unwrap(), m);
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = TrainedModel::Shared(init_params(&dims(), &RngStream::new(1, 0)).unwrap());
        let bytes = to_bytes(&m);
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[9] = b'2';
        assert!(from_bytes(&bad).is_err());
        assert!(from_bytes(b"hello").is_err());
    }
}
