//! Vectorizer checkpoint: `"VCF1"`, a `u32` LE length, the config text, then
//! the parameter checkpoint.

use std::path::Path;

use super::config::VectorizerConfig;
use super::model::VectorizerModel;
use crate::error::{Result, VenomError};
use crate::nn::checkpoint::{decode_checkpoint, encode_checkpoint, CheckpointHeader, Reader};

pub const MAGIC: &[u8; 4] = b"VCF1";

pub fn encode_model(model: &VectorizerModel) -> Vec<u8> {
    let c = model.config();
    let text = c.to_text();
    let header = CheckpointHeader {
        k: c.k as u32,
        layers: c.n_layers as u32,
        heads: c.n_heads as u32,
        width: c.d_model as u32,
    };
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend(encode_checkpoint(&header, model.params()));
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<VectorizerModel> {
    let mut r = Reader::new(bytes, "vectorizer checkpoint");
    if r.take(4)? != MAGIC {
        return Err(VenomError::parse("vectorizer checkpoint", "bad magic"));
    }
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len)?)
        .map_err(|_| VenomError::parse("vectorizer checkpoint", "config is not UTF-8"))?;
    let config = VectorizerConfig::from_text(text)
        .map_err(|e| VenomError::parse("vectorizer checkpoint", e.to_string()))?;
    let (header, params) = decode_checkpoint(r.take(r.remaining())?)?;
    let expect = (config.k, config.n_layers, config.n_heads, config.d_model);
    let found = (
        header.k as usize,
        header.layers as usize,
        header.heads as usize,
        header.width as usize,
    );
    if expect != found {
        return Err(VenomError::parse(
            "vectorizer checkpoint",
            format!("header {found:?} disagrees with config {expect:?}"),
        ));
    }
    VectorizerModel::from_parts(config, params)
        .map_err(|e| VenomError::parse("vectorizer checkpoint", e.to_string()))
}

pub fn save_model(model: &VectorizerModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| VenomError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<VectorizerModel> {
    let bytes = std::fs::read(path).map_err(|e| VenomError::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> VectorizerModel {
        VectorizerModel::init(VectorizerConfig {
            k: 3,
            n_layers: 1,
            n_heads: 1,
            d_model: 4,
            ffn_width: 4,
            max_rows: 3,
            max_cols: 2,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_keeps_version() {
        let m = model();
        let back = decode_model(&encode_model(&m)).unwrap();
        assert_eq!(back.version(), m.version());
        assert_eq!(back, m);
    }

    #[test]
    fn corrupt_inputs_are_parse_errors() {
        let bytes = encode_model(&model());
        assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode_model(&bytes[..10]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_model(&wrong).is_err());
    }
}
