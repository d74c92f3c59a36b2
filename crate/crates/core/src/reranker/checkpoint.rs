//! Versioned binary checkpoint.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "CRRK" | u32 version
//! u32 h.input | u32 h.hidden | u32 h.output | u32 g.input | u32 g.hidden
//! u8 geometry | u8 flags (bit 0 taxonomy, bit 1 section) | f64 margin
//! f64 tensors: h.w1 h.b1 h.w2 h.b2 g.w1 g.b1 g.w2 g.b2
//! ```

use std::fs;
use std::path::Path;

use super::RerankerModel;
use crate::error::{Error, Result};
use crate::hypermath::{GeometryMode, TwoLayerNet};
use crate::prefetch::ByteCursor;

const MAGIC: &[u8; 4] = b"CRRK";
pub const CHECKPOINT_VERSION: u32 = 1;

const FLAG_TAXONOMY: u8 = 1;
const FLAG_SECTION: u8 = 2;

pub fn encode_checkpoint(model: &RerankerModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + 8 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for d in [model.h.input, model.h.hidden, model.h.output, model.g.input, model.g.hidden] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(model.geometry.code());
    let mut flags = 0;
    if model.use_taxonomy {
        flags |= FLAG_TAXONOMY;
    }
    if model.use_section {
        flags |= FLAG_SECTION;
    }
    out.push(flags);
    out.extend_from_slice(&model.margin.to_le_bytes());
    for t in model.tensors() {
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(model: &RerankerModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<RerankerModel> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&buf).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

fn decode_checkpoint(buf: &[u8]) -> std::result::Result<RerankerModel, String> {
    let mut cur = ByteCursor::new(buf);
    let short = || "truncated checkpoint".to_string();
    if cur.take(4).ok_or_else(short)? != MAGIC {
        return Err("not a reranker checkpoint".into());
    }
    let version = cur.u32().ok_or_else(short)?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = cur.u32().ok_or_else(short)? as usize;
    }
    let [h_in, h_hid, h_out, g_in, g_hid] = dims;
    if dims.contains(&0) || g_in < 2 {
        return Err(format!("invalid dimensions {dims:?}"));
    }
    let code = cur.u8().ok_or_else(short)?;
    let geometry = GeometryMode::from_code(code).ok_or_else(|| format!("unknown geometry code {code}"))?;
    let flags = cur.u8().ok_or_else(short)?;
    if flags & !(FLAG_TAXONOMY | FLAG_SECTION) != 0 {
        return Err(format!("unknown flag bits {flags:#04x}"));
    }
    let margin = cur.f64().ok_or_else(short)?;
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(format!("invalid margin {margin}"));
    }
    let mut model = RerankerModel {
        h: TwoLayerNet::zeros(h_in, h_hid, h_out),
        g: TwoLayerNet::zeros(g_in, g_hid, 1),
        margin,
        geometry,
        use_taxonomy: flags & FLAG_TAXONOMY != 0,
        use_section: flags & FLAG_SECTION != 0,
    };
    for t in model.tensors_mut() {
        for x in t.iter_mut() {
            *x = cur.f64().ok_or_else(short)?;
        }
    }
    if !cur.is_at_end() {
        return Err("trailing bytes after tensors".into());
    }
    Ok(model)
}
