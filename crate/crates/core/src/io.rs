//! Atomic file writes and the binary model format.
//!
//! Model files are little-endian:
//!
//! ```text
//! magic        8 bytes   "ASYMNET\0"
//! version      u32       1
//! -- network block --
//! activation   u8        0 = softplus
//! n_layers     u32       number of layer sizes
//! sizes        u32 x n_layers
//! n_params     u64
//! params       f64 x n_params   (layer by layer: weights row-major, then biases)
//! -- composite block --
//! treatment    u8        0 = none, 1 = trainable, 2 = fixed
//! norm_mean    f64
//! norm_std     f64
//! has_asym     u8
//! [ll li ls ul ui us zscale]  f64 x 7, present when has_asym = 1
//! ```
//!
//! Every float is stored bit for bit, so save and load round-trip exactly.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::asymptotics::AsymptoticParams;
use crate::error::{Error, Result};
use crate::model::{CompositeModel, Normalization, Treatment};
use crate::neural::{Activation, Mlp};

pub const MAGIC: &[u8; 8] = b"ASYMNET\0";
pub const FORMAT_VERSION: u32 = 1;

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn encode_model(m: &CompositeModel) -> Vec<u8> {
    let mut out = Vec::new();
    let w = &mut out;
    // writes into a Vec cannot fail
    w.write_all(MAGIC).unwrap();
    w.write_u32::<LittleEndian>(FORMAT_VERSION).unwrap();

    let net = m.net();
    w.write_u8(net.activation().tag()).unwrap();
    w.write_u32::<LittleEndian>(net.sizes().len() as u32).unwrap();
    for &s in net.sizes() {
        w.write_u32::<LittleEndian>(s as u32).unwrap();
    }
    w.write_u64::<LittleEndian>(net.n_params() as u64).unwrap();
    for &p in net.params() {
        w.write_f64::<LittleEndian>(p).unwrap();
    }

    w.write_u8(m.treatment().tag()).unwrap();
    let norm = m.normalization();
    w.write_f64::<LittleEndian>(norm.mean).unwrap();
    w.write_f64::<LittleEndian>(norm.std).unwrap();
    match (m.asymptotics(), m.blend()) {
        (Some(p), Some(zb)) => {
            w.write_u8(1).unwrap();
            for v in [p.ll, p.li, p.ls, p.ul, p.ui, p.us, zb.scale] {
                w.write_f64::<LittleEndian>(v).unwrap();
            }
        }
        _ => w.write_u8(0).unwrap(),
    }
    out
}

fn truncated(_: std::io::Error) -> Error {
    Error::Format("unexpected end of file".into())
}

pub fn decode_model(bytes: &[u8]) -> Result<CompositeModel> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a model file".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }

    let tag = r.read_u8().map_err(truncated)?;
    let activation = Activation::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown activation tag {tag}")))?;
    let n_layers = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    if n_layers > 1024 {
        return Err(Error::Format(format!("implausible layer count {n_layers}")));
    }
    let sizes = (0..n_layers)
        .map(|_| r.read_u32::<LittleEndian>().map(|s| s as usize))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(truncated)?;
    let n_params = r.read_u64::<LittleEndian>().map_err(truncated)? as usize;
    let remaining = bytes.len().saturating_sub(r.position() as usize);
    if n_params > remaining / 8 {
        return Err(Error::Format(format!("parameter count {n_params} exceeds file size")));
    }
    let params = (0..n_params)
        .map(|_| r.read_f64::<LittleEndian>())
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(truncated)?;
    let net = Mlp::from_parts(sizes, params, activation)?;

    let tag = r.read_u8().map_err(truncated)?;
    let treatment = Treatment::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown treatment tag {tag}")))?;
    let mean = r.read_f64::<LittleEndian>().map_err(truncated)?;
    let std = r.read_f64::<LittleEndian>().map_err(truncated)?;
    let norm = Normalization::new(mean, std)?;
    let (asym, zscale) = match r.read_u8().map_err(truncated)? {
        0 => (None, None),
        1 => {
            let mut v = [0.0; 7];
            for slot in &mut v {
                *slot = r.read_f64::<LittleEndian>().map_err(truncated)?;
            }
            let p = AsymptoticParams::new(v[0], v[1], v[2], v[3], v[4], v[5])?;
            (Some(p), Some(v[6]))
        }
        other => return Err(Error::Format(format!("bad asymptotics flag {other}"))),
    };
    if (r.position() as usize) != bytes.len() {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    CompositeModel::new(net, treatment, asym, zscale, norm)
}

pub fn save_model(path: &Path, m: &CompositeModel) -> Result<()> {
    write_atomic(path, &encode_model(m))
}

pub fn load_model(path: &Path) -> Result<CompositeModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
