//! Binary checkpoint format: magic string, JSON header describing configs
//! and parameter layout, then raw little-endian f64 data (value, m, v per
//! parameter, in header order).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::nn::adam::ParamStore;
use crate::nn::NnError;

const MAGIC: &[u8] = b"JAEGERCKPT1";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: serde_json::Value,
    stores: Vec<StoreHeader>,
}

#[derive(Serialize, Deserialize)]
struct StoreHeader {
    name: String,
    step: u64,
    params: Vec<ParamHeader>,
}

#[derive(Serialize, Deserialize)]
struct ParamHeader {
    name: String,
    rows: usize,
    cols: usize,
}

pub fn save_checkpoint(
    path: &Path,
    config: &serde_json::Value,
    stores: &[(&str, &ParamStore)],
) -> Result<(), NnError> {
    let header = Header {
        config: config.clone(),
        stores: stores
            .iter()
            .map(|(name, store)| StoreHeader {
                name: name.to_string(),
                step: store.step,
                params: store
                    .iter()
                    .map(|(pname, p)| ParamHeader {
                        name: pname.to_string(),
                        rows: p.value.nrows(),
                        cols: p.value.ncols(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| NnError::CheckpointFormat(format!("header encode: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(header_bytes.len() as u64)?;
    w.write_all(&header_bytes)?;
    for (_, store) in stores {
        for (_, p) in store.iter() {
            for arr in [&p.value, &p.m, &p.v] {
                for &x in arr.iter() {
                    w.write_f64::<LittleEndian>(x)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(
    path: &Path,
) -> Result<(serde_json::Value, Vec<(String, ParamStore)>), NnError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 11];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(NnError::CheckpointFormat("bad magic string".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(NnError::CheckpointFormat(format!("unsupported version {version}")));
    }
    let header_len = r.read_u64::<LittleEndian>()? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| NnError::CheckpointFormat(format!("header decode: {e}")))?;

    let mut stores = Vec::new();
    for sh in header.stores {
        let mut store = ParamStore::new();
        store.step = sh.step;
        for ph in sh.params {
            let n = ph.rows * ph.cols;
            let read_arr = |r: &mut BufReader<File>| -> Result<Array2<f64>, NnError> {
                let mut data = vec![0.0f64; n];
                r.read_f64_into::<LittleEndian>(&mut data)?;
                Array2::from_shape_vec((ph.rows, ph.cols), data)
                    .map_err(|e| NnError::CheckpointFormat(format!("shape: {e}")))
            };
            let value = read_arr(&mut r)?;
            let m = read_arr(&mut r)?;
            let v = read_arr(&mut r)?;
            store.declare(&ph.name, value);
            let p = store.get_mut(&ph.name);
            p.m = m;
            p.v = v;
        }
        stores.push((sh.name, store));
    }
    Ok((header.config, stores))
}
