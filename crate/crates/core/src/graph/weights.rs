//! Binary weight files.
//!
//! Layout: a UTF-8 text header followed by a little-endian payload.
//!
//! ```text
//! EFFSR-WEIGHTS 1
//! <blob count>
//! <name> <f32|f64> <d0>x<d1>x... <byte offset into payload>
//! ...
//! END
//! <payload bytes>
//! ```
//!
//! Conv blobs are stored as `<param>.weight` and `<param>.bias`, PReLU slopes
//! as `<param>.slope`. Blobs appear in name order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{Graph, ParamBlob};
use crate::error::{Error, Result};

const MAGIC: &str = "EFFSR-WEIGHTS 1";
const END: &str = "END";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DType {
    #[default]
    F32,
    F64,
}

impl DType {
    fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
        }
    }
}

impl FromStr for DType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(DType::F32),
            "f64" => Ok(DType::F64),
            other => Err(Error::Weights(format!("unknown dtype `{other}`"))),
        }
    }
}

/// Blob name -> (dims, values) view of a graph's parameters.
fn blobs(graph: &Graph) -> BTreeMap<String, (Vec<usize>, Vec<f64>)> {
    let mut out = BTreeMap::new();
    for (name, blob) in graph.params() {
        match blob {
            ParamBlob::Conv(p) => {
                out.insert(
                    format!("{name}.weight"),
                    (p.weight.shape().to_vec(), p.weight.data().to_vec()),
                );
                if let Some(b) = &p.bias {
                    out.insert(format!("{name}.bias"), (vec![b.len()], b.clone()));
                }
            }
            ParamBlob::Prelu(s) => {
                out.insert(format!("{name}.slope"), (vec![s.len()], s.clone()));
            }
        }
    }
    out
}

/// Serialises every parameter blob of `graph`.
pub fn write_weights<W: Write>(graph: &Graph, mut w: W, dtype: DType) -> Result<()> {
    let blobs = blobs(graph);
    let mut header = format!("{MAGIC}\n{}\n", blobs.len());
    let mut payload = Vec::new();
    for (name, (dims, values)) in &blobs {
        let dims_txt = dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        header.push_str(&format!("{name} {} {dims_txt} {}\n", dtype.as_str(), payload.len()));
        for &v in values {
            match dtype {
                DType::F32 => payload.extend_from_slice(&(v as f32).to_le_bytes()),
                DType::F64 => payload.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    header.push_str(END);
    header.push('\n');
    let io = |e| Error::io("<weights>", e);
    w.write_all(header.as_bytes()).map_err(io)?;
    w.write_all(&payload).map_err(io)?;
    Ok(())
}

struct Entry {
    dtype: DType,
    dims: Vec<usize>,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<(BTreeMap<String, Entry>, usize)> {
    let bad = |msg: String| Error::Weights(msg);
    let end_marker = format!("\n{END}\n");
    let end = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker.as_bytes())
        .ok_or_else(|| bad("truncated header (no END line)".into()))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad(format!("missing `{MAGIC}` magic line")));
    }
    let count: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| bad("missing blob count".into()))?;
    let mut entries = BTreeMap::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [name, dtype, dims, offset] = parts[..] else {
            return Err(bad(format!("malformed header line `{line}`")));
        };
        let dims = dims
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(format!("bad dims in `{line}`")))?;
        let offset = offset.parse().map_err(|_| bad(format!("bad offset in `{line}`")))?;
        let entry = Entry {
            dtype: dtype.parse()?,
            dims,
            offset,
        };
        if entries.insert(name.to_string(), entry).is_some() {
            return Err(bad(format!("duplicate blob `{name}`")));
        }
    }
    if entries.len() != count {
        return Err(bad(format!("header declares {count} blobs, lists {}", entries.len())));
    }
    Ok((entries, end + end_marker.len()))
}

/// Loads blob values into `graph`. The blob set must match exactly and every
/// blob must have the graph's element count.
pub fn read_weights<R: Read>(graph: &mut Graph, mut r: R) -> Result<()> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<weights>", e))?;
    let (entries, payload_start) = parse_header(&bytes)?;
    let payload = &bytes[payload_start..];

    let expected = blobs(graph);
    let want: BTreeSet<&String> = expected.keys().collect();
    let have: BTreeSet<&String> = entries.keys().collect();
    if want != have {
        let missing: Vec<_> = want.difference(&have).collect();
        let unknown: Vec<_> = have.difference(&want).collect();
        return Err(Error::Weights(format!(
            "blob set mismatch: missing {missing:?}, unknown {unknown:?}"
        )));
    }

    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, (dims, _)) in &expected {
        let e = &entries[name];
        let want_n: usize = dims.iter().product();
        let have_n: usize = e.dims.iter().product();
        if want_n != have_n {
            return Err(Error::Weights(format!(
                "blob `{name}`: expected {want_n} elements {dims:?}, found {have_n} {:?}",
                e.dims
            )));
        }
        let nbytes = have_n * e.dtype.size();
        let chunk = payload.get(e.offset..e.offset + nbytes).ok_or_else(|| {
            Error::Weights(format!(
                "truncated payload: blob `{name}` needs bytes {}..{}, payload has {}",
                e.offset,
                e.offset + nbytes,
                payload.len()
            ))
        })?;
        let vals = match e.dtype {
            DType::F32 => chunk
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            DType::F64 => chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        values.insert(name.clone(), vals);
    }

    for (name, blob) in graph.params_mut() {
        match blob {
            ParamBlob::Conv(p) => {
                let w = values.remove(&format!("{name}.weight")).unwrap();
                p.weight.data_mut().copy_from_slice(&w);
                if let Some(b) = &mut p.bias {
                    *b = values.remove(&format!("{name}.bias")).unwrap();
                }
            }
            ParamBlob::Prelu(s) => *s = values.remove(&format!("{name}.slope")).unwrap(),
        }
    }
    Ok(())
}

pub fn save_weights(graph: &Graph, path: impl AsRef<Path>, dtype: DType) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_weights(graph, &mut buf, dtype)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_weights(graph: &mut Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_weights(graph, std::io::BufReader::new(file))
}
