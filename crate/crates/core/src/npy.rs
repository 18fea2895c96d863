//! NPY v1.0 reader/writer.
//!
//! Only the subset this toolkit needs is supported: version 1.0 files with a
//! little-endian `'<f4'` or `'<f8'` payload in C order. Version bytes other
//! than `{1, 0}` are rejected rather than coerced. Written headers are padded
//! with spaces so the total header length is a multiple of 64 bytes and end
//! with a newline, which makes saving the same tensor twice byte-identical.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::tensor::{element_count, DtypeOrigin, Tensor, TensorError};

const MAGIC: [u8; 6] = *b"\x93NUMPY";

/// On-disk element precision for [`save_npy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    fn descr(self) -> &'static str {
        match self {
            Precision::F32 => "<f4",
            Precision::F64 => "<f8",
        }
    }
}

impl From<DtypeOrigin> for Precision {
    fn from(origin: DtypeOrigin) -> Self {
        match origin {
            DtypeOrigin::F32 => Precision::F32,
            DtypeOrigin::F64 => Precision::F64,
        }
    }
}

#[derive(Debug, Error)]
pub enum NpyError {
    #[error("malformed npy header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype {0:?} (only '<f4' and '<f8' are supported)")]
    UnsupportedDtype(String),
    #[error("fortran-order payloads are not supported")]
    FortranOrderUnsupported,
    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },
    #[error("truncated payload: expected {expected} elements, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<TensorError> for NpyError {
    fn from(err: TensorError) -> Self {
        match err {
            TensorError::NonFiniteValue { index } => NpyError::NonFiniteValue { index },
            other => NpyError::MalformedHeader(other.to_string()),
        }
    }
}

/// Load a tensor from an NPY v1.0 file, widening the payload to f64.
pub fn load_npy(path: impl AsRef<Path>) -> Result<Tensor, NpyError> {
    let mut reader = BufReader::new(File::open(path)?);
    read_npy(&mut reader)
}

/// Read a tensor from any NPY v1.0 byte stream.
pub fn read_npy<R: Read>(reader: &mut R) -> Result<Tensor, NpyError> {
    let mut magic = [0u8; 6];
    reader.read_exact(&mut magic).map_err(at_eof("magic"))?;
    if magic != MAGIC {
        return Err(NpyError::MalformedHeader(format!("bad magic {magic:02x?}")));
    }
    let mut version = [0u8; 2];
    reader.read_exact(&mut version).map_err(at_eof("version"))?;
    if version != [1, 0] {
        return Err(NpyError::MalformedHeader(format!(
            "unsupported version {}.{}",
            version[0], version[1]
        )));
    }
    let mut len_bytes = [0u8; 2];
    reader.read_exact(&mut len_bytes).map_err(at_eof("header length"))?;
    let header_len = u16::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; header_len];
    reader.read_exact(&mut header).map_err(at_eof("header dict"))?;
    let header = String::from_utf8(header)
        .map_err(|_| NpyError::MalformedHeader("header is not ASCII/UTF-8".into()))?;
    let dict = HeaderDict::parse(&header)?;

    if dict.fortran_order {
        return Err(NpyError::FortranOrderUnsupported);
    }
    let (origin, width) = match dict.descr.as_str() {
        "<f4" => (DtypeOrigin::F32, 4usize),
        "<f8" => (DtypeOrigin::F64, 8usize),
        other => return Err(NpyError::UnsupportedDtype(other.to_string())),
    };

    let count = element_count(&dict.shape);
    let mut payload = vec![0u8; count * width];
    let mut filled = 0usize;
    while filled < payload.len() {
        match reader.read(&mut payload[filled..])? {
            0 => {
                return Err(NpyError::TruncatedPayload {
                    expected: count,
                    actual: filled / width,
                })
            }
            n => filled += n,
        }
    }

    let mut data = Vec::with_capacity(count);
    match origin {
        DtypeOrigin::F32 => {
            for chunk in payload.chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
        DtypeOrigin::F64 => {
            for chunk in payload.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }
    Ok(Tensor::new(dict.shape, data, origin)?)
}

/// Save a tensor as an NPY v1.0 file at the requested precision.
///
/// An f64 round trip is bit-identical; f32 stores the nearest f32 per element.
pub fn save_npy(tensor: &Tensor, path: impl AsRef<Path>, precision: Precision) -> Result<(), NpyError> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_npy(&mut writer, tensor, precision)?;
    writer.flush()?;
    Ok(())
}

/// Write a tensor as NPY v1.0 to any byte sink.
pub fn write_npy<W: Write>(writer: &mut W, tensor: &Tensor, precision: Precision) -> Result<(), NpyError> {
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        precision.descr(),
        shape_literal(tensor.shape())
    );
    // magic(6) + version(2) + len(2) + dict + padding + '\n', total % 64 == 0
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;
    let header_len_u16 = u16::try_from(header_len)
        .map_err(|_| NpyError::MalformedHeader("header too long for v1.0".into()))?;

    writer.write_all(&MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&header_len_u16.to_le_bytes())?;
    writer.write_all(dict.as_bytes())?;
    for _ in 0..padding {
        writer.write_all(b" ")?;
    }
    writer.write_all(b"\n")?;

    match precision {
        Precision::F32 => {
            for &v in tensor.data() {
                writer.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Precision::F64 => {
            for &v in tensor.data() {
                writer.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        dims => {
            let inner: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            format!("({})", inner.join(", "))
        }
    }
}

fn at_eof(what: &'static str) -> impl Fn(io::Error) -> NpyError {
    move |err| {
        if err.kind() == io::ErrorKind::UnexpectedEof {
            NpyError::MalformedHeader(format!("file ends inside {what}"))
        } else {
            NpyError::Io(err)
        }
    }
}

struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    /// Parse the python dict literal numpy writes. Keys may appear in any
    /// order; all three are required.
    fn parse(header: &str) -> Result<Self, NpyError> {
        let trimmed = header.trim_end_matches(['\n', ' ']).trim();
        let inner = trimmed
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| NpyError::MalformedHeader("header is not a dict literal".into()))?;

        let mut descr = None;
        let mut fortran_order = None;
        let mut shape = None;
        for item in split_top_level(inner) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (key, value) = item
                .split_once(':')
                .ok_or_else(|| NpyError::MalformedHeader(format!("bad dict item {item:?}")))?;
            let key = key.trim().trim_matches(['\'', '"']);
            let value = value.trim();
            match key {
                "descr" => descr = Some(value.trim_matches(['\'', '"']).to_string()),
                "fortran_order" => {
                    fortran_order = Some(match value {
                        "False" => false,
                        "True" => true,
                        other => {
                            return Err(NpyError::MalformedHeader(format!(
                                "bad fortran_order {other:?}"
                            )))
                        }
                    })
                }
                "shape" => shape = Some(parse_shape(value)?),
                other => {
                    return Err(NpyError::MalformedHeader(format!("unexpected key {other:?}")))
                }
            }
        }
        Ok(HeaderDict {
            descr: descr.ok_or_else(|| NpyError::MalformedHeader("missing descr".into()))?,
            fortran_order: fortran_order
                .ok_or_else(|| NpyError::MalformedHeader("missing fortran_order".into()))?,
            shape: shape.ok_or_else(|| NpyError::MalformedHeader("missing shape".into()))?,
        })
    }
}

/// Split dict items on commas that are not inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_shape(value: &str) -> Result<Vec<usize>, NpyError> {
    let inner = value
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| NpyError::MalformedHeader(format!("bad shape {value:?}")))?;
    let mut dims = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue; // trailing comma in 1-tuples, or the empty () scalar
        }
        let dim: usize = part
            .parse()
            .map_err(|_| NpyError::MalformedHeader(format!("bad shape dim {part:?}")))?;
        dims.push(dim);
    }
    Ok(dims)
}
