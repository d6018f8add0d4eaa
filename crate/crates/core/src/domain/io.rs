//! FCLG label grids and FCLS soft clusters.

use super::{make_domain, BoundaryMode, DomainSpec, LabelGrid, SoftCluster};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub(crate) fn write_header<T: Real>(out: &mut Vec<u8>, magic: &str, d: &DomainSpec<T>, chambers: usize) {
    let dims: Vec<String> = d.dims().iter().map(|x| x.to_string()).collect();
    let text = format!(
        "{magic} 1\nn {}\ndims {}\nL {}\nN {chambers}\ns {}\nmode {}\n",
        d.n(),
        dims.join(" "),
        d.side_length().f64(),
        d.s().f64(),
        d.mode().as_str()
    );
    out.extend_from_slice(text.as_bytes());
}

pub(crate) struct Header<T> {
    pub domain: DomainSpec<T>,
    pub chambers: usize,
    pub rest: usize,
}

fn next_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let start = *pos;
    let end = bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|k| start + k)
        .ok_or_else(|| Error::Format("unterminated header line".into()))?;
    *pos = end + 1;
    std::str::from_utf8(&bytes[start..end]).map_err(|_| Error::Format("header is not ASCII".into()))
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key).and_then(|r| r.strip_prefix(' ')).ok_or_else(|| Error::Format(format!("expected \"{key} ...\", found {line:?}")))
}

fn num<X: std::str::FromStr>(text: &str, what: &str) -> Result<X> {
    text.trim().parse().map_err(|_| Error::Format(format!("bad {what}: {text:?}")))
}

/// Parses the shared header lines; `extra` names keys that follow `mode` before the blank line.
pub(crate) fn read_header<T: Real>(bytes: &[u8], magic: &str, extra: &[&str]) -> Result<(Header<T>, Vec<String>)> {
    let mut pos = 0;
    let first = next_line(bytes, &mut pos)?;
    if first != format!("{magic} 1") {
        return Err(Error::Format(format!("magic mismatch: expected \"{magic} 1\", found {first:?}")));
    }
    let n: usize = num(field(next_line(bytes, &mut pos)?, "n")?, "n")?;
    let dims: Vec<usize> = field(next_line(bytes, &mut pos)?, "dims")?.split(' ').map(|t| num(t, "dims")).collect::<Result<_>>()?;
    let l: f64 = num(field(next_line(bytes, &mut pos)?, "L")?, "L")?;
    let chambers: usize = num(field(next_line(bytes, &mut pos)?, "N")?, "N")?;
    let s: f64 = num(field(next_line(bytes, &mut pos)?, "s")?, "s")?;
    let mode: BoundaryMode = field(next_line(bytes, &mut pos)?, "mode")?.parse()?;
    let mut values = Vec::new();
    for key in extra {
        values.push(field(next_line(bytes, &mut pos)?, key)?.to_string());
    }
    if !next_line(bytes, &mut pos)?.is_empty() {
        return Err(Error::Format("header must end with one blank line".into()));
    }
    let domain = make_domain(n, &dims, T::lit(l), mode, T::lit(s))?;
    Ok((Header { domain, chambers, rest: pos }, values))
}

pub fn serialize_grid<T: Real>(grid: &LabelGrid<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(grid.labels().len() + 128);
    write_header(&mut out, "FCLG", grid.domain(), grid.chambers());
    out.push(b'\n');
    out.extend_from_slice(grid.labels());
    out
}

pub fn parse_grid<T: Real>(bytes: &[u8]) -> Result<LabelGrid<T>> {
    let (h, _) = read_header::<T>(bytes, "FCLG", &[])?;
    let payload = &bytes[h.rest..];
    let expected = h.domain.len();
    if payload.len() < expected {
        return Err(Error::Truncated { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes after payload", payload.len() - expected)));
    }
    LabelGrid::new(h.domain, h.chambers, payload.to_vec())
}

pub fn serialize_soft<T: Real>(sc: &SoftCluster<T>) -> Vec<u8> {
    let mut out = Vec::new();
    write_header(&mut out, "FCLS", &sc.domain, sc.chambers());
    out.extend_from_slice(format!("fields {}\n\n", sc.chambers()).as_bytes());
    for f in &sc.fields {
        for &v in f {
            out.extend_from_slice(&v.f64().to_le_bytes());
        }
    }
    out
}

pub fn parse_soft<T: Real>(bytes: &[u8]) -> Result<SoftCluster<T>> {
    let (h, extra) = read_header::<T>(bytes, "FCLS", &["fields"])?;
    let fields: usize = num(&extra[0], "fields")?;
    if fields != h.chambers {
        return Err(Error::Format(format!("fields {fields} disagrees with N {}", h.chambers)));
    }
    let len = h.domain.len();
    let payload = &bytes[h.rest..];
    let expected = 8 * len * fields;
    if payload.len() != expected {
        return Err(Error::Truncated { expected, found: payload.len() });
    }
    let fields = payload
        .chunks_exact(8 * len)
        .map(|chunk| chunk.chunks_exact(8).map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8-byte chunk")))).collect())
        .collect();
    Ok(SoftCluster { domain: h.domain, fields })
}
