//! FCLK kernel cache: header, then the weight table in transform-grid order, then (free mode)
//! the far-field weights in cell order, all as little-endian f64.

use super::KernelTensor;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn save_kernel<T: Real>(k: &KernelTensor<T>) -> Vec<u8> {
    let d = k.domain();
    let dims: Vec<String> = d.dims().iter().map(|x| x.to_string()).collect();
    let mut out = format!(
        "FCLK 1\nn {}\ndims {}\nL {}\ns {}\nmode {}\ncutoff {}\ntail {}\n\n",
        d.n(),
        dims.join(" "),
        d.side_length().f64(),
        d.s().f64(),
        d.mode().as_str(),
        k.lattice_cutoff(),
        k.tail_bound().f64()
    )
    .into_bytes();
    for &v in k.table() {
        out.extend_from_slice(&v.f64().to_le_bytes());
    }
    if let Some(w) = k.far() {
        for &v in w {
            out.extend_from_slice(&v.f64().to_le_bytes());
        }
    }
    out
}

/// Load a cache written for exactly this domain (every header field compared bit-for-bit).
pub fn load_kernel<T: Real>(bytes: &[u8], domain: &DomainSpec<T>) -> Result<KernelTensor<T>> {
    let split = bytes.windows(2).position(|w| w == b"\n\n").ok_or_else(|| Error::Format("FCLK header not terminated".into()))?;
    let head = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::Format("FCLK header is not ASCII".into()))?;
    let mut lines = head.lines();
    let mut take = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| Error::Format(format!("missing {key}")))?;
        if key == "FCLK" {
            return if line == "FCLK 1" { Ok(String::new()) } else { Err(Error::Format(format!("magic mismatch: {line:?}"))) };
        }
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| Error::Format(format!("expected {key}, found {line:?}")))
    };
    take("FCLK")?;
    let n: usize = take("n")?.parse().map_err(|_| Error::Format("bad n".into()))?;
    let dims: Vec<usize> =
        take("dims")?.split(' ').map(|t| t.parse().map_err(|_| Error::Format("bad dims".into()))).collect::<Result<_>>()?;
    let l: f64 = take("L")?.parse().map_err(|_| Error::Format("bad L".into()))?;
    let s: f64 = take("s")?.parse().map_err(|_| Error::Format("bad s".into()))?;
    let mode: crate::domain::BoundaryMode = take("mode")?.parse()?;
    let cutoff: usize = take("cutoff")?.parse().map_err(|_| Error::Format("bad cutoff".into()))?;
    let tail: f64 = take("tail")?.parse().map_err(|_| Error::Format("bad tail".into()))?;
    let same = n == domain.n()
        && dims == domain.dims()
        && l.to_bits() == domain.side_length().f64().to_bits()
        && s.to_bits() == domain.s().f64().to_bits()
        && mode == domain.mode();
    if !same {
        return Err(Error::DomainMismatch("kernel cache", "domain"));
    }
    let side = if domain.is_periodic() { domain.side() } else { 2 * domain.side() };
    let tlen = side.pow(n as u32);
    let flen = if domain.is_periodic() { 0 } else { domain.len() };
    let payload = &bytes[split + 2..];
    if payload.len() != 8 * (tlen + flen) {
        return Err(Error::Truncated { expected: 8 * (tlen + flen), found: payload.len() });
    }
    let vals: Vec<T> = payload.chunks_exact(8).map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes")))).collect();
    let far = (flen > 0).then(|| vals[tlen..].to_vec());
    let mut table = vals;
    table.truncate(tlen);
    Ok(KernelTensor::from_parts(domain.clone(), table, far, cutoff, T::lit(tail)))
}
