//! Binary model container.
//!
//! ```text
//! "ESNMDL01"
//! u64 LE            length of the metadata block
//! metadata          UTF-8 `key=value` lines (hyperparameters, dimensions, info)
//! u64 LE            nnz of W
//! nnz × (u32 row, u32 col, f64 value)
//! N_r × 9 f64       W_in, row-major
//! N_r f64           bias
//! u8                1 if a readout follows, else 0
//! 9 × (N_r + 1) f64 W_out, row-major
//! ```
//!
//! All numbers are little-endian; floats round-trip bit-exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{CsrMatrix, EsnError, EsnHyperparameters, EsnModel, Readout};
use crate::mfe::N_MODES;

pub const MAGIC: &[u8; 8] = b"ESNMDL01";
const FORMAT_VERSION: &str = "1";

/// Keys written by the format itself; everything else is caller info.
const RESERVED: &[&str] = &[
    "format_version",
    "n_reservoir",
    "n_input",
    "spectral_radius",
    "sparsity",
    "noise_amplitude",
    "input_scale",
    "bias_scale",
    "dt_model",
    "ridge",
    "n_sync",
    "seed",
    "w_nnz",
    "trained",
];

fn f64_bits(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn parse_bits(key: &str, s: &str) -> Result<f64, EsnError> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| EsnError::Format(format!("bad float for {key}: {s}")))
}

/// Writes `model` with free-form `info` entries (keys must not contain `=`
/// or newlines and must not collide with the reserved keys).
pub fn write_model<W: Write>(
    out: &mut W,
    model: &EsnModel,
    info: &BTreeMap<String, String>,
) -> Result<(), EsnError> {
    let hp = model.hyperparameters();
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in info {
        if RESERVED.contains(&k.as_str()) || k.contains(['=', '\n']) || v.contains('\n') {
            return Err(EsnError::Format(format!("invalid info key {k:?}")));
        }
        meta.insert(k.clone(), v.clone());
    }
    let mut put = |k: &str, v: String| {
        meta.insert(k.to_string(), v);
    };
    put("format_version", FORMAT_VERSION.into());
    put("n_reservoir", hp.n_reservoir.to_string());
    put("n_input", N_MODES.to_string());
    // floats are stored as raw bit patterns so the text block is exact too
    put("spectral_radius", f64_bits(hp.spectral_radius));
    put("sparsity", f64_bits(hp.sparsity));
    put("noise_amplitude", f64_bits(hp.noise_amplitude));
    put("input_scale", f64_bits(hp.input_scale));
    put("bias_scale", f64_bits(hp.bias_scale));
    put("dt_model", f64_bits(hp.dt_model));
    put("ridge", f64_bits(hp.ridge));
    put("n_sync", hp.n_sync.to_string());
    put("seed", hp.seed.to_string());
    put("w_nnz", model.w().nnz().to_string());
    put("trained", model.is_trained().to_string());

    let mut text = String::new();
    for (k, v) in &meta {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }

    out.write_all(MAGIC)?;
    out.write_all(&(text.len() as u64).to_le_bytes())?;
    out.write_all(text.as_bytes())?;

    let mut buf = Vec::with_capacity(16 * model.w().nnz() + 8 * model.w_in().len() + 64);
    buf.extend_from_slice(&(model.w().nnz() as u64).to_le_bytes());
    for (i, j, v) in model.w().triplets() {
        buf.extend_from_slice(&i.to_le_bytes());
        buf.extend_from_slice(&j.to_le_bytes());
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in model.w_in().iter().chain(model.bias()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    match model.readout() {
        Some(r) => {
            buf.push(1);
            for v in &r.weights {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => buf.push(0),
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EsnError> {
        if self.data.len() - self.pos < n {
            return Err(EsnError::Format("unexpected end of file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64, EsnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, EsnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, EsnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, EsnError> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Reads a model and the caller info stored alongside it.
pub fn read_model<R: Read>(input: &mut R) -> Result<(EsnModel, BTreeMap<String, String>), EsnError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(EsnError::Format("bad magic".into()));
    }
    let meta_len = c.u64()? as usize;
    let text = std::str::from_utf8(c.take(meta_len)?)
        .map_err(|_| EsnError::Format("metadata is not UTF-8".into()))?;
    let mut meta = BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| EsnError::Format(format!("bad metadata line {line:?}")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| {
        meta.get(k)
            .map(String::as_str)
            .ok_or_else(|| EsnError::Format(format!("missing key {k}")))
    };
    let int = |k: &str| -> Result<u64, EsnError> {
        get(k)?
            .parse()
            .map_err(|_| EsnError::Format(format!("bad integer for {k}")))
    };
    let float = |k: &str| -> Result<f64, EsnError> { parse_bits(k, get(k)?) };

    if get("format_version")? != FORMAT_VERSION {
        return Err(EsnError::Format(format!(
            "unsupported format version {}",
            get("format_version")?
        )));
    }
    if int("n_input")? as usize != N_MODES {
        return Err(EsnError::Format("input dimension mismatch".into()));
    }
    let hp = EsnHyperparameters {
        n_reservoir: int("n_reservoir")? as usize,
        spectral_radius: float("spectral_radius")?,
        sparsity: float("sparsity")?,
        noise_amplitude: float("noise_amplitude")?,
        input_scale: float("input_scale")?,
        bias_scale: float("bias_scale")?,
        dt_model: float("dt_model")?,
        ridge: float("ridge")?,
        n_sync: int("n_sync")? as usize,
        seed: int("seed")?,
    };
    let n = hp.n_reservoir;

    let nnz = c.u64()? as usize;
    if nnz as u64 != int("w_nnz")? || nnz > n.saturating_mul(n) {
        return Err(EsnError::Format("inconsistent nonzero count".into()));
    }
    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let i = c.u32()?;
        let j = c.u32()?;
        let v = c.f64()?;
        triplets.push((i, j, v));
    }
    let w = CsrMatrix::from_triplets(n, n, triplets)?;
    if w.nnz() != nnz {
        return Err(EsnError::Format("explicit zeros in W".into()));
    }
    let w_in = c.f64s(n * N_MODES)?;
    let bias = c.f64s(n)?;
    let readout = match c.take(1)?[0] {
        0 => None,
        1 => Some(Readout {
            weights: c.f64s(N_MODES * (n + 1))?,
        }),
        other => return Err(EsnError::Format(format!("bad readout flag {other}"))),
    };
    if readout.is_some() != (get("trained")? == "true") {
        return Err(EsnError::Format("readout flag disagrees with metadata".into()));
    }
    if c.pos != data.len() {
        return Err(EsnError::Format("trailing bytes".into()));
    }

    let info = meta
        .into_iter()
        .filter(|(k, _)| !RESERVED.contains(&k.as_str()))
        .collect();
    Ok((EsnModel::from_parts(hp, w, w_in, bias, readout)?, info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(trained: bool) -> EsnModel {
        let hp = EsnHyperparameters {
            n_reservoir: 30,
            sparsity: 0.5,
            noise_amplitude: 1e-3 / 3.0,
            seed: 77,
            ..Default::default()
        };
        let mut m = EsnModel::new(hp).unwrap();
        if trained {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let weights = (0..N_MODES * 31).map(|_| rng.random::<f64>() / 7.0).collect();
            m.set_readout(Readout { weights }).unwrap();
        }
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for trained in [false, true] {
            let m = model(trained);
            let mut info = BTreeMap::new();
            info.insert("created_by".to_string(), "test".to_string());
            let mut bytes = Vec::new();
            write_model(&mut bytes, &m, &info).unwrap();
            assert_eq!(&bytes[..8], MAGIC);
            let (back, info_back) = read_model(&mut bytes.as_slice()).unwrap();
            assert_eq!(back, m);
            assert_eq!(info_back, info);
            let mut again = Vec::new();
            write_model(&mut again, &back, &info_back).unwrap();
            assert_eq!(bytes, again);
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = model(true);
        let mut bytes = Vec::new();
        write_model(&mut bytes, &m, &BTreeMap::new()).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&mut bad.as_slice()), Err(EsnError::Format(_))));

        let truncated = &bytes[..bytes.len() - 5];
        assert!(read_model(&mut &truncated[..]).is_err());

        let mut long = bytes.clone();
        long.push(0);
        assert!(read_model(&mut long.as_slice()).is_err());

        let mut info = BTreeMap::new();
        info.insert("seed".to_string(), "1".to_string());
        assert!(write_model(&mut Vec::new(), &m, &info).is_err());
    }
}
