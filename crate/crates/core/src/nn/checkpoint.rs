//! Binary parameter serialization.
//!
//! One network section on disk is:
//!
//! ```text
//! magic      8 bytes   b"CRITLABP"
//! version    u32 LE    currently 1
//! n_widths   u32 LE
//! widths     n_widths × u32 LE
//! hidden     u8        0 = ReLU, 1 = Tanh
//! output     u8        0 = Identity, 1 = TanhScaled
//! bound      f64 LE    tanh scale (0.0 when output is Identity)
//! count      u64 LE    parameter count, must match the declared topology
//! values     count × f64 LE, in ParamVector layout order
//! ```
//!
//! All integers and reals are little-endian; reals are IEEE-754 binary64
//! bit patterns, so a round-trip is bit-exact. Larger files (agent bundles,
//! buffer dumps) are concatenations of such sections under their own outer
//! headers.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Activation, MlpSpec, OutputActivation, ParamVector};

const MAGIC: &[u8; 8] = b"CRITLABP";
const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Serialize one network (architecture + parameters) to `w`.
pub fn write_params<W: Write>(w: &mut W, spec: &MlpSpec, params: &ParamVector) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::Shape(format!(
            "cannot serialize: {} values for a {}-parameter architecture",
            params.len(),
            spec.param_count()
        )));
    }
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    write_u32(w, spec.layer_widths.len() as u32)?;
    for &width in &spec.layer_widths {
        write_u32(w, width as u32)?;
    }
    w.write_all(&[match spec.hidden_activation {
        Activation::ReLU => 0u8,
        Activation::Tanh => 1u8,
    }])?;
    let (out_tag, bound) = match spec.output_activation {
        OutputActivation::Identity => (0u8, 0.0),
        OutputActivation::TanhScaled(b) => (1u8, b),
    };
    w.write_all(&[out_tag])?;
    write_f64(w, bound)?;
    write_u64(w, params.len() as u64)?;
    for &v in params.as_slice() {
        write_f64(w, v)?;
    }
    Ok(())
}

/// Deserialize one network section produced by [`write_params`].
pub fn read_params<R: Read>(r: &mut R) -> Result<(MlpSpec, ParamVector)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Usage(format!(
            "not a parameter checkpoint (bad magic {magic:02x?})"
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Usage(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let n_widths = read_u32(r)? as usize;
    if !(2..=64).contains(&n_widths) {
        return Err(Error::Usage(format!(
            "implausible width-list length {n_widths} in checkpoint"
        )));
    }
    let mut widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        widths.push(read_u32(r)? as usize);
    }
    let mut tags = [0u8; 2];
    r.read_exact(&mut tags)?;
    let hidden = match tags[0] {
        0 => Activation::ReLU,
        1 => Activation::Tanh,
        other => {
            return Err(Error::Usage(format!(
                "unknown hidden-activation tag {other} in checkpoint"
            )))
        }
    };
    let bound = read_f64(r)?;
    let output = match tags[1] {
        0 => OutputActivation::Identity,
        1 => OutputActivation::TanhScaled(bound),
        other => {
            return Err(Error::Usage(format!(
                "unknown output-activation tag {other} in checkpoint"
            )))
        }
    };
    let spec = MlpSpec::new(widths, hidden, output)
        .map_err(|e| Error::Usage(format!("checkpoint architecture invalid: {e}")))?;
    let count = read_u64(r)? as usize;
    if count != spec.param_count() {
        return Err(Error::Usage(format!(
            "checkpoint value count {count} does not match architecture ({} expected)",
            spec.param_count()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(read_f64(r)?);
    }
    Ok((spec, ParamVector::from_values(values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_forward, mlp_init};

    #[test]
    fn round_trip_preserves_forward_outputs_bitwise() {
        let spec = MlpSpec::new(
            vec![3, 8, 8, 2],
            Activation::ReLU,
            OutputActivation::TanhScaled(2.0),
        )
        .unwrap();
        let params = mlp_init(&spec, 31).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &spec, &params).unwrap();
        let (spec2, params2) = read_params(&mut bytes.as_slice()).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params, params2);
        let x = [0.5, -1.25, 3.0];
        let y1 = mlp_forward(&spec, &params, &x).unwrap();
        let y2 = mlp_forward(&spec2, &params2, &x).unwrap();
        assert!(y1.iter().zip(&y2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_corrupted_magic() {
        let spec = MlpSpec::new(vec![2, 1], Activation::Tanh, OutputActivation::Identity).unwrap();
        let params = mlp_init(&spec, 0).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &spec, &params).unwrap();
        bytes[0] ^= 0xFF;
        assert!(matches!(
            read_params(&mut bytes.as_slice()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn rejects_truncated_stream() {
        let spec = MlpSpec::new(vec![2, 4, 1], Activation::ReLU, OutputActivation::Identity)
            .unwrap();
        let params = mlp_init(&spec, 5).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &spec, &params).unwrap();
        bytes.truncate(bytes.len() - 7);
        assert!(read_params(&mut bytes.as_slice()).is_err());
    }

    #[test]
    fn sections_concatenate_cleanly() {
        let spec_a =
            MlpSpec::new(vec![2, 4, 1], Activation::ReLU, OutputActivation::Identity).unwrap();
        let spec_b =
            MlpSpec::new(vec![3, 2], Activation::Tanh, OutputActivation::TanhScaled(1.0)).unwrap();
        let pa = mlp_init(&spec_a, 1).unwrap();
        let pb = mlp_init(&spec_b, 2).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &spec_a, &pa).unwrap();
        write_params(&mut bytes, &spec_b, &pb).unwrap();
        let mut cursor = bytes.as_slice();
        let (ra, qa) = read_params(&mut cursor).unwrap();
        let (rb, qb) = read_params(&mut cursor).unwrap();
        assert_eq!((ra, qa), (spec_a, pa));
        assert_eq!((rb, qb), (spec_b, pb));
        assert!(cursor.is_empty());
    }
}
