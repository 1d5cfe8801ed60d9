//! Binary network dump.
//!
//! Layout, all integers and floats little-endian:
//! `b"UDNQ"`, version `u8` (1), scalar width `u8` (32 or 64), layer-size
//! count `u32`, the sizes as `u32`, then per layer the `out x in` weights
//! row-major followed by the biases, each value as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::network::{Dense, QNetwork};
use super::DqnError;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"UDNQ";
const VERSION: u8 = 1;

pub fn write_network<T: Scalar, W: Write>(net: &QNetwork<T>, mut out: W) -> Result<(), DqnError> {
    out.write_all(MAGIC)?;
    out.write_all(&[VERSION, T::BITS])?;
    let sizes = net.sizes();
    out.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in &sizes {
        out.write_all(&(*s as u32).to_le_bytes())?;
    }
    for layer in net.layers() {
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_network<T: Scalar, R: Read>(mut input: R) -> Result<QNetwork<T>, DqnError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DqnError::Checkpoint("bad magic".into()));
    }
    let mut head = [0u8; 2];
    input.read_exact(&mut head)?;
    if head[0] != VERSION {
        return Err(DqnError::Checkpoint(format!("unsupported version {}", head[0])));
    }
    if head[1] > T::BITS {
        return Err(DqnError::Checkpoint(format!(
            "checkpoint holds {}-bit values, cannot load into {}-bit network",
            head[1],
            T::BITS
        )));
    }
    let count = read_u32(&mut input)? as usize;
    if !(2..=64).contains(&count) {
        return Err(DqnError::Checkpoint(format!("implausible layer count {count}")));
    }
    let sizes = (0..count)
        .map(|_| read_u32(&mut input).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let mut layers = Vec::with_capacity(count - 1);
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = (0..fan_in * fan_out)
            .map(|_| read_f64(&mut input).map(T::of))
            .collect::<Result<Vec<_>, _>>()?;
        let bias = (0..fan_out)
            .map(|_| read_f64(&mut input).map(T::of))
            .collect::<Result<Vec<_>, _>>()?;
        let weights = Array2::from_shape_vec((fan_out, fan_in), weights)
            .map_err(|e| DqnError::Checkpoint(e.to_string()))?;
        layers.push(Dense {
            weights,
            bias: Array1::from(bias),
        });
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(DqnError::Checkpoint("trailing bytes".into()));
    }
    QNetwork::from_layers(layers)
}

pub fn save_network<T: Scalar>(net: &QNetwork<T>, path: &Path) -> Result<(), DqnError> {
    write_network(net, BufWriter::new(File::create(path)?))
}

pub fn load_network<T: Scalar>(path: &Path) -> Result<QNetwork<T>, DqnError> {
    read_network(BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, DqnError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64, DqnError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_garbage() {
        assert!(read_network::<f64, _>(&b"NOPE"[..]).is_err());
        let mut buf = Vec::new();
        let net = QNetwork::<f64>::new(&[2, 3, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        write_network(&net, &mut buf).unwrap();
        assert!(read_network::<f32, _>(&buf[..]).is_err());
        buf.push(0);
        assert!(read_network::<f64, _>(&buf[..]).is_err());
        buf.truncate(buf.len() - 9);
        assert!(read_network::<f64, _>(&buf[..]).is_err());
    }
}
