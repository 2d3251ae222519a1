use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::Tensor;
use crate::error::{Error, Result};

pub const PARAMSET_MAGIC: &[u8; 8] = b"WCPNET01";

/// Named learnable tensors of one engine.
///
/// Order is significant: it defines the flat view used by the optimizer and
/// by gradient checking.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    frozen: bool,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name {name}")));
        }
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_scalars() {
            return Err(Error::Shape(format!(
                "flat view has {} values, parameter set holds {}",
                values.len(),
                self.num_scalars()
            )));
        }
        let mut rest = values;
        for t in &mut self.tensors {
            let (head, tail) = rest.split_at(t.len());
            t.data_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Locates flat index `k` as (tensor index, offset within tensor).
    pub fn locate(&self, mut k: usize) -> Option<(usize, usize)> {
        for (i, t) in self.tensors.iter().enumerate() {
            if k < t.len() {
                return Some((i, k));
            }
            k -= t.len();
        }
        None
    }

    /// Hex SHA-256 of the serialized form; equal iff bit-identical values.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.num_scalars());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(PARAMSET_MAGIC)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in self.names.iter().zip(&self.tensors) {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Parses the binary form; the result is not frozen.
    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != PARAMSET_MAGIC {
            return Err(Error::Format("parameter blob has the wrong magic".into()));
        }
        let count = read_u32(r)?;
        let mut set = ParamSet::new();
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            let mut name = vec![0u8; len];
            read_exact(r, &mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let rank = read_u32(r)? as usize;
            if rank > 8 {
                return Err(Error::Format(format!("implausible tensor rank {rank}")));
            }
            let shape = (0..rank)
                .map(|_| read_u32(r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                read_exact(r, &mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            set.push(name, Tensor::new(shape, data)?)?;
        }
        Ok(set)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let set = Self::read_from(&mut bytes)?;
        if !bytes.is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after parameter blob",
                bytes.len()
            )));
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path)?).map_err(|e| Error::parse(path, e.to_string()))
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("parameter blob is truncated".into()),
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sample() -> ParamSet {
        let mut p = ParamSet::new();
        p.push("w", Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.0, 1e-300, -0.0]).unwrap())
            .unwrap();
        p.push("b", Tensor::vector(vec![0.25, f64::MAX])).unwrap();
        p.push("s", Tensor::scalar(7.0)).unwrap();
        p
    }

    #[test]
    fn binary_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..8], b"WCPNET01");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        // First tensor: name length 1, "w", rank 2, dims 2 and 3.
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert_eq!(bytes[16], b'w');
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[21..25].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[25..29].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(bytes[29..37].try_into().unwrap()), 1.0);
        assert_eq!(bytes.len(), 12 + (4 + 1 + 4 + 8 + 48) + (4 + 1 + 4 + 4 + 16) + (4 + 1 + 4 + 8));
    }

    #[test]
    fn round_trip_is_lossless() {
        let p = sample();
        let q = ParamSet::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(p.to_bytes(), q.to_bytes());
        assert_eq!(p.checksum(), q.checksum());
    }

    #[test]
    fn corrupt_blobs_are_rejected() {
        let mut bytes = sample().to_bytes();
        assert!(ParamSet::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(ParamSet::from_bytes(&bytes), Err(Error::Format(_))));
        let mut extra = sample().to_bytes();
        extra.push(0);
        assert!(ParamSet::from_bytes(&extra).is_err());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut p = sample();
        assert!(p.push("w", Tensor::scalar(0.0)).is_err());
    }

    #[test]
    fn locate_walks_tensors() {
        let p = sample();
        assert_eq!(p.locate(0), Some((0, 0)));
        assert_eq!(p.locate(6), Some((1, 0)));
        assert_eq!(p.locate(8), Some((2, 0)));
        assert_eq!(p.locate(9), None);
    }

    proptest! {
        #[test]
        fn flat_view_round_trips(values in prop::collection::vec(-1e6f64..1e6, 9)) {
            let mut p = sample();
            p.set_flat(&values).unwrap();
            prop_assert_eq!(p.flat(), values);
            prop_assert!(p.set_flat(&[0.0; 3]).is_err());
        }
    }
}
