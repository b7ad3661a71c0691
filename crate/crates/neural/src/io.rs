use std::io::{Read, Write};

use crate::network::TrainedModel;
use crate::spec::NetworkSpec;
use crate::NeuralError;

pub const MAGIC: &[u8; 4] = b"PSNN";
pub const FORMAT_VERSION: u32 = 1;

// Layout: magic, u32 version, u64 spec length, spec JSON, u64 parameter
// count, parameters as f64. All integers and floats little-endian.
impl TrainedModel {
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), NeuralError> {
        let spec = serde_json::to_vec(self.spec())?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(spec.len() as u64).to_le_bytes())?;
        w.write_all(&spec)?;
        w.write_all(&(self.weights().len() as u64).to_le_bytes())?;
        for p in self.weights() {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, NeuralError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NeuralError::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(NeuralError::Format(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut spec = vec![0u8; len];
        r.read_exact(&mut spec)?;
        let spec: NetworkSpec = serde_json::from_slice(&spec)?;
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        if count != spec.param_count() {
            return Err(NeuralError::Format(format!(
                "parameter block holds {count} values, spec needs {}",
                spec.param_count()
            )));
        }
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            weights.push(f64::from_le_bytes(b8));
        }
        TrainedModel::from_weights(spec, weights)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

#[cfg(test)]
mod tests {
    use crate::spec::{Activation, LayerSpec, NetworkSpec};
    use crate::TrainedModel;

    #[test]
    fn round_trip_preserves_outputs_bit_exactly() {
        let spec = NetworkSpec::new(
            3,
            vec![
                LayerSpec::lstm(4, Activation::Selu),
                LayerSpec::gru(3, Activation::Tanh),
                LayerSpec::dense(2, Activation::Linear),
            ],
        )
        .unwrap();
        let model = TrainedModel::init(spec, 11).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"PSNN");
        let loaded = TrainedModel::load(bytes.as_slice()).unwrap();
        let window = vec![vec![0.1, -0.2, 0.3], vec![0.5, 0.5, -1.0]];
        let a = model.forward(&window).unwrap();
        let b = loaded.forward(&window).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn truncated_file_is_an_error() {
        let spec = NetworkSpec::new(1, vec![LayerSpec::dense(1, Activation::Linear)]).unwrap();
        let bytes = TrainedModel::init(spec, 0).unwrap().to_bytes();
        assert!(TrainedModel::load(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(TrainedModel::load(bad.as_slice()).is_err());
    }
}
