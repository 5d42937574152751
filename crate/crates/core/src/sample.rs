//! Samples and their counter-keyed random streams.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Density;

/// Stream index reserved for single nested sample paths.
pub const PATH_STREAM: u64 = 0xFFFF_FFFF;

/// Key of a random stream: `(master seed, replication, n index)`.
///
/// The stream is a ChaCha8 generator seeded from the master seed with the 64-bit stream
/// selector `n_index << 32 | replication`, so every key owns an independent stream and the
/// draws do not depend on execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub master: u64,
    pub replication: u64,
    pub n_index: u64,
}

impl StreamId {
    pub fn new(master: u64, replication: u64, n_index: u64) -> Self {
        StreamId {
            master,
            replication,
            n_index,
        }
    }

    pub fn rng(&self) -> Result<ChaCha8Rng> {
        if self.replication > u32::MAX as u64 || self.n_index > u32::MAX as u64 {
            return Err(Error::Config(format!(
                "stream id {self:?} is outside the keyed space (replication and n index must fit 32 bits)"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream((self.n_index << 32) | self.replication);
        Ok(rng)
    }
}

/// `n` points in `Rᵈ`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    dim: usize,
    points: Vec<f64>,
    lineage: Option<StreamId>,
}

impl Sample {
    /// Wraps externally supplied points (row-major, `dim` coordinates each).
    pub fn from_points(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: points.len(),
            });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("sample contains non-finite coordinates".into()));
        }
        Ok(Sample {
            dim,
            points,
            lineage: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> core::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn lineage(&self) -> Option<StreamId> {
        self.lineage
    }

    /// The first `n` points, keeping the lineage.
    pub fn prefix(&self, n: usize) -> Sample {
        let n = n.min(self.len());
        Sample {
            dim: self.dim,
            points: self.points[..n * self.dim].to_vec(),
            lineage: self.lineage,
        }
    }

    /// Returns the sample with its points permuted by `order`.
    pub fn permuted(&self, order: &[usize]) -> Sample {
        let mut points = Vec::with_capacity(self.points.len());
        for &i in order {
            points.extend_from_slice(self.point(i));
        }
        Sample {
            dim: self.dim,
            points,
            lineage: self.lineage,
        }
    }
}

/// Draws `n` i.i.d. points from `model` on the stream `stream`.
///
/// Points are drawn sequentially, so for a fixed stream the sample of size `m < n` is a
/// prefix of the sample of size `n`.
pub fn draw_sample(model: &dyn Density, n: usize, stream: StreamId) -> Result<Sample> {
    if n == 0 {
        return Err(Error::Usage("sample size must be at least 1".into()));
    }
    let mut rng = stream.rng()?;
    let dim = model.dim();
    let mut points = vec![0.0; n * dim];
    for chunk in points.chunks_exact_mut(dim) {
        model.sample_point(&mut rng, chunk);
    }
    Ok(Sample {
        dim,
        points,
        lineage: Some(stream),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DensityModel;

    #[test]
    fn prefix_property_and_reproducibility() {
        let m = DensityModel::gaussian(2).unwrap();
        let s = StreamId::new(11, 3, 4);
        let big = draw_sample(&m, 500, s).unwrap();
        let small = draw_sample(&m, 120, s).unwrap();
        assert_eq!(&big.points()[..240], small.points());
        assert_eq!(big, draw_sample(&m, 500, s).unwrap());
        assert_ne!(big, draw_sample(&m, 500, StreamId::new(11, 4, 4)).unwrap());
    }

    #[test]
    fn stream_keys_out_of_range() {
        let m = DensityModel::gaussian(1).unwrap();
        assert!(matches!(
            draw_sample(&m, 3, StreamId::new(0, 1 << 33, 0)),
            Err(Error::Config(_))
        ));
        assert!(draw_sample(&m, 0, StreamId::new(0, 0, 0)).is_err());
    }

    #[test]
    fn uniform_box_points_in_box() {
        let m = DensityModel::uniform_box(vec![0.0], vec![1.0]).unwrap();
        let s = draw_sample(&m, 3, StreamId::new(5, 0, 0)).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.points().iter().all(|x| (0.0..=1.0).contains(x)));
    }
}
