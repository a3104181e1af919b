//! Spatio-temporal cube tiling of a frame sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::FrameSequence;
use crate::par::{self, Execution};

/// Geometry of a `p × p × q` cube lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeSpec {
    /// Spatial side in pixels.
    pub p: usize,
    /// Temporal depth in frames.
    pub q: usize,
    pub spatial_stride: usize,
    pub temporal_stride: usize,
}

impl Default for CubeSpec {
    fn default() -> Self {
        Self::tiling(8, 5)
    }
}

impl CubeSpec {
    /// Non-overlapping tiling: strides equal the cube extent.
    pub fn tiling(p: usize, q: usize) -> Self {
        Self {
            p,
            q,
            spatial_stride: p,
            temporal_stride: q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.q < 2 {
            return Err(Error::InvalidConfig(format!(
                "cube size must be at least 2x2x2, got p={} q={}",
                self.p, self.q
            )));
        }
        if self.spatial_stride == 0 || self.temporal_stride == 0 {
            return Err(Error::InvalidConfig(
                "cube strides must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Pixels per frame slice (`p²`).
    pub fn slice_len(&self) -> usize {
        self.p * self.p
    }

    /// Lattice counts `(nx, ny, nt)` for a sequence of the given extent.
    pub fn grid_dims(
        &self,
        width: usize,
        height: usize,
        frames: usize,
    ) -> Result<(usize, usize, usize)> {
        self.validate()?;
        if self.p > width.min(height) {
            return Err(Error::InvalidInput(format!(
                "cube side {} exceeds frame size {width}x{height}",
                self.p
            )));
        }
        if self.q > frames {
            return Err(Error::InvalidInput(format!(
                "cube depth {} exceeds sequence length {frames}",
                self.q
            )));
        }
        Ok((
            (width - self.p) / self.spatial_stride + 1,
            (height - self.p) / self.spatial_stride + 1,
            (frames - self.q) / self.temporal_stride + 1,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CubeOrigin {
    pub x: usize,
    pub y: usize,
    pub t: usize,
}

/// One extracted block. `data` is slice-major: `data[(t * p + y) * p + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub origin: CubeOrigin,
    pub p: usize,
    pub q: usize,
    pub data: Vec<f64>,
}

impl Cube {
    pub fn new(origin: CubeOrigin, p: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != p * p * q {
            return Err(Error::DimensionMismatch {
                expected: p * p * q,
                got: data.len(),
            });
        }
        Ok(Self { origin, p, q, data })
    }

    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize) -> f64 {
        self.data[(t * self.p + y) * self.p + x]
    }

    /// The `t`-th frame slice flattened row-major.
    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.p * self.p;
        &self.data[t * n..(t + 1) * n]
    }

    /// Frames covered by this cube.
    pub fn frame_range(&self) -> std::ops::Range<usize> {
        self.origin.t..self.origin.t + self.q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeGrid {
    pub spec: CubeSpec,
    pub grid_dims: (usize, usize, usize),
    /// Ordered x-major, then y, then t.
    pub cubes: Vec<Cube>,
}

impl CubeGrid {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
}

pub fn extract_cubes(seq: &FrameSequence, spec: &CubeSpec) -> Result<CubeGrid> {
    extract_cubes_with(seq, spec, Execution::default())
}

/// Copies every lattice block out of `seq`. Border remainders are dropped.
pub fn extract_cubes_with(
    seq: &FrameSequence,
    spec: &CubeSpec,
    exec: Execution,
) -> Result<CubeGrid> {
    let (nx, ny, nt) = spec.grid_dims(seq.width(), seq.height(), seq.frame_count())?;
    let (p, q) = (spec.p, spec.q);
    let cubes = par::map_range(exec, nx * ny * nt, |idx| {
        let it = idx % nt;
        let iy = (idx / nt) % ny;
        let ix = idx / (nt * ny);
        let origin = CubeOrigin {
            x: ix * spec.spatial_stride,
            y: iy * spec.spatial_stride,
            t: it * spec.temporal_stride,
        };
        let mut data = Vec::with_capacity(p * p * q);
        for dt in 0..q {
            let frame = seq.frame(origin.t + dt);
            for dy in 0..p {
                let row = (origin.y + dy) * seq.width() + origin.x;
                data.extend_from_slice(&frame[row..row + p]);
            }
        }
        Cube { origin, p, q, data }
    });
    Ok(CubeGrid {
        spec: *spec,
        grid_dims: (nx, ny, nt),
        cubes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(width: usize, height: usize, frames: usize) -> FrameSequence {
        let n = (width * height * frames) as f64;
        let data = (0..frames)
            .map(|t| {
                (0..width * height)
                    .map(|i| (t * width * height + i) as f64 / n)
                    .collect()
            })
            .collect();
        FrameSequence::new(width, height, data).unwrap()
    }

    #[test]
    fn count_formula() {
        let grid = extract_cubes(&ramp(8, 8, 10), &CubeSpec::tiling(4, 5)).unwrap();
        assert_eq!(grid.grid_dims, (2, 2, 2));
        assert_eq!(grid.len(), 8);
    }

    #[test]
    fn whole_volume_is_one_cube() {
        let seq = ramp(4, 4, 5);
        let grid = extract_cubes(&seq, &CubeSpec::tiling(4, 5)).unwrap();
        assert_eq!(grid.grid_dims, (1, 1, 1));
        let flat: Vec<f64> = seq.frames().iter().flatten().copied().collect();
        assert_eq!(grid.cubes[0].data, flat);
    }

    #[test]
    fn remainder_dropped() {
        let grid = extract_cubes(&ramp(9, 9, 11), &CubeSpec::tiling(4, 5)).unwrap();
        assert_eq!(grid.grid_dims, (2, 2, 2));
        let mut origins: Vec<_> = grid
            .cubes
            .iter()
            .map(|c| (c.origin.x, c.origin.y, c.origin.t))
            .collect();
        let mut brute = Vec::new();
        for x in 0..9 {
            for y in 0..9 {
                for t in 0..11 {
                    if x % 4 == 0
                        && y % 4 == 0
                        && t % 5 == 0
                        && x + 4 <= 9
                        && y + 4 <= 9
                        && t + 5 <= 11
                    {
                        brute.push((x, y, t));
                    }
                }
            }
        }
        assert_eq!(origins, brute);
        origins.sort_unstable();
        assert_eq!(origins.len(), 8);
    }

    #[test]
    fn rejects_oversized_cube() {
        let seq = ramp(4, 6, 5);
        assert!(extract_cubes(&seq, &CubeSpec::tiling(5, 2)).is_err());
        assert!(extract_cubes(&seq, &CubeSpec::tiling(2, 6)).is_err());
        assert!(extract_cubes(&seq, &CubeSpec::tiling(1, 2)).is_err());
    }

    #[test]
    fn tiling_partitions_cropped_volume() {
        let seq = ramp(13, 10, 12);
        let spec = CubeSpec::tiling(3, 4);
        let grid = extract_cubes(&seq, &spec).unwrap();
        let (nx, ny, nt) = grid.grid_dims;
        let voxels: usize = grid.cubes.iter().map(|c| c.data.len()).sum();
        assert_eq!(voxels, (nx * 3) * (ny * 3) * (nt * 4));
        let total: f64 = grid.cubes.iter().flat_map(|c| c.data.iter()).sum();
        let mut direct = 0.0;
        for t in 0..nt * 4 {
            for y in 0..ny * 3 {
                for x in 0..nx * 3 {
                    direct += seq.pixel(t, y, x);
                }
            }
        }
        assert!((total - direct).abs() < 1e-9);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let seq = ramp(20, 17, 9);
        let spec = CubeSpec {
            p: 4,
            q: 3,
            spatial_stride: 3,
            temporal_stride: 2,
        };
        let a = extract_cubes_with(&seq, &spec, Execution::Sequential).unwrap();
        let b = extract_cubes_with(&seq, &spec, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
