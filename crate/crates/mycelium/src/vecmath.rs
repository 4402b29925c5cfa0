//! Distance computation and scalar quantization.
//!
//! All graph-internal comparisons use squared L2: the square root is monotone,
//! so orderings are identical and the hot loop skips the `sqrt`. Stored vectors
//! may be quantized to one byte per dimension; queries stay in f32 and stored
//! codes are dequantized on the fly (asymmetric distance).

use crate::{Error, Result};

/// Floor applied to per-dimension ranges so constant dimensions never divide
/// by zero. Codes for such dimensions collapse to 0.
pub const RANGE_FLOOR: f32 = 1e-6;

/// Per-dimension linear scaling parameters for u8 quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationParams {
    pub mins: Vec<f32>,
    pub ranges: Vec<f32>,
}

/// A vector compressed to one byte per dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedVector {
    pub codes: Vec<u8>,
}

/// Squared Euclidean distance between two full-precision vectors.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len(), "dimension mismatch");
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Checked variant of [`squared_l2`] for API boundaries.
pub fn squared_l2_checked(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(squared_l2(a, b))
}

impl QuantizationParams {
    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Fit per-dimension min/range over a collection of vectors. Degenerate
    /// (constant) dimensions are clamped to [`RANGE_FLOOR`].
    pub fn fit<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let mut iter = vectors.into_iter();
        let first = iter.next().ok_or(Error::EmptyInput("fit_quantizer"))?;
        let dim = first.len();
        let mut mins = first.to_vec();
        let mut maxs = first.to_vec();
        for v in iter {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            for d in 0..dim {
                if v[d] < mins[d] {
                    mins[d] = v[d];
                }
                if v[d] > maxs[d] {
                    maxs[d] = v[d];
                }
            }
        }
        let ranges = mins
            .iter()
            .zip(maxs.iter())
            .map(|(lo, hi)| (hi - lo).max(RANGE_FLOOR))
            .collect();
        Ok(Self { mins, ranges })
    }

    /// Encode a vector to u8 codes: `round(clamp((v - min) / range, 0, 1) * 255)`.
    /// Rounding is half away from zero (`f32::round`). Out-of-range values
    /// clamp to 0 or 255.
    pub fn encode(&self, v: &[f32]) -> QuantizedVector {
        debug_assert_eq!(v.len(), self.dim(), "dimension mismatch");
        let codes = v
            .iter()
            .zip(self.mins.iter().zip(self.ranges.iter()))
            .map(|(&x, (&min, &range))| {
                let t = ((x - min) / range).clamp(0.0, 1.0);
                (t * 255.0).round() as u8
            })
            .collect();
        QuantizedVector { codes }
    }

    /// Encode into a caller-provided byte buffer (no allocation).
    pub fn encode_into(&self, v: &[f32], out: &mut [u8]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for d in 0..v.len() {
            let t = ((v[d] - self.mins[d]) / self.ranges[d]).clamp(0.0, 1.0);
            out[d] = (t * 255.0).round() as u8;
        }
    }

    /// Reconstruct an approximate vector: `min + (code / 255) * range`.
    pub fn decode(&self, q: &QuantizedVector) -> Vec<f32> {
        self.decode_codes(&q.codes)
    }

    pub fn decode_codes(&self, codes: &[u8]) -> Vec<f32> {
        debug_assert_eq!(codes.len(), self.dim());
        codes
            .iter()
            .zip(self.mins.iter().zip(self.ranges.iter()))
            .map(|(&c, (&min, &range))| min + (c as f32 / 255.0) * range)
            .collect()
    }

    /// Squared L2 between a full-precision query and stored codes, dequantizing
    /// each dimension on the fly.
    #[inline]
    pub fn asymmetric_distance(&self, q: &[f32], codes: &[u8]) -> f32 {
        debug_assert_eq!(q.len(), codes.len(), "dimension mismatch");
        let mut acc = 0.0f32;
        for d in 0..q.len() {
            let decoded = self.mins[d] + (codes[d] as f32) * (self.ranges[d] / 255.0);
            let diff = q[d] - decoded;
            acc += diff * diff;
        }
        acc
    }
}

/// Squared L2 between a query and a stored vector serialized as little-endian
/// f32 bytes (the unquantized storage layout).
#[inline]
pub fn squared_l2_bytes(q: &[f32], bytes: &[u8]) -> f32 {
    debug_assert_eq!(bytes.len(), q.len() * 4);
    let mut acc = 0.0f32;
    for (d, chunk) in bytes.chunks_exact(4).enumerate() {
        let x = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let diff = q[d] - x;
        acc += diff * diff;
    }
    acc
}

/// Serialize a vector to little-endian f32 bytes into `out`.
pub fn raw_to_bytes(v: &[f32], out: &mut [u8]) {
    debug_assert_eq!(out.len(), v.len() * 4);
    for (chunk, x) in out.chunks_exact_mut(4).zip(v.iter()) {
        chunk.copy_from_slice(&x.to_le_bytes());
    }
}

/// Deserialize little-endian f32 bytes back to a vector.
pub fn bytes_to_raw(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}
