//! Hybrid hot/cold vector tier.
//!
//! Every vector is written through to a memory-mapped cold file at put time,
//! so the hot tier is purely a cache: eviction just drops the in-memory copy.
//! Records are fixed-stride (d bytes quantized, 4d raw) addressed by NodeId.
//!
//! Cold file layout: header { magic "MYCV", version u32, dim u32, stride u32 }
//! (all little-endian), then records at `header_size + id * stride`.

use crate::vecmath::{raw_to_bytes, QuantizationParams};
use crate::{Error, NodeId, Result};
use memmap2::Mmap;
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

pub const COLD_MAGIC: &[u8; 4] = b"MYCV";
pub const COLD_VERSION: u32 = 1;
pub const COLD_HEADER_BYTES: u64 = 16;

#[derive(Debug, Clone)]
pub struct StorageConfig {
    pub ram_limit_bytes: usize,
    /// Fraction of the RAM budget available to the hot tier.
    pub hot_ratio: f64,
    /// Fraction of hot capacity dropped per eviction batch.
    pub eviction_batch_ratio: f64,
    pub quantize: bool,
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self {
            ram_limit_bytes: 256 * 1024 * 1024,
            hot_ratio: 0.20,
            eviction_batch_ratio: 0.10,
            quantize: true,
        }
    }
}

struct HotEntry {
    bytes: Box<[u8]>,
    last_used: u64,
}

/// Vector storage with an in-memory hot tier over a write-through cold file.
pub struct VectorStore {
    dim: usize,
    stride: usize,
    config: StorageConfig,
    params: Option<QuantizationParams>,
    hot: HashMap<NodeId, HotEntry>,
    hot_capacity: usize,
    clock: u64,
    file: File,
    path: PathBuf,
    file_len: u64,
    mmap: Option<Mmap>,
    mapped_len: u64,
    encode_buf: Vec<u8>,
    // keeps the backing tempdir alive when no explicit path was given
    _tmp: Option<tempfile::TempDir>,
}

impl VectorStore {
    /// Create a store backed by a cold file in a fresh temporary directory.
    pub fn new(dim: usize, config: StorageConfig) -> Result<Self> {
        let tmp = tempfile::TempDir::new()?;
        let path = tmp.path().join("vectors.cold");
        let mut s = Self::create_at(dim, config, &path)?;
        s._tmp = Some(tmp);
        Ok(s)
    }

    /// Create a store with the cold file at an explicit path (truncates).
    pub fn create_at(dim: usize, config: StorageConfig, path: &Path) -> Result<Self> {
        let stride = if config.quantize { dim } else { dim * 4 };
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)?;
        let mut header = [0u8; COLD_HEADER_BYTES as usize];
        header[0..4].copy_from_slice(COLD_MAGIC);
        header[4..8].copy_from_slice(&COLD_VERSION.to_le_bytes());
        header[8..12].copy_from_slice(&(dim as u32).to_le_bytes());
        header[12..16].copy_from_slice(&(stride as u32).to_le_bytes());
        file.write_all_at(&header, 0)?;
        let hot_capacity =
            ((config.ram_limit_bytes as f64 * config.hot_ratio) / stride as f64).max(1.0) as usize;
        Ok(Self {
            dim,
            stride,
            config,
            params: None,
            hot: HashMap::new(),
            hot_capacity,
            clock: 0,
            file,
            path: path.to_path_buf(),
            file_len: COLD_HEADER_BYTES,
            mmap: None,
            mapped_len: 0,
            encode_buf: vec![0u8; stride],
            _tmp: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn quantized(&self) -> bool {
        self.config.quantize
    }

    pub fn cold_path(&self) -> &Path {
        &self.path
    }

    pub fn params(&self) -> Option<&QuantizationParams> {
        self.params.as_ref()
    }

    pub fn set_params(&mut self, params: QuantizationParams) -> Result<()> {
        if params.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: params.dim(),
            });
        }
        self.params = Some(params);
        Ok(())
    }

    pub fn hot_capacity(&self) -> usize {
        self.hot_capacity
    }

    pub fn hot_len(&self) -> usize {
        self.hot.len()
    }

    pub fn hot_contains(&self, id: NodeId) -> bool {
        self.hot.contains_key(&id)
    }

    /// Bytes held by hot-tier vector copies.
    pub fn hot_bytes(&self) -> usize {
        self.hot.len() * self.stride
    }

    fn record_offset(&self, id: NodeId) -> u64 {
        COLD_HEADER_BYTES + id as u64 * self.stride as u64
    }

    fn ensure_file_len(&mut self, needed: u64) -> Result<()> {
        if needed <= self.file_len {
            return Ok(());
        }
        let mut new_len = self.file_len.max(COLD_HEADER_BYTES + self.stride as u64);
        while new_len < needed {
            new_len *= 2;
        }
        self.file.set_len(new_len)?;
        self.file_len = new_len;
        Ok(())
    }

    fn ensure_mapped(&mut self) -> Result<()> {
        if self.mapped_len < self.file_len {
            self.mmap = Some(unsafe { Mmap::map(&self.file)? });
            self.mapped_len = self.file_len;
        }
        Ok(())
    }

    /// Encode (when quantizing) and store a vector. The cold record is written
    /// eagerly; the vector also lands hot, evicting a batch first if the hot
    /// tier is at capacity.
    pub fn put_vector(&mut self, id: NodeId, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if self.config.quantize {
            let params = self.params.as_ref().ok_or(Error::QuantizerNotFitted)?;
            let mut buf = std::mem::take(&mut self.encode_buf);
            params.encode_into(v, &mut buf);
            self.encode_buf = buf;
        } else {
            raw_to_bytes(v, &mut self.encode_buf);
        }
        let offset = self.record_offset(id);
        self.ensure_file_len(offset + self.stride as u64)?;
        self.file.write_all_at(&self.encode_buf, offset)?;
        self.ensure_mapped()?;
        if self.hot.len() >= self.hot_capacity && !self.hot.contains_key(&id) {
            self.evict_batch();
        }
        self.clock += 1;
        let bytes = self.encode_buf.clone().into_boxed_slice();
        self.hot.insert(
            id,
            HotEntry {
                bytes,
                last_used: self.clock,
            },
        );
        Ok(())
    }

    /// Read a stored record without touching recency or promoting. Safe on the
    /// search path: no allocation, no mutation.
    #[inline]
    pub fn peek(&self, id: NodeId) -> &[u8] {
        if let Some(e) = self.hot.get(&id) {
            return &e.bytes;
        }
        let offset = self.record_offset(id) as usize;
        let map = self
            .mmap
            .as_ref()
            .expect("cold file not mapped; no vector was ever stored");
        &map[offset..offset + self.stride]
    }

    /// Read a record, updating recency on a hot hit and promoting on a cold
    /// hit. Deleted ids remain readable until compaction.
    pub fn get_vector(&mut self, id: NodeId) -> Result<&[u8]> {
        let offset = self.record_offset(id);
        if offset + self.stride as u64 > self.file_len {
            return Err(Error::UnknownNode(id));
        }
        self.clock += 1;
        let clock = self.clock;
        if let Some(e) = self.hot.get_mut(&id) {
            e.last_used = clock;
        } else {
            self.ensure_mapped()?;
            let map = self.mmap.as_ref().unwrap();
            let start = offset as usize;
            let bytes: Box<[u8]> = map[start..start + self.stride].into();
            if self.hot.len() >= self.hot_capacity {
                self.evict_batch();
            }
            self.hot.insert(
                id,
                HotEntry {
                    bytes,
                    last_used: clock,
                },
            );
        }
        Ok(&self.hot[&id].bytes)
    }

    /// Drop the least-recently-used `ceil(batch_ratio * hot_capacity)` hot
    /// entries. Cold records already exist, so this is pure cache shedding.
    pub fn evict_batch(&mut self) -> usize {
        if self.hot.is_empty() {
            return 0;
        }
        let batch = ((self.hot_capacity as f64 * self.config.eviction_batch_ratio).ceil() as usize)
            .clamp(1, self.hot.len());
        let mut by_recency: Vec<(u64, NodeId)> =
            self.hot.iter().map(|(&id, e)| (e.last_used, id)).collect();
        if batch < by_recency.len() {
            by_recency.select_nth_unstable(batch - 1);
            by_recency.truncate(batch);
        }
        for (_, id) in &by_recency {
            self.hot.remove(id);
        }
        by_recency.len()
    }

    /// Drop a single id from the hot tier (used when its node is deleted).
    pub fn evict_id(&mut self, id: NodeId) {
        self.hot.remove(&id);
    }

    /// Decode a stored record back to f32 values.
    pub fn decode_record(&self, bytes: &[u8]) -> Vec<f32> {
        if self.config.quantize {
            self.params
                .as_ref()
                .expect("quantizer fitted")
                .decode_codes(bytes)
        } else {
            crate::vecmath::bytes_to_raw(bytes)
        }
    }

    /// Squared L2 between a full-precision query and the stored record for `id`.
    #[inline]
    pub fn distance_to(&self, query: &[f32], id: NodeId) -> f32 {
        let bytes = self.peek(id);
        if self.config.quantize {
            self.params
                .as_ref()
                .expect("quantizer fitted")
                .asymmetric_distance(query, bytes)
        } else {
            crate::vecmath::squared_l2_bytes(query, bytes)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_store(quantize: bool, hot_entries: usize, dim: usize) -> VectorStore {
        let stride = if quantize { dim } else { dim * 4 };
        let config = StorageConfig {
            ram_limit_bytes: hot_entries * stride * 5,
            hot_ratio: 0.2,
            eviction_batch_ratio: 0.10,
            quantize,
        };
        let mut s = VectorStore::new(dim, config).unwrap();
        if quantize {
            let lo = vec![-1.0f32; dim];
            let hi = vec![1.0f32; dim];
            s.set_params(QuantizationParams::fit([lo.as_slice(), hi.as_slice()]).unwrap())
                .unwrap();
        }
        s
    }

    #[test]
    fn put_then_get_identical_bytes() {
        let mut s = small_store(true, 100, 8);
        let v: Vec<f32> = (0..8).map(|i| i as f32 / 8.0).collect();
        s.put_vector(3, &v).unwrap();
        let expected = s.params().unwrap().encode(&v).codes;
        assert_eq!(s.get_vector(3).unwrap(), expected.as_slice());
        assert_eq!(s.peek(3), expected.as_slice());
    }

    #[test]
    fn quantized_record_is_dim_bytes() {
        let mut s = small_store(true, 100, 128);
        let v = vec![0.5f32; 128];
        s.put_vector(0, &v).unwrap();
        assert_eq!(s.stride(), 128);
        assert_eq!(s.peek(0).len(), 128);
    }

    #[test]
    fn bytes_survive_eviction() {
        let mut s = small_store(false, 10, 4);
        let vs: Vec<Vec<f32>> = (0..30)
            .map(|i| (0..4).map(|d| (i * 4 + d) as f32).collect())
            .collect();
        for (i, v) in vs.iter().enumerate() {
            s.put_vector(i as NodeId, v).unwrap();
        }
        assert!(s.hot_len() <= s.hot_capacity());
        for (i, v) in vs.iter().enumerate() {
            let got = s.decode_record(s.peek(i as NodeId));
            assert_eq!(&got, v);
        }
    }

    #[test]
    fn capacity_overflow_fires_one_batch() {
        let mut s = small_store(false, 10, 4);
        let cap = s.hot_capacity();
        for i in 0..cap {
            s.put_vector(i as NodeId, &[i as f32; 4]).unwrap();
        }
        assert_eq!(s.hot_len(), cap);
        s.put_vector(cap as NodeId, &[9.0; 4]).unwrap();
        let batch = ((cap as f64 * 0.10).ceil()) as usize;
        assert_eq!(s.hot_len(), cap - batch + 1);
    }

    #[test]
    fn evict_batch_empty_is_zero() {
        let mut s = small_store(false, 10, 4);
        assert_eq!(s.evict_batch(), 0);
    }

    #[test]
    fn eviction_drops_least_recent() {
        let mut s = small_store(false, 10, 4);
        let cap = s.hot_capacity();
        for i in 0..cap {
            s.put_vector(i as NodeId, &[i as f32; 4]).unwrap();
        }
        // touch id 0 so it is the most recent
        s.get_vector(0).unwrap();
        s.evict_batch();
        assert!(s.hot_contains(0));
        assert!(!s.hot_contains(1));
    }

    #[test]
    fn zipf_access_beats_uniform_hit_rate() {
        let n = 2000u32;
        let gets = 100_000usize;
        let mut hits = [0usize; 2];
        for (case, skewed) in [(0usize, false), (1usize, true)] {
            let mut s = small_store(false, 100, 4);
            for i in 0..n {
                s.put_vector(i, &[i as f32; 4]).unwrap();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..gets {
                let u: f64 = rng.gen();
                let id = if skewed {
                    // power-law-ish skew toward low ids
                    ((u * u * u) * n as f64) as u32
                } else {
                    (u * n as f64) as u32
                }
                .min(n - 1);
                if s.hot_contains(id) {
                    hits[case] += 1;
                }
                s.get_vector(id).unwrap();
            }
        }
        assert!(hits[1] > hits[0], "zipf {} uniform {}", hits[1], hits[0]);
    }

    #[test]
    fn cold_file_header_layout() {
        let s = small_store(true, 10, 16);
        let bytes = std::fs::read(s.cold_path()).unwrap();
        assert_eq!(&bytes[0..4], COLD_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 16);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 16);
    }

    #[test]
    fn unknown_id_errors() {
        let mut s = small_store(false, 10, 4);
        s.put_vector(0, &[0.0; 4]).unwrap();
        assert!(matches!(s.get_vector(500), Err(Error::UnknownNode(500))));
    }

    #[test]
    fn dimension_mismatch_errors() {
        let mut s = small_store(false, 10, 4);
        assert!(matches!(
            s.put_vector(0, &[0.0; 5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
