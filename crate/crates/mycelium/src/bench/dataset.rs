//! TEXMEX-style vector container I/O and synthetic desk-scale datasets.
//!
//! Each record is a little-endian i32 dimension followed by that many
//! elements: f32 (fvecs), i32 (ivecs), or u8 (bvecs). All records in a file
//! must share the same dimension.

use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::Path;

/// A benchmark dataset: base vectors, queries, optional ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub base: Vec<Vec<f32>>,
    pub queries: Vec<Vec<f32>>,
    pub ground_truth: Option<Vec<Vec<u32>>>,
}

fn read_records<T, F>(path: &Path, mut read_elem: F, elem_size: u64) -> Result<Vec<Vec<T>>>
where
    F: FnMut(&mut BufReader<File>) -> std::io::Result<T>,
{
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut offset: u64 = 0;
    let mut dim: Option<usize> = None;
    loop {
        let d = match reader.read_i32::<LittleEndian>() {
            Ok(d) => d,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        };
        if d <= 0 {
            return Err(Error::Parse {
                offset,
                message: format!("non-positive record dimension {d}"),
            });
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::Parse {
                    offset,
                    message: format!("inconsistent dimension: expected {expected}, got {d}"),
                });
            }
            _ => {}
        }
        offset += 4;
        let mut row = Vec::with_capacity(d);
        for i in 0..d {
            match read_elem(&mut reader) {
                Ok(x) => row.push(x),
                Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
                    return Err(Error::Parse {
                        offset: offset + i as u64 * elem_size,
                        message: format!("truncated record: expected {d} elements, got {i}"),
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        offset += d as u64 * elem_size;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_fvecs(path: &Path) -> Result<Vec<Vec<f32>>> {
    read_records(path, |r| r.read_f32::<LittleEndian>(), 4)
}

pub fn load_ivecs(path: &Path) -> Result<Vec<Vec<i32>>> {
    read_records(path, |r| r.read_i32::<LittleEndian>(), 4)
}

pub fn load_bvecs(path: &Path) -> Result<Vec<Vec<u8>>> {
    read_records(path, |r| r.read_u8(), 1)
}

pub fn write_fvecs(path: &Path, rows: &[Vec<f32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        w.write_i32::<LittleEndian>(row.len() as i32)?;
        for &x in row {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ivecs(path: &Path, rows: &[Vec<u32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        w.write_i32::<LittleEndian>(row.len() as i32)?;
        for &x in row {
            w.write_i32::<LittleEndian>(x as i32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load ground-truth id lists from an ivecs file.
pub fn load_ground_truth(path: &Path) -> Result<Vec<Vec<u32>>> {
    Ok(load_ivecs(path)?
        .into_iter()
        .map(|row| row.into_iter().map(|x| x as u32).collect())
        .collect())
}

/// Gaussian-mixture desk-scale dataset. Base and query vectors are drawn
/// from the same mixture so queries have meaningful near neighbors.
pub fn synthetic_dataset(
    n_base: usize,
    n_queries: usize,
    dim: usize,
    n_clusters: usize,
    seed: u64,
) -> Dataset {
    synthetic_dataset_sigma(n_base, n_queries, dim, n_clusters, 0.3, seed)
}

/// [`synthetic_dataset`] with an explicit per-dimension cluster spread.
pub fn synthetic_dataset_sigma(
    n_base: usize,
    n_queries: usize,
    dim: usize,
    n_clusters: usize,
    sigma: f32,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f32>> = (0..n_clusters.max(1))
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
        .collect();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f32> {
        let c = &centers[rng.gen_range(0..centers.len())];
        (0..dim)
            .map(|d| {
                // Box-Muller
                let u1: f32 = rng.gen_range(1e-9f32..1.0);
                let u2: f32 = rng.gen();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f32::consts::TAU * u2).cos();
                c[d] + sigma * z
            })
            .collect()
    };
    let base = (0..n_base).map(|_| draw(&mut rng)).collect();
    let queries = (0..n_queries).map(|_| draw(&mut rng)).collect();
    Dataset {
        base,
        queries,
        ground_truth: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn single_record_roundtrip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("one.fvecs");
        write_fvecs(&path, &[vec![1.0, 2.0]]).unwrap();
        let rows = load_fvecs(&path).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn empty_file_is_empty_matrix() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("empty.fvecs");
        File::create(&path).unwrap();
        assert!(load_fvecs(&path).unwrap().is_empty());
    }

    #[test]
    fn truncated_record_reports_offset() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("trunc.fvecs");
        let mut w = File::create(&path).unwrap();
        use std::io::Write as _;
        w.write_all(&4i32.to_le_bytes()).unwrap();
        w.write_all(&1.0f32.to_le_bytes()).unwrap();
        drop(w);
        match load_fvecs(&path) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 8);
                assert!(message.contains("truncated"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_dim_rejected() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("mixed.ivecs");
        write_ivecs(&path, &[vec![1, 2], vec![3]]).unwrap();
        assert!(matches!(load_ivecs(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn bvecs_roundtrip_bytes() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("b.bvecs");
        let mut w = File::create(&path).unwrap();
        use std::io::Write as _;
        w.write_all(&3i32.to_le_bytes()).unwrap();
        w.write_all(&[7u8, 8, 9]).unwrap();
        drop(w);
        assert_eq!(load_bvecs(&path).unwrap(), vec![vec![7u8, 8, 9]]);
    }

    #[test]
    fn synthetic_shapes() {
        let d = synthetic_dataset(100, 10, 16, 4, 1);
        assert_eq!(d.base.len(), 100);
        assert_eq!(d.queries.len(), 10);
        assert!(d.base.iter().all(|v| v.len() == 16));
        // deterministic per seed
        let d2 = synthetic_dataset(100, 10, 16, 4, 1);
        assert_eq!(d.base, d2.base);
    }
}
