//! Little-endian binary layouts for ensembles and clusterings.
//!
//! Ensemble file, 64-byte header followed by `M d (n + 1)` f64 values in
//! trajectory-major, time-major order:
//!
//! | offset | type     | content              |
//! |--------|----------|----------------------|
//! | 0      | [u8; 2]  | magic `CF`           |
//! | 2      | u8       | version (1)          |
//! | 3      | u8       | dimension `d`        |
//! | 4      | u32      | steps `n`            |
//! | 8      | u32      | x intervals `nx`     |
//! | 12     | u32      | y intervals `ny`     |
//! | 16     | f64 x 4  | xmin, xmax, ymin, ymax |
//! | 48     | f64      | t0                   |
//! | 56     | f64      | dt                   |
//!
//! `M = (nx + 1)(ny + 1)`; the spacings are `(xmax - xmin) / nx` and
//! `(ymax - ymin) / ny`.
//!
//! Clustering file, 16-byte header (`CK`, version, reserved byte, then u32 `k`,
//! `M`, `p`), `M` u32 labels, and `k p` f64 centroid values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::advect::{GridSpec, TimeSpec, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::kmeans::Clustering;

pub const ENSEMBLE_MAGIC: [u8; 2] = *b"CF";
pub const CLUSTERING_MAGIC: [u8; 2] = *b"CK";
pub const FORMAT_VERSION: u8 = 1;
pub const ENSEMBLE_HEADER_LEN: usize = 64;
pub const CLUSTERING_HEADER_LEN: usize = 16;

fn bad(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Export(format!("{what} = {v} does not fit the file format")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

pub fn ensemble_to_bytes(e: &TrajectoryEnsemble) -> Result<Vec<u8>> {
    let g = e.grid();
    let t = e.time();
    let d = u8::try_from(e.dim()).map_err(|_| Error::Export("dimension does not fit in a byte".into()))?;
    let mut out = Vec::with_capacity(ENSEMBLE_HEADER_LEN + 8 * e.features().len());
    out.extend_from_slice(&ENSEMBLE_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(d);
    out.extend_from_slice(&u32_of(t.steps, "steps")?.to_le_bytes());
    out.extend_from_slice(&u32_of(g.nx, "nx")?.to_le_bytes());
    out.extend_from_slice(&u32_of(g.ny, "ny")?.to_le_bytes());
    for v in [g.xmin, g.xmax, g.ymin, g.ymax, t.t0, t.dt] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(out.len(), ENSEMBLE_HEADER_LEN);
    for v in e.features().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn ensemble_from_bytes(bytes: &[u8], path: &Path) -> Result<TrajectoryEnsemble> {
    if bytes.len() < ENSEMBLE_HEADER_LEN {
        return Err(bad(path, "truncated header"));
    }
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<2>() != ENSEMBLE_MAGIC {
        return Err(bad(path, "not an ensemble file"));
    }
    let version = r.u8();
    if version != FORMAT_VERSION {
        return Err(bad(path, format!("unsupported version {version}")));
    }
    let d = r.u8() as usize;
    let steps = r.u32() as usize;
    let nx = r.u32() as usize;
    let ny = r.u32() as usize;
    let (xmin, xmax, ymin, ymax) = (r.f64(), r.f64(), r.f64(), r.f64());
    let (t0, dt) = (r.f64(), r.f64());
    let grid = GridSpec::from_counts(xmin, xmax, ymin, ymax, nx, ny).map_err(|e| bad(path, e.to_string()))?;
    let time = TimeSpec::new(t0, dt, steps).map_err(|e| bad(path, e.to_string()))?;
    let m = grid.node_count();
    let p = d * time.samples();
    let expected = ENSEMBLE_HEADER_LEN + 8 * m * p;
    if bytes.len() != expected {
        return Err(bad(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let data = (0..m * p).map(|_| r.f64()).collect();
    let features = Array2::from_shape_vec((m, p), data).expect("length checked");
    TrajectoryEnsemble::from_features(grid, time, d, features)
}

pub fn write_ensemble(e: &TrajectoryEnsemble, path: &Path) -> Result<()> {
    fs::write(path, ensemble_to_bytes(e)?)?;
    Ok(())
}

pub fn read_ensemble(path: &Path) -> Result<TrajectoryEnsemble> {
    ensemble_from_bytes(&fs::read(path)?, path)
}

/// Long-format CSV (`trajectory,sample,t,x0,x1,...`), meant for small ensembles.
pub fn ensemble_to_csv(e: &TrajectoryEnsemble) -> String {
    let mut s = String::from("trajectory,sample,t");
    for q in 0..e.dim() {
        let _ = write!(s, ",x{q}");
    }
    s.push('\n');
    for j in 0..e.len() {
        for i in 0..=e.steps() {
            let _ = write!(s, "{j},{i},{:e}", e.time().time(i));
            for v in e.position(j, i) {
                let _ = write!(s, ",{v:e}");
            }
            s.push('\n');
        }
    }
    s
}

pub fn clustering_to_bytes(c: &Clustering) -> Result<Vec<u8>> {
    let (k, p) = c.centroids.dim();
    let mut out = Vec::with_capacity(CLUSTERING_HEADER_LEN + 4 * c.labels.len() + 8 * k * p);
    out.extend_from_slice(&CLUSTERING_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(0);
    out.extend_from_slice(&u32_of(k, "k")?.to_le_bytes());
    out.extend_from_slice(&u32_of(c.labels.len(), "M")?.to_le_bytes());
    out.extend_from_slice(&u32_of(p, "feature length")?.to_le_bytes());
    for &l in &c.labels {
        out.extend_from_slice(&u32_of(l, "label")?.to_le_bytes());
    }
    for v in c.centroids.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Labels and centroids stored in a clustering file.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredClustering {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
}

pub fn clustering_from_bytes(bytes: &[u8], path: &Path) -> Result<StoredClustering> {
    if bytes.len() < CLUSTERING_HEADER_LEN {
        return Err(bad(path, "truncated header"));
    }
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<2>() != CLUSTERING_MAGIC {
        return Err(bad(path, "not a clustering file"));
    }
    let version = r.u8();
    if version != FORMAT_VERSION {
        return Err(bad(path, format!("unsupported version {version}")));
    }
    r.u8();
    let (k, m, p) = (r.u32() as usize, r.u32() as usize, r.u32() as usize);
    let expected = CLUSTERING_HEADER_LEN + 4 * m + 8 * k * p;
    if bytes.len() != expected {
        return Err(bad(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let labels: Vec<usize> = (0..m).map(|_| r.u32() as usize).collect();
    if labels.iter().any(|&l| l >= k) {
        return Err(bad(path, "label out of range"));
    }
    let data = (0..k * p).map(|_| r.f64()).collect();
    Ok(StoredClustering {
        labels,
        centroids: Array2::from_shape_vec((k, p), data).expect("length checked"),
    })
}

pub fn write_clustering(c: &Clustering, path: &Path) -> Result<()> {
    fs::write(path, clustering_to_bytes(c)?)?;
    Ok(())
}

pub fn read_clustering(path: &Path) -> Result<StoredClustering> {
    clustering_from_bytes(&fs::read(path)?, path)
}

/// Per-iteration WCSS of a single k-means run.
pub fn history_to_csv(c: &Clustering) -> String {
    let mut s = String::from("iteration,wcss\n");
    for (i, w) in c.history.iter().enumerate() {
        let _ = writeln!(s, "{},{w:e}", i + 1);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advect::build_ensemble;
    use crate::fields::DoubleGyre;
    use crate::kmeans::{kmeans, KMeansConfig};

    fn ensemble() -> TrajectoryEnsemble {
        let g = GridSpec::new(0.0, 2.0, 0.0, 1.0, 0.25, 0.25).unwrap();
        let t = TimeSpec::new(0.5, 0.1, 12).unwrap();
        build_ensemble(&DoubleGyre::default(), &g, &t).unwrap()
    }

    #[test]
    fn ensemble_header_layout() {
        let e = ensemble();
        let b = ensemble_to_bytes(&e).unwrap();
        assert_eq!(&b[0..2], b"CF");
        assert_eq!(b[2], 1);
        assert_eq!(b[3], 2);
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 12);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(b[48..56].try_into().unwrap()), 0.5);
        assert_eq!(f64::from_le_bytes(b[56..64].try_into().unwrap()), 0.1);
        assert_eq!(b.len(), 64 + 8 * 45 * 26);
        // first sample of trajectory 1 is its seed (0.25, 0)
        assert_eq!(f64::from_le_bytes(b[64 + 8 * 26..64 + 8 * 27].try_into().unwrap()), 0.25);
    }

    #[test]
    fn ensemble_round_trip_and_errors() {
        let e = ensemble();
        let b = ensemble_to_bytes(&e).unwrap();
        let p = Path::new("mem");
        assert_eq!(ensemble_from_bytes(&b, p).unwrap(), e);
        assert!(ensemble_from_bytes(&b[..b.len() - 1], p).is_err());
        assert!(ensemble_from_bytes(&b[..10], p).is_err());
        let mut wrong = b.clone();
        wrong[0] = b'X';
        assert!(ensemble_from_bytes(&wrong, p).is_err());
    }

    #[test]
    fn clustering_round_trip() {
        let e = ensemble();
        let c = kmeans(e.features().view(), &KMeansConfig::new(5, 2)).unwrap();
        let b = clustering_to_bytes(&c).unwrap();
        assert_eq!(b.len(), 16 + 4 * 45 + 8 * 5 * 26);
        let back = clustering_from_bytes(&b, Path::new("mem")).unwrap();
        assert_eq!(back.labels, c.labels);
        assert_eq!(back.centroids, c.centroids);
    }

    #[test]
    fn ensemble_csv_rows() {
        let e = ensemble();
        let csv = ensemble_to_csv(&e);
        assert_eq!(csv.lines().count(), 1 + 45 * 13);
        assert_eq!(csv.lines().nth(1).unwrap(), "0,0,5e-1,0e0,0e0");
    }
}
