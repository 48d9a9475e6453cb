//! Exact joint sampling of (W^H, W) path batches on a reference grid, with
//! deterministic chunked seeding, stride subsampling for coarse schemes, and
//! an optional binary dump format.
//!
//! Draw order contract: paths are split into chunks of `stream_layout`
//! consecutive path indices; chunk k uses ChaCha8 keyed by the batch seed
//! with stream counter k, and standard normals are consumed column-major
//! (all 2n coordinates of one path, then the next path). This makes batches
//! bitwise reproducible for a fixed (seed, stream_layout, grid, H) no matter
//! how many worker threads participate. `stream_layout = 1` degenerates to
//! strict per-path keying.

use crate::error::{Result, RoughVolError};
use crate::grid::TimeGrid;
use crate::hurst::HurstParams;
use crate::psd::PsdFactor;
use crate::real::Real;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read as IoRead, Write as IoWrite};
use std::path::Path;

/// Default number of paths per RNG stream chunk.
pub const DEFAULT_STREAM_LAYOUT: usize = 1024;

/// Magic bytes opening a path dump file.
pub const DUMP_MAGIC: [u8; 8] = *b"RVOLPATH";
/// Dump format version written by this build.
pub const DUMP_VERSION: u32 = 1;

/// A batch of M coupled (W^H, W) paths on the full grid (row 0 is t = 0).
#[derive(Clone, Debug)]
pub struct PathBatch<T: Real> {
    pub grid: TimeGrid<T>,
    pub hurst: HurstParams<T>,
    /// (n+1)×M, row 0 all zeros
    pub wh: DMatrix<T>,
    /// (n+1)×M, row 0 all zeros
    pub w: DMatrix<T>,
    pub seed: u64,
    pub stream_layout: usize,
}

impl<T: Real> PathBatch<T> {
    pub fn m(&self) -> usize {
        self.wh.ncols()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }
}

/// Standard-normal matrix for one chunk: ChaCha8(seed, stream = chunk),
/// filled column-major.
pub fn standard_normal_chunk<T: Real>(seed: u64, chunk: u64, rows: usize, cols: usize) -> DMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut z = DMatrix::<T>::zeros(rows, cols);
    for v in z.as_mut_slice() {
        *v = T::std_normal(&mut rng);
    }
    z
}

/// Apply `f` to every chunk of correlated draws X = factor·Z. Chunks are
/// processed in parallel; the returned values are in chunk order. `f`
/// receives (chunk index, first path index, X with one column per path).
pub fn gaussian_chunks<T, A, F>(
    factor: &DMatrix<T>,
    m: usize,
    seed: u64,
    stream_layout: usize,
    f: F,
) -> Vec<A>
where
    T: Real,
    A: Send,
    F: Fn(usize, usize, &DMatrix<T>) -> A + Send + Sync,
{
    assert!(stream_layout > 0, "stream_layout must be positive");
    let dim = factor.nrows();
    let n_chunks = m.div_ceil(stream_layout);
    (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * stream_layout;
            let cols = usize::min(stream_layout, m - start);
            let z = standard_normal_chunk::<T>(seed, k as u64, dim, cols);
            let x = factor * z;
            f(k, start, &x)
        })
        .collect()
}

/// Draw M coupled paths using a factor built from `build_joint_covariance`
/// over the same (grid, hp). Column j of the correlated draw holds the n
/// W^H coordinates followed by the n W coordinates of path j.
pub fn sample_joint_paths<T: Real>(
    factor: &PsdFactor<T>,
    grid: &TimeGrid<T>,
    hp: &HurstParams<T>,
    m: usize,
    seed: u64,
    stream_layout: usize,
) -> PathBatch<T> {
    let n = grid.n();
    debug_assert_eq!(factor.factor.nrows(), 2 * n);
    let mut wh = DMatrix::<T>::zeros(n + 1, m);
    let mut w = DMatrix::<T>::zeros(n + 1, m);
    let chunks = gaussian_chunks(&factor.factor, m, seed, stream_layout, |_, start, x| {
        (start, x.clone())
    });
    for (start, x) in chunks {
        for c in 0..x.ncols() {
            let j = start + c;
            for i in 0..n {
                wh[(i + 1, j)] = x[(i, c)];
                w[(i + 1, j)] = x[(n + i, c)];
            }
        }
    }
    PathBatch {
        grid: *grid,
        hurst: *hp,
        wh,
        w,
        seed,
        stream_layout,
    }
}

/// Stride view over a batch: rows 0, stride, 2·stride, …, n.
#[derive(Clone, Copy)]
pub struct BatchView<'a, T: Real> {
    batch: &'a PathBatch<T>,
    stride: usize,
    n_view: usize,
}

impl<'a, T: Real> BatchView<'a, T> {
    /// number of steps in the view (its grid has n()+1 points)
    pub fn n(&self) -> usize {
        self.n_view
    }

    pub fn m(&self) -> usize {
        self.batch.m()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn hurst(&self) -> &HurstParams<T> {
        &self.batch.hurst
    }

    pub fn horizon(&self) -> T {
        self.batch.grid.horizon()
    }

    /// time of view point k, k in 0..=n()
    pub fn t(&self, k: usize) -> T {
        self.batch.grid.point(k * self.stride)
    }

    /// view step size
    pub fn dt(&self) -> T {
        self.batch.grid.point(self.stride)
    }

    pub fn wh(&self, k: usize, j: usize) -> T {
        self.batch.wh[(k * self.stride, j)]
    }

    pub fn w(&self, k: usize, j: usize) -> T {
        self.batch.w[(k * self.stride, j)]
    }
}

/// View of every stride-th row. Errors unless stride ≥ 1 divides n.
pub fn subsample<T: Real>(batch: &PathBatch<T>, stride: usize) -> Result<BatchView<'_, T>> {
    let n = batch.n();
    if stride == 0 || n % stride != 0 {
        return Err(RoughVolError::BadStride { stride, n });
    }
    Ok(BatchView {
        batch,
        stride,
        n_view: n / stride,
    })
}

/// Sample moments of one scalar component at one grid point.
#[derive(Clone, Copy, Debug)]
pub struct MomentStats<T> {
    pub mean: T,
    /// unbiased sample variance
    pub var: T,
    /// raw fourth moment (mean of x⁴)
    pub m4: T,
    pub se_mean: T,
    pub se_var: T,
    pub se_m4: T,
}

/// Per-grid-point moments of both components.
#[derive(Clone, Debug)]
pub struct MomentTable<T> {
    pub t: Vec<T>,
    pub wh: Vec<MomentStats<T>>,
    pub w: Vec<MomentStats<T>>,
}

fn row_stats<T: Real>(row: &[T]) -> MomentStats<T> {
    let m = row.len();
    let mf = T::lit(m as f64);
    let mean = row.iter().fold(T::zero(), |a, &x| a + x) / mf;
    let (mut s2, mut s4, mut s8, mut s4c) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &x in row {
        let d = x - mean;
        s2 += d * d;
        s4c += d * d * d * d;
        let x4 = x * x * x * x;
        s4 += x4;
        s8 += x4 * x4;
    }
    let var = s2 / T::lit((m - 1) as f64);
    let m4 = s4 / mf;
    let m8 = s8 / mf;
    // central fourth moment drives the variance of the variance estimator
    let m4c = s4c / mf;
    let nonneg_sqrt = |v: T| num_traits::Float::sqrt(num_traits::Float::max(v, T::zero()));
    MomentStats {
        mean,
        var,
        m4,
        se_mean: nonneg_sqrt(var / mf),
        se_var: nonneg_sqrt((m4c - var * var) / mf),
        se_m4: nonneg_sqrt((m8 - m4 * m4) / mf),
    }
}

/// Mean, unbiased variance, and raw fourth moment of W^H and W at every grid
/// point, with large-sample standard errors. Needs at least two paths.
pub fn empirical_moments<T: Real>(batch: &PathBatch<T>) -> MomentTable<T> {
    assert!(batch.m() >= 2, "moments need at least two paths");
    let n = batch.n();
    let mut table = MomentTable {
        t: Vec::with_capacity(n + 1),
        wh: Vec::with_capacity(n + 1),
        w: Vec::with_capacity(n + 1),
    };
    for i in 0..=n {
        table.t.push(batch.grid.point(i));
        let wh_row: Vec<T> = batch.wh.row(i).iter().copied().collect();
        let w_row: Vec<T> = batch.w.row(i).iter().copied().collect();
        table.wh.push(row_stats(&wh_row));
        table.w.push(row_stats(&w_row));
    }
    table
}

fn io_err(path: &Path, source: std::io::Error) -> RoughVolError {
    RoughVolError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> RoughVolError {
    RoughVolError::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: msg.into(),
    }
}

/// Write a batch as: 64-byte header (magic, version u32, scalar bits u32,
/// H f64, horizon f64, n u64, M u64, seed u64, stream_layout u64), then the
/// WH matrix, then W, both column-major little-endian f64.
pub fn dump_batch<T: Real>(batch: &PathBatch<T>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut header = Vec::with_capacity(64);
    header.extend_from_slice(&DUMP_MAGIC);
    header.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    header.extend_from_slice(&(std::mem::size_of::<T>() as u32 * 8).to_le_bytes());
    header.extend_from_slice(&batch.hurst.h().as_f64().to_le_bytes());
    header.extend_from_slice(&batch.grid.horizon().as_f64().to_le_bytes());
    header.extend_from_slice(&(batch.n() as u64).to_le_bytes());
    header.extend_from_slice(&(batch.m() as u64).to_le_bytes());
    header.extend_from_slice(&batch.seed.to_le_bytes());
    header.extend_from_slice(&(batch.stream_layout as u64).to_le_bytes());
    debug_assert_eq!(header.len(), 64);
    out.write_all(&header).map_err(|e| io_err(path, e))?;
    for mat in [&batch.wh, &batch.w] {
        for v in mat.as_slice() {
            out.write_all(&v.as_f64().to_le_bytes())
                .map_err(|e| io_err(path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Read a batch written by `dump_batch`. Values are converted to T.
pub fn load_batch<T: Real>(path: &Path) -> Result<PathBatch<T>> {
    let mut input = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut header = [0u8; 64];
    input.read_exact(&mut header).map_err(|e| io_err(path, e))?;
    if header[..8] != DUMP_MAGIC {
        return Err(format_err(path, "bad magic bytes"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != DUMP_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let h = f64_at(16);
    let horizon = f64_at(24);
    let n = u64_at(32) as usize;
    let m = u64_at(40) as usize;
    let seed = u64_at(48);
    let stream_layout = u64_at(56) as usize;

    let hurst = HurstParams::<T>::new(T::lit(h)).map_err(|_| format_err(path, "bad H in header"))?;
    let grid =
        TimeGrid::new(T::lit(horizon), n).map_err(|_| format_err(path, "bad grid in header"))?;
    if stream_layout == 0 {
        return Err(format_err(path, "zero stream_layout"));
    }

    let mut read_matrix = |rows: usize, cols: usize| -> Result<DMatrix<T>> {
        let mut mat = DMatrix::<T>::zeros(rows, cols);
        let mut buf = [0u8; 8];
        for v in mat.as_mut_slice() {
            input.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
            *v = T::lit(f64::from_le_bytes(buf));
        }
        Ok(mat)
    };
    let wh = read_matrix(n + 1, m)?;
    let w = read_matrix(n + 1, m)?;
    let mut trailing = [0u8; 1];
    match input.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(format_err(path, "trailing bytes after matrices")),
        Err(e) => return Err(io_err(path, e)),
    }
    Ok(PathBatch {
        grid,
        hurst,
        wh,
        w,
        seed,
        stream_layout,
    })
}
