//! Dataset ingestion, exact nearest-neighbor distances, and the ratio
//! statistics every estimator consumes.
//!
//! Distances are computed by an exact brute-force scan over all pairs:
//! estimator correctness depends on the exact neighbor *order*, so no
//! approximate index is used. The scan parallelizes over query points with
//! output independent of the schedule.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::SeedStream;

/// Distance function tag. Only the Euclidean metric is implemented; the
/// parameter exists so other metrics can be added without interface change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
        }
    }
}

/// Input file layout for [`load_point_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// Comma-separated fields.
    Csv,
    /// Whitespace-separated fields.
    Whitespace,
}

/// An immutable `n x dim` matrix of finite coordinates, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    /// Builds a cloud from row-major data. Requires at least two points, at
    /// least one feature, and finite coordinates throughout.
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "point cloud needs at least one feature column".into(),
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "data length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if n < 2 {
            return Err(Error::DatasetTooSmall(format!(
                "need at least 2 points, got {n}"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coordinate at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { data, dim })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Ambient dimension (number of feature columns).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Removes exact duplicate rows, keeping the first occurrence of each.
    /// Returns the deduplicated cloud and the number of rows dropped.
    pub fn dedupe(&self) -> Result<(PointCloud, usize)> {
        let mut kept: Vec<&[f64]> = Vec::with_capacity(self.len());
        let mut seen = std::collections::HashSet::new();
        for row in self.rows() {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                kept.push(row);
            }
        }
        let dropped = self.len() - kept.len();
        let data: Vec<f64> = kept.into_iter().flatten().copied().collect();
        Ok((PointCloud::new(data, self.dim)?, dropped))
    }

    /// Writes the cloud as CSV (no header), one row per point.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for row in self.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Per point, the sorted distances to (and identities of) its first `k`
/// nearest neighbors. Rows are nondecreasing and strictly positive.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    distances: Vec<f64>,
    indices: Vec<usize>,
    k: usize,
    metric: Metric,
}

impl NeighborTable {
    /// Builds a table from row-major sorted distances and neighbor indices,
    /// `k` entries per point. Every row must be positive and nondecreasing.
    /// The kNN computation uses this internally; it is public so that
    /// externally computed distances can enter the estimator pipeline.
    pub fn new(distances: Vec<f64>, indices: Vec<usize>, k: usize, metric: Metric) -> Result<Self> {
        if k == 0 || distances.len() != indices.len() || !distances.len().is_multiple_of(k) {
            return Err(Error::InvalidArgument(format!(
                "neighbor table of order {k} cannot tile {} distances / {} indices",
                distances.len(),
                indices.len()
            )));
        }
        for (i, row) in distances.chunks_exact(k).enumerate() {
            if row.iter().any(|d| !(*d > 0.0)) || row.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} is not positive nondecreasing"
                )));
            }
        }
        Ok(Self::from_parts(distances, indices, k, metric))
    }

    fn from_parts(distances: Vec<f64>, indices: Vec<usize>, k: usize, metric: Metric) -> Self {
        debug_assert_eq!(distances.len(), indices.len());
        debug_assert_eq!(distances.len() % k, 0);
        Self {
            distances,
            indices,
            k,
            metric,
        }
    }

    /// Number of query points.
    pub fn len(&self) -> usize {
        self.distances.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Neighbor order of the table.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric_name(&self) -> &'static str {
        self.metric.name()
    }

    /// Distance from point `i` to its `order`-th nearest neighbor
    /// (`order` is 1-based, `1 <= order <= k`).
    pub fn distance(&self, i: usize, order: usize) -> f64 {
        self.distances[i * self.k + order - 1]
    }

    /// Index of the `order`-th nearest neighbor of point `i`.
    pub fn neighbor(&self, i: usize, order: usize) -> usize {
        self.indices[i * self.k + order - 1]
    }

    /// Sorted neighbor distances of point `i`.
    pub fn distances_of(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// CSV export with columns `point_index,order,distance,neighbor_index`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point_index,order,distance,neighbor_index\n");
        for i in 0..self.len() {
            for order in 1..=self.k {
                let _ = writeln!(
                    out,
                    "{i},{order},{},{}",
                    self.distance(i, order),
                    self.neighbor(i, order)
                );
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the CSV produced by [`NeighborTable::to_csv`]. The grid must be
    /// complete and rows nondecreasing.
    pub fn parse_csv(text: &str, metric: Metric) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "point_index,order,distance,neighbor_index" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header point_index,order,distance,neighbor_index".into(),
                })
            }
        }
        let mut cells: Vec<(usize, usize, f64, usize)> = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse_usize = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid integer field {s:?}"),
                })
            };
            let dist: f64 = fields[2].trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid distance field {:?}", fields[2]),
            })?;
            cells.push((
                parse_usize(fields[0])?,
                parse_usize(fields[1])?,
                dist,
                parse_usize(fields[3])?,
            ));
        }
        if cells.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "empty neighbor table".into(),
            });
        }
        let n = cells.iter().map(|c| c.0).max().unwrap() + 1;
        let k = cells.iter().map(|c| c.1).max().unwrap();
        if cells.len() != n * k {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "incomplete table: expected {} cells, got {}",
                    n * k,
                    cells.len()
                ),
            });
        }
        let mut distances = vec![f64::NAN; n * k];
        let mut indices = vec![usize::MAX; n * k];
        for (point, order, dist, neighbor) in cells {
            if order == 0 || order > k || point >= n {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("cell ({point}, {order}) out of range"),
                });
            }
            distances[point * k + order - 1] = dist;
            indices[point * k + order - 1] = neighbor;
        }
        for i in 0..n {
            let row = &distances[i * k..(i + 1) * k];
            if row.iter().any(|d| !(*d > 0.0)) || row.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("row {i} is not positive nondecreasing"),
                });
            }
        }
        Ok(Self::from_parts(distances, indices, k, metric))
    }
}

/// A sequence of generic distance ratios `r_{n2} / r_{n1}`, each above 1,
/// with their neighbor orders and the mean neighbor scale
/// `mean_i (r_{i,n2} + r_{i,n1}) / 2`.
#[derive(Debug, Clone)]
pub struct RatioSample {
    values: Vec<f64>,
    n1: usize,
    n2: usize,
    mean_scale: f64,
}

impl RatioSample {
    pub fn new(values: Vec<f64>, n1: usize, n2: usize, mean_scale: f64) -> Result<Self> {
        if n1 < 1 || n2 <= n1 {
            return Err(Error::InvalidArgument(format!(
                "neighbor orders must satisfy 1 <= n1 < n2, got n1={n1}, n2={n2}"
            )));
        }
        if !(mean_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mean scale must be positive, got {mean_scale}"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(*v > 1.0)) {
            return Err(Error::DegenerateRatio {
                point: pos,
                order: n2,
            });
        }
        Ok(Self {
            values,
            n1,
            n2,
            mean_scale,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn mean_scale(&self) -> f64 {
        self.mean_scale
    }
}

/// An `n x (L-1)` matrix of consecutive ratios: column `l-1` holds
/// `r_{i,l} / r_{i,l-1}` for `l = 2..=L`. Every entry is above 1.
#[derive(Debug, Clone)]
pub struct ConsecutiveRatios {
    values: Vec<f64>,
    max_order: usize,
}

impl ConsecutiveRatios {
    pub fn new(values: Vec<f64>, max_order: usize) -> Result<Self> {
        if max_order < 2 {
            return Err(Error::InvalidArgument(format!(
                "consecutive ratios need L >= 2, got {max_order}"
            )));
        }
        let width = max_order - 1;
        if values.is_empty() || !values.len().is_multiple_of(width) {
            return Err(Error::InvalidArgument(format!(
                "ratio matrix length {} does not tile into rows of width {width}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(*v > 1.0)) {
            return Err(Error::DegenerateRatio {
                point: pos / width,
                order: pos % width + 2,
            });
        }
        Ok(Self { values, max_order })
    }

    /// Number of points (rows).
    pub fn len(&self) -> usize {
        self.values.len() / (self.max_order - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The largest neighbor order `L` entering the ratios.
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Ratio `r_{i,l} / r_{i,l-1}` for `2 <= l <= L`.
    pub fn value(&self, i: usize, l: usize) -> f64 {
        self.values[i * (self.max_order - 1) + l - 2]
    }

    /// Row `i` as the slice of ratios for `l = 2..=L`.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = self.max_order - 1;
        &self.values[i * width..(i + 1) * width]
    }
}

/// Reads a delimited text file of coordinates into a [`PointCloud`].
pub fn load_point_cloud(
    path: impl AsRef<Path>,
    format: InputFormat,
    has_header: bool,
) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    parse_point_cloud(&text, format, has_header)
}

/// Parses delimited coordinate text; see [`load_point_cloud`].
pub fn parse_point_cloud(text: &str, format: InputFormat, has_header: bool) -> Result<PointCloud> {
    let mut data: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut rows = 0usize;
    let mut skipped_header = !has_header;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !skipped_header {
            skipped_header = true;
            continue;
        }
        let fields: Vec<&str> = match format {
            InputFormat::Csv => line.split(',').map(str::trim).collect(),
            InputFormat::Whitespace => line.split_whitespace().collect(),
        };
        match dim {
            None => dim = Some(fields.len()),
            Some(d) if d != fields.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {d} fields, got {}", fields.len()),
                })
            }
            _ => {}
        }
        for field in fields {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid numeric field {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value {field:?}"),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "need at least 2 data rows, got {rows}"
        )));
    }
    PointCloud::new(data, dim.unwrap_or(0))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Exact k-nearest-neighbor table by brute-force pairwise scan, parallel
/// over query points. Equal distances break ties toward the smaller point
/// index, so the result is fully deterministic. Two identical points are a
/// hard error: a zero distance would make every downstream ratio undefined.
pub fn knn_table(cloud: &PointCloud, k: usize, metric: Metric) -> Result<NeighborTable> {
    let n = cloud.len();
    if k < 1 || k > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "neighbor order k={k} must lie in [1, {}] for {n} points",
            n - 1
        )));
    }
    let rows: Vec<(Vec<f64>, Vec<usize>)> = exec::try_map_indexed(n, |i| {
        let query = cloud.row(i);
        let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j != i {
                candidates.push((squared_distance(query, cloud.row(j)), j));
            }
        }
        let by_distance_then_index = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(&b.1))
        };
        candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
        candidates.truncate(k);
        candidates.sort_unstable_by(by_distance_then_index);
        if candidates[0].0 == 0.0 {
            let j = candidates[0].1;
            return Err(Error::DegenerateDistance {
                first: i.min(j),
                second: i.max(j),
            });
        }
        let dists: Vec<f64> = candidates.iter().map(|c| c.0.sqrt()).collect();
        let idxs: Vec<usize> = candidates.iter().map(|c| c.1).collect();
        Ok((dists, idxs))
    })?;
    let mut distances = Vec::with_capacity(n * k);
    let mut indices = Vec::with_capacity(n * k);
    for (d, ix) in rows {
        distances.extend(d);
        indices.extend(ix);
    }
    Ok(NeighborTable::from_parts(distances, indices, k, metric))
}

/// Consecutive ratios `r_{i,l} / r_{i,l-1}` for `l = 2..=max_order`. Tied
/// consecutive distances are a degenerate-ratio error naming the offending
/// point and order.
pub fn consecutive_ratios(table: &NeighborTable, max_order: usize) -> Result<ConsecutiveRatios> {
    if max_order < 2 || max_order > table.k() {
        return Err(Error::InvalidArgument(format!(
            "max order L={max_order} must lie in [2, {}]",
            table.k()
        )));
    }
    let n = table.len();
    let width = max_order - 1;
    let mut values = Vec::with_capacity(n * width);
    for i in 0..n {
        for l in 2..=max_order {
            let ratio = table.distance(i, l) / table.distance(i, l - 1);
            if !(ratio > 1.0) {
                return Err(Error::DegenerateRatio { point: i, order: l });
            }
            values.push(ratio);
        }
    }
    ConsecutiveRatios::new(values, max_order)
}

/// Generic ratios `r_{i,n2} / r_{i,n1}` with the per-sample mean scale
/// `mean_i (r_{i,n2} + r_{i,n1}) / 2`.
pub fn generic_ratios(table: &NeighborTable, n1: usize, n2: usize) -> Result<RatioSample> {
    if n1 < 1 || n1 >= n2 || n2 > table.k() {
        return Err(Error::InvalidArgument(format!(
            "orders must satisfy 1 <= n1 < n2 <= {}, got n1={n1}, n2={n2}",
            table.k()
        )));
    }
    let n = table.len();
    let mut values = Vec::with_capacity(n);
    let mut scale_sum = 0.0;
    for i in 0..n {
        let near = table.distance(i, n1);
        let far = table.distance(i, n2);
        let ratio = far / near;
        if !(ratio > 1.0) {
            return Err(Error::DegenerateRatio {
                point: i,
                order: n2,
            });
        }
        values.push(ratio);
        scale_sum += 0.5 * (near + far);
    }
    RatioSample::new(values, n1, n2, scale_sum / n as f64)
}

/// Uniform subsample without replacement of `round(keep_fraction * n)`
/// points, deterministic per seed (partial Fisher-Yates on the index set).
pub fn decimate(cloud: &PointCloud, keep_fraction: f64, seed: u64) -> Result<PointCloud> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let n = cloud.len();
    let size = (keep_fraction * n as f64).round() as usize;
    if size < 2 {
        return Err(Error::DatasetTooSmall(format!(
            "decimation would keep {size} points"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut stream = SeedStream::new(seed);
    for i in 0..size.min(n - 1) {
        let j = i + stream.below(n - i);
        order.swap(i, j);
    }
    // Canonical row order: keep the selected points in their original
    // sequence, so keep_fraction = 1 is the identity.
    let mut selected = order[..size].to_vec();
    selected.sort_unstable();
    let mut data = Vec::with_capacity(size * cloud.dim());
    for &idx in &selected {
        data.extend_from_slice(cloud.row(idx));
    }
    PointCloud::new(data, cloud.dim())
}
