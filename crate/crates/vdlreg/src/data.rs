//! Data model and partition state: response/covariate storage with an
//! explicit observed mask, cluster membership bookkeeping, and the
//! per-(cluster, covariate) sufficient statistics that drive both the
//! similarity functions and the plug-in standardization.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Column centering/scaling applied at load time, kept so raw values can be
/// recovered and so query points can be mapped onto the training scale.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub x_center: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_center: f64,
    pub y_scale: f64,
}

/// A response vector and covariate matrix with per-entry missingness.
///
/// Missing entries are tracked only through the boolean mask; the value
/// slots behind masked entries hold zeros that no computation is allowed to
/// read. Accessors enforce this.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,    // row-major m * p, masked slots hold 0.0
    mask: Vec<bool>, // row-major m * p, true = observed
    observed: Vec<Vec<usize>>, // per-row sorted observed covariate indices
    missing: Vec<Vec<usize>>,  // complement, per row
    col_names: Vec<String>,
    response_name: String,
    m: usize,
    p: usize,
    standardization: Option<Standardization>,
}

impl Dataset {
    /// Build a dataset from raw parts. `x` and `mask` are row-major `m * p`.
    pub fn from_parts(
        y: Vec<f64>,
        x: Vec<f64>,
        mask: Vec<bool>,
        col_names: Vec<String>,
        response_name: impl Into<String>,
    ) -> Result<Self> {
        let m = y.len();
        let p = col_names.len();
        if m == 0 {
            return Err(Error::EmptyDataset);
        }
        if x.len() != m * p || mask.len() != m * p {
            return Err(Error::DimensionMismatch(format!(
                "expected {} x entries for {} rows x {} columns",
                m * p,
                m,
                p
            )));
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("response at row {}", i + 1)));
            }
        }
        let mut x = x;
        for l in 0..p {
            let mut any = false;
            for i in 0..m {
                if mask[i * p + l] {
                    any = true;
                    if !x[i * p + l].is_finite() {
                        return Err(Error::NonFinite(format!(
                            "covariate '{}' at row {}",
                            col_names[l],
                            i + 1
                        )));
                    }
                } else {
                    x[i * p + l] = 0.0;
                }
            }
            if !any && m > 0 {
                return Err(Error::AllMissingColumn(col_names[l].clone()));
            }
        }
        let observed: Vec<Vec<usize>> = (0..m)
            .map(|i| (0..p).filter(|&l| mask[i * p + l]).collect())
            .collect();
        let missing: Vec<Vec<usize>> = (0..m)
            .map(|i| (0..p).filter(|&l| !mask[i * p + l]).collect())
            .collect();
        Ok(Self {
            y,
            x,
            mask,
            observed,
            missing,
            col_names,
            response_name: response_name.into(),
            m,
            p,
            standardization: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn is_observed(&self, i: usize, l: usize) -> bool {
        self.mask[i * self.p + l]
    }

    /// Observed value of covariate `l` for row `i`. Reading a masked entry is
    /// a logic error.
    pub fn x(&self, i: usize, l: usize) -> f64 {
        debug_assert!(
            self.mask[i * self.p + l],
            "read of missing covariate ({i}, {l})"
        );
        self.x[i * self.p + l]
    }

    /// Sorted observed covariate indices for row `i`.
    pub fn pattern(&self, i: usize) -> &[usize] {
        &self.observed[i]
    }

    /// Sorted missing covariate indices for row `i`.
    pub fn missing_pattern(&self, i: usize) -> &[usize] {
        &self.missing[i]
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        &self.mask[i * self.p..(i + 1) * self.p]
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Raw (pre-standardization) value of an observed entry.
    pub fn raw_x(&self, i: usize, l: usize) -> f64 {
        let v = self.x(i, l);
        match &self.standardization {
            Some(s) => v * s.x_scale[l] + s.x_center[l],
            None => v,
        }
    }

    pub fn raw_y(&self, i: usize) -> f64 {
        match &self.standardization {
            Some(s) => self.y[i] * s.y_scale + s.y_center,
            None => self.y[i],
        }
    }

    /// Center and scale every column (and the response) to zero mean and
    /// unit variance over the observed entries, recording the transform.
    /// Columns with fewer than two observed values or zero spread keep scale 1.
    pub fn standardize(&mut self) {
        if self.standardization.is_some() {
            return;
        }
        let mut x_center = vec![0.0; self.p];
        let mut x_scale = vec![1.0; self.p];
        for l in 0..self.p {
            let vals: Vec<f64> = (0..self.m)
                .filter(|&i| self.mask[i * self.p + l])
                .map(|i| self.x[i * self.p + l])
                .collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            x_center[l] = mean;
            if n >= 2 {
                let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
                let sd = (ss / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    x_scale[l] = sd;
                }
            }
            for i in 0..self.m {
                if self.mask[i * self.p + l] {
                    self.x[i * self.p + l] = (self.x[i * self.p + l] - x_center[l]) / x_scale[l];
                }
            }
        }
        let n = self.m as f64;
        let y_center = self.y.iter().sum::<f64>() / n;
        let mut y_scale = 1.0;
        if self.m >= 2 {
            let ss: f64 = self.y.iter().map(|v| (v - y_center) * (v - y_center)).sum();
            let sd = (ss / (n - 1.0)).sqrt();
            if sd > 0.0 {
                y_scale = sd;
            }
        }
        for v in &mut self.y {
            *v = (*v - y_center) / y_scale;
        }
        self.standardization = Some(Standardization {
            x_center,
            x_scale,
            y_center,
            y_scale,
        });
    }

    /// Apply a transform computed elsewhere (e.g. pooled over train and test,
    /// or the training transform applied to a query set).
    pub fn standardize_with(&mut self, s: &Standardization) -> Result<()> {
        if s.x_center.len() != self.p || s.x_scale.len() != self.p {
            return Err(Error::DimensionMismatch(
                "standardization does not match column count".into(),
            ));
        }
        if self.standardization.is_some() {
            return Err(Error::InvalidArgument("dataset already standardized".into()));
        }
        for l in 0..self.p {
            if !(s.x_scale[l] > 0.0) {
                return Err(Error::InvalidArgument("nonpositive scale".into()));
            }
            for i in 0..self.m {
                if self.mask[i * self.p + l] {
                    self.x[i * self.p + l] = (self.x[i * self.p + l] - s.x_center[l]) / s.x_scale[l];
                }
            }
        }
        for v in &mut self.y {
            *v = (*v - s.y_center) / s.y_scale;
        }
        self.standardization = Some(s.clone());
        Ok(())
    }

    /// Clone with a replacement response vector (used by simulation checks
    /// that resample `y` against fixed covariates).
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.m {
            return Err(Error::DimensionMismatch("response length".into()));
        }
        for v in &y {
            if !v.is_finite() {
                return Err(Error::NonFinite("response".into()));
            }
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    /// Keep only the rows in `keep` (indices into this dataset, in order).
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut y = Vec::with_capacity(keep.len());
        let mut x = Vec::with_capacity(keep.len() * self.p);
        let mut mask = Vec::with_capacity(keep.len() * self.p);
        for &i in keep {
            y.push(self.y[i]);
            x.extend_from_slice(&self.x[i * self.p..(i + 1) * self.p]);
            mask.extend_from_slice(&self.mask[i * self.p..(i + 1) * self.p]);
        }
        let mut out = Self::from_parts(
            y,
            x,
            mask,
            self.col_names.clone(),
            self.response_name.clone(),
        )?;
        out.standardization = self.standardization.clone();
        Ok(out)
    }
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub missing_token: String,
    pub standardize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            missing_token: "NA".into(),
            standardize: false,
        }
    }
}

/// Read a CSV with a header row. The named response column must be fully
/// observed; covariate cells equal to the missing token are masked.
pub fn load_dataset(path: impl AsRef<Path>, response: &str, opts: &LoadOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    load_dataset_from(file, response, opts)
}

pub fn load_dataset_from(reader: impl Read, response: &str, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let resp_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::ResponseColumnMissing(response.to_string()))?;
    let col_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(idx, _)| idx != resp_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let p = col_names.len();

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut mask = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        let mut col = 0usize;
        for (idx, field) in record.iter().enumerate() {
            let field = field.trim();
            if idx == resp_idx {
                if field == opts.missing_token || field.is_empty() {
                    return Err(Error::MissingResponse { row });
                }
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: response.to_string(),
                    value: field.to_string(),
                })?;
                y.push(v);
            } else {
                if field == opts.missing_token || field.is_empty() {
                    x.push(0.0);
                    mask.push(false);
                } else {
                    let v: f64 = field.parse().map_err(|_| Error::Parse {
                        row,
                        column: col_names[col].to_string(),
                        value: field.to_string(),
                    })?;
                    x.push(v);
                    mask.push(true);
                }
                col += 1;
            }
        }
        if col != p {
            return Err(Error::DimensionMismatch(format!(
                "row {} has {} covariate fields, expected {}",
                row, col, p
            )));
        }
    }
    let mut ds = Dataset::from_parts(y, x, mask, col_names, response)?;
    if opts.standardize {
        ds.standardize();
    }
    Ok(ds)
}

/// Count, sum, and sum of squares of the observed values of one covariate in
/// one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellStats {
    pub n: u32,
    pub sum: f64,
    pub sumsq: f64,
}

impl CellStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut c = Self::default();
        for &v in values {
            c.add(v);
        }
        c
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    #[inline]
    pub fn remove(&mut self, v: f64) {
        debug_assert!(self.n > 0);
        self.n -= 1;
        if self.n == 0 {
            self.sum = 0.0;
            self.sumsq = 0.0;
        } else {
            self.sum -= v;
            self.sumsq -= v * v;
        }
    }

    #[inline]
    pub fn with(mut self, v: f64) -> Self {
        self.add(v);
        self
    }

    #[inline]
    pub fn without(mut self, v: f64) -> Self {
        self.remove(v);
        self
    }
}

/// Prior guesses and weights for the plug-in standardization.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PluginPriors {
    /// weight on the location guess
    pub nu: f64,
    /// weight on the scale guess
    pub nu_s: f64,
    /// location guess
    pub mu0_x: f64,
    /// scale guess (a variance), must be positive
    pub s0sq_x: f64,
}

impl Default for PluginPriors {
    fn default() -> Self {
        // unit-information weights; guesses match standardized covariates
        Self {
            nu: 1.0,
            nu_s: 1.0,
            mu0_x: 0.0,
            s0sq_x: 1.0,
        }
    }
}

/// Cluster-local location/scale used to center and scale covariates inside
/// the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginCell {
    pub mean: f64,
    pub var: f64,
}

impl PluginCell {
    /// Standardize an observed covariate value against this cell.
    #[inline]
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.var.sqrt()
    }
}

/// Posterior-mean location and harmonic-mean scale of one cluster/covariate
/// cell under a normal-scaled-inverse-chi-squared prior; the empty cell
/// returns the prior guesses.
pub fn plugin_stats(cell: &CellStats, priors: &PluginPriors) -> PluginCell {
    if cell.n == 0 {
        return PluginCell {
            mean: priors.mu0_x,
            var: priors.s0sq_x,
        };
    }
    let n = cell.n as f64;
    let xbar = cell.sum / n;
    let ss = (cell.sumsq - n * xbar * xbar).max(0.0);
    let mean = (priors.nu * priors.mu0_x + cell.sum) / (priors.nu + n);
    let var = (priors.nu_s * priors.s0sq_x
        + ss
        + (priors.nu * n / (priors.nu + n)) * (xbar - priors.mu0_x) * (xbar - priors.mu0_x))
        / (priors.nu_s + n);
    PluginCell { mean, var }
}

/// Standardize one observed covariate value with the plug-in cell for its
/// cluster.
#[inline]
pub fn standardized_covariate(x: f64, plugin: &PluginCell) -> f64 {
    plugin.standardize(x)
}

/// Cluster labels plus per-cluster member lists. Labels are dense `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<usize>,
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    pub fn single_cluster(m: usize) -> Self {
        Self {
            labels: vec![0; m],
            clusters: vec![(0..m).collect()],
        }
    }

    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = labels.iter().max().unwrap() + 1;
        let mut clusters = vec![Vec::new(); k];
        for (i, &c) in labels.iter().enumerate() {
            clusters[c].push(i);
        }
        if clusters.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidArgument(
                "labels must be contiguous with every cluster nonempty".into(),
            ));
        }
        Ok(Self {
            labels: labels.to_vec(),
            clusters,
        })
    }

    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn members(&self, j: usize) -> &[usize] {
        &self.clusters[j]
    }

    pub fn size(&self, j: usize) -> usize {
        self.clusters[j].len()
    }
}

/// What a move did to the cluster list; callers keeping per-cluster side
/// state (parameters) mirror these effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveEffect {
    /// nothing changed (target equals current cluster)
    None,
    /// moved between existing clusters
    Moved,
    /// a fresh cluster was appended for the item
    Created,
    /// the source cluster emptied; the last cluster was relabeled into `slot`
    RemovedCompacted { slot: usize },
    /// created a fresh cluster and the (singleton) source emptied
    CreatedRemoved { slot: usize },
}

/// Partition together with incrementally maintained cell statistics and the
/// lazily refreshed plug-in values.
#[derive(Debug, Clone)]
pub struct PartitionState {
    partition: Partition,
    cells: Vec<Vec<CellStats>>,   // [cluster][col]
    plugins: Vec<Vec<PluginCell>>, // [cluster][col]
    dirty: Vec<bool>,             // per cluster
    priors: PluginPriors,
    p: usize,
}

impl PartitionState {
    pub fn new(ds: &Dataset, partition: Partition, priors: PluginPriors) -> Self {
        let p = ds.n_cols();
        let cells = recompute_cells(ds, &partition);
        let plugins = cells
            .iter()
            .map(|row| row.iter().map(|c| plugin_stats(c, &priors)).collect())
            .collect();
        let dirty = vec![false; partition.k()];
        Self {
            partition,
            cells,
            plugins,
            dirty,
            priors,
            p,
        }
    }

    pub fn single_cluster(ds: &Dataset, priors: PluginPriors) -> Self {
        Self::new(ds, Partition::single_cluster(ds.n_rows()), priors)
    }

    pub fn from_labels(ds: &Dataset, labels: &[usize], priors: PluginPriors) -> Result<Self> {
        Ok(Self::new(ds, Partition::from_labels(labels)?, priors))
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn label(&self, i: usize) -> usize {
        self.partition.label(i)
    }

    pub fn members(&self, j: usize) -> &[usize] {
        self.partition.members(j)
    }

    pub fn size(&self, j: usize) -> usize {
        self.partition.size(j)
    }

    pub fn priors(&self) -> &PluginPriors {
        &self.priors
    }

    pub fn cell(&self, j: usize, l: usize) -> &CellStats {
        &self.cells[j][l]
    }

    pub fn cells(&self, j: usize) -> &[CellStats] {
        &self.cells[j]
    }

    /// Recompute cluster `j`'s plug-in values if a move left them stale.
    pub fn refresh_plugins(&mut self, j: usize) {
        if self.dirty[j] {
            for l in 0..self.p {
                self.plugins[j][l] = plugin_stats(&self.cells[j][l], &self.priors);
            }
            self.dirty[j] = false;
        }
    }

    /// Plug-in values for cluster `j`; call [`Self::refresh_plugins`] first
    /// after any move that touched the cluster.
    pub fn plugins_ref(&self, j: usize) -> &[PluginCell] {
        debug_assert!(!self.dirty[j], "stale plug-ins read for cluster {j}");
        &self.plugins[j]
    }

    /// Refresh-then-read convenience.
    pub fn plugins(&mut self, j: usize) -> &[PluginCell] {
        self.refresh_plugins(j);
        &self.plugins[j]
    }

    /// Move observation `i` to cluster `target` (an existing index, or `k`
    /// to open a new cluster). Returns how the cluster list changed.
    pub fn apply_move(&mut self, ds: &Dataset, i: usize, target: usize) -> MoveEffect {
        let k = self.partition.k();
        assert!(target <= k, "move target {target} out of range (k = {k})");
        let source = self.partition.label(i);
        if target == source {
            return MoveEffect::None;
        }

        // detach from source
        let pos = self.partition.clusters[source]
            .iter()
            .position(|&m| m == i)
            .expect("member list consistent");
        self.partition.clusters[source].swap_remove(pos);
        for &l in ds.pattern(i) {
            self.cells[source][l].remove(ds.x(i, l));
        }
        self.dirty[source] = true;

        // attach to target
        let created = target == k;
        if created {
            self.partition.clusters.push(vec![i]);
            let mut cells = vec![CellStats::default(); self.p];
            for &l in ds.pattern(i) {
                cells[l].add(ds.x(i, l));
            }
            self.plugins
                .push(cells.iter().map(|c| plugin_stats(c, &self.priors)).collect());
            self.cells.push(cells);
            self.dirty.push(false);
            self.partition.labels[i] = target;
        } else {
            self.partition.clusters[target].push(i);
            for &l in ds.pattern(i) {
                self.cells[target][l].add(ds.x(i, l));
            }
            self.dirty[target] = true;
            self.partition.labels[i] = target;
        }

        if self.partition.clusters[source].is_empty() {
            // compact: relabel the last cluster into the vacated slot
            let last = self.partition.clusters.len() - 1;
            if source == last {
                self.partition.clusters.pop();
                self.cells.pop();
                self.plugins.pop();
                self.dirty.pop();
            } else {
                let moved = self.partition.clusters.pop().unwrap();
                for &mbr in &moved {
                    self.partition.labels[mbr] = source;
                }
                self.partition.clusters[source] = moved;
                self.cells[source] = self.cells.pop().unwrap();
                self.plugins[source] = self.plugins.pop().unwrap();
                self.dirty[source] = self.dirty.pop().unwrap();
            }
            if created {
                MoveEffect::CreatedRemoved { slot: source }
            } else {
                MoveEffect::RemovedCompacted { slot: source }
            }
        } else if created {
            MoveEffect::Created
        } else {
            MoveEffect::Moved
        }
    }

    /// Full recomputation used as an oracle against the incremental path.
    pub fn recomputed_cells(&self, ds: &Dataset) -> Vec<Vec<CellStats>> {
        recompute_cells(ds, &self.partition)
    }

    /// Check partition invariants and incremental-vs-recomputed agreement.
    /// `tol` is the absolute tolerance per accumulator.
    pub fn consistent_with(&self, ds: &Dataset, tol: f64) -> bool {
        let k = self.partition.k();
        if self.cells.len() != k || self.plugins.len() != k || self.dirty.len() != k {
            return false;
        }
        let mut seen = vec![false; self.partition.n_items()];
        for j in 0..k {
            if self.partition.clusters[j].is_empty() {
                return false;
            }
            for &i in &self.partition.clusters[j] {
                if seen[i] || self.partition.labels[i] != j {
                    return false;
                }
                seen[i] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return false;
        }
        let fresh = recompute_cells(ds, &self.partition);
        for j in 0..k {
            for l in 0..self.p {
                let a = &self.cells[j][l];
                let b = &fresh[j][l];
                if a.n != b.n
                    || (a.sum - b.sum).abs() > tol
                    || (a.sumsq - b.sumsq).abs() > tol
                {
                    return false;
                }
            }
        }
        true
    }
}

fn recompute_cells(ds: &Dataset, partition: &Partition) -> Vec<Vec<CellStats>> {
    let p = ds.n_cols();
    let mut cells = vec![vec![CellStats::default(); p]; partition.k()];
    for j in 0..partition.k() {
        for &i in partition.members(j) {
            for &l in ds.pattern(i) {
                cells[j][l].add(ds.x(i, l));
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_csv() -> &'static str {
        "y,x1,x2\n1.0,1,5\n2.0,3,NA\n3.0,NA,7\n"
    }

    #[test]
    fn load_standardizes_observed_entries() {
        let opts = LoadOptions {
            standardize: true,
            ..Default::default()
        };
        let ds = load_dataset_from(toy_csv().as_bytes(), "y", &opts).unwrap();
        // x1 observed values {1, 3}: mean 2, sd sqrt(2)
        assert_relative_eq!(ds.x(0, 0), -1.0 / f64::sqrt(2.0), epsilon = 1e-12);
        assert_relative_eq!(ds.x(1, 0), 1.0 / f64::sqrt(2.0), epsilon = 1e-12);
        assert!(!ds.is_observed(2, 0));
    }

    #[test]
    fn load_without_standardize_is_identity() {
        let ds = load_dataset_from(toy_csv().as_bytes(), "y", &LoadOptions::default()).unwrap();
        assert_eq!(ds.x(0, 0), 1.0);
        assert_eq!(ds.x(1, 0), 3.0);
        assert!(!ds.is_observed(1, 1));
        assert_eq!(ds.x(2, 1), 7.0);
    }

    #[test]
    fn missing_response_names_row() {
        let csv = "y,x1\n1.0,2\nNA,3\n";
        let err = load_dataset_from(csv.as_bytes(), "y", &LoadOptions::default()).unwrap_err();
        match err {
            Error::MissingResponse { row } => assert_eq!(row, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn all_missing_column_rejected() {
        let csv = "y,x1,x2\n1.0,NA,1\n2.0,NA,2\n";
        let err = load_dataset_from(csv.as_bytes(), "y", &LoadOptions::default()).unwrap_err();
        match err {
            Error::AllMissingColumn(name) => assert_eq!(name, "x1"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_location() {
        let csv = "y,x1\n1.0,2\n2.0,oops\n";
        let err = load_dataset_from(csv.as_bytes(), "y", &LoadOptions::default()).unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x1");
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn standardize_then_invert_recovers_raw() {
        let csv = "y,x1,x2\n1.5,10,0.3\n-2.0,12,NA\n0.7,9,0.9\n4.0,NA,0.1\n";
        let raw = load_dataset_from(csv.as_bytes(), "y", &LoadOptions::default()).unwrap();
        let opts = LoadOptions {
            standardize: true,
            ..Default::default()
        };
        let std = load_dataset_from(csv.as_bytes(), "y", &opts).unwrap();
        for i in 0..raw.n_rows() {
            assert_relative_eq!(std.raw_y(i), raw.y(i), max_relative = 1e-12);
            for l in 0..raw.n_cols() {
                if raw.is_observed(i, l) {
                    assert_relative_eq!(std.raw_x(i, l), raw.x(i, l), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn plugin_stats_matches_hand_values() {
        let priors = PluginPriors::default();
        let cell = CellStats::from_values(&[1.0, 2.0, 3.0]);
        let pc = plugin_stats(&cell, &priors);
        assert_relative_eq!(pc.mean, 1.5, epsilon = 1e-12);
        assert_relative_eq!(pc.var, 1.5, epsilon = 1e-12);

        let empty = CellStats::default();
        let pc = plugin_stats(&empty, &priors);
        assert_eq!((pc.mean, pc.var), (0.0, 1.0));

        let single = CellStats::from_values(&[0.0]);
        let pc = plugin_stats(&single, &priors);
        assert_relative_eq!(pc.mean, 0.0, epsilon = 1e-12);
        assert_relative_eq!(pc.var, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn plugin_mean_fixed_point() {
        // adding a point equal to the current plug-in mean leaves it unchanged
        let priors = PluginPriors::default();
        let cell = CellStats::from_values(&[0.4, 1.9, -0.8]);
        let pc = plugin_stats(&cell, &priors);
        let grown = cell.with(pc.mean);
        let pc2 = plugin_stats(&grown, &priors);
        assert_relative_eq!(pc2.mean, pc.mean, epsilon = 1e-12);
    }

    #[test]
    fn standardized_covariate_examples() {
        let pc = PluginCell { mean: 1.5, var: 1.5 };
        assert_relative_eq!(standardized_covariate(1.5, &pc), 0.0);
        assert_relative_eq!(
            standardized_covariate(3.0, &pc),
            1.5 / 1.5f64.sqrt(),
            epsilon = 1e-12
        );
        let pc = PluginCell { mean: 0.0, var: 0.5 };
        assert_relative_eq!(standardized_covariate(0.0, &pc), 0.0);
    }

    fn small_ds() -> Dataset {
        // 4 rows, 2 cols, one missing entry each for rows 2 and 3
        let y = vec![0.1, -0.4, 1.2, 0.9];
        let x = vec![1.0, 2.0, -1.0, 0.5, 3.0, 0.0, 0.0, -2.0];
        let mask = vec![true, true, true, true, true, false, false, true];
        Dataset::from_parts(y, x, mask, vec!["a".into(), "b".into()], "y").unwrap()
    }

    #[test]
    fn apply_move_matches_recompute() {
        let ds = small_ds();
        let mut st = PartitionState::single_cluster(&ds, PluginPriors::default());
        assert!(st.consistent_with(&ds, 1e-10));
        // split everything into singletons and merge back, checking at each step
        let moves = [
            (1usize, 1usize),
            (2, 2),
            (3, 3),
            (3, 0),
            (2, 1),
            (0, 1),
            (1, 0),
        ];
        for &(i, t) in &moves {
            let t = t.min(st.k());
            st.apply_move(&ds, i, t);
            assert!(st.consistent_with(&ds, 1e-10), "after move {i} -> {t}");
        }
    }

    #[test]
    fn move_to_own_cluster_is_noop() {
        let ds = small_ds();
        let mut st = PartitionState::single_cluster(&ds, PluginPriors::default());
        let before = st.partition().clone();
        let eff = st.apply_move(&ds, 2, 0);
        assert_eq!(eff, MoveEffect::None);
        assert_eq!(st.partition(), &before);
    }

    #[test]
    fn emptied_cluster_compacts_labels() {
        let ds = small_ds();
        let mut st =
            PartitionState::from_labels(&ds, &[0, 0, 1, 2], PluginPriors::default()).unwrap();
        // move the sole member of cluster 1 into cluster 0: cluster 2 must slide into slot 1
        let eff = st.apply_move(&ds, 2, 0);
        assert_eq!(eff, MoveEffect::RemovedCompacted { slot: 1 });
        assert_eq!(st.k(), 2);
        assert_eq!(st.label(3), 1);
        assert!(st.consistent_with(&ds, 1e-10));
    }

    #[test]
    fn masked_entries_never_enter_stats() {
        let ds = small_ds();
        let st = PartitionState::single_cluster(&ds, PluginPriors::default());
        // column b: rows 0,1,3 observed => n = 3
        assert_eq!(st.cell(0, 1).n, 3);
        assert_relative_eq!(st.cell(0, 1).sum, 2.0 + 0.5 - 2.0);
    }
}
