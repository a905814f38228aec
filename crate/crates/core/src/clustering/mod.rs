//! Similarity oracle for elastic segments: standardize, optionally project with
//! PCA, fit HDBSCAN on a bank sample with the two query vectors appended, and
//! read the queries' labels.

pub mod hdbscan;
mod matrix;
pub mod pca;
pub mod standardize;

pub use hdbscan::{fit_hdbscan, mutual_reachability, ClusterModel, CondensedEdge, HdbscanParams, NOISE};
pub use matrix::Matrix;
pub use pca::{fit_pca, PcaBasis, Projection};
pub use standardize::Standardizer;

use crate::error::{Error, Result};

/// Label of one query row. Outliers carry the row they were found at, so two
/// outliers never compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClusterLabel {
    Cluster(usize),
    Outlier(usize),
}

impl ClusterLabel {
    pub fn from_raw(label: i32, row: usize) -> Self {
        if label < 0 {
            ClusterLabel::Outlier(row)
        } else {
            ClusterLabel::Cluster(label as usize)
        }
    }

    pub fn is_outlier(&self) -> bool {
        matches!(self, ClusterLabel::Outlier(_))
    }

    /// Raw integer label, −1 for outliers.
    pub fn raw(&self) -> i32 {
        match self {
            ClusterLabel::Cluster(c) => *c as i32,
            ClusterLabel::Outlier(_) => NOISE,
        }
    }
}

/// True iff both labels name the same cluster. Any outlier makes the pair dissimilar.
pub fn labels_equal(a: ClusterLabel, b: ClusterLabel) -> bool {
    match (a, b) {
        (ClusterLabel::Cluster(x), ClusterLabel::Cluster(y)) => x == y,
        _ => false,
    }
}

/// Decides whether the segment start and the newest state are similar.
pub trait Similarity: Send {
    /// `sample` is the bank draw; `start` and `next` are the two query feature vectors.
    fn assign(&mut self, sample: &[&[f64]], start: &[f64], next: &[f64]) -> Result<[ClusterLabel; 2]>;

    /// Labels of every row of the most recent full fit (sample rows, then the two queries).
    fn last_labels(&self) -> Option<&[i32]> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub hdbscan: HdbscanParams,
    pub max_components: usize,
    /// Refit every this many calls; in between, queries are labelled against the cached fit.
    pub refit_interval: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            hdbscan: HdbscanParams::default(),
            max_components: 30,
            refit_interval: 1,
        }
    }
}

/// One complete fit of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFit {
    pub standardizer: Standardizer,
    pub projection: Projection,
    pub model: ClusterModel,
}

impl PipelineFit {
    fn embed(&self, row: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; row.len()];
        self.standardizer.transform_row(row, &mut z);
        let mut out = vec![0.0; self.projection.output_dim(row.len())];
        self.projection.apply_row(&z, &mut out);
        out
    }

    /// Label of an unseen row: the label of its nearest fitted row under mutual reachability.
    pub fn predict(&self, row: &[f64]) -> i32 {
        let q = self.embed(row);
        let data = &self.model.data;
        let dists: Vec<f64> = data.iter_rows().map(|r| hdbscan::euclidean(&q, r)).collect();
        let k = self.model.params.min_samples.min(dists.len());
        let mut sorted = dists.clone();
        sorted.sort_by(f64::total_cmp);
        // The query is its own first neighbour.
        let core_q = if k <= 1 { 0.0 } else { sorted[k - 2] };
        let mut best = (f64::INFINITY, NOISE);
        for (i, d) in dists.iter().enumerate() {
            let w = core_q.max(self.model.core_distances[i]).max(d / self.model.params.alpha);
            if w < best.0 {
                best = (w, self.model.labels[i]);
            }
        }
        best.1
    }
}

/// Standardize, project and cluster `rows`.
pub fn fit_pipeline(rows: &[&[f64]], params: &PipelineParams) -> Result<PipelineFit> {
    let raw = Matrix::from_rows(rows)?;
    if !raw.is_finite() {
        return Err(Error::NonFinite("clustering features".into()));
    }
    let standardizer = Standardizer::fit(&raw)?;
    let z = standardizer.transform(&raw)?;
    let projection = fit_pca(&z, params.max_components)?;
    let projected = projection.apply(&z)?;
    let model = fit_hdbscan(&projected, params.hdbscan)?;
    Ok(PipelineFit {
        standardizer,
        projection,
        model,
    })
}

/// The production similarity oracle.
#[derive(Debug, Clone)]
pub struct ClusterPipeline {
    params: PipelineParams,
    calls: u64,
    cached: Option<PipelineFit>,
}

impl ClusterPipeline {
    pub fn new(params: PipelineParams) -> Result<Self> {
        if params.refit_interval == 0 {
            return Err(Error::Config("cluster_refit_interval must be at least 1".into()));
        }
        if params.max_components == 0 {
            return Err(Error::Config("max_components must be at least 1".into()));
        }
        Ok(Self {
            params,
            calls: 0,
            cached: None,
        })
    }

    pub fn params(&self) -> &PipelineParams {
        &self.params
    }

    pub fn last_fit(&self) -> Option<&PipelineFit> {
        self.cached.as_ref()
    }
}

impl Similarity for ClusterPipeline {
    fn assign(&mut self, sample: &[&[f64]], start: &[f64], next: &[f64]) -> Result<[ClusterLabel; 2]> {
        let width = start.len();
        if next.len() != width || sample.iter().any(|r| r.len() != width) {
            return Err(Error::Contract("query and sample widths differ".into()));
        }
        let refit = self.cached.is_none() || self.calls % self.params.refit_interval as u64 == 0;
        self.calls += 1;
        if refit {
            let mut rows: Vec<&[f64]> = Vec::with_capacity(sample.len() + 2);
            rows.extend_from_slice(sample);
            rows.push(start);
            rows.push(next);
            let n = rows.len();
            let fit = fit_pipeline(&rows, &self.params)?;
            let labels = [
                ClusterLabel::from_raw(fit.model.labels[n - 2], n - 2),
                ClusterLabel::from_raw(fit.model.labels[n - 1], n - 1),
            ];
            self.cached = Some(fit);
            Ok(labels)
        } else {
            let fit = self.cached.as_ref().expect("checked above");
            let n = fit.model.num_rows();
            Ok([
                ClusterLabel::from_raw(fit.predict(start), n),
                ClusterLabel::from_raw(fit.predict(next), n + 1),
            ])
        }
    }

    fn last_labels(&self) -> Option<&[i32]> {
        self.cached.as_ref().map(|f| f.model.labels.as_slice())
    }
}

/// Every pair is dissimilar.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllDistinct;

impl Similarity for AllDistinct {
    fn assign(&mut self, _: &[&[f64]], _: &[f64], _: &[f64]) -> Result<[ClusterLabel; 2]> {
        Ok([ClusterLabel::Outlier(0), ClusterLabel::Outlier(1)])
    }
}

/// Every pair is similar.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleCluster;

impl Similarity for SingleCluster {
    fn assign(&mut self, _: &[&[f64]], _: &[f64], _: &[f64]) -> Result<[ClusterLabel; 2]> {
        Ok([ClusterLabel::Cluster(0), ClusterLabel::Cluster(0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob_rows(seed: u64, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for c in [0.0, 40.0] {
            for _ in 0..30 {
                rows.push((0..dim).map(|_| c + rng.gen_range(-1.0..1.0)).collect());
            }
        }
        rows
    }

    #[test]
    fn label_equality_rules() {
        use ClusterLabel::*;
        assert!(labels_equal(Cluster(3), Cluster(3)));
        assert!(!labels_equal(Cluster(3), Cluster(2)));
        assert!(!labels_equal(Outlier(4), Outlier(4)));
        assert!(!labels_equal(Cluster(2), Outlier(0)));
        assert!(!labels_equal(Outlier(0), Cluster(2)));
    }

    #[test]
    fn queries_inside_blobs() {
        let rows = blob_rows(1, 3);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut p = ClusterPipeline::new(PipelineParams::default()).unwrap();
        let same = p.assign(&refs, &[0.1, 0.0, -0.2], &[0.3, 0.1, 0.0]).unwrap();
        assert!(labels_equal(same[0], same[1]));
        let apart = p.assign(&refs, &[0.1, 0.0, -0.2], &[40.0, 40.0, 40.0]).unwrap();
        assert!(!labels_equal(apart[0], apart[1]));
        assert_eq!(p.last_labels().unwrap().len(), rows.len() + 2);
    }

    #[test]
    fn far_outliers_are_dissimilar() {
        let rows = blob_rows(2, 2);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut p = ClusterPipeline::new(PipelineParams::default()).unwrap();
        let l = p.assign(&refs, &[1e4, -1e4], &[-1e4, 1e4]).unwrap();
        assert!(l[0].is_outlier() && l[1].is_outlier());
        assert!(!labels_equal(l[0], l[1]));
    }

    #[test]
    fn identical_queries_share_a_label() {
        let rows = blob_rows(3, 2);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut p = ClusterPipeline::new(PipelineParams::default()).unwrap();
        let l = p.assign(&refs, &[40.2, 39.9], &[40.2, 39.9]).unwrap();
        assert_eq!(l[0].raw(), l[1].raw());
    }

    #[test]
    fn wide_features_are_projected() {
        let rows = blob_rows(4, 64);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let fit = fit_pipeline(&refs, &PipelineParams::default()).unwrap();
        assert_eq!(fit.model.data.cols(), 30);
        assert_eq!(fit.model.num_clusters(), 2);
    }

    #[test]
    fn cached_fit_predicts_blob_labels() {
        let rows = blob_rows(5, 3);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let params = PipelineParams { refit_interval: 3, ..Default::default() };
        let mut p = ClusterPipeline::new(params).unwrap();
        p.assign(&refs, &[0.0; 3], &[40.0; 3]).unwrap();
        let before = p.last_fit().cloned();
        let l = p.assign(&refs, &[0.2, 0.1, 0.0], &[0.0, 0.3, 0.1]).unwrap();
        assert_eq!(p.last_fit().cloned(), before);
        assert!(labels_equal(l[0], l[1]));
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let rows = blob_rows(6, 3);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut p = ClusterPipeline::new(PipelineParams::default()).unwrap();
        assert!(p.assign(&refs, &[0.0; 2], &[0.0; 3]).is_err());
    }
}
