use crate::cache::SingleFlight;
use crate::error::ApiError;
use cohortflow::clustering::{ClusterAssignment, ClusterMethod};
use cohortflow::data::{Cohort, SeverityCoding};
use cohortflow::explain::ExplainPipeline;
use cohortflow::graph::{latent_embed, GTParams, PatientGraph};
use cohortflow::linalg::Mat;
use cohortflow::pipeline::{explain_pipeline, graph_assignment, ward_assignment, AnalysisConfig};
use cohortflow::{Error, Result};
use std::sync::Arc;

type Shared<T> = std::result::Result<Arc<T>, ApiError>;

/// One loaded cohort plus memoized analyses. Every cached value is a pure
/// function of the cohort, the loaded parameters and the request key.
pub struct Session {
    pub cohort: Cohort,
    pub coding: SeverityCoding,
    pub analysis: AnalysisConfig,
    model: Option<(PatientGraph, GTParams)>,
    assignments: SingleFlight<(ClusterMethod, usize), Shared<ClusterAssignment>>,
    latent: SingleFlight<(), Shared<Mat>>,
    explainers: SingleFlight<(ClusterMethod, usize), Shared<ExplainPipeline>>,
    pub(crate) responses: SingleFlight<String, Shared<Vec<u8>>>,
}

impl Session {
    /// Fails when the parameters do not fit the cohort's node features.
    pub fn new(cohort: Cohort, coding: SeverityCoding, analysis: AnalysisConfig, params: Option<GTParams>) -> Result<Self> {
        analysis.validate()?;
        if cohort.is_empty() {
            return Err(Error::InvalidCohort("cohort has no patients".into()));
        }
        let model = match params {
            Some(p) => {
                let graph = PatientGraph::from_cohort(&cohort, &coding, analysis.neighbors)?;
                if p.input_dim() != graph.features.cols() {
                    return Err(Error::Checkpoint(format!(
                        "model expects {} input features, cohort provides {}",
                        p.input_dim(),
                        graph.features.cols()
                    )));
                }
                Some((graph, p))
            }
            None => None,
        };
        Ok(Session {
            cohort,
            coding,
            analysis,
            model,
            assignments: SingleFlight::default(),
            latent: SingleFlight::default(),
            explainers: SingleFlight::default(),
            responses: SingleFlight::default(),
        })
    }

    pub fn model_loaded(&self) -> bool {
        self.model.is_some()
    }

    pub async fn latent(self: &Arc<Self>) -> Shared<Mat> {
        let me = self.clone();
        self.latent
            .get_or_compute((), move || {
                let (graph, params) = me.model.as_ref().ok_or_else(ApiError::model_not_loaded)?;
                Ok(Arc::new(latent_embed(params, graph)?))
            })
            .await
    }

    pub async fn assignment(self: &Arc<Self>, method: ClusterMethod, k: usize) -> Shared<ClusterAssignment> {
        if k == 0 || k > self.cohort.len() {
            return Err(ApiError::invalid(format!("k must be in 1..={}", self.cohort.len())));
        }
        let latent = match method {
            ClusterMethod::GraphAi => Some(self.latent().await?),
            ClusterMethod::WardKnowledge => None,
        };
        let me = self.clone();
        self.assignments
            .get_or_compute((method, k), move || {
                let a = match latent {
                    Some(z) => graph_assignment(&z, k, me.analysis.seed)?,
                    None => ward_assignment(&me.cohort, &me.coding, k)?,
                };
                Ok(Arc::new(a))
            })
            .await
    }

    /// Encoder plus a classifier fitted to the `(method, k)` assignment.
    pub async fn explainer(self: &Arc<Self>, method: ClusterMethod, k: usize) -> Shared<ExplainPipeline> {
        if !self.model_loaded() {
            return Err(ApiError::model_not_loaded());
        }
        let assignment = self.assignment(method, k).await?;
        let me = self.clone();
        self.explainers
            .get_or_compute((method, k), move || {
                let (graph, params) = me.model.clone().ok_or_else(ApiError::model_not_loaded)?;
                Ok(Arc::new(explain_pipeline(graph, params, &assignment, &me.analysis.mlp, me.analysis.seed)?))
            })
            .await
    }

    pub async fn cached_response<F>(self: &Arc<Self>, key: String, build: F) -> Shared<Vec<u8>>
    where
        F: FnOnce() -> std::result::Result<Vec<u8>, ApiError> + Send + 'static,
    {
        self.responses.get_or_compute(key, move || build().map(Arc::new)).await
    }
}
