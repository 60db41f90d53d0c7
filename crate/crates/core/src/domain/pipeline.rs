//! Re-fitting a bundle from measured expansion records, and the two
//! consistency checks run against a fitted bundle.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    classify_mixture, FirstBoundary, GroupLabel, GroupModel, MixVar, Mixture, ModelBundle, Provenance,
    ProvenanceKind, Term, SCHEMA_VERSION,
};
use crate::clustering::{self, KMeansResult, Standardizer};
use crate::curveproc::{self, ExpansionSeries, FailurePoint};
use crate::error::{Error, Result, Stage};
use crate::numkernel::Matrix;
use crate::pca::{self, DominantVariable, PcaResult};
use crate::regression::fit_group_model;
use crate::svm::{self, LinearBoundary, SvmConfig, SvmFit};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Smoothing weight on the original sample.
    pub alpha: f64,
    pub k: usize,
    pub box_constraint: f64,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    /// Expansion percent that defines failure.
    pub failure_threshold: f64,
    /// z-score the (t_fail, slope) features before K-means.
    pub standardize_features: bool,
    /// Smooth series before extracting clustering features.
    pub smooth_before_clustering: bool,
    /// Groups whose series are smoothed before regression.
    pub smooth_for_regression: Vec<GroupLabel>,
    pub pca_components: usize,
    pub pca_standardize: bool,
    /// Build each group's regressors from the PCA-dominant variables instead
    /// of the standard model terms.
    pub data_driven_selection: bool,
    pub first_axes: [MixVar; 2],
    pub second_axes: [MixVar; 2],
    /// Train boundaries on z-scored axes, mapped back to raw units. Without
    /// it the narrow W/C range makes a separating line too costly to the
    /// regulariser.
    pub svm_standardize: bool,
    /// Labels given to clusters ordered by ascending mean failure time.
    /// Defaults depend on `k`: `[HN, ML, LL]`, `[HN, LL]` or `[LL]`.
    pub cluster_labels: Option<Vec<GroupLabel>>,
    pub use_simplified_first: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: curveproc::DEFAULT_ALPHA,
            k: 3,
            box_constraint: svm::DEFAULT_BOX_CONSTRAINT,
            seed: 0,
            kmeans_restarts: clustering::DEFAULT_RESTARTS,
            kmeans_max_iter: clustering::DEFAULT_MAX_ITER,
            failure_threshold: curveproc::DEFAULT_THRESHOLD,
            standardize_features: true,
            smooth_before_clustering: true,
            smooth_for_regression: vec![GroupLabel::ML, GroupLabel::LL],
            pca_components: pca::DEFAULT_COMPONENTS,
            pca_standardize: true,
            data_driven_selection: false,
            first_axes: [MixVar::C3a, MixVar::Wc],
            second_axes: [MixVar::C3s, MixVar::Wc],
            svm_standardize: true,
            cluster_labels: None,
            use_simplified_first: true,
        }
    }
}

impl PipelineConfig {
    fn labels_for_clusters(&self) -> Result<Vec<GroupLabel>> {
        let labels = match &self.cluster_labels {
            Some(l) => l.clone(),
            None => match self.k {
                3 => vec![GroupLabel::HN, GroupLabel::ML, GroupLabel::LL],
                2 => vec![GroupLabel::HN, GroupLabel::LL],
                1 => vec![GroupLabel::LL],
                k => {
                    return Err(Error::InvalidConfig(format!(
                        "k = {k} needs explicit cluster labels (at most 3 groups)"
                    )))
                }
            },
        };
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if labels.len() != self.k || seen.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "{} distinct cluster labels needed for k = {}",
                self.k, self.k
            )));
        }
        Ok(labels)
    }
}

/// Outcome of the expansion-based grouping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterStage {
    pub failure_points: Vec<FailurePoint>,
    pub standardizer: Standardizer,
    pub kmeans: KMeansResult,
    /// Label of each cluster index.
    pub cluster_labels: Vec<GroupLabel>,
    /// Label of each specimen.
    pub labels: Vec<GroupLabel>,
}

impl ClusterStage {
    pub fn size(&self, group: GroupLabel) -> usize {
        self.labels.iter().filter(|&&g| g == group).count()
    }
}

fn prepare_series(series: &ExpansionSeries, alpha: f64, smooth: bool) -> Result<ExpansionSeries> {
    if smooth && series.len() >= 3 {
        curveproc::smooth(series, alpha)
    } else {
        Ok(series.clone())
    }
}

/// Groups specimens by their expansion records: failure-point features,
/// K-means, then clusters labelled by ascending mean failure time.
pub fn cluster_groups(dataset: &[(Mixture, ExpansionSeries)], config: &PipelineConfig) -> Result<ClusterStage> {
    let cluster_labels_by_rank = config.labels_for_clusters()?;
    let mut failure_points = Vec::with_capacity(dataset.len());
    for (mix, series) in dataset {
        let prepared = prepare_series(series, config.alpha, config.smooth_before_clustering)
            .map_err(|e| e.at_mixture(Stage::Smoothing, &mix.id))?;
        let fp = curveproc::failure_point(&prepared, config.failure_threshold)
            .map_err(|e| e.at_mixture(Stage::Features, &mix.id))?;
        failure_points.push(fp);
    }
    let features: Vec<Vec<f64>> = failure_points.iter().map(|fp| vec![fp.t_fail, fp.slope]).collect();
    if features.len() < config.k {
        return Err(Error::TooFewPoints {
            found: features.len(),
            k: config.k,
        }
        .at(Stage::Clustering));
    }
    let standardizer = if config.standardize_features && features.len() >= 2 {
        Standardizer::fit(&features).map_err(|e| e.at(Stage::Clustering))?
    } else {
        Standardizer::identity(2)
    };
    let scaled: Vec<Vec<f64>> = features.iter().map(|f| standardizer.transform(f)).collect();
    let kmeans = clustering::kmeans(
        &scaled,
        config.k,
        config.seed,
        config.kmeans_max_iter,
        config.kmeans_restarts,
    )
    .map_err(|e| e.at(Stage::Clustering))?;

    // rank clusters by the mean raw failure time of their members
    let mut mean_t = vec![(0.0, 0usize); config.k];
    for (fp, &a) in failure_points.iter().zip(&kmeans.assignments) {
        mean_t[a].0 += fp.t_fail;
        mean_t[a].1 += 1;
    }
    let mut order: Vec<usize> = (0..config.k).collect();
    order.sort_by(|&a, &b| {
        let ma = if mean_t[a].1 > 0 { mean_t[a].0 / mean_t[a].1 as f64 } else { f64::INFINITY };
        let mb = if mean_t[b].1 > 0 { mean_t[b].0 / mean_t[b].1 as f64 } else { f64::INFINITY };
        ma.total_cmp(&mb).then(a.cmp(&b))
    });
    let mut cluster_labels = vec![GroupLabel::LL; config.k];
    for (rank, &cluster) in order.iter().enumerate() {
        cluster_labels[cluster] = cluster_labels_by_rank[rank];
    }
    let labels = kmeans.assignments.iter().map(|&a| cluster_labels[a]).collect();
    Ok(ClusterStage {
        failure_points,
        standardizer,
        kmeans,
        cluster_labels,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub group: GroupLabel,
    pub mixture_ids: Vec<String>,
    /// PCA over the mixture variables present for every member.
    pub pca_variables: Vec<MixVar>,
    pub pca: Option<PcaResult>,
    pub pca_note: Option<String>,
    pub dominant: Vec<DominantVariable>,
    pub model: GroupModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub clusters: ClusterStage,
    pub groups: Vec<GroupReport>,
    pub first_boundary_fit: Option<SvmFit>,
    pub second_boundary_fit: Option<SvmFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFit {
    pub bundle: ModelBundle,
    pub report: FitReport,
}

fn group_pca(members: &[&Mixture], config: &PipelineConfig) -> (Vec<MixVar>, Result<PcaResult>) {
    let vars: Vec<MixVar> = MixVar::ALL
        .into_iter()
        .filter(|&v| members.iter().all(|m| m.get(v).is_some()))
        .collect();
    let result = (|| {
        let rows: Vec<Vec<f64>> = members
            .iter()
            .map(|m| vars.iter().map(|&v| m.get(v).expect("filtered")).collect())
            .collect();
        let x = Matrix::from_rows(&rows)?;
        let m = config.pca_components.min(members.len().saturating_sub(1)).min(vars.len());
        if m == 0 {
            return Err(Error::InvalidConfig("too few mixtures or variables for PCA".into()));
        }
        pca::fit(&x, config.pca_standardize, m)
    })();
    (vars, result)
}

fn selected_terms(group: GroupLabel, vars: &[MixVar], dominant: &[DominantVariable]) -> Vec<Term> {
    let mut terms: Vec<Term> = Vec::new();
    for d in dominant.iter().filter(|d| !d.duplicate) {
        terms.push(Term::TimeInteraction(vars[d.column]));
    }
    if group == GroupLabel::HN {
        terms.push(Term::Time);
    }
    terms.push(Term::Constant);
    terms
}

fn fit_boundary(
    positives: &[&Mixture],
    negatives: &[&Mixture],
    axes: [MixVar; 2],
    config: &PipelineConfig,
) -> Result<SvmFit> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (set, y) in [(positives, 1i8), (negatives, -1i8)] {
        for m in set {
            points.push([m.require(axes[0])?, m.require(axes[1])?]);
            labels.push(y);
        }
    }
    let svm_config = SvmConfig {
        box_constraint: config.box_constraint,
        seed: config.seed,
        standardize: config.svm_standardize,
        ..SvmConfig::default()
    };
    svm::svm_train_with(&points, &labels, [axes[0].symbol(), axes[1].symbol()], &svm_config)
}

fn regression_rows<'a>(
    dataset: &'a [(Mixture, ExpansionSeries)],
    labels: &[GroupLabel],
    group: GroupLabel,
    config: &PipelineConfig,
) -> Result<(Vec<&'a Mixture>, Vec<ExpansionSeries>)> {
    let smooth = config.smooth_for_regression.contains(&group);
    let mut mixtures = Vec::new();
    let mut series = Vec::new();
    for ((mix, s), _) in dataset.iter().zip(labels).filter(|(_, &g)| g == group) {
        mixtures.push(mix);
        series.push(prepare_series(s, config.alpha, smooth).map_err(|e| e.at_mixture(Stage::Smoothing, &mix.id))?);
    }
    Ok((mixtures, series))
}

/// Hash of the dataset contents, for provenance.
pub fn dataset_hash(dataset: &[(Mixture, ExpansionSeries)]) -> String {
    let mut h = Sha256::new();
    for (mix, series) in dataset {
        h.update(mix.id.as_bytes());
        for v in MixVar::ALL {
            h.update(format!("|{:?}", mix.get(v)).as_bytes());
        }
        for (t, e) in series.samples() {
            h.update(format!(";{t:?},{e:?}").as_bytes());
        }
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Smoothing, clustering, per-group PCA and regression, then the two
/// classification boundaries.
pub fn fit_pipeline(dataset: &[(Mixture, ExpansionSeries)], config: &PipelineConfig) -> Result<PipelineFit> {
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(Error::InvalidAlpha(config.alpha));
    }
    for (mix, series) in dataset {
        if mix.id != series.mixture_id {
            return Err(Error::InvalidConfig(format!(
                "series '{}' paired with mixture '{}'",
                series.mixture_id, mix.id
            )));
        }
    }
    let clusters = cluster_groups(dataset, config)?;

    let mut groups = Vec::new();
    for group in GroupLabel::ALL {
        if !clusters.cluster_labels.contains(&group) {
            continue;
        }
        let (members, series) = regression_rows(dataset, &clusters.labels, group, config)?;
        if members.len() < 2 {
            return Err(Error::EmptyGroup {
                group: group.to_string(),
                count: members.len(),
            }
            .at(Stage::Clustering));
        }
        let (pca_variables, pca_result) = group_pca(&members, config);
        let (pca, pca_note, dominant) = match pca_result {
            Ok(p) => {
                let d = pca::select_dominant_variables(&p, p.loadings.len()).map_err(|e| e.at(Stage::Pca))?;
                (Some(p), None, d)
            }
            Err(e) if config.data_driven_selection => return Err(e.at(Stage::Pca)),
            Err(e) => (None, Some(e.to_string()), Vec::new()),
        };
        let terms = config
            .data_driven_selection
            .then(|| selected_terms(group, &pca_variables, &dominant));
        let rows: Vec<(&Mixture, &ExpansionSeries)> = members.iter().copied().zip(&series).collect();
        let model = fit_group_model(&rows, group, terms.as_deref()).map_err(|e| e.at(Stage::Regression))?;
        groups.push(GroupReport {
            group,
            mixture_ids: members.iter().map(|m| m.id.clone()).collect(),
            pca_variables,
            pca,
            pca_note,
            dominant,
            model,
        });
    }

    let by_label = |pred: &dyn Fn(GroupLabel) -> bool| -> Vec<&Mixture> {
        dataset
            .iter()
            .zip(&clusters.labels)
            .filter(|(_, &g)| pred(g))
            .map(|((m, _), _)| m)
            .collect()
    };
    let hn = by_label(&|g| g == GroupLabel::HN);
    let rest = by_label(&|g| g != GroupLabel::HN);
    let first_boundary_fit = if !hn.is_empty() && !rest.is_empty() {
        Some(fit_boundary(&hn, &rest, config.first_axes, config).map_err(|e| e.at(Stage::Boundaries))?)
    } else {
        None
    };
    let boundary_first = match &first_boundary_fit {
        Some(fit) => {
            let mut points = Vec::new();
            let mut labels = Vec::new();
            for (set, y) in [(&hn, 1i8), (&rest, -1i8)] {
                for m in set.iter() {
                    points.push([m.require(config.first_axes[0])?, m.require(config.first_axes[1])?]);
                    labels.push(y);
                }
            }
            let simplified =
                svm::simplify_axis_parallel(&fit.boundary, &points, &labels).map_err(|e| e.at(Stage::Boundaries))?;
            Some(FirstBoundary {
                svm: fit.boundary.clone(),
                simplified,
            })
        }
        None => None,
    };

    let ml = by_label(&|g| g == GroupLabel::ML);
    let ll = by_label(&|g| g == GroupLabel::LL);
    let second_boundary_fit = if !ml.is_empty() && !ll.is_empty() {
        Some(fit_boundary(&ml, &ll, config.second_axes, config).map_err(|e| e.at(Stage::Boundaries))?)
    } else {
        None
    };
    let boundary_second: Option<LinearBoundary> = second_boundary_fit.as_ref().map(|f| f.boundary.clone());

    let (t_min, t_max) = dataset
        .iter()
        .flat_map(|(_, s)| s.times().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
    let partial = groups.len() < 3 || boundary_first.is_none() || boundary_second.is_none();
    let bundle = ModelBundle {
        schema_version: SCHEMA_VERSION.to_string(),
        models: groups.iter().map(|g| g.model.clone()).collect(),
        boundary_first,
        boundary_second,
        provenance: Provenance {
            kind: ProvenanceKind::Fitted,
            dataset_hash: Some(dataset_hash(dataset)),
            seed: Some(config.seed),
            training_time_range: t_min.is_finite().then_some([t_min, t_max]),
        },
        failure_threshold: config.failure_threshold,
        partial,
    };
    Ok(PipelineFit {
        bundle,
        report: FitReport {
            clusters,
            groups,
            first_boundary_fit,
            second_boundary_fit,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecimenCheck {
    pub id: String,
    pub boundary_group: GroupLabel,
    pub reference_group: GroupLabel,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutReport {
    pub specimens: Vec<SpecimenCheck>,
    pub agreements: usize,
    pub total: usize,
    pub agreement_fraction: f64,
    /// `confusion[reference][boundary]`, indexed in HN, ML, LL order.
    pub confusion: [[usize; 3]; 3],
}

/// Compares boundary-based groups of held-out specimens with reference
/// groups obtained from their expansion records.
pub fn validate_holdout(
    bundle: &ModelBundle,
    holdout: &[(Mixture, ExpansionSeries)],
    reference: &[GroupLabel],
    use_simplified_first: bool,
) -> Result<HoldoutReport> {
    if holdout.is_empty() {
        return Err(Error::InvalidConfig("holdout set is empty".into()));
    }
    if holdout.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} holdout specimens, {} reference groups",
            holdout.len(),
            reference.len()
        )));
    }
    let mut confusion = [[0usize; 3]; 3];
    let mut specimens = Vec::with_capacity(holdout.len());
    for ((mix, _), &reference_group) in holdout.iter().zip(reference) {
        let boundary_group =
            classify_mixture(mix, bundle, use_simplified_first).map_err(|e| e.at_mixture(Stage::Validation, &mix.id))?;
        confusion[reference_group.index()][boundary_group.index()] += 1;
        specimens.push(SpecimenCheck {
            id: mix.id.clone(),
            boundary_group,
            reference_group,
            agrees: boundary_group == reference_group,
        });
    }
    let agreements = specimens.iter().filter(|s| s.agrees).count();
    Ok(HoldoutReport {
        agreements,
        total: specimens.len(),
        agreement_fraction: agreements as f64 / specimens.len() as f64,
        specimens,
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupR2 {
    pub group: GroupLabel,
    pub mixtures: usize,
    /// R² stored in the bundle (fit on expansion-based groups).
    pub clustering_r2: Option<f64>,
    pub boundary_r2: f64,
    /// `boundary_r2 - clustering_r2`.
    pub delta: Option<f64>,
    /// `-delta / clustering_r2`, positive when R² dropped.
    pub relative_decrease: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R2Report {
    pub groups: Vec<GroupR2>,
    pub reassigned: BTreeMap<String, GroupLabel>,
}

/// Regroups every specimen by the bundle's boundaries, refits each group's
/// model on the new membership and compares R² with the bundle's fits.
pub fn refit_r2_report(
    bundle: &ModelBundle,
    dataset: &[(Mixture, ExpansionSeries)],
    config: &PipelineConfig,
) -> Result<R2Report> {
    let labels = dataset
        .iter()
        .map(|(m, _)| classify_mixture(m, bundle, config.use_simplified_first).map_err(|e| e.at_mixture(Stage::Validation, &m.id)))
        .collect::<Result<Vec<_>>>()?;
    let mut groups = Vec::new();
    for model in &bundle.models {
        let group = model.group;
        let (members, series) = regression_rows(dataset, &labels, group, config)?;
        if members.len() < 2 {
            return Err(Error::EmptyGroup {
                group: group.to_string(),
                count: members.len(),
            }
            .at(Stage::Validation));
        }
        let rows: Vec<(&Mixture, &ExpansionSeries)> = members.iter().copied().zip(&series).collect();
        let refit = fit_group_model(&rows, group, Some(&model.terms)).map_err(|e| e.at(Stage::Regression))?;
        let boundary_r2 = refit.fit.as_ref().map_or(f64::NAN, |f| f.r_squared);
        let clustering_r2 = model.fit.as_ref().map(|f| f.r_squared);
        let delta = clustering_r2.map(|c| boundary_r2 - c);
        groups.push(GroupR2 {
            group,
            mixtures: members.len(),
            clustering_r2,
            boundary_r2,
            delta,
            relative_decrease: clustering_r2.zip(delta).map(|(c, d)| -d / c),
        });
    }
    Ok(R2Report {
        groups,
        reassigned: dataset.iter().map(|(m, _)| m.id.clone()).zip(labels).collect(),
    })
}
