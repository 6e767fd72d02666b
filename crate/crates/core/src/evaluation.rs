//! Recovery metrics, the axis-selection baseline and the experiment grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::discovery::{self, latent_batch, mean_tv, DiscoveryConfig};
use crate::error::{ensure, Error, Result};
use crate::hyperplane::{abs_cos, fit_joint_hyperplanes, Hyperplane, HyperplaneBasis, JointFit, JointFitConfig, TraversalConfig};
use crate::models::{fit_pca_decoder, train_classifier, Classifier, ClassifierConfig, Generator, LinearDecoder, TargetClassifier};
use crate::numgrad::Matrix;
use crate::rng::{derive_seed, tag};
use crate::world::{build_dataset, factor_index, DatasetConfig, LabeledDataset, FACTOR_NAMES};

/// Latent batch used for every TV measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub traversal: TraversalConfig,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            traversal: TraversalConfig::default(),
            batch_size: 64,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn batch(&self, dim: usize) -> Matrix {
        latent_batch(self.batch_size, dim, self.seed, &[tag("evaluation")])
    }

    pub fn mean_tv<G: Generator, C: TargetClassifier>(&self, h: &Hyperplane, generator: &G, classifier: &C) -> Result<f64> {
        ensure(self.batch_size >= 1, || "evaluation batch must be non-empty".into())?;
        mean_tv(h, &self.batch(h.dim()), generator, classifier, &self.traversal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cos_bias: f64,
    pub cos_target: f64,
    pub delta_cos: f64,
    pub tv: f64,
}

pub fn evaluate<G: Generator, C: TargetClassifier>(
    predicted: &Hyperplane,
    gt_bias: &Hyperplane,
    gt_target: &Hyperplane,
    generator: &G,
    classifier: &C,
    cfg: &EvalConfig,
) -> Result<Metrics> {
    ensure(predicted.dim() == gt_bias.dim() && predicted.dim() == gt_target.dim(), || {
        "predicted and ground-truth hyperplanes differ in dimension".into()
    })?;
    let cos_bias = abs_cos(predicted.normal(), gt_bias.normal())?;
    let cos_target = abs_cos(predicted.normal(), gt_target.normal())?;
    Ok(Metrics {
        cos_bias,
        cos_target,
        delta_cos: cos_bias - cos_target,
        tv: cfg.mean_tv(predicted, generator, classifier)?,
    })
}

/// Index of the candidate chosen by the baseline: the most target-aligned candidate is
/// dropped and the largest mean TV among the rest wins (lowest index on ties).
pub fn select_baseline_index<G: Generator, C: TargetClassifier>(
    candidates: &[Hyperplane],
    gt_target: &Hyperplane,
    generator: &G,
    classifier: &C,
    cfg: &EvalConfig,
) -> Result<usize> {
    if candidates.len() < 2 {
        return Err(Error::Argument(format!("baseline selection needs at least 2 candidates, got {}", candidates.len())));
    }
    let mut dropped = 0;
    let mut worst = -1.0;
    for (i, c) in candidates.iter().enumerate() {
        let a = abs_cos(c.normal(), gt_target.normal())?;
        if a > worst {
            worst = a;
            dropped = i;
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if i == dropped {
            continue;
        }
        let tv = cfg.mean_tv(c, generator, classifier)?;
        if best.map_or(true, |(_, b)| tv > b) {
            best = Some((i, tv));
        }
    }
    Ok(best.expect("at least one remaining candidate").0)
}

pub fn select_baseline_hyperplane<G: Generator, C: TargetClassifier>(
    candidates: &[Hyperplane],
    gt_target: &Hyperplane,
    generator: &G,
    classifier: &C,
    cfg: &EvalConfig,
) -> Result<Hyperplane> {
    let i = select_baseline_index(candidates, gt_target, generator, classifier, cfg)?;
    Ok(candidates[i].clone())
}

/// The non-target attribute whose hyperplane carries the largest mean TV.
pub fn pseudo_gt_bias<G: Generator, C: TargetClassifier>(
    basis: &HyperplaneBasis,
    target: &str,
    generator: &G,
    classifier: &C,
    cfg: &EvalConfig,
) -> Result<String> {
    let ti = basis.index_of(target)?;
    if basis.len() < 2 {
        return Err(Error::Argument("pseudo ground truth needs an attribute besides the target".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for j in (0..basis.len()).filter(|&j| j != ti) {
        let tv = cfg.mean_tv(&basis.hyperplane(j)?, generator, classifier)?;
        if best.map_or(true, |(_, b)| tv > b) {
            best = Some((j, tv));
        }
    }
    Ok(basis.names()[best.expect("non-target attribute").0].clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// PCA fitted on balanced (S = 0.5) sprites.
    PcaBalanced,
    /// PCA fitted on the skewed classifier-training sprites.
    PcaSkewed,
}

impl GeneratorKind {
    pub fn id(self) -> &'static str {
        match self {
            GeneratorKind::PcaBalanced => "pca-balanced",
            GeneratorKind::PcaSkewed => "pca-skewed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Discover,
    /// Discovery with `λ = 0`.
    DiscoverNoPenalty,
    /// Axis hyperplanes of the latent space, picked by the baseline rule.
    BaselineAxis,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Discover, Method::DiscoverNoPenalty, Method::BaselineAxis];

    pub fn name(self) -> &'static str {
        match self {
            Method::Discover => "discover",
            Method::DiscoverNoPenalty => "discover-no-penalty",
            Method::BaselineAxis => "baseline-axis",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetting {
    pub id: String,
    pub target: String,
    pub biased: String,
    pub generator: GeneratorKind,
    pub skewness: f64,
    pub seed: u64,
}

impl ExperimentSetting {
    pub fn new(target: &str, biased: &str, generator: GeneratorKind, skewness: f64, seed: u64) -> Self {
        Self {
            id: format!("{target}--{biased}--{}", generator.id()),
            target: target.into(),
            biased: biased.into(),
            generator,
            skewness,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        factor_index(&self.target)?;
        factor_index(&self.biased)?;
        if self.target == self.biased {
            return Err(Error::Config(format!("setting {}: target and biased attribute coincide", self.id)));
        }
        if !(0.0..=1.0).contains(&self.skewness) {
            return Err(Error::Config(format!("setting {}: skewness {} outside [0, 1]", self.id, self.skewness)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub attributes: Vec<String>,
    pub generators: Vec<GeneratorKind>,
    pub methods: Vec<Method>,
    pub skewness: f64,
    pub side: usize,
    /// Size of each skewed classifier-training set (also the PCA set).
    pub train_size: usize,
    /// Size of the balanced set used for the ground-truth hyperplanes.
    pub probe_size: usize,
    pub latent_dim: usize,
    pub classifier: ClassifierConfig,
    pub discovery: DiscoveryConfig,
    pub joint_fit: JointFitConfig,
    pub evaluation: EvalConfig,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            attributes: FACTOR_NAMES.iter().map(|s| s.to_string()).collect(),
            generators: vec![GeneratorKind::PcaBalanced, GeneratorKind::PcaSkewed],
            methods: Method::ALL.to_vec(),
            skewness: 0.9,
            side: 16,
            train_size: 4000,
            probe_size: 2000,
            latent_dim: 10,
            classifier: ClassifierConfig::default(),
            discovery: DiscoveryConfig::default(),
            joint_fit: JointFitConfig::default(),
            evaluation: EvalConfig::default(),
            seed: 0,
        }
    }
}

impl GridConfig {
    /// Every ordered (target, biased) pair crossed with every generator.
    pub fn settings(&self) -> Vec<ExperimentSetting> {
        let mut out = Vec::new();
        for t in &self.attributes {
            for b in &self.attributes {
                if t == b {
                    continue;
                }
                for g in &self.generators {
                    out.push(ExperimentSetting::new(t, b, *g, self.skewness, self.seed));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.attributes {
            factor_index(a)?;
        }
        let mut unique = self.attributes.clone();
        unique.sort();
        unique.dedup();
        ensure(unique.len() == self.attributes.len(), || "grid attributes must be distinct".into())
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.latent_dim < 2 || self.latent_dim < self.attributes.len() {
            return Err(Error::Config(format!(
                "latent_dim {} must be at least 2 and at least the number of attributes",
                self.latent_dim
            )));
        }
        if self.train_size < self.latent_dim || self.probe_size < 2 {
            return Err(Error::Config("train_size must cover latent_dim and probe_size must be at least 2".into()));
        }
        self.discovery.validate()
    }
}

/// One (setting, method) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub setting: ExperimentSetting,
    pub method: Method,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

impl GridRow {
    pub fn status(&self) -> &'static str {
        if self.metrics.is_some() {
            "ok"
        } else {
            "failed"
        }
    }
}

/// A generator with its ground-truth attribute hyperplanes.
pub struct FittedWorld {
    pub decoder: LinearDecoder,
    pub fit: JointFit,
}

/// Everything a grid cell needs besides the method itself.
#[derive(Clone)]
pub struct CellContext {
    pub world: Rc<FittedWorld>,
    pub classifier: Rc<Classifier>,
}

type Cached<T> = std::result::Result<Rc<T>, String>;

/// Runs grid cells while caching the stages shared between them.
pub struct GridRunner {
    cfg: GridConfig,
    probe: Option<Cached<LabeledDataset>>,
    balanced: Option<Cached<FittedWorld>>,
    classifiers: BTreeMap<(String, String, u64), Cached<Classifier>>,
    skewed: BTreeMap<(String, String, u64), Cached<FittedWorld>>,
}

fn cache<T>(result: Result<T>, stage: &str) -> Cached<T> {
    result.map(Rc::new).map_err(|e| format!("{stage}: {e}"))
}

impl GridRunner {
    pub fn new(cfg: GridConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            probe: None,
            balanced: None,
            classifiers: BTreeMap::new(),
            skewed: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    fn dataset_config(&self, target: &str, biased: &str, skewness: f64, n: usize, seed: u64) -> DatasetConfig {
        DatasetConfig {
            target: target.into(),
            biased: biased.into(),
            skewness,
            n,
            side: self.cfg.side,
            seed,
        }
    }

    fn balanced_pair(&self) -> (&str, &str) {
        (FACTOR_NAMES[0], FACTOR_NAMES[1])
    }

    fn probe(&mut self) -> Cached<LabeledDataset> {
        if self.probe.is_none() {
            let (t, b) = self.balanced_pair();
            let dc = self.dataset_config(t, b, 0.5, self.cfg.probe_size, derive_seed(self.cfg.seed, &[tag("probe")]));
            self.probe = Some(cache(build_dataset(&dc), "probe dataset"));
        }
        self.probe.clone().expect("probe cached")
    }

    fn fit_world(&mut self, pca_data: &LabeledDataset, generator: GeneratorKind, salt: u64) -> Result<FittedWorld> {
        let decoder = fit_pca_decoder(pca_data, self.cfg.latent_dim)?;
        let probe = self.probe().map_err(Error::Degenerate)?;
        let latents = decoder.encode(&probe.images)?;
        let labels = self
            .cfg
            .attributes
            .iter()
            .map(|a| probe.binarized(a))
            .collect::<Result<Vec<_>>>()?;
        let jf = JointFitConfig {
            seed: derive_seed(self.cfg.joint_fit.seed ^ self.cfg.seed, &[tag("joint-fit"), tag(generator.id()), salt]),
            ..self.cfg.joint_fit.clone()
        };
        let fit = fit_joint_hyperplanes(&latents, &labels, &self.cfg.attributes, &jf)?;
        Ok(FittedWorld { decoder, fit })
    }

    fn balanced_world(&mut self) -> Cached<FittedWorld> {
        if self.balanced.is_none() {
            let (t, b) = self.balanced_pair();
            let dc = self.dataset_config(t, b, 0.5, self.cfg.train_size, derive_seed(self.cfg.seed, &[tag("balanced-world")]));
            let world = build_dataset(&dc).and_then(|data| self.fit_world(&data, GeneratorKind::PcaBalanced, 0));
            self.balanced = Some(cache(world, "balanced generator"));
        }
        self.balanced.clone().expect("balanced cached")
    }

    fn training_set(&self, target: &str, biased: &str, skewness: f64) -> Result<LabeledDataset> {
        let seed = derive_seed(self.cfg.seed, &[tag("train"), tag(target), tag(biased)]);
        build_dataset(&self.dataset_config(target, biased, skewness, self.cfg.train_size, seed))
    }

    /// Classifier for `target` trained on sprites skewed towards `biased`.
    pub fn classifier(&mut self, target: &str, biased: &str, skewness: f64) -> Cached<Classifier> {
        let key = (target.to_string(), biased.to_string(), skewness.to_bits());
        if let Some(c) = self.classifiers.get(&key) {
            return c.clone();
        }
        let cc = ClassifierConfig {
            seed: derive_seed(self.cfg.classifier.seed ^ self.cfg.seed, &[tag("classifier"), tag(target), tag(biased)]),
            ..self.cfg.classifier.clone()
        };
        let trained = self.training_set(target, biased, skewness).and_then(|data| train_classifier(&data, target, &cc));
        let c = cache(trained, "classifier");
        self.classifiers.insert(key, c.clone());
        c
    }

    fn skewed_world(&mut self, target: &str, biased: &str, skewness: f64) -> Cached<FittedWorld> {
        let key = (target.to_string(), biased.to_string(), skewness.to_bits());
        if let Some(w) = self.skewed.get(&key) {
            return w.clone();
        }
        let salt = derive_seed(skewness.to_bits(), &[tag(target), tag(biased)]);
        let world = self
            .training_set(target, biased, skewness)
            .and_then(|data| self.fit_world(&data, GeneratorKind::PcaSkewed, salt));
        let w = cache(world, "skewed generator");
        self.skewed.insert(key, w.clone());
        w
    }

    /// Generator, ground truth and classifier of a setting.
    pub fn context(&mut self, setting: &ExperimentSetting) -> std::result::Result<CellContext, String> {
        let world = match setting.generator {
            GeneratorKind::PcaBalanced => self.balanced_world()?,
            GeneratorKind::PcaSkewed => self.skewed_world(&setting.target, &setting.biased, setting.skewness)?,
        };
        let classifier = self.classifier(&setting.target, &setting.biased, setting.skewness)?;
        Ok(CellContext { world, classifier })
    }

    /// Runs every configured method on one setting; failures are recorded per row.
    pub fn run_cell(&mut self, setting: &ExperimentSetting) -> Vec<GridRow> {
        let methods = self.cfg.methods.clone();
        let row = |method: Method, outcome: std::result::Result<Metrics, String>| GridRow {
            setting: setting.clone(),
            method,
            metrics: outcome.as_ref().ok().copied(),
            error: outcome.err(),
        };
        let ctx = setting.validate().map_err(|e| e.to_string()).and_then(|_| self.context(setting));
        let ctx = match ctx {
            Ok(c) => c,
            Err(e) => return methods.into_iter().map(|m| row(m, Err(e.clone()))).collect(),
        };
        methods
            .into_iter()
            .map(|m| row(m, self.run_method(setting, &ctx, m).map_err(|e| e.to_string())))
            .collect()
    }

    fn run_method(&self, setting: &ExperimentSetting, ctx: &CellContext, method: Method) -> Result<Metrics> {
        let basis = &ctx.world.fit.basis;
        let decoder = &ctx.world.decoder;
        let classifier = ctx.classifier.as_ref();
        let gt_t = basis.hyperplane_named(&setting.target)?;
        let gt_b = basis.hyperplane_named(&setting.biased)?;
        let known_basis = ctx.world.fit.known_basis_excluding(basis.index_of(&setting.biased)?)?;
        let ti = known_basis.index_of(&setting.target)?;
        let w_t = known_basis.hyperplane(ti)?;
        let known: Vec<Vec<f64>> = (0..known_basis.len())
            .filter(|&j| j != ti)
            .map(|j| known_basis.q().column(j))
            .collect();

        let eval = EvalConfig {
            traversal: self.cfg.discovery.traversal.clone(),
            ..self.cfg.evaluation.clone()
        };
        let seed = derive_seed(self.cfg.discovery.seed ^ setting.seed, &[tag(&setting.id), tag(method.name())]);
        let predicted = match method {
            Method::Discover | Method::DiscoverNoPenalty => {
                let mut dc = DiscoveryConfig {
                    seed,
                    ..self.cfg.discovery.clone()
                };
                if method == Method::DiscoverNoPenalty {
                    dc.lambda = 0.0;
                }
                discovery::discover(decoder, classifier, w_t.normal(), &known, &dc)?.hyperplane
            }
            Method::BaselineAxis => {
                let d = decoder.latent_dim();
                let candidates = (0..d).map(|k| Hyperplane::axis(d, k)).collect::<Result<Vec<_>>>()?;
                select_baseline_hyperplane(&candidates, &w_t, decoder, classifier, &eval)?
            }
        };
        evaluate(&predicted, &gt_b, &gt_t, decoder, classifier, &eval)
    }

    /// Mean TV along the ground-truth biased hyperplane of the balanced generator, for
    /// classifiers trained at each skewness (same data seed for every skewness).
    pub fn bias_tv_by_skewness(&mut self, pairs: &[(String, String)], skews: &[f64]) -> Result<Vec<SkewnessPoint>> {
        let world = self.balanced_world().map_err(Error::Degenerate)?;
        let eval = EvalConfig {
            traversal: self.cfg.discovery.traversal.clone(),
            ..self.cfg.evaluation.clone()
        };
        let mut out = Vec::new();
        for &s in skews {
            let mut per_pair = Vec::new();
            for (t, b) in pairs {
                let classifier = self.classifier(t, b, s).map_err(Error::Degenerate)?;
                let h = world.fit.basis.hyperplane_named(b)?;
                per_pair.push(eval.mean_tv(&h, &world.decoder, classifier.as_ref())?);
            }
            let mean_tv = per_pair.iter().sum::<f64>() / per_pair.len().max(1) as f64;
            out.push(SkewnessPoint { skewness: s, mean_tv, per_pair });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewnessPoint {
    pub skewness: f64,
    pub mean_tv: f64,
    pub per_pair: Vec<f64>,
}

/// Runs all settings in order. Invalid settings are rejected before any work starts.
pub fn run_grid(settings: &[ExperimentSetting], cfg: &GridConfig) -> Result<Vec<GridRow>> {
    for s in settings {
        s.validate()?;
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in settings {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::Config(format!("duplicate setting id {}", s.id)));
        }
    }
    let mut runner = GridRunner::new(cfg.clone())?;
    Ok(settings.iter().flat_map(|s| runner.run_cell(s)).collect())
}

/// Share of settings (in percent) where each method attains the maximal Δcos.
/// Exact ties credit every tied method.
pub fn percent_leading(rows: &[GridRow], methods: &[Method]) -> Result<Vec<(Method, f64)>> {
    let mut table: BTreeMap<&str, BTreeMap<Method, f64>> = BTreeMap::new();
    for r in rows {
        if let Some(m) = &r.metrics {
            table.entry(r.setting.id.as_str()).or_default().insert(r.method, m.delta_cos);
        } else {
            table.entry(r.setting.id.as_str()).or_default();
        }
    }
    let mut wins = vec![0usize; methods.len()];
    for (id, cells) in &table {
        let mut values = Vec::with_capacity(methods.len());
        for m in methods {
            match cells.get(m) {
                Some(v) => values.push(*v),
                None => return Err(Error::Argument(format!("missing Δcos for setting {id}, method {}", m.name()))),
            }
        }
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (w, v) in wins.iter_mut().zip(&values) {
            if *v == best {
                *w += 1;
            }
        }
    }
    let n = table.len();
    Ok(methods
        .iter()
        .zip(wins)
        .map(|(m, w)| (*m, if n == 0 { 0.0 } else { 100.0 * w as f64 / n as f64 }))
        .collect())
}

pub const CSV_HEADER: &str = "setting_id,target,biased,generator_id,S,method,cos_bias,cos_target,delta_cos,tv,status";

pub fn rows_to_csv(rows: &[GridRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.setting;
        let _ = write!(out, "{},{},{},{},{},{},", s.id, s.target, s.biased, s.generator.id(), s.skewness, r.method.name());
        match &r.metrics {
            Some(m) => {
                let _ = writeln!(out, "{},{},{},{},ok", m.cos_bias, m.cos_target, m.delta_cos, m.tv);
            }
            None => out.push_str(",,,,failed\n"),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    /// Mean and sample standard deviation (`n − 1` denominator).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: None, std: None };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Self { mean: Some(mean), std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub completed: usize,
    pub cos_bias: Stat,
    pub cos_target: Stat,
    pub delta_cos: Stat,
    pub tv: Stat,
    /// Over the settings where every method completed.
    pub percent_leading: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub setting_id: String,
    pub method: Method,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub settings: usize,
    pub std_kind: String,
    pub methods: Vec<MethodSummary>,
    pub failures: Vec<Failure>,
}

pub fn summarize(rows: &[GridRow], methods: &[Method]) -> GridSummary {
    let mut failed_settings = std::collections::BTreeSet::new();
    let mut failures = Vec::new();
    for r in rows.iter().filter(|r| r.metrics.is_none()) {
        failed_settings.insert(r.setting.id.clone());
        failures.push(Failure {
            setting_id: r.setting.id.clone(),
            method: r.method,
            error: r.error.clone().unwrap_or_default(),
        });
    }
    let complete: Vec<GridRow> = rows
        .iter()
        .filter(|r| !failed_settings.contains(&r.setting.id) && methods.contains(&r.method))
        .cloned()
        .collect();
    let leading = percent_leading(&complete, methods).ok();
    let settings: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.setting.id.as_str()).collect();
    let methods = methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let ok: Vec<Metrics> = rows.iter().filter(|r| r.method == *m).filter_map(|r| r.metrics).collect();
            let col = |f: fn(&Metrics) -> f64| Stat::of(&ok.iter().map(f).collect::<Vec<_>>());
            MethodSummary {
                method: *m,
                completed: ok.len(),
                cos_bias: col(|m| m.cos_bias),
                cos_target: col(|m| m.cos_target),
                delta_cos: col(|m| m.delta_cos),
                tv: col(|m| m.tv),
                percent_leading: leading.as_ref().filter(|_| !complete.is_empty()).map(|l| l[k].1),
            }
        })
        .collect();
    GridSummary {
        settings: settings.len(),
        std_kind: "sample (n-1)".into(),
        methods,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::IdentityGenerator;

    fn row(id: &str, method: Method, delta: f64) -> GridRow {
        GridRow {
            setting: ExperimentSetting::new("shape", "scale", GeneratorKind::PcaBalanced, 0.9, 0).with_id(id),
            method,
            metrics: Some(Metrics { cos_bias: delta.max(0.0), cos_target: (-delta).max(0.0), delta_cos: delta, tv: 0.0 }),
            error: None,
        }
    }

    impl ExperimentSetting {
        fn with_id(mut self, id: &str) -> Self {
            self.id = id.into();
            self
        }
    }

    #[test]
    fn leading_examples() {
        let a = Method::Discover;
        let b = Method::BaselineAxis;
        assert_eq!(percent_leading(&[row("s", a, 0.3)], &[a]).unwrap(), vec![(a, 100.0)]);
        let rows = [row("1", a, 0.2), row("1", b, 0.1), row("2", a, 0.1), row("2", b, 0.2)];
        assert_eq!(percent_leading(&rows, &[a, b]).unwrap(), vec![(a, 50.0), (b, 50.0)]);
        let rows = [row("1", a, 0.2), row("1", b, 0.2), row("2", a, 0.3), row("2", b, 0.1)];
        assert_eq!(percent_leading(&rows, &[a, b]).unwrap(), vec![(a, 100.0), (b, 50.0)]);
        assert!(percent_leading(&rows[..3], &[a, b]).is_err());
    }

    #[test]
    fn evaluate_perfect_and_trivial() {
        let g = IdentityGenerator { dim: 2 };
        let c = Classifier::logistic(vec![1.0, 1.0], 0.0).unwrap();
        let cfg = EvalConfig::default();
        let e1 = Hyperplane::axis(2, 0).unwrap();
        let e2 = Hyperplane::axis(2, 1).unwrap();
        let m = evaluate(&e2, &e2, &e1, &g, &c, &cfg).unwrap();
        assert_eq!((m.cos_bias, m.cos_target, m.delta_cos), (1.0, 0.0, 1.0));
        let m = evaluate(&e1, &e2, &e1, &g, &c, &cfg).unwrap();
        assert_eq!(m.delta_cos, -1.0);
    }

    #[test]
    fn forced_elimination() {
        let g = IdentityGenerator { dim: 2 };
        let c = Classifier::logistic(vec![5.0, 0.0], 0.0).unwrap();
        let cands = [Hyperplane::axis(2, 0).unwrap(), Hyperplane::axis(2, 1).unwrap()];
        let chosen = select_baseline_hyperplane(&cands, &cands[0], &g, &c, &EvalConfig::default()).unwrap();
        assert_eq!(chosen, cands[1]);
        assert!(select_baseline_hyperplane(&cands[..1], &cands[0], &g, &c, &EvalConfig::default()).is_err());
    }

    #[test]
    fn sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.std, Some(1.0));
        assert_eq!(Stat::of(&[4.0]).std, None);
    }

    #[test]
    fn empty_grid() {
        let rows = run_grid(&[], &GridConfig::default()).unwrap();
        assert!(rows.is_empty());
        assert_eq!(rows_to_csv(&rows), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn invalid_setting_rejected() {
        let s = ExperimentSetting::new("shape", "shape", GeneratorKind::PcaBalanced, 0.9, 0);
        assert!(run_grid(&[s], &GridConfig::default()).is_err());
    }
}
