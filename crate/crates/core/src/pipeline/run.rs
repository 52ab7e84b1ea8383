use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Variant};
use super::eval::{evaluate, grad_cam, structure_metrics, MetricsReport, StructureMetrics};
use super::train::{
    feature_dataset, generate_debiased, mix_subset, pretrain_feature_extractor, train_classifier, train_generator, ClassifierRun, FeatureRun,
    GeneratorRun,
};
use crate::data::{encode_pgm, in_split, load_dataset, write_dataset, class_bias_correlation, SliceRecord, Split};
use crate::error::{invalid, Error, Result, StageContext};
use crate::models::NetworkParams;
use crate::similarity::{build_pairs, pretrain_contrastive, PairIndex};
use crate::tensor::Tensor;

pub const CONFIG_SNAPSHOT: &str = "config.resolved.json";
/// Written last; holds the config hash.
pub const DONE_MARKER: &str = "DONE";

/// Directory layout of one experiment. Every stage owns one subdirectory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn feature(&self) -> PathBuf {
        self.root.join("feature_extractor")
    }

    pub fn contrastive(&self) -> PathBuf {
        self.root.join("contrastive")
    }

    pub fn pairs(&self) -> PathBuf {
        self.root.join("pairs")
    }

    pub fn generator(&self, v: Variant) -> PathBuf {
        self.root.join(format!("generator_{}", v.name()))
    }

    pub fn generated(&self, v: Variant) -> PathBuf {
        self.root.join(format!("generated_{}", v.name()))
    }

    /// `baseline` for the classifier on the biased set, otherwise the variant
    /// whose generated set was added.
    pub fn classifier(&self, tag: &str) -> PathBuf {
        self.root.join(format!("classifier_{tag}"))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn gradcam(&self) -> PathBuf {
        self.root.join("gradcam")
    }
}

fn is_empty_dir(dir: &Path) -> Result<bool> {
    Ok(fs::read_dir(dir)?.next().is_none())
}

/// Prepares a stage directory: it must be absent or empty unless `force`,
/// in which case it is cleared. Writes the config snapshot first.
pub fn begin_stage(dir: &Path, cfg: &ExperimentConfig, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return invalid(format!("{} exists and is not a directory", dir.display()));
        }
        if !is_empty_dir(dir)? {
            if !force {
                return invalid(format!("{} is not empty (pass --force to overwrite)", dir.display()));
            }
            fs::remove_dir_all(dir)?;
        }
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_SNAPSHOT), cfg.to_json())?;
    Ok(())
}

pub fn finish_stage(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::write(dir.join(DONE_MARKER), format!("{}\n", cfg.hash()))?;
    Ok(())
}

/// Fails unless `dir` holds a completed stage.
pub fn require_stage(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let done = dir.join(DONE_MARKER);
    let Ok(stamp) = fs::read_to_string(&done) else {
        return invalid(format!("{} is missing or incomplete (no {DONE_MARKER} marker)", dir.display()));
    };
    if stamp.trim() != cfg.hash() {
        log::warn!("{} was produced under config {} (current {})", dir.display(), stamp.trim(), cfg.hash());
    }
    Ok(())
}

fn write_loss_csv(path: &Path, rows: impl IntoIterator<Item = (usize, &'static str, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    w.write_record(["step", "loss_name", "value"]).map_err(|e| Error::Format(e.to_string()))?;
    for (step, name, value) in rows {
        w.write_record([step.to_string(), name.to_string(), value.to_string()]).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Side-by-side panel of `[1,H,W]` images.
pub fn hconcat(images: &[&Tensor]) -> Result<Tensor> {
    let Some(first) = images.first() else {
        return invalid("empty panel");
    };
    let &[1, h, w] = first.shape() else {
        return invalid(format!("panels take [1,H,W] images, got {:?}", first.shape()));
    };
    if images.iter().any(|im| im.shape() != [1, h, w]) {
        return invalid("panel images differ in shape");
    }
    let mut data = Vec::with_capacity(h * w * images.len());
    for r in 0..h {
        for im in images {
            data.extend_from_slice(&im.data()[r * w..(r + 1) * w]);
        }
    }
    Tensor::new(data, &[1, h, w * images.len()])
}

/// One experiment's outputs for the tagged classifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentBundle {
    pub config_hash: String,
    pub seed: u64,
    pub feature_val_accuracy: f64,
    pub dataset_checksum: Option<String>,
    /// `baseline` first, then one `debiased` report per variant.
    pub reports: Vec<MetricsReport>,
    pub structure: BTreeMap<String, StructureMetrics>,
    /// |corr(class, bias)| over the training part of D union D'.
    pub union_correlation: BTreeMap<String, f64>,
    pub generated_checksums: BTreeMap<String, String>,
    /// Mean share of Grad-CAM mass inside the lesion mask, per report.
    pub gradcam_in_mask: BTreeMap<String, f64>,
}

impl ExperimentBundle {
    pub fn report(&self, tag: &str, variant: Variant) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.tag == tag && r.variant == variant.name())
    }

    pub fn baseline(&self) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.tag == "baseline")
    }

    pub fn debiased(&self, variant: Variant) -> Option<&MetricsReport> {
        self.report("debiased", variant)
    }

    /// Rows of `(seed, variant, split, metric, value)`; the baseline appears
    /// under the variant name `baseline`.
    pub fn csv_rows(&self) -> Vec<(u64, String, &'static str, &'static str, f64)> {
        let mut rows = Vec::new();
        for r in &self.reports {
            let label = if r.tag == "baseline" { "baseline".to_string() } else { r.variant.clone() };
            for (split, m) in &r.splits {
                for (metric, v) in [("accuracy", m.accuracy), ("precision", m.precision), ("recall", m.recall), ("f1", m.f1)] {
                    rows.push((self.seed, label.clone(), split.name(), metric, v));
                }
            }
        }
        rows
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(self)?)?;
        let mut w = csv::Writer::from_path(dir.join("metrics.csv")).map_err(|e| Error::Format(e.to_string()))?;
        w.write_record(["seed", "variant", "split", "metric", "value"]).map_err(|e| Error::Format(e.to_string()))?;
        for (seed, variant, split, metric, v) in self.csv_rows() {
            w.write_record([seed.to_string(), variant, split.to_string(), metric.to_string(), v.to_string()])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn stage_dir<'a>(out: Option<&'a Layout>, f: impl Fn(&Layout) -> PathBuf) -> Option<PathBuf> {
    out.map(f)
}

/// Synthesizes the biased dataset (and writes it when `out` is set).
pub fn stage_data(cfg: &ExperimentConfig, out: Option<&Layout>, force: bool) -> Result<(Vec<SliceRecord>, Option<String>)> {
    let seed = cfg.stage_seed("data");
    let records = crate::data::synth_dataset(&cfg.data, seed)?;
    let mut checksum = None;
    if let Some(dir) = stage_dir(out, Layout::data) {
        begin_stage(&dir, cfg, force)?;
        checksum = Some(write_dataset(&dir, &records, seed, Some(&cfg.data))?.checksum);
        finish_stage(&dir, cfg)?;
    }
    Ok((records, checksum))
}

pub fn load_data(layout: &Layout, cfg: &ExperimentConfig) -> Result<Vec<SliceRecord>> {
    require_stage(&layout.data(), cfg)?;
    Ok(load_dataset(&layout.data())?.1)
}

pub fn stage_feature(cfg: &ExperimentConfig, out: Option<&Layout>, force: bool) -> Result<FeatureRun> {
    let records = feature_dataset(&cfg.data, &cfg.feature, cfg.stage_seed("feature_data"))?;
    let run = pretrain_feature_extractor(&records, &cfg.arch, &cfg.feature, cfg.stage_seed("feature"))?;
    log::info!("feature extractor validation accuracy {:.4}", run.val_accuracy);
    if let Some(dir) = stage_dir(out, Layout::feature) {
        begin_stage(&dir, cfg, force)?;
        run.params.save(&dir.join("params"), &cfg.hash())?;
        write_loss_csv(&dir.join("losses.csv"), run.losses.iter().enumerate().map(|(e, &v)| (e, "cross_entropy", v)))?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&serde_json::json!({ "val_accuracy": run.val_accuracy }))?)?;
        finish_stage(&dir, cfg)?;
    }
    Ok(run)
}

fn load_params(dir: &Path) -> Result<NetworkParams> {
    Ok(NetworkParams::load(dir)?.0)
}

pub fn load_feature(layout: &Layout, cfg: &ExperimentConfig) -> Result<NetworkParams> {
    require_stage(&layout.feature(), cfg)?;
    Ok(load_params(&layout.feature().join("params"))?.frozen())
}

/// Contrastive pretraining on the training split; returns the key encoder.
pub fn stage_contrastive(cfg: &ExperimentConfig, data: &[SliceRecord], out: Option<&Layout>, force: bool) -> Result<NetworkParams> {
    let train = in_split(data, Split::Train);
    let run = pretrain_contrastive(&train, &cfg.arch, &cfg.contrastive, cfg.stage_seed("contrastive"))?;
    if let Some(dir) = stage_dir(out, Layout::contrastive) {
        begin_stage(&dir, cfg, force)?;
        run.query.save(&dir.join("query"), &cfg.hash())?;
        run.key.save(&dir.join("key"), &cfg.hash())?;
        write_loss_csv(&dir.join("losses.csv"), run.losses.iter().enumerate().map(|(s, &v)| (s, "info_nce", v)))?;
        finish_stage(&dir, cfg)?;
    }
    Ok(run.key)
}

pub fn load_contrastive(layout: &Layout, cfg: &ExperimentConfig) -> Result<NetworkParams> {
    require_stage(&layout.contrastive(), cfg)?;
    Ok(load_params(&layout.contrastive().join("key"))?.frozen())
}

pub fn stage_pairs(cfg: &ExperimentConfig, data: &[SliceRecord], encoder: &NetworkParams, out: Option<&Layout>, force: bool) -> Result<PairIndex> {
    let pairs = build_pairs(&in_split(data, Split::Train), encoder, &cfg.arch, cfg.pair_space)?;
    if let Some(dir) = stage_dir(out, Layout::pairs) {
        begin_stage(&dir, cfg, force)?;
        pairs.write_csv(fs::File::create(dir.join("pairs.csv"))?)?;
        finish_stage(&dir, cfg)?;
    }
    Ok(pairs)
}

pub fn load_pairs(layout: &Layout, cfg: &ExperimentConfig) -> Result<PairIndex> {
    require_stage(&layout.pairs(), cfg)?;
    PairIndex::read_csv(fs::File::open(layout.pairs().join("pairs.csv"))?)
}

#[allow(clippy::too_many_arguments)]
pub fn stage_generator(
    cfg: &ExperimentConfig,
    variant: Variant,
    data: &[SliceRecord],
    pairs: &PairIndex,
    f: &NetworkParams,
    out: Option<&Layout>,
    force: bool,
) -> Result<GeneratorRun> {
    let seed = cfg.stage_seed(&format!("generator/{}", variant.name()));
    let run = train_generator(data, pairs, f, &cfg.arch, &cfg.losses, &cfg.generator, variant, seed)?;
    if let Some(layout) = out {
        let dir = layout.generator(variant);
        begin_stage(&dir, cfg, force)?;
        run.encoder.save(&dir.join("encoder"), &cfg.hash())?;
        run.decoder.save(&dir.join("decoder"), &cfg.hash())?;
        if let Some(d) = &run.discriminator {
            d.save(&dir.join("discriminator"), &cfg.hash())?;
        }
        let rows = run.log.iter().enumerate().flat_map(|(s, l)| super::train::StepLosses::NAMES.into_iter().zip(l.values()).map(move |(n, v)| (s, n, v)));
        write_loss_csv(&dir.join("losses.csv"), rows)?;
        finish_stage(&dir, cfg)?;
    }
    Ok(run)
}

/// Trained networks without their loss log.
pub fn load_generator(layout: &Layout, cfg: &ExperimentConfig, variant: Variant) -> Result<GeneratorRun> {
    let dir = layout.generator(variant);
    require_stage(&dir, cfg)?;
    let discriminator = if dir.join("discriminator").exists() { Some(load_params(&dir.join("discriminator"))?) } else { None };
    Ok(GeneratorRun {
        variant,
        encoder: load_params(&dir.join("encoder"))?,
        decoder: load_params(&dir.join("decoder"))?,
        discriminator,
        log: Vec::new(),
    })
}

/// Generated set, its structure metrics and (when written) its checksum.
pub struct GeneratedSet {
    pub records: Vec<SliceRecord>,
    pub metrics: StructureMetrics,
    pub checksum: Option<String>,
}

pub fn stage_generate(
    cfg: &ExperimentConfig,
    run: &GeneratorRun,
    data: &[SliceRecord],
    pairs: &PairIndex,
    f: &NetworkParams,
    out: Option<&Layout>,
    force: bool,
) -> Result<GeneratedSet> {
    let first_id = data.iter().map(|r| r.slice_id).max().map_or(0, |m| m + 1);
    let records = generate_debiased(run, &cfg.arch, data, pairs, first_id)?;
    let metrics = structure_metrics(f, &cfg.arch, data, &records)?;
    log::info!(
        "{}: mean lesion IoU {:.3}, texture proxy holds on {:.3}",
        run.variant.name(),
        metrics.mean_iou,
        metrics.texture_proxy_fraction
    );
    let mut checksum = None;
    if let Some(layout) = out {
        let dir = layout.generated(run.variant);
        begin_stage(&dir, cfg, force)?;
        checksum = Some(write_dataset(&dir, &records, cfg.stage_seed(&format!("generator/{}", run.variant.name())), None)?.checksum);
        fs::write(dir.join("structure_metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
        let by_id: BTreeMap<u64, &SliceRecord> = data.iter().map(|r| (r.slice_id, r)).collect();
        fs::create_dir_all(dir.join("panels"))?;
        for g in records.iter().take(cfg.sample_panels) {
            let crate::data::Provenance::Generated { structure_id, texture_id } = g.provenance else { continue };
            let panel = hconcat(&[&by_id[&structure_id].image, &by_id[&texture_id].image, &g.image])?;
            fs::write(dir.join("panels").join(format!("{}.pgm", g.slice_id)), encode_pgm(&panel)?)?;
        }
        finish_stage(&dir, cfg)?;
    }
    Ok(GeneratedSet { records, metrics, checksum })
}

pub fn load_generated(layout: &Layout, cfg: &ExperimentConfig, variant: Variant) -> Result<Vec<SliceRecord>> {
    let dir = layout.generated(variant);
    require_stage(&dir, cfg)?;
    Ok(load_dataset(&dir)?.1)
}

/// Training records for a classifier: the biased training split, plus the
/// `mix_ratio` share of the generated set when one is given.
pub fn classifier_training_set(cfg: &ExperimentConfig, data: &[SliceRecord], generated: Option<&[SliceRecord]>) -> Vec<SliceRecord> {
    let mut train = in_split(data, Split::Train);
    if let Some(g) = generated {
        train.extend(mix_subset(g, cfg.mix_ratio, cfg.stage_seed("mix")));
    }
    train
}

pub fn stage_classifier(cfg: &ExperimentConfig, tag: &str, train: &[SliceRecord], data: &[SliceRecord], out: Option<&Layout>, force: bool) -> Result<ClassifierRun> {
    // identical seed for every classifier: the training set is the only difference
    let run = train_classifier(train, &in_split(data, Split::Val), &cfg.arch, &cfg.classifier, cfg.stage_seed("classifier"))?;
    if let Some(layout) = out {
        let dir = layout.classifier(tag);
        begin_stage(&dir, cfg, force)?;
        run.params.save(&dir.join("params"), &cfg.hash())?;
        let rows = run.train_loss.iter().zip(&run.val_f1).enumerate().flat_map(|(e, (&l, &f))| [(e, "cross_entropy", l), (e, "val_f1", f)]);
        write_loss_csv(&dir.join("losses.csv"), rows)?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&serde_json::json!({ "best_epoch": run.best_epoch, "train_records": train.len() }))?)?;
        finish_stage(&dir, cfg)?;
    }
    Ok(run)
}

pub fn load_classifier(layout: &Layout, cfg: &ExperimentConfig, tag: &str) -> Result<NetworkParams> {
    let dir = layout.classifier(tag);
    require_stage(&dir, cfg)?;
    Ok(load_params(&dir.join("params"))?.frozen())
}

pub fn make_report(cfg: &ExperimentConfig, tag: &str, variant: Variant, run: &ClassifierRun, data: &[SliceRecord]) -> Result<MetricsReport> {
    let (splits, missing_splits) = evaluate(&run.params, &cfg.arch, data)?;
    Ok(MetricsReport {
        tag: tag.to_string(),
        variant: variant.name().to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        splits,
        missing_splits,
        train_loss: run.train_loss.clone(),
        val_f1: run.val_f1.clone(),
        best_epoch: run.best_epoch,
    })
}

/// Test slices shown in Grad-CAM panels: alternating classes, lowest ids first.
pub fn gradcam_slices(data: &[SliceRecord], n: usize) -> Vec<&SliceRecord> {
    let test: Vec<&SliceRecord> = data.iter().filter(|r| r.split == Split::Test).collect();
    let mut by_class: [Vec<&SliceRecord>; 2] = [Vec::new(), Vec::new()];
    for r in test {
        by_class[r.class_label.min(1)].push(r);
    }
    let mut out = Vec::with_capacity(n);
    let mut idx = [0usize; 2];
    while out.len() < n && (idx[0] < by_class[0].len() || idx[1] < by_class[1].len()) {
        for c in 0..2 {
            if out.len() < n && idx[c] < by_class[c].len() {
                out.push(by_class[c][idx[c]]);
                idx[c] += 1;
            }
        }
    }
    out
}

/// Writes `image | heatmap | lesion mask` panels for the true class and
/// returns the mean share of heatmap mass inside the lesion mask.
pub fn stage_gradcam(cfg: &ExperimentConfig, tag: &str, classifier: &NetworkParams, data: &[SliceRecord], dir: Option<&Path>) -> Result<f64> {
    let slices = gradcam_slices(data, cfg.gradcam_slices);
    if slices.is_empty() {
        return Ok(0.0);
    }
    let mut share = 0.0;
    for r in &slices {
        let cam = grad_cam(classifier, &cfg.arch, &r.image, r.class_label)?;
        let (s, h) = (cfg.arch.image_size, cfg.arch.image_size);
        let cam = cam.reshape(&[1, h, s])?;
        let total: f64 = cam.data().iter().sum();
        let mask = r.lesion_mask.clone().unwrap_or_else(|| Tensor::zeros(&[1, h, s]));
        let inside: f64 = cam.data().iter().zip(mask.data().iter()).map(|(c, m)| c * m).sum();
        share += if total > 0.0 { inside / total } else { 0.0 };
        if let Some(dir) = dir {
            let panel = hconcat(&[&r.image, &cam.mul_scalar(2.0).add_scalar(-1.0), &mask.mul_scalar(2.0).add_scalar(-1.0)])?;
            fs::write(dir.join(format!("{tag}_{}.pgm", r.slice_id)), encode_pgm(&panel)?)?;
        }
    }
    Ok(share / slices.len() as f64)
}

/// Runs the shared stages once, then one generator, generated set and
/// classifier per requested variant, plus the baseline classifier. With
/// `out`, every stage writes its directory under it.
pub fn run_variants(cfg: &ExperimentConfig, variants: &[Variant], out: Option<&Layout>, force: bool) -> Result<ExperimentBundle> {
    cfg.validate()?;
    if let Some(l) = out {
        begin_stage(&l.root, cfg, force)?;
    }
    let (data, dataset_checksum) = stage_data(cfg, out, force).stage("synth_dataset")?;
    let feature = stage_feature(cfg, out, force).stage("pretrain_feature_extractor")?;
    let needs_generator = variants.iter().any(|&v| v != Variant::None);
    let pairs = if needs_generator {
        let key = stage_contrastive(cfg, &data, out, force).stage("pretrain_contrastive")?;
        Some(stage_pairs(cfg, &data, &key, out, force).stage("build_pairs")?)
    } else {
        None
    };
    let mut bundle = ExperimentBundle {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        feature_val_accuracy: feature.val_accuracy,
        dataset_checksum,
        reports: Vec::new(),
        structure: BTreeMap::new(),
        union_correlation: BTreeMap::new(),
        generated_checksums: BTreeMap::new(),
        gradcam_in_mask: BTreeMap::new(),
    };
    let gradcam_dir = match out {
        Some(l) => {
            begin_stage(&l.gradcam(), cfg, force)?;
            Some(l.gradcam())
        }
        None => None,
    };

    let base_train = classifier_training_set(cfg, &data, None);
    let base = stage_classifier(cfg, "baseline", &base_train, &data, out, force).stage("train_classifier (baseline)")?;
    let base_report = make_report(cfg, "baseline", Variant::None, &base, &data).stage("evaluate (baseline)")?;
    let cam = stage_gradcam(cfg, "baseline", &base.params, &data, gradcam_dir.as_deref()).stage("grad_cam (baseline)")?;
    bundle.gradcam_in_mask.insert("baseline".into(), cam);
    bundle.union_correlation.insert("baseline".into(), class_bias_correlation(&base_train).abs());
    bundle.reports.push(base_report.clone());

    for &variant in variants {
        let name = variant.name();
        if variant == Variant::None {
            bundle.reports.push(MetricsReport { tag: "debiased".into(), ..base_report.clone() });
            continue;
        }
        let pairs = pairs.as_ref().expect("built above");
        let gen = stage_generator(cfg, variant, &data, pairs, &feature.params, out, force).stage(&format!("train_generator ({name})"))?;
        let set = stage_generate(cfg, &gen, &data, pairs, &feature.params, out, force).stage(&format!("generate_debiased ({name})"))?;
        let train = classifier_training_set(cfg, &data, Some(&set.records));
        bundle.union_correlation.insert(name.into(), class_bias_correlation(&train).abs());
        bundle.structure.insert(name.into(), set.metrics);
        if let Some(c) = set.checksum {
            bundle.generated_checksums.insert(name.into(), c);
        }
        let clf = stage_classifier(cfg, name, &train, &data, out, force).stage(&format!("train_classifier ({name})"))?;
        bundle.reports.push(make_report(cfg, "debiased", variant, &clf, &data).stage(&format!("evaluate ({name})"))?);
        let cam = stage_gradcam(cfg, name, &clf.params, &data, gradcam_dir.as_deref()).stage(&format!("grad_cam ({name})"))?;
        bundle.gradcam_in_mask.insert(name.into(), cam);
    }

    if let Some(l) = out {
        finish_stage(&l.gradcam(), cfg)?;
        begin_stage(&l.reports(), cfg, force)?;
        bundle.write(&l.reports())?;
        finish_stage(&l.reports(), cfg)?;
        finish_stage(&l.root, cfg)?;
    }
    Ok(bundle)
}

/// Baseline versus the configured variant: two reports.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Layout>, force: bool) -> Result<ExperimentBundle> {
    run_variants(cfg, &[cfg.variant], out, force)
}
