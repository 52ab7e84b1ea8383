//! `adasin`: runs single stages of the experiment or the whole pipeline.
//!
//! Results go to stdout as `key=value` lines; logs go to stderr.
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use adasin::gradcheck::{run_suite, TOLERANCE};
use adasin::pipeline::{self as p, ExperimentBundle, ExperimentConfig, Layout, MetricsReport, Variant};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "adasin", about = "De-biasing by structure/texture mixing on a synthetic biased dataset")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// JSON config; unknown keys are rejected, missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Experiment directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,

    /// Overwrite a non-empty stage directory.
    #[arg(long, global = true)]
    force: bool,

    /// Print the default config as JSON and exit.
    #[arg(long)]
    print_default_config: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum VariantArg {
    MixingAdasin,
    AdainBaseline,
    None,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::MixingAdasin => Variant::MixingAdasin,
            VariantArg::AdainBaseline => Variant::AdainBaseline,
            VariantArg::None => Variant::None,
        }
    }
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Render the biased synthetic dataset.
    SynthData,
    /// Train and freeze the feature extractor on the unbiased variant.
    PretrainF,
    /// Momentum-contrastive pretraining of the pairing encoder.
    PretrainContrastive,
    /// Nearest opposite-class partner for every training slice.
    BuildPairs,
    /// Train the generator of the selected variant.
    TrainGen,
    /// Produce the de-biased set with the trained generator.
    Generate,
    /// Train the classifier (baseline for variant `none`, else on the union).
    TrainClf,
    /// Evaluate every trained classifier.
    Eval,
    /// Grad-CAM panels for every trained classifier.
    Gradcam,
    /// The full pipeline into an empty output directory.
    RunAll,
    /// Finite-difference check of every differentiable operation.
    Gradcheck,
}

fn kv(key: &str, value: impl std::fmt::Display) {
    println!("{key}={value}");
}

fn load_config(cli: &Cli) -> adasin::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(v) = cli.variant {
        cfg.variant = v.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(prefix: &str, r: &MetricsReport) {
    for (split, m) in &r.splits {
        for (metric, v) in [("accuracy", m.accuracy), ("precision", m.precision), ("recall", m.recall), ("f1", m.f1)] {
            kv(&format!("{prefix}.{}.{metric}", split.name()), v);
        }
    }
}

fn print_bundle(b: &ExperimentBundle) {
    kv("seed", b.seed);
    kv("feature_val_accuracy", b.feature_val_accuracy);
    if let Some(c) = &b.dataset_checksum {
        kv("dataset_checksum", c);
    }
    for r in &b.reports {
        let prefix = if r.tag == "baseline" { "baseline".to_string() } else { format!("debiased.{}", r.variant) };
        print_report(&prefix, r);
    }
    for (v, m) in &b.structure {
        kv(&format!("{v}.mean_iou"), m.mean_iou);
        kv(&format!("{v}.texture_proxy_fraction"), m.texture_proxy_fraction);
    }
    for (v, c) in &b.union_correlation {
        kv(&format!("{v}.train_class_bias_correlation"), c);
    }
}

fn classifier_tag(v: Variant) -> &'static str {
    match v {
        Variant::None => "baseline",
        other => other.name(),
    }
}

fn require_generator(v: Variant) -> adasin::Result<()> {
    if v == Variant::None {
        return Err(adasin::Error::InvalidArgument("variant `none` has no generator; pass --variant".into()));
    }
    Ok(())
}

/// Classifiers present under the layout, with their variant.
fn trained_classifiers(layout: &Layout) -> Vec<(&'static str, Variant)> {
    [("baseline", Variant::None), ("mixing_adasin", Variant::MixingAdasin), ("adain_baseline", Variant::AdainBaseline)]
        .into_iter()
        .filter(|(tag, _)| layout.classifier(tag).join(p::DONE_MARKER).exists())
        .collect()
}

fn execute(cmd: Command, cli: &Cli) -> adasin::Result<()> {
    let cfg = load_config(cli)?;
    let layout = Layout::new(&cli.out);
    let force = cli.force;
    let out = Some(&layout);
    kv("config_hash", cfg.hash());
    match cmd {
        Command::SynthData => {
            let (records, checksum) = p::stage_data(&cfg, out, force)?;
            kv("records", records.len());
            kv("dataset_checksum", checksum.unwrap_or_default());
        }
        Command::PretrainF => {
            let run = p::stage_feature(&cfg, out, force)?;
            kv("feature_val_accuracy", run.val_accuracy);
        }
        Command::PretrainContrastive => {
            let data = p::load_data(&layout, &cfg)?;
            p::stage_contrastive(&cfg, &data, out, force)?;
            kv("contrastive", layout.contrastive().display());
        }
        Command::BuildPairs => {
            let data = p::load_data(&layout, &cfg)?;
            let key = p::load_contrastive(&layout, &cfg)?;
            let pairs = p::stage_pairs(&cfg, &data, &key, out, force)?;
            kv("pairs", pairs.entries.len());
        }
        Command::TrainGen => {
            require_generator(cfg.variant)?;
            let data = p::load_data(&layout, &cfg)?;
            let pairs = p::load_pairs(&layout, &cfg)?;
            let f = p::load_feature(&layout, &cfg)?;
            let run = p::stage_generator(&cfg, cfg.variant, &data, &pairs, &f, out, force)?;
            if let Some(last) = run.log.last() {
                for (name, v) in p::StepLosses::NAMES.iter().zip(last.values()) {
                    kv(&format!("final.{name}"), v);
                }
            }
        }
        Command::Generate => {
            require_generator(cfg.variant)?;
            let data = p::load_data(&layout, &cfg)?;
            let pairs = p::load_pairs(&layout, &cfg)?;
            let f = p::load_feature(&layout, &cfg)?;
            let run = p::load_generator(&layout, &cfg, cfg.variant)?;
            let set = p::stage_generate(&cfg, &run, &data, &pairs, &f, out, force)?;
            kv("generated", set.records.len());
            kv("mean_iou", set.metrics.mean_iou);
            kv("texture_proxy_fraction", set.metrics.texture_proxy_fraction);
        }
        Command::TrainClf => {
            let data = p::load_data(&layout, &cfg)?;
            let generated = match cfg.variant {
                Variant::None => None,
                v => Some(p::load_generated(&layout, &cfg, v)?),
            };
            let train = p::classifier_training_set(&cfg, &data, generated.as_deref());
            let run = p::stage_classifier(&cfg, classifier_tag(cfg.variant), &train, &data, out, force)?;
            kv("train_records", train.len());
            kv("best_epoch", run.best_epoch);
            kv("best_val_f1", run.val_f1[run.best_epoch]);
        }
        Command::Eval => {
            let data = p::load_data(&layout, &cfg)?;
            let found = trained_classifiers(&layout);
            if found.is_empty() {
                return Err(adasin::Error::InvalidArgument(format!("no trained classifier under {}", layout.root.display())));
            }
            let mut bundle = ExperimentBundle {
                config_hash: cfg.hash(),
                seed: cfg.seed,
                feature_val_accuracy: 0.0,
                dataset_checksum: adasin::data::read_manifest(&layout.data()).ok().map(|m| m.checksum),
                reports: Vec::new(),
                structure: Default::default(),
                union_correlation: Default::default(),
                generated_checksums: Default::default(),
                gradcam_in_mask: Default::default(),
            };
            for (tag, variant) in found {
                let params = p::load_classifier(&layout, &cfg, tag)?;
                let (splits, missing_splits) = p::evaluate(&params, &cfg.arch, &data)?;
                let report_tag = if variant == Variant::None { "baseline" } else { "debiased" };
                bundle.reports.push(MetricsReport {
                    tag: report_tag.into(),
                    variant: variant.name().into(),
                    seed: cfg.seed,
                    config_hash: cfg.hash(),
                    splits,
                    missing_splits,
                    train_loss: Vec::new(),
                    val_f1: Vec::new(),
                    best_epoch: 0,
                });
            }
            p::begin_stage(&layout.reports(), &cfg, force)?;
            bundle.write(&layout.reports())?;
            p::finish_stage(&layout.reports(), &cfg)?;
            for r in &bundle.reports {
                let prefix = if r.tag == "baseline" { "baseline".to_string() } else { format!("debiased.{}", r.variant) };
                print_report(&prefix, r);
                for s in &r.missing_splits {
                    kv(&format!("{prefix}.{}.missing", s.name()), true);
                }
            }
        }
        Command::Gradcam => {
            let data = p::load_data(&layout, &cfg)?;
            let found = trained_classifiers(&layout);
            if found.is_empty() {
                return Err(adasin::Error::InvalidArgument(format!("no trained classifier under {}", layout.root.display())));
            }
            let dir = layout.gradcam();
            p::begin_stage(&dir, &cfg, force)?;
            for (tag, _) in found {
                let params = p::load_classifier(&layout, &cfg, tag)?;
                let share = p::stage_gradcam(&cfg, tag, &params, &data, Some(&dir))?;
                kv(&format!("{tag}.gradcam_in_mask"), share);
            }
            p::finish_stage(&dir, &cfg)?;
        }
        Command::RunAll => {
            let bundle = p::run_experiment(&cfg, out, force)?;
            print_bundle(&bundle);
        }
        Command::Gradcheck => {
            let reports = run_suite(20, cfg.seed)?;
            let mut failed = Vec::new();
            for r in &reports {
                kv(&format!("gradcheck.{}.max_rel_err", r.name), format!("{:.3e}", r.max_rel_err));
                if r.kinks > 0 {
                    kv(&format!("gradcheck.{}.kinks", r.name), r.kinks);
                }
                if !r.passed() {
                    failed.push(r.name);
                }
            }
            kv("gradcheck.tolerance", TOLERANCE);
            kv("gradcheck.failed", failed.len());
            if !failed.is_empty() {
                return Err(adasin::Error::InvalidArgument(format!("gradient check failed for {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn run(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            return 1;
        }
    };
    if cli.print_default_config {
        println!("{}", ExperimentConfig::default().to_json());
        return 0;
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: a subcommand is required\n\nRun `adasin --help` for usage.");
        return 1;
    };
    match execute(cmd, &cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    ExitCode::from(run(std::env::args_os()))
}
