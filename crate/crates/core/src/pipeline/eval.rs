use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{stack_images, Bias, Provenance, SliceRecord, Split};
use crate::error::{invalid, shape_err, Result};
use crate::losses::style_loss;
use crate::models::{classify, classify_with_features, extract_features, ArchitectureSpec, NetworkParams};
use crate::tensor::{grad, no_grad, Tensor};

pub const POSITIVE_CLASS: usize = 1;

/// `2PR/(P+R)` for `positive_class`, 0 when `P+R = 0`.
pub fn f1_score(predictions: &[usize], labels: &[usize], positive_class: usize) -> Result<f64> {
    if predictions.len() != labels.len() {
        return invalid(format!("{} predictions for {} labels", predictions.len(), labels.len()));
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p == positive_class, l == positive_class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            _ => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fnn))
}

fn f1_from_counts(tp: usize, fp: usize, fnn: usize) -> f64 {
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fnn > 0 { tp as f64 / (tp + fnn) as f64 } else { 0.0 };
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Predictions for one (class, bias) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub class_label: usize,
    pub bias_label: Bias,
    pub predicted_0: usize,
    pub predicted_1: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub count: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub cells: Vec<ConfusionCell>,
}

impl SplitMetrics {
    pub fn from_predictions(predictions: &[usize], records: &[SliceRecord]) -> Result<Self> {
        if predictions.len() != records.len() {
            return invalid("one prediction per record required");
        }
        let mut cells: BTreeMap<(usize, Bias), [usize; 2]> = BTreeMap::new();
        for (&p, r) in predictions.iter().zip(records) {
            if p > 1 {
                return invalid(format!("prediction {p} is not a class"));
            }
            cells.entry((r.class_label, r.bias_label)).or_default()[p] += 1;
        }
        let cells: Vec<ConfusionCell> = cells
            .into_iter()
            .map(|((class_label, bias_label), [predicted_0, predicted_1])| ConfusionCell { class_label, bias_label, predicted_0, predicted_1 })
            .collect();
        Ok(Self::from_cells(cells))
    }

    /// Every scalar is derived from the cells alone.
    pub fn from_cells(cells: Vec<ConfusionCell>) -> Self {
        let (mut tp, mut fp, mut fnn, mut tn) = (0, 0, 0, 0);
        for c in &cells {
            if c.class_label == POSITIVE_CLASS {
                tp += c.predicted_1;
                fnn += c.predicted_0;
            } else {
                fp += c.predicted_1;
                tn += c.predicted_0;
            }
        }
        let count = tp + fp + fnn + tn;
        let ratio = |a: usize, b: usize| if b > 0 { a as f64 / b as f64 } else { 0.0 };
        Self {
            count,
            accuracy: ratio(tp + tn, count),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fnn),
            f1: f1_from_counts(tp, fp, fnn),
            cells,
        }
    }
}

/// Metrics of one classifier on every split, plus its training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tag: String,
    pub variant: String,
    pub seed: u64,
    pub config_hash: String,
    pub splits: BTreeMap<Split, SplitMetrics>,
    /// Splits with no records, left out of `splits`.
    pub missing_splits: Vec<Split>,
    pub train_loss: Vec<f64>,
    pub val_f1: Vec<f64>,
    pub best_epoch: usize,
}

impl MetricsReport {
    pub fn split(&self, s: Split) -> Option<&SplitMetrics> {
        self.splits.get(&s)
    }
}

/// Argmax predictions, batched, without recording a graph.
pub fn predict(c: &NetworkParams, arch: &ArchitectureSpec, records: &[SliceRecord]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(records.len());
    for chunk in records.chunks(64) {
        let logits = no_grad(|| classify(c, arch, &stack_images(chunk.iter().map(|r| &r.image))?))?;
        out.extend(logits.data().chunks(2).map(|l| usize::from(l[1] > l[0])));
    }
    Ok(out)
}

/// Metrics per split present in `records`.
pub fn evaluate(c: &NetworkParams, arch: &ArchitectureSpec, records: &[SliceRecord]) -> Result<(BTreeMap<Split, SplitMetrics>, Vec<Split>)> {
    let mut splits = BTreeMap::new();
    let mut missing = Vec::new();
    for s in Split::ALL {
        let subset: Vec<SliceRecord> = records.iter().filter(|r| r.split == s).cloned().collect();
        if subset.is_empty() {
            log::warn!("split {} has no records; omitted from the report", s.name());
            missing.push(s);
            continue;
        }
        let preds = predict(c, arch, &subset)?;
        splits.insert(s, SplitMetrics::from_predictions(&preds, &subset)?);
    }
    Ok((splits, missing))
}

/// Mean of each scalar over reports; cells are summed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub tag: String,
    pub seeds: Vec<u64>,
    pub accuracy: BTreeMap<Split, f64>,
    pub precision: BTreeMap<Split, f64>,
    pub recall: BTreeMap<Split, f64>,
    pub f1: BTreeMap<Split, f64>,
}

pub fn average_reports(tag: &str, reports: &[MetricsReport]) -> Result<AveragedMetrics> {
    if reports.is_empty() {
        return invalid("nothing to average");
    }
    let n = reports.len() as f64;
    let mut avg = AveragedMetrics {
        tag: tag.to_string(),
        seeds: reports.iter().map(|r| r.seed).collect(),
        accuracy: BTreeMap::new(),
        precision: BTreeMap::new(),
        recall: BTreeMap::new(),
        f1: BTreeMap::new(),
    };
    for s in Split::ALL {
        let ms: Vec<&SplitMetrics> = reports.iter().filter_map(|r| r.split(s)).collect();
        if ms.len() != reports.len() {
            continue;
        }
        avg.accuracy.insert(s, ms.iter().map(|m| m.accuracy).sum::<f64>() / n);
        avg.precision.insert(s, ms.iter().map(|m| m.precision).sum::<f64>() / n);
        avg.recall.insert(s, ms.iter().map(|m| m.recall).sum::<f64>() / n);
        avg.f1.insert(s, ms.iter().map(|m| m.f1).sum::<f64>() / n);
    }
    Ok(avg)
}

fn bilinear_resize(src: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(oh * ow);
    let coord = |o: usize, n: usize, on: usize| ((o as f64 + 0.5) * n as f64 / on as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    for r in 0..oh {
        let y = coord(r, h, oh);
        let (y0, fy) = (y.floor() as usize, y - y.floor());
        let y1 = (y0 + 1).min(h - 1);
        for c in 0..ow {
            let x = coord(c, w, ow);
            let (x0, fx) = (x.floor() as usize, x - x.floor());
            let x1 = (x0 + 1).min(w - 1);
            let at = |a: usize, b: usize| src[a * w + b];
            out.push((1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1)));
        }
    }
    out
}

/// Class-activation map from activations and gradients `[K,h,w]`:
/// `ReLU(sum_k mean(grad_k) * A_k)`, upsampled to `out_h x out_w` and divided
/// by its maximum (an all-zero map stays zero).
pub fn cam_from_activations(activations: &[f64], gradients: &[f64], k: usize, h: usize, w: usize, out_h: usize, out_w: usize) -> Result<Tensor> {
    if activations.len() != k * h * w || gradients.len() != k * h * w {
        return shape_err(format!("CAM inputs must hold {k}x{h}x{w} values"));
    }
    let hw = h * w;
    let mut map = vec![0.0; hw];
    for ch in 0..k {
        let weight = gradients[ch * hw..(ch + 1) * hw].iter().sum::<f64>() / hw as f64;
        for (m, a) in map.iter_mut().zip(&activations[ch * hw..(ch + 1) * hw]) {
            *m += weight * a;
        }
    }
    map.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut up = bilinear_resize(&map, h, w, out_h, out_w);
    let max = up.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        up.iter_mut().for_each(|v| *v /= max);
    }
    Tensor::new(up, &[out_h, out_w])
}

/// Grad-CAM of `target_class` at the classifier's last feature map, as an
/// `[H,W]` heatmap in `[0,1]`.
pub fn grad_cam(c: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor, target_class: usize) -> Result<Tensor> {
    if target_class > 1 {
        return invalid(format!("class {target_class} does not exist"));
    }
    let x = match image.shape() {
        &[1, h, w] => Tensor::leaf(image.to_vec(), &[1, 1, h, w], true)?,
        &[1, 1, h, w] => Tensor::leaf(image.to_vec(), &[1, 1, h, w], true)?,
        s => return shape_err(format!("grad_cam takes one image, got {s:?}")),
    };
    let (logits, a) = classify_with_features(c, arch, &x)?;
    let score = logits.narrow(1, target_class, 1)?.sum();
    let g = grad(&score, &[&a], false)?.remove(0);
    let &[_, k, h, w] = a.shape() else {
        return shape_err("feature map must be 4-D");
    };
    cam_from_activations(&a.to_vec(), &g.to_vec(), k, h, w, arch.image_size, arch.image_size)
}

/// Lesion region of an image: 3x3 box-smoothed intensity at or above 0
/// (the window shrinks at the border).
pub fn lesion_region(image: &[f64], h: usize, w: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (mut sum, mut n) = (0.0, 0.0);
            for rr in r.saturating_sub(1)..(r + 2).min(h) {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    sum += image[rr * w + cc];
                    n += 1.0;
                }
            }
            out.push(sum / n >= 0.0);
        }
    }
    out
}

/// IoU of the thresholded lesion region of `image` against a 0/1 mask; two
/// empty regions count as a perfect match.
pub fn lesion_iou(image: &Tensor, mask: &Tensor) -> Result<f64> {
    let &[1, h, w] = image.shape() else {
        return shape_err(format!("lesion_iou takes [1,H,W] images, got {:?}", image.shape()));
    };
    if mask.shape() != image.shape() {
        return shape_err("mask and image shapes differ");
    }
    let region = lesion_region(&image.data(), h, w);
    let m = mask.data();
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &t) in region.iter().zip(m.iter()) {
        let t = t > 0.5;
        inter += usize::from(p && t);
        union += usize::from(p || t);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// How well generated slices keep their structure source's lesions and take
/// on their texture source's statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub count: usize,
    pub mean_iou: f64,
    /// Share of slices with `style(out, texture) < style(structure, texture)`.
    pub texture_proxy_fraction: f64,
    pub mean_style_generated: f64,
    pub mean_style_source: f64,
}

pub fn structure_metrics(f: &NetworkParams, arch: &ArchitectureSpec, sources: &[SliceRecord], generated: &[SliceRecord]) -> Result<StructureMetrics> {
    if generated.is_empty() {
        return invalid("no generated slices to score");
    }
    let by_id: BTreeMap<u64, &SliceRecord> = sources.iter().map(|r| (r.slice_id, r)).collect();
    let source = |id: u64| by_id.get(&id).copied().ok_or_else(|| crate::Error::InvalidArgument(format!("source slice {id} missing")));
    let features = |img: &Tensor| -> Result<Vec<Tensor>> {
        let x = img.reshape(&[1, 1, arch.image_size, arch.image_size])?;
        extract_features(f, arch, &x, &arch.style_layers)
    };
    let (mut iou, mut wins, mut sg, mut ss) = (0.0, 0usize, 0.0, 0.0);
    for g in generated {
        let Provenance::Generated { structure_id, texture_id } = g.provenance else {
            return invalid(format!("slice {} is not generated", g.slice_id));
        };
        let (s, t) = (source(structure_id)?, source(texture_id)?);
        let mask = g.lesion_mask.as_ref().or(s.lesion_mask.as_ref());
        let Some(mask) = mask else {
            return invalid(format!("slice {structure_id} has no lesion mask"));
        };
        iou += lesion_iou(&g.image, mask)?;
        let (lg, ls) = no_grad(|| -> Result<(f64, f64)> {
            let ft = features(&t.image)?;
            Ok((style_loss(&features(&g.image)?, &ft)?.item(), style_loss(&features(&s.image)?, &ft)?.item()))
        })?;
        wins += usize::from(lg < ls);
        sg += lg;
        ss += ls;
    }
    let n = generated.len() as f64;
    Ok(StructureMetrics {
        count: generated.len(),
        mean_iou: iou / n,
        texture_proxy_fraction: wins as f64 / n,
        mean_style_generated: sg / n,
        mean_style_source: ss / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;

    fn rec(class: usize, bias: Bias) -> SliceRecord {
        SliceRecord {
            slice_id: 0,
            image: Tensor::zeros(&[1, 8, 8]),
            class_label: class,
            bias_label: bias,
            split: Split::Test,
            provenance: Provenance::RealSynthetic,
            lesion_mask: None,
        }
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1], 1).unwrap(), 1.0);
        // TP=2, FP=1, FN=1
        let v = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0], 1).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1_score(&[0, 0], &[0, 0], 1).unwrap(), 0.0);
        assert!(f1_score(&[0], &[0, 1], 1).is_err());
    }

    #[test]
    fn constant_predictor() {
        let recs: Vec<SliceRecord> = (0..10).map(|i| rec(usize::from(i < 4), if i % 2 == 0 { Bias::A } else { Bias::B })).collect();
        let m = SplitMetrics::from_predictions(&[0; 10], &recs).unwrap();
        assert!((m.accuracy - 0.6).abs() < 1e-12);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.cells.iter().map(|c| c.predicted_0).sum::<usize>(), 10);
    }

    #[test]
    fn f1_recomputable_from_cells() {
        let recs: Vec<SliceRecord> = (0..12).map(|i| rec(i % 2, if i % 3 == 0 { Bias::A } else { Bias::B })).collect();
        let preds: Vec<usize> = (0..12).map(|i| usize::from(i % 5 < 2)).collect();
        let m = SplitMetrics::from_predictions(&preds, &recs).unwrap();
        let labels: Vec<usize> = recs.iter().map(|r| r.class_label).collect();
        assert_eq!(m.f1, f1_score(&preds, &labels, 1).unwrap());
        assert_eq!(SplitMetrics::from_cells(m.cells.clone()), m);
    }

    #[test]
    fn averaging_is_the_arithmetic_mean() {
        let mk = |seed: u64, f1: f64| {
            let mut splits = BTreeMap::new();
            splits.insert(Split::Test, SplitMetrics { count: 1, accuracy: f1, precision: f1, recall: f1, f1, cells: vec![] });
            MetricsReport {
                tag: "t".into(),
                variant: "none".into(),
                seed,
                config_hash: String::new(),
                splits,
                missing_splits: vec![],
                train_loss: vec![],
                val_f1: vec![],
                best_epoch: 0,
            }
        };
        let avg = average_reports("t", &[mk(1, 0.2), mk(2, 0.5), mk(3, 0.8)]).unwrap();
        assert!((avg.f1[&Split::Test] - 0.5).abs() < 1e-15);
        assert_eq!(avg.seeds, vec![1, 2, 3]);
        assert!(!avg.f1.contains_key(&Split::Val));
    }

    #[test]
    fn cam_definitions() {
        // single channel, uniform positive gradient: proportional to ReLU(A)
        let a = [1.0, -2.0, 0.5, 2.0];
        let cam = cam_from_activations(&a, &[0.3; 4], 1, 2, 2, 2, 2).unwrap().to_vec();
        assert_eq!(cam, vec![0.5, 0.0, 0.25, 1.0]);
        let zero = cam_from_activations(&a, &[0.0; 4], 1, 2, 2, 4, 4).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        let up = cam_from_activations(&a, &[1.0; 4], 1, 2, 2, 8, 8).unwrap();
        assert_eq!(up.data().iter().cloned().fold(0.0, f64::max), 1.0);
        assert!(up.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn iou_of_the_clean_render_is_exact() {
        let mut img = vec![-1.0; 64];
        let mut mask = vec![0.0; 64];
        for r in 2..6 {
            for c in 2..6 {
                img[r * 8 + c] = 0.6;
                mask[r * 8 + c] = 1.0;
            }
        }
        let img = Tensor::new(img, &[1, 8, 8]).unwrap();
        let mask = Tensor::new(mask, &[1, 8, 8]).unwrap();
        // smoothing shaves the square's corners only
        let v = lesion_iou(&img, &mask).unwrap();
        assert!((v - 12.0 / 16.0).abs() < 1e-12, "{v}");
        let empty = Tensor::full(&[1, 8, 8], -1.0);
        assert_eq!(lesion_iou(&empty, &Tensor::zeros(&[1, 8, 8])).unwrap(), 1.0);
        assert_eq!(lesion_iou(&empty, &mask).unwrap(), 0.0);
    }
}
