//! Contrastive (momentum encoder + negative queue) pretraining of the slice
//! embedder and the exhaustive cross-class nearest-neighbour pairing built
//! on it.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{augment, stack_images, AugmentConfig, SliceRecord};
use crate::error::{invalid, Error, Result};
use crate::losses::info_nce_batch;
use crate::models::{embed, init_embedder, ArchitectureSpec, NetworkParams};
use crate::tensor::{adam_step, no_grad, AdamState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastiveConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    pub queue_size: usize,
    pub momentum: f64,
    pub learning_rate: f64,
    pub augment: AugmentConfig,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            epochs: 8,
            batch_size: 32,
            temperature: 0.07,
            queue_size: 1024,
            momentum: 0.99,
            learning_rate: 1e-3,
            augment: AugmentConfig::contrastive(64),
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return invalid(format!("momentum {} must lie in (0,1)", self.momentum));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return invalid("contrastive epochs and batch_size must be positive");
        }
        if self.queue_size < self.batch_size {
            return invalid(format!("queue_size {} is smaller than batch_size {}", self.queue_size, self.batch_size));
        }
        if !(self.temperature > 0.0 && self.learning_rate > 0.0) {
            return invalid("temperature and learning_rate must be positive");
        }
        Ok(())
    }
}

/// `key <- m * key + (1 - m) * query`, parameter by parameter.
pub fn momentum_update(key: &NetworkParams, query: &NetworkParams, m: f64) -> Result<()> {
    if key.len() != query.len() {
        return invalid(format!("key has {} parameters, query {}", key.len(), query.len()));
    }
    for ((nk, k), (nq, q)) in key.entries().iter().zip(query.entries()) {
        if nk != nq || k.shape() != q.shape() {
            return invalid(format!("parameter mismatch: {nk} {:?} vs {nq} {:?}", k.shape(), q.shape()));
        }
    }
    for ((_, k), (_, q)) in key.entries().iter().zip(query.entries()) {
        let q = q.data();
        for (kv, qv) in k.data_mut().iter_mut().zip(q.iter()) {
            *kv = m * *kv + (1.0 - m) * qv;
        }
    }
    Ok(())
}

/// First-in first-out store of past keys.
#[derive(Clone, Debug)]
pub struct KeyQueue {
    capacity: usize,
    dim: usize,
    keys: VecDeque<Vec<f64>>,
}

impl KeyQueue {
    pub fn new(capacity: usize, dim: usize) -> Self {
        Self { capacity, dim, keys: VecDeque::with_capacity(capacity) }
    }

    /// Filled with random unit vectors.
    pub fn random(capacity: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let mut q = Self::new(capacity, dim);
        for _ in 0..capacity {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            q.keys.push_back(v.into_iter().map(|x| x / norm).collect());
        }
        q
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Appends each row of `[B,dim]`, evicting the oldest beyond capacity.
    pub fn push_rows(&mut self, rows: &Tensor) {
        for row in rows.data().chunks(self.dim) {
            if self.keys.len() == self.capacity {
                self.keys.pop_front();
            }
            self.keys.push_back(row.to_vec());
        }
    }

    pub fn tensor(&self) -> Result<Tensor> {
        Tensor::new(self.keys.iter().flatten().copied().collect(), &[self.keys.len(), self.dim])
    }
}

fn augmented_batch(records: &[&SliceRecord], cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<Tensor> {
    let views = records.iter().map(|r| augment(&r.image, cfg, rng)).collect::<Result<Vec<_>>>()?;
    stack_images(views.iter())
}

#[derive(Clone, Debug)]
pub struct ContrastiveRun {
    pub query: NetworkParams,
    pub key: NetworkParams,
    /// Mean InfoNCE per optimizer step.
    pub losses: Vec<f64>,
    pub max_queue_len: usize,
}

/// Trains the query encoder with Adam against a momentum key encoder; each
/// slice contributes two independently augmented views per epoch.
pub fn pretrain_contrastive(dataset: &[SliceRecord], arch: &ArchitectureSpec, cfg: &ContrastiveConfig, seed: u64) -> Result<ContrastiveRun> {
    cfg.validate()?;
    if dataset.is_empty() {
        return invalid("contrastive pretraining needs a non-empty dataset");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let query = init_embedder(arch, &mut rng)?;
    let key = query.frozen();
    let mut queue = KeyQueue::random(cfg.queue_size, arch.embed_dim, &mut rng);
    let params = query.tensors();
    let mut adam = AdamState::with_defaults(&params);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut losses = Vec::new();
    let mut max_queue_len = queue.len();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SliceRecord> = chunk.iter().map(|&i| &dataset[i]).collect();
            let v1 = augmented_batch(&batch, &cfg.augment, &mut rng)?;
            let v2 = augmented_batch(&batch, &cfg.augment, &mut rng)?;
            let k = no_grad(|| embed(&key, arch, &v2))?;
            let q = embed(&query, arch, &v1)?;
            let loss = info_nce_batch(&q, &k, &queue.tensor()?, cfg.temperature)?;
            if !loss.item().is_finite() {
                return Err(Error::NonFinite { step: losses.len(), what: format!("info_nce (epoch {epoch})") });
            }
            query.zero_grad();
            loss.backward()?;
            adam_step(&params, &mut adam, cfg.learning_rate)?;
            momentum_update(&key, &query, cfg.momentum)?;
            queue.push_rows(&k);
            max_queue_len = max_queue_len.max(queue.len());
            losses.push(loss.item());
        }
    }
    query.zero_grad();
    Ok(ContrastiveRun { query, key, losses, max_queue_len })
}

/// Mean cosine similarity of matching augmented views and of all
/// non-matching pairs, with one fresh pair of views per slice.
pub fn view_similarity(encoder: &NetworkParams, arch: &ArchitectureSpec, records: &[SliceRecord], cfg: &AugmentConfig, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs: Vec<&SliceRecord> = records.iter().collect();
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    for chunk in refs.chunks(64) {
        let v1 = augmented_batch(chunk, cfg, &mut rng)?;
        let v2 = augmented_batch(chunk, cfg, &mut rng)?;
        e1.extend(no_grad(|| embed(encoder, arch, &v1))?.to_vec());
        e2.extend(no_grad(|| embed(encoder, arch, &v2))?.to_vec());
    }
    let de = arch.embed_dim;
    let n = records.len();
    let dot = |i: usize, j: usize| (0..de).map(|d| e1[i * de + d] * e2[j * de + d]).sum::<f64>();
    let pos = (0..n).map(|i| dot(i, i)).sum::<f64>() / n as f64;
    let mut neg = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            neg += dot(i, j);
        }
    }
    let pairs = (n * (n - 1)).max(1) as f64;
    Ok((pos, neg / pairs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub structure_id: u64,
    pub texture_id: u64,
    pub l1_distance: f64,
}

/// Each slice (as structure source) mapped to its texture source.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairIndex {
    pub entries: Vec<PairEntry>,
}

pub const PAIR_CSV_HEADER: [&str; 3] = ["structure_id", "texture_id", "l1_distance"];

impl PairIndex {
    pub fn texture_for(&self, structure_id: u64) -> Option<&PairEntry> {
        self.entries
            .binary_search_by_key(&structure_id, |e| e.structure_id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(PAIR_CSV_HEADER).map_err(csv_err)?;
        for e in &self.entries {
            wr.write_record([e.structure_id.to_string(), e.texture_id.to_string(), format!("{:.9}", e.l1_distance)])
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers().map_err(csv_err)?.iter().ne(PAIR_CSV_HEADER) {
            return Err(Error::Format(format!("pair index header must be {}", PAIR_CSV_HEADER.join(","))));
        }
        let mut entries = Vec::new();
        for row in rd.records() {
            let row = row.map_err(csv_err)?;
            let field = |i: usize| row.get(i).ok_or_else(|| Error::Format(format!("short pair row {row:?}")));
            let parse_err = |_| Error::Format(format!("bad pair row {row:?}"));
            entries.push(PairEntry {
                structure_id: field(0)?.parse().map_err(parse_err)?,
                texture_id: field(1)?.parse().map_err(parse_err)?,
                l1_distance: field(2)?.parse().map_err(|_| Error::Format(format!("bad pair row {row:?}")))?,
            });
        }
        if !entries.windows(2).all(|w| w[0].structure_id < w[1].structure_id) {
            return Err(Error::Format("pair index rows must be sorted by unique structure_id".into()));
        }
        Ok(Self { entries })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// One slice as seen by the pair search.
#[derive(Clone, Debug, PartialEq)]
pub struct PairItem {
    pub slice_id: u64,
    pub class_label: usize,
    pub embedding: Vec<f64>,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Exhaustive search: every item is paired with the opposite-class item at
/// the smallest L1 distance, ties going to the lowest slice id. The result
/// does not depend on the input order.
pub fn pairs_from_embeddings(items: &[PairItem]) -> Result<PairIndex> {
    let mut sorted: Vec<&PairItem> = items.iter().collect();
    sorted.sort_by_key(|it| it.slice_id);
    if sorted.windows(2).any(|w| w[0].slice_id == w[1].slice_id) {
        return invalid("duplicate slice ids in pair search");
    }
    for class in [0, 1] {
        if !sorted.iter().any(|it| it.class_label == class) {
            return invalid(format!("class {class} has no slices to pair with"));
        }
    }
    if let Some(it) = sorted.iter().find(|it| it.class_label > 1) {
        return invalid(format!("slice {} has class {}", it.slice_id, it.class_label));
    }
    let entries = sorted
        .iter()
        .map(|s| {
            let mut best: Option<(f64, u64)> = None;
            for t in sorted.iter().filter(|t| t.class_label != s.class_label) {
                let d = l1(&s.embedding, &t.embedding);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, t.slice_id));
                }
            }
            let (l1_distance, texture_id) = best.expect("both classes present");
            PairEntry { structure_id: s.slice_id, texture_id, l1_distance }
        })
        .collect();
    Ok(PairIndex { entries })
}

/// Where pair distances are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSpace {
    Embedding,
    RawPixels,
}

/// Embeds every record (or takes raw pixels) and runs the exhaustive search.
pub fn build_pairs(dataset: &[SliceRecord], encoder: &NetworkParams, arch: &ArchitectureSpec, space: PairSpace) -> Result<PairIndex> {
    let mut items = Vec::with_capacity(dataset.len());
    for chunk in dataset.chunks(64) {
        let rows: Vec<Vec<f64>> = match space {
            PairSpace::RawPixels => chunk.iter().map(|r| r.image.to_vec()).collect(),
            PairSpace::Embedding => {
                let e = no_grad(|| embed(encoder, arch, &stack_images(chunk.iter().map(|r| &r.image))?))?;
                let rows = e.data().chunks(arch.embed_dim).map(<[f64]>::to_vec).collect();
                rows
            }
        };
        for (r, embedding) in chunk.iter().zip(rows) {
            items.push(PairItem { slice_id: r.slice_id, class_label: r.class_label, embedding });
        }
    }
    pairs_from_embeddings(&items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, ClassCounts, SynthSpec};

    fn item(id: u64, class: usize, e: &[f64]) -> PairItem {
        PairItem { slice_id: id, class_label: class, embedding: e.to_vec() }
    }

    #[test]
    fn momentum_examples() {
        let mk = |v: f64| {
            let mut p = NetworkParams::new("n", "t");
            p.push("w", Tensor::full(&[2], v)).unwrap();
            p
        };
        let (k, q) = (mk(0.3), mk(1.0));
        momentum_update(&k, &q, 1.0).unwrap();
        assert_eq!(k.get("w").unwrap().to_vec(), vec![0.3; 2]);
        momentum_update(&k, &q, 0.0).unwrap();
        assert_eq!(k.get("w").unwrap().to_vec(), vec![1.0; 2]);
        let k = mk(0.0);
        momentum_update(&k, &q, 0.999).unwrap();
        assert!((k.get("w").unwrap().to_vec()[0] - 0.001).abs() < 1e-15);
        let mut other = NetworkParams::new("n", "t");
        other.push("w", Tensor::zeros(&[3])).unwrap();
        assert!(momentum_update(&k, &other, 0.5).is_err());
    }

    #[test]
    fn queue_is_fifo_and_bounded() {
        let mut q = KeyQueue::new(3, 1);
        q.push_rows(&Tensor::new(vec![1.0, 2.0], &[2, 1]).unwrap());
        q.push_rows(&Tensor::new(vec![3.0, 4.0], &[2, 1]).unwrap());
        assert_eq!(q.len(), 3);
        assert_eq!(q.tensor().unwrap().to_vec(), vec![2.0, 3.0, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = KeyQueue::random(5, 4, &mut rng).tensor().unwrap();
        for row in r.data().chunks(4) {
            assert!((row.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pairing_example() {
        let items = [item(0, 0, &[0.0]), item(1, 0, &[1.0]), item(2, 1, &[0.1]), item(3, 1, &[5.0])];
        let p = pairs_from_embeddings(&items).unwrap();
        let got: Vec<(u64, u64)> = p.entries.iter().map(|e| (e.structure_id, e.texture_id)).collect();
        assert_eq!(got, vec![(0, 2), (1, 2), (2, 0), (3, 1)]);
        assert!((p.entries[1].l1_distance - 0.9).abs() < 1e-12);
        let mut rev = items.to_vec();
        rev.reverse();
        assert_eq!(pairs_from_embeddings(&rev).unwrap(), p);
    }

    #[test]
    fn identical_embeddings_pair_mutually() {
        let items = [item(4, 0, &[0.5, 0.5]), item(9, 1, &[0.5, 0.5]), item(2, 1, &[0.4, 0.5])];
        let p = pairs_from_embeddings(&items).unwrap();
        assert_eq!(p.texture_for(4).unwrap().texture_id, 9);
        assert_eq!(p.texture_for(4).unwrap().l1_distance, 0.0);
        assert_eq!(p.texture_for(9).unwrap().texture_id, 4);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let items = [item(0, 0, &[0.0]), item(7, 1, &[1.0]), item(3, 1, &[-1.0])];
        assert_eq!(pairs_from_embeddings(&items).unwrap().texture_for(0).unwrap().texture_id, 3);
    }

    #[test]
    fn missing_class_rejected() {
        assert!(pairs_from_embeddings(&[item(0, 0, &[0.0]), item(1, 0, &[1.0])]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = PairIndex {
            entries: vec![
                PairEntry { structure_id: 0, texture_id: 5, l1_distance: 0.25 },
                PairEntry { structure_id: 5, texture_id: 0, l1_distance: 1.0 / 3.0 },
            ],
        };
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "structure_id,texture_id,l1_distance\n0,5,0.250000000\n5,0,0.333333333\n");
        let back = PairIndex::read_csv(&buf[..]).unwrap();
        assert_eq!(back.entries[1].texture_id, 0);
        assert!(PairIndex::read_csv(&b"a,b,c\n1,2,3\n"[..]).is_err());
    }

    #[test]
    fn contrastive_run_is_deterministic_and_bounded() {
        let spec = SynthSpec {
            image_size: 16,
            train: ClassCounts { class0: 4, class1: 4 },
            val: ClassCounts { class0: 1, class1: 1 },
            test: ClassCounts { class0: 1, class1: 1 },
            ..Default::default()
        };
        let data = synth_dataset(&spec, 0).unwrap();
        let arch = ArchitectureSpec { image_size: 16, embed_channels: vec![4, 4], embed_dim: 8, ..Default::default() };
        let cfg = ContrastiveConfig {
            epochs: 2,
            batch_size: 4,
            queue_size: 6,
            augment: AugmentConfig::contrastive(16),
            ..Default::default()
        };
        let a = pretrain_contrastive(&data, &arch, &cfg, 3).unwrap();
        let b = pretrain_contrastive(&data, &arch, &cfg, 3).unwrap();
        assert!(a.query.bit_identical(&b.query));
        assert_eq!(a.max_queue_len, 6);
        assert_eq!(a.losses.len(), 2 * 3);
        assert!(pretrain_contrastive(&[], &arch, &cfg, 3).is_err());
        let pairs = build_pairs(&data, &a.query, &arch, PairSpace::Embedding).unwrap();
        assert_eq!(pairs.entries.len(), data.len());
        let class = |id: u64| data.iter().find(|r| r.slice_id == id).unwrap().class_label;
        assert!(pairs.entries.iter().all(|e| class(e.structure_id) != class(e.texture_id)));
    }
}
