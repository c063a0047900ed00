//! Segmentation evaluation: confusion tallies, mIoU, nearest-class scoring of
//! region embeddings and the inference-class-count sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, BinaryMask, Embedding, EmbeddingSet};
use crate::error::{Error, Result};

/// Reserved class id for pixels excluded from evaluation.
pub const IGNORE: u16 = u16::MAX;

/// Name of the catch-all category.
pub const OTHERS: &str = "others";

/// Dense `height x width` raster of class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl SegMask {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("mask {width}x{height} has an empty axis")));
        }
        if labels.len() != width * height {
            return Err(Error::Shape(format!(
                "mask {width}x{height} needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(SegMask { width, height, labels })
    }

    pub fn filled(width: usize, height: usize, id: u16) -> Result<Self> {
        Self::new(width, height, vec![id; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    /// Pixels carrying `id`.
    pub fn binary(&self, id: u16) -> BinaryMask {
        BinaryMask::new(
            self.height,
            self.width,
            self.labels.iter().map(|&l| l == id).collect(),
        )
        .expect("dimensions match by construction")
    }

    /// Distinct non-ignore ids in ascending order.
    pub fn present_ids(&self) -> Vec<u16> {
        let mut ids: Vec<u16> = self.labels.iter().copied().filter(|&l| l != IGNORE).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MiouMode {
    /// Average over classes with ground-truth pixels.
    #[default]
    PresentClasses,
    /// Average over every class that was touched by ground truth or prediction.
    AllClasses,
}

/// Per-class pixel tallies. Merging two accumulators is elementwise addition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionAccumulator {
    classes: Vec<String>,
    intersection: Vec<u64>,
    gt_pixels: Vec<u64>,
    pred_pixels: Vec<u64>,
}

impl ConfusionAccumulator {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::EmptyInput("accumulator needs at least one class".into()));
        }
        if classes.len() >= IGNORE as usize {
            return Err(Error::Config(format!(
                "{} classes do not fit below the ignore id {IGNORE}",
                classes.len()
            )));
        }
        let n = classes.len();
        Ok(ConfusionAccumulator {
            classes,
            intersection: vec![0; n],
            gt_pixels: vec![0; n],
            pred_pixels: vec![0; n],
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn intersection(&self, class: usize) -> u64 {
        self.intersection[class]
    }

    pub fn gt_pixels(&self, class: usize) -> u64 {
        self.gt_pixels[class]
    }

    pub fn pred_pixels(&self, class: usize) -> u64 {
        self.pred_pixels[class]
    }

    pub fn union(&self, class: usize) -> u64 {
        self.gt_pixels[class] + self.pred_pixels[class] - self.intersection[class]
    }

    /// Adds one image. Ground-truth ignore pixels are skipped entirely. An
    /// ignore id in the prediction over a labeled pixel means "no class" and
    /// counts as a miss. The accumulator is left untouched when the image is
    /// rejected.
    pub fn update(&mut self, gt: &SegMask, pred: &SegMask) -> Result<()> {
        if gt.width != pred.width || gt.height != pred.height {
            return Err(Error::Shape(format!(
                "ground truth is {}x{} but prediction is {}x{}",
                gt.width, gt.height, pred.width, pred.height
            )));
        }
        let n = self.classes.len();
        for (&g, &p) in gt.labels.iter().zip(&pred.labels) {
            if g == IGNORE {
                continue;
            }
            for id in [g, p] {
                if id != IGNORE && id as usize >= n {
                    return Err(Error::Vocabulary { id, classes: n });
                }
            }
        }
        for (&g, &p) in gt.labels.iter().zip(&pred.labels) {
            if g == IGNORE {
                continue;
            }
            self.gt_pixels[g as usize] += 1;
            if p == IGNORE {
                continue;
            }
            self.pred_pixels[p as usize] += 1;
            if g == p {
                self.intersection[g as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionAccumulator) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::Shape("cannot merge accumulators over different classes".into()));
        }
        for (a, b) in [
            (&mut self.intersection, &other.intersection),
            (&mut self.gt_pixels, &other.gt_pixels),
            (&mut self.pred_pixels, &other.pred_pixels),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn miou(&self, mode: MiouMode, include_others: bool) -> Result<MiouReport> {
        let mut per_class = Vec::with_capacity(self.classes.len());
        let mut sum = 0.0;
        let mut counted = 0usize;
        for (c, name) in self.classes.iter().enumerate() {
            let union = self.union(c);
            let iou = (union > 0).then(|| self.intersection[c] as f64 / union as f64);
            let selected = match mode {
                MiouMode::PresentClasses => self.gt_pixels[c] > 0,
                MiouMode::AllClasses => union > 0,
            } && (include_others || name != OTHERS);
            if selected {
                sum += iou.expect("selected classes have a nonzero union");
                counted += 1;
            }
            per_class.push(ClassIou {
                name: name.clone(),
                intersection: self.intersection[c],
                union,
                gt_pixels: self.gt_pixels[c],
                pred_pixels: self.pred_pixels[c],
                iou,
                counted: selected,
            });
        }
        if counted == 0 {
            return Err(Error::EmptyEvaluation);
        }
        Ok(MiouReport {
            miou: sum / counted as f64,
            mode,
            include_others,
            classes_counted: counted,
            per_class,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub name: String,
    pub intersection: u64,
    pub union: u64,
    pub gt_pixels: u64,
    pub pred_pixels: u64,
    pub iou: Option<f64>,
    /// Whether this class entered the mean.
    pub counted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouReport {
    pub miou: f64,
    pub mode: MiouMode,
    pub include_others: bool,
    pub classes_counted: usize,
    pub per_class: Vec<ClassIou>,
}

impl MiouReport {
    /// Aligned text table, one class per line.
    pub fn to_table(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<width$}  {:>8}  {:>12}  {:>12}  {}\n",
            "Class", "IoU", "Intersection", "Union", "Counted"
        );
        for c in &self.per_class {
            let iou = c.iou.map_or_else(|| "-".to_string(), |v| format!("{:.4}", v * 100.0));
            out.push_str(&format!(
                "{:<width$}  {:>8}  {:>12}  {:>12}  {}\n",
                c.name,
                iou,
                c.intersection,
                c.union,
                if c.counted { "yes" } else { "no" }
            ));
        }
        out.push_str(&format!(
            "{:<width$}  {:>8.4}  ({} classes)\n",
            "mIoU",
            self.miou * 100.0,
            self.classes_counted
        ));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    Error,
}

/// Index of the class whose embedding has the largest cosine with `region`.
pub fn nearest_class_scorer(region: &[f64], classes: &EmbeddingSet, tie_break: TieBreak) -> Result<usize> {
    if classes.is_empty() {
        return Err(Error::EmptyInput("no classes to score against".into()));
    }
    let mut best = f64::NEG_INFINITY;
    let mut winners: Vec<usize> = Vec::new();
    for (k, row) in classes.rows().enumerate() {
        let s = cosine_similarity(region, row)?;
        if s > best {
            best = s;
            winners.clear();
            winners.push(k);
        } else if s == best {
            winners.push(k);
        }
    }
    match (tie_break, winners.len()) {
        (TieBreak::Error, n) if n > 1 => Err(Error::Ambiguous(winners)),
        _ => Ok(winners[0]),
    }
}

/// One region proposal: the pixels it covers and its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub mask: BinaryMask,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepImage {
    pub gt: SegMask,
    /// Painted in order; later regions overwrite earlier ones.
    pub regions: Vec<Region>,
}

impl SweepImage {
    /// One region per ground-truth segment, with embeddings from `embed`.
    pub fn from_gt_segments(gt: SegMask, mut embed: impl FnMut(u16) -> Result<Embedding>) -> Result<Self> {
        let regions = gt
            .present_ids()
            .into_iter()
            .map(|id| {
                Ok(Region {
                    mask: gt.binary(id),
                    embedding: embed(id)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SweepImage { gt, regions })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub steps: Vec<usize>,
    pub seed: u64,
    pub tie_break: TieBreak,
    pub miou_mode: MiouMode,
    pub include_others: bool,
    pub distractor_source: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            steps: vec![0, 25, 50, 100],
            seed: 0,
            tie_break: TieBreak::LowestIndex,
            miou_mode: MiouMode::PresentClasses,
            include_others: false,
            distractor_source: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub num_categories: usize,
    pub miou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub seed: u64,
    pub distractor_source: String,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("count,miou\n");
        for p in &self.points {
            out.push_str(&format!("{},{:.12}\n", p.num_categories, p.miou));
        }
        out
    }
}

/// Re-scores every region against `base` plus a growing, seeded prefix of
/// `distractors` and records mIoU at each step.
///
/// `num_categories` in each point is the number of distractors appended. The
/// distractor order is one seeded shuffle of the pool, so the class list at a
/// later step always contains the list at an earlier one.
pub fn class_count_sweep(
    images: &[SweepImage],
    base: &EmbeddingSet,
    distractors: &EmbeddingSet,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if cfg.steps.is_empty() {
        return Err(Error::Config("sweep needs at least one step".into()));
    }
    if cfg.steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "sweep steps must be strictly increasing, got {:?}",
            cfg.steps
        )));
    }
    if base.is_empty() {
        return Err(Error::EmptyInput("no base classes".into()));
    }
    let max_step = *cfg.steps.last().expect("nonempty");
    if max_step > distractors.len() {
        return Err(Error::InsufficientDistractors {
            needed: max_step,
            available: distractors.len(),
        });
    }
    if max_step > 0 && distractors.dim() != base.dim() {
        return Err(Error::Shape(format!(
            "distractors have dimension {} but base classes have {}",
            distractors.dim(),
            base.dim()
        )));
    }

    let mut order: Vec<usize> = (0..distractors.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let chosen = distractors.select(&order[..max_step]);

    let mut names: Vec<String> = (0..base.len())
        .map(|i| base.label(i).map_or_else(|| format!("class_{i}"), str::to_owned))
        .collect();
    names.extend((0..max_step).map(|j| format!("distractor_{j}")));
    let template = ConfusionAccumulator::new(names)?;

    let mut points = Vec::with_capacity(cfg.steps.len());
    for &step in &cfg.steps {
        let classes = base.concat(&chosen.select(&(0..step).collect::<Vec<_>>()))?;
        let mut acc = template.clone();
        for (i, image) in images.iter().enumerate() {
            let pred = predict(image, &classes, cfg.tie_break).map_err(|e| match e {
                Error::Degenerate(msg) => Error::Degenerate(format!("image {i}: {msg}")),
                other => other,
            })?;
            acc.update(&image.gt, &pred)?;
        }
        points.push(SweepPoint {
            num_categories: step,
            miou: acc.miou(cfg.miou_mode, cfg.include_others)?.miou,
        });
    }
    Ok(SweepResult {
        points,
        seed: cfg.seed,
        distractor_source: cfg.distractor_source.clone(),
    })
}

/// Paints each region with its nearest class.
pub fn predict(image: &SweepImage, classes: &EmbeddingSet, tie_break: TieBreak) -> Result<SegMask> {
    let (w, h) = (image.gt.width, image.gt.height);
    let mut labels = vec![IGNORE; w * h];
    for region in &image.regions {
        if region.mask.width() != w || region.mask.height() != h {
            return Err(Error::Shape(format!(
                "region mask {}x{} on a {w}x{h} image",
                region.mask.width(),
                region.mask.height()
            )));
        }
        let id = nearest_class_scorer(&region.embedding, classes, tie_break)?;
        let id = u16::try_from(id).map_err(|_| Error::Vocabulary { id: IGNORE, classes: classes.len() })?;
        for (l, &on) in labels.iter_mut().zip(region.mask.bits()) {
            if on {
                *l = id;
            }
        }
    }
    for (i, (l, &g)) in labels.iter_mut().zip(&image.gt.labels).enumerate() {
        if *l == IGNORE {
            if g != IGNORE {
                return Err(Error::Degenerate(format!("pixel {i} is not covered by any region")));
            }
            *l = 0;
        }
    }
    SegMask::new(w, h, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn mask(w: usize, h: usize, l: &[u16]) -> SegMask {
        SegMask::new(w, h, l.to_vec()).unwrap()
    }

    #[test]
    fn two_by_two_worked_example() {
        let mut acc = ConfusionAccumulator::new(names(2)).unwrap();
        acc.update(&mask(2, 2, &[0, 0, 1, 1]), &mask(2, 2, &[0, 0, 0, 0])).unwrap();
        let r = acc.miou(MiouMode::PresentClasses, false).unwrap();
        assert_eq!(r.per_class[0].iou, Some(0.5));
        assert_eq!(r.per_class[1].iou, Some(0.0));
        assert_eq!(r.miou, 0.25);
        assert_eq!(acc.miou(MiouMode::AllClasses, false).unwrap().miou, 0.25);
    }

    #[test]
    fn identity_prediction_is_perfect() {
        let gt = mask(3, 2, &[0, 1, 2, 2, IGNORE, 1]);
        let pred = mask(3, 2, &[0, 1, 2, 2, 0, 1]);
        let mut acc = ConfusionAccumulator::new(names(4)).unwrap();
        acc.update(&gt, &pred).unwrap();
        let r = acc.miou(MiouMode::PresentClasses, true).unwrap();
        assert_eq!(r.miou, 1.0);
        assert_eq!(r.classes_counted, 3);
        assert_eq!(r.per_class[3].iou, None);
    }

    #[test]
    fn all_ignore_changes_nothing() {
        let mut acc = ConfusionAccumulator::new(names(2)).unwrap();
        let before = acc.clone();
        acc.update(&mask(2, 1, &[IGNORE, IGNORE]), &mask(2, 1, &[1, 0])).unwrap();
        assert_eq!(acc, before);
        assert!(matches!(
            acc.miou(MiouMode::PresentClasses, true),
            Err(Error::EmptyEvaluation)
        ));
    }

    #[test]
    fn update_errors_leave_tallies_alone() {
        let mut acc = ConfusionAccumulator::new(names(2)).unwrap();
        assert!(matches!(
            acc.update(&mask(2, 1, &[0, 0]), &mask(1, 2, &[0, 0])),
            Err(Error::Shape(_))
        ));
        let before = acc.clone();
        assert!(matches!(
            acc.update(&mask(2, 1, &[0, 5]), &mask(2, 1, &[0, 0])),
            Err(Error::Vocabulary { id: 5, classes: 2 })
        ));
        assert_eq!(acc, before);
    }

    #[test]
    fn ignored_prediction_is_a_miss() {
        let mut acc = ConfusionAccumulator::new(names(2)).unwrap();
        acc.update(&mask(3, 1, &[0, 1, IGNORE]), &mask(3, 1, &[0, IGNORE, IGNORE])).unwrap();
        assert_eq!((acc.gt_pixels(1), acc.pred_pixels(1), acc.union(1)), (1, 0, 1));
        assert_eq!((acc.intersection(0), acc.union(0)), (1, 1));
    }

    #[test]
    fn absent_but_predicted_class_modes() {
        // gt only class 0, prediction spills into class 1.
        let mut acc = ConfusionAccumulator::new(names(3)).unwrap();
        acc.update(&mask(4, 1, &[0, 0, 0, 0]), &mask(4, 1, &[0, 0, 0, 1])).unwrap();
        let present = acc.miou(MiouMode::PresentClasses, true).unwrap();
        assert_eq!(present.miou, 0.75);
        let all = acc.miou(MiouMode::AllClasses, true).unwrap();
        // class 1 counts as 0, class 2 never touched.
        assert_eq!(all.miou, 0.375);
        assert_eq!(all.classes_counted, 2);
    }

    #[test]
    fn others_excluded_from_mean_but_not_unions() {
        // Classes: a, b, others. Hand counts below.
        let classes = vec!["a".to_string(), "b".to_string(), OTHERS.to_string()];
        let gt = mask(3, 2, &[0, 0, 1, 2, 2, 1]);
        let pred = mask(3, 2, &[0, 2, 1, 0, 2, 1]);
        let mut acc = ConfusionAccumulator::new(classes).unwrap();
        acc.update(&gt, &pred).unwrap();
        // a: gt {0,1}, pred {0,3}, inter {0} -> 1/3.
        // b: gt {2,5}, pred {2,5} -> 1.
        // others: gt {3,4}, pred {1,4}, inter {4} -> 1/3.
        assert_eq!(acc.union(0), 3);
        let without = acc.miou(MiouMode::PresentClasses, false).unwrap();
        assert!((without.miou - (1.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        let with = acc.miou(MiouMode::PresentClasses, true).unwrap();
        assert!((with.miou - (1.0 / 3.0 + 1.0 + 1.0 / 3.0) / 3.0).abs() < 1e-15);
        assert!(!without.per_class[2].counted);
        assert!(without.to_table().contains("others"));
    }

    #[test]
    fn scorer_examples() {
        let classes = EmbeddingSet::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(nearest_class_scorer(&[0.0, 1.0, 0.0], &classes, TieBreak::Error).unwrap(), 1);
        assert_eq!(nearest_class_scorer(&[0.0, 10.0, 0.0], &classes, TieBreak::Error).unwrap(), 1);
        let tie = [1.0, 1.0, 0.0];
        assert_eq!(nearest_class_scorer(&tie, &classes, TieBreak::LowestIndex).unwrap(), 0);
        match nearest_class_scorer(&tie, &classes, TieBreak::Error) {
            Err(Error::Ambiguous(c)) => assert_eq!(c, vec![0, 1]),
            other => panic!("{other:?}"),
        }
        let empty = EmbeddingSet::from_flat(3, vec![]).unwrap();
        assert!(nearest_class_scorer(&tie, &empty, TieBreak::LowestIndex).is_err());
    }

    fn unit(d: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    }

    fn two_class_image() -> (SweepImage, EmbeddingSet) {
        let gt = mask(2, 2, &[0, 0, 1, 1]);
        let base = EmbeddingSet::from_rows(&[unit(4, 0), unit(4, 1)]).unwrap();
        let image = SweepImage::from_gt_segments(gt, |id| {
            // Region embeddings lean towards their class but are not identical.
            let mut v = unit(4, id as usize);
            v[3] = 0.1;
            Embedding::new(v)
        })
        .unwrap();
        (image, base)
    }

    #[test]
    fn orthogonal_distractors_leave_miou_unchanged() {
        let (image, base) = two_class_image();
        let distractors = EmbeddingSet::from_rows(&[unit(4, 2), [0.0, 0.0, -1.0, 0.0].to_vec()]).unwrap();
        let cfg = SweepConfig {
            steps: vec![0, 1, 2],
            ..SweepConfig::default()
        };
        let r = class_count_sweep(&[image], &base, &distractors, &cfg).unwrap();
        assert!(r.points.iter().all(|p| p.miou == 1.0));
        assert_eq!(r.to_csv().lines().next(), Some("count,miou"));
    }

    #[test]
    fn closer_distractor_steals_its_class() {
        let (image, base) = two_class_image();
        // Exactly the class-1 region embedding: beats class 1 for that region.
        let distractors = EmbeddingSet::from_rows(&[vec![0.0, 1.0, 0.0, 0.1]]).unwrap();
        let cfg = SweepConfig {
            steps: vec![0, 1],
            ..SweepConfig::default()
        };
        let r = class_count_sweep(std::slice::from_ref(&image), &base, &distractors, &cfg).unwrap();
        assert_eq!(r.points[0].miou, 1.0);
        // Pixel count: class 0 IoU 1, class 1 IoU 0.
        assert_eq!(r.points[1].miou, 0.5);
        let classes = base.concat(&distractors).unwrap();
        assert_eq!(predict(&image, &classes, TieBreak::LowestIndex).unwrap().labels(), &[0, 0, 2, 2]);
    }

    #[test]
    fn sweep_validation() {
        let (image, base) = two_class_image();
        let d = EmbeddingSet::from_rows(&[unit(4, 2)]).unwrap();
        let bad_steps = SweepConfig {
            steps: vec![1, 1],
            ..SweepConfig::default()
        };
        assert!(matches!(
            class_count_sweep(std::slice::from_ref(&image), &base, &d, &bad_steps),
            Err(Error::Config(_))
        ));
        let too_many = SweepConfig {
            steps: vec![0, 2],
            ..SweepConfig::default()
        };
        assert!(matches!(
            class_count_sweep(std::slice::from_ref(&image), &base, &d, &too_many),
            Err(Error::InsufficientDistractors { needed: 2, available: 1 })
        ));
        let mut uncovered = image;
        uncovered.regions.pop();
        let ok = SweepConfig {
            steps: vec![0],
            ..SweepConfig::default()
        };
        assert!(matches!(
            class_count_sweep(&[uncovered], &base, &d, &ok),
            Err(Error::Degenerate(_))
        ));
    }

    fn mask_pair() -> impl Strategy<Value = (Vec<u16>, Vec<u16>)> {
        (
            prop::collection::vec(prop_oneof![0u16..4, Just(IGNORE)], 16),
            prop::collection::vec(0u16..4, 16),
        )
    }

    proptest! {
        #[test]
        fn iou_bounds_and_union_identity(pairs in prop::collection::vec(mask_pair(), 1..5)) {
            let mut acc = ConfusionAccumulator::new(names(4)).unwrap();
            for (g, p) in &pairs {
                acc.update(&mask(4, 4, g), &mask(4, 4, p)).unwrap();
            }
            for c in 0..4 {
                prop_assert!(acc.intersection(c) <= acc.gt_pixels(c).min(acc.pred_pixels(c)));
            }
            for mode in [MiouMode::PresentClasses, MiouMode::AllClasses] {
                if let Ok(r) = acc.miou(mode, true) {
                    prop_assert!((0.0..=1.0).contains(&r.miou));
                    for c in &r.per_class {
                        if let Some(v) = c.iou { prop_assert!((0.0..=1.0).contains(&v)); }
                    }
                }
            }
        }

        #[test]
        fn per_image_equals_concatenated(pairs in prop::collection::vec(mask_pair(), 1..5)) {
            let mut per_image = ConfusionAccumulator::new(names(4)).unwrap();
            let (mut g_all, mut p_all) = (Vec::new(), Vec::new());
            for (g, p) in &pairs {
                per_image.update(&mask(4, 4, g), &mask(4, 4, p)).unwrap();
                g_all.extend(g);
                p_all.extend(p);
            }
            let mut stacked = ConfusionAccumulator::new(names(4)).unwrap();
            stacked.update(&mask(4, 4 * pairs.len(), &g_all), &mask(4, 4 * pairs.len(), &p_all)).unwrap();
            prop_assert_eq!(&per_image, &stacked);

            let mut merged = ConfusionAccumulator::new(names(4)).unwrap();
            for (g, p) in pairs.iter().rev() {
                let mut one = ConfusionAccumulator::new(names(4)).unwrap();
                one.update(&mask(4, 4, g), &mask(4, 4, p)).unwrap();
                merged.merge(&one).unwrap();
            }
            prop_assert_eq!(&per_image, &merged);
        }

        #[test]
        fn scorer_ignores_positive_scale(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 2..6),
            region in prop::collection::vec(-1.0f64..1.0, 5),
            s in 0.01f64..100.0,
        ) {
            prop_assume!(rows.iter().chain(std::iter::once(&region)).all(|r| crate::embedding::norm(r) > 1e-3));
            let classes = EmbeddingSet::from_rows(&rows).unwrap();
            let scaled: Vec<f64> = region.iter().map(|v| v * s).collect();
            let a = nearest_class_scorer(&region, &classes, TieBreak::LowestIndex).unwrap();
            let b = nearest_class_scorer(&scaled, &classes, TieBreak::LowestIndex).unwrap();
            // Scaling can perturb the last bit of a cosine; only compare clear winners.
            let cos = |k: usize| cosine_similarity(&region, classes.row(k)).unwrap();
            let margin = (0..classes.len()).filter(|&k| k != a).map(|k| cos(a) - cos(k)).fold(f64::INFINITY, f64::min);
            prop_assume!(margin > 1e-12);
            prop_assert_eq!(a, b);
        }
    }
}
