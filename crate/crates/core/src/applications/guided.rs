//! Mask-guided synthesis: per-pixel texture IDs steer which style regions
//! feed which output regions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index::sample;

use super::{blocks, feature_cells};
use crate::codec::FeatureCodec;
use crate::error::{Error, Result};
use crate::pipeline::{encode_samples, level_image, synthesize_with, LayerTarget, LevelInfo, LevelPlanner, Mode, Synthesis, SynthesisConfig};
use crate::seed::SeedStream;
use crate::tensor::{ImageRgb, SampleMatrix};

/// Per-pixel texture IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMask {
    width: usize,
    height: usize,
    ids: Vec<u32>,
}

impl IdMask {
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != width * height || ids.is_empty() {
            return Err(Error::dim(format!("{width}x{height} mask with {} ids", ids.len())));
        }
        Ok(Self { width, height, ids })
    }

    /// 8-bit greyscale; every distinct byte is an ID.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Self::new(w, h, img.into_raw().into_iter().map(u32::from).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn id_set(&self) -> BTreeSet<u32> {
        self.ids.iter().copied().collect()
    }

    /// IDs on the feature grid of `layer` (downsample `factor`) for an image
    /// of this mask's size reduced by `halvings`. `required` IDs that lose
    /// every majority vote take over the cell where they are most common.
    fn cells(&self, halvings: usize, factor: usize, required: &BTreeSet<u32>) -> Vec<u32> {
        let level = blocks(&self.ids, self.width, self.height, 1 << halvings, majority);
        let (lw, lh) = (self.width >> halvings, self.height >> halvings);
        let counts = feature_cells(&level, lw, lh, factor, histogram_of);
        let mut ids: Vec<u32> = counts.iter().map(winner).collect();
        let present: BTreeSet<u32> = ids.iter().copied().collect();
        for &id in required.difference(&present) {
            let best = counts
                .iter()
                .enumerate()
                .filter_map(|(k, c)| c.get(&id).map(|&n| (n, k)))
                .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)));
            if let Some((_, k)) = best {
                ids[k] = id;
            }
        }
        ids
    }
}

fn histogram_of(ids: &[u32]) -> BTreeMap<u32, usize> {
    let mut h = BTreeMap::new();
    for &id in ids {
        *h.entry(id).or_insert(0) += 1;
    }
    h
}

/// Most frequent entry; ties go to the smallest ID.
fn winner(h: &BTreeMap<u32, usize>) -> u32 {
    // BTreeMap iterates in ascending ID order, so the first maximum wins
    h.iter().fold((0, 0), |(bid, bn), (&id, &n)| if n > bn { (id, n) } else { (bid, bn) }).0
}

pub fn majority(ids: &[u32]) -> u32 {
    winner(&histogram_of(ids))
}

/// Style and output ID masks.
#[derive(Debug, Clone)]
pub struct GuidanceMasks {
    pub style_mask: IdMask,
    pub content_mask: IdMask,
}

impl GuidanceMasks {
    /// Every output ID must appear in the style mask.
    pub fn new(style_mask: IdMask, content_mask: IdMask) -> Result<Self> {
        let style = style_mask.id_set();
        if let Some(&id) = content_mask.id_set().difference(&style).next() {
            return Err(Error::UnmatchableId(id));
        }
        Ok(Self { style_mask, content_mask })
    }

    pub fn id_set(&self) -> BTreeSet<u32> {
        self.style_mask.id_set()
    }
}

/// Resamples `s` so each ID has exactly its `desired` count.
///
/// IDs not in `desired` are dropped. Within an ID, a shrinking count keeps a
/// uniform random subset and a growing one duplicates uniformly chosen
/// rows. Rows keep their original relative order and are copied bitwise.
pub fn rebalance_target(
    s: &SampleMatrix,
    s_ids: &[u32],
    desired: &BTreeMap<u32, usize>,
    seeds: &SeedStream,
) -> Result<(SampleMatrix, Vec<u32>)> {
    if s_ids.len() != s.samples() {
        return Err(Error::dim(format!("{} ids for {} rows", s_ids.len(), s.samples())));
    }
    if desired.values().sum::<usize>() == 0 {
        return Err(Error::EmptyDistribution("desired id histogram"));
    }
    let mut rows_of: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (k, &id) in s_ids.iter().enumerate() {
        rows_of.entry(id).or_default().push(k);
    }
    let mut copies = vec![0usize; s.samples()];
    for (&id, &want) in desired {
        if want == 0 {
            continue;
        }
        let rows = rows_of.get(&id).ok_or(Error::UnmatchableId(id))?;
        let have = rows.len();
        let (whole, extra) = (want / have, want % have);
        for &k in rows {
            copies[k] = whole;
        }
        if extra > 0 {
            let mut rng = seeds.named("id", u64::from(id)).rng();
            for pick in sample(&mut rng, have, extra) {
                copies[rows[pick]] += 1;
            }
        }
    }
    let order: Vec<usize> = copies.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n)).collect();
    let ids = order.iter().map(|&k| s_ids[k]).collect();
    Ok((s.gather(&order), ids))
}

/// Per-ID means of a sample set.
#[derive(Debug, Clone)]
pub struct IdMeans {
    means: BTreeMap<u32, Vec<f64>>,
}

impl IdMeans {
    pub fn new(s: &SampleMatrix, s_ids: &[u32]) -> Result<Self> {
        if s_ids.len() != s.samples() {
            return Err(Error::dim(format!("{} ids for {} rows", s_ids.len(), s.samples())));
        }
        Ok(Self { means: group_means(s, s_ids) })
    }

    /// Shifts each ID group of `o` so its mean equals the stored mean.
    pub fn apply(&self, mut o: SampleMatrix, o_ids: &[u32]) -> Result<SampleMatrix> {
        if o_ids.len() != o.samples() {
            return Err(Error::dim(format!("{} ids for {} rows", o_ids.len(), o.samples())));
        }
        let current = group_means(&o, o_ids);
        let mut shifts = BTreeMap::new();
        for (id, m) in &current {
            let target = self.means.get(id).ok_or(Error::UnmatchableId(*id))?;
            let shift: Vec<f32> = target.iter().zip(m).map(|(t, c)| (t - c) as f32).collect();
            shifts.insert(*id, shift);
        }
        for (k, id) in o_ids.iter().enumerate() {
            for (v, d) in o.row_mut(k).iter_mut().zip(&shifts[id]) {
                *v += d;
            }
        }
        Ok(o)
    }
}

fn group_means(s: &SampleMatrix, ids: &[u32]) -> BTreeMap<u32, Vec<f64>> {
    let mut acc: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    for (row, &id) in s.rows().zip(ids) {
        let (sum, n) = acc.entry(id).or_insert_with(|| (vec![0.0; s.dims()], 0));
        for (a, &v) in sum.iter_mut().zip(row) {
            *a += f64::from(v);
        }
        *n += 1;
    }
    acc.into_iter().map(|(id, (sum, n))| (id, sum.into_iter().map(|v| v / n as f64).collect())).collect()
}

/// Shifts each ID group of `o` onto the mean of the same group in `s`.
pub fn reweight_output(o: &SampleMatrix, o_ids: &[u32], s: &SampleMatrix, s_ids: &[u32]) -> Result<SampleMatrix> {
    IdMeans::new(s, s_ids)?.apply(o.clone(), o_ids)
}

/// Rebalancing outcome of one `(level, layer)` plan.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceEvent {
    pub level: usize,
    pub layer: usize,
    pub histogram: BTreeMap<u32, usize>,
}

struct GuidedPlanner<'a> {
    style: &'a ImageRgb,
    masks: &'a GuidanceMasks,
    root: SeedStream,
    cache: Option<(usize, ImageRgb)>,
    events: Vec<RebalanceEvent>,
}

impl LevelPlanner for GuidedPlanner<'_> {
    fn plan(&mut self, level: &LevelInfo, layer: usize, codec: &dyn FeatureCodec) -> Result<LayerTarget> {
        if self.cache.as_ref().map(|c| c.0) != Some(level.halvings) {
            self.cache = Some((level.halvings, level_image(self.style, level.halvings)?));
        }
        let style = &self.cache.as_ref().expect("cache filled above").1;
        let s = encode_samples(codec, style, layer)?.samples;
        let factor = codec.layer(layer)?.downsample_factor;
        let o_ids = self.masks.content_mask.cells(level.halvings, factor, &BTreeSet::new());
        let desired = histogram_of(&o_ids);
        let required = desired.keys().copied().collect();
        let s_ids = self.masks.style_mask.cells(level.halvings, factor, &required);
        let seeds = self.root.named("rebalance", level.index as u64).child(layer as u64);
        let (target, t_ids) = rebalance_target(&s, &s_ids, &desired, &seeds)?;
        self.events.push(RebalanceEvent { level: level.index, layer, histogram: histogram_of(&t_ids) });
        let means = IdMeans::new(&target, &t_ids)?;
        let adjust = move |o: SampleMatrix| means.apply(o, &o_ids);
        Ok(LayerTarget { adjust: Some(Box::new(adjust)), ..LayerTarget::plain(target) })
    }
}

#[derive(Debug, Clone)]
pub struct Guided {
    pub synthesis: Synthesis,
    pub rebalances: Vec<RebalanceEvent>,
}

/// Texture synthesis from noise where the output mask decides which style
/// regions appear where.
pub fn guided_synthesize(style: &ImageRgb, masks: &GuidanceMasks, cfg: &SynthesisConfig, codec: &dyn FeatureCodec) -> Result<Guided> {
    cfg.validate()?;
    if cfg.mode != Mode::Texture {
        return Err(Error::InvalidParameter("guided synthesis runs in texture mode".into()));
    }
    if masks.style_mask.dims() != style.dims() {
        return Err(Error::InvalidParameter(format!("style mask {:?} must match style {:?}", masks.style_mask.dims(), style.dims())));
    }
    let out = (cfg.output_width, cfg.output_height);
    if masks.content_mask.dims() != out {
        return Err(Error::InvalidParameter(format!("target mask {:?} must match output {out:?}", masks.content_mask.dims())));
    }
    let mut planner = GuidedPlanner { style, masks, root: SeedStream::new(cfg.seed), cache: None, events: Vec::new() };
    let synthesis = synthesize_with(cfg, codec, &[style.dims()], None, &mut planner)?;
    Ok(Guided { synthesis, rebalances: planner.events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::PyramidCodec;
    use crate::pipeline::synthesize;

    fn labelled(m: usize, split: usize) -> (SampleMatrix, Vec<u32>) {
        let rows: Vec<[f32; 2]> = (0..m).map(|k| [k as f32, (k * k) as f32 * 0.01]).collect();
        let ids = (0..m).map(|k| u32::from(k >= split)).collect();
        (SampleMatrix::from_rows(&rows).unwrap(), ids)
    }

    #[test]
    fn majority_breaks_ties_low() {
        assert_eq!(majority(&[3, 1, 3, 1]), 1);
        assert_eq!(majority(&[2, 5, 5, 0]), 5);
        assert_eq!(majority(&[7]), 7);
    }

    #[test]
    fn rebalance_identity_when_counts_match() {
        let (s, ids) = labelled(40, 30);
        let desired = histogram_of(&ids);
        let (out, out_ids) = rebalance_target(&s, &ids, &desired, &SeedStream::new(1)).unwrap();
        assert_eq!(out, s);
        assert_eq!(out_ids, ids);
    }

    #[test]
    fn rebalance_hits_exact_counts() {
        let (s, ids) = labelled(100, 75);
        let desired = BTreeMap::from([(0, 50), (1, 50)]);
        let (out, out_ids) = rebalance_target(&s, &ids, &desired, &SeedStream::new(2)).unwrap();
        assert_eq!(histogram_of(&out_ids), desired);
        // every output row is a bitwise copy of a row with the same ID
        for (row, id) in out.rows().zip(&out_ids) {
            let k = row[0] as usize;
            assert_eq!(row, s.row(k));
            assert_eq!(ids[k], *id);
        }
        let big = BTreeMap::from([(0, 7), (1, 180)]);
        let (out, out_ids) = rebalance_target(&s, &ids, &big, &SeedStream::new(3)).unwrap();
        assert_eq!(out.samples(), 187);
        assert_eq!(histogram_of(&out_ids), big);
        assert_eq!(rebalance_target(&s, &ids, &big, &SeedStream::new(3)).unwrap().0, out);
    }

    #[test]
    fn rebalance_errors() {
        let (s, ids) = labelled(10, 5);
        let absent = BTreeMap::from([(0, 3), (9, 1)]);
        assert!(matches!(rebalance_target(&s, &ids, &absent, &SeedStream::new(0)), Err(Error::UnmatchableId(9))));
        assert!(rebalance_target(&s, &ids, &BTreeMap::from([(0, 0)]), &SeedStream::new(0)).is_err());
        assert!(rebalance_target(&s, &ids[..3], &BTreeMap::from([(0, 1)]), &SeedStream::new(0)).is_err());
    }

    #[test]
    fn reweight_shifts_by_mean_difference() {
        let o = SampleMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        let s = SampleMatrix::from_rows(&[[2.0, 3.0]]).unwrap();
        let out = reweight_output(&o, &[4, 4], &s, &[4]).unwrap();
        assert_eq!(out, SampleMatrix::from_rows(&[[3.0, 2.0], [1.0, 4.0]]).unwrap());
        assert_eq!(reweight_output(&s, &[4], &s, &[4]).unwrap(), s);
        assert!(matches!(reweight_output(&o, &[4, 5], &s, &[4]), Err(Error::UnmatchableId(5))));
    }

    #[test]
    fn mask_cells_follow_majority_and_keep_required_ids() {
        // 32×16 mask: left half 1, right half 2, one pixel of 9
        let mut ids: Vec<u32> = (0..32 * 16).map(|k| if k % 32 < 16 { 1 } else { 2 }).collect();
        ids[5] = 9;
        let mask = IdMask::new(32, 16, ids).unwrap();
        assert_eq!(mask.cells(0, 16, &BTreeSet::new()), vec![1, 2]);
        assert_eq!(mask.cells(0, 16, &BTreeSet::from([9])), vec![9, 2]);
        // the 16×8 level pads to 16×16
        assert_eq!(mask.cells(1, 4, &BTreeSet::new()), [1, 1, 2, 2].repeat(4));
    }

    #[test]
    fn unmatched_content_id_is_rejected() {
        let style = IdMask::new(2, 1, vec![0, 1]).unwrap();
        let content = IdMask::new(2, 1, vec![1, 3]).unwrap();
        assert!(matches!(GuidanceMasks::new(style, content), Err(Error::UnmatchableId(3))));
    }

    fn two_region_style(w: usize, h: usize, split: usize) -> (ImageRgb, IdMask) {
        let img = ImageRgb::from_fn(w, h, |x, y| {
            let v = ((x * 5 + y * 3) % 9) as f32 / 8.0;
            if x < split {
                [0.8, 0.2 * v, 0.1]
            } else {
                [0.1, 0.3, 0.5 + 0.4 * v]
            }
        });
        let ids = (0..w * h).map(|k| u32::from(k % w >= split)).collect();
        (img, IdMask::new(w, h, ids).unwrap())
    }

    #[test]
    fn identical_masks_reduce_to_plain_synthesis() {
        let (style, mask) = two_region_style(32, 32, 16);
        let cfg = SynthesisConfig { output_width: 32, output_height: 32, global_passes: 2, ..SynthesisConfig::default() };
        let masks = GuidanceMasks::new(mask.clone(), mask).unwrap();
        let guided = guided_synthesize(&style, &masks, &cfg, &PyramidCodec).unwrap();
        assert!(guided.synthesis.image.is_finite());
        assert_eq!(guided.rebalances.len(), 5);
        let plain = synthesize(&style, None, &cfg, &PyramidCodec).unwrap();
        assert_eq!(guided.synthesis.trace.len(), plain.trace.len());
    }

    #[test]
    fn rebalanced_targets_follow_the_output_mask() {
        // style is 75/25, output asks for 50/50
        let (style, style_mask) = two_region_style(64, 32, 48);
        let out_ids = (0..64 * 32).map(|k| u32::from(k % 64 >= 32)).collect();
        let masks = GuidanceMasks::new(style_mask, IdMask::new(64, 32, out_ids).unwrap()).unwrap();
        let cfg = SynthesisConfig { output_width: 64, output_height: 32, global_passes: 1, ..SynthesisConfig::default() };
        let guided = guided_synthesize(&style, &masks, &cfg, &PyramidCodec).unwrap();
        for e in &guided.rebalances {
            assert_eq!(e.histogram[&0], e.histogram[&1], "{e:?}");
        }
        // left half of the output is red-dominant, right half blue-dominant
        let img = &guided.synthesis.image;
        let mean_red = |x0: usize| (x0..x0 + 32).flat_map(|x| (0..32).map(move |y| (x, y))).map(|(x, y)| img.pixel(x, y)[0]).sum::<f32>() / 1024.0;
        assert!(mean_red(0) > mean_red(32) + 0.3, "{} vs {}", mean_red(0), mean_red(32));
        assert!(guided_synthesize(&style, &masks, &SynthesisConfig { output_width: 32, ..cfg }, &PyramidCodec).is_err());
    }
}
