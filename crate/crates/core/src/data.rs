//! Dataset ingestion and synthetic sequence tasks.
//!
//! Images are held channel-planar (`C x H x W`) with intensities in
//! `[0, 1]`; a pixel sequence feeds one pixel position per step with one
//! input per channel.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{self, unit_f64, Stream};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD_BYTES: usize = 3073;
const CIFAR_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Image-major, then channel, row, column.
    pub pixels: Vec<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let k = self.image_len();
        &self.pixels[i * k..(i + 1) * k]
    }

    /// First `n` images (all of them if fewer).
    pub fn truncate(mut self, n: usize) -> Self {
        let n = n.min(self.len());
        self.pixels.truncate(n * self.image_len());
        self.labels.truncate(n);
        self
    }

    /// Concatenates sets of identical shape.
    pub fn concat(sets: Vec<ImageSet>) -> Result<ImageSet> {
        let mut iter = sets.into_iter();
        let mut out = iter
            .next()
            .ok_or_else(|| Error::InvalidArgument("no image sets to concatenate".into()))?;
        for s in iter {
            if (s.height, s.width, s.channels) != (out.height, out.width, out.channels) {
                return Err(Error::InvalidArgument("mixed image shapes".into()));
            }
            out.pixels.extend(s.pixels);
            out.labels.extend(s.labels);
            out.classes = out.classes.max(s.classes);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDataset {
    pub seq_len: usize,
    pub input_dim: usize,
    pub classes: usize,
    /// Sequence-major `T x input_dim` blocks.
    pub data: Vec<f64>,
    pub labels: Vec<usize>,
}

impl SequenceDataset {
    pub fn new(
        seq_len: usize,
        input_dim: usize,
        classes: usize,
        data: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if seq_len == 0 || input_dim == 0 || classes == 0 {
            return Err(Error::InvalidArgument(
                "seq_len, input_dim and classes must be positive".into(),
            ));
        }
        if data.len() != labels.len() * seq_len * input_dim {
            return Err(Error::DimensionMismatch {
                context: "sequence data length",
                expected: labels.len() * seq_len * input_dim,
                got: data.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: classes,
            });
        }
        Ok(Self {
            seq_len,
            input_dim,
            classes,
            data,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sequence(&self, i: usize) -> &[f64] {
        let k = self.seq_len * self.input_dim;
        &self.data[i * k..(i + 1) * k]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.seq_len * self.input_dim);
        for &i in indices {
            data.extend_from_slice(self.sequence(i));
        }
        Self {
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..*self
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Per-input mean and standard deviation over every step of every sequence.
    pub fn channel_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.input_dim;
        let count = (self.data.len() / d).max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in self.data.chunks(d) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; d];
        for row in self.data.chunks(d) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / count).sqrt()).collect();
        (mean, std)
    }

    /// Subtracts `mean` and divides by `std` per input (zero std left unscaled).
    pub fn standardize(&mut self, mean: &[f64], std: &[f64]) {
        let d = self.input_dim;
        for row in self.data.chunks_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(mean).zip(std) {
                *v -= m;
                if *s > 0.0 {
                    *v /= s;
                }
            }
        }
    }
}

fn format_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, offset, "truncated header"))
}

/// Reads an IDX image file (`0x00000803`) and label file (`0x00000801`).
/// Pixel bytes are divided by 255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ImageSet> {
    let img = fs::read(images_path)?;
    let lab = fs::read(labels_path)?;

    let magic = read_be_u32(&img, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(
            images_path,
            0,
            format!("bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = read_be_u32(&img, 4, images_path)? as usize;
    let height = read_be_u32(&img, 8, images_path)? as usize;
    let width = read_be_u32(&img, 12, images_path)? as usize;
    let body = count * height * width;
    if img.len() < 16 + body {
        return Err(format_err(
            images_path,
            img.len(),
            format!("truncated: {count} images need {} bytes", 16 + body),
        ));
    }

    let magic = read_be_u32(&lab, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(
            labels_path,
            0,
            format!("bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let label_count = read_be_u32(&lab, 4, labels_path)? as usize;
    if label_count != count {
        return Err(format_err(
            labels_path,
            4,
            format!("{label_count} labels for {count} images"),
        ));
    }
    if lab.len() < 8 + count {
        return Err(format_err(
            labels_path,
            lab.len(),
            format!("truncated: {count} labels need {} bytes", 8 + count),
        ));
    }

    let labels: Vec<usize> = lab[8..8 + count].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().map(|&y| y + 1).max().unwrap_or(0).max(10);
    Ok(ImageSet {
        height,
        width,
        channels: 1,
        pixels: img[16..16 + body]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect(),
        labels,
        classes,
    })
}

fn load_cifar_file(path: &Path) -> Result<ImageSet> {
    let bytes = fs::read(path)?;
    if bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(format_err(
            path,
            bytes.len() - bytes.len() % CIFAR_RECORD_BYTES,
            format!(
                "length {} is not a multiple of {CIFAR_RECORD_BYTES}",
                bytes.len()
            ),
        ));
    }
    let mut labels = Vec::with_capacity(bytes.len() / CIFAR_RECORD_BYTES);
    let mut pixels = Vec::with_capacity(bytes.len());
    for (k, rec) in bytes.chunks(CIFAR_RECORD_BYTES).enumerate() {
        if rec[0] > 9 {
            return Err(format_err(
                path,
                k * CIFAR_RECORD_BYTES,
                format!("label byte {} > 9", rec[0]),
            ));
        }
        labels.push(rec[0] as usize);
        pixels.extend(rec[1..].iter().map(|&b| b as f64 / 255.0));
    }
    Ok(ImageSet {
        height: CIFAR_SIDE,
        width: CIFAR_SIDE,
        channels: 3,
        pixels,
        labels,
        classes: 10,
    })
}

/// Reads CIFAR-10 binary batches (1 label byte + 3072 planar RGB bytes per
/// record). Files are read in parallel and concatenated in the given order.
pub fn load_cifar10_binary<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<ImageSet> {
    let sets = paths
        .par_iter()
        .map(|p| load_cifar_file(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ImageSet::concat(sets)
}

/// Standard CIFAR-10 binary file names under `dir`: five training batches and the test batch.
pub fn cifar10_files(dir: &Path) -> (Vec<PathBuf>, PathBuf) {
    let train = (1..=5)
        .map(|k| dir.join(format!("data_batch_{k}.bin")))
        .collect();
    (train, dir.join("test_batch.bin"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PixelOrder {
    #[default]
    Raster,
    /// One seed-derived permutation of the step order, shared by every image.
    FixedPermutation { seed: u64 },
}

/// Uniformly random permutation of `0..len`.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut seeds::stream(seed, Stream::Data, u64::MAX));
    perm
}

pub fn to_pixel_sequence(images: &ImageSet, order: PixelOrder) -> Result<SequenceDataset> {
    let t_len = images.height * images.width;
    let perm = match order {
        PixelOrder::Raster => (0..t_len).collect(),
        PixelOrder::FixedPermutation { seed } => permutation(t_len, seed),
    };
    to_pixel_sequence_permuted(images, &perm)
}

/// Step `t` of each sequence is pixel position `perm[t]`.
pub fn to_pixel_sequence_permuted(images: &ImageSet, perm: &[usize]) -> Result<SequenceDataset> {
    let t_len = images.height * images.width;
    let c = images.channels;
    if perm.len() != t_len {
        return Err(Error::DimensionMismatch {
            context: "pixel permutation length",
            expected: t_len,
            got: perm.len(),
        });
    }
    if images.pixels.len() != images.len() * images.image_len() {
        return Err(Error::InvalidArgument("mixed image shapes".into()));
    }
    let mut data = Vec::with_capacity(images.pixels.len());
    for i in 0..images.len() {
        let img = images.image(i);
        for &pos in perm {
            if pos >= t_len {
                return Err(Error::IndexOutOfRange {
                    index: pos,
                    len: t_len,
                });
            }
            for ch in 0..c {
                data.push(img[ch * t_len + pos]);
            }
        }
    }
    SequenceDataset::new(t_len, c, images.classes, data, images.labels.clone())
}

/// Block-mean pooling by `factor` in both spatial dimensions.
pub fn downsample(images: &ImageSet, factor: usize) -> Result<ImageSet> {
    if factor == 0 || !images.height.is_multiple_of(factor) || !images.width.is_multiple_of(factor) {
        return Err(Error::InvalidArgument(format!(
            "{}x{} images are not divisible by factor {factor}",
            images.height, images.width
        )));
    }
    let (h, w) = (images.height / factor, images.width / factor);
    let norm = (factor * factor) as f64;
    let mut pixels = Vec::with_capacity(images.len() * images.channels * h * w);
    for i in 0..images.len() {
        let img = images.image(i);
        for ch in 0..images.channels {
            let plane =
                &img[ch * images.height * images.width..(ch + 1) * images.height * images.width];
            for r in 0..h {
                for c in 0..w {
                    let mut s = 0.0;
                    for dr in 0..factor {
                        for dc in 0..factor {
                            s += plane[(r * factor + dr) * images.width + c * factor + dc];
                        }
                    }
                    pixels.push(s / norm);
                }
            }
        }
    }
    Ok(ImageSet {
        height: h,
        width: w,
        pixels,
        labels: images.labels.clone(),
        ..*images
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Class token at step 0, noise afterwards.
    DelayedClass,
    /// Label is the sparse template best matching the summed input.
    SparsePattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub size: usize,
    pub classes: usize,
    pub seq_len: usize,
    /// Defaults to `classes` when zero.
    pub input_dim: usize,
    /// Standard deviation of the Gaussian noise.
    pub noise: f64,
    /// Height of the class token (delayed class) or template (sparse pattern).
    pub amplitude: f64,
    /// Fraction of nonzero template entries (sparse pattern).
    pub template_density: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            size: 1000,
            classes: 4,
            seq_len: 50,
            input_dim: 0,
            noise: 0.1,
            amplitude: 1.0,
            template_density: 0.25,
        }
    }
}

impl SyntheticParams {
    pub fn resolved_input_dim(&self) -> usize {
        if self.input_dim == 0 {
            self.classes
        } else {
            self.input_dim
        }
    }
}

/// Generates a labelled synthetic sequence set. Labels are balanced (each
/// class appears `size / classes` times, the remainder spread over the first
/// classes) and shuffled; both tasks are noiseless in the label, so the
/// Bayes accuracy is 1.
pub fn synthetic_task(
    kind: SyntheticKind,
    params: &SyntheticParams,
    seed: u64,
) -> Result<SequenceDataset> {
    let p = params;
    let d = p.resolved_input_dim();
    if p.classes < 2 || p.seq_len == 0 || !(p.noise >= 0.0) || !(p.amplitude > 0.0) {
        return Err(Error::InvalidArgument(
            "synthetic task needs classes >= 2, seq_len >= 1, noise >= 0, amplitude > 0".into(),
        ));
    }
    if kind == SyntheticKind::DelayedClass && d < p.classes {
        return Err(Error::InvalidArgument(
            "delayed_class needs input_dim >= classes".into(),
        ));
    }
    let mut rng = seeds::stream(seed, Stream::Data, 0);
    let mut labels: Vec<usize> = (0..p.size).map(|i| i % p.classes).collect();
    labels.shuffle(&mut rng);

    let mut data = Vec::with_capacity(p.size * p.seq_len * d);
    match kind {
        SyntheticKind::DelayedClass => {
            for &y in &labels {
                for k in 0..d {
                    data.push(if k == y { p.amplitude } else { 0.0 });
                }
                for _ in d..p.seq_len * d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(p.noise * z);
                }
            }
        }
        SyntheticKind::SparsePattern => {
            let templates = sparse_templates(p.classes, d, p.template_density, &mut rng)?;
            let hits = (p.seq_len / 10).max(1);
            let mut seq = vec![0.0; p.seq_len * d];
            for &y in &labels {
                let mut accepted = false;
                for _ in 0..10_000 {
                    for v in seq.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = p.noise * z;
                    }
                    for _ in 0..hits {
                        let t = (unit_f64(&mut rng) * p.seq_len as f64) as usize;
                        for (v, w) in seq[t * d..(t + 1) * d].iter_mut().zip(&templates[y]) {
                            *v += p.amplitude * w;
                        }
                    }
                    if best_template(&seq, d, &templates) == y {
                        accepted = true;
                        break;
                    }
                }
                if !accepted {
                    return Err(Error::InvalidArgument(
                        "sparse_pattern noise too high to realise the label".into(),
                    ));
                }
                data.extend_from_slice(&seq);
            }
        }
    }
    SequenceDataset::new(p.seq_len, d, p.classes, data, labels)
}

/// `classes` distinct unit-norm sparse sign templates. Distinct unit vectors
/// have strictly smaller inner products with each other than with themselves,
/// so a clean template is always recovered by the argmax rule.
fn sparse_templates(
    classes: usize,
    d: usize,
    density: f64,
    rng: &mut seeds::Rng,
) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(classes);
    let mut tries = 0;
    while out.len() < classes {
        tries += 1;
        if tries > 10_000 {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {classes} distinct templates of dimension {d}"
            )));
        }
        let mut t: Vec<f64> = (0..d)
            .map(|_| {
                if unit_f64(rng) < density {
                    if unit_f64(rng) < 0.5 {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            })
            .collect();
        if t.iter().all(|&v| v == 0.0) {
            let k = (unit_f64(rng) * d as f64) as usize;
            t[k] = 1.0;
        }
        let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        t.iter_mut().for_each(|v| *v /= norm);
        if !out.contains(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Index of the template with the largest inner product with the summed input (lowest on ties).
fn best_template(seq: &[f64], d: usize, templates: &[Vec<f64>]) -> usize {
    let mut sum = vec![0.0; d];
    for row in seq.chunks(d) {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (c, t) in templates.iter().enumerate() {
        let score: f64 = t.iter().zip(&sum).map(|(a, b)| a * b).sum();
        if score > best.1 {
            best = (c, score);
        }
    }
    best.0
}

/// Writes an IDX image/label pair (`pixels` is `count * height * width` bytes).
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    height: usize,
    width: usize,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    if pixels.len() != labels.len() * height * width {
        return Err(Error::DimensionMismatch {
            context: "IDX pixel bytes",
            expected: labels.len() * height * width,
            got: pixels.len(),
        });
    }
    let mut img = fs::File::create(images_path)?;
    img.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    for v in [labels.len(), height, width] {
        img.write_all(&(v as u32).to_be_bytes())?;
    }
    img.write_all(pixels)?;
    let mut lab = fs::File::create(labels_path)?;
    lab.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    lab.write_all(&(labels.len() as u32).to_be_bytes())?;
    lab.write_all(labels)?;
    Ok(())
}

/// Writes CIFAR-10 binary records (`pixels` is `3072` planar bytes per label).
pub fn write_cifar10_binary(path: &Path, labels: &[u8], pixels: &[u8]) -> Result<()> {
    if pixels.len() != labels.len() * (CIFAR_RECORD_BYTES - 1) {
        return Err(Error::DimensionMismatch {
            context: "CIFAR pixel bytes",
            expected: labels.len() * (CIFAR_RECORD_BYTES - 1),
            got: pixels.len(),
        });
    }
    let mut out = Vec::with_capacity(labels.len() * CIFAR_RECORD_BYTES);
    for (y, px) in labels.iter().zip(pixels.chunks(CIFAR_RECORD_BYTES - 1)) {
        out.push(*y);
        out.extend_from_slice(px);
    }
    fs::write(path, out)?;
    Ok(())
}
