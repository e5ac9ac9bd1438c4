//! Synthetic labelled embeddings for smoke tests and examples.
//!
//! Every coordinate of a clip's embedding is `sign * separation + noise`,
//! with `noise ~ N(0, noise_sd²)`. Humor clips use `sign = +1` for audio and
//! `-1` for video; non-humor clips the opposite. The two classes are thus two
//! Gaussians whose means differ along the all-ones direction, which a linear
//! rule on the coordinate sum separates with margin growing like `sqrt(dim)`.

use crate::embedding::{Clip, Dataset, EmbeddingRecord, ExtractorPair, Label, Modality, EMBEDDING_DIM};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_clips: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub pair: ExtractorPair,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_clips: 200,
            dim: EMBEDDING_DIM,
            separation: 0.25,
            noise_sd: 1.0,
            seed: 0,
            pair: ExtractorPair::VideomaeAst,
        }
    }
}

/// Balanced dataset; clip `i` is humor when `i` is odd.
pub fn gaussian_dataset(spec: &SyntheticSpec) -> Dataset {
    let clips = (0..spec.n_clips)
        .map(|i| {
            let label = if i % 2 == 1 { Label::Humor } else { Label::NonHumor };
            let sign = if label == Label::Humor { 1.0 } else { -1.0 };
            let clip_id = format!("clip-{i:04}");
            let mut rng = stream(spec.seed, &[tag("synthetic"), i as u64]);
            let mut draw = |mean: f64| -> Vec<f32> {
                (0..spec.dim)
                    .map(|_| (mean + spec.noise_sd * rng.normal()) as f32)
                    .collect()
            };
            let audio = draw(sign * spec.separation);
            let video = draw(-sign * spec.separation);
            Clip {
                audio: EmbeddingRecord::new(clip_id.clone(), spec.pair.extractor(Modality::Audio), audio),
                video: EmbeddingRecord::new(clip_id.clone(), spec.pair.extractor(Modality::Video), video),
                clip_id,
                label,
            }
        })
        .collect();
    Dataset::new(format!("synthetic-{}", spec.seed), clips).expect("balanced synthetic dataset is valid")
}
