use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{masked_perceptual_distance, perceptual_distance, FeatureExtractor};
use super::fid::{fid_from_features, frechet_distance, FeatureStats};
use super::motion::{motion_amount, FlowProvider};
use super::ssim::{masked_ssim, ssim};
use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::model::{broadcast_styles, GeneratorView, LatentCode, MixingRule, ModelBundle, SpatialNoiseSet};
use crate::training::{render_fake_pair, FakePairLatents};

pub const REPORT_VERSION: u32 = 1;

/// Which similarity a static-consistency curve uses.
#[derive(Clone, Copy)]
pub enum CurveMetric<'a> {
    Ssim,
    Perceptual(&'a dyn FeatureExtractor),
}

/// `curve[n]` compares frame 0 with frame `n` on the static part of `mask`.
pub fn static_consistency_curve(frames: &[Image], static_mask: &Mask, metric: CurveMetric<'_>) -> Result<Vec<f64>> {
    if frames.len() < 2 {
        return Err(Error::Argument("a consistency curve needs at least two frames".into()));
    }
    let first = &frames[0];
    if static_mask.width != first.width || static_mask.height != first.height {
        return Err(Error::Shape("static mask differs from frame size".into()));
    }
    frames
        .iter()
        .map(|f| match metric {
            CurveMetric::Ssim => masked_ssim(first, f, static_mask, true),
            CurveMetric::Perceptual(e) => masked_perceptual_distance(e, first, f, static_mask, true),
        })
        .collect()
}

/// Per-frame-index curves of an animation evaluation, indexed from n = 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameCurves {
    /// Static-region SSIM between the real first frame and generated frame n.
    pub ssim_first: Vec<f64>,
    pub perceptual_first: Vec<f64>,
    /// Whole-frame SSIM between real frame n and generated frame n.
    pub ssim_same: Vec<f64>,
    pub perceptual_same: Vec<f64>,
    /// FID between all real first frames and all generated frames n.
    pub fid_first: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub name: String,
    pub extractor: String,
    pub fid: Option<f64>,
    pub ssim: Option<f64>,
    pub masked_ssim: Option<f64>,
    pub perceptual: Option<f64>,
    pub curves: Option<FrameCurves>,
    pub motion: Option<f64>,
    pub samples: usize,
    pub pairs: usize,
}

impl EvalReport {
    pub fn new(name: impl Into<String>, extractor: &dyn FeatureExtractor) -> Self {
        Self {
            version: REPORT_VERSION,
            name: name.into(),
            extractor: extractor.name().to_string(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut values: Vec<f64> = [self.fid, self.ssim, self.masked_ssim, self.perceptual, self.motion]
            .into_iter()
            .flatten()
            .collect();
        if let Some(c) = &self.curves {
            for v in [&c.ssim_first, &c.perceptual_first, &c.ssim_same, &c.perceptual_same] {
                values.extend(v);
            }
            values.extend(c.fid_first.iter().flatten());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("report `{}` holds a non-finite value", self.name)));
        }
        Ok(())
    }

    /// Curves as CSV, one row per frame index.
    pub fn curves_csv(&self) -> String {
        let mut s = String::from("n,ssim_first,perceptual_first,ssim_same,perceptual_same,fid_first\n");
        if let Some(c) = &self.curves {
            let opt = |v: Option<&f64>| v.map_or(String::new(), |x| x.to_string());
            for n in 0..c.ssim_first.len() {
                let _ = writeln!(
                    s,
                    "{n},{},{},{},{},{}",
                    opt(c.ssim_first.get(n)),
                    opt(c.perceptual_first.get(n)),
                    opt(c.ssim_same.get(n)),
                    opt(c.perceptual_same.get(n)),
                    opt(c.fid_first.get(n).and_then(|v| v.as_ref()))
                );
            }
        }
        s
    }
}

/// Writes a list of reports as one JSON document.
pub fn save_reports(reports: &[EvalReport], path: impl AsRef<Path>) -> Result<()> {
    for r in reports {
        r.validate()?;
    }
    let doc = serde_json::json!({ "version": REPORT_VERSION, "reports": reports });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// `count` images from the generator with single styles, deterministic in `seed`.
pub fn generate_samples(view: &GeneratorView<'_>, count: usize, seed: u64) -> Result<Vec<Image>> {
    let cfg = view.config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let b = (count - out.len()).min(16);
        let codes: Vec<LatentCode> = (0..b).map(|_| LatentCode::sample(&mut rng, cfg)).collect();
        let noise: Vec<SpatialNoiseSet> = (0..b).map(|_| SpatialNoiseSet::sample(&mut rng, cfg)).collect();
        let ws = view.map_batch(&codes)?;
        let styles = ws
            .iter()
            .map(|w| broadcast_styles(std::slice::from_ref(w), &MixingRule::Single, cfg.num_blocks))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&SpatialNoiseSet> = noise.iter().collect();
        let t = view.synthesize_batch(&styles, &refs)?;
        out.extend(Image::batch_from_tensor(&t).into_iter().map(|i| i.clamped()));
    }
    Ok(out)
}

/// Settings of the generation evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationProtocol {
    /// Same-static, different-dynamic pairs compared on the static region.
    pub pairs: usize,
    pub fid_samples: usize,
    pub seed: u64,
    /// Static region at model resolution; sky and water are masked out.
    pub static_mask: Mask,
}

impl GenerationProtocol {
    pub fn paper(resolution: usize) -> Self {
        Self {
            pairs: 1200,
            fid_samples: 1200,
            seed: 0,
            static_mask: Mask::horizon_split(resolution, resolution, 0.5),
        }
    }
}

/// FID of each bundle's samples against `corpus`, and static-region SSIM and
/// perceptual distance over pairs sharing static inputs.
pub fn evaluate_generation_ablation(
    bundles: &[(String, &ModelBundle)],
    corpus: &[Image],
    protocol: &GenerationProtocol,
    extractor: &dyn FeatureExtractor,
) -> Result<Vec<EvalReport>> {
    if bundles.is_empty() {
        return Err(Error::Argument("no bundle to evaluate".into()));
    }
    if corpus.len() < 2 {
        return Err(Error::Data("generation evaluation needs a corpus of at least two images".into()));
    }
    let real = extractor.embed(corpus)?;
    bundles
        .iter()
        .map(|(name, bundle)| {
            let view = bundle.ema();
            let mut report = EvalReport::new(name.clone(), extractor);
            if protocol.fid_samples >= 2 {
                let fake = generate_samples(&view, protocol.fid_samples, protocol.seed)?;
                report.fid = Some(fid_from_features(&real, &extractor.embed(&fake)?)?);
                report.samples = fake.len();
            }
            if protocol.pairs > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed ^ 0x5EED);
                let (mut s_sum, mut p_sum) = (0.0, 0.0);
                for _ in 0..protocol.pairs {
                    let lat = FakePairLatents::sample(&mut rng, view.config());
                    let (a, b) = render_fake_pair(&view, &lat)?;
                    s_sum += masked_ssim(&a, &b, &protocol.static_mask, true)?;
                    p_sum += masked_perceptual_distance(extractor, &a, &b, &protocol.static_mask, true)?;
                }
                report.masked_ssim = Some(s_sum / protocol.pairs as f64);
                report.perceptual = Some(p_sum / protocol.pairs as f64);
                report.pairs = protocol.pairs;
            }
            report.validate()?;
            Ok(report)
        })
        .collect()
}

/// Compares generated videos with the real videos they were started from.
/// `static_masks[v]` is predicted on the first real frame of video `v`.
pub fn evaluate_animation(
    name: &str,
    real: &[Vec<Image>],
    generated: &[Vec<Image>],
    static_masks: &[Mask],
    extractor: &dyn FeatureExtractor,
    flow: Option<&dyn FlowProvider>,
) -> Result<EvalReport> {
    if real.is_empty() || real.len() != generated.len() || real.len() != static_masks.len() {
        return Err(Error::Argument("real videos, generated videos and masks must pair up".into()));
    }
    let len = real.iter().chain(generated).map(|v| v.len()).min().unwrap_or(0);
    if len < 2 {
        return Err(Error::Argument("videos need at least two frames".into()));
    }
    let nv = real.len() as f64;
    let mut curves = FrameCurves::default();
    let firsts: Vec<Image> = real.iter().map(|v| v[0].clone()).collect();
    let first_feats = extractor.embed(&firsts)?;
    for n in 0..len {
        let (mut sf, mut pf, mut ss, mut ps) = (0.0, 0.0, 0.0, 0.0);
        for v in 0..real.len() {
            let (i0, gn, rn) = (&real[v][0], &generated[v][n], &real[v][n]);
            sf += masked_ssim(i0, gn, &static_masks[v], true)?;
            pf += masked_perceptual_distance(extractor, i0, gn, &static_masks[v], true)?;
            ss += ssim(rn, gn)?;
            ps += perceptual_distance(extractor, rn, gn)?;
        }
        curves.ssim_first.push(sf / nv);
        curves.perceptual_first.push(pf / nv);
        curves.ssim_same.push(ss / nv);
        curves.perceptual_same.push(ps / nv);
        let fid = if real.len() >= 2 {
            let gen_n: Vec<Image> = generated.iter().map(|v| v[n].clone()).collect();
            Some(fid_from_features(&first_feats, &extractor.embed(&gen_n)?)?)
        } else {
            None
        };
        curves.fid_first.push(fid);
    }
    let mut report = EvalReport::new(name, extractor);
    if let Some(p) = flow {
        let mut m = 0.0;
        for (v, mask) in generated.iter().zip(static_masks) {
            m += motion_amount(v, mask, Some(p))?;
        }
        report.motion = Some(m / nv);
    }
    report.ssim = curves.ssim_same.last().copied();
    report.masked_ssim = curves.ssim_first.last().copied();
    report.perceptual = curves.perceptual_same.last().copied();
    report.fid = curves.fid_first.last().copied().flatten();
    report.curves = Some(curves);
    report.samples = real.len();
    report.validate()?;
    Ok(report)
}

/// Embeds a whole clip; required for video-level Frechet distances.
pub trait VideoEmbedder {
    fn embed_video(&self, frames: &[Image]) -> Result<Vec<f64>>;
}

/// Frechet distance between clip embeddings. No embedder ships with the
/// crate; callers plug in a pretrained video network.
pub fn frechet_video_distance(
    real: &[Vec<Image>],
    generated: &[Vec<Image>],
    embedder: Option<&dyn VideoEmbedder>,
) -> Result<f64> {
    let e = embedder.ok_or_else(|| Error::Config("video distance needs a video embedding provider".into()))?;
    let embed = |vs: &[Vec<Image>]| -> Result<FeatureStats> {
        let rows = vs.iter().map(|v| e.embed_video(v)).collect::<Result<Vec<_>>>()?;
        FeatureStats::from_rows(&rows)
    };
    frechet_distance(&embed(real)?, &embed(generated)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ExtractorSpec;

    #[test]
    fn constant_video_curve_is_one() {
        let f = Image::from_fn(16, 16, |x, y| [(x as f32 / 16.0), (y as f32 / 16.0), 0.0]);
        let mask = Mask::horizon_split(16, 16, 0.5);
        let c = static_consistency_curve(&[f.clone(), f.clone(), f], &mask, CurveMetric::Ssim).unwrap();
        assert_eq!(c, vec![1.0; 3]);
    }

    #[test]
    fn drift_in_static_region_decreases_ssim() {
        let mask = Mask::filled(24, 24, 1);
        let frames: Vec<Image> = (0..5)
            .map(|k| {
                Image::from_fn(24, 24, |x, y| {
                    let base = (x as f32 * 0.3).sin() * 0.5;
                    let drift = if (x * 5 + y * 3) % 7 < 3 { 0.1 } else { -0.1 };
                    [base + k as f32 * drift; 3]
                })
            })
            .collect();
        let c = static_consistency_curve(&frames, &mask, CurveMetric::Ssim).unwrap();
        assert!(c.windows(2).all(|w| w[1] < w[0]), "{c:?}");
    }

    #[test]
    fn mismatched_mask_is_rejected() {
        let f = Image::new(16, 16);
        let m = Mask::filled(8, 8, 1);
        assert!(static_consistency_curve(&[f.clone(), f], &m, CurveMetric::Ssim).is_err());
    }

    #[test]
    fn video_distance_requires_a_provider() {
        assert!(matches!(frechet_video_distance(&[], &[], None), Err(Error::Config(_))));
    }

    #[test]
    fn csv_has_one_row_per_frame() {
        let e = ExtractorSpec::default().build().unwrap();
        let mut r = EvalReport::new("x", e.as_ref());
        r.curves = Some(FrameCurves {
            ssim_first: vec![1.0, 0.9],
            perceptual_first: vec![0.0, 0.1],
            ssim_same: vec![1.0, 0.8],
            perceptual_same: vec![0.0, 0.2],
            fid_first: vec![None, Some(3.0)],
        });
        let csv = r.curves_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().last().unwrap().ends_with(",3"));
    }
}
