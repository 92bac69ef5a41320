//! Lighting and time-of-day changes for inverted images through a learned
//! approximation of how the mapping network responds to the dynamic latent.

mod shifter;
mod vocab;

pub use shifter::{
    abs_loss, mix_dynamic, rel_loss, shift_samples, train_style_shifter, EndpointReport, ShifterReport, StyleShiftSamples,
    StyleShifter, StyleShifterConfig,
};
pub use vocab::{StyleVocabulary, VocabularyEntry};

use crate::animation::{render_video, AnimationScript, StyleSource};
use crate::error::Result;
use crate::imaging::Image;
use crate::inversion::InversionResult;
use crate::model::{GeneratorView, ModelBundle, StyleSet};

/// Styles ramped from `base` toward `target`, with the animation
/// coefficient used as the shift amount.
pub struct ShiftedStyles<'a> {
    pub shifter: &'a StyleShifter,
    pub base: StyleSet,
    pub target: Vec<f32>,
}

impl StyleSource for ShiftedStyles<'_> {
    fn styles_for(&self, _view: &GeneratorView<'_>, _z_dynamic: &[f32], t: f64) -> Result<StyleSet> {
        self.shifter.shift_styles(&self.base, &self.target, t)
    }
}

/// Animates an inverted image while moving its lighting toward the named
/// vocabulary style; frame `i` uses `c = i / (steps - 1)`.
pub fn relight_video(
    bundle: &ModelBundle,
    shifter: &StyleShifter,
    inversion: &InversionResult,
    vocabulary: &StyleVocabulary,
    style: &str,
    script: &AnimationScript,
) -> Result<Vec<Image>> {
    let target = vocabulary.get(style)?.to_vec();
    let source = ShiftedStyles {
        shifter,
        base: inversion.styles.clone(),
        target,
    };
    let view = match &inversion.finetuned {
        Some(w) => bundle.with_synthesis(w),
        None => bundle.ema(),
    };
    render_video(&view, &source, &inversion.noise, script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::animation::{Homography, Interpolation, OutOfField};
    use crate::inversion::Variant;
    use crate::model::{GeneratorConfig, SpatialNoiseSet};

    fn fixture() -> (ModelBundle, StyleShifter, InversionResult) {
        let cfg = GeneratorConfig {
            channel_widths: vec![8, 8],
            mapping_depth: 2,
            ..GeneratorConfig::with_width_factor(2, 1.0)
        };
        let bundle = ModelBundle::new(&cfg, 5).unwrap();
        let sc = StyleShifterConfig {
            hidden: vec![16],
            ..StyleShifterConfig::toy()
        };
        let shifter = StyleShifter::new(&sc, 512, 3).unwrap();
        let styles = StyleSet::uniform(&vec![0.2; 512], 2);
        let noise = SpatialNoiseSet::zeros(&cfg);
        let reconstruction = bundle.ema().synthesize(&styles, &noise).unwrap();
        let inv = InversionResult {
            variant: Variant::EO,
            styles,
            noise,
            finetuned: None,
            reconstruction,
            trace: Vec::new(),
            finetune_trace: Vec::new(),
            ssim: 1.0,
            perceptual: 0.0,
        };
        (bundle, shifter, inv)
    }

    fn script(steps: usize) -> AnimationScript {
        AnimationScript {
            homography: Homography::identity(0.5),
            steps,
            fps: 10.0,
            z_dynamic_start: vec![0.0; 3],
            z_dynamic_end: vec![0.0; 3],
            speed_scale: 1.0,
            interpolation: Interpolation::Linear,
            out_of_field: OutOfField::default(),
        }
    }

    #[test]
    fn ramp_endpoints() {
        let (bundle, shifter, inv) = fixture();
        let vocab = StyleVocabulary::default();
        let frames = relight_video(&bundle, &shifter, &inv, &vocab, "night", &script(3)).unwrap();
        assert_eq!(frames.len(), 3);
        let first = shifter.shift_styles(&inv.styles, vocab.get("night").unwrap(), 0.0).unwrap();
        assert_eq!(frames[0], bundle.ema().synthesize(&first, &inv.noise).unwrap());
        let last = shifter.shift_styles(&inv.styles, vocab.get("night").unwrap(), 1.0).unwrap();
        assert_eq!(frames[2], bundle.ema().synthesize(&last, &inv.noise).unwrap());
        let single = relight_video(&bundle, &shifter, &inv, &vocab, "night", &script(1)).unwrap();
        assert_eq!(single[0], frames[0]);
    }

    #[test]
    fn unknown_style_is_rejected() {
        let (bundle, shifter, inv) = fixture();
        assert!(relight_video(&bundle, &shifter, &inv, &StyleVocabulary::default(), "noir", &script(2)).is_err());
    }
}
