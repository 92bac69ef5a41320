//! Frechet distance, SSIM, perceptual distance, static-consistency curves,
//! motion amount and the evaluation protocols built from them.

mod features;
mod fid;
mod motion;
mod report;
mod ssim;

pub use features::{
    masked_perceptual_distance, perceptual_distance, perceptual_tensor, ConvPyramid, ExtractorSpec, FeatureExtractor,
    DEFAULT_PYRAMID,
};
pub use fid::{fid_from_features, frechet_distance, FeatureStats};
pub use motion::{motion_amount, BlockMatching, FlowProvider};
pub use report::{
    evaluate_animation, evaluate_generation_ablation, frechet_video_distance, generate_samples, save_reports,
    static_consistency_curve, CurveMetric, EvalReport, FrameCurves, GenerationProtocol, VideoEmbedder, REPORT_VERSION,
};
pub use ssim::{masked_ssim, ssim, ssim_masked};
