//! No-reference depth quality index (DQI) for stereoscopic omnidirectional
//! and planar images.
//!
//! The depth score is built from the interocular discrepancy `|L − R|`:
//! the difference raster is converted to CIELAB, sampled through
//! equatorial gnomonic viewports (or a center crop for planar pairs),
//! decomposed with one level of the Haar wavelet, summarized by per-subband
//! standard deviation and entropy, and regressed with an epsilon-SVR.
//! Adding local PSNR or MS-SSIM of both eyes gives an overall-QoE feature
//! vector.

pub mod correlation;
pub mod dataset;
pub mod error;
pub mod features;
pub mod geometry;
pub mod logistic;
pub mod metrics;
pub mod protocol;
pub mod raster;
pub mod svr;
pub mod synth;
pub mod wavelet;

pub use correlation::{krocc, plcc, srocc};
pub use dataset::{Dataset, DatasetEntry, GeometryChoice};
pub use error::{Error, Result};
pub use features::{
    aggregate_over_viewports, depth_features, subband_entropy, subband_std, viewport_statistics,
    DepthFeatureVector, ExtractionConfig, ExtractionMode, DEPTH_FEATURE_DIM,
};
pub use geometry::{center_crop, equatorial_centers, extract_viewport, nonuniform_six_centers, SamplingScheme, ViewportSpec};
pub use logistic::{logistic_apply, logistic_fit, LogisticFit};
pub use metrics::{
    local_image_features, ms_ssim, overall_features, psnr, IqaMetric, OverallFeatureVector, OVERALL_FEATURE_DIM,
};
pub use protocol::{run_protocol, run_protocol_on_features, EvalReport, FeatureOptions, ProtocolOptions, SplitMode, Task};
pub use raster::{abs_diff, load_stereo, rgb_to_lab, Geometry, Raster, StereoImage};
pub use svr::{load_model, save_model, svr_predict, svr_train, SvrModel, SvrParams};
pub use synth::{build_dataset, distort, generate_texture, render_stereopair, Distortion, DistortionKind, SynthConfig};
pub use wavelet::{haar_decompose, haar_reconstruct, SubbandQuad};
