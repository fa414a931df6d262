//! U-Net construction, forward/backward passes and weight transfer.

mod config;
mod decoder;
mod densenet;
mod resnet;
mod state;
mod unet;

pub use config::{EncoderFamily, EncoderSpec, InitMode, ModelConfig, DEFAULT_DECODER_CHANNELS, MAX_STAGES};
pub use state::{load_pretrained, LoadReport, NamedTensor};
pub use unet::{build_model, count_parameters, Encoder, FeaturePyramid, ForwardOutput, ParamScope, Prediction, UNet, ENCODER_PREFIX};
