//! Image containers and the patch-level operations the detectors share:
//! Netpbm codecs, bilinear resampling, eye-patch alignment, HOG descriptors
//! and label-preserving augmentation.

mod align;
mod augment;
mod hog;
mod netpbm;
mod patch;

pub use align::{align_eyes, Point2};
pub use augment::{augment, sample_augment_spec, AugmentRanges, AugmentSpec};
pub use hog::{extract_hog, HOG_CELL, HOG_DIM_PER_EYE, HOG_ORIENTATIONS};
pub use netpbm::{decode_netpbm, encode_netpbm, load_patch, save_patch};
pub use patch::{psnr, EyePatch, FacePatch, EYE_PATCH_HEIGHT, EYE_PATCH_WIDTH};
