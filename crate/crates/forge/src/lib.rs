//! Turns language-annotated episodes into open-ended instruction datasets.
//!
//! The pipeline is: oracle demos ([`demos`]) → object crops ([`detect`]) →
//! per-episode transforms ([`transform`]) → subset mixing ([`mix`]) →
//! on-disk dataset with a shuffle manifest ([`dataset`]).

pub mod dataset;
pub mod demos;
pub mod detect;
pub mod error;
pub mod font;
pub mod mix;
pub mod transform;

pub use dataset::{build_dataset, training_manifest, BuildConfig, DatasetManifest, StatsMode, TrainingManifest};
pub use demos::{generate_demo, write_demos, DemoConfig};
pub use detect::{build_crop_db, ingest_external, synthesize_pool, CropDb, CropProvenance, DetectionSource};
pub use error::{ForgeError, Result};
pub use font::{render_text_image, TextStyle};
pub use mix::{mix_dataset, MixPlan};
pub use transform::{
    extract_vgr_segments, make_lang, make_oif, make_vdl, make_vos, vdl_indices, vos_instruction, TargetEncoder,
};
