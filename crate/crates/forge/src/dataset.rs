//! Full dataset build: mix, transform, shuffle, and write to disk.
//!
//! Layout of the output directory:
//!
//! ```text
//! manifest.json      DatasetManifest
//! norm_stats.json    NormStats used for the targets
//! lang.jsonl ...     one TrainingSample per line, one file per form
//! media/<id>.png     every referenced image, content-hash named
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use oevla_core::archive::{list_episodes, read_episode, read_json, read_meta, write_json};
use oevla_core::sample::{read_jsonl, write_jsonl};
use oevla_core::{ActionCodec, CodecConfig, Form, MediaStore, NormStats, TrainingSample};
use oevla_sim::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::CropDb;
use crate::error::{ForgeError, Result};
use crate::font::TextStyle;
use crate::mix::{mix_dataset, MixPlan, DEFAULT_FRACTION};
use crate::transform::{
    extract_vgr_segments, make_lang, make_oif, make_vdl, make_vos, TargetEncoder, VGR_SEGMENT_LEN, VGR_STRIDE,
};

pub const DATASET_FORMAT: &str = "oevla-dataset/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const NORM_STATS_FILE: &str = "norm_stats.json";
pub const MEDIA_DIR: &str = "media";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsMode {
    /// Actions are already normalized (the oracle demos are).
    Identity,
    /// 1st/99th percentiles over every archived action.
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub fraction: f64,
    pub seed: u64,
    pub vgr_len: usize,
    pub vgr_stride: usize,
    pub stats: StatsMode,
    pub codec: CodecConfig,
}

impl BuildConfig {
    pub fn new(seed: u64) -> Self {
        BuildConfig {
            fraction: DEFAULT_FRACTION,
            seed,
            vgr_len: VGR_SEGMENT_LEN,
            vgr_stride: VGR_STRIDE,
            stats: StatsMode::Identity,
            codec: CodecConfig::default(),
        }
    }
}

pub fn subset_file(form: Form) -> String {
    format!("{}.jsonl", form.as_str().to_ascii_lowercase())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub form: Form,
    pub file: String,
    pub episodes: usize,
    pub samples: usize,
    /// Drawn episodes that produced no samples (too short, no slots).
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub config: BuildConfig,
    pub codec_hash: String,
    pub norm_stats: NormStats,
    pub plan: MixPlan,
    pub subsets: Vec<SubsetSummary>,
    /// Training order over every sample id.
    pub shuffle: Vec<String>,
}

impl DatasetManifest {
    pub fn total_samples(&self) -> usize {
        self.subsets.iter().map(|s| s.samples).sum()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(read_json(&dir.join(MANIFEST_FILE))?)
    }
}

pub fn read_subset(dir: &Path, form: Form) -> Result<Vec<TrainingSample>> {
    Ok(read_jsonl(&dir.join(subset_file(form)))?)
}

type FormSamples = Vec<(Form, Vec<TrainingSample>)>;

/// Samples of every form this episode was drawn into.
fn transform_episode(
    dir: &Path,
    forms: &[Form],
    crops: &CropDb,
    enc: &TargetEncoder,
    cfg: &BuildConfig,
) -> Result<(FormSamples, MediaStore)> {
    let ep = read_episode(dir)?;
    let mut media = MediaStore::new();
    let mut out = Vec::new();
    for &form in forms {
        let stream = |tag: &str| derive_seed(cfg.seed, &format!("{tag}/{}", ep.id), 0);
        let samples = match form {
            Form::Lang => make_lang(&ep, enc, &mut media)?,
            Form::Vos => {
                if ep.annotation.object_slots.is_empty() {
                    Vec::new()
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(stream("vos"));
                    make_vos(&ep, crops, enc, &mut media, &mut rng)?
                }
            }
            Form::Oif => {
                let mut rng = ChaCha8Rng::seed_from_u64(stream("oif-style"));
                let style = TextStyle::sample_varied(&mut rng);
                make_oif(&ep, &style, stream("oif-render"), enc, &mut media)?
            }
            Form::Vdl => make_vdl(&ep, enc, &mut media)?,
            Form::Vgr => extract_vgr_segments(&ep, cfg.vgr_len, cfg.vgr_stride, enc, &mut media)?,
        };
        out.push((form, samples));
    }
    Ok((out, media))
}

fn norm_stats(archive: &Path, mode: StatsMode) -> Result<NormStats> {
    match mode {
        StatsMode::Identity => Ok(NormStats::identity()),
        StatsMode::Fit => {
            let mut actions = Vec::new();
            for dir in list_episodes(archive)? {
                actions.extend(read_meta(&dir)?.actions);
            }
            Ok(NormStats::fit(&actions)?)
        }
    }
}

/// Builds the five subsets from the episode archive at `archive`.
pub fn build_dataset(
    archive: &Path,
    crops: &CropDb,
    out: &Path,
    cfg: &BuildConfig,
    workers: usize,
) -> Result<DatasetManifest> {
    let dirs = list_episodes(archive)?;
    let mut ids = Vec::with_capacity(dirs.len());
    for d in &dirs {
        ids.push(read_meta(d)?.id);
    }
    let plan = mix_dataset(&ids, cfg.fraction, cfg.seed)?;
    let stats = norm_stats(archive, cfg.stats)?;
    let enc = TargetEncoder {
        codec: ActionCodec::new(cfg.codec)?,
        stats: stats.clone(),
    };

    // Load each drawn episode once, producing all of its forms.
    let mut wanted: BTreeMap<usize, Vec<Form>> = BTreeMap::new();
    let index_of: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    for draw in &plan.subsets {
        for id in &draw.episodes {
            wanted.entry(index_of[id.as_str()]).or_default().push(draw.form);
        }
    }
    let work: Vec<(usize, Vec<Form>)> = wanted.into_iter().collect();
    let media_dir = out.join(MEDIA_DIR);
    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<(Form, usize), Vec<TrainingSample>>> = Mutex::new(BTreeMap::new());
    let failure: Mutex<Option<(usize, ForgeError)>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= work.len() || failure.lock().expect("lock").is_some() {
                    break;
                }
                let (ep_index, forms) = &work[k];
                let r = transform_episode(&dirs[*ep_index], forms, crops, &enc, cfg).and_then(|(samples, media)| {
                    media.write_dir(&media_dir)?;
                    Ok(samples)
                });
                match r {
                    Ok(samples) => {
                        let mut map = results.lock().expect("lock");
                        for (form, s) in samples {
                            map.insert((form, *ep_index), s);
                        }
                    }
                    Err(e) => {
                        let mut f = failure.lock().expect("lock");
                        if f.as_ref().is_none_or(|(j, _)| k < *j) {
                            *f = Some((k, e));
                        }
                    }
                }
            });
        }
    });
    if let Some((_, e)) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    let mut results = results.into_inner().expect("lock");

    let mut subsets = Vec::new();
    let mut all_ids = Vec::new();
    for draw in &plan.subsets {
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        for id in &draw.episodes {
            let s = results.remove(&(draw.form, index_of[id.as_str()])).unwrap_or_default();
            if s.is_empty() {
                skipped.push(id.clone());
            }
            samples.extend(s);
        }
        for s in &samples {
            s.validate(cfg.codec.tokens_per_chunk())?;
        }
        let file = subset_file(draw.form);
        write_jsonl(&out.join(&file), &samples)?;
        all_ids.extend(samples.iter().map(|s| s.id.clone()));
        subsets.push(SubsetSummary {
            form: draw.form,
            file,
            episodes: draw.episodes.len(),
            samples: samples.len(),
            skipped,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle", 0));
    all_ids.shuffle(&mut rng);

    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        config: cfg.clone(),
        codec_hash: cfg.codec.hash(),
        norm_stats: stats.clone(),
        plan,
        subsets,
        shuffle: all_ids,
    };
    write_json(&out.join(NORM_STATS_FILE), &stats)?;
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub id: String,
}

/// What a trainer consumes for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub stage: u8,
    pub description: String,
    pub seed: u64,
    pub codec_hash: String,
    pub entries: Vec<ManifestEntry>,
}

/// Stage 1 (multi-image grounding) is an empty placeholder; stage 2 lists
/// every sample of `dataset` in its recorded shuffle order.
pub fn training_manifest(dataset: &DatasetManifest, stage: u8) -> Result<TrainingManifest> {
    match stage {
        1 => Ok(TrainingManifest {
            stage,
            description: "multi-image grounding pre-alignment; supply an external grounding corpus".into(),
            seed: dataset.config.seed,
            codec_hash: dataset.codec_hash.clone(),
            entries: Vec::new(),
        }),
        2 => {
            let entries = dataset
                .shuffle
                .iter()
                .map(|id| {
                    let prefix = id.split('-').next().unwrap_or_default();
                    let form = Form::ALL
                        .into_iter()
                        .find(|f| f.as_str().eq_ignore_ascii_case(prefix))
                        .ok_or_else(|| ForgeError::Config(format!("sample id `{id}` has no form prefix")))?;
                    Ok(ManifestEntry {
                        file: subset_file(form),
                        id: id.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainingManifest {
                stage,
                description: "open-ended instruction fine-tuning over the mixed subsets".into(),
                seed: dataset.config.seed,
                codec_hash: dataset.codec_hash.clone(),
                entries,
            })
        }
        other => Err(ForgeError::Config(format!(
            "unknown training stage {other} (expected 1 or 2)"
        ))),
    }
}
