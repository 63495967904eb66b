//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Run with `cargo test --release -p oevla-cli --test acceptance`.

// 3.14 below is a reference Len, not pi
#![allow(clippy::approx_constant)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use oevla_bench::{
    compute_metrics, format_average_len, generate_suite, in_domain_crops, metrics_from_depths, run_suite,
    BenchmarkSuite, CodecLoopFactory, Difficulty, EvalReport, FormChoice, MetricsReport, Resources, RolloutConfig,
    RolloutLog, SubtaskLog, SuiteConfig,
};
use oevla_core::archive::{list_episodes, read_episode};
use oevla_core::media::read_png;
use oevla_core::{Action, ActionChunk, ActionCodec, EnvId, Form, ImageId, Segment};
use oevla_forge::dataset::{read_subset, MEDIA_DIR};
use oevla_forge::detect::synthesized_pool_db;
use oevla_forge::transform::VGR_SEGMENT_LEN;
use oevla_forge::{build_dataset, write_demos, BuildConfig, CropDb, DatasetManifest, DemoConfig};
use oevla_sim::{InstructionOracleFactory, RandomFactory, TaskId};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// metric fidelity

/// `(label, [LH-1..LH-5 in per-mille], reference Len)`.
const REFERENCE_ROWS: &[(&str, [u32; 5], f64)] = &[
    ("lang MCIL", [304, 13, 2, 0, 0], 0.31),
    ("lang RT-1", [533, 222, 94, 38, 13], 0.90),
    ("lang RoboFlamingo", [824, 619, 466, 331, 235], 2.48),
    ("lang OpenVLA", [628, 183, 58, 18, 10], 0.90),
    ("lang LLaVA-VLA", [831, 584, 347, 231, 151], 2.14),
    ("lang KosMos", [824, 684, 524, 376, 296], 2.70),
    ("lang OE-VLA-1b", [923, 695, 495, 341, 245], 2.70),
    ("lang OE-VLA-7b", [918, 738, 562, 442, 334], 2.99),
    ("base 1b VOS", [940, 787, 563, 420, 300], 3.01),
    ("base 1b OIF", [923, 700, 517, 357, 243], 2.74),
    ("base 1b VGR", [883, 637, 397, 240, 147], 2.30),
    ("base 1b VDL", [937, 723, 557, 420, 313], 2.95),
    ("base 7b VOS", [950, 833, 687, 543, 447], 3.46),
    ("base 7b OIF", [923, 813, 707, 610, 523], 3.58),
    ("base 7b VGR", [897, 760, 640, 517, 443], 3.26),
    ("base 7b VDL", [933, 807, 720, 617, 517], 3.60),
    ("hard 1b VOS", [855, 618, 432, 297, 226], 2.43),
    ("hard 1b OIF", [733, 480, 274, 162, 88], 1.74),
    ("hard 1b VGR", [645, 355, 162, 78, 47], 1.29),
    ("hard 1b VDL", [736, 449, 274, 139, 95], 1.70),
    ("hard 7b VOS", [929, 777, 639, 544, 439], 3.33),
    ("hard 7b OIF", [909, 757, 611, 493, 368], 3.14),
    ("hard 7b VGR", [547, 277, 172, 145, 111], 1.25),
    ("hard 7b VDL", [882, 713, 551, 466, 389], 3.00),
];

/// `(label, per-form Len, reference average)`.
const REFERENCE_AVERAGES: &[(&str, [f64; 4], &str)] = &[
    ("base 1b", [3.01, 2.74, 2.30, 2.95], "2.75"),
    ("base 7b", [3.46, 3.58, 3.26, 3.60], "3.48"),
    ("hard 1b", [2.43, 1.74, 1.29, 1.70], "1.79"),
    ("hard 7b", [3.33, 3.14, 1.25, 3.00], "2.68"),
];

/// 1000 sequence depths whose LH-k counts are exactly `per_mille`.
fn depths_for(per_mille: [u32; 5]) -> Vec<usize> {
    let mut depths = Vec::with_capacity(1000);
    let mut above = 1000;
    for k in (0..=5).rev() {
        let at_least = if k == 0 { 1000 } else { per_mille[k - 1] };
        let exactly = at_least - (1000 - above);
        depths.extend(std::iter::repeat_n(k, exactly as usize));
        above -= exactly;
    }
    depths
}

fn metric_fidelity() -> Check {
    let mut worst: f64 = 0.0;
    let mut off_by_rounding = Vec::new();
    for (label, rates, reference) in REFERENCE_ROWS {
        let m = metrics_from_depths(&depths_for(*rates)).map_err(err)?;
        ensure(m.lh_counts.map(|c| c as u32) == *rates, || {
            format!("{label}: depth synthesis broke")
        })?;
        let diff = (m.len - reference).abs();
        worst = worst.max(diff);
        ensure(diff <= 0.01 + 1e-12, || {
            format!("{label}: Len {:.4} vs reference {reference}", m.len)
        })?;
        if m.display["Len"] != format!("{reference:.2}") {
            // the reference Len was rounded from raw rates we do not have
            off_by_rounding.push(format!("{label} {} vs {reference:.2}", m.display["Len"]));
        }
    }
    for (label, lens, reference) in REFERENCE_AVERAGES {
        let got = format_average_len(lens);
        ensure(got == *reference, || {
            format!("{label} Avg: {got} vs reference {reference}")
        })?;
    }
    Ok(format!(
        "{} rows within 0.01 (max |dLen| {worst:.4}; display differs in the last digit for [{}]), {} averages exact",
        REFERENCE_ROWS.len(),
        off_by_rounding.join(", "),
        REFERENCE_AVERAGES.len()
    ))
}

// ---------------------------------------------------------------------------
// codec

fn codec_exactness() -> Check {
    let codec = ActionCodec::default();
    let cfg = *codec.config();
    let n = cfg.n_bins;
    let centre = |b: u32| -1.0 + (2.0 * f64::from(b) + 1.0) / f64::from(n);

    // every bin centre in every dimension; the gripper is a sign after decode
    for dim in 0..7 {
        for b in 0..n {
            let x = centre(b);
            let mut a = Action::ZERO_OPEN;
            a.0[dim] = x;
            let back = codec.quantize(&ActionChunk::new(vec![a; cfg.chunk_len])).map_err(err)?;
            let want = if dim == 6 {
                if x < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            } else {
                x
            };
            ensure(back.actions().iter().all(|r| r.0[dim] == want), || {
                format!("dim {dim} bin {b}: {} -> {}", x, back.actions()[0].0[dim])
            })?;
            let scalar = codec.decode_dim(codec.encode_dim(x).map_err(err)?).map_err(err)?;
            ensure(scalar == x, || format!("dim {dim} bin {b}: scalar {x} -> {scalar}"))?;
        }
    }

    // 10^4-point grid over [-1, 1]
    let mut max_err: f64 = 0.0;
    for i in 0..10_000 {
        let x = -1.0 + 2.0 * f64::from(i) / 9_999.0;
        let mut a = Action::ZERO_OPEN;
        for d in 0..6 {
            a.0[d] = x;
        }
        let back = codec.quantize(&ActionChunk::new(vec![a; cfg.chunk_len])).map_err(err)?;
        for d in 0..6 {
            max_err = max_err.max((back.actions()[0].0[d] - x).abs());
        }
    }
    ensure(max_err <= 1.0 / 256.0, || {
        format!("max round-trip error {max_err} > 1/256")
    })?;

    // bijection onto [V - 256, V)
    let low = cfg.vocab_size - n;
    let mut seen = vec![false; n as usize];
    for b in 0..n {
        let t = codec.bin_to_token(b).map_err(err)?;
        ensure((low..cfg.vocab_size).contains(&t), || {
            format!("bin {b} -> token {t} outside range")
        })?;
        ensure(!seen[(t - low) as usize], || format!("token {t} hit twice"))?;
        seen[(t - low) as usize] = true;
        ensure(codec.token_to_bin(i64::from(t)).map_err(err)? == b, || {
            format!("token {t} does not invert")
        })?;
    }
    ensure(seen.iter().all(|s| *s), || "token map is not onto".into())?;
    ensure(
        !codec.is_action_token(i64::from(low) - 1) && !codec.is_action_token(i64::from(cfg.vocab_size)),
        || "neighbours of the action range accepted".into(),
    )?;
    Ok(format!(
        "256 centres x 7 dims exact, grid max error {max_err:.6} <= 1/256, bijection onto [{low}, {})",
        cfg.vocab_size
    ))
}

// ---------------------------------------------------------------------------
// end to end

fn lang_suite() -> Result<BenchmarkSuite, String> {
    let cfg = SuiteConfig {
        env: EnvId::D,
        n: 100,
        seed: 7,
        form: FormChoice::Single(Form::Lang),
        difficulty: Difficulty::Base,
        resolution: oevla_sim::render::DEFAULT_RESOLUTION,
    };
    generate_suite(&cfg, &Resources::default(), 4).map_err(err)
}

fn check_monotone(label: &str, m: &MetricsReport) -> Result<(), String> {
    ensure(m.lh.windows(2).all(|w| w[0] >= w[1]), || {
        format!("{label}: LH rates not monotone {:?}", m.lh)
    })
}

fn oracle_ceiling(suite: &BenchmarkSuite) -> Check {
    let rc = RolloutConfig::default();
    let oracle = compute_metrics(&run_suite(suite, &InstructionOracleFactory, &rc, 4).map_err(err)?).map_err(err)?;
    let random = compute_metrics(&run_suite(suite, &RandomFactory { seed: 7 }, &rc, 4).map_err(err)?).map_err(err)?;
    check_monotone("oracle", &oracle)?;
    check_monotone("random", &random)?;
    ensure(oracle.len >= 4.9, || {
        format!("instruction oracle Len {:.2} < 4.9", oracle.len)
    })?;
    ensure(random.len <= 0.2, || format!("random Len {:.2} > 0.2", random.len))?;
    Ok(format!(
        "instruction oracle Len {:.2} >= 4.9, random Len {:.2} <= 0.2 (n=100)",
        oracle.len, random.len
    ))
}

fn codec_in_loop(suite: &BenchmarkSuite) -> Check {
    let rc = RolloutConfig::default();
    let factory = CodecLoopFactory {
        inner: InstructionOracleFactory,
        codec: ActionCodec::default(),
    };
    let m = compute_metrics(&run_suite(suite, &factory, &rc, 4).map_err(err)?).map_err(err)?;
    check_monotone("codec loop", &m)?;
    ensure(m.len >= 4.8, || format!("codec-in-the-loop Len {:.2} < 4.8", m.len))?;
    Ok(format!("oracle through encode/decode Len {:.2} >= 4.8", m.len))
}

// ---------------------------------------------------------------------------
// data

fn demos(root: &Path, n: usize, seed: u64) -> Result<(), String> {
    let cfg = DemoConfig {
        envs: vec![EnvId::A, EnvId::B, EnvId::C],
        n,
        seed,
        tasks_per_episode: oevla_forge::demos::DEFAULT_TASKS_PER_EPISODE,
        resolution: 32,
    };
    write_demos(root, &cfg, 4).map(|_| ()).map_err(err)
}

fn ground_truth_crops(archive: &Path) -> Result<CropDb, String> {
    oevla_forge::build_crop_db(archive, &oevla_forge::DetectionSource::GroundTruth).map_err(err)
}

fn data_recipe(tmp: &Path) -> Check {
    let archive = tmp.join("recipe-demos");
    demos(&archive, 1000, 5)?;
    let crops = ground_truth_crops(&archive)?;
    let cfg = BuildConfig {
        fraction: 0.4,
        ..BuildConfig::new(5)
    };
    let m = build_dataset(&archive, &crops, &tmp.join("recipe-ds"), &cfg, 4).map_err(err)?;
    ensure(m.subsets.len() == 5, || format!("{} subsets", m.subsets.len()))?;
    for s in &m.subsets {
        ensure(s.episodes == 400, || format!("{} has {} episodes", s.form, s.episodes))?;
        let draw = m.plan.subsets.iter().find(|d| d.form == s.form).ok_or("missing draw")?;
        let unique: std::collections::BTreeSet<_> = draw.episodes.iter().collect();
        ensure(unique.len() == 400, || {
            format!("{} draws {} distinct episodes", s.form, unique.len())
        })?;
    }
    let total: usize = m.subsets.iter().map(|s| s.episodes).sum();
    ensure(total == 2000, || format!("{total} sample-episode draws, expected 2000"))?;
    Ok(format!(
        "N=1000, fraction 0.4: 5 x 400 episodes, {total} draws = 2N ({} samples)",
        m.total_samples()
    ))
}

fn transformation_contracts(tmp: &Path) -> Check {
    let archive = tmp.join("contract-demos");
    demos(&archive, 40, 9)?;
    let crops = ground_truth_crops(&archive)?;
    let cfg = BuildConfig {
        fraction: 1.0,
        ..BuildConfig::new(9)
    };
    let ds = tmp.join("contract-ds");
    build_dataset(&archive, &crops, &ds, &cfg, 4).map_err(err)?;
    let episodes: BTreeMap<String, oevla_core::Episode> = list_episodes(&archive)
        .map_err(err)?
        .iter()
        .map(|d| read_episode(d).map(|e| (e.id.clone(), e)))
        .collect::<Result<_, _>>()
        .map_err(err)?;

    // VGR: window of exactly 80 frames, goal is its last static frame
    let vgr = read_subset(&ds, Form::Vgr).map_err(err)?;
    ensure(!vgr.is_empty(), || "no VGR samples".into())?;
    for s in &vgr {
        let ep = &episodes[&s.episode_id];
        let start = s.timestep as usize;
        let end = start + VGR_SEGMENT_LEN - 1;
        ensure(end < ep.len(), || format!("{}: window runs past the episode", s.id))?;
        let Segment::Image(goal) = s.instruction.segments.last().ok_or("empty VGR instruction")? else {
            return Err(format!("{}: VGR instruction does not end in an image", s.id));
        };
        let stored = read_png(&ds.join(MEDIA_DIR).join(goal.file_name())).map_err(err)?;
        ensure(stored == *ep.frames[end].static_view, || {
            format!("{}: goal is not frame {end}", s.id)
        })?;
        ensure(ImageId::of(&ep.frames[end].static_view) == *goal, || {
            format!("{}: goal id", s.id)
        })?;
    }

    // VDL: four strictly increasing frames from 0 to T-1
    let vdl = read_subset(&ds, Form::Vdl).map_err(err)?;
    ensure(!vdl.is_empty(), || "no VDL samples".into())?;
    for s in &vdl {
        let ep = &episodes[&s.episode_id];
        let ids: Vec<&ImageId> = s.instruction.image_ids().collect();
        ensure(ids.len() == 4, || format!("{}: {} VDL frames", s.id, ids.len()))?;
        let frame_ids: Vec<ImageId> = ep.frames.iter().map(|f| ImageId::of(&f.static_view)).collect();
        let t = ep.len();
        ensure(*ids[0] == frame_ids[0] && *ids[3] == frame_ids[t - 1], || {
            format!("{}: VDL does not span [0, {}]", s.id, t - 1)
        })?;
        // strictly increasing choice of source indices
        let mut prev: Option<usize> = Some(0);
        for id in &ids[1..3] {
            let from = prev.map_or(0, |p| p + 1);
            prev = (from..t - 1).find(|&i| frame_ids[i] == **id);
            ensure(prev.is_some(), || {
                format!("{}: VDL frames not strictly increasing", s.id)
            })?;
        }
    }

    // VOS: non-slot text is the annotation with the slot spans removed
    let vos = read_subset(&ds, Form::Vos).map_err(err)?;
    ensure(!vos.is_empty(), || "no VOS samples".into())?;
    for s in &vos {
        let ann = &episodes[&s.episode_id].annotation;
        let mut want = Vec::new();
        let mut cursor = 0;
        for slot in &ann.object_slots {
            want.push(Segment::Text(ann.text[cursor..slot.start].to_string()));
            cursor = slot.end;
        }
        want.push(Segment::Text(ann.text[cursor..].to_string()));
        let want: Vec<&str> = want
            .iter()
            .filter_map(|w| match w {
                Segment::Text(t) if !t.is_empty() => Some(t.as_str()),
                _ => None,
            })
            .collect();
        let got: Vec<&str> = s
            .instruction
            .segments
            .iter()
            .filter_map(|g| match g {
                Segment::Text(t) => Some(t.as_str()),
                _ => None,
            })
            .collect();
        ensure(got == want, || {
            format!("{}: text {got:?} vs annotation pieces {want:?}", s.id)
        })?;
        ensure(s.instruction.image_count() == ann.object_slots.len(), || {
            format!("{}: image count", s.id)
        })?;
    }

    // base/hard provenance
    let in_domain = in_domain_crops(EnvId::D, 7, 64).map_err(err)?;
    let external = synthesized_pool_db(4, 11).map_err(err)?;
    let ids_of = |db: &CropDb| -> std::collections::BTreeSet<ImageId> {
        db.names()
            .flat_map(|n| db.entries(n).iter().map(|e| e.image.clone()))
            .collect()
    };
    let (in_ids, ext_ids) = (ids_of(&in_domain), ids_of(&external));
    let resources = Resources {
        external: Some(external.clone()),
    };
    let mut counts = Vec::new();
    for difficulty in [Difficulty::Base, Difficulty::Hard] {
        let cfg = SuiteConfig {
            env: EnvId::D,
            n: 50,
            seed: 7,
            form: FormChoice::Single(Form::Vos),
            difficulty,
            resolution: 64,
        };
        let suite = generate_suite(&cfg, &resources, 4).map_err(err)?;
        let imgs: Vec<ImageId> = suite
            .sequences
            .iter()
            .flat_map(|q| q.subtasks.iter())
            .flat_map(|st| st.instruction.image_ids().cloned().collect::<Vec<_>>())
            .collect();
        let ext = imgs.iter().filter(|i| ext_ids.contains(*i)).count();
        let inside = imgs.iter().filter(|i| in_ids.contains(*i)).count();
        ensure(ext + inside == imgs.len(), || {
            format!("{difficulty}: crops of unknown provenance")
        })?;
        counts.push((imgs.len(), ext));
    }
    ensure(counts[0].1 == 0, || {
        format!("base VOS uses {} external crops", counts[0].1)
    })?;
    ensure(counts[1].1 == counts[1].0, || {
        format!("hard VOS: {}/{} external", counts[1].1, counts[1].0)
    })?;
    Ok(format!(
        "{} VGR, {} VDL, {} VOS samples; base VOS 0/{} external, hard VOS {}/{} external",
        vgr.len(),
        vdl.len(),
        vos.len(),
        counts[0].0,
        counts[1].1,
        counts[1].0
    ))
}

// ---------------------------------------------------------------------------
// determinism

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(bytes) = fs::read(&p) {
                out.insert(p.strip_prefix(dir).unwrap_or(&p).to_path_buf(), bytes);
            }
        }
    }
    out
}

fn determinism(tmp: &Path) -> Check {
    let root = tmp.join("determinism");
    let resources = Resources {
        external: Some(synthesized_pool_db(4, 11).map_err(err)?),
    };
    let cfg = SuiteConfig {
        env: EnvId::D,
        n: 30,
        seed: 21,
        form: FormChoice::Mixed,
        difficulty: Difficulty::Hard,
        resolution: 64,
    };
    let (s1, s8) = (root.join("suite-1"), root.join("suite-8"));
    let suite = generate_suite(&cfg, &resources, 1).map_err(err)?;
    suite.save(&s1).map_err(err)?;
    generate_suite(&cfg, &resources, 8)
        .map_err(err)?
        .save(&s8)
        .map_err(err)?;
    ensure(dir_bytes(&s1) == dir_bytes(&s8), || {
        "suite bytes differ between 1 and 8 workers".into()
    })?;

    let archive = root.join("demos");
    demos(&archive, 24, 3)?;
    let crops = ground_truth_crops(&archive)?;
    let bc = BuildConfig::new(3);
    let (d1, d8) = (root.join("ds-1"), root.join("ds-8"));
    build_dataset(&archive, &crops, &d1, &bc, 1).map_err(err)?;
    build_dataset(&archive, &crops, &d8, &bc, 8).map_err(err)?;
    let dataset = dir_bytes(&d1);
    ensure(dataset == dir_bytes(&d8), || {
        "dataset bytes differ between 1 and 8 workers".into()
    })?;
    DatasetManifest::load(&d1).map_err(err)?;

    let reloaded = BenchmarkSuite::load(&s1).map_err(err)?;
    let rc = RolloutConfig {
        resolution: 64,
        ..RolloutConfig::default()
    };
    let mut reports = Vec::new();
    for (s, workers) in [(&suite, 1), (&reloaded, 8)] {
        for factory in [
            &RandomFactory { seed: 4 } as &dyn oevla_sim::PolicyFactory,
            &InstructionOracleFactory,
        ] {
            let logs = run_suite(s, factory, &rc, workers).map_err(err)?;
            let r = EvalReport::new("p", s, &rc, &logs).map_err(err)?;
            check_monotone("determinism report", &r.metrics)?;
            reports.push(serde_json::to_vec(&r).map_err(err)?);
        }
    }
    ensure(reports[0] == reports[2] && reports[1] == reports[3], || {
        "reports differ between 1 and 8 workers".into()
    })?;
    Ok(format!(
        "suite ({} files), dataset ({} files) and 2 reports byte-identical across 1 and 8 workers",
        dir_bytes(&s1).len(),
        dataset.len()
    ))
}

// ---------------------------------------------------------------------------
// monotonicity

fn synthetic_log(i: usize, depth: usize, attempted: usize) -> RolloutLog {
    let subtasks = (0..attempted)
        .map(|k| SubtaskLog {
            task: TaskId::ALL[(i + k) % TaskId::ALL.len()],
            steps: 1,
            success: k < depth,
            failure: (k >= depth).then(|| "budget_exhausted".to_string()),
            message: None,
            actions: Vec::new(),
        })
        .collect();
    RolloutLog {
        sequence_id: format!("seq{i:05}"),
        env_id: EnvId::D,
        reset_seed: i as u64,
        subtasks,
        depth,
    }
}

fn monotonicity() -> Check {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 2000,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let strategy = prop::collection::vec((0usize..=5, any::<bool>()), 1..300);
    runner
        .run(&strategy, |draws| {
            let logs: Vec<RolloutLog> = draws
                .iter()
                .enumerate()
                .map(|(i, &(depth, stop))| {
                    let attempted = if depth < 5 && !stop { depth + 1 } else { depth };
                    synthetic_log(i, depth, attempted)
                })
                .collect();
            let m = compute_metrics(&logs).unwrap();
            prop_assert!(m.lh.windows(2).all(|w| w[0] >= w[1]), "{:?}", m.lh);
            prop_assert!(m.lh_counts.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!((m.len - m.lh.iter().sum::<f64>()).abs() < 1e-9);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("SR_1 >= ... >= SR_5 over 2000 random log sets (and every report above)".into())
}

// ---------------------------------------------------------------------------

fn main() {
    // `cargo test` passes harness flags such as `--list`; ignore them.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    };
    report("metric formula fidelity", &mut metric_fidelity);
    report("codec exactness", &mut codec_exactness);
    let suite = lang_suite();
    report("end-to-end oracle ceiling", &mut || {
        oracle_ceiling(suite.as_ref().map_err(Clone::clone)?)
    });
    report("codec in the loop", &mut || {
        codec_in_loop(suite.as_ref().map_err(Clone::clone)?)
    });
    report("data recipe", &mut || data_recipe(tmp.path()));
    report("transformation contracts", &mut || transformation_contracts(tmp.path()));
    report("determinism", &mut || determinism(tmp.path()));
    report("monotonicity", &mut monotonicity);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
