//! Subcommand implementations.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use oevla_bench::{
    compute_metrics, format_average_len, generate_suite, read_logs, run_suite, verify_log, write_logs, BenchmarkSuite,
    CodecLoopFactory, EvalReport, Resources, RolloutConfig, SuiteConfig,
};
use oevla_core::archive::{list_episodes, read_json, read_meta, write_atomic, write_json};
use oevla_core::media::encode_png;
use oevla_core::{Action, ActionChunk, ActionCodec, CodecConfig, NormStats};
use oevla_forge::detect::{build_crop_db, ingest_external, synthesize_pool, CROP_INDEX_FILE};
use oevla_forge::{
    build_dataset, training_manifest, write_demos, BuildConfig, CropDb, CropProvenance, DatasetManifest, DemoConfig,
    DetectionSource,
};
use oevla_rpc::{serve_connect, serve_listener, serve_stdio, Endpoint, RemoteFactory};
use oevla_sim::render::{render_observation, render_with};
use oevla_sim::{
    replay, reset, EnvProfile, InstructionOracleFactory, OracleFactory, PolicyFactory, RandomFactory, WorldState,
};

use crate::cli::*;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Forge(c) => forge(c),
        Command::Bench(BenchCmd::Gen(a)) => bench_gen(a),
        Command::Eval(c) => eval(c),
        Command::Codec(c) => codec(c),
        Command::Env(c) => env(c),
        Command::Rpc(RpcCmd::Serve(a)) => rpc_serve(a),
    }
}

fn write_json_out<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}

fn forge(cmd: ForgeCmd) -> Result<()> {
    match cmd {
        ForgeCmd::Demos(a) => {
            let cfg = DemoConfig {
                envs: a.profile,
                n: a.n,
                seed: a.seed,
                tasks_per_episode: a.tasks_per_episode,
                resolution: a.resolution,
            };
            let info = write_demos(&a.out, &cfg, a.workers)?;
            eprintln!(
                "wrote {} episodes ({} frames) to {}",
                info.episodes,
                info.frames,
                a.out.display()
            );
        }
        ForgeCmd::Pool(a) => {
            let n = synthesize_pool(&a.out, a.per_object, a.seed)?;
            eprintln!("wrote {n} external crops to {}", a.out.display());
        }
        ForgeCmd::Crops(a) => {
            let source = match &a.detections {
                Some(p) => DetectionSource::load_external(p)?,
                None => DetectionSource::GroundTruth,
            };
            let mut db = build_crop_db(&a.demos, &source)?;
            for dir in &a.external {
                let n = ingest_external(&mut db, dir)?;
                log::info!("ingested {n} external crops from {}", dir.display());
            }
            db.save(&a.out)?;
            eprintln!("wrote {} crops to {}", db.len(), a.out.display());
        }
        ForgeCmd::Build(a) => {
            let crops = CropDb::load(&a.crops)?;
            let cfg = BuildConfig {
                fraction: a.fraction,
                stats: a.stats.into(),
                ..BuildConfig::new(a.seed)
            };
            let m = build_dataset(&a.demos, &crops, &a.out, &cfg, a.workers)?;
            for s in &m.subsets {
                eprintln!("{:>4}: {} episodes, {} samples", s.form, s.episodes, s.samples);
            }
            eprintln!("total {} samples in {}", m.total_samples(), a.out.display());
        }
        ForgeCmd::Manifest(a) => {
            let dataset = DatasetManifest::load(&a.dataset)?;
            let m = training_manifest(&dataset, a.stage)?;
            write_json(&a.out, &m)?;
            eprintln!("stage {}: {} entries", m.stage, m.entries.len());
        }
    }
    Ok(())
}

/// A crop database directory, or a raw `<object>/<file>.png` tree.
fn load_pool(path: &Path) -> Result<CropDb> {
    if path.join(CROP_INDEX_FILE).is_file() {
        let db = CropDb::load(path)?.only(CropProvenance::External);
        if db.is_empty() {
            bail!("{} holds no external-provenance crops", path.display());
        }
        Ok(db)
    } else {
        let mut db = CropDb::new();
        ingest_external(&mut db, path)?;
        Ok(db)
    }
}

fn bench_gen(a: GenArgs) -> Result<()> {
    let cfg = SuiteConfig {
        env: a.profile,
        n: a.n,
        seed: a.seed,
        form: a.form,
        difficulty: a.difficulty,
        resolution: a.resolution,
    };
    let resources = Resources {
        external: a.pool.as_deref().map(load_pool).transpose()?,
    };
    let suite = generate_suite(&cfg, &resources, a.workers)?;
    suite.save(&a.out)?;
    eprintln!(
        "wrote {} {} {} sequences ({} images) to {}",
        suite.sequences.len(),
        cfg.difficulty,
        cfg.form,
        suite.media.len(),
        a.out.display()
    );
    Ok(())
}

fn builtin_policy(name: &str, seed: Option<u64>) -> Result<(Box<dyn PolicyFactory>, String)> {
    Ok(match name {
        "oracle" => (Box::new(OracleFactory), "oracle".into()),
        "instruction-oracle" => (Box::new(InstructionOracleFactory), "instruction-oracle".into()),
        "random" => {
            let seed = seed.ok_or_else(|| anyhow!("the random policy needs --seed"))?;
            (Box::new(RandomFactory { seed }), format!("random(seed={seed})"))
        }
        other => bail!("unknown policy `{other}` (expected oracle, instruction-oracle, random or remote:<endpoint>)"),
    })
}

struct Boxed(Box<dyn PolicyFactory>);

impl PolicyFactory for Boxed {
    fn session(&self, id: &str) -> Result<Box<dyn oevla_sim::Policy>, oevla_sim::PolicyError> {
        self.0.session(id)
    }

    fn privileged(&self) -> bool {
        self.0.privileged()
    }
}

fn default_logs_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}.logs.jsonl"))
}

fn eval(cmd: EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Run(a) => {
            let suite = BenchmarkSuite::load(&a.suite)?;
            let rollout = RolloutConfig {
                budget: a.budget,
                replan: a.replan,
                resolution: suite.config.resolution,
                codec: CodecConfig::default(),
            };
            let (factory, mut name): (Box<dyn PolicyFactory>, String) = match a.policy.strip_prefix("remote:") {
                Some(ep) => {
                    let endpoint: Endpoint = ep.parse()?;
                    if !a.timeout.is_finite() || a.timeout <= 0.0 {
                        bail!("--timeout must be a positive number of seconds");
                    }
                    let f = RemoteFactory::new(endpoint.clone(), rollout.codec)?
                        .with_privileged(a.privileged)
                        .with_timeout(Some(Duration::from_secs_f64(a.timeout)));
                    if let Some(addr) = f.local_addr() {
                        eprintln!("waiting for policy connections on {addr}");
                    }
                    (Box::new(f), format!("remote({endpoint})"))
                }
                None => builtin_policy(&a.policy, a.seed)?,
            };
            let factory: Box<dyn PolicyFactory> = if a.codec_loop {
                name = format!("{name}+codec");
                Box::new(CodecLoopFactory {
                    inner: Boxed(factory),
                    codec: ActionCodec::new(rollout.codec)?,
                })
            } else {
                factory
            };
            let logs = run_suite(&suite, factory.as_ref(), &rollout, a.workers)?;
            let report = EvalReport::new(&name, &suite, &rollout, &logs)?;
            let logs_path = a.logs.clone().unwrap_or_else(|| default_logs_path(&a.out));
            write_logs(&logs_path, &logs)?;
            write_json(&a.out, &report)?;
            let d = &report.metrics.display;
            eprintln!(
                "{name}: LH-1 {} LH-2 {} LH-3 {} LH-4 {} LH-5 {} Len {} (n={})",
                d["LH-1"], d["LH-2"], d["LH-3"], d["LH-4"], d["LH-5"], d["Len"], report.metrics.n_sequences
            );
        }
        EvalCmd::Score(a) => {
            let logs = read_logs(&a.logs)?;
            if a.verify {
                let bad: Vec<_> = logs
                    .iter()
                    .filter(|l| !verify_log(l))
                    .map(|l| l.sequence_id.clone())
                    .collect();
                if !bad.is_empty() {
                    bail!("{} logs do not replay: {}", bad.len(), bad.join(", "));
                }
            }
            write_json_out(None, &compute_metrics(&logs)?)?;
        }
        EvalCmd::Average(a) => {
            let mut lens = Vec::new();
            for p in &a.reports {
                let r: EvalReport = read_json(p)?;
                let len: f64 = r.metrics.display["Len"]
                    .parse()
                    .with_context(|| format!("{}: bad Len", p.display()))?;
                println!(
                    "{:<8} {:<5} {}",
                    r.form.to_string(),
                    r.difficulty.to_string(),
                    r.metrics.display["Len"]
                );
                lens.push(len);
            }
            println!("Avg            {}", format_average_len(&lens));
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    let mut s = String::new();
    if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut s)?;
    } else {
        s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(s)
}

/// A single chunk or a list of chunks.
#[derive(serde::Deserialize, serde::Serialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(Vec<T>),
    Many(Vec<Vec<T>>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> (Vec<Vec<T>>, bool) {
        match self {
            OneOrMany::One(v) => (vec![v], true),
            OneOrMany::Many(v) => (v, false),
        }
    }
}

fn write_chunks<T: serde::Serialize>(out: Option<&Path>, chunks: Vec<Vec<T>>, single: bool) -> Result<()> {
    let value = if single {
        OneOrMany::One(chunks.into_iter().next().unwrap_or_default())
    } else {
        OneOrMany::Many(chunks)
    };
    match out {
        Some(p) => {
            let mut bytes = serde_json::to_vec(&value)?;
            bytes.push(b'\n');
            write_atomic(p, &bytes)?;
        }
        None => println!("{}", serde_json::to_string(&value)?),
    }
    Ok(())
}

fn codec(cmd: CodecCmd) -> Result<()> {
    let cfg = CodecConfig::default();
    let codec = ActionCodec::new(cfg)?;
    match cmd {
        CodecCmd::Encode(io) => {
            let parsed: OneOrMany<f64> =
                serde_json::from_str(&read_input(&io.input)?).context("expected JSON floats")?;
            let (chunks, single) = parsed.into_vec();
            let mut out = Vec::with_capacity(chunks.len());
            for (i, c) in chunks.iter().enumerate() {
                let chunk = ActionChunk::from_flat(c, &cfg).with_context(|| format!("chunk {i}"))?;
                out.push(codec.encode_chunk(&chunk)?);
            }
            write_chunks(io.out.as_deref(), out, single)
        }
        CodecCmd::Decode(io) => {
            let parsed: OneOrMany<i64> =
                serde_json::from_str(&read_input(&io.input)?).context("expected JSON integers")?;
            let (chunks, single) = parsed.into_vec();
            let mut out = Vec::with_capacity(chunks.len());
            for (i, c) in chunks.iter().enumerate() {
                out.push(codec.decode_chunk(c).with_context(|| format!("chunk {i}"))?.flatten());
            }
            write_chunks(io.out.as_deref(), out, single)
        }
        CodecCmd::Stats(a) => {
            let mut actions = Vec::new();
            for dir in list_episodes(&a.demos)? {
                actions.extend(read_meta(&dir)?.actions);
            }
            let stats = NormStats::fit(&actions).context(
                "cannot fit statistics over this archive (demos that never rotate leave dims 3-5 constant; \
                 `forge build` defaults to identity statistics for that reason)",
            )?;
            write_json_out(a.out.as_deref(), &stats)
        }
    }
}

fn env(cmd: EnvCmd) -> Result<()> {
    match cmd {
        EnvCmd::Render(a) => {
            let state: WorldState = match (&a.state, a.seed) {
                (Some(p), _) => read_json(p)?,
                (None, Some(seed)) => reset(EnvProfile::get(a.profile), seed),
                (None, None) => bail!("give --seed or --state"),
            };
            let mut profile = EnvProfile::get(state.env_id).clone();
            if a.alternate_camera {
                profile = profile.with_camera(EnvProfile::alternate_camera());
            }
            let img = match a.view.view() {
                Some(v) => render_with(&state, &profile, v, a.resolution)?,
                None if a.alternate_camera => bail!("--view obs always uses the default camera"),
                None => render_observation(&state, a.resolution)?,
            };
            write_atomic(&a.out, &encode_png(&img))?;
        }
        EnvCmd::Replay(a) => {
            let text = read_input(&a.actions)?;
            let mut actions = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let a: Action = serde_json::from_str(line).with_context(|| format!("{}:{}", "actions", i + 1))?;
                actions.push(a);
            }
            let profile = EnvProfile::get(a.profile);
            let states = replay(&reset(profile, a.seed), &actions);
            let mut buf = Vec::new();
            for s in &states {
                serde_json::to_writer(&mut buf, s)?;
                buf.push(b'\n');
            }
            write_atomic(&a.out, &buf)?;
            if let Some(dir) = &a.frames {
                for (i, s) in states.iter().enumerate() {
                    let img = render_with(s, profile, oevla_sim::View::Static, a.resolution)?;
                    write_atomic(&dir.join(format!("{i:05}.png")), &encode_png(&img))?;
                }
            }
            eprintln!("replayed {} actions", actions.len());
        }
    }
    Ok(())
}

fn rpc_serve(a: ServeArgs) -> Result<()> {
    let (factory, _) = builtin_policy(&a.policy, a.seed)?;
    let codec = CodecConfig::default();
    let factory: Box<dyn PolicyFactory> = if a.tokens {
        Box::new(CodecLoopFactory {
            inner: Boxed(factory),
            codec: ActionCodec::new(codec)?,
        })
    } else {
        factory
    };
    if a.stdio {
        let s = serve_stdio(factory.as_ref(), &codec)?;
        log::info!("served {} subtasks, {} steps", s.subtasks, s.steps);
    } else if let Some(addr) = &a.listen {
        let listener = std::net::TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
        eprintln!("serving {} on {}", a.policy, listener.local_addr()?);
        serve_listener(factory.as_ref(), &listener, &codec, a.max_connections)?;
    } else if let Some(addr) = &a.connect {
        let n = serve_connect(factory.as_ref(), addr, &codec)?;
        log::info!("served {n} sessions");
    }
    Ok(())
}
