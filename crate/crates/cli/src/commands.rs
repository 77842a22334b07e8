use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use tpoint_core::dataio::{self, PairRecord, PredictionRecord, Split};
use tpoint_core::inference::{builtin_mapping, map_labels, LabelMapping, QuestionInput};
use tpoint_core::learner::{self, Activation, Checkpoint, TrainConfig};
use tpoint_core::schema::{self, builtin};
use tpoint_core::{convert, soft_distribution, transfer_decode, QVector, RelationSchema, Semantics, ValidationDomain};
use tpoint_llm::run::{
    for_each_bounded, parse_instances, run_classification, run_unified_batch, CandidateOrder, ClassificationConfig,
    RelationLine,
};
use tpoint_llm::transport::{model_from_env, HttpConfig};
use tpoint_llm::{CachedTransport, HttpTransport, MockScript, MockTransport, ReplayTransport, ResponseCache, RunConfig, Transport};

use crate::args::*;
use crate::manifest::ManifestBuilder;
use crate::settings::Settings;

/// Process exit status for a command that ran to completion.
pub type Status = u8;
pub const OK: Status = 0;
pub const DOMAIN_FAILURE: Status = 1;

/// A built-in schema name or a schema file path.
pub fn schema_arg(arg: &str, validate: bool) -> Result<RelationSchema> {
    if let Some(s) = builtin::by_name(arg) {
        if !Path::new(arg).exists() {
            return Ok(s.clone());
        }
    }
    let text = std::fs::read_to_string(arg).map_err(|e| tpoint_core::Error::Parse {
        line: 0,
        column: 0,
        message: format!("cannot read schema `{arg}`: {e}"),
    })?;
    Ok(if validate {
        schema::load_schema(&text)?
    } else {
        schema::parse_schema(&text)?
    })
}

fn semantics(a: SemanticsArg) -> Semantics {
    match a {
        SemanticsArg::Product => Semantics::Product,
        SemanticsArg::ProbSum => Semantics::ProbSum,
    }
}

fn parse_split(s: &str) -> Result<Split> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| anyhow!("unknown split `{s}`"))
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Checkpoint::read_from(BufReader::new(f))?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn validate_schema(a: &ValidateArgs) -> Result<Status> {
    let s = schema_arg(&a.schema, false)?;
    let domain = match a.domain {
        Some(DomainArg::All) => ValidationDomain::All256,
        Some(DomainArg::Consistent) => ValidationDomain::ConsistentOnly,
        None => s.domain(),
    };
    let report = schema::validate(&s, domain);
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Table => print!("{}", report.to_table()),
    }
    Ok(if report.is_ok() { OK } else { DOMAIN_FAILURE })
}

pub fn synth(a: &SynthArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("synth");
    let s = schema_arg(&a.schema, true)?;
    cfg.note("schema", s.name());
    let n = cfg.get("n", a.n, 1000usize)?;
    let sigma = cfg.get("sigma", a.sigma, 0.05f64)?;
    let seed = cfg.get("seed", a.seed, 0u64)?;
    let dim = cfg.get("dim", a.dim, 16usize)?;
    let frac = cfg.get("train_fraction", a.train_fraction, 0.8f64)?;
    if !(0.0..=1.0).contains(&frac) {
        bail!("--train-fraction must lie in [0, 1]");
    }
    if dim == 0 {
        bail!("--dim must be at least 1");
    }
    let cut = (n as f64 * frac).floor() as usize;
    let records: Vec<PairRecord> = learner::synth_generate(n, dim, sigma, seed, &s)
        .iter()
        .enumerate()
        .map(|(i, ex)| PairRecord::from_labeled(ex, if i < cut { Split::Train } else { Split::Test }))
        .collect();
    dataio::write_pairs(&a.output, &records)?;
    m.output(&a.output);
    m.extra("train_size", cut);
    m.extra("test_size", n - cut);
    m.write(&a.output, cfg.resolved(), Some(seed))?;
    Ok(OK)
}

pub fn train(a: &TrainArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("train");
    let s = schema_arg(&a.schema, true)?;
    cfg.note("schema", s.name());
    m.input(&a.data)?;
    let d = TrainConfig::default();
    let activation = a.activation.map(|x| match x {
        ActivationArg::Tanh => Activation::Tanh,
        ActivationArg::Sigmoid => Activation::Sigmoid,
    });
    let tc = TrainConfig {
        learning_rate: cfg.get("lr", a.lr, d.learning_rate)?,
        epochs: cfg.get("epochs", a.epochs, d.epochs)?,
        batch_size: cfg.get("batch_size", a.batch_size, d.batch_size)?,
        tau: cfg.get("tau", a.tau, d.tau)?,
        seed: cfg.get("seed", a.seed, d.seed)?,
        epsilon: d.epsilon,
        hidden: cfg.get("hidden", a.hidden, d.hidden)?,
        activation: cfg.get("activation", activation, d.activation)?,
        semantics: cfg.get("semantics", a.semantics.map(semantics), d.semantics)?,
        normalize: cfg.get("normalize", a.normalize.then_some(true), d.normalize)?,
    };
    let augment = cfg.get("augment", a.augment.then_some(true), false)?;

    let all = dataio::read_pairs(&a.data, &s)?;
    let mut records: Vec<PairRecord> = all.into_iter().filter(|r| r.split == Split::Train).collect();
    if records.is_empty() {
        bail!("{} holds no train records", a.data.display());
    }
    if augment {
        records = dataio::symmetry_augment(&records, &s)?;
    }
    let data = records.iter().map(PairRecord::to_labeled).collect::<tpoint_core::Result<Vec<_>>>()?;
    log::info!("training on {} records", data.len());
    let outcome = learner::train(&data, &s, &tc)?;

    let ckpt = Checkpoint::new(outcome.params, tc.tau, s.name());
    let mut w = BufWriter::new(File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?);
    ckpt.write_to(&mut w)?;
    w.flush()?;
    let history_path = sibling(&a.output, ".history.jsonl");
    let mut h = String::new();
    for e in &outcome.history {
        h.push_str(&serde_json::to_string(e)?);
        h.push('\n');
    }
    std::fs::write(&history_path, h)?;

    m.output(&a.output);
    m.output(&history_path);
    m.extra("train_size", data.len());
    if let Some(last) = outcome.history.last() {
        m.extra("final_loss", last.loss);
        m.extra("final_train_micro_f1", last.micro_f1);
    }
    m.write(&a.output, cfg.resolved(), Some(tc.seed))?;
    Ok(OK)
}

pub fn predict(a: &PredictArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("predict");
    m.input(&a.checkpoint)?;
    m.input(&a.data)?;
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let s = schema_arg(a.schema.as_deref().unwrap_or(&ckpt.schema), true)?;
    let sem = semantics(a.semantics);
    cfg.note("schema", s.name());
    cfg.note("semantics", sem);
    let split = a.split.as_deref().map(parse_split).transpose()?;
    let records = dataio::read_pairs(&a.data, &s)?;
    let mut out = Vec::new();
    for r in records.iter().filter(|r| split.is_none_or(|sp| r.split == sp)) {
        let ex = r.to_labeled()?;
        let q = learner::forward(&ex.features, &ckpt.params, ckpt.tau)?;
        out.push(prediction_from_q(&r.id, &q, &s, sem));
    }
    dataio::write_predictions(&a.output, &out)?;
    m.output(&a.output);
    m.extra("instances", out.len());
    m.write(&a.output, cfg.resolved(), None)?;
    Ok(OK)
}

/// Soft-argmax relation with its distribution; `ambiguous` reports whether
/// the thresholded answers match exactly one relation.
fn prediction_from_q(id: &str, q: &QVector, s: &RelationSchema, sem: Semantics) -> PredictionRecord {
    let dist = soft_distribution(q, s, sem);
    PredictionRecord {
        id: id.to_string(),
        q: Some(q.values().to_vec()),
        relation: Some(dist.argmax().to_string()),
        ambiguous: convert(q.threshold(), s).ambiguous,
        distribution: Some(dist),
    }
}

/// Relation of a prediction record, decoding its q vector if no relation is given.
fn relation_of(p: &PredictionRecord, s: &RelationSchema, sem: Semantics) -> Result<String> {
    if let Some(r) = &p.relation {
        return Ok(r.clone());
    }
    let q = QVector::from_slice(p.q.as_deref().expect("parser guarantees q or relation"))?;
    Ok(transfer_decode(&question_input(&q), s, sem).to_string())
}

/// Binary vectors are treated as answers, anything else as probabilities.
fn question_input(q: &QVector) -> QuestionInput {
    if q.is_binary() {
        QuestionInput::Answers(q.threshold())
    } else {
        QuestionInput::Probabilities(*q)
    }
}

pub fn eval(a: &EvalArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("eval");
    m.input(&a.predictions)?;
    m.input(&a.gold)?;
    let s = schema_arg(&a.schema, true)?;
    cfg.note("schema", s.name());
    cfg.note("macro_includes_vague", a.macro_includes_vague);
    let split = a.split.as_deref().map(parse_split).transpose()?;
    let gold_records: Vec<PairRecord> = dataio::read_pairs(&a.gold, &s)?
        .into_iter()
        .filter(|r| split.is_none_or(|sp| r.split == sp))
        .collect();
    let preds = dataio::read_predictions(&a.predictions)?;
    let by_id: HashMap<&str, &PredictionRecord> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut gold = Vec::with_capacity(gold_records.len());
    let mut pred = Vec::with_capacity(gold_records.len());
    for g in &gold_records {
        let p = by_id
            .get(g.id.as_str())
            .ok_or_else(|| anyhow!("no prediction for record `{}`", g.id))?;
        gold.push(g.gold.clone());
        pred.push(relation_of(p, &s, Semantics::Product)?);
    }
    let report = tpoint_core::metrics::evaluate(&gold, &pred, &s, a.macro_includes_vague)?;
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Table => print!("{}", report.to_table()),
    }
    let status = match cfg.get("min_f1", a.min_f1, -1.0f64)? {
        t if report.micro.f1 < t => {
            eprintln!("micro-F1 {:.4} is below the threshold {t}", report.micro.f1);
            DOMAIN_FAILURE
        }
        _ => OK,
    };
    if let Some(out) = &a.output {
        std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
        m.output(out);
        m.extra("micro_f1", report.micro.f1);
        m.write(out, cfg.resolved(), None)?;
    }
    Ok(status)
}

fn resolve_mapping(name: &str, source: &RelationSchema, target: &RelationSchema) -> Result<LabelMapping> {
    if let Some(m) = builtin_mapping(name) {
        if m.source != source.name() || m.target != target.name() {
            bail!(
                "mapping `{name}` maps {} to {}, not {} to {}",
                m.source,
                m.target,
                source.name(),
                target.name()
            );
        }
        return Ok(m.clone());
    }
    let text = std::fs::read_to_string(name).with_context(|| format!("reading label mapping {name}"))?;
    Ok(LabelMapping::from_json(&text, source, target)?)
}

pub fn transfer(a: &TransferArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("transfer");
    let target = schema_arg(&a.target_schema, true)?;
    let sem = semantics(a.semantics);
    cfg.note("target_schema", target.name());
    cfg.note("semantics", sem);

    // (id, q, relation already given by the input)
    let mut items: Vec<(String, Option<QVector>, Option<String>)> = Vec::new();
    if let Some(ck) = &a.checkpoint {
        let data = a.data.as_ref().expect("clap enforces --data with --checkpoint");
        m.input(ck)?;
        m.input(data)?;
        let ckpt = read_checkpoint(ck)?;
        let labels = schema_arg(a.source_schema.as_deref().unwrap_or(&ckpt.schema), true)?;
        let records = dataio::read_pairs(data, &labels)?;
        for r in &records {
            let ex = r.to_labeled()?;
            items.push((r.id.clone(), Some(learner::forward(&ex.features, &ckpt.params, ckpt.tau)?), None));
        }
    } else {
        let qf = a.q_file.as_ref().expect("clap enforces --q-file without --checkpoint");
        m.input(qf)?;
        for p in dataio::read_predictions(qf)? {
            let q = p.q.as_deref().map(QVector::from_slice).transpose()?;
            items.push((p.id, q, p.relation));
        }
    }

    let out: Vec<PredictionRecord> = match &a.label_mapping {
        None => items
            .iter()
            .map(|(id, q, _)| {
                let q = q.ok_or_else(|| anyhow!("record `{id}` has no `q`; point transfer needs question outputs"))?;
                let rel = transfer_decode(&question_input(&q), &target, sem);
                Ok(PredictionRecord::relation(id, rel))
            })
            .collect::<Result<_>>()?,
        Some(name) => {
            let source = schema_arg(a.source_schema.as_deref().expect("clap enforces --source-schema"), true)?;
            let mapping = resolve_mapping(name, &source, &target)?;
            cfg.note("source_schema", source.name());
            cfg.note("label_mapping", &mapping.name);
            items
                .iter()
                .map(|(id, q, rel)| {
                    let src = match (rel, q) {
                        (Some(r), _) => r.clone(),
                        (None, Some(q)) => transfer_decode(&question_input(q), &source, sem).to_string(),
                        (None, None) => unreachable!("records carry q or relation"),
                    };
                    Ok(PredictionRecord::relation(id, map_labels(&src, &mapping)?))
                })
                .collect::<Result<_>>()?
        }
    };
    dataio::write_predictions(&a.output, &out)?;
    m.output(&a.output);
    m.extra("instances", out.len());
    m.write(&a.output, cfg.resolved(), None)?;
    Ok(OK)
}

pub fn augment(a: &AugmentArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("augment");
    m.input(&a.data)?;
    let s = schema_arg(&a.schema, true)?;
    cfg.note("schema", s.name());
    let records = dataio::read_pairs(&a.data, &s)?;
    let out = dataio::symmetry_augment(&records, &s)?;
    dataio::write_pairs(&a.output, &out)?;
    m.output(&a.output);
    m.extra("input_size", records.len());
    m.extra("output_size", out.len());
    m.write(&a.output, cfg.resolved(), None)?;
    Ok(OK)
}

pub fn convert_cmd(a: &ConvertArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("convert");
    m.input(&a.q_file)?;
    let s = schema_arg(&a.schema, true)?;
    cfg.note("schema", s.name());
    let mut out = Vec::new();
    for p in dataio::read_predictions(&a.q_file)? {
        let q = p
            .q
            .as_deref()
            .ok_or_else(|| anyhow!("record `{}` has no `q`", p.id))
            .and_then(|v| Ok(QVector::from_slice(v)?))?;
        let c = convert(q.threshold(), &s);
        let mut rec = PredictionRecord::relation(&p.id, c.relation);
        rec.ambiguous = c.ambiguous;
        out.push(rec);
    }
    let ambiguous = out.iter().filter(|r| r.ambiguous).count();
    dataio::write_predictions(&a.output, &out)?;
    m.output(&a.output);
    m.extra("instances", out.len());
    m.extra("ambiguous", ambiguous);
    m.write(&a.output, cfg.resolved(), None)?;
    Ok(OK)
}

pub fn sample(a: &SampleArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("sample");
    m.input(&a.data)?;
    let s = schema_arg(&a.schema, true)?;
    cfg.note("schema", s.name());
    cfg.note("fraction", a.fraction);
    let seed = cfg.get("seed", a.seed, 0u64)?;
    let records = dataio::read_pairs(&a.data, &s)?;
    let out = dataio::split_sample(&records, a.fraction, seed)?;
    dataio::write_pairs(&a.output, &out)?;
    m.output(&a.output);
    m.extra("input_size", records.len());
    m.extra("output_size", out.len());
    m.write(&a.output, cfg.resolved(), Some(seed))?;
    Ok(OK)
}

fn build_transport(a: &LlmRunArgs, min_interval_ms: u64) -> Result<Box<dyn Transport>> {
    let cache = a.cache_dir.as_ref().map(ResponseCache::open).transpose()?;
    Ok(match a.transport {
        TransportArg::Replay => Box::new(ReplayTransport::new(cache.expect("clap enforces --cache-dir"))),
        TransportArg::Mock => {
            let mock = MockTransport::new(MockScript::read(a.script.as_ref().expect("clap enforces --script"))?);
            match cache {
                Some(c) => Box::new(CachedTransport::new(mock, c)),
                None => Box::new(mock),
            }
        }
        TransportArg::Http => {
            let mut hc = HttpConfig::from_env();
            hc.min_interval = std::time::Duration::from_millis(min_interval_ms);
            let http = HttpTransport::new(hc);
            match cache {
                Some(c) => Box::new(CachedTransport::new(http, c)),
                None => Box::new(http),
            }
        }
    })
}

pub fn llm_run(a: &LlmRunArgs, cfg: &mut Settings) -> Result<Status> {
    let mut m = ManifestBuilder::new("llm-run");
    m.input(&a.instances)?;
    if let Some(p) = &a.script {
        m.input(p)?;
    }
    let instances = parse_instances(&std::fs::read_to_string(&a.instances)?)?;
    let run = RunConfig {
        model: cfg.get("llm_model", a.model.clone(), model_from_env())?,
        temperature: cfg.get("temperature", a.temperature, 0.0f64)?,
        ..RunConfig::default()
    };
    let concurrency = cfg.get("concurrency", a.concurrency, 1usize)?;
    let seed = cfg.get("seed", a.seed, 0u64)?;
    let min_interval = cfg.get("min_interval_ms", a.min_interval_ms, 0u64)?;
    let transport = build_transport(a, min_interval)?;
    cfg.note("transport", format!("{:?}", a.transport).to_lowercase());
    cfg.note("mode", format!("{:?}", a.mode).to_lowercase());

    let (lines, traces, failures) = match a.mode {
        ModeArg::Unified => {
            let results = run_unified_batch(&instances, &*transport, &run, concurrency);
            let failures = results.iter().filter(|r| r.is_err()).count();
            let traces: Vec<serde_json::Value> = instances
                .iter()
                .zip(&results)
                .map(|(inst, r)| match r {
                    Ok(run) => serde_json::json!({"id": inst.id, "trace": run.trace}),
                    Err(e) => serde_json::json!({"id": inst.id, "trace": e.trace, "error": e.to_string()}),
                })
                .collect();
            (tpoint_llm::run::relation_lines(&instances, &results, "Vague"), traces, failures)
        }
        ModeArg::Classification => {
            let s = schema_arg(&a.schema, true)?;
            let cc = ClassificationConfig {
                order: match a.order {
                    OrderArg::Random => CandidateOrder::Random,
                    OrderArg::BeforeFirst => CandidateOrder::BeforeFirst,
                    OrderArg::BeforeLast => CandidateOrder::BeforeLast,
                },
                chain_of_thought: a.cot,
                samples: a.self_consistency.unwrap_or(1),
                seed,
            };
            cfg.note("schema", s.name());
            cfg.note("classification", &cc);
            let results = for_each_bounded(&instances, concurrency, |inst| {
                run_classification(inst, s.relation_names(), s.vague_name(), &*transport, &run, &cc)
            });
            let mut lines = String::new();
            let mut traces = Vec::new();
            let mut failures = 0;
            for (inst, r) in instances.iter().zip(&results) {
                let line = match r {
                    Ok(c) => {
                        traces.push(serde_json::json!({"id": inst.id, "classification": c}));
                        RelationLine {
                            id: inst.id.clone(),
                            relation: c.relation.clone(),
                            error: None,
                        }
                    }
                    Err(e) => {
                        failures += 1;
                        traces.push(serde_json::json!({"id": inst.id, "error": e.to_string()}));
                        RelationLine {
                            id: inst.id.clone(),
                            relation: s.vague_name().to_string(),
                            error: Some(e.to_string()),
                        }
                    }
                };
                lines.push_str(&serde_json::to_string(&line)?);
                lines.push('\n');
            }
            (lines, traces, failures)
        }
    };
    std::fs::write(&a.output, lines)?;
    m.output(&a.output);
    if let Some(t) = &a.trace {
        let mut text = String::new();
        for v in &traces {
            text.push_str(&serde_json::to_string(v)?);
            text.push('\n');
        }
        std::fs::write(t, text)?;
        m.output(t);
    }
    if failures > 0 {
        log::warn!("{failures} of {} instances failed and were recorded as Vague", instances.len());
    }
    m.extra("config", &run);
    m.extra("instances", instances.len());
    m.extra("failures", failures);
    m.write(&a.output, cfg.resolved(), Some(seed))?;
    Ok(OK)
}
