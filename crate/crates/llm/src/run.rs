//! Four-question runs, classification runs, and batching over instances.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tpoint_core::inference::{aggregate_llm_answers, point_relation_from_answers, relation_from_start_end, LlmAnswer};
use tpoint_core::PointRelation;

use crate::answer::{parse_answer_with_triggers, parse_relation};
use crate::error::{LlmError, Result};
use crate::template::{self, render, render_with_relations, PromptTemplate};
use crate::transport::{ChatMessage, Transport, TransportRequest};

/// One event pair in context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub text: String,
    pub event_1: String,
    pub event_2: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

pub fn parse_instances(text: &str) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        out.push(serde_json::from_str(line)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: crate::transport::DEFAULT_MODEL.into(),
            temperature: 0.0,
            max_tokens: 16,
        }
    }
}

impl RunConfig {
    fn request(&self, prompt: &str) -> TransportRequest {
        TransportRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub prompt_name: String,
    pub prompt: String,
    pub response: String,
    pub answer: LlmAnswer,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UnifiedTrace {
    pub steps: Vec<TraceStep>,
    pub start: Option<PointRelation>,
    pub end: Option<PointRelation>,
    pub relation: Option<String>,
}

impl UnifiedTrace {
    /// Parsed answers in prompt order.
    pub fn answers(&self) -> Vec<LlmAnswer> {
        self.steps.iter().map(|s| s.answer).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedRun {
    pub relation: String,
    pub trace: UnifiedTrace,
}

/// A failed run with whatever steps completed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct UnifiedError {
    pub error: LlmError,
    pub trace: UnifiedTrace,
}

/// Ask the four time-point questions and combine the answers.
pub fn run_unified(text: &str, e1: &str, e2: &str, transport: &dyn Transport, cfg: &RunConfig) -> Result<UnifiedRun, UnifiedError> {
    run_unified_with(&template::unified_prompts(), text, e1, e2, transport, cfg)
}

pub fn run_unified_with(
    prompts: &[PromptTemplate; 4],
    text: &str,
    e1: &str,
    e2: &str,
    transport: &dyn Transport,
    cfg: &RunConfig,
) -> Result<UnifiedRun, UnifiedError> {
    let mut trace = UnifiedTrace::default();
    for t in prompts {
        let prompt = match render(t, text, e1, e2) {
            Ok(p) => p,
            Err(error) => return Err(UnifiedError { error, trace }),
        };
        let response = match transport.complete(&cfg.request(&prompt)) {
            Ok(r) => r.text,
            Err(e) => {
                return Err(UnifiedError {
                    error: e.into(),
                    trace,
                })
            }
        };
        let answer = parse_answer_with_triggers(&response, Some(e1), Some(e2));
        trace.steps.push(TraceStep {
            prompt_name: t.name.clone(),
            prompt,
            response,
            answer,
        });
    }
    let a = trace.answers();
    let start = point_relation_from_answers(a[0], a[1]);
    let end = point_relation_from_answers(a[2], a[3]);
    let relation = aggregate_llm_answers((a[0], a[1]), (a[2], a[3]));
    debug_assert_eq!(relation, relation_from_start_end(start, end));
    trace.start = Some(start);
    trace.end = Some(end);
    trace.relation = Some(relation.to_string());
    Ok(UnifiedRun {
        relation: relation.to_string(),
        trace,
    })
}

/// How the candidate relations are listed in a classification prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrder {
    /// A fresh order per instance, seeded from the instance id.
    Random,
    BeforeFirst,
    BeforeLast,
}

impl std::str::FromStr for CandidateOrder {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(CandidateOrder::Random),
            "before_first" | "before-first" => Ok(CandidateOrder::BeforeFirst),
            "before_last" | "before-last" => Ok(CandidateOrder::BeforeLast),
            other => Err(LlmError::Config(format!("unknown candidate order `{other}`"))),
        }
    }
}

fn id_seed(id: &str, seed: u64) -> u64 {
    let h = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("digest is 32 bytes")) ^ seed
}

/// `relations` rearranged per `order`; `Before` (if present) moves to the
/// front or back, the rest keep their relative order.
pub fn order_candidates(relations: &[String], order: CandidateOrder, id: &str, seed: u64) -> Vec<String> {
    let mut out = relations.to_vec();
    match order {
        CandidateOrder::Random => out.shuffle(&mut ChaCha8Rng::seed_from_u64(id_seed(id, seed))),
        CandidateOrder::BeforeFirst | CandidateOrder::BeforeLast => {
            if let Some(i) = out.iter().position(|r| r == "Before") {
                let b = out.remove(i);
                if order == CandidateOrder::BeforeFirst {
                    out.insert(0, b);
                } else {
                    out.push(b);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationConfig {
    pub order: CandidateOrder,
    pub chain_of_thought: bool,
    /// Samples for self-consistency; 1 disables voting.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            order: CandidateOrder::Random,
            chain_of_thought: false,
            samples: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRun {
    pub relation: String,
    pub prompt: String,
    pub responses: Vec<String>,
    pub votes: Vec<String>,
}

/// Samples drawn when self-consistency is switched on without a count.
pub const SELF_CONSISTENCY_SAMPLES: usize = 5;

/// Majority label; a tie for first place (or no votes) gives `vague`.
pub fn majority_vote(votes: &[String], vague: &str) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    let winners: Vec<&str> = counts.iter().filter(|(_, &c)| c == best).map(|(k, _)| *k).collect();
    match winners.as_slice() {
        [only] => only.to_string(),
        _ => vague.to_string(),
    }
}

/// Ask for the relation directly, listing `relations` as candidates.
/// Unparseable answers count as `vague`.
pub fn run_classification(
    inst: &Instance,
    relations: &[String],
    vague: &str,
    transport: &dyn Transport,
    run: &RunConfig,
    cfg: &ClassificationConfig,
) -> Result<ClassificationRun> {
    let listed = order_candidates(relations, cfg.order, &inst.id, cfg.seed);
    let t = if cfg.chain_of_thought {
        template::classification_cot(relations)
    } else {
        template::classification(relations)
    };
    let prompt = render_with_relations(&t, &inst.text, &inst.event_1, &inst.event_2, &listed)?;
    let samples = cfg.samples.max(1);
    let mut req = run.request(&prompt);
    if samples > 1 && req.temperature == 0.0 {
        log::warn!("self-consistency with temperature 0 repeats one sample");
    }
    let mut responses = Vec::with_capacity(samples);
    let mut votes = Vec::with_capacity(samples);
    for k in 0..samples {
        // Distinct requests per sample keep cache entries apart.
        if samples > 1 {
            req.messages = vec![ChatMessage::user(&prompt), ChatMessage {
                role: "system".into(),
                content: format!("sample {k}"),
            }];
        }
        let text = transport.complete(&req)?.text;
        votes.push(parse_relation(&text, relations).unwrap_or_else(|| vague.to_string()));
        responses.push(text);
    }
    Ok(ClassificationRun {
        relation: majority_vote(&votes, vague),
        prompt,
        responses,
        votes,
    })
}

/// `f` over every instance with at most `concurrency` in flight; results in
/// input order.
pub fn for_each_bounded<T, F>(instances: &[Instance], concurrency: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&Instance) -> T + Sync,
{
    let workers = concurrency.max(1).min(instances.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..instances.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(inst) = instances.get(i) else { break };
                let out = f(inst);
                slots.lock().expect("result slots")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|s| s.expect("every instance is processed"))
        .collect()
}

/// Unified runs over a batch.
pub fn run_unified_batch(
    instances: &[Instance],
    transport: &dyn Transport,
    cfg: &RunConfig,
    concurrency: usize,
) -> Vec<Result<UnifiedRun, UnifiedError>> {
    for_each_bounded(instances, concurrency, |inst| {
        run_unified(&inst.text, &inst.event_1, &inst.event_2, transport, cfg)
    })
}

/// One line of a relation output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationLine {
    pub id: String,
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Relation file contents: one JSON line per instance, failures recorded as
/// `Vague` with their error.
pub fn relation_lines(instances: &[Instance], results: &[Result<UnifiedRun, UnifiedError>], vague: &str) -> String {
    let mut out = String::new();
    for (inst, r) in instances.iter().zip(results) {
        let line = match r {
            Ok(run) => RelationLine {
                id: inst.id.clone(),
                relation: run.relation.clone(),
                error: None,
            },
            Err(e) => RelationLine {
                id: inst.id.clone(),
                relation: vague.to_string(),
                error: Some(e.to_string()),
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("lines serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{MockScript, MockTransport};

    const TEXT: &str = "The storm hit after the warning was issued.";

    fn script(answers: [&str; 4]) -> MockTransport {
        let q = ["starts first", "starts later", "ends first", "ends later"];
        let rules = q
            .iter()
            .zip(answers)
            .map(|(q, a)| crate::transport::MockRule {
                contains: vec![q.to_string()],
                response: Some(a.to_string()),
                fail: None,
            })
            .collect();
        MockTransport::new(MockScript { rules, default: None })
    }

    #[test]
    fn before_from_consistent_answers() {
        let m = script(["event_1", "event_2", "event_1", "event_2"]);
        let run = run_unified(TEXT, "hit", "issued", &m, &RunConfig::default()).unwrap();
        assert_eq!(run.relation, "Before");
        assert_eq!(run.trace.start, Some(PointRelation::Before));
        assert_eq!(run.trace.steps.len(), 4);
        assert!(run.trace.steps[0].prompt.contains("###hit"));
    }

    #[test]
    fn unsure_everywhere_is_vague() {
        let m = MockTransport::constant("unsure");
        let run = run_unified(TEXT, "hit", "issued", &m, &RunConfig::default()).unwrap();
        assert_eq!(run.relation, "Vague");
    }

    #[test]
    fn failure_keeps_partial_trace() {
        let m = MockTransport::new(MockScript {
            rules: vec![crate::transport::MockRule {
                contains: vec!["ends first".into()],
                response: None,
                fail: Some("endpoint down".into()),
            }],
            default: Some("event_1".into()),
        });
        let err = run_unified(TEXT, "hit", "issued", &m, &RunConfig::default()).unwrap_err();
        assert_eq!(err.trace.steps.len(), 2);
        assert_eq!(err.trace.steps[1].prompt_name, "prompt2");
        assert!(matches!(err.error, LlmError::Transport(_)));
        assert!(err.trace.relation.is_none());
    }

    #[test]
    fn votes() {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(majority_vote(&v(&["Before", "After", "Before"]), "Vague"), "Before");
        assert_eq!(majority_vote(&v(&["Before", "After"]), "Vague"), "Vague");
        assert_eq!(majority_vote(&[], "Vague"), "Vague");
    }

    #[test]
    fn candidate_orders() {
        let r: Vec<String> = ["After", "Before", "Vague"].iter().map(|s| s.to_string()).collect();
        assert_eq!(order_candidates(&r, CandidateOrder::BeforeFirst, "a", 0), ["Before", "After", "Vague"]);
        assert_eq!(order_candidates(&r, CandidateOrder::BeforeLast, "a", 0), ["After", "Vague", "Before"]);
        let a = order_candidates(&r, CandidateOrder::Random, "a", 0);
        assert_eq!(a, order_candidates(&r, CandidateOrder::Random, "a", 0));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, ["After", "Before", "Vague"]);
    }

    #[test]
    fn bounded_batch_keeps_order() {
        let insts: Vec<Instance> = (0..20)
            .map(|i| Instance {
                id: format!("i{i}"),
                text: TEXT.into(),
                event_1: "hit".into(),
                event_2: "issued".into(),
                gold: None,
            })
            .collect();
        let ids = for_each_bounded(&insts, 4, |i| i.id.clone());
        assert_eq!(ids, insts.iter().map(|i| i.id.clone()).collect::<Vec<_>>());
    }
}
