//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tpoint_core::dataio::{read_pairs, read_predictions, symmetry_augment, write_pairs};
use tpoint_core::inference::{aggregate_llm_answers, mapping1, map_labels, point_relation_from_answers, relation_from_start_end, LlmAnswer, QuestionInput};
use tpoint_core::learner::{
    backward, forward, loss, predict_labels, synth_generate, train, Activation, LossConfig, SorterParams, TrainConfig,
};
use tpoint_core::logic::{eval_soft, grad_soft, NUM_ATOMS};
use tpoint_core::metrics::{error_breakdown, micro_f1_excluding_vague, ConfusionMatrix};
use tpoint_core::point::{answers_to_relation, enumerate_consistent_configurations, relation_to_answers};
use tpoint_core::schema::{project, validate};
use tpoint_core::{
    builtin, convert, predict, transfer_decode, Assignment, ConsistencyMode, PointRelation, QVector, QuestionAnswers,
    Semantics, ValidationDomain,
};
use tpoint_llm::run::{parse_instances, relation_lines, run_unified_batch};
use tpoint_llm::{MockScript, MockTransport, RunConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn llm_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../llm/tests/fixtures").join(name)
}

fn consistent() -> Vec<tpoint_core::PointConfiguration> {
    enumerate_consistent_configurations(ConsistencyMode::Satisfiable)
}

fn a1_schema_soundness() -> Check {
    for s in builtin::all() {
        let r = validate(s, ValidationDomain::ConsistentOnly);
        ensure(r.is_ok(), format!("{} on consistent domain: {}", s.name(), r.summary()))?;
    }
    let r = validate(builtin::matres(), ValidationDomain::All256);
    ensure(r.is_ok() && r.domain_size == 256, format!("matres on all assignments: {}", r.summary()))?;
    for (name, domain) in [("allen13", "consistent"), ("tbdense", "consistent"), ("matres", "consistent"), ("matres", "all")] {
        let out = Command::new(env!("CARGO_BIN_EXE_tpoint"))
            .args(["validate-schema", name, "--domain", domain])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.code() == Some(0), format!("validate-schema {name} --domain {domain} exited {:?}", out.status.code()))?;
    }
    Ok("3 schemas on consistent domain, matres on 256".into())
}

fn a2_question_table() -> Check {
    use PointRelation::*;
    let rows = [((true, false), Before), ((false, true), After), ((false, false), Equal), ((true, true), Vague)];
    for ((q1, q2), z) in rows {
        let a = QuestionAnswers::new(q1, q2);
        ensure(answers_to_relation(a) == z, format!("({q1},{q2}) gave {:?}", answers_to_relation(a)))?;
        ensure(relation_to_answers(z) == a, format!("{z:?} did not map back"))?;
    }
    Ok("4 rows, bijection holds".into())
}

fn a3_hard_soft_agreement() -> Check {
    let mut n = 0;
    for s in builtin::all() {
        for m in Assignment::all() {
            let soft = predict(&QVector::from(m), s, Semantics::Product);
            let hard = convert(m, s).relation;
            ensure(soft == hard, format!("{} at {m:?}: soft {soft} vs hard {hard}", s.name()))?;
            n += 1;
        }
    }
    Ok(format!("{n} cases"))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn central<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    const H: f64 = 1e-5;
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += H;
            lo[i] -= H;
            (f(&hi) - f(&lo)) / (2.0 * H)
        })
        .collect()
}

fn a4_gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_soft = 0.0f64;
    let mut soft_n = 0;
    for _ in 0..8 {
        let q: Vec<f64> = (0..NUM_ATOMS).map(|_| rng.random_range(0.05..0.95)).collect();
        for s in builtin::all() {
            for e in &s.compiled().exprs {
                let (_, g) = grad_soft(e, &QVector::from_slice(&q).unwrap());
                let n = central(|x| eval_soft(e, &QVector::from_slice(x).unwrap()), &q);
                worst_soft = worst_soft.max(rel_err(&g, &n));
                soft_n += 1;
            }
        }
    }
    ensure(worst_soft <= 1e-5, format!("grad_soft rel err {worst_soft:e}"))?;

    let mut worst_bw = 0.0f64;
    let mut bw_n = 0;
    for seed in 0..24u64 {
        let s = builtin::all()[seed as usize % 3];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h, tau) = (6, 4, rng.random_range(0.5..3.0));
        let params = SorterParams::random(d, h, Activation::Tanh, &mut rng);
        let flat = params.to_flat().iter().map(|v| v * 3.0).collect::<Vec<_>>();
        let mut params = params;
        params.set_flat(&flat);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gold = &s.relation_names()[rng.random_range(0..s.relation_names().len())];
        let cfg = LossConfig::default();
        let (_, g) = backward(&x, &params, tau, gold, s, &cfg).map_err(|e| e.to_string())?;
        let n = central(
            |w| {
                let mut p = params.clone();
                p.set_flat(w);
                loss(&forward(&x, &p, tau).unwrap(), gold, s, &cfg).unwrap()
            },
            &flat,
        );
        worst_bw = worst_bw.max(rel_err(&g.to_flat(), &n));
        bw_n += 1;
    }
    ensure(worst_bw <= 1e-4, format!("backward rel err {worst_bw:e}"))?;
    Ok(format!(
        "grad_soft {soft_n} cases max {worst_soft:.1e}; backward {bw_n} instances max {worst_bw:.1e}"
    ))
}

fn a5_learning() -> Check {
    let s = builtin::tbdense();
    let data = synth_generate(2000, 16, 0.05, 13, s);
    let (tr, te) = data.split_at(1600);
    let cfg = TrainConfig::default();
    let first = train(tr, s, &cfg).map_err(|e| e.to_string())?;
    let second = train(tr, s, &cfg).map_err(|e| e.to_string())?;
    ensure(first.params.to_flat() == second.params.to_flat(), "two runs with one seed differ")?;
    let pred = predict_labels(&first.params, te, s, cfg.tau, cfg.semantics).map_err(|e| e.to_string())?;
    let gold: Vec<&str> = te.iter().map(|e| e.gold.as_str()).collect();
    let f1 = micro_f1_excluding_vague(&gold, &pred, s.vague_name()).map_err(|e| e.to_string())?.f1;
    ensure(f1 >= 0.95, format!("held-out micro-F1 {f1:.4} < 0.95"))?;
    Ok(format!("held-out micro-F1 {f1:.4}, deterministic"))
}

fn a6_symmetry() -> Check {
    let mut n = 0;
    for s in builtin::all() {
        for c in consistent() {
            let orig = project(&c, s);
            let swapped = project(&c.swap_events(), s);
            let expected = s.symmetric(orig).map_err(|e| e.to_string())?;
            ensure(swapped == expected, format!("{}: {orig} swapped to {swapped}, expected {expected}", s.name()))?;
            n += 1;
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = builtin::tbdense();
    let original = read_pairs(fixture("tbdense_configs.jsonl"), s).map_err(|e| e.to_string())?;
    let augmented = symmetry_augment(&original, s).map_err(|e| e.to_string())?;
    let out = dir.path().join("aug.jsonl");
    write_pairs(&out, &augmented).map_err(|e| e.to_string())?;
    let reread = read_pairs(&out, s).map_err(|e| e.to_string())?;
    ensure(reread.len() == 2 * original.len(), format!("{} records became {}", original.len(), reread.len()))?;
    for r in &reread {
        let c = r.config.ok_or("augmented record lost its configuration")?;
        ensure(project(&c, s) == r.gold, format!("record {} gold {} disagrees with its configuration", r.id, r.gold))?;
    }
    Ok(format!("{n} projections; fixture {} -> {} records", original.len(), reread.len()))
}

fn a7_transfer() -> Check {
    let matres = builtin::matres();
    for c in consistent() {
        let m = Assignment::from_configuration(&c);
        let want = project(&c, matres);
        for input in [QuestionInput::Answers(m), QuestionInput::Probabilities(QVector::from(m))] {
            let got = transfer_decode(&input, matres, Semantics::Product);
            ensure(got == want, format!("{c:?}: decoded {got}, projection {want}"))?;
        }
    }
    let tb = builtin::tbdense();
    let mut agree = 0;
    // Vague points must admit both orders, otherwise the sorter's Vague is
    // less informative than the interval relation it sits in.
    for c in enumerate_consistent_configurations(ConsistencyMode::RealizableVague) {
        let src = project(&c, tb);
        let decoded = transfer_decode(&QuestionInput::Answers(Assignment::from_configuration(&c)), matres, Semantics::Product);
        let mapped = map_labels(src, mapping1()).map_err(|e| e.to_string())?;
        match src {
            "Before" | "After" | "Simultaneous" => {
                ensure(mapped == decoded, format!("{c:?}: mapping1 {mapped} vs point transfer {decoded}"))?;
                agree += 1;
            }
            "Includes" | "Is_Included" => ensure(mapped == "Vague", format!("mapping1 sent {src} to {mapped}"))?,
            _ => {}
        }
    }
    let configs = read_pairs(fixture("includes_configs.jsonl"), builtin::tbdense()).map_err(|e| e.to_string())?;
    let qs = read_predictions(fixture("includes_q.jsonl")).map_err(|e| e.to_string())?;
    ensure(!configs.is_empty() && configs.len() == qs.len(), "Includes fixture is empty or misaligned")?;
    for (r, p) in configs.iter().zip(&qs) {
        ensure(r.gold == "Includes", format!("fixture record {} is {}", r.id, r.gold))?;
        ensure(map_labels(&r.gold, mapping1()).map_err(|e| e.to_string())? == "Vague", "mapping1 kept Includes")?;
        let q = QVector::from_slice(p.q.as_deref().unwrap()).map_err(|e| e.to_string())?;
        let got = transfer_decode(&QuestionInput::Probabilities(q), matres, Semantics::Product);
        let want = project(&r.config.unwrap(), matres);
        ensure(got == want, format!("{}: point transfer {got}, MATRES projection {want}", r.id))?;
    }
    Ok(format!(
        "{} configurations; mapping1 agrees on {agree} Before/After/Simultaneous; {} Includes fixtures",
        consistent().len(),
        configs.len()
    ))
}

fn a8_metrics() -> Check {
    let gold = ["B", "B", "A", "V"];
    let pred = ["B", "A", "A", "B"];
    let m = micro_f1_excluding_vague(&gold, &pred, "V").map_err(|e| e.to_string())?;
    ensure((m.precision - 0.5).abs() <= 1e-4, format!("P {}", m.precision))?;
    ensure((m.recall - 2.0 / 3.0).abs() <= 1e-4, format!("R {}", m.recall))?;
    ensure((m.f1 - 0.5714).abs() <= 1e-4, format!("F1 {}", m.f1))?;

    let labels: Vec<String> = ["B", "A", "I", "V"].iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for trial in 0..1000 {
        let n = rng.random_range(1..60);
        let g: Vec<&str> = (0..n).map(|_| labels[rng.random_range(0..4)].as_str()).collect();
        let p: Vec<&str> = (0..n).map(|_| labels[rng.random_range(0..4)].as_str()).collect();
        let split = error_breakdown(&g, &p, "V").map_err(|e| e.to_string())?;
        let cm = ConfusionMatrix::new(&g, &p, &labels).map_err(|e| e.to_string())?;
        let gold_non_vague = g.iter().filter(|x| **x != "V").count();
        ensure(
            split.to_vague + split.not_vague + cm.trace_excluding("V") == gold_non_vague,
            format!("trial {trial}: totals do not reconcile"),
        )?;
        ensure(split.to_vague == cm.column_sum("V") - cm.get("V", "V"), format!("trial {trial}: to_vague mismatch"))?;
    }
    Ok(format!("P={:.4} R={:.4} F1={:.4}; 1000 trials reconcile", m.precision, m.recall, m.f1))
}

fn a9_llm_aggregation() -> Check {
    use LlmAnswer::*;
    use PointRelation as Z;
    let answer_pair = |a: LlmAnswer, b: LlmAnswer| match (a, b) {
        (Event1, Event2) | (Event1, Other) | (Other, Event2) => Z::Before,
        (Event2, Event1) | (Other, Event1) | (Event2, Other) => Z::After,
        _ => Z::Vague,
    };
    let start_end = |s: Z, e: Z| match (s, e) {
        (Z::Before, Z::Before) => "Before",
        (Z::After, Z::After) => "After",
        (Z::Before, Z::After) => "Includes",
        (Z::After, Z::Before) => "Is_Included",
        _ => "Vague",
    };
    for a in LlmAnswer::ALL {
        for b in LlmAnswer::ALL {
            ensure(point_relation_from_answers(a, b) == answer_pair(a, b), format!("answer pair ({a:?},{b:?})"))?;
        }
    }
    let zs = [Z::Before, Z::After, Z::Equal, Z::Vague];
    for s in zs {
        for e in zs {
            ensure(relation_from_start_end(s, e) == start_end(s, e), format!("start/end pair ({s:?},{e:?})"))?;
        }
    }
    let mut combos = 0;
    for a in LlmAnswer::ALL {
        for b in LlmAnswer::ALL {
            for c in LlmAnswer::ALL {
                for d in LlmAnswer::ALL {
                    let want = start_end(answer_pair(a, b), answer_pair(c, d));
                    ensure(aggregate_llm_answers((a, b), (c, d)) == want, format!("({a:?},{b:?},{c:?},{d:?})"))?;
                    combos += 1;
                }
            }
        }
    }
    let instances = parse_instances(&std::fs::read_to_string(llm_fixture("instances.jsonl")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mock = MockTransport::new(MockScript::read(llm_fixture("script.json")).map_err(|e| e.to_string())?);
    let results = run_unified_batch(&instances, &mock, &RunConfig::default(), 2);
    let got = relation_lines(&instances, &results, "Vague");
    let pinned = std::fs::read_to_string(llm_fixture("expected_relations.jsonl")).map_err(|e| e.to_string())?;
    ensure(got == pinned, "scripted run differs from the pinned relation file")?;
    Ok(format!("9 answer pairs, 16 start/end pairs, {combos} combinations, pinned file matches"))
}

fn main() {
    // A5's budget is for one core.
    std::env::set_var("RAYON_NUM_THREADS", "1");
    let criteria: [(&str, fn() -> Check, Option<Duration>); 9] = [
        ("A1 schema soundness", a1_schema_soundness, Some(Duration::from_secs(1))),
        ("A2 question table", a2_question_table, None),
        ("A3 hard/soft agreement", a3_hard_soft_agreement, Some(Duration::from_secs(1))),
        ("A4 gradient correctness", a4_gradients, Some(Duration::from_secs(5))),
        ("A5 desk-scale learning", a5_learning, Some(Duration::from_secs(60))),
        ("A6 symmetry", a6_symmetry, None),
        ("A7 transfer", a7_transfer, None),
        ("A8 metrics oracle", a8_metrics, None),
        ("A9 llm aggregation", a9_llm_aggregation, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let t = Instant::now();
        let result = check();
        let elapsed = t.elapsed();
        let over = budget.filter(|b| elapsed > *b);
        let (status, detail) = match (&result, over) {
            (Ok(d), None) => ("PASS", d.clone()),
            (Ok(d), Some(b)) => ("FAIL", format!("{d}; took longer than {b:?}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {name:<26} {:>9.3}s  {detail}", elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
