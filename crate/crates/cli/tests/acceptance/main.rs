//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p guardgate-cli --test acceptance -- --nocapture`.

mod oracles;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use guardgate_cli::server::{spawn_ephemeral, ServerConfig};
use guardgate_core::backend::{BackendDescriptor, FilterRole};
use guardgate_core::curation::mocks::{
    semantically_equal, InvertingRefiner, MockLabeler, NegatingTranslator, StripHarmDetoxer,
    TemplateBlender,
};
use guardgate_core::curation::{
    blend, detox, relabel_filter, translate_refined, Clock, CurationLog,
};
use guardgate_core::curriculum::synth::{generate_boundary_corpus, SynthSpec};
use guardgate_core::curriculum::toy::ToyModel;
use guardgate_core::curriculum::{
    first_phase_train, noise_injection, run_curriculum, train_with_priority_switching,
    CurriculumConfig, Priority, PriorityPrompts, TrainRow, TrainableModel,
};
use guardgate_core::eval::redteam::{
    generate_redteam, run_redteam, AttackType, TemplateLibrary,
};
use guardgate_core::eval::{
    load_dataset, run_benchmark, BenchmarkOptions, EvalMode, GuardSubject, HttpGuardClient,
    LabeledExample,
};
use guardgate_core::gateway::{
    compose_decision, Action, FailurePolicy, FilterKind, FilterOutcome, GateConfig, GateDecision,
    GatewayError, Guard, GuardService,
};
use guardgate_core::metrics::{auprc, confusion, fnr, fpr, pauroc_normalized, ScoredSample};
use guardgate_core::taxonomy::{
    decode_verdict, encode_verdict, parse_label_tokens, ContentVerdict, JailbreakVerdict,
    LabelToken, Polarity, SafetyCategory, Thresholds, TokenStreamError,
};

fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(path)
}

fn report(number: u32, name: &str, ok: bool, detail: &str) {
    println!("[acceptance] C{number:02} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion C{number:02} {name} failed: {detail}");
}

// ---------------------------------------------------------------------------
// C1 — metric oracle equivalence
// ---------------------------------------------------------------------------

fn random_scored_dataset(rng: &mut ChaCha8Rng) -> Vec<ScoredSample> {
    let n = rng.random_range(5..=198);
    let mut samples: Vec<ScoredSample> = (0..n)
        .map(|_| {
            // Lattice scores guarantee heavy ties.
            let score = rng.random_range(0..=24) as f64 / 8.0;
            let gold = if rng.random_bool(0.4) { Polarity::Unsafe } else { Polarity::Safe };
            ScoredSample::new(score, gold)
        })
        .collect();
    // Force both classes present so both metrics are defined.
    samples.push(ScoredSample::new(rng.random_range(0..=24) as f64 / 8.0, Polarity::Unsafe));
    samples.push(ScoredSample::new(rng.random_range(0..=24) as f64 / 8.0, Polarity::Safe));
    samples
}

#[test]
fn c01_metric_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
    let mut max_delta = 0.0f64;
    for _ in 0..100 {
        let samples = random_scored_dataset(&mut rng);
        let ap = auprc(&samples).unwrap();
        let ap_oracle = oracles::auprc_bruteforce(&samples);
        max_delta = max_delta.max((ap - ap_oracle).abs());
        for cut in [0.1, 1.0] {
            let pa = pauroc_normalized(&samples, cut).unwrap();
            let pa_oracle = oracles::pauroc_bruteforce(&samples, cut);
            max_delta = max_delta.max((pa - pa_oracle).abs());
        }
    }
    let elapsed = start.elapsed();
    let ok = max_delta <= 1e-9 && elapsed < Duration::from_secs(10);
    report(
        1,
        "metric-oracle-equivalence",
        ok,
        &format!("100 datasets, max |delta| = {max_delta:.2e}, {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// C2 — pAUROC analytic anchors
// ---------------------------------------------------------------------------

#[test]
fn c02_pauroc_analytic_anchors() {
    // Diagonal ROC: every score tied.
    let diagonal: Vec<ScoredSample> = (0..40)
        .map(|i| ScoredSample::new(0.5, if i % 2 == 0 { Polarity::Unsafe } else { Polarity::Safe }))
        .collect();
    let diag = pauroc_normalized(&diagonal, 0.1).unwrap();

    // Perfect classifier: positives strictly above negatives.
    let mut perfect = Vec::new();
    for i in 0..20 {
        perfect.push(ScoredSample::new(0.9 + (i as f64) * 1e-3, Polarity::Unsafe));
        perfect.push(ScoredSample::new(0.1 - (i as f64) * 1e-3, Polarity::Safe));
    }
    let perf = pauroc_normalized(&perfect, 0.1).unwrap();

    let ok = (diag - 0.05).abs() <= 1e-12 && perf == 1.0;
    report(2, "pauroc-analytic-anchors", ok, &format!("diagonal = {diag:.15}, perfect = {perf}"));
}

// ---------------------------------------------------------------------------
// C3 — noise-injection exactness over 1000 seeds
// ---------------------------------------------------------------------------

fn noise_fixture() -> Vec<LabeledExample> {
    let mut out = Vec::new();
    for i in 0..100 {
        for (prefix, gold) in [("u", Polarity::Unsafe), ("b", Polarity::Safe)] {
            out.push(LabeledExample {
                id: format!("{prefix}{i:03}"),
                language: "en".into(),
                prompt: format!("{prefix} prompt {i}"),
                response: None,
                gold,
                category: None,
                source: "fixture".into(),
                split: "train".into(),
            });
        }
    }
    out
}

#[test]
fn c03_noise_injection_exactness() {
    let dataset = noise_fixture();
    let mut help_sets: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut ok = true;
    let mut detail = String::new();
    for seed in 0..1000u64 {
        for (priority, expect_unsafe, expect_benign) in
            [(Priority::Help, 10, 2), (Priority::Safe, 2, 10)]
        {
            let noisy = noise_injection(&dataset, priority, 0.1, 0.02, seed).unwrap();
            let unsafe_flips = noisy
                .examples
                .iter()
                .zip(&dataset)
                .filter(|(n, o)| o.gold.is_unsafe() && n.gold != o.gold)
                .count();
            let benign_flips = noisy
                .examples
                .iter()
                .zip(&dataset)
                .filter(|(n, o)| !o.gold.is_unsafe() && n.gold != o.gold)
                .count();
            if (unsafe_flips, benign_flips) != (expect_unsafe, expect_benign) {
                ok = false;
                detail = format!(
                    "seed {seed} {priority:?}: got ({unsafe_flips}, {benign_flips}), want ({expect_unsafe}, {expect_benign})"
                );
            }
            if priority == Priority::Help {
                help_sets.insert(noisy.flipped_ids);
            }
        }
    }
    let distinct = help_sets.len();
    if distinct < 990 {
        ok = false;
        detail = format!("only {distinct}/1000 distinct flip sets");
    }
    if detail.is_empty() {
        detail = format!("1000 seeds exact, {distinct}/1000 distinct flip sets");
    }
    report(3, "noise-injection-exactness", ok, &detail);
}

// ---------------------------------------------------------------------------
// C4 — priority-schedule conformance
// ---------------------------------------------------------------------------

#[test]
fn c04_priority_schedule_conformance() {
    let corpus = generate_boundary_corpus(5, &SynthSpec {
        first_phase_size: 0,
        curated_size: 60,
        eval_size: 0,
        ..SynthSpec::default()
    });
    let mut ok = true;
    let mut detail = String::new();
    for k in 1..=6usize {
        let mut model = ToyModel::new(1 << 10);
        let mut cfg = CurriculumConfig::new(k, 40 + k as u64);
        cfg.learning_rate = 1.0;
        let run = train_with_priority_switching(
            &corpus.curated,
            &mut model,
            &PriorityPrompts::default(),
            &cfg,
        )
        .unwrap();
        let logged: Vec<Priority> = run.epoch_log.iter().map(|e| e.priority).collect();
        let expected: Vec<Priority> = (0..k)
            .map(|i| if i % 2 == 0 { Priority::Help } else { Priority::Safe })
            .collect();
        if logged != expected {
            ok = false;
            detail = format!("K={k}: logged {logged:?}");
        }
    }
    if detail.is_empty() {
        detail = "K in 1..=6 alternates [Help, Safe, ...]".to_string();
    }
    report(4, "priority-schedule-conformance", ok, &detail);
}

// ---------------------------------------------------------------------------
// C5 — curriculum-benefit property
// ---------------------------------------------------------------------------

fn operating_point(model: &ToyModel, eval: &[LabeledExample]) -> (f64, f64) {
    let preds: Vec<Polarity> = eval.iter().map(|e| model.predict(&e.prompt).0).collect();
    let golds: Vec<Polarity> = eval.iter().map(|e| e.gold).collect();
    let c = confusion(&preds, &golds).unwrap();
    (fnr(&c), fpr(&c))
}

#[test]
fn c05_curriculum_benefit() {
    let start = Instant::now();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let corpus = generate_boundary_corpus(seed, &SynthSpec::default());
        let mut model = ToyModel::new(1 << 14);
        first_phase_train(&corpus.first_phase, &mut model, 6.0).unwrap();
        let (fnr1, fpr1) = operating_point(&model, &corpus.eval);

        let mut cfg = CurriculumConfig::new(4, seed);
        cfg.learning_rate = 3.0;
        run_curriculum(&corpus.curated, &mut model, &PriorityPrompts::default(), &cfg).unwrap();
        let (fnr2, fpr2) = operating_point(&model, &corpus.eval);

        if fnr2 <= fnr1 && (fpr1 - fpr2) >= 0.02 {
            wins += 1;
        }
        lines.push(format!("seed {seed}: ({fnr1:.3},{fpr1:.3})->({fnr2:.3},{fpr2:.3})"));
    }
    let elapsed = start.elapsed();
    let ok = wins >= 8 && elapsed < Duration::from_secs(120);
    report(
        5,
        "curriculum-benefit",
        ok,
        &format!("{wins}/10 seeds improved, {elapsed:.2?}; {}", lines.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// C6 — decision truth table
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
enum S {
    Safe,
    Unsafe,
    Failed,
}

fn content_outcome(state: S) -> FilterOutcome<ContentVerdict> {
    match state {
        S::Safe => FilterOutcome::Verdict(ContentVerdict::from_confidences([0.1; 5])),
        S::Unsafe => {
            FilterOutcome::Verdict(ContentVerdict::from_confidences([0.1, 0.1, 0.8, 0.1, 0.1]))
        }
        S::Failed => FilterOutcome::Failed("injected".into()),
    }
}

fn jailbreak_outcome(state: S) -> FilterOutcome<JailbreakVerdict> {
    match state {
        S::Safe => FilterOutcome::Verdict(JailbreakVerdict::new(Polarity::Safe, 0.1)),
        S::Unsafe => FilterOutcome::Verdict(JailbreakVerdict::new(Polarity::Unsafe, 0.9)),
        S::Failed => FilterOutcome::Failed("injected".into()),
    }
}

/// One oracle row: (content, jailbreak, policy) -> expected outcome, where
/// `None` is the no-verdict error.
type TruthRow = (S, S, FailurePolicy, Option<(Action, Vec<FilterKind>)>);

#[test]
fn c06_decision_truth_table() {
    use FilterKind::{Content as C, Jailbreak as J};
    let table: Vec<TruthRow> = vec![
        (S::Safe, S::Safe, FailurePolicy::FailOpen, Some((Action::Allow, vec![]))),
        (S::Safe, S::Unsafe, FailurePolicy::FailOpen, Some((Action::Block, vec![J]))),
        (S::Safe, S::Failed, FailurePolicy::FailOpen, Some((Action::Allow, vec![]))),
        (S::Unsafe, S::Safe, FailurePolicy::FailOpen, Some((Action::Block, vec![C]))),
        (S::Unsafe, S::Unsafe, FailurePolicy::FailOpen, Some((Action::Block, vec![C, J]))),
        (S::Unsafe, S::Failed, FailurePolicy::FailOpen, Some((Action::Block, vec![C]))),
        (S::Failed, S::Safe, FailurePolicy::FailOpen, Some((Action::Allow, vec![]))),
        (S::Failed, S::Unsafe, FailurePolicy::FailOpen, Some((Action::Block, vec![J]))),
        (S::Failed, S::Failed, FailurePolicy::FailOpen, None),
        (S::Safe, S::Safe, FailurePolicy::FailClosed, Some((Action::Allow, vec![]))),
        (S::Safe, S::Unsafe, FailurePolicy::FailClosed, Some((Action::Block, vec![J]))),
        (S::Safe, S::Failed, FailurePolicy::FailClosed, Some((Action::Block, vec![J]))),
        (S::Unsafe, S::Safe, FailurePolicy::FailClosed, Some((Action::Block, vec![C]))),
        (S::Unsafe, S::Unsafe, FailurePolicy::FailClosed, Some((Action::Block, vec![C, J]))),
        (S::Unsafe, S::Failed, FailurePolicy::FailClosed, Some((Action::Block, vec![C, J]))),
        (S::Failed, S::Safe, FailurePolicy::FailClosed, Some((Action::Block, vec![C]))),
        (S::Failed, S::Unsafe, FailurePolicy::FailClosed, Some((Action::Block, vec![C, J]))),
        (S::Failed, S::Failed, FailurePolicy::FailClosed, Some((Action::Block, vec![C, J]))),
    ];
    assert_eq!(table.len(), 18);

    let rules = fixture("rules/gateway.json");
    let base = GateConfig {
        content_thresholds: Thresholds::default(),
        jailbreak_threshold: 0.5,
        failure_policy: FailurePolicy::FailClosed,
        content_backend: BackendDescriptor::rule(rules.clone(), FilterRole::Content),
        jailbreak_backend: BackendDescriptor::rule(rules, FilterRole::Jailbreak),
        token_budget: 8192,
    };

    let mut ok = true;
    let mut detail = String::new();
    for (content, jailbreak, policy, expected) in table {
        let cfg = GateConfig { failure_policy: policy, ..base.clone() };
        let result = compose_decision(content_outcome(content), jailbreak_outcome(jailbreak), &cfg);
        let matches = match (&result, &expected) {
            (Err(GatewayError::NoVerdictAvailable), None) => true,
            (Ok(decision), Some((action, triggered))) => {
                decision.action == *action
                    && decision.triggered_by.iter().copied().collect::<Vec<_>>() == *triggered
            }
            _ => false,
        };
        if !matches {
            ok = false;
            detail = format!("({content:?}, {jailbreak:?}, {policy:?}) produced {result:?}");
            break;
        }
    }
    if detail.is_empty() {
        detail = "all 18 cases match the oracle table".to_string();
    }
    report(6, "decision-truth-table", ok, &detail);
}

// ---------------------------------------------------------------------------
// C7 — label round-trip
// ---------------------------------------------------------------------------

#[test]
fn c07_label_round_trip() {
    let mut ok = true;
    let mut detail = String::new();
    for bits in 0u32..32 {
        let mut flags = [Polarity::Safe; 5];
        for (i, flag) in flags.iter_mut().enumerate() {
            if bits & (1 << i) != 0 {
                *flag = Polarity::Unsafe;
            }
        }
        let verdict = ContentVerdict::from_flags(flags);
        let decoded = decode_verdict(&encode_verdict(&verdict), None).unwrap();
        if decoded.flags() != verdict.flags() || decoded.overall() != verdict.overall() {
            ok = false;
            detail = format!("bits {bits:05b} failed round trip");
        }
    }

    // Malformed streams: positioned errors.
    let wrong_length = decode_verdict(
        &[LabelToken::new(SafetyCategory::ViolenceAndHate, Polarity::Safe)],
        None,
    );
    let unknown = parse_label_tokens(&[
        "<|safe_1|>".to_string(),
        "<|safe_2|>".to_string(),
        "banana".to_string(),
    ]);
    let mut dup_tokens: Vec<LabelToken> = SafetyCategory::ALL
        .into_iter()
        .map(|c| LabelToken::new(c, Polarity::Safe))
        .collect();
    dup_tokens[4] = dup_tokens[0];
    let duplicate = decode_verdict(&dup_tokens, None);

    let malformed_ok = matches!(
        wrong_length,
        Err(TokenStreamError::WrongLength { expected: 5, got: 1 })
    ) && matches!(
        unknown,
        Err(TokenStreamError::UnknownToken { position: 2, .. })
    ) && matches!(
        duplicate,
        Err(TokenStreamError::DuplicateCategory { position: 4, category_id: 1 })
    );
    if !malformed_ok {
        ok = false;
        detail = "malformed streams did not produce positioned errors".to_string();
    }
    if detail.is_empty() {
        detail = "32/32 combinations lossless; malformed streams positioned".to_string();
    }
    report(7, "label-round-trip", ok, &detail);
}

// ---------------------------------------------------------------------------
// C8 — gateway end-to-end over HTTP
// ---------------------------------------------------------------------------

fn gateway_fixture_config(rule_path: &str) -> GateConfig {
    let rules = fixture(rule_path);
    GateConfig {
        content_thresholds: Thresholds::default(),
        jailbreak_threshold: 0.5,
        failure_policy: FailurePolicy::FailClosed,
        content_backend: BackendDescriptor::rule(rules.clone(), FilterRole::Content),
        jailbreak_backend: BackendDescriptor::rule(rules, FilterRole::Jailbreak),
        token_budget: 8192,
    }
}

#[test]
fn c08_gateway_end_to_end() {
    let server = spawn_ephemeral(ServerConfig {
        gate: gateway_fixture_config("rules/gateway.json"),
        bearer_token: None,
    })
    .expect("gateway starts");
    let client = HttpGuardClient::new(server.base_url.clone());

    let dataset = load_dataset(&fixture("datasets/mixed_40.jsonl")).unwrap();
    assert_eq!(dataset.len(), 40);
    let subject = GuardSubject::new(&client, "http-gateway");
    let report_ = run_benchmark(
        &subject,
        &dataset,
        "mixed_40",
        &BenchmarkOptions { mode: EvalMode::Prompt, max_failure_rate: 0.01, parallelism: 4 },
    )
    .unwrap();

    // Hand-computed from the fixture design: tp=17, fn=3, fp=2, tn=18.
    let metrics_exact = report_.f1 == 2.0 * 17.0 / (2.0 * 17.0 + 2.0 + 3.0)
        && report_.fnr == 3.0 / 20.0
        && report_.fpr == 2.0 / 20.0
        && report_.failures == 0;

    // Response decisions never carry a jailbreak verdict.
    let mut no_jailbreak = true;
    for example in &dataset {
        let decision = client.screen_response(&example.prompt, "noted, thanks").unwrap();
        if decision.jailbreak_verdict.is_some() {
            no_jailbreak = false;
        }
    }
    // And the raw wire body spells it as null.
    let agent: ureq::Agent =
        ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut raw = agent
        .post(format!("{}/v1/guard/response", server.base_url))
        .header("content-type", "application/json")
        .send(r#"{"prompt":"any tips","response":"first hotwire the van"}"#)
        .unwrap();
    let body: serde_json::Value = raw.body_mut().read_json().unwrap();
    let wire_null = body["jailbreak"].is_null() && body["action"] == "block";

    let ok = metrics_exact && no_jailbreak && wire_null;
    report(
        8,
        "gateway-end-to-end",
        ok,
        &format!(
            "F1 {:.6} FNR {:.3} FPR {:.3}, response jailbreak always absent: {}",
            report_.f1,
            report_.fnr,
            report_.fpr,
            no_jailbreak && wire_null
        ),
    );
}

// ---------------------------------------------------------------------------
// C9 — red-team harness
// ---------------------------------------------------------------------------

struct FixedGuard(Action);

impl Guard for FixedGuard {
    fn screen_prompt(&self, _text: &str) -> Result<GateDecision, GatewayError> {
        let triggered_by = match self.0 {
            Action::Allow => BTreeSet::new(),
            Action::Block => [FilterKind::Content].into_iter().collect(),
        };
        Ok(GateDecision {
            action: self.0,
            triggered_by,
            content_verdict: None,
            jailbreak_verdict: None,
            latency: Duration::ZERO,
            filter_latencies: Vec::new(),
        })
    }

    fn screen_response(&self, _p: &str, _r: &str) -> Result<GateDecision, GatewayError> {
        unreachable!("red-team screens prompts only")
    }
}

#[test]
fn c09_redteam_harness() {
    let behaviors: Vec<String> = std::fs::read_to_string(fixture("redteam/behaviors_20.txt"))
        .unwrap()
        .lines()
        .map(String::from)
        .filter(|l| !l.is_empty())
        .collect();
    assert_eq!(behaviors.len(), 20);
    let cases = generate_redteam(&behaviors, AttackType::Direct, None, None, 0).unwrap();

    let allow_all = run_redteam(&FixedGuard(Action::Allow), &cases).unwrap();
    let block_all = run_redteam(&FixedGuard(Action::Block), &cases).unwrap();

    let service = GuardService::new(gateway_fixture_config("rules/redteam_guard.json")).unwrap();
    let fixture_run = run_redteam(&service, &cases).unwrap();

    let lib = TemplateLibrary::builtin();
    let t3_a = generate_redteam(&behaviors, AttackType::TemplateMutation, Some(&lib), None, 11)
        .unwrap();
    let t3_b = generate_redteam(&behaviors, AttackType::TemplateMutation, Some(&lib), None, 11)
        .unwrap();
    let t3_c = generate_redteam(&behaviors, AttackType::TemplateMutation, Some(&lib), None, 12)
        .unwrap();

    let ok = allow_all.per_type[&1].asr_percent == 100.0
        && block_all.per_type[&1].asr_percent == 0.0
        && fixture_run.per_type[&1].asr_percent == 15.0
        && t3_a == t3_b
        && t3_a != t3_c;
    report(
        9,
        "redteam-harness",
        ok,
        &format!(
            "allow-all {:.1}%, block-all {:.1}%, fixture {:.1}%, type-3 deterministic: {}",
            allow_all.per_type[&1].asr_percent,
            block_all.per_type[&1].asr_percent,
            fixture_run.per_type[&1].asr_percent,
            t3_a == t3_b && t3_a != t3_c
        ),
    );
}

// ---------------------------------------------------------------------------
// C10 — toy-model gradient check
// ---------------------------------------------------------------------------

#[test]
fn c10_toy_model_gradient_check() {
    let mut model = ToyModel::new(1 << 10);
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let sample = TrainRow {
        text: "describe how someone might reroute a package mid delivery".to_string(),
        label: Polarity::Unsafe,
        weight: 1.5,
    };
    let active: Vec<usize> = model.features(&sample.text).keys().copied().collect();
    let h = 1e-6;
    let mut max_rel = 0.0f64;
    for _ in 0..10 {
        for &i in &active {
            model.set_weight(i, rng.random_range(-2.0..2.0));
        }
        model.set_bias(rng.random_range(-1.0..1.0));
        let (grad, bias_grad) = model.gradient(&sample);
        for &i in &active {
            let saved = model.weight(i);
            model.set_weight(i, saved + h);
            let up = model.loss(&sample);
            model.set_weight(i, saved - h);
            let down = model.loss(&sample);
            model.set_weight(i, saved);
            let fd = (up - down) / (2.0 * h);
            let rel = (grad[&i] - fd).abs() / grad[&i].abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
        let saved = model.bias();
        model.set_bias(saved + h);
        let up = model.loss(&sample);
        model.set_bias(saved - h);
        let down = model.loss(&sample);
        model.set_bias(saved);
        let fd = (up - down) / (2.0 * h);
        max_rel = max_rel.max((bias_grad - fd).abs() / bias_grad.abs().max(fd.abs()).max(1e-8));
    }
    let ok = max_rel < 1e-5;
    report(10, "toy-model-gradient-check", ok, &format!("max relative error {max_rel:.2e}"));
}

// ---------------------------------------------------------------------------
// C11 — curation pipeline with deterministic mocks
// ---------------------------------------------------------------------------

#[test]
fn c11_curation_pipeline() {
    // Exact partition: flip ids {2, 5} of 6.
    let examples: Vec<LabeledExample> = (1..=6)
        .map(|i| LabeledExample {
            id: i.to_string(),
            language: "en".into(),
            prompt: format!("prompt {i}"),
            response: None,
            gold: if i % 2 == 0 { Polarity::Unsafe } else { Polarity::Safe },
            category: None,
            source: "fixture".into(),
            split: "train".into(),
        })
        .collect();
    let partition = relabel_filter(
        &examples,
        &MockLabeler::flipping(&examples, &["2", "5"]),
        &mut CurationLog::new(Clock::Fixed(0)),
    );
    let excluded_ids: Vec<&str> = partition.excluded.iter().map(|e| e.example.id.as_str()).collect();
    let partition_ok = excluded_ids == ["2", "5"]
        && partition.kept.len() + partition.excluded.len() == 6
        && partition.kept.iter().all(|e| !excluded_ids.contains(&e.id.as_str()));

    // Composed-mock round trip restores source semantics.
    let mut round_trip_ok = true;
    for source in ["open the window", "NOT open the window", "how can I make a rival look bad"] {
        let record = translate_refined(
            source,
            &NegatingTranslator,
            &InvertingRefiner,
            &mut CurationLog::new(Clock::Fixed(0)),
        )
        .unwrap();
        if !semantically_equal(&record.x_target, source) || !record.refiner_changed {
            round_trip_ok = false;
        }
    }

    // Byte-reproducible full pipeline runs.
    let run = || {
        let mut log = CurationLog::new(Clock::Fixed(0));
        let translation =
            translate_refined("text one", &NegatingTranslator, &InvertingRefiner, &mut log).unwrap();
        let blended =
            blend("the school bake sale", "rig the raffle", &TemplateBlender, &mut log).unwrap();
        let detoxed =
            detox("[HARM]trip the fire alarm at[/HARM] the school bake sale", &StripHarmDetoxer, &mut log)
                .unwrap();
        let partition =
            relabel_filter(&examples, &MockLabeler::flipping(&examples, &["2", "5"]), &mut log);
        let mut bytes = serde_json::to_vec(&(translation, blended, detoxed, partition)).unwrap();
        bytes.extend_from_slice(log.to_jsonl().as_bytes());
        bytes
    };
    let reproducible = run() == run();

    let ok = partition_ok && round_trip_ok && reproducible;
    report(
        11,
        "curation-pipeline",
        ok,
        &format!(
            "partition {{2,5}}: {partition_ok}, mock round trip: {round_trip_ok}, byte-reproducible: {reproducible}"
        ),
    );
}
