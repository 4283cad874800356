use std::sync::Mutex;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::backend::{
    Backend, BackendError, Capabilities, FaultRule, FaultyBackend, ModelRequest, ModelResponse, OracleBackend,
    RequestKind, ScriptedBackend,
};
use crate::fixtures;
use crate::prompts::{render_response, PlannedStep, SkillLabels, FORMAT_REMINDER};
use crate::scenarios::{goal_report, Scenario};

fn seq(start: u32, skills: &[Skill]) -> ProposedSequence {
    ProposedSequence {
        description: "d".into(),
        steps: skills
            .iter()
            .enumerate()
            .map(|(i, s)| PlannedStep {
                iteration: start + i as u32,
                skill: s.clone(),
            })
            .collect(),
        raw_text: String::new(),
        terminated: skills.last() == Some(&Skill::Done),
    }
}

fn buffer(seqs: Vec<ProposedSequence>) -> SequenceBuffer {
    SequenceBuffer { sequences: seqs }
}

/// Brute-force reference: count by linear scan, keep every skill tied at the top.
fn reference_check(votes: &[Skill], proposed: &Skill) -> Consistency {
    let mut best: Vec<(&Skill, usize)> = Vec::new();
    for v in votes {
        let n = votes.iter().filter(|w| *w == v).count();
        if !best.iter().any(|(s, _)| *s == v) {
            best.push((v, n));
        }
    }
    let top = best.iter().map(|(_, n)| *n).max().unwrap_or(0);
    let leaders: Vec<&Skill> = best.iter().filter(|(_, n)| *n == top).map(|(s, _)| *s).collect();
    match leaders.as_slice() {
        [only] if *only != proposed => Consistency::Conflict {
            majority: (*only).clone(),
        },
        _ => Consistency::Consistent,
    }
}

#[test]
fn consistency_worked_cases() {
    use Skill::*;
    let empty = SequenceBuffer::default();
    assert_eq!(consistency_check(&empty, 1, &Scoop), Consistency::Consistent);

    let b = buffer(vec![
        seq(1, &[GraspSpoon, Scoop, DropFood]),
        seq(2, &[Scoop, DropFood]),
        seq(2, &[Scoop, Stir]),
    ]);
    assert_eq!(b.votes_at(3), [DropFood, DropFood, Stir]);
    assert_eq!(consistency_check(&b, 3, &DropFood), Consistency::Consistent);
    assert_eq!(
        consistency_check(&b, 3, &Done),
        Consistency::Conflict { majority: DropFood }
    );

    // a tie at the top never conflicts
    let tie = buffer(vec![seq(1, &[Scoop, DropFood]), seq(2, &[Stir])]);
    assert_eq!(consistency_check(&tie, 2, &Done), Consistency::Consistent);

    // one vote is enough
    let single = buffer(vec![seq(1, &[GraspSpoon, Scoop])]);
    assert_eq!(consistency_check(&single, 2, &Stir), Consistency::Conflict { majority: Scoop });

    // a plan that already finished votes DONE
    let short = buffer(vec![seq(1, &[GraspSpoon, Done])]);
    assert_eq!(short.votes_at(4), [Done]);
    assert_eq!(consistency_check(&short, 4, &Scoop), Consistency::Conflict { majority: Done });

    // sequences starting later than the asked iteration do not vote
    assert!(buffer(vec![seq(5, &[Scoop])]).votes_at(3).is_empty());
}

fn arb_skill() -> impl Strategy<Value = Skill> {
    proptest::sample::select(vec![
        Skill::Scoop,
        Skill::Stir,
        Skill::DropFood,
        Skill::Done,
        Skill::move_to("red"),
        Skill::move_to("blue"),
    ])
}

proptest! {
    #[test]
    fn consistency_matches_brute_force(
        plans in proptest::collection::vec((1u32..6, proptest::collection::vec(arb_skill(), 1..6)), 0..7),
        iteration in 1u32..10,
        proposed in arb_skill(),
    ) {
        let b = buffer(plans.iter().map(|(s, k)| seq(*s, k)).collect());
        let votes = b.votes_at(iteration);
        prop_assert_eq!(votes.len(), plans.iter().filter(|(s, _)| *s <= iteration).count());
        prop_assert_eq!(consistency_check(&b, iteration, &proposed), reference_check(&votes, &proposed));
    }
}

#[test]
fn presets_and_flag_strings() {
    assert_eq!(PipelineConfig::default(), PipelineConfig::full());
    for name in PipelineConfig::PRESETS {
        let c: PipelineConfig = name.parse().unwrap();
        assert_eq!(c.label(), name);
        assert_eq!(c.to_string(), name);
    }
    assert_eq!("1,1,1,1".parse::<PipelineConfig>().unwrap(), PipelineConfig::full());
    assert_eq!("false,false,false,false".parse::<PipelineConfig>().unwrap(), PipelineConfig::naive_llm());
    let custom: PipelineConfig = "0,1,0,1".parse().unwrap();
    assert_eq!(custom.label(), "obs=0,cot=1,sc=0,sa=1");
    assert_eq!(custom.label().parse::<PipelineConfig>().ok(), None);
    assert_eq!(PipelineConfig::full().title(), "CoT + SC + SA");
    assert!("1,1,1".parse::<PipelineConfig>().is_err());
    assert!("fast".parse::<PipelineConfig>().is_err());
    let c = PipelineConfig::full();
    assert_eq!((c.max_iterations, c.max_replans_per_iteration, c.parse_retries), (30, 3, 2));
}

fn succeeded(s: &Scenario, trace: &EpisodeTrace) -> bool {
    trace.termination == TerminationReason::Done && goal_report(&trace.final_state, &s.initial_state, &s.goal).satisfied
}

#[test]
fn oracle_episode_follows_the_reference_plan_under_every_preset() {
    let s = fixtures::two_scoops();
    for name in PipelineConfig::PRESETS {
        let config = PipelineConfig::preset(name).unwrap();
        let trace = run_episode(&s, &OracleBackend, &config);
        assert!(succeeded(&s, &trace), "{name}");
        assert_eq!(trace.executed_skills(), s.reference_plan, "{name}");
        assert_eq!(trace.executed_steps(), 10);
        assert_eq!(trace.model_calls(), 10);
        assert_eq!(trace.attempts().filter(|a| a.gated).count(), 0);
        assert_eq!(trace.system_prompt, crate::prompts::build_system_prompt(&config));
    }
}

/// Plans as if every bowl were in reach until the gate has said otherwise,
/// then defers to the oracle.
struct Overconfident;

impl Backend for Overconfident {
    fn id(&self) -> String {
        "overconfident".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            multimodal: false,
            concurrent: true,
        }
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let ctx = request.context.as_ref().ok_or(BackendError::MissingContext)?;
        let text = if ctx.feedback.is_empty() && ctx.kind == RequestKind::Plan {
            let naive = [
                Skill::GraspSpoon,
                Skill::move_to("white"),
                Skill::Scoop,
                Skill::move_to("blue"),
                Skill::DropFood,
                Skill::Done,
            ];
            let rest = &naive[ctx.history.len().min(naive.len() - 1)..];
            render_response("scoop then drop", &seq(ctx.iteration, rest).steps, &ctx.labels)
        } else {
            OracleBackend::respond(ctx)
        };
        Ok(ModelResponse {
            text,
            latency_ms: 0,
            backend_id: self.id(),
        })
    }
}

#[test]
fn far_scoop_is_gated_and_replanned() {
    let s = fixtures::far_source();
    let trace = run_episode(&s, &Overconfident, &PipelineConfig::full());
    assert!(succeeded(&s, &trace));
    let third = &trace.records[2];
    assert_eq!(third.iteration, 3);
    assert!(third.attempts[0].gated);
    assert_eq!(third.attempts[0].chosen, Some(Skill::Scoop));
    assert_eq!(third.attempts[1].buffer_len, 0, "buffer cleared after a gate");
    assert!(!third.attempts[1].gated);
    let lines = trace.feedback.rendered_lines();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("In iteration 3, Cannot do scoop because the target white bowl is too far"));
    // the gated proposal does not consume the iteration
    assert_eq!(trace.executed_skills()[..2], [Skill::GraspSpoon, Skill::move_to("white")]);
    assert_eq!(trace.executed_skills()[2], Skill::PutSpoonBack);
}

#[test]
fn without_the_gate_the_far_scoop_spills() {
    let s = fixtures::far_source();
    let trace = run_episode(&s, &Overconfident, &PipelineConfig::cot_sc());
    assert!(!succeeded(&s, &trace));
    assert_eq!(trace.records[2].outcome.as_ref().unwrap().status, crate::world::OutcomeStatus::Spill);
    assert!(!trace.final_state.spill_events.is_empty());
}

fn reply(iteration: u32, skill: &Skill, labels: &SkillLabels) -> String {
    render_response("keep going", &seq(iteration, std::slice::from_ref(skill)).steps, labels)
}

#[test]
fn plans_without_done_hit_the_iteration_cap() {
    let s = fixtures::two_scoops();
    let labels = SkillLabels::for_state(&s.initial_state);
    let script = (1..=15).map(|i| reply(i, &Skill::move_to("red"), &labels)).collect();
    let backend = ScriptedBackend::new("loop", script);
    let mut config = PipelineConfig::cot();
    config.max_iterations = 15;
    let trace = run_episode(&s, &backend, &config);
    assert_eq!(trace.termination, TerminationReason::MaxIterations);
    assert_eq!(trace.executed_steps(), 15);
    assert_eq!(backend.consumed(), 15);
}

#[test]
fn repeated_gating_exhausts_replans() {
    let s = fixtures::two_scoops();
    let labels = SkillLabels::for_state(&s.initial_state);
    let backend = ScriptedBackend::new("stubborn", vec![reply(1, &Skill::Scoop, &labels); 10]);
    let trace = run_episode(&s, &backend, &PipelineConfig::full());
    assert_eq!(trace.termination, TerminationReason::ReplanExhausted);
    assert_eq!(trace.records.len(), 1);
    assert_eq!(trace.records[0].attempts.len(), 4);
    assert!(trace.records[0].attempts.iter().all(|a| a.gated));
    assert_eq!(trace.executed_steps(), 0);
}

#[test]
fn unparseable_replies_end_the_episode() {
    let s = fixtures::two_scoops();
    let backend = ScriptedBackend::new("junk", vec!["no idea".into(); 3]);
    let trace = run_episode(&s, &backend, &PipelineConfig::full());
    assert_eq!(trace.termination, TerminationReason::ParseFailure);
    let exchanges = &trace.records[0].attempts[0].exchanges;
    assert_eq!(exchanges.len(), 3);
    assert!(exchanges.iter().all(|e| e.parse_error.is_some()));
    assert!(!exchanges[0].user_text.contains(FORMAT_REMINDER));
    assert!(exchanges[1].user_text.ends_with(FORMAT_REMINDER));
}

#[test]
fn backend_failure_ends_the_episode() {
    let s = fixtures::two_scoops();
    let trace = run_episode(&s, &ScriptedBackend::new("empty", vec![]), &PipelineConfig::full());
    assert_eq!(trace.termination, TerminationReason::BackendError);
    assert!(trace.records[0].attempts[0].exchanges[0].backend_error.is_some());
}

#[test]
fn self_consistency_overrides_a_one_off_slip() {
    let s = fixtures::two_scoops();
    let faulty = || FaultyBackend::new(Box::new(OracleBackend), vec!["swap@3".parse::<FaultRule>().unwrap()]);
    let plain = run_episode(&s, &faulty(), &PipelineConfig::cot());
    assert!(!succeeded(&s, &plain));
    assert_eq!(plain.executed_skills().len(), 3);

    let voted = run_episode(&s, &faulty(), &PipelineConfig::cot_sc());
    assert!(succeeded(&s, &voted));
    assert_eq!(voted.executed_skills(), s.reference_plan);
    let c = voted.records[2].attempts[0].consistency.as_ref().unwrap();
    assert_eq!(c.proposed, Skill::Done);
    assert_eq!(c.votes, [Skill::Scoop, Skill::Scoop]);
    assert_eq!(c.result, Consistency::Conflict { majority: Skill::Scoop });
    let r = c.resolution.as_ref().unwrap();
    assert_eq!((r.chosen.clone(), r.defaulted), (Skill::Scoop, false));
    // the buffered plan for iteration 3 carries the executed skill
    assert_eq!(voted.model_calls(), 11);
}

#[test]
fn trace_json_round_trips() {
    let s = fixtures::far_source();
    let trace = run_episode(&s, &Overconfident, &PipelineConfig::full());
    let back = EpisodeTrace::from_json(&trace.to_json()).unwrap();
    assert_eq!(back, trace);
    let bumped = trace.to_json().replacen("\"version\": 1", "\"version\": 7", 1);
    assert!(matches!(EpisodeTrace::from_json(&bumped), Err(TraceError::SchemaVersion(7))));
}

/// Replies with random skills, sometimes garbage, from a seeded stream.
struct Chaos(Mutex<ChaCha8Rng>);

impl Backend for Chaos {
    fn id(&self) -> String {
        "chaos".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            multimodal: false,
            concurrent: false,
        }
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let ctx = request.context.as_ref().ok_or(BackendError::MissingContext)?;
        let mut rng = self.0.lock().unwrap();
        let text = if rng.random_bool(0.1) {
            "garbage".to_string()
        } else {
            let n = rng.random_range(1..5);
            let skills: Vec<Skill> = (0..n)
                .map(|_| ctx.labels.entries[rng.random_range(0..ctx.labels.entries.len())].1.clone())
                .collect();
            match &ctx.kind {
                RequestKind::Plan => render_response("r", &seq(ctx.iteration, &skills).steps, &ctx.labels),
                RequestKind::Resolve { proposed, majority } => {
                    let pick = if rng.random_bool(0.5) { proposed } else { majority };
                    format!("Description: r\nOutput: {}", ctx.labels.labelled(pick))
                }
            }
        };
        Ok(ModelResponse {
            text,
            latency_ms: 0,
            backend_id: self.id(),
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episodes_always_terminate_and_gate_every_executed_step(
        seed in any::<u64>(),
        flags in any::<(bool, bool, bool, bool)>(),
        max_iterations in 1u32..12,
    ) {
        let s = fixtures::fuller_then_deliver();
        let mut config = PipelineConfig::full();
        (config.use_observation, config.use_cot, config.use_sc, config.use_sa) = flags;
        config.max_iterations = max_iterations;
        let trace = run_episode(&s, &Chaos(Mutex::new(ChaCha8Rng::seed_from_u64(seed))), &config);
        prop_assert!(trace.records.len() as u32 <= max_iterations);
        let per_iteration = (config.max_replans_per_iteration + 1) * (config.parse_retries + 1) * 2;
        prop_assert!(trace.model_calls() as u32 <= max_iterations * per_iteration);

        let mut state = s.initial_state.clone();
        for record in &trace.records {
            for a in &record.attempts {
                prop_assert!(a.gated == a.verdict.as_ref().is_some_and(|v| !v.feasible));
                prop_assert!(config.use_sa || a.verdict.is_none());
            }
            if let Some(skill) = &record.executed {
                if config.use_sa {
                    prop_assert!(crate::affordance::check(&state, skill).feasible);
                }
                state = crate::world::apply_skill(&state, skill).0;
                prop_assert_eq!(Some(&state), record.state_after.as_ref());
            }
        }
        prop_assert_eq!(&state, &trace.final_state);
        if trace.termination == TerminationReason::Done {
            prop_assert_eq!(trace.executed_skills().last().cloned(), Some(Skill::Done));
        }
    }
}
