mod common;

use kitchenplan::affordance;
use kitchenplan::backend::OracleBackend;
use kitchenplan::harness::judge;
use kitchenplan::planner::{run_episode, PipelineConfig, TerminationReason};
use kitchenplan::world::{apply_skill, FoodKind, OutcomeStatus};

#[test]
fn gate_admits_nothing_that_spills_from_start_states() {
    let all = common::benchmark();
    let bad = common::gate_counterexamples(all.iter().map(|s| &s.initial_state));
    assert!(bad.is_empty(), "{} counterexamples, first {:?}", bad.len(), bad.first().map(|b| &b.1));
}

#[test]
fn gate_admits_nothing_that_spills_from_random_states() {
    let all = common::benchmark();
    let states = common::random_reachable_states(&all, 10_000, 99);
    assert_eq!(states.len(), 10_000);
    let bad = common::gate_counterexamples(&states);
    assert!(bad.is_empty(), "{} counterexamples, first {:?}", bad.len(), bad.first().map(|b| &b.1));
}

#[test]
fn random_walks_conserve_food_and_count_steps() {
    let all = common::benchmark();
    for state in common::random_reachable_states(&all, 2_000, 7) {
        for skill in kitchenplan::world::Skill::FIXED {
            let (next, outcome) = apply_skill(&state, &skill);
            assert_eq!(next.step_count, state.step_count + 1);
            assert_eq!(outcome.status == OutcomeStatus::Spill, next.spill_events.len() > state.spill_events.len());
            for food in FoodKind::ALL {
                assert!((next.food_total(food) - state.food_total(food)).abs() < 1e-9);
            }
            for (a, b) in state.bowls.iter().zip(&next.bowls) {
                if a.spilled {
                    assert!(b.spilled && a.amount == b.amount);
                }
            }
            let verdict = affordance::check(&state, &skill);
            assert_eq!(verdict.feasible, verdict.violations.is_empty());
            assert_eq!(verdict.feasible, verdict.feedback.is_empty());
        }
    }
}

#[test]
fn every_consequence_pattern_has_its_outcome_and_failure() {
    let all = common::benchmark();
    for p in common::consequence_patterns(&all) {
        let backend = common::single_step_script(&p.scenario, &p.script);
        let trace = run_episode(&p.scenario, &backend, &PipelineConfig::cot());
        assert_eq!(trace.termination, TerminationReason::Done, "{}", p.name);
        let outcome = trace.records[p.at - 1].outcome.as_ref().unwrap();
        assert_eq!(outcome.status, p.status, "{}", p.name);
        let j = judge(&trace, &p.scenario).unwrap();
        assert!(!j.success, "{}", p.name);
        assert!(j.failure_reasons.contains(&p.reason), "{}: {:?}", p.name, j.failure_reasons);
        common::audit_trace(&trace).unwrap();

        // the same script under the gate never executes the infeasible step
        let gated = run_episode(&p.scenario, &common::single_step_script(&p.scenario, &p.script), &PipelineConfig::full());
        assert!(gated.final_state.spill_events.is_empty(), "{}", p.name);
    }
}

#[test]
fn oracle_sweep_succeeds_everywhere_and_replays() {
    let all = common::benchmark();
    for s in &all {
        let trace = run_episode(s, &OracleBackend, &PipelineConfig::full());
        let j = judge(&trace, s).unwrap();
        assert!(j.success, "{}: {:?}", s.id, j.failure_reasons);
        assert!(trace.final_state.spill_events.is_empty());
        common::audit_trace(&trace).unwrap();
    }
}

#[test]
fn recovery_scripts_gate_then_pull() {
    let all = common::benchmark();
    for s in common::of_category(&all, kitchenplan::scenarios::TaskCategory::ReachabilityAnalysis) {
        let backend = kitchenplan::backend::ScriptedBackend::new("recovery", common::recovery_script(&s));
        let trace = run_episode(&s, &backend, &PipelineConfig::full());
        let j = judge(&trace, &s).unwrap();
        assert!(j.success, "{}: {:?}", s.id, j.failure_reasons);
        assert!(trace.records[2].attempts[0].gated);
        assert!(trace.executed_skills()[2..].contains(&kitchenplan::world::Skill::PullBowlCloser));
    }
}
