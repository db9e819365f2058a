use oversight_core::attention::AttentionParams;
use oversight_core::env::{OversightEnv, RewardConfig};
use oversight_core::eval::{
    critical_events, evaluate, run_episode, AlwaysPolicy, HighlightPolicy, NeverPolicy, RuleBasedPolicy,
    RulePolicyConfig,
};
use oversight_core::rng;
use oversight_core::world::{advance, init_world, ScenarioScript};

fn env() -> OversightEnv {
    OversightEnv::new(
        ScenarioScript::default_scenario(),
        RewardConfig::default(),
        AttentionParams::default(),
    )
    .unwrap()
}

fn rule() -> Box<dyn HighlightPolicy> {
    Box::new(RuleBasedPolicy::new(RulePolicyConfig::default()).unwrap())
}

#[test]
fn twin_worlds_agree_for_a_hundred_steps() {
    let script = ScenarioScript::default_scenario();
    let mut a = init_world(&script, 42).unwrap();
    let mut b = a.clone();
    let mut ra = rng::stream(42, 1);
    let mut rb = rng::stream(42, 1);
    for _ in 0..100 {
        a = advance(&a, &script, 0.5, &mut ra).unwrap();
        b = advance(&b, &script, 0.5, &mut rb).unwrap();
        assert_eq!(a.values.map(f64::to_bits), b.values.map(f64::to_bits));
    }
    assert_eq!(a.time, 50.0);
}

#[test]
fn twin_episodes_produce_identical_traces() {
    let env = env();
    let a = run_episode(&env, rule().as_mut(), 17).unwrap();
    let b = run_episode(&env, rule().as_mut(), 17).unwrap();
    assert_eq!(a.records.len(), 240);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = run_episode(&env, rule().as_mut(), 18).unwrap();
    assert_ne!(a, c);
}

#[test]
fn never_beats_always_at_default_penalty() {
    let env = env();
    let (never, _) = evaluate(&env, || Box::new(NeverPolicy), 20, 1).unwrap();
    let (always, traces) = evaluate(&env, || Box::new(AlwaysPolicy), 20, 1).unwrap();
    assert!(never.mean_episode_reward > always.mean_episode_reward);
    for tr in &traces {
        for r in &tr.records {
            assert!(r.reward <= -16000.0);
        }
    }
}

#[test]
fn rule_based_highlighting_detects_critical_events_sooner() {
    let env = env();
    let (never, never_traces) = evaluate(&env, || Box::new(NeverPolicy), 50, 2).unwrap();
    let (rule, rule_traces) = evaluate(&env, rule, 50, 2).unwrap();
    assert_eq!(never.critical_events, rule.critical_events);
    let mean = |traces: &[oversight_core::eval::EpisodeTrace]| {
        let events: Vec<_> = traces.iter().flat_map(critical_events).collect();
        events.iter().map(|e| e.latency_steps as f64).sum::<f64>() / events.len() as f64
    };
    let (n, r) = (mean(&never_traces), mean(&rule_traces));
    assert!(r < n, "rule {r} vs never {n}");
    assert_eq!(never.mean_detection_latency_steps, Some(n));
}
