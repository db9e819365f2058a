use oversight_core::attention::{predict, AttentionParams, InterfaceFrame};
use oversight_core::env::{
    belief_distance, observe, reward, HighlightState, OversightEnv, RewardConfig, UserBeliefState, OBS_DIM,
};
use oversight_core::layout::{attr_of, Attr, N_ATTRS, N_PAIRS};
use oversight_core::nn::{clip_grad_norm, AdamState, Mlp};
use oversight_core::ppo::{compute_gae, normalize};
use oversight_core::rng;
use oversight_core::world::{advance, init_world, AttributeState, ScenarioScript};
use proptest::prelude::*;

fn default_env() -> OversightEnv {
    OversightEnv::new(
        ScenarioScript::default_scenario(),
        RewardConfig::default(),
        AttentionParams::default(),
    )
    .unwrap()
}

fn in_range_values() -> impl Strategy<Value = [f64; N_PAIRS]> {
    proptest::collection::vec(0.0f64..1.0, N_PAIRS).prop_map(|u| {
        let mut out = [0.0; N_PAIRS];
        for (i, x) in u.into_iter().enumerate() {
            let a = attr_of(i);
            let (lo, hi) = a.range();
            out[i] = a.clamp(lo + x * (hi - lo));
        }
        out
    })
}

fn highlights() -> impl Strategy<Value = HighlightState> {
    proptest::array::uniform32(any::<bool>()).prop_map(|bits| HighlightState { bits })
}

fn attention_params() -> impl Strategy<Value = AttentionParams> {
    attention_params_with_min_temperature(0.1)
}

/// Temperatures well below 1 saturate the softmax in f64, where strict
/// inequalities between probabilities stop being observable.
fn attention_params_with_min_temperature(min_t: f64) -> impl Strategy<Value = AttentionParams> {
    (
        proptest::array::uniform8(0.0f64..4.0),
        0.0f64..8.0,
        0.0f64..5.0,
        min_t..5.0,
    )
        .prop_filter("some prior mass", |(p, ..)| p.iter().any(|x| *x > 0.0))
        .prop_map(|(prior, highlight_boost, change_boost, temperature)| AttentionParams {
            prior,
            highlight_boost,
            change_boost,
            temperature,
        })
}

/// Explicit double-sum advantage definition.
fn gae_oracle(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta: Vec<f64> = (0..n)
        .map(|t| rewards[t] + gamma * next_value(t) * if dones[t] { 0.0 } else { 1.0 } - values[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut coef = 1.0;
            for k in t..n {
                total += coef * delta[k];
                if dones[k] {
                    break;
                }
                coef *= gamma * lambda;
            }
            total
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn advance_keeps_values_in_range_and_is_deterministic(seed in any::<u64>(), steps in 1usize..240) {
        let script = ScenarioScript::default_scenario();
        let mut a = init_world(&script, seed).unwrap();
        let mut b = init_world(&script, seed).unwrap();
        let mut ra = rng::stream(seed, 99);
        let mut rb = rng::stream(seed, 99);
        for _ in 0..steps {
            a = advance(&a, &script, 0.5, &mut ra).unwrap();
            b = advance(&b, &script, 0.5, &mut rb).unwrap();
            for (i, v) in a.values.iter().enumerate() {
                let attr = attr_of(i);
                prop_assert!(attr.in_range(*v), "{attr} = {v}");
                if attr.is_binary() {
                    prop_assert!(*v == 0.0 || *v == 1.0);
                }
            }
        }
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gaze_is_a_distribution(values in in_range_values(), prev in in_range_values(), hlt in highlights(), params in attention_params()) {
        let att = AttributeState::from_values(values, 1.0);
        let prev_att = AttributeState::from_values(prev, 0.5);
        let dist = predict(&InterfaceFrame { att: &att, hlt: &hlt, prev_att: Some(&prev_att) }, &params);
        let p = dist.probabilities();
        prop_assert_eq!(p.len(), N_PAIRS);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn raising_beta_moves_mass_to_highlights(values in in_range_values(), hlt in highlights(), params in attention_params_with_min_temperature(0.5), extra in 0.05f64..3.0) {
        prop_assume!(hlt.count() > 0 && hlt.count() < N_PAIRS);
        let att = AttributeState::from_values(values, 0.0);
        let frame = InterfaceFrame { att: &att, hlt: &hlt, prev_att: None };
        let lo = predict(&frame, &params);
        let hi = predict(&frame, &AttentionParams { highlight_boost: params.highlight_boost + extra, ..params.clone() });
        for i in 0..N_PAIRS {
            if hlt.bits[i] {
                prop_assert!(hi.probabilities()[i] > lo.probabilities()[i]);
            } else {
                prop_assert!(hi.probabilities()[i] < lo.probabilities()[i]);
            }
        }
    }

    #[test]
    fn higher_prior_attracts_more_gaze(values in in_range_values(), params in attention_params_with_min_temperature(0.5), a in 0usize..N_ATTRS, extra in 0.05f64..2.0) {
        let att = AttributeState::from_values(values, 0.0);
        let hlt = HighlightState::none();
        let frame = InterfaceFrame { att: &att, hlt: &hlt, prev_att: None };
        let mut raised = params.clone();
        raised.prior[a] += extra;
        let lo = predict(&frame, &params);
        let hi = predict(&frame, &raised);
        for i in 0..N_PAIRS {
            if attr_of(i).index() == a {
                prop_assert!(hi.probabilities()[i] > lo.probabilities()[i]);
            }
        }
    }

    #[test]
    fn hot_temperature_flattens_gaze(values in in_range_values(), hlt in highlights(), params in attention_params()) {
        let att = AttributeState::from_values(values, 0.0);
        let hot = AttentionParams { temperature: 1e9, ..params };
        let dist = predict(&InterfaceFrame { att: &att, hlt: &hlt, prev_att: None }, &hot);
        for p in dist.probabilities() {
            prop_assert!((p - 1.0 / N_PAIRS as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn belief_distance_is_a_weighted_metric(x in in_range_values(), y in in_range_values(), z in in_range_values(), scale in 0.01f64..100.0) {
        let w = RewardConfig::default().weights;
        let att = |v: [f64; N_PAIRS]| AttributeState::from_values(v, 0.0);
        let usr = |v: [f64; N_PAIRS]| UserBeliefState { values: v };
        let dxy = belief_distance(&att(x), &usr(y), &w);
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(belief_distance(&att(x), &usr(x), &w), 0.0);
        prop_assert!((dxy - belief_distance(&att(y), &usr(x), &w)).abs() <= 1e-9 * dxy.max(1.0));
        let via = belief_distance(&att(x), &usr(z), &w) + belief_distance(&att(z), &usr(y), &w);
        prop_assert!(dxy <= via + 1e-9 * via.max(1.0));
        let scaled: [f64; N_ATTRS] = std::array::from_fn(|i| w[i] * scale);
        prop_assert!((belief_distance(&att(x), &usr(y), &scaled) - scale * dxy).abs() <= 1e-9 * (scale * dxy).max(1.0));
    }

    #[test]
    fn env_steps_touch_one_belief_entry(seed in any::<u64>(), actions in proptest::collection::vec(highlights(), 1..40)) {
        let env = default_env();
        let mut state = env.reset(seed).unwrap();
        let mut r = env.episode_rng(seed);
        for action in &actions {
            let t = env.step(&state, action, &mut r).unwrap();
            prop_assert!(t.reward <= 0.0);
            prop_assert_eq!(t.reward, reward(&t.state, &env.reward_cfg));
            let changed: Vec<usize> = (0..N_PAIRS).filter(|&i| t.state.usr.values[i] != state.usr.values[i]).collect();
            prop_assert!(changed.len() <= 1);
            let f = t.fixation.index();
            prop_assert_eq!(t.state.usr.values[f], t.state.att.values[f]);
            for i in (0..N_PAIRS).filter(|&i| i != f) {
                prop_assert_eq!(t.state.usr.values[i], state.usr.values[i]);
            }
            prop_assert_eq!(t.state.hlt, *action);
            let obs = observe(&t.state).0;
            prop_assert_eq!(obs.len(), OBS_DIM);
            prop_assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
            state = t.state;
        }
    }

    #[test]
    fn gae_matches_double_sum(
        steps in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..16),
        bootstrap in -5.0f64..5.0,
        gamma in 0.01f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let dones: Vec<bool> = steps.iter().map(|s| s.2).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        let oracle = gae_oracle(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for t in 0..rewards.len() {
            prop_assert!((adv[t] - oracle[t]).abs() < 1e-10);
            prop_assert!((ret[t] - adv[t] - values[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_advantages_are_standard(xs in proptest::collection::vec(-1e4f64..1e4, 2..300)) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-3));
        let mut v = xs.clone();
        normalize(&mut v);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn adam_steps_are_bounded_by_lr(grads in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 8), 1..30), lr in 1e-5f64..1e-2) {
        let mut params = vec![0.5; 8];
        let mut adam = AdamState::new(8);
        for g in &grads {
            let before = params.clone();
            adam.update(&mut params, g, lr).unwrap();
            for (a, b) in params.iter().zip(&before) {
                // |m_hat| / sqrt(v_hat) <= (1 - beta1) / sqrt(1 - beta2)
                prop_assert!((a - b).abs() <= lr * 0.1 / 0.001f64.sqrt() * (1.0 + 1e-9));
            }
        }
        prop_assert_eq!(adam.step, grads.len() as u64);
    }

    #[test]
    fn adam_steps_with_steady_gradients_are_at_most_lr(g in -1e3f64..1e3, steps in 1usize..50, lr in 1e-5f64..1e-2) {
        let mut params = vec![0.0];
        let mut adam = AdamState::new(1);
        for _ in 0..steps {
            let before = params[0];
            adam.update(&mut params, &[g], lr).unwrap();
            prop_assert!((params[0] - before).abs() <= lr * (1.0 + 1e-9));
        }
    }

    #[test]
    fn clipping_never_increases_the_norm(g in proptest::collection::vec(-10.0f64..10.0, 1..64), max_norm in 0.01f64..5.0) {
        let before = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut c = g.clone();
        let reported = clip_grad_norm(&mut c, max_norm);
        let after = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((reported - before).abs() < 1e-12);
        prop_assert!(after <= max_norm.max(before.min(max_norm)) + 1e-9);
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences(seed in any::<u64>(), n_in in 1usize..6, hidden in 1usize..6, n_out in 1usize..4) {
        let mut r = rng::stream(seed, 0);
        let net = Mlp::random(&[n_in, hidden, hidden, n_out], 0.7, &mut r).unwrap();
        let x: Vec<f64> = (0..n_in).map(|i| ((seed >> (i % 60)) & 7) as f64 / 7.0 - 0.5).collect();
        let up: Vec<f64> = (0..n_out).map(|j| 1.0 - 0.3 * j as f64).collect();
        let (grad, input_grad) = net.backward(&x, &up).unwrap();
        let objective = |n: &Mlp, x: &[f64]| -> f64 { n.forward(x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum() };
        let h = 1e-5;
        for k in 0..net.num_params() {
            let mut plus = net.clone();
            plus.params_mut()[k] += h;
            let mut minus = net.clone();
            minus.params_mut()[k] -= h;
            let fd = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * h);
            prop_assert!((fd - grad[k]).abs() <= 1e-6 + 1e-4 * fd.abs().max(grad[k].abs()), "param {k}: {fd} vs {}", grad[k]);
        }
        for i in 0..n_in {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (objective(&net, &xp) - objective(&net, &xm)) / (2.0 * h);
            prop_assert!((fd - input_grad[i]).abs() <= 1e-6 + 1e-4 * fd.abs());
        }
    }
}

#[test]
fn every_attribute_has_a_distinct_name() {
    let names: std::collections::BTreeSet<&str> = Attr::ALL.iter().map(|a| a.name()).collect();
    assert_eq!(names.len(), N_ATTRS);
}
