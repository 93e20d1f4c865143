use hhfuse::adjoint::*;
use hhfuse::dynamics::{hh_step_in_place, HHParams, NeuronState};
use proptest::prelude::*;

/// Loss sum_t w_t . V_t evaluated by plain stepping.
fn loss(p: &HHParams, v0: &[f64], x: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
    let mut s = NeuronState::at_potential(&HHParams::default(), v0);
    let mut spikes = vec![false; v0.len()];
    let mut total = 0.0;
    for (xt, wt) in x.iter().zip(w) {
        hh_step_in_place(&mut s, xt, p, &mut spikes).unwrap();
        total += s.v.iter().zip(wt).map(|(a, b)| a * b).sum::<f64>();
    }
    total
}

fn gradients(
    p: &HHParams,
    v0: &[f64],
    x: &[Vec<f64>],
    w: &[Vec<f64>],
    plan: CheckpointPlan,
) -> Gradients {
    let s0 = NeuronState::at_potential(&HHParams::default(), v0);
    let fwd = forward_checkpointed(p, &s0, x, &plan).unwrap();
    backward_through_time(
        p,
        fwd,
        x,
        &LossSeeds::potential(w.to_vec()),
        &SurrogateSpec::default(),
    )
    .unwrap()
}

#[test]
fn input_gradients_match_five_point_differences() {
    let p = HHParams::default();
    let t = 60;
    let x: Vec<Vec<f64>> = (0..t)
        .map(|k| vec![15.0 + 10.0 * (k as f64 * 0.3).cos()])
        .collect();
    let w: Vec<Vec<f64>> = (0..t)
        .map(|k| vec![if k % 2 == 0 { 1.0 } else { -0.5 }])
        .collect();
    let g = gradients(&p, &[-65.0], &x, &w, CheckpointPlan::full_storage(t));
    let h = 3e-3;
    for k in 0..t {
        let at = |d: f64| {
            let mut xs = x.clone();
            xs[k][0] += d;
            loss(&p, &[-65.0], &xs, &w)
        };
        let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        let a = g.d_inputs[k][0];
        let d = (a - fd).abs();
        assert!(
            d <= 1e-8 || d / a.abs().max(fd.abs()) < 1e-5,
            "step {k}: {a} vs {fd}"
        );
    }
}

#[test]
fn budget_of_sqrt_t_bounds_live_states() {
    let p = HHParams::default();
    let t = 400;
    let budget = (t as f64).sqrt().ceil() as usize;
    let x: Vec<Vec<f64>> = (0..t)
        .map(|k| vec![12.0 + (k as f64 * 0.05).sin()])
        .collect();
    let w = vec![vec![1.0]; t];
    let plan = make_plan(t, budget).unwrap();
    let seg = plan.segment_length;
    let g = gradients(&p, &[-65.0], &x, &w, plan);
    assert!(g.stats.peak_live_states <= budget + seg);
    assert!(g.stats.forward_steps <= 2 * t + budget);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradients_do_not_depend_on_checkpoint_plan(
        t in 1usize..150,
        budget in 1usize..40,
        base in 0.0f64..30.0,
        n in 1usize..4,
    ) {
        let p = HHParams::default();
        let x: Vec<Vec<f64>> = (0..t).map(|k| (0..n).map(|i| base + ((k + 3 * i) as f64 * 0.4).sin() * 5.0).collect()).collect();
        let w: Vec<Vec<f64>> = (0..t).map(|k| (0..n).map(|i| ((k * 7 + i) % 5) as f64 - 2.0).collect()).collect();
        let v0 = vec![-65.0; n];
        let full = gradients(&p, &v0, &x, &w, CheckpointPlan::full_storage(t));
        let cp = gradients(&p, &v0, &x, &w, make_plan(t, budget).unwrap());
        for (a, b) in full.d_inputs.iter().flatten().zip(cp.d_inputs.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
        }
        prop_assert_eq!(full.d_params(), cp.d_params());
    }
}
