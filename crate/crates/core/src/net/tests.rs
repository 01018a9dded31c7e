use super::*;
use alloc::vec;

fn single(w: f64, b: f64, act: Activation) -> LayeredNet {
    LayeredNet::from_layers(vec![Layer::new(1, 1, act, vec![w], vec![b]).unwrap()]).unwrap()
}

/// Straight-line matrix/activation composition, kept apart from `forward`.
fn naive_forward(net: &LayeredNet, input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for layer in net.layers() {
        let mut y = vec![0.0; layer.out_dim()];
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = layer.biases()[r];
            for (c, xc) in x.iter().enumerate() {
                acc += layer.weights()[r * layer.in_dim() + c] * xc;
            }
            *out = match layer.activation() {
                Activation::Relu => {
                    if acc > 0.0 {
                        acc
                    } else {
                        0.0
                    }
                }
                Activation::Tanh => libm::tanh(acc),
                Activation::Identity => acc,
            };
        }
        x = y;
    }
    x
}

#[test]
fn init_is_deterministic() {
    let acts = [Activation::Tanh];
    let a = LayeredNet::new(&[3, 1], &acts, 7).unwrap();
    let b = LayeredNet::new(&[3, 1], &acts, 7).unwrap();
    assert_eq!(a, b);
    let bits_a: Vec<u64> = a.params().map(|p| p.to_bits()).collect();
    let bits_b: Vec<u64> = b.params().map(|p| p.to_bits()).collect();
    assert_eq!(bits_a, bits_b);
}

#[test]
fn init_bounds_and_zero_biases() {
    let net = LayeredNet::new(&[16, 8], &[Activation::Relu], 1).unwrap();
    let bound = 1.0 / 4.0;
    assert!(net.layers()[0].weights().iter().all(|w| w.abs() <= bound));
    assert!(net.layers()[0].biases().iter().all(|&b| b == 0.0));
}

#[test]
fn init_rejects_bad_specs() {
    let relu2 = [Activation::Relu, Activation::Relu];
    assert!(matches!(
        LayeredNet::new(&[3, 0, 1], &relu2, 0),
        Err(Error::InvalidSpec(_))
    ));
    assert!(matches!(LayeredNet::new(&[], &[], 0), Err(Error::InvalidSpec(_))));
    assert!(matches!(
        LayeredNet::new(&[3, 2], &relu2, 0),
        Err(Error::InvalidSpec(_))
    ));
}

#[test]
fn full_scale_param_counts() {
    let acts = [Activation::Relu, Activation::Relu, Activation::Tanh];
    let water_world = LayeredNet::new(&[212, 500, 128, 2], &acts, 0).unwrap();
    assert_eq!(water_world.param_count(), 170_886);
    let walker = LayeredNet::new(&[32, 500, 128, 4], &acts, 0).unwrap();
    assert_eq!(walker.param_count(), 81_144);
    let small = LayeredNet::new(&[3, 2], &[Activation::Identity], 0).unwrap();
    assert_eq!(small.param_count(), 8);
}

#[test]
fn forward_small_cases() {
    let zero = LayeredNet::from_layers(vec![
        Layer::new(3, 2, Activation::Identity, vec![0.0; 6], vec![0.0; 2]).unwrap(),
    ])
    .unwrap();
    assert_eq!(zero.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);

    let net = single(2.0, 1.0, Activation::Identity);
    assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
    assert!(matches!(
        net.forward(&[1.0, 2.0]),
        Err(Error::Shape { .. })
    ));
    assert!(matches!(net.forward(&[f64::NAN]), Err(Error::Numeric(_))));
}

#[test]
fn forward_matches_naive_composition() {
    let acts = [Activation::Relu, Activation::Tanh, Activation::Identity];
    for seed in 0..20 {
        let net = LayeredNet::new(&[5, 7, 6, 3], &acts, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let input: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = net.forward(&input).unwrap();
        let want = naive_forward(&net, &input);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
        }
        assert_eq!(net.forward_trace(&input).unwrap().output(), &got[..]);
    }
}

#[test]
fn backward_linear_input_grad_is_weight_row() {
    let net = LayeredNet::from_layers(vec![Layer::new(
        3,
        1,
        Activation::Identity,
        vec![0.5, -1.5, 2.0],
        vec![0.3],
    )
    .unwrap()])
    .unwrap();
    let (grads, input_grad) = net.backward(&[1.0, 2.0, 3.0], &[1.0]).unwrap();
    assert_eq!(input_grad, vec![0.5, -1.5, 2.0]);
    assert_eq!(grads.layers()[0].weights, vec![1.0, 2.0, 3.0]);
    assert_eq!(grads.layers()[0].biases, vec![1.0]);
}

#[test]
fn tanh_at_zero_matches_identity_gradient() {
    let w = vec![0.4, -0.7];
    let tanh = LayeredNet::from_layers(vec![
        Layer::new(2, 1, Activation::Tanh, w.clone(), vec![0.0]).unwrap(),
    ])
    .unwrap();
    let ident = LayeredNet::from_layers(vec![
        Layer::new(2, 1, Activation::Identity, w, vec![0.0]).unwrap(),
    ])
    .unwrap();
    let a = tanh.backward(&[0.0, 0.0], &[1.0]).unwrap();
    let b = ident.backward(&[0.0, 0.0], &[1.0]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn backward_rejects_bad_upstream() {
    let net = single(1.0, 0.0, Activation::Identity);
    assert!(matches!(
        net.backward(&[1.0], &[1.0, 1.0]),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn backward_trace_accumulates_scaled() {
    let acts = [Activation::Tanh, Activation::Identity];
    let net = LayeredNet::new(&[2, 3, 1], &acts, 4).unwrap();
    let (single_grads, _) = net.backward(&[0.3, -0.2], &[1.0]).unwrap();
    let trace = net.forward_trace(&[0.3, -0.2]).unwrap();
    let mut acc = Gradients::zeros_like(&net);
    net.backward_trace(&trace, &[1.0], 0.5, Some(&mut acc)).unwrap();
    net.backward_trace(&trace, &[1.0], 0.5, Some(&mut acc)).unwrap();
    for (a, b) in acc.values().zip(single_grads.values()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn adam_zero_gradient_leaves_params() {
    let mut net = LayeredNet::new(&[2, 2], &[Activation::Tanh], 3).unwrap();
    let before = net.clone();
    let mut adam = Adam::new(&net);
    let zero = Gradients::zeros_like(&net);
    adam.step(&mut net, &zero, 1e-3, Direction::Descend).unwrap();
    assert_eq!(net, before);
    assert_eq!(adam.steps(), 1);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let lr = 1e-3;
    for (g, direction, expected_sign) in [
        (0.5, Direction::Descend, -1.0),
        (0.5, Direction::Ascend, 1.0),
        (-3.0, Direction::Descend, 1.0),
    ] {
        let mut net = single(1.0, 0.0, Activation::Identity);
        let mut adam = Adam::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.layers_mut()[0].weights[0] = g;
        adam.step(&mut net, &grads, lr, direction).unwrap();
        let delta = net.layers()[0].weights()[0] - 1.0;
        // m_hat = g, v_hat = g^2 at t = 1, so |delta| = lr |g| / (|g| + eps).
        let exact = expected_sign * lr * g.abs() / (g.abs() + 1e-8);
        assert!((delta - exact).abs() < 1e-15, "{delta} vs {exact}");
        assert!((delta.abs() - lr).abs() <= lr * 1e-7);
        assert_eq!(net.layers()[0].biases()[0], 0.0);
    }
}

#[test]
fn adam_moments_change_successive_deltas() {
    let mut net = single(1.0, 0.0, Activation::Identity);
    let mut adam = Adam::new(&net);
    let mut grads = Gradients::zeros_like(&net);
    grads.layers_mut()[0].weights[0] = 0.5;
    grads.layers_mut()[0].biases[0] = -0.1;
    adam.step(&mut net, &grads, 1e-2, Direction::Descend).unwrap();
    let first = net.clone();
    adam.step(&mut net, &grads, 1e-2, Direction::Descend).unwrap();
    let d1 = first.layers()[0].weights()[0] - 1.0;
    let d2 = net.layers()[0].weights()[0] - first.layers()[0].weights()[0];
    assert_ne!(d1.to_bits(), d2.to_bits());
}

#[test]
fn adam_rejects_non_finite_and_keeps_state() {
    let mut net = single(1.0, 0.0, Activation::Identity);
    let mut adam = Adam::new(&net);
    let mut grads = Gradients::zeros_like(&net);
    grads.layers_mut()[0].weights[0] = f64::NAN;
    let before = (net.clone(), adam.clone());
    assert!(matches!(
        adam.step(&mut net, &grads, 1e-3, Direction::Ascend),
        Err(Error::Numeric(_))
    ));
    assert_eq!((net, adam), before);
}

#[test]
fn soft_update_arithmetic() {
    let online = single(1.0, 1.0, Activation::Identity);
    let mut target = single(0.0, 0.0, Activation::Identity);
    target.soft_update(&online, 0.01).unwrap();
    assert_eq!(target.layers()[0].weights()[0], 0.01);

    let mut copy = single(-3.0, 2.0, Activation::Identity);
    copy.soft_update(&online, 1.0).unwrap();
    assert_eq!(copy, online);

    let mut frozen = single(-3.0, 2.0, Activation::Identity);
    frozen.soft_update(&online, 0.0).unwrap();
    assert_eq!(frozen, single(-3.0, 2.0, Activation::Identity));

    assert!(matches!(
        frozen.soft_update(&online, 1.5),
        Err(Error::InvalidSpec(_))
    ));
    let wider = LayeredNet::new(&[2, 1], &[Activation::Identity], 0).unwrap();
    assert!(matches!(
        frozen.soft_update(&wider, 0.5),
        Err(Error::Shape { .. })
    ));
}
