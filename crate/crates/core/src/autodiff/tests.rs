use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

const OP_TOL: f64 = 1e-6;

#[test]
fn matmul_examples() {
    let mut t = Tape::<f64>::new();
    let a = t.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()).unwrap();
    let ones = t.constant(Tensor::new([2, 1], vec![1.0, 1.0]).unwrap()).unwrap();
    let c = t.matmul(a, ones).unwrap();
    assert_eq!(t.value(c).data(), &[3.0, 7.0]);
    let eye = t.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
    let same = t.matmul(a, eye).unwrap();
    assert_eq!(t.value(same), t.value(a));
    let bad = t.constant(Tensor::zeros([3, 1])).unwrap();
    assert!(matches!(t.matmul(a, bad), Err(Error::Shape { .. })));
}

#[test]
fn softmax_examples() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::full([3], 2.5)).unwrap();
    let y = t.softmax(x).unwrap();
    for &v in t.value(y).data() {
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
    }
    let x = t.constant(Tensor::new([2], vec![1000.0, 0.0]).unwrap()).unwrap();
    let y = t.softmax(x).unwrap();
    assert_eq!(t.value(y).data(), &[1.0, 0.0]);
}

#[test]
fn elementwise_examples() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::new([2], vec![0.0, -2.0]).unwrap()).unwrap();
    let s = t.sigmoid(x).unwrap();
    assert_eq!(t.value(s).data()[0], 0.5);
    let l = t.leaky_relu(x, 0.2).unwrap();
    assert_abs_diff_eq!(t.value(l).data()[1], -0.4, epsilon = 1e-15);
    let a = t.constant(Tensor::zeros([4])).unwrap();
    let b = t.constant(Tensor::zeros([4])).unwrap();
    let c = t.concat(&[a, b], 0).unwrap();
    assert_eq!(t.shape(c), &[8]);
    let odd = t.constant(Tensor::zeros([2, 3])).unwrap();
    assert!(t.concat(&[a, odd], 0).is_err());
}

#[test]
fn dropout_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::full([100_000], 1.0)).unwrap();
    assert_eq!(t.dropout(x, 0.0, true, &mut rng).unwrap(), x);
    assert_eq!(t.dropout(x, 0.7, false, &mut rng).unwrap(), x);
    assert!(t.dropout(x, 1.0, true, &mut rng).is_err());
    let y = t.dropout(x, 0.5, true, &mut rng).unwrap();
    let kept = t.value(y).data().iter().filter(|&&v| v != 0.0).count();
    let frac = kept as f64 / 100_000.0;
    assert!((frac - 0.5).abs() < 0.01, "survivor fraction {frac}");
    assert!(t.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
}

#[test]
fn backward_examples() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("x", Tensor::scalar(3.0));
    let mut t = Tape::new();
    let x = t.param(&store, id).unwrap();
    let sq = t.mul(x, x).unwrap();
    let g = t.backward(sq).unwrap();
    assert_eq!(g.get(x).unwrap().item(), 6.0);

    let id0 = store.add("y", Tensor::scalar(0.0));
    let mut t = Tape::new();
    let y = t.param(&store, id0).unwrap();
    let y2 = t.scale(y, 2.0).unwrap();
    let s = t.sigmoid(y2).unwrap();
    let g = t.backward(s).unwrap();
    assert_abs_diff_eq!(g.get(y).unwrap().item(), 0.5, epsilon = 1e-15);
    g.accumulate_into(&mut store);
    assert_eq!(store.get(id).grad.item(), 0.0, "unreachable parameter stays zero");
    assert_abs_diff_eq!(store.get(id0).grad.item(), 0.5, epsilon = 1e-15);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut t = Tape::<f64>::new();
    let x = t.variable(Tensor::zeros([2])).unwrap();
    assert!(matches!(t.backward(x), Err(Error::InvalidArgument(_))));
}

#[test]
fn non_finite_values_are_named() {
    let mut t = Tape::<f64>::new();
    let x = t.constant(Tensor::scalar(f64::MAX)).unwrap();
    let err = t.scale(x, 10.0).unwrap_err();
    assert!(matches!(err, Error::NonFinite { ref op } if op == "scale"));
    assert!(t.constant(Tensor::scalar(f64::NAN)).is_err());
}

#[test]
fn replayed_backward_is_bitwise_deterministic() {
    let run = || {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", random(&[4, 3], 1));
        let mut t = Tape::new();
        let x = t.constant(random(&[5, 4], 2)).unwrap();
        let wv = t.param(&store, w).unwrap();
        let h = t.matmul(x, wv).unwrap();
        let s = t.softmax(h).unwrap();
        let l = t.sum(s).unwrap();
        let sq = t.mul(s, s).unwrap();
        let l2 = t.mean(sq).unwrap();
        let tot = t.add(l, l2).unwrap();
        t.backward(tot).unwrap().get(wv).unwrap().clone()
    };
    assert_eq!(run().data(), run().data());
}

#[test]
fn gradcheck_of_linear_model_is_exact() {
    let mut store = ParamStore::<f64>::new();
    let w = store.add("w", random(&[3, 1], 3));
    let b = store.add("b", random(&[1], 4));
    let x = random(&[6, 3], 5);
    let rep = finite_difference_check(
        &mut store,
        |t, s| {
            let xv = t.constant(x.clone())?;
            let wv = t.param(s, w)?;
            let bv = t.param(s, b)?;
            let h = t.matmul(xv, wv)?;
            let h = t.add_broadcast(h, bv)?;
            t.sum(h)
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert_eq!(rep.coordinates, 4);
    assert!(rep.max_rel_error < 1e-9, "{rep:?}");
}

fn check(inputs: &[Tensor<f64>], op: impl Fn(&mut Tape<f64>, &[Var]) -> crate::Result<Var>) {
    let err = op_gradient_check(inputs, op, 11).unwrap();
    assert!(err < OP_TOL, "relative error {err}");
}

#[test]
fn op_gradients_matmul() {
    check(&[random(&[3, 4], 1), random(&[4, 2], 2)], |t, v| t.matmul(v[0], v[1]));
    check(&[random(&[2, 3, 4], 1), random(&[4, 2], 2)], |t, v| t.matmul(v[0], v[1]));
    check(&[random(&[2, 3, 4], 1), random(&[2, 4, 5], 2)], |t, v| t.matmul(v[0], v[1]));
}

#[test]
fn op_gradients_structural() {
    check(&[random(&[2, 3, 4], 1)], |t, v| t.transpose(v[0]));
    check(&[random(&[3, 4], 1)], |t, v| t.transpose(v[0]));
    check(&[random(&[3, 4], 1), random(&[3, 4], 2)], |t, v| t.add(v[0], v[1]));
    check(&[random(&[2, 3, 4], 1), random(&[4], 2)], |t, v| t.add_broadcast(v[0], v[1]));
    check(&[random(&[3, 4], 1), random(&[3, 4], 2)], |t, v| t.mul(v[0], v[1]));
    check(&[random(&[5, 3], 1), random(&[5], 2)], |t, v| t.mul_rows(v[0], v[1]));
    check(&[random(&[3, 4], 1)], |t, v| t.scale(v[0], -1.7));
    check(&[random(&[4, 3], 1)], |t, v| t.gather_rows(v[0], vec![2, 0, 2, 3]));
    check(&[random(&[2, 3], 1), random(&[2, 5], 2)], |t, v| t.concat(&[v[0], v[1]], 1));
    check(&[random(&[2, 3], 1), random(&[4, 3], 2)], |t, v| t.concat(&[v[0], v[1]], 0));
    check(&[random(&[2, 6], 1)], |t, v| t.reshape(v[0], &[3, 4]));
    check(&[random(&[2, 3], 1)], |t, v| t.tile(v[0], 3));
    check(&[random(&[6, 2], 1)], |t, v| t.segment_sum(v[0], vec![0, 2, 2, 6]));
    check(&[random(&[3, 4], 1)], |t, v| t.sum(v[0]));
    check(&[random(&[3, 4], 1)], |t, v| t.mean(v[0]));
}

#[test]
fn op_gradients_nonlinear() {
    // keep inputs away from the kinks of relu-type functions
    let away = |seed| random(&[3, 4], seed).map(|x| if x.abs() < 0.05 { x + 0.2 } else { x });
    check(&[random(&[3, 4], 1)], |t, v| t.sigmoid(v[0]));
    check(&[away(2)], |t, v| t.relu(v[0]));
    check(&[away(3)], |t, v| t.leaky_relu(v[0], 0.2));
    check(&[away(4)], |t, v| t.elu(v[0], 1.0));
    check(&[random(&[2, 3, 4], 5)], |t, v| t.softmax(v[0]));
    check(&[random(&[7], 6)], |t, v| t.segment_softmax(v[0], vec![0, 3, 3, 7]));
}

#[test]
fn op_gradients_dropout_and_loss() {
    check(&[random(&[4, 5], 1)], |t, v| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        t.dropout(v[0], 0.3, true, &mut rng)
    });
    let probs = random(&[6], 2).map(|x| 0.5 + 0.3 * x);
    check(&[probs], |t, v| {
        t.weighted_bce(v[0], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0], &[2.0, 0.5, 2.0, 2.0, 0.5, 0.5])
    });
}

#[test]
fn bce_matches_hand_value() {
    let mut t = Tape::<f64>::new();
    let p = t.constant(Tensor::new([2], vec![0.8, 0.25]).unwrap()).unwrap();
    let l = t.weighted_bce(p, &[1.0, 0.0], &[1.5, 0.5]).unwrap();
    let expect = (-(1.5 * 0.8f64.ln()) - 0.5 * 0.75f64.ln()) / 2.0;
    assert_abs_diff_eq!(t.value(l).item(), expect, epsilon = 1e-15);
    // clamping keeps the loss finite at p = 0 and p = 1
    let p = t.constant(Tensor::new([2], vec![0.0, 1.0]).unwrap()).unwrap();
    let l = t.weighted_bce(p, &[1.0, 0.0], &[1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(t.value(l).item(), -(1e-7f64).ln(), epsilon = 1e-6);
}

#[test]
fn param_leaf_is_shared() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", Tensor::scalar(2.0));
    let mut t = Tape::new();
    let a = t.param(&store, id).unwrap();
    let b = t.param(&store, id).unwrap();
    assert_eq!(a, b);
    let p = t.mul(a, b).unwrap();
    let g = t.backward(p).unwrap();
    g.accumulate_into(&mut store);
    assert_eq!(store.get(id).grad.item(), 4.0);
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..5,
        vals in proptest::collection::vec(-700.0f64..700.0, 1..40),
    ) {
        let cols = (vals.len() / rows).max(1);
        let n = (vals.len() / cols) * cols;
        let x = Tensor::new([n / cols, cols], vals[..n].to_vec()).unwrap();
        let mut t = Tape::new();
        let xv = t.constant(x).unwrap();
        let y = t.softmax(xv).unwrap();
        for row in t.value(y).data().chunks(cols) {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn clipped_norm_respects_bound(
        grads in proptest::collection::vec(-100.0f64..100.0, 1..30),
        max in 0.01f64..10.0,
    ) {
        let mut store = ParamStore::<f64>::new();
        let half = grads.len() / 2;
        let a = store.add("a", Tensor::zeros([half]));
        let b = store.add("b", Tensor::zeros([grads.len() - half]));
        store.get_mut(a).grad.data_mut().copy_from_slice(&grads[..half]);
        store.get_mut(b).grad.data_mut().copy_from_slice(&grads[half..]);
        clip_global_norm(&mut store, max);
        prop_assert!(store.global_grad_norm() <= max + 1e-9);
    }
}
