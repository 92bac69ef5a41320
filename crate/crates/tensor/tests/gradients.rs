use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor::{Conv2d, Linear, ParamStore, Tensor};

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Vec<f32> {
    (0..tensor::numel(shape)).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Central-difference check of d f(x) / dx against the analytic gradient.
fn check_grad(shape: &[usize], seed: u64, f: impl Fn(&Tensor) -> Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = random(&mut rng, shape);
    let x = Tensor::var(x0.clone(), shape);
    let y = f(&x);
    let grads = y.backward();
    let analytic = grads.get(&x).expect("gradient for input").to_vec();
    let h = 1e-2f32;
    for i in 0..x0.len() {
        let mut plus = x0.clone();
        plus[i] += h;
        let mut minus = x0.clone();
        minus[i] -= h;
        let fp = f(&Tensor::new(plus, shape)).item() as f64;
        let fm = f(&Tensor::new(minus, shape)).item() as f64;
        let numeric = (fp - fm) / (2.0 * h as f64);
        let a = analytic[i] as f64;
        let tol = 2e-2 * (1.0 + numeric.abs().max(a.abs()));
        assert!((numeric - a).abs() < tol, "element {i}: numeric {numeric} vs analytic {a}");
    }
}

fn weights(seed: u64, shape: &[usize]) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(random(&mut rng, shape), shape)
}

#[test]
fn elementwise_and_broadcast_gradients() {
    let b = weights(7, &[1, 3, 1, 1]);
    check_grad(&[2, 3, 2, 2], 1, |x| x.mul(&b).add(&b).square().sum_all());
    check_grad(&[1, 3, 1, 1], 2, |x| {
        let big = weights(3, &[2, 3, 2, 2]);
        big.mul(x).sub(x).sum_all()
    });
    let denom = weights(9, &[2, 3]).abs().add_scalar(0.5);
    check_grad(&[2, 3], 4, |x| x.div(&denom).sum_all());
    check_grad(&[2, 3], 5, |x| denom.div(&x.square().add_scalar(0.5)).sum_all());
    check_grad(&[4, 3], 6, |x| x.softplus().mul_scalar(0.7).sum_all());
    check_grad(&[4, 3], 8, |x| x.leaky_relu(0.2).exp().mean_all());
    check_grad(&[4, 3], 10, |x| x.square().add_scalar(0.1).sqrt().sum_all());
}

#[test]
fn reduction_reshape_and_slicing_gradients() {
    let w = weights(11, &[2, 3, 1, 1]);
    check_grad(&[2, 3, 2, 2], 12, |x| x.mean_keepdim(&[2, 3]).mul(&w).sum_all());
    check_grad(&[2, 6], 13, |x| {
        let y = x.reshape(&[3, 4]);
        y.narrow(1, 1, 2).square().sum_all()
    });
    let other = weights(14, &[2, 2, 3]);
    check_grad(&[2, 1, 3], 15, |x| Tensor::concat(&[x.clone(), other.clone()], 1).square().sum_all());
}

#[test]
fn matmul_gradients() {
    let b = weights(21, &[5, 4]);
    check_grad(&[3, 4], 22, |x| x.matmul_bt(&b).square().sum_all());
    let a = weights(23, &[3, 4]);
    check_grad(&[5, 4], 24, |x| a.matmul_bt(x).square().sum_all());
}

#[test]
fn convolution_gradients() {
    let w = weights(31, &[4, 2, 3, 3]);
    check_grad(&[2, 2, 5, 5], 32, |x| x.conv2d(&w, 1).square().sum_all());
    let x = weights(33, &[2, 2, 5, 5]);
    check_grad(&[4, 2, 3, 3], 34, |w| x.conv2d(w, 1).square().sum_all());
    let w1 = weights(35, &[3, 2, 1, 1]);
    check_grad(&[1, 2, 4, 4], 36, |x| x.conv2d(&w1, 0).square().sum_all());
}

#[test]
fn resampling_and_normalization_gradients() {
    let w = weights(41, &[1, 2, 8, 8]);
    check_grad(&[1, 2, 4, 4], 42, |x| x.upsample2x().mul(&w).sum_all());
    let w2 = weights(43, &[1, 2, 2, 2]);
    check_grad(&[1, 2, 4, 4], 44, |x| x.avg_pool2x().mul(&w2).sum_all());
    let w3 = weights(45, &[2, 2, 3, 3]);
    check_grad(&[2, 2, 3, 3], 46, |x| x.instance_norm(1e-5).mul(&w3).sum_all());
}

#[test]
fn convolution_matches_direct_summation() {
    let x = weights(51, &[1, 2, 4, 5]);
    let w = weights(52, &[3, 2, 3, 3]);
    let y = x.conv2d(&w, 1);
    assert_eq!(y.shape(), &[1, 3, 4, 5]);
    for o in 0..3 {
        for oy in 0..4 {
            for ox in 0..5 {
                let mut acc = 0.0f32;
                for c in 0..2 {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let iy = oy as isize + ky as isize - 1;
                            let ix = ox as isize + kx as isize - 1;
                            if (0..4).contains(&iy) && (0..5).contains(&ix) {
                                acc += x.data()[(c * 4 + iy as usize) * 5 + ix as usize]
                                    * w.data()[((o * 2 + c) * 3 + ky) * 3 + kx];
                            }
                        }
                    }
                }
                let got = y.data()[(o * 4 + oy) * 5 + ox];
                assert!((got - acc).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn shared_subexpressions_accumulate() {
    let x = Tensor::var(vec![2.0], &[1]);
    let y = x.mul(&x).add(&x);
    let g = y.sum_all().backward();
    assert_eq!(g.get(&x).unwrap(), &[5.0]);
}

#[test]
fn constants_do_not_record_graph() {
    let a = Tensor::new(vec![1.0, 2.0], &[2]);
    let b = a.square().sum_all();
    assert!(!b.requires_grad());
    assert!(b.backward().is_empty());
}

#[test]
fn layers_train_on_a_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut store = ParamStore::new();
    let conv = Conv2d::new("c", 1, 2, 3);
    let lin = Linear::new("l", 2 * 4 * 4, 1).with_gain(1.0);
    conv.init(&mut store, &mut rng);
    lin.init(&mut store, 0.0, &mut rng);
    let x = weights(61, &[4, 1, 4, 4]);
    let target = Tensor::new(vec![1.0, -1.0, 0.5, 0.0], &[4, 1]);
    let mut opt = tensor::Adam::new(0.02, 0.9, 0.999);
    let loss_of = |store: &ParamStore| {
        let h = conv.forward(store, &x).leaky_relu(0.2).reshape(&[4, 32]);
        lin.forward(store, &h).sub(&target).square().mean_all()
    };
    let first = loss_of(&store).item();
    for _ in 0..200 {
        let loss = loss_of(&store);
        let grads = loss.backward();
        opt.step(&mut store, &grads);
    }
    let last = loss_of(&store).item();
    assert!(last < 0.05 * first, "loss {first} -> {last}");
}

proptest! {
    /// Broadcasting and reduction are adjoint: <broadcast(a), g> == <a, reduce(g)>.
    #[test]
    fn broadcast_reduce_adjoint(seed in 0u64..1000, c in 1usize..4, h in 1usize..4) {
        let a_shape = [1, c, 1, h];
        let out_shape = [2, c, 3, h];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::var(random(&mut rng, &a_shape), &a_shape);
        let g = Tensor::new(random(&mut rng, &out_shape), &out_shape);
        let y = a.add(&Tensor::zeros(&out_shape)).mul(&g).sum_all();
        let grads = y.backward();
        let ga = grads.get(&a).unwrap();
        let lhs: f64 = y.item() as f64;
        let rhs: f64 = a.data().iter().zip(ga).map(|(x, y)| (*x as f64) * (*y as f64)).sum();
        prop_assert!((lhs - rhs).abs() < 1e-3 * (1.0 + lhs.abs()));
    }
}
