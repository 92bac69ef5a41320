use tensor::Tensor;

use crate::error::{Error, Result};

fn check_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite {what} logits")))
    }
}

/// Non-saturating generator loss, `mean softplus(-D(fake))`.
pub fn generator_loss(d_fake: &Tensor) -> Result<Tensor> {
    check_finite(d_fake, "fake")?;
    Ok(d_fake.neg().softplus().mean_all())
}

/// `mean softplus(-D(real)) + mean softplus(D(fake))`.
pub fn discriminator_loss(d_real: &Tensor, d_fake: &Tensor) -> Result<Tensor> {
    check_finite(d_real, "real")?;
    check_finite(d_fake, "fake")?;
    Ok(d_real.neg().softplus().mean_all().add(&d_fake.softplus().mean_all()))
}

/// Exact gradient penalty value and the per-input gradients it was built from.
#[derive(Clone, Debug)]
pub struct R1Output {
    pub penalty: f64,
    pub input_grads: Vec<Vec<f32>>,
}

/// `(gamma / 2) * mean_b ||grad_x D(x_b)||^2` over a real batch. The critic
/// receives gradient-tracking copies of `real`; with several inputs (frame
/// pairs) the norm runs over all of them.
pub fn r1_penalty(
    critic: impl Fn(&[Tensor]) -> Result<Tensor>,
    real: &[Tensor],
    gamma: f32,
) -> Result<R1Output> {
    let inputs: Vec<Tensor> = real.iter().map(|t| t.detach_var()).collect();
    let logits = critic(&inputs)?;
    check_finite(&logits, "real")?;
    let grads = logits.sum_all().backward();
    let batch = real[0].shape()[0] as f64;
    let mut sq = 0f64;
    let input_grads: Vec<Vec<f32>> = inputs
        .iter()
        .map(|x| grads.get(x).map_or_else(|| vec![0.0; x.numel()], |g| g.to_vec()))
        .collect();
    for g in &input_grads {
        sq += g.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
    }
    Ok(R1Output {
        penalty: gamma as f64 / 2.0 * sq / batch,
        input_grads,
    })
}

/// Differentiable stand-in whose parameter gradient approximates that of the
/// R1 penalty: a central difference of the critic along the (fixed) input
/// gradient `v`, `(gamma / B) * sum_b [D(x + h v) - D(x - h v)] / (2h)`.
/// `step` sets the root-mean-square size of `h v`.
pub fn r1_surrogate(
    critic: impl Fn(&[Tensor]) -> Result<Tensor>,
    real: &[Tensor],
    r1: &R1Output,
    gamma: f32,
    step: f32,
) -> Result<Tensor> {
    let count: usize = r1.input_grads.iter().map(|g| g.len()).sum();
    let sq: f64 = r1
        .input_grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|&v| (v as f64).powi(2))
        .sum();
    let rms = (sq / count as f64).sqrt();
    if rms == 0.0 || !rms.is_finite() {
        return Ok(Tensor::scalar(0.0));
    }
    let h = step as f64 / rms;
    let batch = real[0].shape()[0];
    let shifted: Vec<Tensor> = real
        .iter()
        .zip(&r1.input_grads)
        .map(|(x, g)| {
            let xd = x.data();
            let plus: Vec<f32> = xd.iter().zip(g).map(|(&a, &v)| (a as f64 + h * v as f64) as f32).collect();
            let minus: Vec<f32> = xd.iter().zip(g).map(|(&a, &v)| (a as f64 - h * v as f64) as f32).collect();
            let mut both = plus;
            both.extend(minus);
            let mut shape = x.shape().to_vec();
            shape[0] *= 2;
            Tensor::new(both, &shape)
        })
        .collect();
    let logits = critic(&shifted)?;
    check_finite(&logits, "perturbed real")?;
    let diff = logits.narrow(0, 0, batch).sub(&logits.narrow(0, batch, batch));
    Ok(diff.sum_all().mul_scalar((gamma as f64 / (2.0 * h * batch as f64)) as f32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn softplus(x: f64) -> f64 {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }

    #[test]
    fn scalar_oracles() {
        let z = Tensor::new(vec![0.0], &[1, 1]);
        assert!((generator_loss(&z).unwrap().item() as f64 - 2f64.ln()).abs() < 1e-6);
        let real = Tensor::new(vec![1.5, -0.5], &[2, 1]);
        let fake = Tensor::new(vec![0.25, -2.0], &[2, 1]);
        let want = (softplus(-1.5) + softplus(0.5)) / 2.0 + (softplus(0.25) + softplus(-2.0)) / 2.0;
        assert!((discriminator_loss(&real, &fake).unwrap().item() as f64 - want).abs() < 1e-6);
        let far = discriminator_loss(&Tensor::new(vec![60.0], &[1, 1]), &Tensor::new(vec![-60.0], &[1, 1])).unwrap();
        assert!(far.item() < 1e-20);
    }

    #[test]
    fn generator_loss_decreases_in_logit() {
        let mut prev = f32::INFINITY;
        for k in -20..20 {
            let v = generator_loss(&Tensor::new(vec![k as f32 * 0.5], &[1, 1])).unwrap().item();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn nan_logits_are_numeric_errors() {
        let bad = Tensor::new(vec![f32::NAN], &[1, 1]);
        assert!(matches!(generator_loss(&bad), Err(Error::Numeric(_))));
        assert!(matches!(discriminator_loss(&bad, &bad), Err(Error::Numeric(_))));
    }

    #[test]
    fn penalty_closed_forms() {
        let x = Tensor::new(vec![0.3; 2 * 3 * 4 * 4], &[2, 3, 4, 4]);
        let constant = |_: &[Tensor]| Ok(Tensor::new(vec![1.0, 1.0], &[2, 1]));
        assert_eq!(r1_penalty(constant, std::slice::from_ref(&x), 10.0).unwrap().penalty, 0.0);
        let sum = |xs: &[Tensor]| Ok(xs[0].sum_keepdim(&[1, 2, 3]).reshape(&[2, 1]));
        let out = r1_penalty(sum, std::slice::from_ref(&x), 10.0).unwrap();
        assert!((out.penalty - 5.0 * 48.0).abs() < 1e-9);
    }
}
