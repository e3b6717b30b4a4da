//! Fits a one-layer regression with the reverse-mode tape and checks its
//! gradients against finite differences.

use planoforge::numerics::{forward_op, grad_check, Adam, Graph, NumericsError, OpKind, Params, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn loss(g: &Graph, x: &Tensor, y: &Tensor) -> Result<Var, NumericsError> {
    let h = g.matmul(g.constant(x.clone()), g.param("w")?)?;
    let h = g.add_bias(h, g.param("b")?)?;
    g.mean(g.square(g.sub(h, g.constant(y.clone()))?)?)
}

fn main() -> Result<(), NumericsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::randn(&[64, 3], &mut rng);
    let truth = Tensor::new(vec![3, 1], vec![1.5, -2.0, 0.5])?;
    let y = forward_op(&OpKind::MatMul, &[&x, &truth])?.map(|v| v + 0.3);

    let mut params = Params::new();
    params.insert("w", Tensor::zeros(&[3, 1]));
    params.insert("b", Tensor::zeros(&[1]));
    let err = grad_check(|g| loss(g, &x, &y), &params, 1e-5)?;
    println!("gradient check: worst relative error {err:.2e}");

    let mut adam = Adam::default();
    for step in 0..=300 {
        let g = Graph::new(&params);
        let l = loss(&g, &x, &y)?;
        let value = g.value(l).item().unwrap_or(f64::NAN);
        let grads = g.backward(l)?;
        drop(g);
        adam.step(&mut params, &grads, 0.05)?;
        if step % 100 == 0 {
            println!("step {step:>3}: mse {value:.6}");
        }
    }
    println!("w = {:?}, b = {:?}", params.get("w").unwrap().data(), params.get("b").unwrap().data());
    Ok(())
}
