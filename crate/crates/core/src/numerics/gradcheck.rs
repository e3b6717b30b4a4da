use super::{Graph, NumericsError, Params, Tensor, Var};

/// Largest relative disagreement between reverse-mode gradients of `loss`
/// and central finite differences with the given `step`, over every entry
/// of every parameter. Relative error is `|analytic − numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(loss: F, params: &Params, step: f64) -> Result<f64, NumericsError>
where
    F: Fn(&Graph<'_>) -> Result<Var, NumericsError>,
{
    if !(step > 1e-8 && step < 1e-2) {
        return Err(NumericsError::InvalidArgument(format!(
            "finite-difference step {step} outside (1e-8, 1e-2)"
        )));
    }
    let analytic = {
        let graph = Graph::new(params);
        let out = loss(&graph)?;
        check_finite(&graph.value(out), "loss")?;
        graph.backward(out)?
    };
    let eval = |p: &Params| -> Result<f64, NumericsError> {
        let graph = Graph::new(p);
        let out = loss(&graph)?;
        let value = graph.value(out);
        check_finite(&value, "perturbed loss")?;
        value
            .item()
            .ok_or_else(|| NumericsError::NonScalarLoss(value.shape().to_vec()))
    };

    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (name, base) in params.iter() {
        let grad = &analytic[name];
        check_finite(grad, name)?;
        for i in 0..base.len() {
            let mut data = base.to_vec();
            data[i] = base.data()[i] + step;
            probe.insert(name.clone(), Tensor::new(base.shape().to_vec(), data.clone())?);
            let plus = eval(&probe)?;
            data[i] = base.data()[i] - step;
            probe.insert(name.clone(), Tensor::new(base.shape().to_vec(), data)?);
            let minus = eval(&probe)?;
            let numeric = (plus - minus) / (2.0 * step);
            let err = (grad.data()[i] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
        probe.insert(name.clone(), base.clone());
    }
    Ok(worst)
}

fn check_finite(t: &Tensor, context: &str) -> Result<(), NumericsError> {
    match t.data().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(NumericsError::NonFinite {
            context: context.to_string(),
            index,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_to_round_off() {
        let mut p = Params::new();
        p.insert("x", Tensor::scalar(3.0));
        let err = grad_check(|g| { let x = g.param("x")?; g.mul(x, x) }, &p, 1e-4).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn dead_relu_region_gives_zero_error() {
        let mut p = Params::new();
        p.insert("x", Tensor::vector(&[-3.0, -1.0, -0.5]).unwrap());
        let err = grad_check(|g| { let x = g.param("x")?; let r = g.relu(x)?; g.sum(r) }, &p, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn step_outside_range_is_rejected() {
        let mut p = Params::new();
        p.insert("x", Tensor::scalar(1.0));
        assert!(grad_check(|g| g.param("x"), &p, 0.5).is_err());
        assert!(grad_check(|g| g.param("x"), &p, 1e-9).is_err());
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut p = Params::new();
        p.insert("x", Tensor::scalar(800.0));
        let res = grad_check(|g| { let x = g.param("x")?; g.exp(x) }, &p, 1e-5);
        assert!(matches!(res, Err(NumericsError::NonFinite { .. })));
    }
}
