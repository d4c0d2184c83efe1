use crate::error::{Error, Result};
use crate::graph::{GanKind, GanRole, Graph};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Adversarial objective over a set of logit maps.
pub fn gan_loss<T: Scalar>(maps: &[Tensor<T>], role: GanRole, kind: GanKind) -> Result<f64> {
    if maps.is_empty() || maps.iter().any(|m| m.is_empty()) {
        return Err(Error::Shape("adversarial loss needs non-empty logit maps".into()));
    }
    let mut g = Graph::new();
    let vars: Vec<_> = maps.iter().map(|m| g.constant(m.clone())).collect();
    let l = g.gan(&vars, role, kind);
    Ok(g.value(l).item().f64())
}

/// Mean absolute difference.
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} and target {:?} differ",
            pred.shape(),
            target.shape()
        )));
    }
    let mut g = Graph::new();
    let p = g.constant(pred.clone());
    let t = g.constant(target.clone());
    let l = g.l1(p, t);
    Ok(g.value(l).item().f64())
}
