use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{batch_proba, fill_uniform, softmax_xent_grad, Arch, Model};
use crate::error::Result;
use crate::predictors::ProbClassifier;
use crate::rng::RngStream;
use crate::tasks::Features;

/// `softmax(W z + b)` with `W` of shape `N x d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitModel {
    w: Array2<f64>,
    b: Array1<f64>,
}

impl LogitModel {
    /// Weights uniform on `[-scale, scale]`, zero bias.
    pub fn init(num_classes: usize, d: usize, scale: f64, rng: &mut RngStream) -> Self {
        let mut w = Array2::zeros((num_classes, d));
        fill_uniform(w.as_slice_mut().unwrap(), scale, rng);
        LogitModel {
            w,
            b: Array1::zeros(num_classes),
        }
    }

    pub(crate) fn from_arrays(w: Array2<f64>, b: Array1<f64>) -> Self {
        LogitModel { w, b }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.b
    }
}

impl Model for LogitModel {
    fn arch(&self) -> Arch {
        Arch::Logit
    }

    fn d(&self) -> usize {
        self.w.ncols()
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice().unwrap(), self.b.as_slice().unwrap()]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_slice_mut().unwrap(), self.b.as_slice_mut().unwrap()]
    }

    fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[usize], grad: &mut Self) -> f64 {
        let mut g = self.logits(x);
        let loss = softmax_xent_grad(&mut g, y);
        general_mat_mul(1.0, &g.t(), &x, 0.0, &mut grad.w);
        grad.b = g.sum_axis(Axis(0));
        loss
    }
}

impl ProbClassifier for LogitModel {
    fn num_classes(&self) -> usize {
        self.w.nrows()
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        Ok(batch_proba(self, &[x])?.pop().unwrap())
    }

    fn predict_proba_batch(&self, xs: &[&Features]) -> Result<Vec<Vec<f64>>> {
        batch_proba(self, xs)
    }

    fn name(&self) -> String {
        "logit".into()
    }
}
