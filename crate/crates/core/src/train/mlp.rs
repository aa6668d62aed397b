use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{batch_proba, fill_uniform, softmax_xent_grad, Arch, Model};
use crate::error::Result;
use crate::predictors::ProbClassifier;
use crate::rng::RngStream;
use crate::tasks::Features;

/// `softmax(W2 sigmoid(W1 z + b1) + b2)` with `H` hidden units.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl MlpModel {
    /// Both weight matrices uniform on `[-scale, scale]`, zero biases.
    pub fn init(num_classes: usize, d: usize, hidden: usize, scale: f64, rng: &mut RngStream) -> Self {
        let mut w1 = Array2::zeros((hidden, d));
        let mut w2 = Array2::zeros((num_classes, hidden));
        fill_uniform(w1.as_slice_mut().unwrap(), scale, rng);
        fill_uniform(w2.as_slice_mut().unwrap(), scale, rng);
        MlpModel {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(num_classes),
        }
    }

    pub(crate) fn from_arrays(w1: Array2<f64>, b1: Array1<f64>, w2: Array2<f64>, b2: Array1<f64>) -> Self {
        MlpModel { w1, b1, w2, b2 }
    }

    fn hidden_act(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = x.dot(&self.w1.t()) + &self.b1;
        a.mapv_inplace(sigmoid);
        a
    }
}

impl Model for MlpModel {
    fn arch(&self) -> Arch {
        Arch::Mlp
    }

    fn d(&self) -> usize {
        self.w1.ncols()
    }

    fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }

    fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.hidden_act(x).dot(&self.w2.t()) + &self.b2
    }

    fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[usize], grad: &mut Self) -> f64 {
        let h = self.hidden_act(x);
        let mut g = h.dot(&self.w2.t()) + &self.b2;
        let loss = softmax_xent_grad(&mut g, y);
        general_mat_mul(1.0, &g.t(), &h, 0.0, &mut grad.w2);
        grad.b2 = g.sum_axis(Axis(0));
        // back through the sigmoid
        let mut dh = g.dot(&self.w2);
        dh.zip_mut_with(&h, |d, a| *d *= a * (1.0 - a));
        general_mat_mul(1.0, &dh.t(), &x, 0.0, &mut grad.w1);
        grad.b1 = dh.sum_axis(Axis(0));
        loss
    }
}

impl ProbClassifier for MlpModel {
    fn num_classes(&self) -> usize {
        self.w2.nrows()
    }

    fn predict_proba(&self, x: &Features) -> Result<Vec<f64>> {
        Ok(batch_proba(self, &[x])?.pop().unwrap())
    }

    fn predict_proba_batch(&self, xs: &[&Features]) -> Result<Vec<Vec<f64>>> {
        batch_proba(self, xs)
    }

    fn name(&self) -> String {
        "mlp".into()
    }
}
