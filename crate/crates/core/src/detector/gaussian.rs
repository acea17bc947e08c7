//! Linear and quadratic discriminant analysis for two classes.

use nalgebra::{DMatrix, DVector};

use crate::tensor::ops::sigmoid;
use crate::{Error, Result};

/// Added to every covariance diagonal.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ClassFit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

fn class_fit(x: &[Vec<f64>], y: &[bool], class: bool) -> ClassFit {
    let d = x[0].len();
    let rows: Vec<&Vec<f64>> = x
        .iter()
        .zip(y)
        .filter(|(_, &c)| c == class)
        .map(|(v, _)| v)
        .collect();
    let n = rows.len();
    let mut mean = DVector::zeros(d);
    for r in &rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for r in &rows {
        let c = DVector::from_column_slice(r) - &mean;
        cov += &c * c.transpose();
    }
    ClassFit {
        mean,
        cov: cov / (n.max(2) - 1) as f64,
        count: n,
    }
}

fn ridge(m: &DMatrix<f64>) -> DMatrix<f64> {
    m + DMatrix::identity(m.nrows(), m.ncols()) * COVARIANCE_RIDGE
}

/// Shared-covariance model: `P(wrong | x) = sigmoid(w.x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Lda {
    pub means: [DVector<f64>; 2],
    pub cov: DMatrix<f64>,
    pub priors: [f64; 2],
    pub w: DVector<f64>,
    pub b: f64,
}

impl Lda {
    pub fn fit(x: &[Vec<f64>], y: &[bool]) -> Result<Self> {
        let c0 = class_fit(x, y, false);
        let c1 = class_fit(x, y, true);
        let n = (c0.count + c1.count) as f64;
        // pooled within-class covariance
        let pooled = (&c0.cov * (c0.count.max(2) - 1) as f64
            + &c1.cov * (c1.count.max(2) - 1) as f64)
            / (n - 2.0).max(1.0);
        let priors = [c0.count as f64 / n, c1.count as f64 / n];
        Self::from_parts([c0.mean, c1.mean], pooled, priors)
    }

    pub fn from_parts(
        means: [DVector<f64>; 2],
        cov: DMatrix<f64>,
        priors: [f64; 2],
    ) -> Result<Self> {
        let chol = ridge(&cov)
            .cholesky()
            .ok_or_else(|| Error::Degenerate("LDA covariance is not positive definite".into()))?;
        let w = chol.solve(&(&means[1] - &means[0]));
        let mid = (&means[0] + &means[1]) * 0.5;
        let b = -w.dot(&mid) + (priors[1] / priors[0]).ln();
        Ok(Self {
            means,
            cov,
            priors,
            w,
            b,
        })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.w.dot(&DVector::from_column_slice(x)) + self.b)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Quadratic {
    mean: DVector<f64>,
    inv: DMatrix<f64>,
    log_det: f64,
}

impl Quadratic {
    fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let chol = ridge(cov)
            .cholesky()
            .ok_or_else(|| Error::Degenerate("QDA covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            mean: mean.clone(),
            inv: chol.inverse(),
            log_det,
        })
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let c = x - &self.mean;
        -0.5 * (self.log_det + c.dot(&(&self.inv * &c)))
    }
}

/// Per-class covariance model.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Qda {
    pub means: [DVector<f64>; 2],
    pub covs: [DMatrix<f64>; 2],
    pub priors: [f64; 2],
    parts: [Quadratic; 2],
}

impl Qda {
    pub fn fit(x: &[Vec<f64>], y: &[bool]) -> Result<Self> {
        let c0 = class_fit(x, y, false);
        let c1 = class_fit(x, y, true);
        let n = (c0.count + c1.count) as f64;
        Self::from_parts(
            [c0.mean, c1.mean],
            [c0.cov, c1.cov],
            [c0.count as f64 / n, c1.count as f64 / n],
        )
    }

    pub fn from_parts(
        means: [DVector<f64>; 2],
        covs: [DMatrix<f64>; 2],
        priors: [f64; 2],
    ) -> Result<Self> {
        let parts = [
            Quadratic::new(&means[0], &covs[0])?,
            Quadratic::new(&means[1], &covs[1])?,
        ];
        Ok(Self {
            means,
            covs,
            priors,
            parts,
        })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        let z = self.parts[1].log_density(&v) + self.priors[1].ln()
            - self.parts[0].log_density(&v)
            - self.priors[0].ln();
        sigmoid(z)
    }
}
