use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::profile::ProfileRecord;
use crate::{Error, Result};

pub const DEFAULT_SAFETY_MARGIN: f64 = 1.1;

/// Anything that predicts a non-negative resource cost from sample features.
pub trait CostPredictor {
    fn predict(&self, features: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> CostPredictor for F {
    fn predict(&self, features: &[f64]) -> f64 {
        self(features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_samples: usize,
    pub rmse: f64,
    pub max_abs_residual: f64,
    pub r_squared: f64,
}

/// Affine cost predictor: `max(0, w·x + b) * safety_margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub safety_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
}

impl CostModel {
    pub fn new(weights: Vec<f64>, intercept: f64, safety_margin: f64) -> Result<Self> {
        check_margin(safety_margin)?;
        if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("cost model coefficients must be finite".into()));
        }
        Ok(Self { weights, intercept, safety_margin, fit: None })
    }

    pub fn with_safety_margin(mut self, safety_margin: f64) -> Result<Self> {
        check_margin(safety_margin)?;
        self.safety_margin = safety_margin;
        Ok(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: CostModel = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        check_margin(model.safety_margin)?;
        Ok(model)
    }
}

impl CostPredictor for CostModel {
    fn predict(&self, features: &[f64]) -> f64 {
        assert_eq!(
            features.len(),
            self.weights.len(),
            "feature dimension does not match cost model"
        );
        let raw: f64 = self.intercept + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>();
        raw.max(0.0) * self.safety_margin
    }
}

fn check_margin(m: f64) -> Result<()> {
    if m.is_finite() && m >= 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("safety margin must be a finite factor >= 1, got {m}")))
    }
}

fn column_name(j: usize) -> String {
    if j == 0 {
        "intercept".to_owned()
    } else {
        format!("f{}", j - 1)
    }
}

/// Least-squares fit of peak cost on features (plus intercept) over the
/// non-failed records, solved by QR. A column whose QR pivot vanishes
/// relative to its own norm is reported together with the earlier columns
/// it is a combination of.
pub fn fit_cost_model(records: &[ProfileRecord], safety_margin: f64) -> Result<CostModel> {
    check_margin(safety_margin)?;
    let usable: Vec<&ProfileRecord> = records.iter().filter(|r| !r.is_failed()).collect();
    let dim = usable.first().map_or(0, |r| r.features.len());
    if usable.len() < dim + 1 {
        return Err(Error::InsufficientData { needed: dim + 1, got: usable.len() });
    }
    if let Some(r) = usable.iter().find(|r| r.features.len() != dim) {
        return Err(Error::Dimension(format!(
            "sample {} has {} features, expected {dim}",
            r.sample_id,
            r.features.len()
        )));
    }

    let m = usable.len();
    let n = dim + 1;
    let x = DMatrix::from_fn(m, n, |i, j| if j == 0 { 1.0 } else { usable[i].features[j - 1] });
    let y = DVector::from_iterator(m, usable.iter().map(|r| r.peak_cost.expect("non-failed")));

    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..n {
        let col_norm = x.column(j).norm();
        if r[(j, j)].abs() <= 1e-10 * col_norm.max(f64::MIN_POSITIVE) || col_norm == 0.0 {
            return Err(Error::DegenerateFit { columns: collinear_group(&r, j) });
        }
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::DegenerateFit { columns: vec!["<singular>".into()] })?;

    let fitted = &x * &beta;
    let residuals = &y - &fitted;
    let sse = residuals.norm_squared();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let fit = FitReport {
        n_samples: m,
        rmse: (sse / m as f64).sqrt(),
        max_abs_residual: residuals.amax(),
        r_squared: if sst > 0.0 { 1.0 - sse / sst } else { 1.0 },
    };

    Ok(CostModel {
        weights: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
        safety_margin,
        fit: Some(fit),
    })
}

/// Names column `j` and the earlier columns with nonzero weight in the
/// combination that reproduces it.
fn collinear_group(r: &DMatrix<f64>, j: usize) -> Vec<String> {
    let mut names = Vec::new();
    if j > 0 {
        let lead = r.view((0, 0), (j, j)).into_owned();
        let rhs = r.view((0, j), (j, 1)).column(0).into_owned();
        if let Some(coef) = lead.solve_upper_triangular(&rhs) {
            let scale = coef.amax().max(f64::MIN_POSITIVE);
            names.extend(
                coef.iter()
                    .enumerate()
                    .filter(|(_, c)| c.abs() > 1e-8 * scale)
                    .map(|(k, _)| column_name(k)),
            );
        }
    }
    names.push(column_name(j));
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(xs: &[&[f64]], ys: &[f64]) -> Vec<ProfileRecord> {
        xs.iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (x, &y))| ProfileRecord::ok(i, x.to_vec(), y))
            .collect()
    }

    #[test]
    fn exact_linear_fit() {
        let r = recs(&[&[1.0], &[2.0], &[3.0]], &[2.0, 4.0, 6.0]);
        let model = fit_cost_model(&r, 1.0).unwrap();
        assert!((model.weights[0] - 2.0).abs() < 1e-12);
        assert!(model.intercept.abs() < 1e-12);
        assert!(model.fit.as_ref().unwrap().rmse < 1e-12);

        let model = model.with_safety_margin(1.1).unwrap();
        assert!((model.predict(&[2.0]) - 4.4).abs() < 1e-12);
    }

    #[test]
    fn predict_clamps_negative() {
        let model = CostModel::new(vec![1.0], -10.0, 1.5).unwrap();
        assert_eq!(model.predict(&[4.0]), 0.0);
        assert_eq!(model.predict(&[12.0]), 3.0);
        assert!(CostModel::new(vec![1.0], 0.0, 0.9).is_err());
    }

    #[test]
    fn failed_records_are_excluded() {
        let mut r = recs(&[&[1.0], &[2.0], &[3.0]], &[2.0, 4.0, 6.0]);
        r.push(ProfileRecord::failed(3, vec![100.0]));
        let model = fit_cost_model(&r, 1.0).unwrap();
        assert_eq!(model.fit.unwrap().n_samples, 3);
        assert!((model.weights[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_records() {
        let r = recs(&[&[1.0, 2.0], &[2.0, 1.0]], &[1.0, 2.0]);
        assert!(matches!(
            fit_cost_model(&r, 1.0),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn collinear_features_are_named() {
        // f1 = 2 * f0
        let r = recs(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0], &[4.0, 8.0]], &[1.0, 2.0, 3.0, 5.0]);
        match fit_cost_model(&r, 1.0) {
            Err(Error::DegenerateFit { columns }) => assert_eq!(columns, vec!["f0", "f1"]),
            other => panic!("unexpected {other:?}"),
        }
        // constant feature duplicates the intercept
        let r = recs(&[&[5.0, 1.0], &[5.0, 2.0], &[5.0, 3.0]], &[1.0, 2.0, 3.0]);
        match fit_cost_model(&r, 1.0) {
            Err(Error::DegenerateFit { columns }) => assert_eq!(columns, vec!["intercept", "f0"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("costmodel.json");
        let r = recs(&[&[1.0], &[2.0], &[3.0]], &[3.0, 5.0, 7.5]);
        let model = fit_cost_model(&r, DEFAULT_SAFETY_MARGIN).unwrap();
        model.save(&path).unwrap();
        assert_eq!(CostModel::load(&path).unwrap(), model);
    }
}
