//! Versioned JSON model files.
//!
//! A file stores the training data, the kernel parameters and the fitting
//! options; loading rebuilds the model at those fixed parameters, which
//! reproduces the saved model's predictions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use ratkrig::krige::{fit_ok_fixed, fit_rk_fixed, CMethod, CRegularization, FitOptions};
use ratkrig::universal::{fit_uk_fixed, BasisTerm, MeanForm};
use ratkrig::{DataSet, FittedOK, FittedRK, FittedUK, KernelFamily, KernelSpec, Prediction, RegressionBasis, UkVariant};

use crate::error::{HarnessError, VersionError};

pub const FORMAT_VERSION: u64 = 1;

/// Top-level fields every version-1 file must carry.
const REQUIRED_FIELDS: [&str; 6] = ["model", "kernel", "lengthscales", "nugget", "x", "y"];

#[derive(Debug, Clone)]
pub enum SavedModel {
    Ok(FittedOK),
    Rk(FittedRK, CRegularization),
    Uk(FittedUK, CRegularization),
}

impl SavedModel {
    pub fn predict(&self, x: &[f64]) -> ratkrig::Result<Prediction> {
        match self {
            SavedModel::Ok(m) => m.predict(x),
            SavedModel::Rk(m, _) => m.predict(x),
            SavedModel::Uk(m, _) => m.predict(x),
        }
    }

    pub fn data(&self) -> &DataSet {
        match self {
            SavedModel::Ok(m) => m.data(),
            SavedModel::Rk(m, _) => m.data(),
            SavedModel::Uk(m, _) => m.data(),
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        match self {
            SavedModel::Ok(m) => m.spec(),
            SavedModel::Rk(m, _) => m.spec(),
            SavedModel::Uk(m, _) => m.spec(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Ok(_) => "ok",
            SavedModel::Rk(..) => "rk",
            SavedModel::Uk(m, _) => m.variant().as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum TermFile {
    Constant,
    Linear { coord: usize, center: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegularizationFile {
    grid_points: usize,
    bisection_tol: f64,
    feasibility_tol: f64,
    delta_scale: f64,
}

impl From<&CRegularization> for RegularizationFile {
    fn from(r: &CRegularization) -> Self {
        RegularizationFile {
            grid_points: r.grid_points,
            bisection_tol: r.bisection_tol,
            feasibility_tol: r.feasibility_tol,
            delta_scale: r.delta_scale,
        }
    }
}

impl From<&RegularizationFile> for CRegularization {
    fn from(r: &RegularizationFile) -> Self {
        CRegularization {
            grid_points: r.grid_points,
            bisection_tol: r.bisection_tol,
            feasibility_tol: r.feasibility_tol,
            delta_scale: r.delta_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    /// ok, rk, uk or urk.
    model: String,
    kernel: String,
    lengthscales: Vec<f64>,
    nugget: f64,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regularization: Option<RegularizationFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<Vec<TermFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regression_only: Option<bool>,
    /// Informational; ignored on load.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    estimates: Vec<f64>,
}

fn rows_of(data: &DataSet) -> Vec<Vec<f64>> {
    (0..data.n()).map(|i| data.row(i)).collect()
}

fn basis_to_file(basis: &RegressionBasis) -> Result<Vec<TermFile>, HarnessError> {
    basis
        .terms()
        .iter()
        .map(|t| match t {
            BasisTerm::Constant => Ok(TermFile::Constant),
            BasisTerm::Linear { coord, center } => Ok(TermFile::Linear { coord: *coord, center: *center }),
            BasisTerm::Custom { name, .. } => {
                Err(HarnessError::ModelFormat(format!("custom basis term `{name}` cannot be saved")))
            }
        })
        .collect()
}

fn to_file(model: &SavedModel) -> Result<ModelFile, HarnessError> {
    let spec = model.spec();
    let mut file = ModelFile {
        format_version: FORMAT_VERSION,
        model: model.kind().to_string(),
        kernel: spec.family().as_str().to_string(),
        lengthscales: spec.lengthscales().to_vec(),
        nugget: spec.nugget(),
        x: rows_of(model.data()),
        y: model.data().y().iter().copied().collect(),
        c_method: None,
        regularization: None,
        basis: None,
        regression_only: None,
        estimates: Vec::new(),
    };
    match model {
        SavedModel::Ok(m) => file.estimates = vec![m.mu()],
        SavedModel::Rk(m, reg) => {
            file.c_method = Some(m.c_method().as_str().to_string());
            file.regularization = Some(reg.into());
            file.estimates = vec![m.mu()];
        }
        SavedModel::Uk(m, reg) => {
            file.regularization = Some(reg.into());
            file.basis = Some(basis_to_file(m.basis())?);
            file.regression_only = Some(m.mean_form() == MeanForm::RegressionOnly);
            file.estimates = m.beta().iter().copied().collect();
        }
    }
    Ok(file)
}

pub fn model_to_json(model: &SavedModel) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(&to_file(model)?)?)
}

fn check_version(value: &Value) -> Result<(), HarnessError> {
    let obj = value.as_object().ok_or_else(|| HarnessError::ModelFormat("top level is not an object".into()))?;
    let version = match obj.get("format_version") {
        None => return Err(VersionError::MissingVersion.into()),
        Some(v) => v.as_u64().ok_or_else(|| HarnessError::ModelFormat("format_version is not an integer".into()))?,
    };
    if version != FORMAT_VERSION {
        return Err(VersionError::Unsupported { found: version, supported: FORMAT_VERSION }.into());
    }
    if let Some(field) = REQUIRED_FIELDS.iter().find(|f| !obj.contains_key(**f)) {
        return Err(VersionError::MissingField { version, field: field.to_string() }.into());
    }
    Ok(())
}

pub fn model_from_json(text: &str) -> Result<SavedModel, HarnessError> {
    let value: Value = serde_json::from_str(text).map_err(|e| HarnessError::ModelFormat(e.to_string()))?;
    check_version(&value)?;
    let file: ModelFile = serde_json::from_value(value).map_err(|e| HarnessError::ModelFormat(e.to_string()))?;
    let family: KernelFamily = file.kernel.parse()?;
    let spec = KernelSpec::new(family, file.lengthscales.clone(), file.nugget)?;
    let data = DataSet::from_rows(&file.x, file.y.clone())?;
    let regularization = file.regularization.as_ref().map(CRegularization::from).unwrap_or_default();
    let need = |what: &str| HarnessError::ModelFormat(format!("`{}` model needs `{what}`", file.model));
    match file.model.as_str() {
        "ok" => Ok(SavedModel::Ok(fit_ok_fixed(&data, &spec)?)),
        "rk" => {
            let c_method = match file.c_method.as_deref().ok_or_else(|| need("c_method"))? {
                "regularized" => CMethod::Regularized,
                "eigenvector" => CMethod::Eigenvector,
                other => return Err(HarnessError::ModelFormat(format!("unknown c_method `{other}`"))),
            };
            let opts = FitOptions { nugget: file.nugget, c_method, regularization: regularization.clone(), ..Default::default() };
            Ok(SavedModel::Rk(fit_rk_fixed(&data, &spec, &opts)?, regularization))
        }
        "uk" | "urk" => {
            let variant = if file.model == "uk" { UkVariant::Plain } else { UkVariant::Rational };
            let terms = file
                .basis
                .as_ref()
                .ok_or_else(|| need("basis"))?
                .iter()
                .map(|t| match t {
                    TermFile::Constant => BasisTerm::Constant,
                    TermFile::Linear { coord, center } => BasisTerm::Linear { coord: *coord, center: *center },
                })
                .collect();
            let basis = RegressionBasis::new(terms)?;
            let opts = FitOptions { nugget: file.nugget, regularization: regularization.clone(), ..Default::default() };
            let mut model = fit_uk_fixed(&data, &basis, &spec, variant, &opts)?;
            if file.regression_only == Some(true) {
                model = model.with_mean_form(MeanForm::RegressionOnly);
            }
            Ok(SavedModel::Uk(model, regularization))
        }
        other => Err(HarnessError::ModelFormat(format!("unknown model type `{other}`"))),
    }
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel, HarnessError> {
    model_from_json(&std::fs::read_to_string(path)?)
}
