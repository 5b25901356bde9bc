//! Versioned JSON model files.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`) and parsed with
//! correct rounding, so save → load → save is byte-identical.

use std::fs;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{MrdError, Result};
use crate::gplvm::{FitMode, GplvmModel, KernelChoice, LatentDistribution};
use crate::kernels::ArdKernelParams;
use crate::multiview::{MrdModel, ViewModel};
use crate::optimize::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredLatent {
    pub means: Vec<Vec<f64>>,
    /// Absent for MAP models.
    pub variances: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredView {
    pub name: String,
    pub columns: Vec<String>,
    pub kernel: ArdKernelParams,
    /// Absent for MAP models.
    pub inducing: Option<Vec<Vec<f64>>>,
    /// Column means removed from the training data (used to center novel inputs).
    pub mean: Vec<f64>,
    /// Centered training observations.
    pub training_data: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub mode: FitMode,
    pub kernel: KernelChoice,
    pub seed: u64,
    pub config: TrainConfig,
    pub latent: StoredLatent,
    pub views: Vec<StoredView>,
    pub training_trace: Vec<(usize, f64)>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(MrdError::DimensionMismatch(format!(
            "{what}: row of length {} where {ncols} expected",
            bad.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_mrd(model: &MrdModel, columns: &[Vec<String>], config: &TrainConfig) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            mode: FitMode::Variational,
            kernel: KernelChoice::ArdRbf,
            seed: config.seed,
            config: config.clone(),
            latent: StoredLatent {
                means: rows(&model.latent.means),
                variances: Some(rows(&model.latent.variances)),
            },
            views: model
                .views
                .iter()
                .zip(columns)
                .map(|(v, cols)| StoredView {
                    name: v.name.clone(),
                    columns: cols.clone(),
                    kernel: v.kernel.clone(),
                    inducing: Some(rows(&v.inducing)),
                    mean: v.mean.iter().copied().collect(),
                    training_data: rows(&v.data),
                })
                .collect(),
            training_trace: model.training_trace.clone(),
        }
    }

    /// Stores a single-view GPLVM; `centered` is the training data minus
    /// `model.data_mean`.
    pub fn from_gplvm(
        model: &GplvmModel,
        name: &str,
        columns: &[String],
        centered: &DMatrix<f64>,
        config: &TrainConfig,
    ) -> Self {
        let variational = model.mode == FitMode::Variational;
        ModelFile {
            format_version: FORMAT_VERSION,
            mode: model.mode,
            kernel: model.kernel_choice,
            seed: config.seed,
            config: config.clone(),
            latent: StoredLatent {
                means: rows(&model.latent.means),
                variances: variational.then(|| rows(&model.latent.variances)),
            },
            views: vec![StoredView {
                name: name.to_string(),
                columns: columns.to_vec(),
                kernel: model.kernel.clone(),
                inducing: model.inducing.as_ref().map(rows),
                mean: model.data_mean.iter().copied().collect(),
                training_data: rows(centered),
            }],
            training_trace: model.training_trace.clone(),
        }
    }

    pub fn q(&self) -> usize {
        self.views.first().map(|v| v.kernel.q()).unwrap_or(0)
    }

    fn latent_means(&self) -> Result<DMatrix<f64>> {
        matrix(&self.latent.means, self.q(), "latent means")
    }

    fn view_data(v: &StoredView) -> Result<DMatrix<f64>> {
        matrix(&v.training_data, v.mean.len(), "training data")
    }

    /// The multi-view model (variational files only).
    pub fn to_mrd(&self) -> Result<MrdModel> {
        if self.mode != FitMode::Variational {
            return Err(MrdError::invalid(
                "this operation needs a variational model; the file holds a MAP model",
            ));
        }
        let q = self.q();
        let variances =
            self.latent.variances.as_ref().ok_or_else(|| {
                MrdError::invalid("variational model file without latent variances")
            })?;
        let latent = LatentDistribution::new(
            self.latent_means()?,
            matrix(variances, q, "latent variances")?,
        )?;
        let views =
            self.views
                .iter()
                .map(|v| {
                    let inducing = v.inducing.as_ref().ok_or_else(|| {
                        MrdError::invalid("variational view without inducing inputs")
                    })?;
                    Ok(ViewModel {
                        name: v.name.clone(),
                        kernel: v.kernel.clone(),
                        inducing: matrix(inducing, q, "inducing inputs")?,
                        data: Self::view_data(v)?,
                        mean: DVector::from_column_slice(&v.mean),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        let model = MrdModel {
            latent,
            views,
            training_trace: self.training_trace.clone(),
        };
        model.validate()?;
        Ok(model)
    }

    /// The single-view GPLVM and its centered training data.
    pub fn to_gplvm(&self) -> Result<(GplvmModel, DMatrix<f64>)> {
        if self.views.len() != 1 {
            return Err(MrdError::invalid(format!(
                "expected a single-view model, file has {} views",
                self.views.len()
            )));
        }
        let v = &self.views[0];
        let means = self.latent_means()?;
        let variances = match &self.latent.variances {
            Some(s) => matrix(s, self.q(), "latent variances")?,
            None => DMatrix::from_element(means.nrows(), means.ncols(), 1.0),
        };
        let inducing = match &v.inducing {
            Some(z) => Some(matrix(z, self.q(), "inducing inputs")?),
            None => None,
        };
        let model = GplvmModel {
            latent: LatentDistribution::new(means, variances)?,
            kernel: v.kernel.clone(),
            kernel_choice: self.kernel,
            inducing,
            mode: self.mode,
            training_trace: self.training_trace.clone(),
            data_mean: DVector::from_column_slice(&v.mean),
        };
        Ok((model, Self::view_data(v)?))
    }

    /// The training objective recomputed from the stored state: the joint
    /// bound for variational files, log marginal plus latent prior for MAP.
    pub fn training_objective(&self) -> Result<f64> {
        match self.mode {
            FitMode::Variational => self.to_mrd()?.training_elbo(),
            FitMode::Map => {
                let (model, data) = self.to_gplvm()?;
                crate::gplvm::gplvm_map_objective(
                    &model.latent.means,
                    &data,
                    model.kernel_choice,
                    &model.kernel,
                )
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.all_finite() {
            return Err(MrdError::NonFinite("model file"));
        }
        to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| {
                MrdError::Parse(serde::de::Error::custom("missing integer `format_version`"))
            })?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(MrdError::UnsupportedVersion {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                supported: FORMAT_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = self.to_json()?;
        fs::write(path, json).map_err(|e| MrdError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MrdError::io(path, e))?;
        Self::from_json(&text)
    }

    fn all_finite(&self) -> bool {
        let finite_rows = |r: &Vec<Vec<f64>>| r.iter().flatten().all(|v| v.is_finite());
        finite_rows(&self.latent.means)
            && self.latent.variances.as_ref().map_or(true, finite_rows)
            && self.views.iter().all(|v| {
                v.kernel.log_signal_variance().is_finite()
                    && v.kernel.log_beta().is_finite()
                    && v.kernel.log_ard_weights().iter().all(|w| w.is_finite())
                    && v.inducing.as_ref().map_or(true, finite_rows)
                    && finite_rows(&v.training_data)
                    && v.mean.iter().all(|m| m.is_finite())
            })
    }
}

/// Pretty JSON with every float written as `{:.16e}`.
struct CanonicalFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes any value with the canonical float format, plus a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        CanonicalFormatter {
            inner: PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_canonical_json(&vec![0.1, -2.5, 0.0]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("-2.5000000000000000e0"));
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, -2.5, 0.0]);
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let err = ModelFile::from_json(r#"{"format_version": 7}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('7') && msg.contains(&FORMAT_VERSION.to_string()));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        assert!(matches!(
            ModelFile::from_json(r#"{"format_version": 1, "mode": "#),
            Err(MrdError::Parse(_))
        ));
    }
}
