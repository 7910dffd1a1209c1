//! On-disk JSON document for a solved effective model: diffusion matrices as
//! flat row-major arrays, rate tables as nested rows, corrector fields keyed
//! by cell coordinate, and residual diagnostics.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use hcwalk::corrector::{CorrectorSet, EffectiveModel};
use hcwalk::linalg::Matrix;
use hcwalk::Environment;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelDoc {
    pub dim: usize,
    pub n_fast: usize,
    pub n_astral: usize,
    pub component_sizes: Vec<usize>,
    /// One flat row-major d*d array per fast component.
    pub theta: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correctors: Option<CorrectorDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorrectorDoc {
    /// Cell coordinate (comma-joined) -> d-vector.
    pub h: BTreeMap<String, Vec<f64>>,
    /// Cell coordinate -> flat row-major d*d matrix.
    pub g: BTreeMap<String, Vec<f64>>,
    /// Cell coordinate -> one scalar per target label (own label carries 0).
    pub q: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResidualDoc {
    pub h: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub fredholm_defect: f64,
    pub max: f64,
}

fn coord_key(coord: &[i64]) -> String {
    coord
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn to_doc(
    env: &Environment,
    model: &EffectiveModel,
    correctors: Option<&CorrectorSet>,
) -> ModelDoc {
    let d = model.dim;
    let corrector_doc = correctors.map(|cs| {
        let mut h = BTreeMap::new();
        let mut g = BTreeMap::new();
        let mut q = BTreeMap::new();
        for comp in 0..model.n_fast {
            for (local, &cell) in env.partition().component_cells[comp].iter().enumerate() {
                let key = coord_key(&env.geometry().cell_coord(cell));
                h.insert(
                    key.clone(),
                    (0..d).map(|dir| cs.h[comp][dir][local]).collect(),
                );
                g.insert(
                    key.clone(),
                    (0..d * d).map(|e| cs.g[comp][e][local]).collect(),
                );
                q.insert(
                    key,
                    (0..model.n_labels())
                        .map(|label| cs.q[comp][label][local])
                        .collect(),
                );
            }
        }
        CorrectorDoc { h, g, q }
    });
    let residual_doc = correctors.map(|cs| ResidualDoc {
        h: cs.residuals.h.clone(),
        g: cs.residuals.g.clone(),
        q: cs.residuals.q.clone(),
        fredholm_defect: cs.residuals.fredholm_defect,
        max: cs.residuals.max(),
    });
    ModelDoc {
        dim: d,
        n_fast: model.n_fast,
        n_astral: model.n_astral,
        component_sizes: model.component_sizes.clone(),
        theta: model.theta.iter().map(|m| m.as_flat().to_vec()).collect(),
        alpha: model.alpha.to_rows(),
        lambda: model.lambda.clone(),
        mu: model.mu.to_rows(),
        correctors: corrector_doc,
        residuals: residual_doc,
    }
}

pub fn from_doc(doc: &ModelDoc) -> Result<EffectiveModel> {
    let d = doc.dim;
    let mut theta = Vec::with_capacity(doc.theta.len());
    for (i, flat) in doc.theta.iter().enumerate() {
        if flat.len() != d * d {
            bail!("theta[{i}] has {} entries, expected {}", flat.len(), d * d);
        }
        theta.push(Matrix::from_flat(d, flat.clone()));
    }
    let k = doc.n_fast + doc.n_astral;
    let rows_to_matrix = |rows: &Vec<Vec<f64>>, name: &str| -> Result<Matrix> {
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            bail!("{name} is not a {k}x{k} table");
        }
        Ok(Matrix::from_rows(rows))
    };
    let model = EffectiveModel {
        dim: d,
        n_fast: doc.n_fast,
        n_astral: doc.n_astral,
        component_sizes: doc.component_sizes.clone(),
        theta,
        alpha: rows_to_matrix(&doc.alpha, "alpha")?,
        lambda: doc.lambda.clone(),
        mu: rows_to_matrix(&doc.mu, "mu")?,
    };
    model
        .validate()
        .map_err(|e| anyhow::anyhow!("invalid model document: {e}"))?;
    Ok(model)
}

pub fn write_model(path: &std::path::Path, doc: &ModelDoc) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).context("serializing model")?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_model(path: &std::path::Path) -> Result<(EffectiveModel, ModelDoc)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: ModelDoc = serde_json::from_str(&text).context("parsing model document")?;
    let model = from_doc(&doc)?;
    Ok((model, doc))
}
