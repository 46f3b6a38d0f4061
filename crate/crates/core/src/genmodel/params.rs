//! Named-tensor containers for model parameters and their gradients.

use super::GenError;
use ndarray::ArrayD;

/// Which network a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Discriminator,
}

/// An ordered map from parameter name to tensor. Order is fixed at
/// construction and shared by all maps of the same schema, which makes
/// aggregation, checkpointing, and optimizer state alignment deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorMap {
    entries: Vec<(String, ArrayD<f64>)>,
}

/// Gradients use the same schema as the parameters they differentiate.
pub type ParamGrads = TensorMap;

impl TensorMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append an entry. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: ArrayD<f64>) {
        let name = name.into();
        assert!(
            self.get(&name).is_none(),
            "duplicate tensor name {name:?}"
        );
        self.entries.push((name, tensor));
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<f64>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ArrayD<f64>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ArrayD<f64>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// A map with the same names and shapes, all zeros.
    pub fn zeros_like(&self) -> TensorMap {
        TensorMap {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), ArrayD::zeros(t.raw_dim())))
                .collect(),
        }
    }

    /// Same names, shapes, and order.
    pub fn same_schema(&self, other: &TensorMap) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((an, at), (bn, bt))| an == bn && at.shape() == bt.shape())
    }

    /// Multiply every value by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for (_, t) in &mut self.entries {
            t.mapv_inplace(|v| v * factor);
        }
    }

    /// Elementwise `self += other`; schemas must match.
    pub fn add_assign(&mut self, other: &TensorMap) -> Result<(), GenError> {
        for ((name, t), (oname, ot)) in self.entries.iter_mut().zip(&other.entries) {
            if name != oname || t.shape() != ot.shape() {
                return Err(GenError::ShapeMismatch {
                    name: oname.clone(),
                    expected: t.shape().to_vec(),
                    got: ot.shape().to_vec(),
                });
            }
            *t += ot;
        }
        if self.entries.len() != other.entries.len() {
            return Err(GenError::UnknownParam(format!(
                "schema length {} vs {}",
                self.entries.len(),
                other.entries.len()
            )));
        }
        Ok(())
    }

    /// Error on the first non-finite value, naming the tensor.
    pub fn assert_finite(&self) -> Result<(), GenError> {
        for (name, t) in &self.entries {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(GenError::NonFiniteParam(name.clone()));
            }
        }
        Ok(())
    }
}

/// One network's parameters: an ordered, fixed-schema tensor map plus the
/// role it plays. Batch-norm running statistics are carried as ordinary
/// entries (`*.running_mean` / `*.running_var`); their gradients are always
/// zero, so optimizer updates leave them untouched while aggregation and
/// checkpoints see them like any other state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub role: Role,
    pub(crate) map: TensorMap,
}

impl ModelParams {
    pub fn new(role: Role, map: TensorMap) -> Self {
        Self { role, map }
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<f64>> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ArrayD<f64>> {
        self.map.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ArrayD<f64>)> {
        self.map.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.names()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn tensors(&self) -> &TensorMap {
        &self.map
    }

    /// Zero gradients matching this schema.
    pub fn zero_grads(&self) -> ParamGrads {
        self.map.zeros_like()
    }

    pub fn same_schema(&self, other: &ModelParams) -> bool {
        self.role == other.role && self.map.same_schema(&other.map)
    }

    pub fn assert_finite(&self) -> Result<(), GenError> {
        self.map.assert_finite()
    }

    /// Multiplies every tensor by `factor` in place.
    pub fn scale(&mut self, factor: f64) {
        self.map.scale(factor);
    }

    /// Adds `other` elementwise; roles and schemas must match.
    pub fn add_assign(&mut self, other: &ModelParams) -> Result<(), GenError> {
        if self.role != other.role {
            return Err(GenError::BadConfig(format!(
                "cannot combine {:?} parameters with {:?} parameters",
                self.role, other.role
            )));
        }
        self.map.add_assign(&other.map)
    }
}
