use crate::contour::Contour;
use crate::error::{Error, Result};

/// One example: a contour plus whichever targets and side features the task uses.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub contour: Contour,
    pub label: Option<usize>,
    /// One real target per contour sample, e.g. curvature.
    pub node_targets: Option<Vec<f64>>,
    /// Auxiliary invariant features, e.g. a radial histogram.
    pub features: Option<Vec<f64>>,
}

impl DatasetRecord {
    pub fn new(id: impl Into<String>, contour: Contour) -> Self {
        DatasetRecord {
            id: id.into(),
            contour,
            label: None,
            node_targets: None,
            features: None,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_node_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        self.node_targets = Some(targets);
        self.validate()?;
        Ok(self)
    }

    pub fn with_features(mut self, features: Vec<f64>) -> Result<Self> {
        self.features = Some(features);
        self.validate()?;
        Ok(self)
    }

    /// Checks that node targets match the contour length and that all real
    /// values are finite.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = &self.node_targets {
            if t.len() != self.contour.n() {
                return Err(Error::shape(format!(
                    "record '{}': {} node targets for {} samples",
                    self.id,
                    t.len(),
                    self.contour.n()
                )));
            }
        }
        for (what, values) in [("node target", &self.node_targets), ("feature", &self.features)] {
            if let Some(v) = values {
                if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::Dataset(format!(
                        "record '{}': {what} {i} is not finite",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_targets_must_match_length() {
        let r = DatasetRecord::new("a", Contour::zeros(1, 3));
        assert!(r.clone().with_node_targets(vec![1.0; 2]).is_err());
        assert!(r.clone().with_node_targets(vec![1.0; 3]).is_ok());
        assert!(r.with_features(vec![f64::NAN]).is_err());
    }
}
