use crate::advect::GridSpec;
use crate::error::{Error, Result};

/// Real values on the seeding grid. `None` marks an undefined node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    /// Short identifier, e.g. `ftle` or `wcve-sd`.
    pub quantity: String,
    pub t0: f64,
    pub t1: f64,
    values: Vec<Option<f64>>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, quantity: impl Into<String>, t0: f64, t1: f64, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(bad) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite field value {bad}")));
        }
        Ok(Self {
            grid,
            quantity: quantity.into(),
            t0,
            t1,
            values,
        })
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[self.grid.index(i, j)]
    }

    pub fn finite(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    pub fn min_finite(&self) -> Option<f64> {
        self.finite().reduce(f64::min)
    }

    pub fn max_finite(&self) -> Option<f64> {
        self.finite().reduce(f64::max)
    }

    pub fn undefined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}
