use crate::engine::profile::{ImageKind, ImageProfile};
use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::MonteCarlo => "monte-carlo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "analytic" => Some(Provenance::Analytic),
            "monte-carlo" => Some(Provenance::MonteCarlo),
            _ => None,
        }
    }
}

/// Correlation of intensity fluctuations sampled on `grid_a x grid_b`,
/// stored row-major with the S_a coordinate as the row index.
///
/// Analytic tensors are non-negative. Estimated tensors carry sampling noise
/// and may dip below zero where the true correlation vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    values: Vec<f64>,
    pub grid_a: SampledGrid,
    pub grid_b: SampledGrid,
    pub scenario: ScenarioConfig,
    pub provenance: Provenance,
}

impl CorrelationTensor {
    pub fn new(
        values: Vec<f64>,
        grid_a: SampledGrid,
        grid_b: SampledGrid,
        scenario: ScenarioConfig,
        provenance: Provenance,
    ) -> Result<Self> {
        if values.len() != grid_a.len() * grid_b.len() {
            return Err(CpiError::Domain(format!(
                "tensor has {} values for a {}x{} grid",
                values.len(),
                grid_a.len(),
                grid_b.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CpiError::Domain(format!("tensor contains non-finite value {v}")));
        }
        if provenance == Provenance::Analytic {
            if let Some(v) = values.iter().find(|v| **v < 0.0) {
                return Err(CpiError::Domain(format!("analytic tensor contains negative value {v}")));
            }
        }
        Ok(CorrelationTensor {
            values,
            grid_a,
            grid_b,
            scenario,
            provenance,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid_a.len(), self.grid_b.len())
    }

    #[inline]
    pub fn get(&self, ia: usize, ib: usize) -> f64 {
        self.values[ia * self.grid_b.len() + ib]
    }

    pub fn row(&self, ia: usize) -> &[f64] {
        let nb = self.grid_b.len();
        &self.values[ia * nb..(ia + 1) * nb]
    }

    pub fn column(&self, ib: usize) -> Vec<f64> {
        (0..self.grid_a.len()).map(|ia| self.get(ia, ib)).collect()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn peak_normalized(&self) -> Self {
        let p = self.peak();
        let s = if p > 0.0 { 1.0 / p } else { 1.0 };
        CorrelationTensor {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Exchange the roles of the two sensors.
    pub fn transposed(&self) -> Self {
        let (na, nb) = self.shape();
        let mut values = vec![0.0; na * nb];
        for ia in 0..na {
            for ib in 0..nb {
                values[ib * na + ia] = self.values[ia * nb + ib];
            }
        }
        CorrelationTensor {
            values,
            grid_a: self.grid_b,
            grid_b: self.grid_a,
            ..self.clone()
        }
    }

    /// Slice at fixed S_b pixel `ib`, as an image on S_a.
    pub fn slice_b(&self, ib: usize) -> ImageProfile {
        let mut p = ImageProfile::new(self.column(ib), self.grid_a, ImageKind::Coherent);
        p.object_scale = self.scenario.alpha();
        p
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        CorrelationTensor {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        CorrelationTensor {
            values,
            ..self.clone()
        }
    }
}

/// Root-mean-square difference of two peak-normalised tensors on the same grid.
pub fn normalized_rmse(estimate: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(estimate.len(), reference.len());
    let pe = estimate.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pr = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ss: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(e, r)| (e / pe - r / pr).powi(2))
        .sum();
    (ss / estimate.len() as f64).sqrt()
}
