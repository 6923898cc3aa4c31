use crate::grid::SampledGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Ghost,
    Coherent,
    Refocused,
    FocusedReference,
    Psf,
}

impl ImageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageKind::Ghost => "ghost",
            ImageKind::Coherent => "coherent",
            ImageKind::Refocused => "refocused",
            ImageKind::FocusedReference => "focused-reference",
            ImageKind::Psf => "psf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Absolute scale of the defining integral, up to constant factors.
    Raw,
    /// Divided by the maximum sample.
    Peak,
}

/// 1D intensity profile.
///
/// `object_scale` converts a grid coordinate into an object-plane coordinate:
/// ghost and coherent images live on S_a and are projected by z_b / z_a,
/// refocused images are already in object coordinates. `pixel_rescale` is the
/// factor by which the output pixel differs from the S_a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageProfile {
    pub values: Vec<f64>,
    pub grid: SampledGrid,
    pub kind: ImageKind,
    pub object_scale: f64,
    pub pixel_rescale: f64,
    pub normalization: Normalization,
}

impl ImageProfile {
    pub fn new(values: Vec<f64>, grid: SampledGrid, kind: ImageKind) -> Self {
        assert_eq!(values.len(), grid.len(), "profile length must match its grid");
        ImageProfile {
            values,
            grid,
            kind,
            object_scale: 1.0,
            pixel_rescale: 1.0,
            normalization: Normalization::Raw,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn peak_normalized(&self) -> Self {
        let p = self.peak();
        let scale = if p > 0.0 { 1.0 / p } else { 1.0 };
        ImageProfile {
            values: self.values.iter().map(|v| v * scale).collect(),
            normalization: Normalization::Peak,
            ..self.clone()
        }
    }

    /// The grid mapped onto the object plane.
    pub fn object_grid(&self) -> SampledGrid {
        self.grid.scaled(self.object_scale)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// Intensity-weighted mean position in grid coordinates.
    pub fn centroid(&self) -> Option<f64> {
        let w: f64 = self.values.iter().sum();
        if w <= 0.0 {
            return None;
        }
        Some(self.grid.points().zip(&self.values).map(|(x, v)| x * v).sum::<f64>() / w)
    }

    /// Response of pixels of width `width` centred on each grid sample,
    /// i.e. the profile convolved with a box. Samples are treated as
    /// piecewise linear.
    pub fn pixel_integrated(&self, width: f64) -> Self {
        let h = self.grid.spacing();
        let half = 0.5 * width;
        let n = self.len();
        let steps = ((width / h).ceil() as usize).max(1) * 8;
        let values = (0..n)
            .map(|i| {
                let x0 = self.grid.at(i);
                let mut acc = 0.0;
                for s in 0..steps {
                    let x = x0 - half + (s as f64 + 0.5) * width / steps as f64;
                    acc += self.grid.interpolate(&self.values, x).unwrap_or(0.0);
                }
                acc / steps as f64
            })
            .collect();
        ImageProfile {
            values,
            ..self.clone()
        }
    }
}
