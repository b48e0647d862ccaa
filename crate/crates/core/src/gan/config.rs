use serde::{Deserialize, Serialize};

use crate::nn::AdamConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Categories per matrix.
    pub rows: usize,
    /// Code width per row.
    pub width: usize,
    pub z_dim: usize,
    pub n_segments: usize,
    /// Width of the generator's segment embedding; must equal `z_dim`
    /// because the two are multiplied elementwise.
    pub g_embed_dim: usize,
    pub g_widths: Vec<usize>,
    pub d_widths: Vec<usize>,
    pub pool_window: (usize, usize),
    pub pool_stride: (usize, usize),
    pub dropout_rate: f64,
    pub label_smooth: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            rows: 1669,
            width: 300,
            z_dim: 100,
            n_segments: 5,
            g_embed_dim: 100,
            g_widths: vec![128, 256],
            d_widths: vec![512, 256, 64],
            pool_window: (2, 2),
            pool_stride: (2, 2),
            dropout_rate: 0.25,
            label_smooth: 0.9,
            batch_size: 16,
            epochs: 1100,
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_every: 0,
            max_steps: None,
        }
    }
}

impl GanConfig {
    /// Full-size architecture for a catalog of `rows` categories.
    pub fn with_dims(rows: usize, width: usize) -> Self {
        GanConfig {
            rows,
            width,
            ..GanConfig::default()
        }
    }

    /// Narrow layers for small experiments and tests.
    pub fn toy(rows: usize, width: usize) -> Self {
        GanConfig {
            rows,
            width,
            z_dim: 16,
            g_embed_dim: 16,
            g_widths: vec![32, 64],
            d_widths: vec![64, 32, 16],
            ..GanConfig::default()
        }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.width
    }

    pub fn pooled_dims(&self) -> (usize, usize) {
        let (wh, ww) = self.pool_window;
        let (sh, sw) = self.pool_stride;
        ((self.rows - wh) / sh + 1, (self.width - ww) / sw + 1)
    }

    pub fn pooled_len(&self) -> usize {
        let (h, w) = self.pooled_dims();
        h * w
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let dims = [
            ("rows", self.rows),
            ("width", self.width),
            ("z_dim", self.z_dim),
            ("n_segments", self.n_segments),
            ("g_embed_dim", self.g_embed_dim),
            ("batch_size", self.batch_size),
            ("pool window height", self.pool_window.0),
            ("pool window width", self.pool_window.1),
            ("pool stride height", self.pool_stride.0),
            ("pool stride width", self.pool_stride.1),
        ];
        for (name, v) in dims {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.g_embed_dim != self.z_dim {
            return bad(format!(
                "g_embed_dim ({}) must equal z_dim ({})",
                self.g_embed_dim, self.z_dim
            ));
        }
        if self.g_widths.is_empty() || self.d_widths.is_empty() {
            return bad("layer width lists must be non-empty".into());
        }
        if self.g_widths.iter().chain(&self.d_widths).any(|&w| w == 0) {
            return bad("layer widths must be positive".into());
        }
        if self.pool_window.0 > self.rows || self.pool_window.1 > self.width {
            return bad(format!(
                "pool window {:?} exceeds input ({}, {})",
                self.pool_window, self.rows, self.width
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        if !(self.label_smooth > 0.0 && self.label_smooth <= 1.0) {
            return bad(format!("label_smooth {} not in (0, 1]", self.label_smooth));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad(format!("invalid optimizer settings {a:?}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        GanConfig::default().validate().unwrap();
        GanConfig::toy(6, 8).validate().unwrap();
        assert_eq!(GanConfig::default().pooled_len(), 125_100);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = GanConfig::toy(6, 8);
        c.g_embed_dim = 5;
        assert!(c.validate().is_err());
        let mut c = GanConfig::toy(6, 8);
        c.n_segments = 0;
        assert!(c.validate().is_err());
        let mut c = GanConfig::toy(1, 8);
        c.rows = 1;
        assert!(c.validate().is_err());
        let mut c = GanConfig::toy(6, 8);
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
    }
}
