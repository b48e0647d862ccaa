//! Parameter counts computed from the configuration alone, so full-size
//! models can be sized without allocating them.

use serde::{Deserialize, Serialize};

use super::config::GanConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Net {
    Generator,
    Discriminator,
}

impl Net {
    pub fn of_block(name: &str) -> Net {
        if name.starts_with("d_") {
            Net::Discriminator
        } else {
            Net::Generator
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// False only for batch-norm running statistics.
    pub trainable: bool,
}

impl BlockSpec {
    fn new(name: String, shape: &[usize], trainable: bool) -> Self {
        BlockSpec {
            name,
            shape: shape.to_vec(),
            trainable,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn net(&self) -> Net {
        Net::of_block(&self.name)
    }
}

fn dense(prefix: &str, i: usize, o: usize, out: &mut Vec<BlockSpec>) {
    out.push(BlockSpec::new(format!("{prefix}.kernel"), &[i, o], true));
    out.push(BlockSpec::new(format!("{prefix}.bias"), &[o], true));
}

/// Blocks in the same order and with the same names as a built model.
pub fn block_specs(cfg: &GanConfig) -> Vec<BlockSpec> {
    let mut v = Vec::new();
    let cells = cfg.cells();
    v.push(BlockSpec::new("g_embed.embeddings".into(), &[cfg.n_segments, cfg.g_embed_dim], true));
    let mut prev = cfg.z_dim;
    for (i, &w) in cfg.g_widths.iter().enumerate() {
        dense(&format!("g_shared.{i}.dense"), prev, w, &mut v);
        for (name, tr) in [("gamma", true), ("beta", true), ("moving_mean", false), ("moving_variance", false)] {
            v.push(BlockSpec::new(format!("g_shared.{i}.bn.{name}"), &[w], tr));
        }
        prev = w;
    }
    for k in 1..=2 {
        dense(&format!("g_head_{k}"), prev, cells, &mut v);
    }
    for k in 1..=2 {
        v.push(BlockSpec::new(format!("d_embed_{k}.embeddings"), &[cfg.n_segments, cells], true));
    }
    let mut prev = cfg.pooled_len();
    for (i, &w) in cfg.d_widths.iter().enumerate() {
        dense(&format!("d_shared.{i}"), prev, w, &mut v);
        prev = w;
    }
    for k in 1..=2 {
        dense(&format!("d_head_{k}"), prev, 1, &mut v);
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// The combined generator-through-discriminator stack with the
    /// discriminator frozen: only generator weights train.
    CombinedStack,
    /// Every weight trains; only running statistics are fixed.
    AllTrainable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub total: usize,
    pub trainable: usize,
    pub non_trainable: usize,
}

pub fn count_blocks<'a>(blocks: impl IntoIterator<Item = (&'a str, usize, bool)>, convention: Convention) -> ParamCount {
    let mut c = ParamCount {
        total: 0,
        trainable: 0,
        non_trainable: 0,
    };
    for (name, len, layer_trainable) in blocks {
        c.total += len;
        let trains = layer_trainable
            && match convention {
                Convention::AllTrainable => true,
                Convention::CombinedStack => Net::of_block(name) == Net::Generator,
            };
        if trains {
            c.trainable += len;
        } else {
            c.non_trainable += len;
        }
    }
    c
}

pub fn param_count(cfg: &GanConfig, convention: Convention) -> ParamCount {
    let specs = block_specs(cfg);
    count_blocks(specs.iter().map(|s| (s.name.as_str(), s.len(), s.trainable)), convention)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_counts() {
        let cfg = GanConfig::default();
        let c = param_count(&cfg, Convention::CombinedStack);
        assert_eq!(c.total, 326_614_406);
        assert_eq!(c.trainable, 257_407_020);
        assert_eq!(c.non_trainable, 69_206_618 + 768);
        let a = param_count(&cfg, Convention::AllTrainable);
        assert_eq!(a.total, 326_614_406);
        assert_eq!(a.trainable, 326_613_638);
        assert_eq!(a.non_trainable, 768);
    }

    #[test]
    fn per_part_breakdown() {
        // Independent arithmetic: shared generator trunk, embedding, heads, discriminator.
        let trunk = (100 * 128 + 128) + 4 * 128 + (128 * 256 + 256) + 4 * 256;
        assert_eq!(trunk, 47_488);
        let head = 256 * 500_700 + 500_700;
        assert_eq!(head, 128_679_900);
        let disc = 2 * 5 * 500_700 + (125_100 * 512 + 512) + (512 * 256 + 256) + (256 * 64 + 64) + 2 * 65;
        assert_eq!(disc, 69_206_618);
        let specs = block_specs(&GanConfig::default());
        let d: usize = specs.iter().filter(|s| s.net() == Net::Discriminator).map(|s| s.len()).sum();
        assert_eq!(d, disc);
        let g: usize = specs.iter().filter(|s| s.net() == Net::Generator).map(|s| s.len()).sum();
        assert_eq!(g, trunk + 500 + 2 * head);
    }
}
