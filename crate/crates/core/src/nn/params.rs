use super::tensor::{Scalar, Tensor};

/// A named parameter block as seen by counting and serialization.
pub struct Block<'a, T> {
    pub name: String,
    pub tensor: &'a Tensor<T>,
    pub trainable: bool,
}

impl<'a, T> Block<'a, T> {
    pub fn trainable(name: impl Into<String>, tensor: &'a Tensor<T>) -> Self {
        Block {
            name: name.into(),
            tensor,
            trainable: true,
        }
    }

    pub fn frozen(name: impl Into<String>, tensor: &'a Tensor<T>) -> Self {
        Block {
            name: name.into(),
            tensor,
            trainable: false,
        }
    }
}

/// Ordered parameter blocks of a layer or network. `blocks` and `blocks_mut`
/// list the same tensors in the same order.
pub trait Params<T: Scalar> {
    fn blocks(&self) -> Vec<Block<'_, T>>;

    fn blocks_mut(&mut self) -> Vec<(String, &mut Tensor<T>)>;

    fn trainable(&self) -> Vec<&Tensor<T>> {
        self.blocks()
            .into_iter()
            .filter(|b| b.trainable)
            .map(|b| b.tensor)
            .collect()
    }

    fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let flags: Vec<bool> = self.blocks().iter().map(|b| b.trainable).collect();
        self.blocks_mut()
            .into_iter()
            .zip(flags)
            .filter_map(|((_, t), keep)| keep.then_some(t))
            .collect()
    }

    /// Copy with every block set to zero, used as a gradient accumulator.
    fn zeroed(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        for (_, t) in z.blocks_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
        z
    }

    /// `(total, trainable)` element counts.
    fn count(&self) -> (usize, usize) {
        self.blocks().iter().fold((0, 0), |(all, tr), b| {
            (all + b.tensor.len(), tr + if b.trainable { b.tensor.len() } else { 0 })
        })
    }
}

/// Loose collection of named tensors, all trainable. Handy for checking
/// gradients with respect to layer inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSet<T> {
    pub tensors: Vec<(&'static str, Tensor<T>)>,
}

impl<T: Scalar> TensorSet<T> {
    pub fn new(tensors: Vec<(&'static str, Tensor<T>)>) -> Self {
        TensorSet { tensors }
    }

    pub fn get(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i].1
    }
}

impl<T: Scalar> Params<T> for TensorSet<T> {
    fn blocks(&self) -> Vec<Block<'_, T>> {
        self.tensors
            .iter()
            .map(|(n, t)| Block::trainable(*n, t))
            .collect()
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(n, t)| (n.to_string(), t)).collect()
    }
}

/// Prefixes block names with `prefix.`.
pub fn prefixed<'a, T>(prefix: &str, blocks: Vec<Block<'a, T>>) -> Vec<Block<'a, T>> {
    blocks
        .into_iter()
        .map(|b| Block {
            name: format!("{prefix}.{}", b.name),
            ..b
        })
        .collect()
}

pub fn prefixed_mut<'a, T>(prefix: &str, blocks: Vec<(String, &'a mut Tensor<T>)>) -> Vec<(String, &'a mut Tensor<T>)> {
    blocks.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}
