/// A collection of named, flat parameter blocks.
///
/// Gradients use the same type as the parameters they belong to, so a model's
/// gradient buffer is simply a zeroed copy of the model. Block order is part of
/// the contract: optimizers, checkpoints and gradient checks all pair blocks by
/// position.
pub trait ParamSet {
    fn blocks(&self) -> Vec<(String, &[f64])>;

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    fn zero(&mut self) {
        for (_, block) in self.blocks_mut() {
            block.fill(0.0);
        }
    }

    /// `self += other`, block by block.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for ((_, dst), (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for (_, block) in self.blocks_mut() {
            for v in block.iter_mut() {
                *v *= factor;
            }
        }
    }

    fn block_names(&self) -> Vec<String> {
        self.blocks().into_iter().map(|(name, _)| name).collect()
    }
}
