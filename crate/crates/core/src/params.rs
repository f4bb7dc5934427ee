//! Flat parameter vectors with a per-subdomain block layout.
//!
//! The restriction `R_j` is a slice of block `j`; the prolongation `R_jᵀ`
//! scatters a block back into an otherwise zero vector.

use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn from_sizes(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in sizes {
            acc += s;
            offsets.push(acc);
        }
        Self { offsets }
    }

    pub fn n_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total parameter count `p`.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_len(&self, j: usize) -> usize {
        self.offsets[j + 1] - self.offsets[j]
    }

    pub fn range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.n_blocks()).map(|j| self.block_len(j)).collect()
    }

    fn check(&self, j: usize) -> Result<()> {
        if j >= self.n_blocks() {
            return Err(Error::Layout(format!(
                "block {j} out of range ({} blocks)",
                self.n_blocks()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: BlockLayout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: BlockLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Layout(format!(
                "{} values for a layout of length {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `R_j θ`
    pub fn restrict(&self, j: usize) -> Result<&[f64]> {
        self.layout.check(j)?;
        Ok(&self.values[self.layout.range(j)])
    }

    pub fn block_mut(&mut self, j: usize) -> Result<&mut [f64]> {
        self.layout.check(j)?;
        let r = self.layout.range(j);
        Ok(&mut self.values[r])
    }

    /// `R_jᵀ b`: block `j` set to `b`, everything else zero.
    pub fn prolong(layout: &BlockLayout, j: usize, block: &[f64]) -> Result<Self> {
        let mut out = Self::zeros(layout.clone());
        out.block_mut(j)?.copy_from_slice(check_len(layout, j, block)?);
        Ok(out)
    }

    /// `Σ_j R_jᵀ b_j`
    pub fn prolong_sum(layout: &BlockLayout, blocks: &[Vec<f64>]) -> Result<Self> {
        if blocks.len() != layout.n_blocks() {
            return Err(Error::Layout(format!(
                "{} blocks for a layout with {}",
                blocks.len(),
                layout.n_blocks()
            )));
        }
        let mut out = Self::zeros(layout.clone());
        for (j, b) in blocks.iter().enumerate() {
            out.block_mut(j)?.copy_from_slice(check_len(layout, j, b)?);
        }
        Ok(out)
    }

    /// `θ ← θ + scale · R_jᵀ b`
    pub fn add_prolonged(&mut self, j: usize, scale: f64, block: &[f64]) -> Result<()> {
        let block = check_len(&self.layout, j, block)?;
        for (t, b) in self.block_mut(j)?.iter_mut().zip(block) {
            *t += scale * b;
        }
        Ok(())
    }
}

fn check_len<'a>(layout: &BlockLayout, j: usize, block: &'a [f64]) -> Result<&'a [f64]> {
    layout.check(j)?;
    if block.len() != layout.block_len(j) {
        return Err(Error::Layout(format!(
            "block {j} has length {}, got {}",
            layout.block_len(j),
            block.len()
        )));
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restrict_extracts_block() {
        let layout = BlockLayout::from_sizes(&[2, 2]);
        let theta = ParamVector::new(vec![1.0, 2.0, 3.0, 4.0], layout).unwrap();
        assert_eq!(theta.restrict(1).unwrap(), &[3.0, 4.0]);
        assert!(theta.restrict(2).is_err());
    }

    #[test]
    fn prolong_sum_of_restrictions_is_identity() {
        let layout = BlockLayout::from_sizes(&[1, 3, 2]);
        let theta = ParamVector::new(vec![1.0, -2.0, 3.5, 4.0, 5.0, 6.25], layout.clone()).unwrap();
        let blocks: Vec<Vec<f64>> = (0..3).map(|j| theta.restrict(j).unwrap().to_vec()).collect();
        assert_eq!(ParamVector::prolong_sum(&layout, &blocks).unwrap(), theta);
    }

    #[test]
    fn prolong_zero_block_zeroes_only_that_block() {
        let layout = BlockLayout::from_sizes(&[2, 2]);
        let mut theta = ParamVector::new(vec![1.0, 2.0, 3.0, 4.0], layout).unwrap();
        theta.block_mut(0).unwrap().copy_from_slice(&[0.0, 0.0]);
        assert_eq!(theta.values, vec![0.0, 0.0, 3.0, 4.0]);
        let p = ParamVector::prolong(&theta.layout, 1, &[7.0, 8.0]).unwrap();
        assert_eq!(p.values, vec![0.0, 0.0, 7.0, 8.0]);
    }

    #[test]
    fn length_mismatch_is_layout_error() {
        let layout = BlockLayout::from_sizes(&[2, 2]);
        assert!(matches!(ParamVector::new(vec![0.0; 3], layout.clone()), Err(Error::Layout(_))));
        let mut t = ParamVector::zeros(layout);
        assert!(t.add_prolonged(0, 1.0, &[1.0]).is_err());
    }
}
