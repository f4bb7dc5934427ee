use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::dot;

#[derive(Debug, Clone)]
struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// The last `capacity` secant pairs, newest last, with `H⁰ = γI`.
#[derive(Debug, Clone)]
pub struct SecantMemory {
    capacity: usize,
    pairs: VecDeque<Pair>,
    gamma: f64,
    /// Smallest `yᵀs` ever stored (infinity before the first pair).
    min_curvature: f64,
    stored: u64,
    rejected: u64,
}

impl SecantMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
            gamma: 1.0,
            min_curvature: f64::INFINITY,
            stored: 0,
            rejected: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn min_curvature(&self) -> f64 {
        self.min_curvature
    }

    /// Pairs accepted and rejected over the memory's lifetime.
    pub fn counts(&self) -> (u64, u64) {
        (self.stored, self.rejected)
    }

    /// Drops all pairs; lifetime statistics are kept.
    pub fn clear(&mut self) {
        self.pairs.clear();
        self.gamma = 1.0;
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.pairs.iter().map(|p| (p.s.as_slice(), p.y.as_slice()))
    }

    /// Stores `(s, y)` iff `yᵀs > 0`, evicting the oldest pair when full.
    pub fn push_pair(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        assert_eq!(s.len(), y.len(), "secant pair length mismatch");
        let sy = dot(&s, &y);
        if !(sy > 0.0) || self.capacity == 0 {
            self.rejected += 1;
            return false;
        }
        let yy = dot(&y, &y);
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.gamma = sy / yy;
        self.min_curvature = self.min_curvature.min(sy);
        self.pairs.push_back(Pair { s, y, rho: 1.0 / sy });
        self.stored += 1;
        true
    }

    /// `−H g` by the two-loop recursion.
    pub fn two_loop(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; self.pairs.len()];
        for (i, p) in self.pairs.iter().enumerate().rev() {
            alpha[i] = p.rho * dot(&p.s, &q);
            for (qk, yk) in q.iter_mut().zip(&p.y) {
                *qk -= alpha[i] * yk;
            }
        }
        for v in q.iter_mut() {
            *v *= self.gamma;
        }
        for (i, p) in self.pairs.iter().enumerate() {
            let beta = p.rho * dot(&p.y, &q);
            for (qk, sk) in q.iter_mut().zip(&p.s) {
                *qk += (alpha[i] - beta) * sk;
            }
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    /// Dense `B` from the compact representation with `B⁰ = I/γ`.
    pub fn compact_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        let m = self.pairs.len();
        let b0 = 1.0 / self.gamma;
        let mut b = DMatrix::identity(n, n) * b0;
        if m == 0 {
            return Ok(b);
        }
        let s = DMatrix::from_fn(n, m, |r, c| self.pairs[c].s[r]);
        let y = DMatrix::from_fn(n, m, |r, c| self.pairs[c].y[r]);
        let sy = s.transpose() * &y;
        let mut mid = DMatrix::zeros(2 * m, 2 * m);
        mid.view_mut((0, 0), (m, m)).copy_from(&(s.transpose() * &s * b0));
        for i in 0..m {
            for j in 0..i {
                mid[(i, m + j)] = sy[(i, j)];
                mid[(m + j, i)] = sy[(i, j)];
            }
            mid[(m + i, m + i)] = -sy[(i, i)];
        }
        let mut w = DMatrix::zeros(n, 2 * m);
        w.view_mut((0, 0), (n, m)).copy_from(&(&s * b0));
        w.view_mut((0, m), (n, m)).copy_from(&y);
        let x = mid
            .lu()
            .solve(&w.transpose())
            .ok_or_else(|| Error::Oracle("singular compact middle matrix".into()))?;
        b -= &w * x;
        Ok(b)
    }

    /// Solves `B d = −g` with the dense compact-form `B`. Test oracle for
    /// [`two_loop`](Self::two_loop).
    pub fn compact_direction(&self, g: &[f64]) -> Result<Vec<f64>> {
        if self.pairs.is_empty() {
            return Err(Error::Oracle("compact form needs at least one pair".into()));
        }
        let b = self.compact_matrix(g.len())?;
        let rhs = -DVector::from_column_slice(g);
        let d = b
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Oracle("singular compact matrix".into()))?;
        Ok(d.iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn guard_examples() {
        let mut m = SecantMemory::new(3);
        assert!(m.push_pair(vec![1.0, 0.0], vec![2.0, 0.0]));
        assert_eq!(m.gamma(), 0.5);
        assert!(!m.push_pair(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!m.push_pair(vec![1.0, 0.0], vec![0.0, 1.0]));
        assert_eq!(m.len(), 1);
        assert_eq!(m.gamma(), 0.5);
        assert_eq!(m.counts(), (1, 2));
    }

    #[test]
    fn empty_memory_is_steepest_descent() {
        let m = SecantMemory::new(5);
        assert_eq!(m.two_loop(&[3.0, -4.0]), vec![-3.0, 4.0]);
    }

    #[test]
    fn eviction_is_oldest_first() {
        let mut m = SecantMemory::new(2);
        for k in 1..=3 {
            m.push_pair(vec![k as f64], vec![1.0]);
        }
        let s: Vec<f64> = m.pairs().map(|(s, _)| s[0]).collect();
        assert_eq!(s, vec![2.0, 3.0]);
    }

    /// Dense inverse BFGS from `γI` with the stored pairs.
    fn dense_inverse(m: &SecantMemory, n: usize) -> DMatrix<f64> {
        let mut h = DMatrix::identity(n, n) * m.gamma();
        for (s, y) in m.pairs() {
            let s = DVector::from_column_slice(s);
            let y = DVector::from_column_slice(y);
            let rho = 1.0 / s.dot(&y);
            let v = DMatrix::identity(n, n) - &y * s.transpose() * rho;
            h = v.transpose() * h * v + &s * s.transpose() * rho;
        }
        h
    }

    #[test]
    fn single_pair_on_diagonal_quadratic_matches_dense_update() {
        // f = ½θᵀdiag(1,4)θ, gradient step from (1,1)
        let a = [1.0, 4.0];
        let th0 = [1.0, 1.0];
        let g0: Vec<f64> = th0.iter().zip(&a).map(|(t, a)| t * a).collect();
        let th1: Vec<f64> = th0.iter().zip(&g0).map(|(t, g)| t - 0.1 * g).collect();
        let g1: Vec<f64> = th1.iter().zip(&a).map(|(t, a)| t * a).collect();
        let mut m = SecantMemory::new(5);
        assert!(m.push_pair(
            th1.iter().zip(&th0).map(|(a, b)| a - b).collect(),
            g1.iter().zip(&g0).map(|(a, b)| a - b).collect(),
        ));
        let d = m.two_loop(&g1);
        let want = -(dense_inverse(&m, 2) * DVector::from_column_slice(&g1));
        for k in 0..2 {
            assert!((d[k] - want[k]).abs() < 1e-12);
        }
        let c = m.compact_direction(&g1).unwrap();
        for k in 0..2 {
            assert!((c[k] - want[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_gives_zero_direction() {
        let mut m = SecantMemory::new(2);
        m.push_pair(vec![1.0, 2.0], vec![0.5, 1.0]);
        assert_eq!(m.two_loop(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert!(m.compact_direction(&[0.0, 0.0]).unwrap().iter().all(|v| *v == 0.0));
    }

    pub(crate) fn random_memory(rng: &mut ChaCha8Rng, p: usize, q: usize) -> SecantMemory {
        let mut m = SecantMemory::new(q);
        while m.len() < q {
            let s: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            // y = A s with A symmetric positive definite plus noise that keeps yᵀs > 0
            let y: Vec<f64> = s.iter().map(|v| v * rng.random_range(0.5..3.0) + rng.random_range(-0.05..0.05)).collect();
            m.push_pair(s, y);
        }
        m
    }

    #[test]
    fn two_loop_matches_compact_form_on_random_memories() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p = rng.random_range(2..=20);
            let q = rng.random_range(1..=5.min(p));
            let m = random_memory(&mut rng, p, q);
            let g: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = m.two_loop(&g);
            let b = m.compact_direction(&g).unwrap();
            let scale = b.iter().fold(0.0f64, |x, v| x.max(v.abs()));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-10 * scale);
            }
        }
    }

    proptest! {
        #[test]
        fn two_loop_is_a_descent_direction(seed in 0u64..1000, p in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = rng.random_range(1..=4);
            let m = random_memory(&mut rng, p, q);
            let g: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            prop_assert!(dot(&g, &m.two_loop(&g)) < 0.0);
            prop_assert!(m.len() <= m.capacity());
        }
    }
}
