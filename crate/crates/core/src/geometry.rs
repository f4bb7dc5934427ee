//! Overlapping box decompositions, cosine window functions and Hammersley
//! collocation points.

use std::f64::consts::PI;

use crate::autodiff::{Jet2, MAX_AXES};
use crate::error::{Error, Result};

/// Axis-aligned domain `Ω = Π_k (lo_k, hi_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > MAX_AXES {
            return Err(Error::InvalidConfig(format!(
                "domain dimension {} not in 1..={MAX_AXES}",
                bounds.len()
            )));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidConfig(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { bounds })
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![(0.0, 1.0); dim]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn extent(&self, k: usize) -> f64 {
        self.bounds[k].1 - self.bounds[k].0
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub domain: Domain,
    pub counts: Vec<usize>,
    /// Overlap width `δ_k` per axis.
    pub overlap: Vec<f64>,
    /// `boxes[j][k] = (a_jk, b_jk)`; subdomain index is row-major over
    /// `counts` with the last axis fastest.
    pub boxes: Vec<Vec<(f64, f64)>>,
}

/// Uniform overlapping decomposition: cell width `h = E/m`, overlap
/// `δ = ratio·h`, box `i = [lo + i·h − δ/2, lo + (i+1)·h + δ/2]`.
pub fn build_decomposition(domain: &Domain, counts: &[usize], overlap_ratio: f64) -> Result<Decomposition> {
    if counts.len() != domain.dim() {
        return Err(Error::InvalidConfig(format!(
            "{} subdomain counts for a {}-d domain",
            counts.len(),
            domain.dim()
        )));
    }
    if counts.iter().any(|&m| m == 0) {
        return Err(Error::InvalidConfig("subdomain counts must be >= 1".into()));
    }
    if !(overlap_ratio > 0.0 && overlap_ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "overlap ratio {overlap_ratio} outside (0, 1)"
        )));
    }
    let mut axis_boxes = Vec::with_capacity(counts.len());
    let mut overlap = Vec::with_capacity(counts.len());
    for (k, &m) in counts.iter().enumerate() {
        let lo = domain.bounds[k].0;
        let h = domain.extent(k) / m as f64;
        let delta = overlap_ratio * h;
        overlap.push(delta);
        axis_boxes.push(
            (0..m)
                .map(|i| (lo + i as f64 * h - 0.5 * delta, lo + (i + 1) as f64 * h + 0.5 * delta))
                .collect::<Vec<_>>(),
        );
    }
    let n_s: usize = counts.iter().product();
    let mut boxes = Vec::with_capacity(n_s);
    for j in 0..n_s {
        let mut rem = j;
        let mut b = vec![(0.0, 0.0); counts.len()];
        for k in (0..counts.len()).rev() {
            b[k] = axis_boxes[k][rem % counts[k]];
            rem /= counts[k];
        }
        boxes.push(b);
    }
    Ok(Decomposition {
        domain: domain.clone(),
        counts: counts.to_vec(),
        overlap,
        boxes,
    })
}

impl Decomposition {
    pub fn n_subdomains(&self) -> usize {
        self.boxes.len()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Outer extension beyond the domain on each axis (`δ/2`).
    pub fn pad(&self) -> Vec<f64> {
        self.overlap.iter().map(|d| 0.5 * d).collect()
    }

    /// Open-interval membership test for box `j`.
    pub fn contains(&self, j: usize, x: &[f64]) -> bool {
        self.boxes[j]
            .iter()
            .zip(x)
            .all(|(&(a, b), &v)| a < v && v < b)
    }

    /// `ξ_k = (2x_k − a_jk − b_jk) / (b_jk − a_jk)`
    pub fn norm(&self, j: usize, x: &[f64]) -> Vec<f64> {
        self.boxes[j]
            .iter()
            .zip(x)
            .map(|(&(a, b), &v)| (2.0 * v - a - b) / (b - a))
            .collect()
    }

    /// Inverse of [`norm`](Self::norm).
    pub fn denorm(&self, j: usize, xi: &[f64]) -> Vec<f64> {
        self.boxes[j]
            .iter()
            .zip(xi)
            .map(|(&(a, b), &s)| 0.5 * (s * (b - a) + a + b))
            .collect()
    }

    /// `dξ_k/dx_k = 2 / (b_jk − a_jk)`
    pub fn norm_scale(&self, j: usize) -> Vec<f64> {
        self.boxes[j].iter().map(|&(a, b)| 2.0 / (b - a)).collect()
    }

    /// `Π_k (1 + cos(π ξ_k))²`, zero outside the open box.
    pub fn raw_window(&self, j: usize, x: &[f64]) -> f64 {
        let xi = self.norm(j, x);
        if xi.iter().any(|s| s.abs() >= 1.0) {
            return 0.0;
        }
        xi.iter().map(|s| (1.0 + (PI * s).cos()).powi(2)).product()
    }

    /// Raw window as a spatial jet in `x` (all axes seeded).
    pub fn raw_window_jet(&self, j: usize, x: &[f64]) -> Jet2<f64> {
        let xi = self.norm(j, x);
        if xi.iter().any(|s| s.abs() >= 1.0) {
            return Jet2::constant(0.0);
        }
        let scale = self.norm_scale(j);
        let mut w = Jet2::constant(1.0);
        for k in 0..xi.len() {
            let mut s = Jet2::constant(xi[k]);
            s.d1[k] = scale[k];
            let c = (s.scale(PI).cos() + Jet2::constant(1.0)).powi(2);
            w = w * c;
        }
        w
    }

    /// Normalized window `w_j = raw_j / Σ_m raw_m`.
    pub fn window(&self, j: usize, x: &[f64]) -> Result<f64> {
        let total: f64 = (0..self.n_subdomains()).map(|m| self.raw_window(m, x)).sum();
        if total <= 0.0 {
            return Err(Error::Geometry(format!("no window covers point {x:?}")));
        }
        Ok(self.raw_window(j, x) / total)
    }

    /// Normalized window jets for every subdomain whose box contains `x`.
    pub fn window_jets(&self, x: &[f64]) -> Result<Vec<(usize, Jet2<f64>)>> {
        let raws: Vec<(usize, Jet2<f64>)> = (0..self.n_subdomains())
            .filter(|&j| self.contains(j, x))
            .map(|j| (j, self.raw_window_jet(j, x)))
            .filter(|(_, w)| w.v > 0.0)
            .collect();
        if raws.is_empty() {
            return Err(Error::Geometry(format!("no window covers point {x:?}")));
        }
        let total = raws.iter().fold(Jet2::constant(0.0), |acc, (_, w)| acc + *w);
        Ok(raws.into_iter().map(|(j, w)| (j, w / total)).collect())
    }
}

/// Base-2 radical inverse (van der Corput).
pub fn van_der_corput(mut i: u64) -> f64 {
    let mut inv = 0.5;
    let mut out = 0.0;
    while i > 0 {
        if i & 1 == 1 {
            out += inv;
        }
        inv *= 0.5;
        i >>= 1;
    }
    out
}

/// Hammersley points. In 2-D point `i` is `(i/n, vdc₂(i))` mapped onto the
/// domain; in 1-D it is `vdc₂(i)`.
pub fn hammersley(n: usize, domain: &Domain) -> Vec<Vec<f64>> {
    let b = &domain.bounds;
    (0..n)
        .map(|i| match domain.dim() {
            1 => vec![b[0].0 + van_der_corput(i as u64) * domain.extent(0)],
            _ => vec![
                b[0].0 + (i as f64 / n as f64) * domain.extent(0),
                b[1].0 + van_der_corput(i as u64) * domain.extent(1),
            ],
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CollocationSet {
    pub points: Vec<Vec<f64>>,
    /// `assignment[j]` lists the indices of the points inside box `j` (`D_j`).
    pub assignment: Vec<Vec<usize>>,
}

pub fn assign(decomp: &Decomposition, points: Vec<Vec<f64>>) -> Result<CollocationSet> {
    let mut assignment = vec![Vec::new(); decomp.n_subdomains()];
    for (i, x) in points.iter().enumerate() {
        let mut covered = false;
        for (j, members) in assignment.iter_mut().enumerate() {
            if decomp.contains(j, x) {
                members.push(i);
                covered = true;
            }
        }
        if !covered {
            return Err(Error::Geometry(format!("point {i} {x:?} lies in no subdomain")));
        }
    }
    Ok(CollocationSet { points, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::spatial_jet;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn two_boxes_on_unit_interval() {
        let d = build_decomposition(&Domain::unit(1), &[2], 0.4).unwrap();
        assert!(close(d.overlap[0], 0.2));
        assert!(close(d.boxes[0][0].0, -0.1) && close(d.boxes[0][0].1, 0.6));
        assert!(close(d.boxes[1][0].0, 0.4) && close(d.boxes[1][0].1, 1.1));
    }

    #[test]
    fn two_by_two_neighbors_overlap_by_delta() {
        let dom = Domain::new(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        let d = build_decomposition(&dom, &[2, 2], 0.4).unwrap();
        assert_eq!(d.n_subdomains(), 4);
        // j = 0 is (0,0), j = 1 is (0,1): neighbours along axis 1.
        let ov1 = d.boxes[0][1].1 - d.boxes[1][1].0;
        assert!(close(ov1, d.overlap[1]));
        let ov0 = d.boxes[0][0].1 - d.boxes[2][0].0;
        assert!(close(ov0, d.overlap[0]));
        assert!(close(d.overlap[1], 0.4));
    }

    #[test]
    fn single_box_covers_with_padding() {
        let d = build_decomposition(&Domain::unit(1), &[1], 0.4).unwrap();
        assert!(close(d.boxes[0][0].0, -0.2) && close(d.boxes[0][0].1, 1.2));
        assert!(d.raw_window(0, &[0.0]) > 0.0);
        assert!(d.raw_window(0, &[1.0]) > 0.0);
        assert_eq!(d.window(0, &[0.37]).unwrap(), 1.0);
    }

    #[test]
    fn invalid_ratio_rejected() {
        for r in [0.0, 1.0, -0.2, 1.5] {
            assert!(matches!(
                build_decomposition(&Domain::unit(1), &[2], r),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn norm_maps_box_to_unit_cube() {
        let dom = Domain::new(vec![(0.0, 2.0)]).unwrap();
        let d = Decomposition {
            domain: dom.clone(),
            counts: vec![1],
            overlap: vec![0.1],
            boxes: vec![vec![(0.0, 2.0)]],
        };
        assert_eq!(d.norm(0, &[1.0]), vec![0.0]);
        assert_eq!(d.norm(0, &[2.0]), vec![1.0]);
        let d2 = build_decomposition(&Domain::unit(1), &[2], 0.4).unwrap();
        assert!(d2.norm(0, &[0.25])[0].abs() < 1e-15);
    }

    #[test]
    fn norm_round_trip() {
        let dom = Domain::new(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        let d = build_decomposition(&dom, &[4, 2], 0.4).unwrap();
        for x in hammersley(200, &dom) {
            for j in 0..d.n_subdomains() {
                let back = d.denorm(j, &d.norm(j, &x));
                assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn raw_window_values() {
        let d = build_decomposition(&Domain::unit(1), &[1], 0.4).unwrap();
        let center = d.denorm(0, &[0.0]);
        assert!(close(d.raw_window(0, &center), 4.0));
        let half = d.denorm(0, &[0.5]);
        assert!(close(d.raw_window(0, &half), 1.0));
        let face = d.denorm(0, &[1.0]);
        assert_eq!(d.raw_window(0, &face), 0.0);
    }

    #[test]
    fn window_interior_and_symmetric_overlap() {
        let d = build_decomposition(&Domain::unit(1), &[2], 0.4).unwrap();
        assert_eq!(d.window(0, &[0.1]).unwrap(), 1.0);
        assert_eq!(d.window(1, &[0.1]).unwrap(), 0.0);
        assert!(close(d.window(0, &[0.5]).unwrap(), 0.5));
        assert!(close(d.window(1, &[0.5]).unwrap(), 0.5));
    }

    #[test]
    fn hammersley_unit_square_by_hand() {
        let pts = hammersley(4, &Domain::unit(2));
        let expect = [[0.0, 0.0], [0.25, 0.5], [0.5, 0.25], [0.75, 0.75]];
        for (p, e) in pts.iter().zip(&expect) {
            assert_eq!(p.as_slice(), e.as_slice());
        }
        assert_eq!(hammersley(1, &Domain::unit(1)), vec![vec![0.0]]);
    }

    #[test]
    fn hammersley_in_domain_and_deterministic() {
        let dom = Domain::new(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        let a = hammersley(777, &dom);
        assert!(a.iter().all(|x| dom.contains_closed(x)));
        assert_eq!(a, hammersley(777, &dom));
    }

    #[test]
    fn assignment_open_interval_rule() {
        let d = build_decomposition(&Domain::unit(1), &[2], 0.4).unwrap();
        let face = d.boxes[1][0].0; // 0.3 (up to rounding), interior face of box 1
        let set = assign(&d, vec![vec![0.5], vec![0.1], vec![face]]).unwrap();
        assert_eq!(set.assignment[0], vec![0, 1, 2]);
        assert_eq!(set.assignment[1], vec![0]);
    }

    #[test]
    fn uncovered_point_is_geometry_error() {
        let d = build_decomposition(&Domain::unit(1), &[2], 0.4).unwrap();
        assert!(matches!(assign(&d, vec![vec![5.0]]), Err(Error::Geometry(_))));
    }

    #[test]
    fn window_support_and_smooth_faces() {
        let d = build_decomposition(&Domain::unit(1), &[3], 0.4).unwrap();
        for j in 0..3 {
            let (a, b) = d.boxes[j][0];
            for x in [a - 0.05, a, b, b + 0.01] {
                assert_eq!(d.raw_window(j, &[x]), 0.0);
            }
            // First derivative of (1 + cos(πξ))² at ξ → ±1 vanishes.
            for face in [a, b] {
                let (_, dw, _) = spatial_jet(
                    |x| {
                        let mut s = Jet2::constant(d.norm(j, &[x[0].v])[0]);
                        s.d1[0] = d.norm_scale(j)[0];
                        (s.scale(PI).cos() + Jet2::constant(1.0)).powi(2)
                    },
                    &[face],
                    0,
                );
                assert!(dw.abs() < 1e-10, "derivative {dw} at face");
            }
        }
    }

    #[test]
    fn window_jets_match_finite_differences() {
        let dom = Domain::new(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        let d = build_decomposition(&dom, &[2, 2], 0.4).unwrap();
        let x = [0.47, 0.08];
        let jets = d.window_jets(&x).unwrap();
        let h = 1e-4;
        for (j, w) in jets {
            for k in 0..2 {
                let at = |s: f64| {
                    let mut y = x;
                    y[k] += s;
                    d.window(j, &y).unwrap()
                };
                let fd1 = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
                let fd2 = (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h))
                    / (12.0 * h * h);
                assert!((w.v - at(0.0)).abs() < 1e-14);
                assert!((w.d1[k] - fd1).abs() < 1e-6 * (1.0 + fd1.abs()));
                assert!((w.d2[k] - fd2).abs() < 1e-4 * (1.0 + fd2.abs()));
            }
        }
    }
}
