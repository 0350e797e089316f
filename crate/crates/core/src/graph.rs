//! Graphs, the normalized Laplacian and its eigenbasis.
//!
//! Every other module works in the eigenbasis computed here: the graph
//! Fourier transform is `x̃ = Vᵀx`, and all filters (the heat filter, the
//! closed-form denoiser, the marginal covariances) are diagonal in it.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GadError, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_SYMMETRY_TOL: f64 = 1e-10;

/// Undirected weighted graph without self loops or isolated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
    node_labels: Option<Vec<String>>,
}

impl Graph {
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        validate_adjacency(&adjacency)?;
        Ok(Graph { adjacency, node_labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(GadError::DimensionMismatch { expected: self.num_nodes(), got: labels.len() });
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn node_labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    pub fn degrees(&self) -> DVector<f64> {
        DVector::from_iterator(self.num_nodes(), self.adjacency.row_iter().map(|r| r.sum()))
    }

    pub fn is_connected(&self) -> bool {
        is_connected(&self.adjacency)
    }

    /// Relabel nodes so that new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes();
        check_permutation(perm, n)?;
        let adjacency = DMatrix::from_fn(n, n, |i, j| self.adjacency[(perm[i], perm[j])]);
        let node_labels = self
            .node_labels
            .as_ref()
            .map(|l| perm.iter().map(|&p| l[p].clone()).collect());
        Ok(Graph { adjacency, node_labels })
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(GadError::DimensionMismatch { expected: n, got: perm.len() });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(GadError::param("not a permutation"));
        }
        seen[p] = true;
    }
    Ok(())
}

fn validate_adjacency(a: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if n == 0 {
        return Err(GadError::InvalidAdjacency("empty matrix".into()));
    }
    if a.ncols() != n {
        return Err(GadError::InvalidAdjacency(format!("{}x{} is not square", n, a.ncols())));
    }
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(GadError::InvalidAdjacency(format!("entry ({i},{j}) = {v} is not a finite nonnegative weight")));
            }
        }
        if a[(i, i)] != 0.0 {
            return Err(GadError::InvalidAdjacency(format!("nonzero diagonal at node {i}")));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(GadError::Asymmetric { row: i, col: j, a: a[(i, j)], b: a[(j, i)] });
            }
        }
    }
    for i in 0..n {
        if a.row(i).sum() <= 0.0 {
            return Err(GadError::IsolatedNode(i));
        }
    }
    Ok(())
}

pub(crate) fn is_connected(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if !seen[v] && a[(u, v)] > 0.0 {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

/// `L = I − D^{−1/2} A D^{−1/2}`.
pub fn build_normalized_laplacian(adjacency: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    validate_adjacency(adjacency)?;
    let n = adjacency.nrows();
    let inv_sqrt: Vec<f64> = adjacency.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let off = adjacency[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    }))
}

/// Normalized Laplacian together with its eigendecomposition `L = V Λ Vᵀ`.
///
/// Eigenvalues are sorted ascending and each eigenvector is signed so that
/// its largest-magnitude entry is positive. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Spectrum {
    laplacian: DMatrix<f64>,
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    degrees: DVector<f64>,
}

impl Spectrum {
    pub fn from_graph(graph: &Graph) -> Result<Self> {
        let laplacian = build_normalized_laplacian(graph.adjacency())?;
        let (eigenvalues, eigenvectors) = eigendecompose(&laplacian)?;
        // L is PSD; round-off can push the null eigenvalue slightly negative.
        let eigenvalues = eigenvalues.map(|v| v.max(0.0));
        Ok(Spectrum { laplacian, eigenvectors, eigenvalues, degrees: graph.degrees() })
    }

    pub fn num_nodes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Columns are eigenvectors.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn check_signal(&self, x: &DVector<f64>) -> Result<()> {
        check_signal(x, self.num_nodes())
    }

    pub fn gft(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_signal(x)?;
        Ok(self.eigenvectors.tr_mul(x))
    }

    pub fn igft(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.num_nodes() {
            return Err(GadError::DimensionMismatch { expected: self.num_nodes(), got: coeffs.len() });
        }
        Ok(&self.eigenvectors * coeffs)
    }

    /// GFT of every column of `x` (N × B).
    pub fn gft_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.eigenvectors.tr_mul(x)
    }

    pub fn igft_columns(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.eigenvectors * coeffs
    }

    /// Applies the graph filter with per-mode gains `response` to `x`,
    /// i.e. `V diag(response) Vᵀ x`.
    pub fn apply_spectral(&self, response: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.eigenvectors.tr_mul(x).component_mul(response);
        &self.eigenvectors * coeffs
    }

    pub fn apply_spectral_columns(&self, response: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coeffs = self.eigenvectors.tr_mul(x);
        for mut col in coeffs.column_iter_mut() {
            col.component_mul_assign(response);
        }
        &self.eigenvectors * coeffs
    }

    /// Dense `V diag(response) Vᵀ`.
    pub fn spectral_matrix(&self, response: &DVector<f64>) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.num_nodes(), self.num_nodes(), |i, j| {
            self.eigenvectors[(i, j)] * response[j]
        });
        scaled * self.eigenvectors.transpose()
    }

    /// `Σ_k θ_k L^k x` by Horner's rule on the vertex domain.
    pub fn filter_vertex(&self, coeffs: &[f64], x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_signal(x)?;
        let Some((&last, rest)) = coeffs.split_last() else {
            return Err(GadError::param("filter needs at least one coefficient"));
        };
        let mut acc = x * last;
        for &theta in rest.iter().rev() {
            acc = &self.laplacian * acc + x * theta;
        }
        Ok(acc)
    }

    /// `V (Σ_k θ_k Λ^k) Vᵀ x`.
    pub fn filter_spectral(&self, coeffs: &[f64], x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_signal(x)?;
        if coeffs.is_empty() {
            return Err(GadError::param("filter needs at least one coefficient"));
        }
        let response = self.eigenvalues.map(|lam| coeffs.iter().rev().fold(0.0, |acc, &c| acc * lam + c));
        Ok(self.apply_spectral(&response, x))
    }
}

pub fn check_signal(x: &DVector<f64>, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(GadError::DimensionMismatch { expected: n, got: x.len() });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(GadError::param(format!("signal entry {i} is not finite")));
    }
    Ok(())
}

/// Dense symmetric eigendecomposition, eigenvalues ascending, deterministic
/// eigenvector signs. Returns `(λ, V)`.
pub fn eigendecompose(l: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(GadError::DimensionMismatch { expected: n, got: l.ncols() });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (l[(i, j)] - l[(j, i)]).abs() > EIGEN_SYMMETRY_TOL {
                return Err(GadError::param(format!("matrix not symmetric at ({i},{j})")));
            }
        }
    }
    let eig = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path3() -> Graph {
        Graph::new(DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.])).unwrap()
    }

    #[test]
    fn single_edge_laplacian() {
        let a = DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]);
        let l = build_normalized_laplacian(&a).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]));
    }

    #[test]
    fn path3_spectrum() {
        // characteristic polynomial of [[1,-s,0],[-s,1,-s],[0,-s,1]] with s = 1/√2
        // is (1-λ)((1-λ)² - 1), roots 0, 1, 2
        let s = Spectrum::from_graph(&path3()).unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 1.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let sqrt_d = s.degrees().map(f64::sqrt);
        assert!((s.laplacian() * &sqrt_d).amax() < 1e-14);
        let v0 = s.eigenvectors().column(0);
        let cos = v0.dot(&sqrt_d) / sqrt_d.norm();
        assert_abs_diff_eq!(cos.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn triangle_spectrum() {
        let a = DMatrix::from_row_slice(3, 3, &[0., 1., 1., 1., 0., 1., 1., 1., 0.]);
        let s = Spectrum::from_graph(&Graph::new(a).unwrap()).unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 1.5, 1.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_eigendecomposition() {
        let (vals, vecs) = eigendecompose(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(vals, DVector::from_element(3, 1.0));
        let recon = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((recon - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn sign_convention() {
        let s = Spectrum::from_graph(&path3()).unwrap();
        for col in s.eigenvectors().column_iter() {
            let pivot = col.iter().copied().fold(0.0_f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_and_isolated() {
        let a = DMatrix::from_row_slice(2, 2, &[0., 1., 2., 0.]);
        assert!(matches!(Graph::new(a), Err(GadError::Asymmetric { .. })));
        let a = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 0., 0., 0., 0.]);
        assert!(matches!(Graph::new(a), Err(GadError::IsolatedNode(2))));
        let l = DMatrix::from_row_slice(2, 2, &[1., 0.5, 0.4, 1.]);
        assert!(eigendecompose(&l).is_err());
    }

    #[test]
    fn gft_of_eigenvector_is_canonical() {
        let s = Spectrum::from_graph(&path3()).unwrap();
        for i in 0..3 {
            let v = s.eigenvectors().column(i).into_owned();
            let c = s.gft(&v).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(c[j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
        assert_eq!(s.gft(&DVector::zeros(3)).unwrap(), DVector::zeros(3));
        assert!(matches!(s.gft(&DVector::zeros(4)), Err(GadError::DimensionMismatch { .. })));
    }

    #[test]
    fn polynomial_filter_examples() {
        let s = Spectrum::from_graph(&path3()).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        assert_eq!(s.filter_vertex(&[1.0], &x).unwrap(), x);
        let lx = s.laplacian() * &x;
        assert!((s.filter_vertex(&[0.0, 1.0], &x).unwrap() - &lx).amax() < 1e-15);
        assert!((s.filter_spectral(&[0.0, 1.0], &x).unwrap() - &lx).amax() < 1e-12);
        for i in 0..3 {
            let v = s.eigenvectors().column(i).into_owned();
            let out = s.filter_spectral(&[1.0, -1.0], &v).unwrap();
            let want = &v * (1.0 - s.eigenvalues()[i]);
            assert!((out - want).amax() < 1e-12);
        }
    }
}
