//! One-dimensional finite element ingredients on the reference interval `[0, 1]`.

use crate::error::{invalid, Result};
use crate::tensor::DenseMatrix;

/// Legendre polynomial `P_n(x)` and its derivative on `[-1, 1]`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (x * x - 1.0).abs() < 1e-300 {
        // endpoint value P_n'(±1) = ±n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss–Lobatto nodes on `[0, 1]`: the endpoints plus the roots of `P_k'`.
pub fn gauss_lobatto_points(k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(invalid("Gauss-Lobatto points need degree >= 1"));
    }
    let mut nodes = vec![0.0; k + 1];
    nodes[k] = 1.0;
    for i in 1..k {
        // Chebyshev–Gauss–Lobatto initial guess, Newton on P_k'
        let mut x = -(std::f64::consts::PI * i as f64 / k as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(k, x);
            let d2p = (2.0 * x * dp - (k * (k + 1)) as f64 * p) / (1.0 - x * x);
            let step = dp / d2p;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (x + 1.0);
    }
    for i in 0..=k / 2 {
        let avg = 0.5 * (nodes[i] + 1.0 - nodes[k - i]);
        nodes[i] = avg;
        nodes[k - i] = 1.0 - avg;
    }
    Ok(nodes)
}

/// Gauss–Legendre rule with `q` points on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q < 1 {
        return Err(invalid("quadrature needs at least one point"));
    }
    let mut points = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(q, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(q, x);
        points[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    for i in 0..q / 2 {
        let j = q - 1 - i;
        let p = 0.5 * (points[i] + 1.0 - points[j]);
        points[i] = p;
        points[j] = 1.0 - p;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if q % 2 == 1 {
        points[q / 2] = 0.5;
    }
    Ok((points, weights))
}

/// Value of the `j`-th Lagrange polynomial through `nodes` at `x`.
pub fn lagrange_value(nodes: &[f64], j: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != j)
        .map(|(_, &xm)| (x - xm) / (nodes[j] - xm))
        .product()
}

pub fn lagrange_derivative(nodes: &[f64], j: usize, x: f64) -> f64 {
    let mut sum = 0.0;
    for (m, &xm) in nodes.iter().enumerate() {
        if m == j {
            continue;
        }
        let mut term = 1.0 / (nodes[j] - xm);
        for (l, &xl) in nodes.iter().enumerate() {
            if l != j && l != m {
                term *= (x - xl) / (nodes[j] - xl);
            }
        }
        sum += term;
    }
    sum
}

/// Matrix of all Lagrange basis values at `points`: rows are points.
pub fn shape_matrix(nodes: &[f64], points: &[f64]) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(points.len(), nodes.len(), |q, j| lagrange_value(nodes, j, points[q]))
}

pub fn shape_gradient_matrix(nodes: &[f64], points: &[f64]) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(points.len(), nodes.len(), |q, j| {
        lagrange_derivative(nodes, j, points[q])
    })
}

#[derive(Debug, Clone)]
pub struct Element1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub quad_points: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// `S[q][j] = φ_j(x_q)`
    pub shape_values: DenseMatrix<f64>,
    /// `D[q][j] = φ_j'(x_q)`
    pub shape_gradients: DenseMatrix<f64>,
}

impl Element1D {
    /// `Q_k` element with `k + 1` Gauss points, exact for the mass and
    /// stiffness integrands.
    pub fn new(k: usize) -> Result<Self> {
        Self::with_quadrature(k, k + 1)
    }

    pub fn with_quadrature(k: usize, q: usize) -> Result<Self> {
        let nodes = gauss_lobatto_points(k)?;
        let (quad_points, quad_weights) = gauss_legendre(q)?;
        let shape_values = shape_matrix(&nodes, &quad_points);
        let shape_gradients = shape_gradient_matrix(&nodes, &quad_points);
        Ok(Self { degree: k, nodes, quad_points, quad_weights, shape_values, shape_gradients })
    }
}

#[derive(Debug, Clone)]
pub struct Cell1DMatrices {
    pub mass: DenseMatrix<f64>,
    pub stiffness: DenseMatrix<f64>,
    pub spacing: f64,
}

/// Reference-interval mass and stiffness scaled to a cell of width `h`.
pub fn cell_matrices_1d(k: usize, h: f64) -> Result<Cell1DMatrices> {
    if !(h > 0.0) {
        return Err(invalid(format!("cell width must be positive, got {h}")));
    }
    let el = Element1D::new(k)?;
    let n = k + 1;
    let (s, d, w) = (&el.shape_values, &el.shape_gradients, &el.quad_weights);
    let mass = DenseMatrix::from_fn(n, n, |i, j| {
        h * (0..w.len()).map(|q| w[q] * s.get(q, i) * s.get(q, j)).sum::<f64>()
    });
    let stiffness = DenseMatrix::from_fn(n, n, |i, j| {
        (0..w.len()).map(|q| w[q] * d.get(q, i) * d.get(q, j)).sum::<f64>() / h
    });
    Ok(Cell1DMatrices { mass, stiffness, spacing: h })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Polynomial in monomial coefficients, lowest order first.
    fn lagrange_monomials(nodes: &[f64], j: usize) -> Vec<f64> {
        let mut poly = vec![1.0];
        for (m, &xm) in nodes.iter().enumerate() {
            if m == j {
                continue;
            }
            let scale = 1.0 / (nodes[j] - xm);
            let mut next = vec![0.0; poly.len() + 1];
            for (p, &c) in poly.iter().enumerate() {
                next[p + 1] += c * scale;
                next[p] -= c * xm * scale;
            }
            poly = next;
        }
        poly
    }

    fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    fn deriv(a: &[f64]) -> Vec<f64> {
        if a.len() == 1 {
            return vec![0.0];
        }
        a.iter().enumerate().skip(1).map(|(p, &c)| p as f64 * c).collect()
    }

    /// Exact integral over `[0, h]` of a polynomial in the reference variable.
    fn integrate(a: &[f64]) -> f64 {
        a.iter().enumerate().map(|(p, &c)| c / (p + 1) as f64).sum()
    }

    #[test]
    fn lobatto_nodes_examples() {
        assert_eq!(gauss_lobatto_points(1).unwrap(), vec![0.0, 1.0]);
        let n2 = gauss_lobatto_points(2).unwrap();
        assert!((n2[1] - 0.5).abs() < 1e-15);
        let n3 = gauss_lobatto_points(3).unwrap();
        let r = 1.0 / 5f64.sqrt();
        assert!((n3[1] - 0.5 * (1.0 - r)).abs() < 1e-15);
        assert!((n3[2] - 0.5 * (1.0 + r)).abs() < 1e-15);
        assert!(gauss_lobatto_points(0).is_err());
    }

    #[test]
    fn lobatto_nodes_are_symmetric_and_increasing() {
        for k in 1..=12 {
            let n = gauss_lobatto_points(k).unwrap();
            assert_eq!(n[0], 0.0);
            assert_eq!(n[k], 1.0);
            for i in 0..k {
                assert!(n[i] < n[i + 1]);
                assert!((n[i] + n[k - i] - 1.0).abs() < 1e-15);
            }
            // interior nodes are roots of P_k'
            for &x in &n[1..k] {
                assert!(legendre(k, 2.0 * x - 1.0).1.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        for q in 1..=10 {
            let (p, w) = gauss_legendre(q).unwrap();
            for deg in 0..2 * q {
                let approx: f64 = p.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((approx - 1.0 / (deg + 1) as f64).abs() < 1e-14, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn shape_functions_partition_unity_and_lagrange() {
        for k in 1..=8 {
            let el = Element1D::new(k).unwrap();
            for q in 0..el.quad_points.len() {
                let s: f64 = (0..=k).map(|j| el.shape_values.get(q, j)).sum();
                let d: f64 = (0..=k).map(|j| el.shape_gradients.get(q, j)).sum();
                assert!((s - 1.0).abs() < 1e-13);
                assert!(d.abs() < 1e-10);
            }
            let at_nodes = shape_matrix(&el.nodes, &el.nodes);
            for i in 0..=k {
                for j in 0..=k {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((at_nodes.get(i, j) - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn linear_cell_matrices() {
        let h = 0.25;
        let c = cell_matrices_1d(1, h).unwrap();
        let a = [[1.0, -1.0], [-1.0, 1.0]];
        let m = [[2.0, 1.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.stiffness.get(i, j) - a[i][j] / h).abs() < 1e-14);
                assert!((c.mass.get(i, j) - m[i][j] * h / 6.0).abs() < 1e-15);
            }
        }
        assert!(cell_matrices_1d(1, 0.0).is_err());
    }

    #[test]
    fn cell_matrices_match_exact_polynomial_integration() {
        // the monomial expansion loses a few digits as k grows
        for k in 2..=5 {
            let h = 0.3;
            let c = cell_matrices_1d(k, h).unwrap();
            let nodes = gauss_lobatto_points(k).unwrap();
            let polys: Vec<Vec<f64>> = (0..=k).map(|j| lagrange_monomials(&nodes, j)).collect();
            for i in 0..=k {
                for j in 0..=k {
                    let m = h * integrate(&mul(&polys[i], &polys[j]));
                    let a = integrate(&mul(&deriv(&polys[i]), &deriv(&polys[j]))) / h;
                    assert!((c.mass.get(i, j) - m).abs() < 1e-10, "k={k} M[{i}][{j}]");
                    assert!((c.stiffness.get(i, j) - a).abs() < 1e-9, "k={k} A[{i}][{j}]");
                }
            }
        }
    }

    #[test]
    fn cell_matrix_properties() {
        for k in 1..=8 {
            let c = cell_matrices_1d(k, 1.0).unwrap();
            for i in 0..=k {
                let row: f64 = (0..=k).map(|j| c.stiffness.get(i, j)).sum();
                assert!(row.abs() < 1e-9, "constants are in the stiffness kernel");
                for j in 0..=k {
                    assert!((c.mass.get(i, j) - c.mass.get(j, i)).abs() < 1e-14);
                    assert!((c.stiffness.get(i, j) - c.stiffness.get(j, i)).abs() < 1e-11);
                }
            }
            let total_mass: f64 =
                (0..=k).flat_map(|i| (0..=k).map(move |j| (i, j))).map(|(i, j)| c.mass.get(i, j)).sum();
            assert!((total_mass - 1.0).abs() < 1e-13);
        }
    }
}
