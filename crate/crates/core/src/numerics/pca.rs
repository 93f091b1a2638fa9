use super::eigen::symmetric_eigen;
use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Centers `rows` and projects them onto the top `dims` principal directions.
pub fn pca_project(rows: &Matrix, dims: usize) -> Result<Matrix> {
    let (n, d) = rows.shape();
    if dims == 0 || dims > d {
        return Err(Error::Shape(format!(
            "cannot project {d}-dimensional rows onto {dims} components"
        )));
    }
    if n < 2 {
        return Err(Error::Shape(format!("PCA needs at least 2 rows, got {n}")));
    }
    let mut mean = vec![0.0; d];
    for r in rows.row_iter() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut centered = rows.clone();
    for i in 0..n {
        for (x, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    let mut cov = centered.t_matmul(&centered)?;
    cov.scale(1.0 / (n - 1) as f64);
    let eig = symmetric_eigen(&cov)?;
    let components: Vec<Vec<f64>> = (0..dims).map(|j| eig.vector(j)).collect();

    let mut out = Matrix::zeros(n, dims);
    for i in 0..n {
        for (j, c) in components.iter().enumerate() {
            out[(i, j)] = dot(centered.row(i), c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(m: &Matrix) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..m.rows() {
            for j in (i + 1)..m.rows() {
                let d: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                out.push(d.sqrt());
            }
        }
        out
    }

    #[test]
    fn line_in_3d_projects_to_distances() {
        let dir = [1.0, 2.0, 2.0];
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 3.0, -2.0]
            .iter()
            .map(|t| dir.iter().map(|d| 5.0 + t * d / 3.0).collect())
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let p = pca_project(&m, 1).unwrap();
        for (a, b) in pairwise(&m).iter().zip(pairwise(&p)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_projection_is_a_rotation() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [-1.0, -0.5], [0.3, -0.7], [-0.3, 0.7]]).unwrap();
        let p = pca_project(&m, 2).unwrap();
        for (a, b) in pairwise(&m).iter().zip(pairwise(&p)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rectangle_variance_ordering() {
        // 4×1 rectangle: covariance diag(16/3, 1/3), so axis 1 carries the long side
        let m = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]]).unwrap();
        let p = pca_project(&m, 2).unwrap();
        let var = |j: usize| p.column(j).iter().map(|x| x * x).sum::<f64>() / 3.0;
        assert!(var(0) >= var(1));
        assert!((var(0) - 16.0 / 3.0).abs() < 1e-9);
        assert!((var(1) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(pca_project(&m, 3), Err(Error::Shape(_))));
        let single = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(pca_project(&single, 1).is_err());
    }
}
