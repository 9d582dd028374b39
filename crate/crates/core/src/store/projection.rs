//! Two-dimensional PCA projection of an index, for cluster views.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Collection, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    /// Sample variance (n - 1 denominator) captured by each component.
    pub variances: [f64; 2],
}

/// Projects mean-centred rows onto the top two principal components.
///
/// Each component is signed so its largest-magnitude loading is positive.
/// When rows outnumber dimensions the covariance matrix is decomposed,
/// otherwise the smaller Gram matrix is.
pub fn project_2d(collection: &Collection) -> Result<Projection, StoreError> {
    if !collection.is_fresh() {
        if collection.is_empty() {
            return Err(StoreError::InsufficientData(0));
        }
        return Err(StoreError::StaleIndex);
    }
    let index = collection.index().expect("fresh");
    let n = collection.len();
    if n < 2 {
        return Err(StoreError::InsufficientData(n));
    }
    let d = index.dimension;
    let ids: Vec<&str> = collection.objects().map(|o| o.id.as_str()).collect();
    let mut x = DMatrix::<f64>::zeros(n, d);
    for (r, id) in ids.iter().enumerate() {
        for (c, v) in index.rows[*id].iter().enumerate() {
            x[(r, c)] = f64::from(*v);
        }
    }
    let mean = x.row_mean();
    for mut row in x.row_iter_mut() {
        row -= &mean;
    }

    let loadings = principal_axes(&x, 2);
    let denom = (n - 1) as f64;
    let mut coords = [DVector::zeros(n), DVector::zeros(n)];
    let mut variances = [0.0; 2];
    for (k, axis) in loadings.into_iter().enumerate() {
        if let Some(axis) = axis {
            let proj = &x * axis;
            variances[k] = proj.norm_squared() / denom;
            coords[k] = proj;
        }
    }
    let points = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| ProjectedPoint {
            id: id.to_string(),
            x: coords[0][i],
            y: coords[1][i],
        })
        .collect();
    Ok(Projection { points, variances })
}

/// Unit loading vectors for the leading `count` components of centred `x`;
/// `None` where the component has (numerically) zero variance.
fn principal_axes(x: &DMatrix<f64>, count: usize) -> Vec<Option<DVector<f64>>> {
    let (n, d) = x.shape();
    let use_gram = n <= d;
    let m = if use_gram { x * x.transpose() } else { x.transpose() * x };
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * 1e-12 + f64::MIN_POSITIVE;

    (0..count)
        .map(|k| {
            let &idx = order.get(k)?;
            if eig.eigenvalues[idx] <= tol {
                return None;
            }
            let vec = eig.eigenvectors.column(idx).into_owned();
            let mut axis = if use_gram { x.transpose() * vec } else { vec };
            let norm = axis.norm();
            if norm == 0.0 {
                return None;
            }
            axis /= norm;
            let lead = axis
                .iter()
                .enumerate()
                .fold((0usize, 0.0f64), |best, (i, v)| {
                    if v.abs() > best.1.abs() { (i, *v) } else { best }
                });
            if lead.1 < 0.0 {
                axis = -axis;
            }
            Some(axis)
        })
        .collect()
}
