use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Cosine,
    Euclidean,
    NegativeInnerProduct,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [
        DistanceMetric::Cosine,
        DistanceMetric::Euclidean,
        DistanceMetric::NegativeInnerProduct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::Cosine => "cosine",
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::NegativeInnerProduct => "negative_inner_product",
        }
    }

    /// Ranking distance; smaller is closer for every metric.
    pub fn distance(self, u: &[f32], v: &[f32]) -> Result<f64, StoreError> {
        let raw = similarity(u, v, self)?;
        Ok(match self {
            DistanceMetric::Cosine => (1.0 - raw).max(0.0),
            DistanceMetric::Euclidean | DistanceMetric::NegativeInnerProduct => raw,
        })
    }

    /// Similarity used for MMR: larger is more similar.
    pub fn relatedness(self, u: &[f32], v: &[f32]) -> Result<f64, StoreError> {
        let raw = similarity(u, v, self)?;
        Ok(match self {
            DistanceMetric::Cosine => raw,
            DistanceMetric::Euclidean | DistanceMetric::NegativeInnerProduct => -raw,
        })
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMetric {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cosine" => Ok(DistanceMetric::Cosine),
            "euclidean" | "l2" => Ok(DistanceMetric::Euclidean),
            "negative_inner_product" | "ip" => Ok(DistanceMetric::NegativeInnerProduct),
            other => Err(StoreError::InvalidArgument(format!(
                "unknown distance metric {other:?}"
            ))),
        }
    }
}

/// Raw metric value: cosine similarity, Euclidean distance, or negated dot
/// product. Accumulates in f64.
pub fn similarity(u: &[f32], v: &[f32], metric: DistanceMetric) -> Result<f64, StoreError> {
    if u.len() != v.len() {
        return Err(StoreError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    match metric {
        DistanceMetric::Cosine => {
            let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
            for (a, b) in u.iter().zip(v) {
                let (a, b) = (f64::from(*a), f64::from(*b));
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
            if nu == 0.0 || nv == 0.0 {
                return Err(StoreError::ZeroVector);
            }
            Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
        }
        DistanceMetric::Euclidean => Ok(u
            .iter()
            .zip(v)
            .map(|(a, b)| {
                let d = f64::from(*a) - f64::from(*b);
                d * d
            })
            .sum::<f64>()
            .sqrt()),
        DistanceMetric::NegativeInnerProduct => Ok(-u
            .iter()
            .zip(v)
            .map(|(a, b)| f64::from(*a) * f64::from(*b))
            .sum::<f64>()),
    }
}

pub fn is_zero_vector(v: &[f32]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_identity_and_orthogonality() {
        let c = DistanceMetric::Cosine;
        assert_eq!(similarity(&[1.0, 0.0], &[1.0, 0.0], c).unwrap(), 1.0);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0], c).unwrap(), 0.0);
    }

    #[test]
    fn cosine_of_small_integer_vectors_matches_exact_fraction() {
        // (1,2,2).(2,1,2) = 8, both norms are 3, so the value is exactly 8/9.
        let got = similarity(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0], DistanceMetric::Cosine).unwrap();
        assert!((got - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_and_inner_product() {
        let d = similarity(&[0.0, 3.0], &[4.0, 0.0], DistanceMetric::Euclidean).unwrap();
        assert_eq!(d, 5.0);
        let ip = similarity(&[1.0, 2.0], &[3.0, 4.0], DistanceMetric::NegativeInnerProduct).unwrap();
        assert_eq!(ip, -11.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            similarity(&[1.0], &[1.0, 2.0], DistanceMetric::Euclidean),
            Err(StoreError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            similarity(&[0.0, 0.0], &[1.0, 2.0], DistanceMetric::Cosine),
            Err(StoreError::ZeroVector)
        ));
        // Zero vectors are fine for the other metrics.
        assert!(similarity(&[0.0, 0.0], &[1.0, 2.0], DistanceMetric::Euclidean).is_ok());
    }

    #[test]
    fn cosine_distance_is_one_minus_similarity() {
        let d = DistanceMetric::Cosine
            .distance(&[1.0, 0.0], &[0.0, 1.0])
            .unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn metric_names_parse() {
        for m in DistanceMetric::ALL {
            assert_eq!(m.as_str().parse::<DistanceMetric>().unwrap(), m);
        }
        assert_eq!(DistanceMetric::default(), DistanceMetric::Cosine);
    }
}
