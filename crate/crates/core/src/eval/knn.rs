use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Embeddings;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    Cosine,
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Euclidean => "euclidean",
            Distance::Cosine => "cosine",
        })
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Distance::Euclidean),
            "cosine" => Ok(Distance::Cosine),
            _ => Err(Error::Usage(format!("unknown distance `{s}`; expected euclidean or cosine"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnResult {
    pub k: usize,
    pub precision: f64,
    pub queries: Vec<usize>,
    /// Gallery indices of each query's neighbors, nearest first.
    pub neighbors: Vec<Vec<usize>>,
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| ((x - y) as f64).powi(2)).sum()
}

fn norm(a: &[f32]) -> f64 {
    a.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt()
}

/// Nearest neighbors of each query among all other rows of `emb`.
///
/// Precision@k is the fraction of neighbors sharing the query's label,
/// averaged over queries. Ties go to the lower index.
pub fn knn_retrieval(
    emb: &Embeddings,
    labels: &[u8],
    queries: &[usize],
    k: usize,
    distance: Distance,
) -> Result<KnnResult> {
    if labels.len() != emb.n {
        return Err(Error::CountMismatch {
            images: emb.n,
            labels: labels.len(),
        });
    }
    let gallery = emb.n.saturating_sub(1);
    if k == 0 || k >= gallery {
        return Err(Error::Usage(format!(
            "k = {k} must be between 1 and {} (gallery size {gallery}, the query excluded)",
            gallery.saturating_sub(1)
        )));
    }
    if let Some(&q) = queries.iter().find(|&&q| q >= emb.n) {
        return Err(Error::Usage(format!("query index {q} outside 0..{}", emb.n)));
    }
    let norms: Vec<f64> = match distance {
        Distance::Cosine => (0..emb.n).map(|i| norm(emb.row(i)).max(1e-12)).collect(),
        Distance::Euclidean => Vec::new(),
    };
    let mut neighbors = Vec::with_capacity(queries.len());
    let mut hits = 0usize;
    for &q in queries {
        let qa = emb.row(q);
        let mut scored: Vec<(f64, usize)> = (0..emb.n)
            .filter(|&g| g != q)
            .map(|g| {
                let gb = emb.row(g);
                let d = match distance {
                    Distance::Euclidean => squared_distance(qa, gb),
                    Distance::Cosine => {
                        let dot: f64 = qa.iter().zip(gb).map(|(&a, &b)| a as f64 * b as f64).sum();
                        1.0 - dot / (norms[q] * norms[g])
                    }
                };
                (d, g)
            })
            .collect();
        scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(k);
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nn: Vec<usize> = scored.into_iter().map(|(_, g)| g).collect();
        hits += nn.iter().filter(|&&g| labels[g] == labels[q]).count();
        neighbors.push(nn);
    }
    Ok(KnnResult {
        k,
        precision: if queries.is_empty() {
            0.0
        } else {
            hits as f64 / (k * queries.len()) as f64
        },
        queries: queries.to_vec(),
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmbeddingLayer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn embeddings(n: usize, dim: usize, data: Vec<f32>) -> Embeddings {
        Embeddings {
            layer: EmbeddingLayer::Bottleneck,
            n,
            dim,
            grid: (dim, 1, 1),
            data,
        }
    }

    #[test]
    fn orthogonal_one_hot_classes_are_perfect() {
        let (classes, per) = (4, 8);
        let n = classes * per;
        let labels: Vec<u8> = (0..n).map(|i| (i % classes) as u8).collect();
        let mut data = vec![0.0; n * classes];
        for i in 0..n {
            data[i * classes + i % classes] = 1.0 + (i / classes) as f32 * 1e-3;
        }
        let emb = embeddings(n, classes, data);
        let q: Vec<usize> = (0..n).collect();
        for d in [Distance::Euclidean, Distance::Cosine] {
            assert_eq!(knn_retrieval(&emb, &labels, &q, 5, d).unwrap().precision, 1.0);
        }
    }

    #[test]
    fn gaussian_codes_are_at_chance() {
        let n = 1000;
        let dim = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f32> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let q: Vec<usize> = (0..n).collect();
        let r = knn_retrieval(&embeddings(n, dim, data), &labels, &q, 5, Distance::Euclidean).unwrap();
        assert!((r.precision - 0.1).abs() <= 0.02, "{}", r.precision);
    }

    #[test]
    fn neighbors_are_sorted_and_exclude_the_query() {
        let data: Vec<f32> = vec![0.0, 1.0, 3.0, 6.0, 10.0];
        let emb = embeddings(5, 1, data);
        let r = knn_retrieval(&emb, &[0, 0, 1, 1, 1], &[2], 3, Distance::Euclidean).unwrap();
        assert_eq!(r.neighbors, vec![vec![1, 0, 3]]);
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn k_at_least_gallery_is_a_usage_error() {
        let emb = embeddings(4, 1, vec![0.0; 4]);
        assert!(matches!(
            knn_retrieval(&emb, &[0; 4], &[0], 3, Distance::Euclidean),
            Err(Error::Usage(_))
        ));
        assert!(knn_retrieval(&emb, &[0; 4], &[0], 2, Distance::Euclidean).is_ok());
    }
}
