use serde::{Deserialize, Serialize};

use crate::AnalysisError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    /// start-goal distance, meters
    pub distance: f64,
    pub success: bool,
}

/// Success counts per distance bucket. Bucket i covers [edges[i], edges[i+1]);
/// distances outside the edge range are not counted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceBuckets {
    pub edges: Vec<f64>,
    pub successes: Vec<u64>,
    pub totals: Vec<u64>,
}

impl DistanceBuckets {
    /// Per-bucket success rate; empty buckets report null.
    pub fn rates(&self) -> Vec<Option<f64>> {
        self.successes
            .iter()
            .zip(&self.totals)
            .map(|(&s, &t)| if t == 0 { None } else { Some(s as f64 / t as f64) })
            .collect()
    }
}

pub fn success_by_distance(
    episodes: &[EpisodeOutcome],
    edges: &[f64],
) -> Result<DistanceBuckets, AnalysisError> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::BadEdges);
    }
    let n_buckets = edges.len() - 1;
    let mut successes = vec![0u64; n_buckets];
    let mut totals = vec![0u64; n_buckets];
    for ep in episodes {
        if ep.distance < edges[0] || ep.distance >= edges[n_buckets] {
            continue;
        }
        let idx = edges[1..].iter().position(|&e| ep.distance < e).expect("in range");
        totals[idx] += 1;
        if ep.success {
            successes[idx] += 1;
        }
    }
    Ok(DistanceBuckets { edges: edges.to_vec(), successes, totals })
}
