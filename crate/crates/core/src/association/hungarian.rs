//! Maximum-weight bipartite matching on a dense, possibly rectangular,
//! masked score matrix (Kuhn–Munkres with row/column potentials, O(n³)).

/// Scores between rows (tracklets) and columns (detections). Masked
/// entries can never be selected.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl SimilarityMatrix {
    /// All entries valid, all zero.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols], valid: vec![true; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged score matrix");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Panics on a non-finite score.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(v.is_finite(), "similarity scores must be finite");
        self.values[i * self.cols + j] = v;
    }

    pub fn mask(&mut self, i: usize, j: usize) {
        self.valid[i * self.cols + j] = false;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[i * self.cols + j]
    }
}

/// Row/column pairs of a maximum-total-score matching, sorted by row.
///
/// Leaving a row unmatched scores zero, so a pair is only taken when it
/// does not lower the total: with non-negative scores every row that has a
/// valid entry to a free column gets matched. Results are deterministic
/// for a given matrix.
pub fn hungarian(m: &SimilarityMatrix) -> Vec<(usize, usize)> {
    let n = m.rows.max(m.cols);
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    // minimisation on an n×n square; masked and padded cells cost 0 = "unmatched"
    let cost = |i: usize, j: usize| -> f64 {
        if i < m.rows && j < m.cols && m.is_valid(i, j) {
            (-m.get(i, j)).min(0.0)
        } else {
            0.0
        }
    };
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter_map(|j| {
            let i = p[j];
            (i >= 1 && i - 1 < m.rows && j - 1 < m.cols && m.is_valid(i - 1, j - 1) && m.get(i - 1, j - 1) >= 0.0)
                .then_some((i - 1, j - 1))
        })
        .collect();
    pairs.sort_unstable();
    pairs
}

pub fn matching_score(m: &SimilarityMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| m.get(i, j)).sum()
}
