//! Shared oracles and generators for the integration and acceptance suites.

use xmctree::data::{dataset_from_rows, MultiLabelDataset};
use xmctree::rng::SplitMix64;
use xmctree::solver::{BinaryProblem, LossKind, LossSpec};

/// A small dense binary problem for reference optimization.
pub struct DenseProblem {
    /// Row-major instances, `n_features` wide.
    pub rows: Vec<Vec<f64>>,
    pub signs: Vec<f64>,
    pub loss: LossSpec,
}

impl DenseProblem {
    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        let mut total = 0.0;
        for (row, &y) in self.rows.iter().zip(&self.signs) {
            let z: f64 = y * dot(row, w);
            total += match self.loss.kind {
                LossKind::SquaredHinge => {
                    let m = (1.0 - z).max(0.0);
                    m * m
                }
                LossKind::Logistic => {
                    if z > 0.0 {
                        (-z).exp().ln_1p()
                    } else {
                        -z + z.exp().ln_1p()
                    }
                }
            };
        }
        total + self.loss.lambda / 2.0 * w.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n_features();
        let mut g: Vec<f64> = w.iter().map(|&v| self.loss.lambda * v).collect();
        g.resize(n, 0.0);
        for (row, &y) in self.rows.iter().zip(&self.signs) {
            let z = y * dot(row, w);
            let slope = match self.loss.kind {
                LossKind::SquaredHinge => -2.0 * (1.0 - z).max(0.0),
                LossKind::Logistic => {
                    // -sigmoid(-z)
                    if z > 0.0 {
                        -(-z).exp() / (1.0 + (-z).exp())
                    } else {
                        -1.0 / (1.0 + z.exp())
                    }
                }
            };
            for (gi, &xi) in g.iter_mut().zip(row) {
                *gi += slope * y * xi;
            }
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reference minimizer: gradient descent with Armijo backtracking, run to
/// a tight gradient norm. Independent of the coordinate-descent path under
/// test. Returns `(w, objective)`.
pub fn reference_minimize(problem: &DenseProblem) -> (Vec<f64>, f64) {
    let n = problem.n_features();
    let mut w = vec![0.0; n];
    let mut f = problem.objective(&w);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let g = problem.gradient(&w);
        let g_norm2: f64 = g.iter().map(|v| v * v).sum();
        if g_norm2.sqrt() < 1e-11 {
            break;
        }
        // backtracking line search on the descent direction -g
        step *= 2.0;
        loop {
            let candidate: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
            let fc = problem.objective(&candidate);
            if fc <= f - 0.25 * step * g_norm2 || step < 1e-18 {
                w = candidate;
                f = fc;
                break;
            }
            step /= 2.0;
        }
    }
    (w, f)
}

/// Random small problem in up to `max_features` dimensions: returns the
/// sparse dataset-backed problem and its dense twin.
pub fn random_small_problem(
    seed: u64,
    max_features: u32,
    max_instances: usize,
) -> (MultiLabelDataset<f64>, BinaryProblem, DenseProblem) {
    let mut rng = SplitMix64::new(seed);
    let n = 1 + rng.below(max_features as u64) as u32;
    let ell = 2 + rng.below((max_instances - 1) as u64) as usize;
    let kind = if rng.below(2) == 0 {
        LossKind::SquaredHinge
    } else {
        LossKind::Logistic
    };
    let lambda = [0.5, 1.0, 2.0][rng.below(3) as usize];
    let loss = LossSpec::new(kind, lambda).unwrap();

    let mut rows = Vec::with_capacity(ell);
    let mut dense_rows = Vec::with_capacity(ell);
    let mut signs = Vec::with_capacity(ell);
    for _ in 0..ell {
        let mut entries = Vec::new();
        let mut dense = vec![0.0; n as usize];
        for f in 0..n {
            if rng.next_f64() < 0.75 {
                let v = (rng.next_f64() * 4.0 - 2.0 + 0.01).clamp(-2.0, 2.0);
                if v != 0.0 {
                    entries.push((f, v));
                    dense[f as usize] = v;
                }
            }
        }
        let sign = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
        rows.push((entries, Vec::new()));
        dense_rows.push(dense);
        signs.push(sign);
    }
    let ds = dataset_from_rows(rows, n, 1).unwrap();
    let problem = BinaryProblem {
        node_id: 0,
        child_ordinal: 0,
        instances: (0..ell as u32).collect(),
        signs: signs.iter().map(|&s| s as i8).collect(),
        has_positive: signs.iter().any(|&s| s > 0.0),
    };
    let dense = DenseProblem {
        rows: dense_rows,
        signs,
        loss,
    };
    (ds, problem, dense)
}
