//! Brute-force reference implementations for testing.
//!
//! Nothing in this crate depends on `moquad-core`. Every quantity is computed
//! the slow, obvious way: each exponential term is materialized into a list,
//! summed, and the logarithm taken directly. No log-sum-exp shifting, no shared
//! helpers with the production losses.
//!
//! Embedding layouts are plain nested vectors: `videos[i][member][dim]`.
//! Member 0 is the anchor, member 1 the positive, members 2.. are
//! intra-video negatives.

/// Tolerances per comparison class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl OracleTolerance {
    /// Loss value equality against the term-by-term oracle.
    pub const LOSS: Self = Self { abs_tol: 1e-12, rel_tol: 1e-12 };
    /// Analytic loss gradients against central differences.
    pub const GRAD: Self = Self { abs_tol: 1e-6, rel_tol: 1e-6 };
    /// Gradients through normalization and the encoder.
    pub const END_TO_END: Self = Self { abs_tol: 1e-4, rel_tol: 1e-4 };

    pub fn accepts(&self, actual: f64, expected: f64) -> bool {
        let diff = (actual - expected).abs();
        diff <= self.abs_tol || diff <= self.rel_tol * expected.abs().max(actual.abs())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Number of hard negatives: the largest integer not above `beta * n`,
/// bumped to one when `beta > 0` and there is at least one candidate.
pub fn oracle_hard_negative_count(beta: f64, n: usize) -> usize {
    let target = beta * n as f64;
    let mut k = 0usize;
    while k < n && ((k + 1) as f64) <= target + 1e-9 {
        k += 1;
    }
    if beta > 0.0 && n >= 1 && k == 0 {
        k = 1;
    }
    k
}

/// Selects `k` indices by repeatedly scanning for the largest remaining value.
/// Equal values go to the lower index first.
pub fn top_k_exhaustive(values: &[f64], k: usize) -> Vec<usize> {
    let mut taken = vec![false; values.len()];
    let mut out = Vec::new();
    for _ in 0..k.min(values.len()) {
        let mut best: Option<usize> = None;
        for (idx, &v) in values.iter().enumerate() {
            if taken[idx] {
                continue;
            }
            match best {
                None => best = Some(idx),
                Some(b) if v > values[b] => best = Some(idx),
                _ => {}
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out
}

/// Quadruple loss with in-batch negatives, evaluated term by term.
///
/// With `mining = Some((alpha, beta))` the intra terms and the top-K
/// inter terms are weighted by `alpha`.
pub fn oracle_quadruple_loss(videos: &[Vec<Vec<f64>>], tau: f64, mining: Option<(f64, f64)>) -> f64 {
    let b = videos.len();
    let mut total = 0.0;
    for i in 0..b {
        let anchor = &videos[i][0];
        let positive = (dot(anchor, &videos[i][1]) / tau).exp();

        let mut intra_terms = Vec::new();
        for member in &videos[i][2..] {
            intra_terms.push((dot(anchor, member) / tau).exp());
        }

        let mut inter_terms = Vec::new();
        for (j, other) in videos.iter().enumerate() {
            if j == i {
                continue;
            }
            for member in other {
                inter_terms.push((dot(anchor, member) / tau).exp());
            }
        }

        let others = match mining {
            None => intra_terms.iter().sum::<f64>() + inter_terms.iter().sum::<f64>(),
            Some((alpha, beta)) => {
                let k = oracle_hard_negative_count(beta, inter_terms.len());
                let hard = top_k_exhaustive(&inter_terms, k);
                let mut hard_sum = 0.0;
                let mut easy_sum = 0.0;
                for (idx, t) in inter_terms.iter().enumerate() {
                    if hard.contains(&idx) {
                        hard_sum += t;
                    } else {
                        easy_sum += t;
                    }
                }
                alpha * intra_terms.iter().sum::<f64>() + alpha * hard_sum + easy_sum
            }
        };
        // -ln(pos / (pos + others))
        total += (others / positive).ln_1p();
    }
    total
}

/// Two-clip appearance loss: `pairs[i] = [z_n, z_m]`; anchors are the `z_n`.
pub fn oracle_appearance_loss(pairs: &[Vec<Vec<f64>>], tau: f64) -> f64 {
    let b = pairs.len();
    let mut total = 0.0;
    for i in 0..b {
        let zn = &pairs[i][0];
        let zm = &pairs[i][1];
        let positive = (dot(zn, zm) / tau).exp();
        let mut negatives = 0.0;
        for j in 0..b {
            if j == i {
                continue;
            }
            for s in 0..2 {
                negatives += (dot(zn, &pairs[j][s]) / tau).exp();
            }
        }
        total += (negatives / positive).ln_1p();
    }
    total
}

/// Central finite differences, one coordinate at a time.
pub fn oracle_fd_grad<F>(f: F, point: &[f64], eps: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for k in 0..point.len() {
        let orig = x[k];
        x[k] = orig + eps;
        let plus = f(&x);
        x[k] = orig - eps;
        let minus = f(&x);
        x[k] = orig;
        grad.push((plus - minus) / (2.0 * eps));
    }
    grad
}

/// Largest coordinate-wise relative error. Coordinates whose magnitude is
/// below `floor` are compared against `floor` instead.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs()).max(floor);
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}

/// 1-based rank of every candidate, counting how many candidates beat it.
/// A candidate is beaten by strictly larger similarity, or by equal
/// similarity at a lower index.
pub fn rank_by_enumeration(similarities: &[f64]) -> Vec<usize> {
    let mut ranks = Vec::with_capacity(similarities.len());
    for (c, &s) in similarities.iter().enumerate() {
        let mut beaten_by = 0;
        for (other, &t) in similarities.iter().enumerate() {
            if t > s || (t == s && other < c) {
                beaten_by += 1;
            }
        }
        ranks.push(beaten_by + 1);
    }
    ranks
}
