/// Total variation distance `½ Σ |p(a) − q(a)|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Largest total variation distance between any two rows.
pub fn max_pairwise_tv(rows: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            best = best.max(total_variation(a, b));
        }
    }
    best
}
