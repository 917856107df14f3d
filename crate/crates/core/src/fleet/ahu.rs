//! Rounding of continuous setpoints for on/off air handlers.

/// On/off states for a group of `m` identical units whose aggregate output
/// relative to baseline is `(2 k - m) * unit_half` with `k` units on.
///
/// `k` minimizes the distance to the summed continuous targets, ties going
/// to fewer units on. Units already on stay on first, then the ones with the
/// largest target; switching is therefore minimal given `k`.
pub fn ahu_discretize(targets: &[f64], unit_half: f64, previous: &[bool]) -> Vec<bool> {
    let m = targets.len();
    assert_eq!(previous.len(), m, "one previous state per unit");
    let total: f64 = targets.iter().sum();
    let mut best_k = 0;
    let mut best_err = f64::INFINITY;
    for k in 0..=m {
        let err = (total - (2.0 * k as f64 - m as f64) * unit_half).abs();
        if err < best_err {
            best_err = err;
            best_k = k;
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        previous[b]
            .cmp(&previous[a])
            .then(targets[b].total_cmp(&targets[a]))
            .then(a.cmp(&b))
    });
    let mut on = vec![false; m];
    for &i in order.iter().take(best_k) {
        on[i] = true;
    }
    on
}

/// Output relative to baseline of one unit.
pub fn unit_output(on: bool, unit_half: f64) -> f64 {
    if on {
        unit_half
    } else {
        -unit_half
    }
}
