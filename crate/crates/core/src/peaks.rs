//! Prominence-based peak picking on sampled signals.

/// A local maximum of a sampled signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub prominence: f64,
}

/// Local maxima with plateau handling: a maximal run of equal samples
/// `x[l..=r]` with strictly lower neighbours on both sides yields one peak at
/// `(l + r) / 2`. The first and last samples are never peaks.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut r = i;
            while r + 1 < n && x[r + 1] == x[i] {
                r += 1;
            }
            if r + 1 < n && x[r + 1] < x[i] {
                out.push((i + r) / 2);
            }
            i = r + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Topographic prominence: descend on each side until a strictly higher
/// sample or the signal edge, take the lowest point on each side, and
/// measure the peak against the higher of the two.
pub fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peaks whose prominence is at least `min_prominence`, thinned so that no
/// two kept peaks are closer than `min_distance` in `positions` units.
/// Thinning keeps the higher peak (earlier index on ties). Returned in
/// index order.
pub fn find_peaks(x: &[f64], positions: &[f64], min_prominence: f64, min_distance: f64) -> Vec<Peak> {
    debug_assert_eq!(x.len(), positions.len());
    let candidates: Vec<Peak> = local_maxima(x)
        .into_iter()
        .map(|index| Peak { index, prominence: prominence(x, index) })
        .filter(|p| p.prominence >= min_prominence && p.prominence > 0.0)
        .collect();
    if min_distance <= 0.0 {
        return candidates;
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        x[candidates[b].index]
            .total_cmp(&x[candidates[a].index])
            .then(candidates[a].index.cmp(&candidates[b].index))
    });
    let mut keep = vec![true; candidates.len()];
    for &k in &order {
        if !keep[k] {
            continue;
        }
        let pk = positions[candidates[k].index];
        for (j, c) in candidates.iter().enumerate() {
            if j != k && keep[j] && (positions[c.index] - pk).abs() < min_distance {
                keep[j] = false;
            }
        }
    }
    candidates.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_peak_sits_in_the_middle() {
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 1.0, 0.0]), vec![2]);
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 2.0, 0.0]), vec![3]);
        assert!(local_maxima(&[1.0; 6]).is_empty());
        assert!(local_maxima(&[0.0, 1.0, 2.0]).is_empty());
    }

    #[test]
    fn prominence_uses_higher_base() {
        let x = [0.0, 3.0, 1.0, 2.0, 0.5, 4.0, 0.0];
        assert_eq!(prominence(&x, 1), 2.5);
        assert_eq!(prominence(&x, 3), 1.0);
        assert_eq!(prominence(&x, 5), 4.0);
    }

    #[test]
    fn distance_keeps_the_taller_peak() {
        let x = [0.0, 2.0, 0.0, 3.0, 0.0, 1.0, 0.0];
        let pos: Vec<f64> = (0..x.len()).map(|i| i as f64).collect();
        let peaks = find_peaks(&x, &pos, 0.0, 2.5);
        assert_eq!(peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![3]);
        let peaks = find_peaks(&x, &pos, 1.5, 0.0);
        assert_eq!(peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1, 3]);
    }
}
