//! Local-maximum detection with topographic prominence, shared by the comb
//! extractor, trace comparison, and the correlogram peak-train finder.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Peak {
    pub index: usize,
    pub value: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub prominence: f64,
}

/// Find local maxima whose prominence is at least `min_prominence`.
///
/// Prominence of a peak of height `h` is `h - max(left key, right key)`,
/// where each side's key is the lowest point reached before terrain climbs
/// above `h` again (or before the edge of the data). Plateau maxima report
/// their middle index. Endpoints are never peaks.
pub(crate) fn find_peaks(values: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = values.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if values[i] <= values[i - 1] {
            i += 1;
            continue;
        }
        // Ascended into i; ride out any plateau.
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if j + 1 < n && values[j + 1] < values[i] {
            let h = values[i];
            let peak_idx = (i + j) / 2;

            let mut left_key = f64::INFINITY;
            for k in (0..i).rev() {
                left_key = left_key.min(values[k]);
                if values[k] > h {
                    break;
                }
            }
            let mut right_key = f64::INFINITY;
            for k in j + 1..n {
                right_key = right_key.min(values[k]);
                if values[k] > h {
                    break;
                }
            }
            let prominence = h - left_key.max(right_key);
            if prominence >= min_prominence {
                out.push(Peak { index: peak_idx, value: h, prominence });
            }
        }
        i = j + 1;
    }
    out
}

/// Parabolic vertex through `(i-1, i, i+1)`: returns the fractional index
/// offset in [-0.5, 0.5] and the refined value. Falls back to (0, v[i]) when
/// the three points are collinear.
pub(crate) fn refine_parabolic(values: &[f64], index: usize) -> (f64, f64) {
    if index == 0 || index + 1 >= values.len() {
        return (0.0, values[index]);
    }
    let (a, b, c) = (values[index - 1], values[index], values[index + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return (0.0, b);
    }
    let delta = 0.5 * (a - c) / denom;
    let delta = delta.clamp(-0.5, 0.5);
    let refined = b - 0.25 * (a - c) * delta;
    (delta, refined)
}
