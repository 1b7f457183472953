//! Spatial statistics of corruption fields.

/// Normalized autocorrelation of a zero-meaned plane at lag `(dy, dx)`.
pub fn autocorrelation(plane: &[f32], h: usize, w: usize, dy: usize, dx: usize) -> f64 {
    let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / plane.len() as f64;
    let var = plane.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / plane.len() as f64;
    if var == 0.0 || dy >= h || dx >= w {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for y in 0..h - dy {
        for x in 0..w - dx {
            acc += (plane[y * w + x] as f64 - mean) * (plane[(y + dy) * w + x + dx] as f64 - mean);
            n += 1;
        }
    }
    acc / n as f64 / var
}

fn decay_lag(r: impl Fn(usize) -> f64, max_lag: usize) -> f64 {
    let threshold = (-1.0f64).exp();
    let mut prev = 1.0;
    for lag in 1..=max_lag {
        let cur = r(lag);
        if cur < threshold {
            return (lag - 1) as f64 + (prev - threshold) / (prev - cur);
        }
        prev = cur;
    }
    max_lag as f64
}

/// Lag at which the autocorrelation first falls below `1/e`, linearly
/// interpolated and averaged over the horizontal and vertical axes.
pub fn autocorrelation_length(plane: &[f32], h: usize, w: usize) -> f64 {
    let along_x = decay_lag(|l| autocorrelation(plane, h, w, 0, l), w / 2);
    let along_y = decay_lag(|l| autocorrelation(plane, h, w, l, 0), h / 2);
    0.5 * (along_x + along_y)
}
