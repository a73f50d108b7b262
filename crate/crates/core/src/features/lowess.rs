//! LOWESS smoothing of track coordinates against the frame index.

use serde::{Deserialize, Serialize};

use super::track::{EgoFramePoint, PedestrianTrack};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowessParams {
    /// Fraction of the track used for each local fit.
    pub span: f64,
    /// Number of bisquare robustness re-weighting passes.
    pub robust_iters: usize,
}

impl Default for LowessParams {
    fn default() -> Self {
        Self {
            span: 0.3,
            robust_iters: 1,
        }
    }
}

fn tricube(u: f64) -> f64 {
    let u = u.abs();
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn bisquare(u: f64) -> f64 {
    let u = u.abs();
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u;
        t * t
    }
}

/// Contiguous window `[lo, lo + r)` of the `r` indices nearest to `i`.
pub(crate) fn neighbor_window(n: usize, i: usize, r: usize) -> (usize, usize) {
    let mut lo = i.saturating_sub(r - 1).min(n - r);
    // slide right while the right candidate is strictly closer than the left end
    while lo + r < n && (lo + r - i) < (i - lo) {
        lo += 1;
    }
    (lo, lo + r)
}

/// Weighted local-linear fit evaluated at `x0`. Falls back to the weighted
/// mean when the weighted abscissae are degenerate.
fn local_linear(xs: &[f64], ys: &[f64], ws: &[f64], x0: f64) -> f64 {
    let sw: f64 = ws.iter().sum();
    if sw <= 0.0 {
        return ys[xs.iter().position(|&x| x == x0).unwrap_or(0)];
    }
    let xm = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ym = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (x - xm) * (y - ym))
        .sum();
    let range = xs.last().unwrap() - xs.first().unwrap();
    if sxx <= 1e-12 * sw * range.max(1.0).powi(2) {
        return ym;
    }
    ym + sxy / sxx * (x0 - xm)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Smooths one series sampled at indices `0..n`.
pub fn lowess_series(ys: &[f64], params: &LowessParams) -> Result<Vec<f64>> {
    let n = ys.len();
    if n < 3 {
        return Err(Error::invalid(format!("LOWESS needs at least 3 samples, got {n}")));
    }
    if !(params.span > 0.0 && params.span <= 1.0) {
        return Err(Error::invalid(format!("LOWESS span must be in (0, 1], got {}", params.span)));
    }
    let r = (params.span * n as f64).ceil() as usize;
    if r < 2 {
        return Err(Error::invalid(format!(
            "LOWESS span {} covers fewer than 2 of {n} samples",
            params.span
        )));
    }
    let r = r.min(n);
    let xs: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let mut robust = vec![1.0; n];
    let mut fitted = vec![0.0; n];
    let scale = 1.0 + ys.iter().map(|y| y.abs()).sum::<f64>() / n as f64;

    for pass in 0..=params.robust_iters {
        for i in 0..n {
            let (lo, hi) = neighbor_window(n, i, r);
            let h = (i - lo).max(hi - 1 - i) as f64;
            let ws: Vec<f64> = (lo..hi)
                .map(|k| {
                    let d = (k as f64 - i as f64).abs();
                    let w = if h > 0.0 { tricube(d / h) } else { 1.0 };
                    w * robust[k]
                })
                .collect();
            fitted[i] = local_linear(&xs[lo..hi], &ys[lo..hi], &ws, xs[i]);
        }
        if pass == params.robust_iters {
            break;
        }
        let mut abs_res: Vec<f64> = ys.iter().zip(&fitted).map(|(y, f)| (y - f).abs()).collect();
        let s = median(&mut abs_res);
        if s <= 1e-10 * scale {
            // residuals are at rounding level; re-weighting would only amplify noise
            break;
        }
        for k in 0..n {
            robust[k] = bisquare((ys[k] - fitted[k]) / (6.0 * s));
        }
    }
    Ok(fitted)
}

/// Applies LOWESS independently to the x and y coordinates of a track.
pub fn lowess_smooth(track: &PedestrianTrack, params: &LowessParams) -> Result<PedestrianTrack> {
    if track.len() < 3 {
        return Err(Error::invalid(format!(
            "track {} has {} frames; smoothing needs at least 3",
            track.id,
            track.len()
        )));
    }
    let xs: Vec<f64> = track.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = track.points.iter().map(|p| p.y).collect();
    let sx = lowess_series(&xs, params)?;
    let sy = lowess_series(&ys, params)?;
    Ok(PedestrianTrack {
        id: track.id.clone(),
        frame_rate: track.frame_rate,
        points: sx
            .into_iter()
            .zip(sy)
            .map(|(x, y)| EgoFramePoint::new(x, y))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(points: Vec<(f64, f64)>) -> PedestrianTrack {
        PedestrianTrack::new(
            "t",
            6.5,
            points.into_iter().map(|(x, y)| EgoFramePoint::new(x, y)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_track_unchanged() {
        let t = track(vec![(5.0, 5.0); 10]);
        let s = lowess_smooth(&t, &LowessParams::default()).unwrap();
        for p in &s.points {
            assert!((p.x - 5.0).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_ramp_reproduced() {
        let t = track((0..20).map(|k| (k as f64 * 0.1, 3.0 - 0.25 * k as f64)).collect());
        let s = lowess_smooth(&t, &LowessParams::default()).unwrap();
        for (a, b) in s.points.iter().zip(&t.points) {
            assert!((a.x - b.x).abs() < 1e-9);
            assert!((a.y - b.y).abs() < 1e-9);
        }
    }

    /// Plain weighted least squares on the same window, solved through the
    /// 2x2 normal equations.
    fn wls_oracle(ys: &[f64], i: usize, r: usize) -> f64 {
        let n = ys.len();
        let (lo, hi) = neighbor_window(n, i, r);
        let h = (i - lo).max(hi - 1 - i) as f64;
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in lo..hi {
            let d = (k as f64 - i as f64) / h;
            let w = (1.0 - d.abs().powi(3)).max(0.0).powi(3);
            let x = k as f64;
            s0 += w;
            s1 += w * x;
            s2 += w * x * x;
            t0 += w * ys[k];
            t1 += w * x * ys[k];
        }
        let det = s0 * s2 - s1 * s1;
        let b = (s0 * t1 - s1 * t0) / det;
        let a = (t0 - b * s1) / s0;
        a + b * i as f64
    }

    #[test]
    fn outlier_damped_and_matches_oracle() {
        let n = 21;
        let mid = n / 2;
        let mut ys: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        ys[mid] += 0.5;
        let plain = LowessParams {
            span: 0.3,
            robust_iters: 0,
        };
        let fit = lowess_series(&ys, &plain).unwrap();
        let r = (0.3 * n as f64).ceil() as usize;
        for i in 0..n {
            assert!((fit[i] - wls_oracle(&ys, i, r)).abs() < 1e-9, "index {i}");
        }
        let robust = lowess_series(&ys, &LowessParams::default()).unwrap();
        let truth = mid as f64 * 0.1;
        assert!((fit[mid] - truth).abs() < 0.5);
        assert!((robust[mid] - truth).abs() < 0.5);
        // the robustness pass should pull the midpoint closer to the line
        assert!((robust[mid] - truth).abs() <= (fit[mid] - truth).abs());
    }

    #[test]
    fn rejects_short_track_and_bad_span() {
        assert!(lowess_smooth(&track(vec![(0.0, 0.0); 2]), &LowessParams::default()).is_err());
        let t = track(vec![(0.0, 0.0); 10]);
        for span in [0.0, 1.5, 0.1] {
            let p = LowessParams {
                span,
                robust_iters: 1,
            };
            assert!(lowess_smooth(&t, &p).is_err(), "span {span}");
        }
    }

    #[test]
    fn window_is_contiguous_and_nearest() {
        assert_eq!(neighbor_window(10, 0, 3), (0, 3));
        assert_eq!(neighbor_window(10, 9, 3), (7, 10));
        assert_eq!(neighbor_window(10, 5, 3), (4, 7));
        assert_eq!(neighbor_window(10, 5, 4), (3, 7));
    }
}
