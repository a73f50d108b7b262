//! Loss and backpropagation through time for the autoregressive rollout.

use crate::error::{Error, Result};

use super::model::{LstmModel, OutputMode, StepCache};

/// Mean over points of the squared Euclidean error.
pub fn loss_mse(predicted: &[[f64; 2]], actual: &[[f64; 2]]) -> Result<f64> {
    check_lengths(predicted, actual)?;
    Ok(predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2))
        .sum::<f64>()
        / predicted.len() as f64)
}

pub(crate) fn check_lengths<T>(predicted: &[T], actual: &[T]) -> Result<()> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "sequence lengths differ ({} vs {})",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("sequences must be non-empty"));
    }
    Ok(())
}

/// Backward pass through one cell step. Adds parameter gradients to `grad`
/// and returns the gradients for the previous hidden state, previous cell
/// state and the input.
fn step_backward(
    model: &LstmModel,
    s: &StepCache,
    dh: &[f64],
    dc: &[f64],
    grad: &mut [f64],
) -> (Vec<f64>, Vec<f64>, [f64; 2]) {
    let h = model.hidden();
    let l = model.layout();
    let mut dz = vec![0.0; 4 * h];
    let mut dc_prev = vec![0.0; h];
    for j in 0..h {
        let (f, i, o, g) = (s.gates[j], s.gates[h + j], s.gates[2 * h + j], s.gates[3 * h + j]);
        let tc = s.tanh_c[j];
        let d_o = dh[j] * tc;
        let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
        let df = dct * s.c_prev[j];
        let di = dct * g;
        let dg = dct * i;
        dc_prev[j] = dct * f;
        dz[j] = df * f * (1.0 - f);
        dz[h + j] = di * i * (1.0 - i);
        dz[2 * h + j] = d_o * o * (1.0 - o);
        dz[3 * h + j] = dg * (1.0 - g * g);
    }
    let w = &model.params[l.gate_w..l.gate_b];
    let mut dh_prev = vec![0.0; h];
    let mut dx = [0.0; 2];
    for (r, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = r * (h + 2);
        let gw = &mut grad[l.gate_w + row..l.gate_w + row + h + 2];
        for k in 0..h {
            gw[k] += d * s.h_prev[k];
            dh_prev[k] += d * w[row + k];
        }
        gw[h] += d * s.x[0];
        gw[h + 1] += d * s.x[1];
        dx[0] += d * w[row + h];
        dx[1] += d * w[row + h + 1];
        grad[l.gate_b + r] += d;
    }
    (dh_prev, dc_prev, dx)
}

/// Output layer backward: adds `W_fc`/`b_fc` gradients, returns `dL/dh`.
fn output_backward(model: &LstmModel, hvec: &[f64], dy: [f64; 2], grad: &mut [f64]) -> Vec<f64> {
    let h = model.hidden();
    let l = model.layout();
    let mut dh = vec![0.0; h];
    for a in 0..2 {
        let wrow = l.fc_w + a * h;
        for k in 0..h {
            grad[wrow + k] += dy[a] * hvec[k];
            dh[k] += dy[a] * model.params[wrow + k];
        }
        grad[l.fc_b + a] += dy[a];
    }
    dh
}

/// Weighted sum of window losses over one track, with gradients.
///
/// Window `t` observes `inputs[..t]` and is scored against
/// `inputs[t..t + t_pred]`. The teacher-forced prefix is run once and shared
/// by every window; each window's rollout branches off the prefix state.
/// Gradients are added to `grad` when given.
pub(crate) fn track_loss_grad(
    model: &LstmModel,
    inputs: &[[f64; 2]],
    prefixes: &[usize],
    t_pred: usize,
    weight: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    if t_pred == 0 {
        return Err(Error::invalid("prediction horizon must be at least 1"));
    }
    let Some(&t_last) = prefixes.iter().max() else {
        return Ok(0.0);
    };
    if prefixes.iter().any(|&t| t == 0 || t + t_pred > inputs.len()) {
        return Err(Error::invalid(format!(
            "window does not fit a sequence of {} points with horizon {t_pred}",
            inputs.len()
        )));
    }
    let hd = model.hidden();
    let mut prefix: Vec<StepCache> = Vec::with_capacity(t_last);
    {
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        for &x in &inputs[..t_last] {
            let s = model.step(&h, &c, x);
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            prefix.push(s);
        }
    }
    let mut d_hp = vec![vec![0.0; hd]; t_last];
    let mut d_cp = vec![vec![0.0; hd]; t_last];
    let mut total = 0.0;
    let scale = weight * 2.0 / t_pred as f64;
    let residual = model.output_mode == OutputMode::Residual;
    let st = if residual { model.step_scale } else { [1.0, 1.0] };

    for &t in prefixes {
        let start = &prefix[t - 1];
        let mut hs: Vec<Vec<f64>> = vec![start.h.clone()];
        let mut steps: Vec<StepCache> = Vec::with_capacity(t_pred.saturating_sub(1));
        let mut ys = Vec::with_capacity(t_pred);
        let mut c = start.c.clone();
        let mut prev = inputs[t - 1];
        for k in 0..t_pred {
            let mut y = model.output(&hs[k]);
            if residual {
                y = [prev[0] + st[0] * y[0], prev[1] + st[1] * y[1]];
            }
            prev = y;
            ys.push(y);
            if k + 1 < t_pred {
                let s = model.step(&hs[k], &c, y);
                hs.push(s.h.clone());
                c.clone_from(&s.c);
                steps.push(s);
            }
        }
        let targets = &inputs[t..t + t_pred];
        let loss = loss_mse(&ys, targets)?;
        if !loss.is_finite() {
            return Err(Error::numerical("non-finite loss in LSTM rollout"));
        }
        total += weight * loss;

        let Some(g) = grad.as_deref_mut() else { continue };
        let mut dy: Vec<[f64; 2]> = ys
            .iter()
            .zip(targets)
            .map(|(y, a)| [scale * (y[0] - a[0]), scale * (y[1] - a[1])])
            .collect();
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for k in (0..t_pred).rev() {
            let mut dh = output_backward(model, &hs[k], [st[0] * dy[k][0], st[1] * dy[k][1]], g);
            dh.iter_mut().zip(&dh_next).for_each(|(a, b)| *a += b);
            if residual && k >= 1 {
                let d = dy[k];
                dy[k - 1][0] += d[0];
                dy[k - 1][1] += d[1];
            }
            if k >= 1 {
                let (dhp, dcp, dx) = step_backward(model, &steps[k - 1], &dh, &dc_next, g);
                dy[k - 1][0] += dx[0];
                dy[k - 1][1] += dx[1];
                dh_next = dhp;
                dc_next = dcp;
            } else {
                d_hp[t - 1].iter_mut().zip(&dh).for_each(|(a, b)| *a += b);
                d_cp[t - 1].iter_mut().zip(&dc_next).for_each(|(a, b)| *a += b);
            }
        }
    }

    if let Some(g) = grad {
        let mut dh = vec![0.0; hd];
        let mut dc = vec![0.0; hd];
        for s in (0..t_last).rev() {
            dh.iter_mut().zip(&d_hp[s]).for_each(|(a, b)| *a += b);
            dc.iter_mut().zip(&d_cp[s]).for_each(|(a, b)| *a += b);
            let (dhp, dcp, _) = step_backward(model, &prefix[s], &dh, &dc, g);
            dh = dhp;
            dc = dcp;
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite gradient in LSTM backward pass"));
        }
    }
    Ok(total)
}

/// Loss of one observed prefix / target window and its exact gradient with
/// respect to every model parameter (same flat layout as the model).
pub fn gradients_bptt(model: &LstmModel, prefix: &[[f64; 2]], target: &[[f64; 2]]) -> Result<(f64, Vec<f64>)> {
    if prefix.is_empty() || target.is_empty() {
        return Err(Error::invalid("prefix and target windows must be non-empty"));
    }
    let mut seq = prefix.to_vec();
    seq.extend_from_slice(target);
    let mut grad = vec![0.0; model.n_params()];
    let loss = track_loss_grad(model, &seq, &[prefix.len()], target.len(), 1.0, Some(&mut grad))?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::model::sequence_forward;
    use crate::rng;
    use rand::Rng;

    fn random_model(h: usize, seed: u64) -> LstmModel {
        let mut m = LstmModel::init(h, seed).unwrap();
        let mut r = rng::stream(seed, "perturb", 0);
        for p in m.params_mut() {
            *p += r.random_range(-0.5..0.5);
        }
        m
    }

    fn random_seq(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut r = rng::stream(seed, "seq", 0);
        (0..n).map(|_| [r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)]).collect()
    }

    fn fd_check(m: &LstmModel, seq: &[[f64; 2]], prefixes: &[usize], t_pred: usize) {
        let mut g = vec![0.0; m.n_params()];
        track_loss_grad(m, seq, prefixes, t_pred, 0.7, Some(&mut g)).unwrap();
        let step = 1e-5;
        for i in 0..m.n_params() {
            let mut p = m.clone();
            p.params_mut()[i] += step;
            let up = track_loss_grad(&p, seq, prefixes, t_pred, 0.7, None).unwrap();
            p.params_mut()[i] -= 2.0 * step;
            let down = track_loss_grad(&p, seq, prefixes, t_pred, 0.7, None).unwrap();
            let fd = (up - down) / (2.0 * step);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-5, "param {i}: analytic {} vs numeric {fd}", g[i]);
        }
    }

    #[test]
    fn shared_prefix_windows_match_finite_differences() {
        let m = random_model(3, 4);
        let seq = random_seq(9, 5);
        fd_check(&m, &seq, &[2, 4, 6], 3);
    }

    #[test]
    fn single_window_matches_finite_differences() {
        for (h, seed) in [(2, 1u64), (4, 2)] {
            let m = random_model(h, seed);
            let seq = random_seq(6, seed + 10);
            fd_check(&m, &seq, &[3], 3);
        }
    }

    #[test]
    fn residual_rollout_matches_finite_differences() {
        let mut m = random_model(3, 12);
        m.output_mode = OutputMode::Residual;
        m.step_scale = [0.3, 0.7];
        let seq = random_seq(10, 13);
        fd_check(&m, &seq, &[1, 3, 5], 4);
    }

    #[test]
    fn mse_and_hand_values() {
        let a = [[0.0, 0.0], [1.0, 2.0]];
        assert_eq!(loss_mse(&a, &a).unwrap(), 0.0);
        let b = [[0.3, 0.4], [1.3, 2.4]];
        assert!((loss_mse(&b, &a).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(loss_mse(&[[0.0, 0.0]], &[[1.0, 1.0]]).unwrap(), 2.0);
        assert!(loss_mse(&a, &a[..1]).is_err());
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let m = random_model(4, 7);
        let prefix = random_seq(4, 8);
        let target = sequence_forward(&m, &prefix, 3).unwrap();
        let (loss, g) = gradients_bptt(&m, &prefix, &target).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn output_bias_gradient_is_twice_residual() {
        let m = random_model(4, 9);
        let prefix = random_seq(3, 10);
        let y = sequence_forward(&m, &prefix, 1).unwrap()[0];
        let target = [[y[0] - 0.25, y[1] + 0.5]];
        let (_, g) = gradients_bptt(&m, &prefix, &target).unwrap();
        let l = m.layout();
        assert!((g[l.fc_b] - 0.5).abs() < 1e-12);
        assert!((g[l.fc_b + 1] + 1.0).abs() < 1e-12);
    }
}
