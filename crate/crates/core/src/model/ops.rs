//! Dense kernels on row-major `f64` slices, each with its backward pass.
//! Backward functions accumulate into the gradient buffers they receive.

pub(crate) const LN_EPS: f64 = 1e-5;

/// `y[n×m] = x[n×k] · w[k×m] + b[m]`.
pub(crate) fn linear(x: &[f64], w: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(n * m);
    for i in 0..n {
        y.extend_from_slice(b);
        let yr = &mut y[i * m..(i + 1) * m];
        let xr = &x[i * k..(i + 1) * k];
        for (p, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[p * m..(p + 1) * m];
            for (yo, &wv) in yr.iter_mut().zip(wr) {
                *yo += xv * wv;
            }
        }
    }
    y
}

/// Given `dy = dL/dy` for [`linear`]: `dx += dy · wᵀ`, `dw += xᵀ · dy`,
/// `db += Σ_rows dy`. `dx` may be empty to skip the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    n: usize,
    k: usize,
    m: usize,
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    for i in 0..n {
        let dyr = &dy[i * m..(i + 1) * m];
        let xr = &x[i * k..(i + 1) * k];
        for (dbo, &g) in db.iter_mut().zip(dyr) {
            *dbo += g;
        }
        for p in 0..k {
            let wr = &w[p * m..(p + 1) * m];
            let dwr = &mut dw[p * m..(p + 1) * m];
            let xv = xr[p];
            let mut acc = 0.0;
            for j in 0..m {
                acc += dyr[j] * wr[j];
                dwr[j] += xv * dyr[j];
            }
            if !dx.is_empty() {
                dx[i * k + p] += acc;
            }
        }
    }
}

pub(crate) struct LnCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

/// Row-wise layer norm with gain `g` and bias `b`.
pub(crate) fn layer_norm(
    x: &[f64],
    g: &[f64],
    b: &[f64],
    n: usize,
    d: usize,
) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut rstd = vec![0.0; n];
    for i in 0..n {
        let xr = &x[i * d..(i + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = rs;
        for j in 0..d {
            let h = (xr[j] - mean) * rs;
            xhat[i * d + j] = h;
            y[i * d + j] = h * g[j] + b[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    cache: &LnCache,
    g: &[f64],
    dy: &[f64],
    n: usize,
    d: usize,
    dx: &mut [f64],
    dg: &mut [f64],
    db: &mut [f64],
) {
    let mut dxhat = vec![0.0; d];
    for i in 0..n {
        let xh = &cache.xhat[i * d..(i + 1) * d];
        let dyr = &dy[i * d..(i + 1) * d];
        let mut sum = 0.0;
        let mut sum_xh = 0.0;
        for j in 0..d {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
            dxhat[j] = dyr[j] * g[j];
            sum += dxhat[j];
            sum_xh += dxhat[j] * xh[j];
        }
        let rs = cache.rstd[i];
        let inv_d = 1.0 / d as f64;
        for j in 0..d {
            dx[i * d + j] += rs * (dxhat[j] - inv_d * sum - xh[j] * inv_d * sum_xh);
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh-approximated GELU.
pub(crate) fn gelu(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Numerically stable log-softmax.
pub(crate) fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Cross-entropy of `target` under `softmax(logits)`, in nats.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    -log_softmax(logits)[target]
}

/// Multi-head attention over `t` rows given projected `q`, `k`, `v`
/// (`t × d`). With `causal`, row `i` attends to rows `0..=i`; otherwise to
/// all rows. Returns the concatenated head outputs and per-head
/// probabilities (`heads × t × t`, zero where masked).
pub(crate) fn attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    t: usize,
    d: usize,
    heads: usize,
    causal: bool,
) -> (Vec<f64>, Vec<f64>) {
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut out = vec![0.0; t * d];
    let mut probs = vec![0.0; heads * t * t];
    let mut row = vec![0.0; t];
    for h in 0..heads {
        let off = h * hd;
        for i in 0..t {
            let span = if causal { i + 1 } else { t };
            let qi = &q[i * d + off..i * d + off + hd];
            for j in 0..span {
                let kj = &k[j * d + off..j * d + off + hd];
                row[j] = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            softmax_in_place(&mut row[..span]);
            let pr = &mut probs[(h * t + i) * t..(h * t + i) * t + t];
            pr[..span].copy_from_slice(&row[..span]);
            let oi = &mut out[i * d + off..i * d + off + hd];
            for j in 0..span {
                let p = row[j];
                let vj = &v[j * d + off..j * d + off + hd];
                for (o, &vv) in oi.iter_mut().zip(vj) {
                    *o += p * vv;
                }
            }
        }
    }
    (out, probs)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_backward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    probs: &[f64],
    dout: &[f64],
    t: usize,
    d: usize,
    heads: usize,
    causal: bool,
    dq: &mut [f64],
    dk: &mut [f64],
    dv: &mut [f64],
) {
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut dp = vec![0.0; t];
    for h in 0..heads {
        let off = h * hd;
        for i in 0..t {
            let span = if causal { i + 1 } else { t };
            let pr = &probs[(h * t + i) * t..(h * t + i) * t + span];
            let doi = &dout[i * d + off..i * d + off + hd];
            let mut dot = 0.0;
            for j in 0..span {
                let vj = &v[j * d + off..j * d + off + hd];
                dp[j] = doi.iter().zip(vj).map(|(a, b)| a * b).sum();
                dot += pr[j] * dp[j];
                let dvj = &mut dv[j * d + off..j * d + off + hd];
                for (dvv, &g) in dvj.iter_mut().zip(doi) {
                    *dvv += pr[j] * g;
                }
            }
            for j in 0..span {
                let ds = pr[j] * (dp[j] - dot) * scale;
                if ds == 0.0 {
                    continue;
                }
                for c in 0..hd {
                    dq[i * d + off + c] += ds * k[j * d + off + c];
                    dk[j * d + off + c] += ds * q[i * d + off + c];
                }
            }
        }
    }
}
