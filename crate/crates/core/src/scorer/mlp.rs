//! Dense feedforward network with ReLU hidden layers and a softmax head,
//! trained against soft labels with Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Weights, `out × in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    /// He-uniform initialization.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        Dense {
            w: Array2::from_shape_fn((outputs, inputs), |_| dist.sample(rng)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: Array2::zeros((outputs, inputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Gradients with the same layout as [`Mlp::layers`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    /// Gradient with respect to the input batch.
    pub input: Array2<f64>,
}

/// Row-wise softmax.
pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Mean categorical cross-entropy of probabilities `p` against soft labels `y`.
pub fn cross_entropy(p: &Array2<f64>, y: ArrayView2<'_, f64>) -> f64 {
    let n = p.nrows().max(1) as f64;
    let mut total = 0.0;
    for (pr, yr) in p.rows().into_iter().zip(y.rows()) {
        for (&pv, &yv) in pr.iter().zip(yr.iter()) {
            if yv > 0.0 {
                total -= yv * pv.max(1e-300).ln();
            }
        }
    }
    total / n
}

impl Mlp {
    pub fn new<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        Mlp {
            layers: widths
                .windows(2)
                .map(|w| Dense::init(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Mlp {
            layers: widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().take(1).map(Dense::inputs).collect();
        w.extend(self.layers.iter().map(Dense::outputs));
        w
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Class probabilities for each row of `x` (no dropout).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(h.view());
            if k < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        softmax_rows(&mut h);
        h
    }

    /// Loss and gradients for one batch. Inverted dropout with rate
    /// `dropout` is applied to hidden activations when `rng` is given.
    pub fn loss_and_gradients<R: Rng>(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        dropout: f64,
        mut rng: Option<&mut R>,
    ) -> (f64, Gradients) {
        let last = self.layers.len() - 1;
        // inputs to each layer, and the ReLU masks (scaled by dropout)
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut masks: Vec<Array2<f64>> = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(h.view());
            inputs.push(h);
            if k < last {
                let keep = 1.0 - dropout;
                let mask = match rng.as_deref_mut() {
                    Some(rng) if dropout > 0.0 => z.mapv(|v| {
                        if v > 0.0 && rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    }),
                    _ => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
                };
                h = &z * &mask;
                masks.push(mask);
            } else {
                h = z;
            }
        }
        softmax_rows(&mut h);
        let loss = cross_entropy(&h, y);

        let n = x.nrows().max(1) as f64;
        let mut delta = (&h - &y) / n;
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            grads.push(Dense {
                w: delta.t().dot(&inputs[k]).as_standard_layout().into_owned(),
                b: delta.sum_axis(Axis(0)),
            });
            let back = delta.dot(&layer.w);
            delta = if k > 0 { back * &masks[k - 1] } else { back };
        }
        grads.reverse();
        (
            loss,
            Gradients {
                layers: grads,
                input: delta,
            },
        )
    }
}

/// Adam over a fixed list of parameter slices.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, sizes: &[usize]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update; `params[k]` and `grads[k]` must match the k-th size.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss_at(net: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        cross_entropy(&net.predict(x.view()), y.view())
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[1, 2, 2], &mut rng);
        assert_eq!(net.num_params(), 10);
        let x = array![[0.7], [-0.4], [1.3]];
        let y = array![[1.0, 0.0], [0.25, 0.75], [0.0, 1.0]];
        let (_, g) = net.loss_and_gradients::<ChaCha8Rng>(x.view(), y.view(), 0.0, None);
        let h = 1e-6;
        let mut checked = 0;
        for k in 0..net.layers.len() {
            let n_w = net.layers[k].w.len();
            for i in 0..n_w + net.layers[k].b.len() {
                let bump = |d: f64| {
                    let mut n = net.clone();
                    if i < n_w {
                        n.layers[k].w.as_slice_mut().unwrap()[i] += d;
                    } else {
                        n.layers[k].b[i - n_w] += d;
                    }
                    loss_at(&n, &x, &y)
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if i < n_w {
                    g.layers[k].w.as_slice().unwrap()[i]
                } else {
                    g.layers[k].b[i - n_w]
                };
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(rel < 1e-4, "layer {k} param {i}: {numeric} vs {analytic}");
                checked += 1;
            }
        }
        assert_eq!(checked, 10);
    }

    #[test]
    fn input_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[3, 4, 3], &mut rng);
        let x = array![[0.2, -0.1, 0.5]];
        let y = array![[0.0, 1.0, 0.0]];
        let (_, g) = net.loss_and_gradients::<ChaCha8Rng>(x.view(), y.view(), 0.0, None);
        for j in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[[0, j]] += 1e-6;
            xm[[0, j]] -= 1e-6;
            let numeric = (loss_at(&net, &xp, &y) - loss_at(&net, &xm, &y)) / 2e-6;
            assert!((numeric - g.input[[0, j]]).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let net = Mlp::zeros(&[4, 8, 5]);
        let p = net.predict(array![[1.0, 2.0, 3.0, 4.0]].view());
        for &v in p.iter() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut adam = Adam::new(0.1, &[2]);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            adam.step(vec![&mut x[..]], vec![&g[..]]);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn dropout_mask_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 16, 2], &mut rng);
        let x = array![[0.5, 0.5, 0.5], [0.1, 0.9, 0.3]];
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let run = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            net.loss_and_gradients(x.view(), y.view(), 0.3, Some(&mut r))
                .0
        };
        assert_eq!(run(7), run(7));
    }
}
