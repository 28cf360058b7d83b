use crate::error::{Error, Result};
use crate::numerics::{init_uniform_xavier, sigmoid, Matrix, RngState, Scalar};

use super::dropout::{apply_mask, dropout_mask};
use super::Mode;

/// One LSTM layer. Gate rows are laid out `[input, forget, cell, output]`,
/// each block `hidden` rows tall.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer<T> {
    pub w_ih: Matrix<T>,
    pub w_hh: Matrix<T>,
    pub bias: Matrix<T>,
}

/// Activations of one layer over a sequence, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache<T> {
    input: Matrix<T>,
    hidden: Matrix<T>,
    cell: Matrix<f64>,
    gates: Matrix<f64>,
    tanh_cell: Matrix<f64>,
}

impl<T: Scalar> LayerCache<T> {
    pub fn hidden(&self) -> &Matrix<T> {
        &self.hidden
    }
}

impl<T: Scalar> LstmLayer<T> {
    /// Xavier-uniform weights, zero biases.
    pub fn new(input: usize, hidden: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            w_ih: init_uniform_xavier(4 * hidden, input, rng)?,
            w_hh: init_uniform_xavier(4 * hidden, hidden, rng)?,
            bias: Matrix::zeros(4 * hidden, 1),
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Matrix::zeros(4 * hidden, input),
            w_hh: Matrix::zeros(4 * hidden, hidden),
            bias: Matrix::zeros(4 * hidden, 1),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.cols()
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size(), self.hidden_size())
    }

    /// Runs the recurrence from zero initial states over the rows of `xs`.
    pub fn forward(&self, xs: &Matrix<T>) -> Result<(Matrix<T>, LayerCache<T>)> {
        let h = self.hidden_size();
        if xs.cols() != self.input_size() {
            return Err(Error::invalid(format!(
                "lstm layer expects input width {}, got {}",
                self.input_size(),
                xs.cols()
            )));
        }
        let n = xs.rows();
        let mut hidden = Matrix::zeros(n, h);
        let mut cell = Matrix::<f64>::zeros(n, h);
        let mut gates = Matrix::<f64>::zeros(n, 4 * h);
        let mut tanh_cell = Matrix::<f64>::zeros(n, h);
        let zero_h = vec![T::zero(); h];
        let zero_c = vec![0.0; h];
        let mut z = vec![0.0f64; 4 * h];
        for t in 0..n {
            z.iter_mut()
                .zip(self.bias.data())
                .for_each(|(zi, b)| *zi = b.as_f64());
            self.w_ih.matvec_into(xs.row(t), &mut z);
            let h_prev: Vec<T> = if t == 0 {
                zero_h.clone()
            } else {
                hidden.row(t - 1).to_vec()
            };
            self.w_hh.matvec_into(&h_prev, &mut z);
            let c_prev: Vec<f64> = if t == 0 {
                zero_c.clone()
            } else {
                cell.row(t - 1).to_vec()
            };
            let g_row = gates.row_mut(t);
            for k in 0..h {
                g_row[k] = sigmoid(z[k]);
                g_row[h + k] = sigmoid(z[h + k]);
                g_row[2 * h + k] = z[2 * h + k].tanh();
                g_row[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            for k in 0..h {
                let (i, f, g, o) = (g_row[k], g_row[h + k], g_row[2 * h + k], g_row[3 * h + k]);
                let c = f * c_prev[k] + i * g;
                let tc = c.tanh();
                cell.row_mut(t)[k] = c;
                tanh_cell.row_mut(t)[k] = tc;
                hidden.row_mut(t)[k] = T::cast(o * tc);
            }
        }
        let cache = LayerCache {
            input: xs.clone(),
            hidden: hidden.clone(),
            cell,
            gates,
            tanh_cell,
        };
        Ok((hidden, cache))
    }

    /// Backpropagation through time. `d_hidden` is `dL/dh_t` for every step
    /// from outside the layer; returns `dL/dx_t`.
    pub fn backward(
        &self,
        cache: &LayerCache<T>,
        d_hidden: &Matrix<f64>,
        grads: &mut LstmLayer<T>,
    ) -> Result<Matrix<f64>> {
        let h = self.hidden_size();
        let n = cache.input.rows();
        if cache.hidden.cols() != h
            || cache.input.cols() != self.input_size()
            || d_hidden.shape() != (n, h)
        {
            return Err(Error::InvalidState(
                "lstm cache does not match this layer".into(),
            ));
        }
        let mut dx = Matrix::<f64>::zeros(n, self.input_size());
        let mut dh_next = vec![0.0f64; h];
        let mut dc_next = vec![0.0f64; h];
        let mut dz = vec![0.0f64; 4 * h];
        let zero_h = vec![T::zero(); h];
        let one = [T::one()];
        for t in (0..n).rev() {
            let g_row = cache.gates.row(t);
            let tc = cache.tanh_cell.row(t);
            for k in 0..h {
                let (i, f, g, o) = (g_row[k], g_row[h + k], g_row[2 * h + k], g_row[3 * h + k]);
                let c_prev = if t == 0 {
                    0.0
                } else {
                    cache.cell.get(t - 1, k)
                };
                let dh = d_hidden.get(t, k) + dh_next[k];
                let dc = dc_next[k] + dh * o * (1.0 - tc[k] * tc[k]);
                dz[k] = dc * g * i * (1.0 - i);
                dz[h + k] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - g * g);
                dz[3 * h + k] = dh * tc[k] * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            let h_prev = if t == 0 {
                &zero_h[..]
            } else {
                cache.hidden.row(t - 1)
            };
            grads.w_ih.add_outer(&dz, cache.input.row(t));
            grads.w_hh.add_outer(&dz, h_prev);
            grads.bias.add_outer(&dz, &one);
            self.w_ih.matvec_t_into(&dz, dx.row_mut(t));
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            self.w_hh.matvec_t_into(&dz, &mut dh_next);
        }
        Ok(dx)
    }
}

/// Stack of LSTM layers with optional inverted dropout between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStack<T> {
    pub layers: Vec<LstmLayer<T>>,
}

#[derive(Clone, Debug)]
pub struct StackCache<T> {
    layers: Vec<LayerCache<T>>,
    /// Mask applied to the output of layer `l` before it enters layer `l+1`.
    masks: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> StackCache<T> {
    pub fn layer(&self, l: usize) -> &LayerCache<T> {
        &self.layers[l]
    }
}

impl<T: Scalar> LstmStack<T> {
    pub fn new(input: usize, hidden: usize, depth: usize, rng: &mut RngState) -> Result<Self> {
        if depth == 0 || hidden == 0 || input == 0 {
            return Err(Error::invalid(
                "lstm stack needs positive depth, input and hidden sizes",
            ));
        }
        let layers = (0..depth)
            .map(|l| LstmLayer::new(if l == 0 { input } else { hidden }, hidden, rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(LstmLayer::zeros_like).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size()
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::with_capacity(3 * self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.{l}.w_ih"), &layer.w_ih));
            out.push((format!("{prefix}.{l}.w_hh"), &layer.w_hh));
            out.push((format!("{prefix}.{l}.bias"), &layer.bias));
        }
        out
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = Vec::with_capacity(3 * self.layers.len());
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("{prefix}.{l}.w_ih"), &mut layer.w_ih));
            out.push((format!("{prefix}.{l}.w_hh"), &mut layer.w_hh));
            out.push((format!("{prefix}.{l}.bias"), &mut layer.bias));
        }
        out
    }

    /// Returns the top layer's hidden states for every step.
    pub fn forward(
        &self,
        xs: &Matrix<T>,
        inter_layer_dropout: f64,
        mode: Mode,
        rng: &mut RngState,
    ) -> Result<(Matrix<T>, StackCache<T>)> {
        if xs.rows() == 0 {
            return Err(Error::invalid("lstm input sequence is empty"));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut current = xs.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let (out, cache) = layer.forward(&current)?;
            caches.push(cache);
            let last = l + 1 == self.layers.len();
            if !last && mode == Mode::Train && inter_layer_dropout > 0.0 {
                let mask = dropout_mask(out.rows(), out.cols(), inter_layer_dropout, rng)?;
                current = apply_mask(&out, &mask);
                masks.push(Some(mask));
            } else {
                current = out;
                masks.push(None);
            }
        }
        Ok((
            current,
            StackCache {
                layers: caches,
                masks,
            },
        ))
    }

    /// `d_top` is the gradient on the top layer's outputs; returns the
    /// gradient on the stack input.
    pub fn backward(
        &self,
        cache: &StackCache<T>,
        d_top: &Matrix<f64>,
        grads: &mut LstmStack<T>,
    ) -> Result<Matrix<f64>> {
        if cache.layers.len() != self.layers.len() || grads.layers.len() != self.layers.len() {
            return Err(Error::InvalidState("stack cache depth mismatch".into()));
        }
        let mut d = d_top.clone();
        for l in (0..self.layers.len()).rev() {
            if l + 1 < self.layers.len() {
                if let Some(mask) = &cache.masks[l] {
                    for (dv, m) in d.data_mut().iter_mut().zip(mask.data()) {
                        *dv *= m.as_f64();
                    }
                }
            }
            d = self.layers[l].backward(&cache.layers[l], &d, &mut grads.layers[l])?;
        }
        Ok(d)
    }
}
