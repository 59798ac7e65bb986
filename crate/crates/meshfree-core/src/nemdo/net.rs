//! Stencil graphs and the batched network forward/backward pass.
//!
//! All stencils in a batch share the same neighbor count, so node latents
//! live in one `(B*(n+1), F)` matrix with node 0 of each stencil being the
//! center. Message passing on the star graph means each neighbor only
//! hears the center, while the center aggregates all neighbor messages
//! with dot-product attention. The backward pass is hand-derived
//! reverse-mode: every MLP application is a GEMM, so gradients are GEMMs
//! against the cached activations.

use super::params::{Layout, MlpLayout};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::geometry::NormalizedStencil;
use crate::taylor::{target_moments, MonomialBasis};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

/// Star graph of one stencil: node 0 is the center with feature (0, 0),
/// nodes 1..=n carry the normalized offsets in stencil order.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilGraph {
    pub features: Vec<[f64; 2]>,
}

impl StencilGraph {
    pub fn node_count(&self) -> usize {
        self.features.len()
    }

    pub fn stencil_n(&self) -> usize {
        self.features.len() - 1
    }

    /// Directed edge list: center <-> each neighbor, no neighbor-neighbor
    /// edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.stencil_n();
        let mut e = Vec::with_capacity(2 * n);
        for j in 1..=n {
            e.push((0, j));
            e.push((j, 0));
        }
        e
    }
}

pub fn build_graph(stencil: &NormalizedStencil, stencil_n: usize) -> Result<StencilGraph> {
    if stencil.len() != stencil_n {
        return Err(Error::invalid(format!(
            "stencil has {} neighbors, expected {stencil_n}",
            stencil.len()
        )));
    }
    let mut features = Vec::with_capacity(stencil_n + 1);
    features.push([0.0, 0.0]);
    features.extend_from_slice(&stencil.offsets_hat);
    Ok(StencilGraph { features })
}

struct Net<'a> {
    config: &'a ModelConfig,
    layout: &'a Layout,
    params: &'a [f64],
}

/// Activations of one MLP application: `acts[0]` is the input, `acts[i]`
/// the (post-tanh for hidden, raw for final) output of layer `i-1`.
struct MlpCache {
    acts: Vec<Array2<f64>>,
}

struct LayerCache {
    msg: MlpCache,
    upd: MlpCache,
    /// Center-aggregation attention weights, one row per stencil.
    alphas: Array2<f64>,
}

struct ForwardCache {
    emb: MlpCache,
    layers: Vec<LayerCache>,
    out: MlpCache,
}

impl<'a> Net<'a> {
    fn weight(&self, mlp: &MlpLayout, layer: usize) -> ArrayView2<'a, f64> {
        let (rows, cols) = mlp.layer_shape(layer);
        ArrayView2::from_shape((rows, cols), &self.params[mlp.weight_range(layer)]).unwrap()
    }

    fn bias(&self, mlp: &MlpLayout, layer: usize) -> ArrayView1<'a, f64> {
        ArrayView1::from_shape(
            mlp.layer_shape(layer).1,
            &self.params[mlp.bias_range(layer)],
        )
        .unwrap()
    }

    fn mlp_forward(&self, name: &str, x: Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mlp = self.layout.mlp(name).expect("mlp in layout");
        let last = mlp.layer_count() - 1;
        let mut acts = Vec::with_capacity(mlp.layer_count() + 1);
        acts.push(x);
        for l in 0..mlp.layer_count() {
            let mut y = acts[l].dot(&self.weight(mlp, l));
            y += &self.bias(mlp, l);
            if l < last {
                y.mapv_inplace(f64::tanh);
            }
            acts.push(y);
        }
        let out = acts.last().unwrap().clone();
        (out, MlpCache { acts })
    }

    /// Reverse through one MLP; accumulates parameter gradients and
    /// returns the gradient at the input.
    fn mlp_backward(
        &self,
        name: &str,
        cache: &MlpCache,
        mut d_out: Array2<f64>,
        grad: &mut [f64],
    ) -> Array2<f64> {
        let mlp = self.layout.mlp(name).expect("mlp in layout");
        let last = mlp.layer_count() - 1;
        for l in (0..mlp.layer_count()).rev() {
            if l < last {
                // tanh'(z) = 1 - tanh(z)^2, with tanh(z) cached
                let y = &cache.acts[l + 1];
                d_out.zip_mut_with(y, |d, &t| *d *= 1.0 - t * t);
            }
            let x = &cache.acts[l];
            let dw = x.t().dot(&d_out);
            let gw = &mut grad[mlp.weight_range(l)];
            for (g, v) in gw.iter_mut().zip(dw.iter()) {
                *g += v;
            }
            let gb = &mut grad[mlp.bias_range(l)];
            for (j, g) in gb.iter_mut().enumerate() {
                *g += d_out.column(j).sum();
            }
            d_out = d_out.dot(&self.weight(mlp, l).t());
        }
        d_out
    }

    /// Attention aggregation over the star graph. Neighbors aggregate the
    /// single center message; the center aggregates neighbor messages with
    /// softmax(<v_c, v_k>/sqrt(F)) weights.
    fn aggregate(
        &self,
        v_prev: &Array2<f64>,
        msgs: &Array2<f64>,
        batch: usize,
    ) -> (Array2<f64>, Array2<f64>) {
        let n = self.config.stencil_n;
        let f = self.config.f_h;
        let scale = 1.0 / (f as f64).sqrt();
        let mut agg = Array2::<f64>::zeros(v_prev.raw_dim());
        let mut alphas = Array2::<f64>::zeros((batch, n));
        let mut e = vec![0.0f64; n];
        for b in 0..batch {
            let c = b * (n + 1);
            let vc = v_prev.row(c);
            for k in 0..n {
                e[k] = vc.dot(&v_prev.row(c + 1 + k)) * scale;
            }
            let emax = e.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut z = 0.0;
            for ek in e.iter_mut() {
                *ek = (*ek - emax).exp();
                z += *ek;
            }
            for k in 0..n {
                let a = e[k] / z;
                alphas[[b, k]] = a;
                let mk = msgs.row(c + 1 + k);
                let mut target = agg.row_mut(c);
                target.scaled_add(a, &mk);
            }
            // every neighbor hears only the center
            let mc = msgs.row(c).to_owned();
            for j in 1..=n {
                agg.row_mut(c + j).assign(&mc);
            }
        }
        (agg, alphas)
    }

    fn aggregate_backward(
        &self,
        v_prev: &Array2<f64>,
        msgs: &Array2<f64>,
        alphas: &Array2<f64>,
        d_agg: &Array2<f64>,
        batch: usize,
        d_vprev: &mut Array2<f64>,
    ) -> Array2<f64> {
        let n = self.config.stencil_n;
        let f = self.config.f_h;
        let scale = 1.0 / (f as f64).sqrt();
        let mut d_msgs = Array2::<f64>::zeros(msgs.raw_dim());
        let mut d_alpha = vec![0.0f64; n];
        for b in 0..batch {
            let c = b * (n + 1);
            // neighbors consumed the center message
            for j in 1..=n {
                let src = d_agg.row(c + j).to_owned();
                d_msgs.row_mut(c).scaled_add(1.0, &src);
            }
            // center aggregation
            let dc = d_agg.row(c);
            let mut dot_sum = 0.0;
            for k in 0..n {
                let a = alphas[[b, k]];
                d_msgs.row_mut(c + 1 + k).scaled_add(a, &dc);
                d_alpha[k] = dc.dot(&msgs.row(c + 1 + k));
                dot_sum += alphas[[b, k]] * d_alpha[k];
            }
            let vc = v_prev.row(c).to_owned();
            let mut d_vc = Array1::<f64>::zeros(f);
            for k in 0..n {
                let de = alphas[[b, k]] * (d_alpha[k] - dot_sum) * scale;
                if de != 0.0 {
                    d_vc.scaled_add(de, &v_prev.row(c + 1 + k));
                    d_vprev.row_mut(c + 1 + k).scaled_add(de, &vc);
                }
            }
            d_vprev.row_mut(c).scaled_add(1.0, &d_vc);
        }
        d_msgs
    }

    /// Full forward: returns (B, n) normalized weights and the caches.
    fn forward(&self, features: Array2<f64>, batch: usize) -> (Array2<f64>, ForwardCache) {
        let n = self.config.stencil_n;
        let (mut v, emb) = self.mlp_forward("emb", features);
        let mut layers = Vec::with_capacity(self.config.graph_layers);
        for l in 0..self.config.graph_layers {
            let (msgs, msg_cache) = self.mlp_forward(&format!("msg{l}"), v.clone());
            let (agg, alphas) = self.aggregate(&v, &msgs, batch);
            let mut upd_in = Array2::<f64>::zeros((v.nrows(), 2 * self.config.f_h));
            upd_in.slice_mut(s![.., ..self.config.f_h]).assign(&v);
            upd_in.slice_mut(s![.., self.config.f_h..]).assign(&agg);
            let (v_next, upd_cache) = self.mlp_forward(&format!("upd{l}"), upd_in);
            layers.push(LayerCache {
                msg: msg_cache,
                upd: upd_cache,
                alphas,
            });
            v = v_next;
        }
        // gather neighbor rows and decode one weight each
        let mut gathered = Array2::<f64>::zeros((batch * n, self.config.f_h));
        for b in 0..batch {
            for j in 0..n {
                gathered
                    .row_mut(b * n + j)
                    .assign(&v.row(b * (n + 1) + 1 + j));
            }
        }
        let (raw, out020) = self.mlp_forward("out", gathered);
        let what = Array2::from_shape_fn((batch, n), |(b, j)| raw[[b * n + j, 0]]);
        (
            what,
            ForwardCache {
                emb,
                layers,
                out: out020,
            },
        )
    }

    /// Reverse from d(what) all the way to parameter gradients.
    fn backward(
        &self,
        cache: &ForwardCache,
        d_what: &Array2<f64>,
        batch: usize,
        grad: &mut [f64],
    ) {
        let n = self.config.stencil_n;
        let f = self.config.f_h;
        let d_raw =
            Array2::from_shape_fn((batch * n, 1), |(r, _)| d_what[[r / n, r % n]]);
        let d_gathered = self.mlp_backward("out", &cache.out, d_raw, grad);
        // scatter into full node layout; centers receive no output gradient
        let rows = batch * (n + 1);
        let mut d_v = Array2::<f64>::zeros((rows, f));
        for b in 0..batch {
            for j in 0..n {
                d_v.row_mut(b * (n + 1) + 1 + j)
                    .assign(&d_gathered.row(b * n + j));
            }
        }
        for l in (0..self.config.graph_layers).rev() {
            let lc = &cache.layers[l];
            let d_upd_in = self.mlp_backward(&format!("upd{l}"), &lc.upd, d_v, grad);
            let mut d_vprev = d_upd_in.slice(s![.., ..f]).to_owned();
            let d_agg = d_upd_in.slice(s![.., f..]).to_owned();
            let v_prev = &lc.msg.acts[0];
            let msgs = lc.msg.acts.last().unwrap();
            let d_msgs =
                self.aggregate_backward(v_prev, msgs, &lc.alphas, &d_agg, batch, &mut d_vprev);
            let d_from_msg = self.mlp_backward(&format!("msg{l}"), &lc.msg, d_msgs, grad);
            d_vprev += &d_from_msg;
            d_v = d_vprev;
        }
        self.mlp_backward("emb", &cache.emb, d_v, grad);
    }
}

fn assemble_features(stencils: &[&NormalizedStencil], n: usize) -> Result<Array2<f64>> {
    let batch = stencils.len();
    let mut x = Array2::<f64>::zeros((batch * (n + 1), 2));
    for (b, st) in stencils.iter().enumerate() {
        if st.len() != n {
            return Err(Error::invalid(format!(
                "stencil {} in batch has {} neighbors, expected {n}",
                b,
                st.len()
            )));
        }
        for (j, o) in st.offsets_hat.iter().enumerate() {
            x[[b * (n + 1) + 1 + j, 0]] = o[0];
            x[[b * (n + 1) + 1 + j, 1]] = o[1];
        }
    }
    Ok(x)
}

fn check_finite(what: &Array2<f64>) -> Result<()> {
    if let Some(((b, j), v)) = what.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite network output {v} at stencil {b}, neighbor {j}"
        )));
    }
    Ok(())
}

/// Normalized weights for a batch of stencils, one row per stencil.
pub fn forward_batch_weights(
    config: &ModelConfig,
    layout: &Layout,
    params: &super::Parameters,
    stencils: &[&NormalizedStencil],
) -> Result<Array2<f64>> {
    if stencils.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let net = Net {
        config,
        layout,
        params: params.as_slice(),
    };
    let x = assemble_features(stencils, config.stencil_n)?;
    let (what, _) = net.forward(x, stencils.len());
    check_finite(&what)?;
    Ok(what)
}

pub(crate) fn forward_single(
    config: &ModelConfig,
    layout: &Layout,
    params: &super::Parameters,
    graph: &StencilGraph,
) -> Result<Vec<f64>> {
    if graph.stencil_n() != config.stencil_n {
        return Err(Error::invalid(format!(
            "graph has {} neighbors, model expects {}",
            graph.stencil_n(),
            config.stencil_n
        )));
    }
    let net = Net {
        config,
        layout,
        params: params.as_slice(),
    };
    let mut x = Array2::<f64>::zeros((graph.node_count(), 2));
    for (i, ft) in graph.features.iter().enumerate() {
        x[[i, 0]] = ft[0];
        x[[i, 1]] = ft[1];
    }
    let (what, _) = net.forward(x, 1);
    check_finite(&what)?;
    Ok(what.row(0).to_vec())
}

/// Per-stencil monomial matrices, flattened `nbasis x n` row-major.
pub(crate) fn moment_matrices(
    stencils: &[&NormalizedStencil],
    p: usize,
) -> Result<Vec<Vec<f64>>> {
    let basis = MonomialBasis::new(p)?;
    let nb = basis.len();
    let mut out = Vec::with_capacity(stencils.len());
    let mut col = vec![0.0; nb];
    for st in stencils {
        let n = st.len();
        let mut xm = vec![0.0; nb * n];
        for (j, o) in st.offsets_hat.iter().enumerate() {
            basis.eval(*o, &mut col);
            for q in 0..nb {
                xm[q * n + j] = col[q];
            }
        }
        out.push(xm);
    }
    Ok(out)
}

/// Mean squared moment-residual loss of predicted weights and, per
/// stencil, the gradient of that loss with respect to the weights.
pub(crate) fn residual_loss(
    xmats: &[Vec<f64>],
    target: &[f64],
    what: &Array2<f64>,
) -> (f64, Array2<f64>) {
    let batch = what.nrows();
    let n = what.ncols();
    let nb = target.len();
    let mut loss = 0.0;
    let mut d_what = Array2::<f64>::zeros((batch, n));
    let inv_b = 1.0 / batch as f64;
    let mut r = vec![0.0f64; nb];
    for b in 0..batch {
        let xm = &xmats[b];
        let wrow = what.row(b);
        for q in 0..nb {
            let mut acc = -target[q];
            let row = &xm[q * n..(q + 1) * n];
            for (x, w) in row.iter().zip(wrow.iter()) {
                acc += x * w;
            }
            r[q] = acc;
            loss += acc * acc;
        }
        let mut drow = d_what.row_mut(b);
        for q in 0..nb {
            let rq = 2.0 * inv_b * r[q];
            if rq != 0.0 {
                let row = &xm[q * n..(q + 1) * n];
                for (d, x) in drow.iter_mut().zip(row) {
                    *d += rq * x;
                }
            }
        }
    }
    (loss * inv_b, d_what)
}

/// Batch loss only.
pub fn loss_batch(
    config: &ModelConfig,
    layout: &Layout,
    params: &super::Parameters,
    stencils: &[&NormalizedStencil],
) -> Result<f64> {
    let what = forward_batch_weights(config, layout, params, stencils)?;
    let xmats = moment_matrices(stencils, config.order_p)?;
    let target = target_moments(config.kind, config.order_p)?;
    Ok(residual_loss(&xmats, &target, &what).0)
}

/// Batch loss and its exact reverse-mode gradient, accumulated into
/// `grad` (which must be zeroed by the caller if a fresh gradient is
/// wanted).
pub fn loss_and_grad(
    config: &ModelConfig,
    layout: &Layout,
    params: &super::Parameters,
    stencils: &[&NormalizedStencil],
    grad: &mut [f64],
) -> Result<f64> {
    let xmats = moment_matrices(stencils, config.order_p)?;
    let target = target_moments(config.kind, config.order_p)?;
    loss_and_grad_with_targets(config, layout, params, stencils, &xmats, &target, grad)
}

pub(crate) fn loss_and_grad_with_targets(
    config: &ModelConfig,
    layout: &Layout,
    params: &super::Parameters,
    stencils: &[&NormalizedStencil],
    xmats: &[Vec<f64>],
    target: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    if stencils.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if grad.len() != layout.total() {
        return Err(Error::invalid("gradient buffer length mismatch"));
    }
    let net = Net {
        config,
        layout,
        params: params.as_slice(),
    };
    let x = assemble_features(stencils, config.stencil_n)?;
    let batch = stencils.len();
    let (what, cache) = net.forward(x, batch);
    check_finite(&what)?;
    let (loss, d_what) = residual_loss(xmats, target, &what);
    net.backward(&cache, &d_what, batch, grad);
    Ok(loss)
}
