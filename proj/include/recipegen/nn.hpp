#pragma once

// Differentiable building blocks shared by the generator and the scorers.
// Every forward function optionally records a cache; the matching backward
// function consumes it and accumulates into a gradient struct of the same
// shape as the parameters.

#include "recipegen/linalg.hpp"

#include <cassert>
#include <string>
#include <vector>

namespace recipegen {

/// GRU cell with stacked gates [reset; update; candidate].
template <typename Scalar>
struct GruCell {
  MatrixX<Scalar> w_input;   // 3h x in
  MatrixX<Scalar> w_hidden;  // 3h x h
  VectorX<Scalar> b_input;   // 3h
  VectorX<Scalar> b_hidden;  // 3h

  GruCell() = default;
  GruCell(Index input_dim, Index hidden_dim)
      : w_input(MatrixX<Scalar>::Zero(3 * hidden_dim, input_dim)),
        w_hidden(MatrixX<Scalar>::Zero(3 * hidden_dim, hidden_dim)),
        b_input(VectorX<Scalar>::Zero(3 * hidden_dim)),
        b_hidden(VectorX<Scalar>::Zero(3 * hidden_dim)) {}

  Index hidden() const { return w_hidden.cols(); }
  Index input() const { return w_input.cols(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w_input", w_input);
    f(prefix + ".w_hidden", w_hidden);
    f(prefix + ".bias_input", b_input);
    f(prefix + ".bias_hidden", b_hidden);
  }
};

template <typename Scalar>
struct GruStepCache {
  VectorX<Scalar> x, h_prev, r, z, n, hn;
};

template <typename Scalar>
VectorX<Scalar> gru_step(const GruCell<Scalar>& cell, const VectorX<Scalar>& x,
                         const VectorX<Scalar>& h, GruStepCache<Scalar>* cache = nullptr) {
  const Index d = cell.hidden();
  const VectorX<Scalar> gi = cell.w_input * x + cell.b_input;
  const VectorX<Scalar> gh = cell.w_hidden * h + cell.b_hidden;
  VectorX<Scalar> r = sigmoid(gi.head(d) + gh.head(d));
  VectorX<Scalar> z = sigmoid(gi.segment(d, d) + gh.segment(d, d));
  VectorX<Scalar> hn = gh.tail(d);
  VectorX<Scalar> n = (gi.tail(d) + r.cwiseProduct(hn)).array().tanh().matrix();
  VectorX<Scalar> out = (Scalar(1) - z.array()) * n.array() + z.array() * h.array();
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->n = std::move(n);
    cache->hn = std::move(hn);
  }
  return out;
}

/// Backpropagates d(out) through one GRU step. Writes dx and dh_prev.
template <typename Scalar>
void gru_step_backward(const GruCell<Scalar>& cell, GruCell<Scalar>& grad,
                       const GruStepCache<Scalar>& c, const VectorX<Scalar>& d_out,
                       VectorX<Scalar>& d_x, VectorX<Scalar>& d_h_prev) {
  const Index d = cell.hidden();
  const auto one = Scalar(1);
  const VectorX<Scalar> dn = d_out.array() * (one - c.z.array());
  const VectorX<Scalar> dz = d_out.array() * (c.h_prev.array() - c.n.array());
  const VectorX<Scalar> dn_pre = dn.array() * (one - c.n.array().square());
  const VectorX<Scalar> dr = dn_pre.array() * c.hn.array();
  const VectorX<Scalar> dr_pre = dr.array() * c.r.array() * (one - c.r.array());
  const VectorX<Scalar> dz_pre = dz.array() * c.z.array() * (one - c.z.array());

  VectorX<Scalar> gi(3 * d), gh(3 * d);
  gi << dr_pre, dz_pre, dn_pre;
  gh << dr_pre, dz_pre, dn_pre.cwiseProduct(c.r);

  grad.w_input.noalias() += gi * c.x.transpose();
  grad.b_input += gi;
  grad.w_hidden.noalias() += gh * c.h_prev.transpose();
  grad.b_hidden += gh;

  d_x.noalias() = cell.w_input.transpose() * gi;
  d_h_prev = d_out.cwiseProduct(c.z);
  d_h_prev.noalias() += cell.w_hidden.transpose() * gh;
}

/// Runs a GRU over the columns of `inputs` starting from zero state.
/// Column t of the result is the state after consuming column t.
template <typename Scalar>
MatrixX<Scalar> gru_sequence(const GruCell<Scalar>& cell, const MatrixX<Scalar>& inputs,
                             bool reverse, std::vector<GruStepCache<Scalar>>* caches) {
  const Index len = inputs.cols();
  MatrixX<Scalar> states(cell.hidden(), len);
  VectorX<Scalar> h = VectorX<Scalar>::Zero(cell.hidden());
  if (caches) caches->assign(len, {});
  for (Index s = 0; s < len; ++s) {
    const Index t = reverse ? len - 1 - s : s;
    h = gru_step<Scalar>(cell, inputs.col(t), h, caches ? &(*caches)[t] : nullptr);
    states.col(t) = h;
  }
  return states;
}

template <typename Scalar>
MatrixX<Scalar> gru_sequence_backward(const GruCell<Scalar>& cell, GruCell<Scalar>& grad,
                                      const std::vector<GruStepCache<Scalar>>& caches,
                                      const MatrixX<Scalar>& d_states, bool reverse) {
  const Index len = d_states.cols();
  MatrixX<Scalar> d_inputs(cell.input(), len);
  VectorX<Scalar> d_next = VectorX<Scalar>::Zero(cell.hidden());
  VectorX<Scalar> d_x, d_prev;
  for (Index s = len - 1; s >= 0; --s) {
    const Index t = reverse ? len - 1 - s : s;
    const VectorX<Scalar> d_out = d_states.col(t) + d_next;
    gru_step_backward(cell, grad, caches[t], d_out, d_x, d_prev);
    d_inputs.col(t) = d_x;
    d_next = d_prev;
  }
  return d_inputs;
}

template <typename Scalar>
struct BiGruLayer {
  GruCell<Scalar> forward;
  GruCell<Scalar> backward;
};

template <typename Scalar>
struct BiGruCache {
  std::vector<std::vector<GruStepCache<Scalar>>> forward, backward;
};

/// Stacked bidirectional GRU; each layer emits [forward; backward] (2h rows).
template <typename Scalar>
MatrixX<Scalar> bigru_forward(const std::vector<BiGruLayer<Scalar>>& layers,
                              const MatrixX<Scalar>& inputs, BiGruCache<Scalar>* cache) {
  if (cache) {
    cache->forward.assign(layers.size(), {});
    cache->backward.assign(layers.size(), {});
  }
  MatrixX<Scalar> x = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    MatrixX<Scalar> out(2 * layer.forward.hidden(), x.cols());
    out.topRows(layer.forward.hidden()) =
        gru_sequence(layer.forward, x, false, cache ? &cache->forward[l] : nullptr);
    out.bottomRows(layer.backward.hidden()) =
        gru_sequence(layer.backward, x, true, cache ? &cache->backward[l] : nullptr);
    x = std::move(out);
  }
  return x;
}

template <typename Scalar>
MatrixX<Scalar> bigru_backward(const std::vector<BiGruLayer<Scalar>>& layers,
                               std::vector<BiGruLayer<Scalar>>& grads,
                               const BiGruCache<Scalar>& cache, const MatrixX<Scalar>& d_output) {
  MatrixX<Scalar> d = d_output;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const Index h = layer.forward.hidden();
    MatrixX<Scalar> d_in = gru_sequence_backward<Scalar>(layer.forward, grads[l].forward,
                                                         cache.forward[l], d.topRows(h), false);
    d_in += gru_sequence_backward<Scalar>(layer.backward, grads[l].backward, cache.backward[l],
                                          d.bottomRows(h), true);
    d = std::move(d_in);
  }
  return d;
}

/// Additive attention head: score_j = tanh(w . (P k_j + q) + b), weights = exp(score) / Z.
/// Keys are linearly projected into the query space and the projection doubles
/// as the attended value.
template <typename Scalar>
struct AttentionHead {
  MatrixX<Scalar> key_proj;  // query_dim x key_dim
  VectorX<Scalar> score_w;   // query_dim
  VectorX<Scalar> score_b;   // 1

  AttentionHead() = default;
  AttentionHead(Index key_dim, Index query_dim)
      : key_proj(MatrixX<Scalar>::Zero(query_dim, key_dim)),
        score_w(VectorX<Scalar>::Zero(query_dim)),
        score_b(VectorX<Scalar>::Zero(1)) {}

  bool empty() const { return key_proj.size() == 0; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".key_proj", key_proj);
    f(prefix + ".score_w", score_w);
    f(prefix + ".score_bias", score_b);
  }
};

template <typename Scalar>
struct AttentionCache {
  VectorX<Scalar> query;
  VectorX<Scalar> scores;   // tanh outputs
  VectorX<Scalar> weights;  // normalized
  VectorX<Scalar> coef;     // weights plus any additive boost
};

/// Normalized attention weights over projected keys (one column per key).
template <typename Scalar>
VectorX<Scalar> attention_weights(const AttentionHead<Scalar>& head,
                                  const MatrixX<Scalar>& projected_keys,
                                  const VectorX<Scalar>& query,
                                  AttentionCache<Scalar>* cache = nullptr) {
  assert(projected_keys.cols() > 0);
  const Scalar shared = head.score_w.dot(query) + head.score_b(0);
  VectorX<Scalar> scores =
      ((projected_keys.transpose() * head.score_w).array() + shared).tanh().matrix();
  // tanh bounds the exponent to [-1, 1], so no max-shift is needed.
  VectorX<Scalar> unnorm = scores.array().exp().matrix();
  VectorX<Scalar> weights = unnorm / unnorm.sum();
  if (cache) {
    cache->query = query;
    cache->scores = std::move(scores);
    cache->weights = weights;
  }
  return weights;
}

/// Context = projected_keys * (weights + boost). `boost` may be empty.
template <typename Scalar>
VectorX<Scalar> attend(const AttentionHead<Scalar>& head, const MatrixX<Scalar>& projected_keys,
                       const VectorX<Scalar>& query, const VectorX<Scalar>& boost,
                       AttentionCache<Scalar>* cache = nullptr) {
  VectorX<Scalar> coef = attention_weights(head, projected_keys, query, cache);
  if (boost.size() > 0) coef += boost;
  VectorX<Scalar> ctx = projected_keys * coef;
  if (cache) cache->coef = std::move(coef);
  return ctx;
}

template <typename Scalar>
void attend_backward(const AttentionHead<Scalar>& head, AttentionHead<Scalar>& grad,
                     const MatrixX<Scalar>& projected_keys, const AttentionCache<Scalar>& c,
                     const VectorX<Scalar>& d_ctx, MatrixX<Scalar>& d_keys,
                     VectorX<Scalar>& d_query) {
  d_keys.noalias() += d_ctx * c.coef.transpose();
  const VectorX<Scalar> d_weights = projected_keys.transpose() * d_ctx;
  const Scalar mean = c.weights.dot(d_weights);
  const VectorX<Scalar> d_scores = c.weights.array() * (d_weights.array() - mean);
  const VectorX<Scalar> d_pre = d_scores.array() * (Scalar(1) - c.scores.array().square());
  const Scalar total = d_pre.sum();
  grad.score_w.noalias() += projected_keys * d_pre;
  grad.score_w += total * c.query;
  grad.score_b(0) += total;
  d_keys.noalias() += head.score_w * d_pre.transpose();
  d_query += total * head.score_w;
}

}  // namespace recipegen
