#include "pns/layers.hpp"

#include <cmath>

#include "pns/errors.hpp"

namespace pns::nn {

LinearLayer LinearLayer::create(ParamStore& store, const std::string& name, int in, int out,
                                bool with_bias) {
  return {store.add(name + ".w", in, out), with_bias ? store.add(name + ".b", 1, out) : -1};
}

Var LinearLayer::operator()(Tape& tape, const ParamStore& store, Var x) const {
  if (bias < 0) return matmul(x, tape.param(store, weight));
  return linear(x, tape.param(store, weight), tape.param(store, bias));
}

Mlp Mlp::create(ParamStore& store, const std::string& name, const std::vector<int>& widths,
                bool output_bias) {
  if (widths.size() < 2) throw ShapeMismatch("an MLP needs at least input and output widths");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    mlp.layers.push_back(LinearLayer::create(store, name + "." + std::to_string(i), widths[i],
                                             widths[i + 1], !last || output_bias));
  }
  return mlp;
}

Var Mlp::operator()(Tape& tape, const ParamStore& store, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](tape, store, x);
    if (i + 1 < layers.size()) x = relu(x);
  }
  return x;
}

Var mlp_forward(Tape& tape, const ParamStore& store, const Mlp& mlp, Var x) {
  return mlp(tape, store, x);
}

GruCell GruCell::create(ParamStore& store, const std::string& name, int in, int hidden) {
  return {store.add(name + ".w", in, 3 * hidden), store.add(name + ".u", hidden, 3 * hidden),
          store.add(name + ".b", 1, 3 * hidden), hidden};
}

Var GruCell::step(Tape& tape, const ParamStore& store, Var x, Var h, const Mask& row_mask) const {
  return gru_step(x, h, tape.param(store, w), tape.param(store, u), tape.param(store, b), row_mask);
}

namespace {

struct GruCache {
  Matrix z, r, n, g;  // g = h U_n
};

}  // namespace

Var gru_step(Var x, Var h, Var w, Var u, Var b, const Mask& row_mask) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index hd = h.cols();
  if (h.rows() != rows || w.rows() != x.cols() || w.cols() != 3 * hd || u.rows() != hd ||
      u.cols() != 3 * hd || b.rows() != 1 || b.cols() != 3 * hd) {
    throw ShapeMismatch("gru_step: inconsistent shapes");
  }
  if (!row_mask.empty() && static_cast<Eigen::Index>(row_mask.size()) != rows) {
    throw ShapeMismatch("gru_step: mask length");
  }
  Matrix a = x.value() * w.value();
  a.rowwise() += b.value().row(0);
  const Matrix bh = h.value() * u.value();

  auto cache = std::make_shared<GruCache>();
  cache->z = (1.0 + (-(a.leftCols(hd) + bh.leftCols(hd)).array()).exp()).inverse().matrix();
  cache->r = (1.0 + (-(a.middleCols(hd, hd) + bh.middleCols(hd, hd)).array()).exp()).inverse().matrix();
  cache->g = bh.rightCols(hd);
  cache->n = (a.rightCols(hd).array() + cache->r.array() * cache->g.array()).tanh().matrix();

  Matrix out = ((1.0 - cache->z.array()) * h.value().array() +
                cache->z.array() * cache->n.array()).matrix();
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!row_mask.empty() && !row_mask[i]) out.row(i) = h.value().row(i);
  }

  Tape& t = x.tape();
  return t.push(std::move(out), {x, h, w, u, b},
                [x, h, w, u, b, row_mask, cache](Tape& t, int self) {
    const Matrix& go = t.grad(self);
    const Eigen::Index hd = h.cols();
    const auto z = cache->z.array();
    const auto r = cache->r.array();
    const auto n = cache->n.array();
    const auto g = cache->g.array();
    const auto dout = go.array();

    Matrix da(go.rows(), 3 * hd);
    Matrix db(go.rows(), 3 * hd);
    const auto dz = dout * (n - h.value().array());
    const auto dn_pre = dout * z * (1.0 - n * n);
    da.leftCols(hd) = (dz * z * (1.0 - z)).matrix();
    da.middleCols(hd, hd) = (dn_pre * g * r * (1.0 - r)).matrix();
    da.rightCols(hd) = dn_pre.matrix();
    db.leftCols(hd) = da.leftCols(hd);
    db.middleCols(hd, hd) = da.middleCols(hd, hd);
    db.rightCols(hd) = (dn_pre * r).matrix();
    Matrix dh = (dout * (1.0 - z)).matrix();
    for (Eigen::Index i = 0; i < go.rows(); ++i) {
      if (!row_mask.empty() && !row_mask[i]) {
        da.row(i).setZero();
        db.row(i).setZero();
        dh.row(i) = go.row(i);
      }
    }
    if (t.requires_grad(x.id())) t.grad(x.id()).noalias() += da * w.value().transpose();
    if (t.requires_grad(w.id())) t.grad(w.id()).noalias() += x.value().transpose() * da;
    if (t.requires_grad(b.id())) t.grad(b.id()) += da.colwise().sum();
    if (t.requires_grad(u.id())) t.grad(u.id()).noalias() += h.value().transpose() * db;
    if (t.requires_grad(h.id())) {
      dh.noalias() += db * u.value().transpose();
      t.grad(h.id()) += dh;
    }
  });
}

Var scaled_dot_attention(Var q, Var k, Var v, const Mask& key_mask) {
  if (q.cols() != k.cols()) throw ShapeMismatch("attention: Q and K widths differ");
  if (k.rows() != v.rows()) throw ShapeMismatch("attention: K and V lengths differ");
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var scores = scale(matmul(q, transpose(k)), inv);
  return matmul(softmax_rows(scores, key_mask), v);
}

SelfAttentionBlock SelfAttentionBlock::create(ParamStore& store, const std::string& name, int dim) {
  return {store.add(name + ".wq", dim, dim), store.add(name + ".wk", dim, dim),
          store.add(name + ".wv", dim, dim)};
}

Var SelfAttentionBlock::operator()(Tape& tape, const ParamStore& store, Var h,
                                   const Mask& present) const {
  bool any = false;
  for (auto p : present) any = any || p;
  if (!any) return h;
  Var q = matmul(h, tape.param(store, wq));
  Var k = matmul(h, tape.param(store, wk));
  Var v = matmul(h, tape.param(store, wv));
  return add(h, mask_rows(scaled_dot_attention(q, k, v, present), present));
}

}  // namespace pns::nn
