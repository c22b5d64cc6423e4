#pragma once

#include <string>
#include <vector>

#include "pns/autodiff.hpp"
#include "pns/params.hpp"

namespace pns::nn {

struct LinearLayer {
  int weight = -1;
  int bias = -1;  // -1 for a bias-free map

  static LinearLayer create(ParamStore& store, const std::string& name, int in, int out,
                            bool with_bias = true);
  Var operator()(Tape& tape, const ParamStore& store, Var x) const;
};

// Affine layers with ReLU between them; the last layer stays affine.
struct Mlp {
  std::vector<LinearLayer> layers;

  // widths = {in, hidden..., out}.
  static Mlp create(ParamStore& store, const std::string& name, const std::vector<int>& widths,
                    bool output_bias = true);
  Var operator()(Tape& tape, const ParamStore& store, Var x) const;
};

Var mlp_forward(Tape& tape, const ParamStore& store, const Mlp& mlp, Var x);

// Gated recurrent unit with gates laid out as [update | reset | candidate]:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + r * (h Un) + bn)
//   h' = (1 - z) * h + z * n
struct GruCell {
  int w = -1;  // in x 3H
  int u = -1;  // H x 3H
  int b = -1;  // 1 x 3H
  int hidden = 0;

  static GruCell create(ParamStore& store, const std::string& name, int in, int hidden);
  // Rows whose mask entry is 0 carry h through unchanged.
  Var step(Tape& tape, const ParamStore& store, Var x, Var h, const Mask& row_mask = {}) const;
};

// Fused GRU step over explicit weights; rows of x and h are independent.
Var gru_step(Var x, Var h, Var w, Var u, Var b, const Mask& row_mask = {});

// softmax(Q K^T / sqrt(d_k)) V with d_k = Q.cols(). Keys with a zero mask
// entry are excluded.
Var scaled_dot_attention(Var q, Var k, Var v, const Mask& key_mask = {});

// Single-head self-attention across rows with a residual connection:
//   H' = H + Att(H Wq, H Wk, H Wv)
// Absent rows are excluded as keys and copied through unchanged.
struct SelfAttentionBlock {
  int wq = -1, wk = -1, wv = -1;

  static SelfAttentionBlock create(ParamStore& store, const std::string& name, int dim);
  Var operator()(Tape& tape, const ParamStore& store, Var h, const Mask& present) const;
};

}  // namespace pns::nn
