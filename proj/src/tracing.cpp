#include "pns/tracing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pns/errors.hpp"

namespace pns {

using nn::Mask;
using nn::Matrix;
using nn::Tape;
using nn::Var;

std::string to_string(DistanceMetric metric) { return metric == DistanceMetric::kL1 ? "l1" : "l2"; }

DistanceMetric distance_metric_from_string(const std::string& name) {
  if (name == "l1" || name == "L1") return DistanceMetric::kL1;
  if (name == "l2" || name == "L2") return DistanceMetric::kL2;
  throw ConfigError("unknown distance metric '" + name + "'");
}

double point_distance(Point a, Point b, DistanceMetric metric) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return metric == DistanceMetric::kL1 ? std::abs(dx) + std::abs(dy) : std::sqrt(dx * dx + dy * dy);
}

std::string to_string(AttentionAxis axis) {
  return axis == AttentionAxis::kTemporal ? "temporal" : "single";
}

AttentionAxis attention_axis_from_string(const std::string& name) {
  if (name == "temporal") return AttentionAxis::kTemporal;
  if (name == "single") return AttentionAxis::kSingle;
  throw ConfigError("unknown attention axis '" + name + "'");
}

std::string to_string(PnsLossKind kind) {
  return kind == PnsLossKind::kBinary ? "binary" : "categorical";
}

PnsLossKind pns_loss_kind_from_string(const std::string& name) {
  if (name == "binary" || name == "bce") return PnsLossKind::kBinary;
  if (name == "categorical" || name == "ce") return PnsLossKind::kCategorical;
  throw ConfigError("unknown PnS loss '" + name + "'");
}

RelationEncoder RelationEncoder::create(nn::ParamStore& store, const std::string& name, int dim) {
  RelationEncoder enc;
  enc.gru = nn::GruCell::create(store, name + ".gru", dim, dim);
  enc.input = store.add(name + ".input", 1, dim);
  return enc;
}

std::vector<Var> RelationEncoder::operator()(Tape& tape, const nn::ParamStore& store,
                                             Var final_hidden, int t_f) const {
  std::vector<Var> out;
  out.reserve(t_f);
  Var x = nn::repeat_rows(tape.param(store, input), final_hidden.rows());
  Var h = final_hidden;
  for (int t = 0; t < t_f; ++t) {
    h = gru.step(tape, store, x, h);
    out.push_back(h);
  }
  return out;
}

InfluenceScorer InfluenceScorer::create(nn::ParamStore& store, const std::string& name, int dim,
                                        AttentionAxis axis) {
  InfluenceScorer s;
  s.wq = store.add(name + ".wq", dim, dim);
  s.wk = store.add(name + ".wk", dim, dim);
  s.wv = store.add(name + ".wv", dim, dim);
  // A shared logit offset cancels in the softmax, so the output layer has no bias.
  s.mlp = nn::Mlp::create(store, name + ".mlp", {3 * dim, dim, 1}, false);
  s.axis = axis;
  return s;
}

Var InfluenceScorer::operator()(Tape& tape, const nn::ParamStore& store, int successor,
                                Var successor_obs, const std::vector<Var>& relation) const {
  if (relation.empty()) throw ShapeMismatch("influence scorer: empty future horizon");
  const auto agents = relation.front().rows();
  const auto t_f = static_cast<Eigen::Index>(relation.size());
  Var all = nn::concat_rows(relation);  // row t * agents + a
  std::vector<int> succ_rows(static_cast<std::size_t>(t_f * agents));
  for (Eigen::Index t = 0; t < t_f; ++t) {
    for (Eigen::Index a = 0; a < agents; ++a) {
      succ_rows[t * agents + a] = static_cast<int>(t * agents + successor);
    }
  }
  Var h_i = nn::gather_rows(all, succ_rows);
  Var q = nn::matmul(all, tape.param(store, wq));
  Var context;
  if (axis == AttentionAxis::kTemporal) {
    Var k = nn::matmul(successor_obs, tape.param(store, wk));
    Var v = nn::matmul(successor_obs, tape.param(store, wv));
    context = nn::scaled_dot_attention(q, k, v);
  } else {
    // A single key receives all the attention weight.
    context = nn::matmul(h_i, tape.param(store, wv));
  }
  Var logits = mlp(tape, store, nn::concat_cols({h_i, all, context}));
  return nn::transpose(nn::reshape(logits, agents, t_f));
}

Var influence_logit(Tape& tape, const nn::ParamStore& store, const InfluenceScorer& scorer,
                    Var h_i, Var h_p, Var successor_keys) {
  if (h_i.rows() != 1 || h_p.rows() != 1 || h_i.cols() != h_p.cols()) {
    throw ShapeMismatch("influence_logit expects two 1 x d encodings");
  }
  Var q = nn::matmul(h_p, tape.param(store, scorer.wq));
  Var context;
  if (scorer.axis == AttentionAxis::kTemporal) {
    Var k = nn::matmul(successor_keys, tape.param(store, scorer.wk));
    Var v = nn::matmul(successor_keys, tape.param(store, scorer.wv));
    context = nn::scaled_dot_attention(q, k, v);
  } else {
    context = nn::matmul(h_i, tape.param(store, scorer.wv));
  }
  return scorer.mlp(tape, store, nn::concat_cols({h_i, h_p, context}));
}

namespace {

bool any_set(const Mask& m) {
  return std::any_of(m.begin(), m.end(), [](auto v) { return v != 0; });
}

}  // namespace

PredecessorDistribution predecessor_distribution(const Matrix& logits, const Mask& candidate_mask) {
  if (static_cast<Eigen::Index>(candidate_mask.size()) != logits.cols()) {
    throw ShapeMismatch("predecessor_distribution: mask length");
  }
  PredecessorDistribution d;
  d.candidate_mask = candidate_mask;
  if (!any_set(candidate_mask)) {
    d.probs = Matrix::Zero(logits.rows(), logits.cols());
    d.rollback = true;
    return d;
  }
  Tape tape;
  d.probs = nn::softmax_rows(tape.constant(logits), candidate_mask).value();
  return d;
}

Var predecessor_probs(Var logits, const Mask& candidate_mask) {
  if (!any_set(candidate_mask)) {
    return logits.tape().constant(Matrix::Zero(logits.rows(), logits.cols()));
  }
  return nn::softmax_rows(logits, candidate_mask);
}

PredecessorLabels label_predecessors(const Scene& scene, const Mask& candidate_mask,
                                     DistanceMetric metric) {
  const int n = scene.num_agents();
  if (static_cast<int>(candidate_mask.size()) != n) throw ShapeMismatch("label mask length");
  const int t_f = scene.t_f;
  PredecessorLabels labels{std::vector<int>(t_f, -1), std::vector<double>(t_f, 0.0)};

  // Observed points of every candidate, grouped by agent in index order.
  std::vector<int> owner;
  std::vector<Point> pts;
  for (int a = 0; a < n; ++a) {
    if (!candidate_mask[a] || a == scene.target_index) continue;
    for (int t = 0; t < scene.t_h; ++t) {
      if (scene.present(a, t)) {
        owner.push_back(a);
        pts.push_back(scene.at(a, t));
      }
    }
  }
  if (pts.empty()) return labels;

  const auto np = static_cast<Eigen::Index>(pts.size());
  Eigen::ArrayXXd fx(t_f, 1), fy(t_f, 1), ox(1, np), oy(1, np);
  for (int t = 0; t < t_f; ++t) {
    const Point p = scene.at(scene.target_index, scene.t_h + t);
    fx(t, 0) = p.x;
    fy(t, 0) = p.y;
  }
  for (Eigen::Index j = 0; j < np; ++j) {
    ox(0, j) = pts[j].x;
    oy(0, j) = pts[j].y;
  }
  const Eigen::ArrayXXd dx = fx.replicate(1, np) - ox.replicate(t_f, 1);
  const Eigen::ArrayXXd dy = fy.replicate(1, np) - oy.replicate(t_f, 1);
  const Eigen::ArrayXXd dist =
      metric == DistanceMetric::kL1 ? (dx.abs() + dy.abs()).eval() : (dx * dx + dy * dy).sqrt().eval();

  for (int t = 0; t < t_f; ++t) {
    double best = std::numeric_limits<double>::infinity();
    int best_agent = -1;
    Eigen::Index j = 0;
    while (j < np) {
      const int a = owner[j];
      Eigen::Index e = j;
      while (e < np && owner[e] == a) ++e;
      const double d = dist.row(t).segment(j, e - j).minCoeff();
      if (d < best) {
        best = d;
        best_agent = a;
      }
      j = e;
    }
    labels.agent[t] = best_agent;
    labels.distance[t] = best;
  }
  return labels;
}

Matrix one_hot(const PredecessorLabels& labels, int agents) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.agent.size()), agents);
  for (std::size_t t = 0; t < labels.agent.size(); ++t) {
    if (labels.agent[t] >= 0) m(static_cast<Eigen::Index>(t), labels.agent[t]) = 1.0;
  }
  return m;
}

TopKSelection select_topk(const Matrix& probs, const Mask& candidate_mask, int k) {
  if (k < 1) throw ConfigError("K must be >= 1");
  if (static_cast<Eigen::Index>(candidate_mask.size()) != probs.cols()) {
    throw ShapeMismatch("select_topk: mask length");
  }
  TopKSelection sel(static_cast<std::size_t>(probs.rows()), std::vector<int>(k, -1));
  std::vector<int> cand;
  for (int a = 0; a < static_cast<int>(candidate_mask.size()); ++a) {
    if (candidate_mask[a]) cand.push_back(a);
  }
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    std::vector<int> order = cand;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double pa = probs(t, a), pb = probs(t, b);
      return pa > pb || (pa == pb && a < b);
    });
    for (int s = 0; s < k && s < static_cast<int>(order.size()); ++s) sel[t][s] = order[s];
  }
  return sel;
}

Var topk_aggregate(Var probs, const std::vector<Var>& relation, const TopKSelection& selection) {
  const auto t_f = static_cast<Eigen::Index>(selection.size());
  if (t_f != probs.rows() || static_cast<Eigen::Index>(relation.size()) != t_f) {
    throw ShapeMismatch("topk_aggregate: horizon mismatch");
  }
  const int k = t_f > 0 ? static_cast<int>(selection.front().size()) : 0;
  const Eigen::Index d = relation.front().cols();
  for (const auto& row : selection) {
    for (int a : row) probs.tape().note_branch(static_cast<std::uint64_t>(a + 1));
  }
  Matrix out = Matrix::Zero(t_f, k * (d + 1));
  for (Eigen::Index t = 0; t < t_f; ++t) {
    for (int s = 0; s < k; ++s) {
      const int a = selection[t][s];
      if (a < 0) continue;
      out.block(t, s * (d + 1), 1, d) = relation[t].value().row(a);
      out(t, s * (d + 1) + d) = probs.value()(t, a);
    }
  }
  std::vector<Var> inputs = relation;
  inputs.push_back(probs);
  Tape& tape = probs.tape();
  return tape.push(std::move(out), inputs, [probs, relation, selection, d](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (std::size_t ti = 0; ti < selection.size(); ++ti) {
      const auto row = static_cast<Eigen::Index>(ti);
      for (std::size_t s = 0; s < selection[ti].size(); ++s) {
        const int a = selection[ti][s];
        if (a < 0) continue;
        const auto col = static_cast<Eigen::Index>(s) * (d + 1);
        if (t.requires_grad(relation[ti].id())) {
          t.grad(relation[ti].id()).row(a) += g.block(row, col, 1, d);
        }
        if (t.requires_grad(probs.id())) t.grad(probs.id())(row, a) += g(row, col + d);
      }
    }
  });
}

Var pns_loss(Var probs, const Matrix& labels, const Mask& candidate_mask, PnsLossKind kind) {
  constexpr double kFloor = 1e-12;
  if (labels.rows() != probs.rows() || labels.cols() != probs.cols() ||
      static_cast<Eigen::Index>(candidate_mask.size()) != probs.cols()) {
    throw ShapeMismatch("pns_loss: shapes differ");
  }
  const Matrix& p = probs.value();
  Matrix dp = Matrix::Zero(p.rows(), p.cols());
  double loss = 0.0;
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    if (labels.row(t).sum() == 0.0) continue;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      if (!candidate_mask[c]) continue;
      const double y = labels(t, c);
      const double pos = p(t, c);
      const double neg = 1.0 - p(t, c);
      // Each log argument is floored at 1e-12 on its own, so a perfect
      // prediction costs exactly 0.
      const bool pos_live = pos > kFloor;
      const bool neg_live = neg > kFloor;
      probs.tape().note_branch((pos_live ? 1 : 0) | (neg_live ? 2 : 0));
      if (y > 0.0) {
        loss -= y * std::log(std::max(pos, kFloor));
        if (pos_live) dp(t, c) -= y / pos;
      }
      if (kind == PnsLossKind::kBinary && y < 1.0) {
        loss -= (1.0 - y) * std::log(std::max(neg, kFloor));
        if (neg_live) dp(t, c) += (1.0 - y) / neg;
      }
    }
  }
  Matrix value(1, 1);
  value(0, 0) = loss;
  return probs.tape().push(std::move(value), {probs}, [probs, dp](Tape& t, int self) {
    t.grad(probs.id()) += t.grad(self)(0, 0) * dp;
  });
}

Mask candidate_filter(const Scene& scene, const CandidateFilter& filter) {
  Mask mask = default_candidates(scene);
  const int s = scene.target_index;
  const Point here = scene.at(s, scene.t_h - 1);
  const Point prev = scene.at(s, scene.t_h - 2);
  const Point heading = here - prev;
  const bool moving = heading.x != 0.0 || heading.y != 0.0;
  const double fov = filter.fov_deg * std::numbers::pi / 180.0;
  for (int a = 0; a < scene.num_agents(); ++a) {
    if (!mask[a]) continue;
    int last = scene.t_h - 1;
    while (last >= 0 && !scene.present(a, last)) --last;
    const Point rel = scene.at(a, last) - here;
    if (std::sqrt(rel.x * rel.x + rel.y * rel.y) > filter.d_max) {
      mask[a] = 0;
      continue;
    }
    if (!moving || (rel.x == 0.0 && rel.y == 0.0)) continue;
    const double bearing = std::atan2(heading.x * rel.y - heading.y * rel.x,
                                      heading.x * rel.x + heading.y * rel.y);
    if (std::abs(bearing) > fov) mask[a] = 0;
  }
  return mask;
}

}  // namespace pns
