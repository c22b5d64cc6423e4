#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pns/errors.hpp"
#include "pns/grad_check.hpp"
#include "pns/layers.hpp"
#include "pns/params.hpp"

using namespace pns;
using namespace pns::nn;

namespace {

Matrix rand_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Weighted sum so that every output coordinate carries a distinct gradient.
Var project(Tape& tape, Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, tape.constant(rand_matrix(rng, y.rows(), y.cols()))));
}

}  // namespace

TEST_CASE("mlp examples") {
  ParamStore store;
  const Mlp mlp = Mlp::create(store, "m", {2, 3, 2});
  for (auto& p : store) p.value.setZero();
  Tape tape;
  const Var y = mlp(tape, store, tape.constant(Matrix::Random(4, 2)));
  CHECK(y.value().isZero());

  ParamStore id_store;
  const Mlp id = Mlp::create(id_store, "id", {2, 2});
  id_store[static_cast<std::size_t>(id.layers[0].weight)].value = Matrix::Identity(2, 2);
  id_store[static_cast<std::size_t>(id.layers[0].bias)].value.setZero();
  Tape t2;
  Matrix x(1, 2);
  x << 1, 2;
  CHECK(id(t2, id_store, t2.constant(x)).value() == x);
}

TEST_CASE("linear map gradient is exact to roundoff") {
  std::mt19937_64 rng(1);
  const auto r = grad_check(
      [](Tape& t, std::span<const Var> in) { return project(t, linear(in[0], in[1], in[2]), 3); },
      {rand_matrix(rng, 3, 4), rand_matrix(rng, 4, 2), rand_matrix(rng, 1, 2)});
  CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("mlp parameter gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    ParamStore store;
    const Mlp mlp = Mlp::create(store, "m", {3, 5, 2});
    store.init_glorot(rng);
    const Matrix x = rand_matrix(rng, 4, 3);
    const auto r = grad_check_params(store, [&](Tape& t) {
      return project(t, mlp(t, store, t.constant(x)), seed);
    });
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("gru examples") {
  ParamStore store;
  const GruCell cell = GruCell::create(store, "g", 3, 4);
  for (auto& p : store) p.value.setZero();
  Tape tape;
  const Var h = cell.step(tape, store, tape.constant(Matrix::Random(2, 3)),
                          tape.constant(Matrix::Zero(2, 4)));
  CHECK(h.value().isZero());

  std::mt19937_64 rng(5);
  store.init_glorot(rng);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    const Var hn = cell.step(t, store, t.constant(rand_matrix(rng, 3, 3, 4.0)),
                             t.constant(Matrix::Zero(3, 4)));
    CHECK(hn.value().cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("gru gradients with a row mask") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Mask rows{1, 0, 1};
    const auto r = grad_check(
        [&](Tape& t, std::span<const Var> in) {
          return project(t, gru_step(in[0], in[1], in[2], in[3], in[4], rows), seed);
        },
        {rand_matrix(rng, 3, 2), rand_matrix(rng, 3, 4), rand_matrix(rng, 2, 12),
         rand_matrix(rng, 4, 12), rand_matrix(rng, 1, 12)});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("softmax examples") {
  Eigen::VectorXd a(3);
  a << 1, 1, 1;
  const auto pa = softmax(a);
  for (int i = 0; i < 3; ++i) CHECK(pa(i) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  Eigen::VectorXd b(2);
  b << 0, std::log(2.0);
  const auto pb = softmax(b);
  CHECK(pb(0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(pb(1) == doctest::Approx(2.0 / 3).epsilon(1e-14));
  Eigen::VectorXd c(3);
  c << 5, 9, 5;
  const auto pc = softmax(c, {1, 0, 1});
  CHECK(pc(0) == 0.5);
  CHECK(pc(1) == 0.0);
  CHECK(pc(2) == 0.5);
  CHECK_THROWS_AS(softmax(c, {0, 0, 0}), AllMasked);
  Eigen::VectorXd big(2);
  big << 1000, 1001;
  const auto pbig = softmax(big);
  CHECK(std::isfinite(pbig(0)));
  CHECK(pbig.sum() == doctest::Approx(1.0));
}

TEST_CASE("softmax is a simplex under random masks") {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution bit(0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + trial % 9;
    Eigen::VectorXd logits = rand_matrix(rng, n, 1, 30.0);
    Mask mask(n);
    for (auto& m : mask) m = bit(rng);
    mask[static_cast<std::size_t>(trial % n)] = 1;
    const auto p = softmax(logits, mask);
    double total = 0;
    for (int i = 0; i < n; ++i) {
      if (!mask[i]) {
        CHECK(p(i) == 0.0);
      } else {
        CHECK(p(i) > 0.0);
      }
      total += p(i);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax rows gradients") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Mask cols{1, 0, 1, 1};
    const Mask per_row{1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 1};
    const auto r = grad_check(
        [&](Tape& t, std::span<const Var> in) {
          return add(project(t, softmax_rows(in[0], cols), seed),
                     project(t, softmax_rows_masked(in[0], per_row), seed + 1));
        },
        {rand_matrix(rng, 3, 4, 3.0)});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("attention examples") {
  std::mt19937_64 rng(2);
  Tape t;
  const Matrix v = rand_matrix(rng, 1, 3);
  const Var single =
      scaled_dot_attention(t.constant(rand_matrix(rng, 4, 2)), t.constant(rand_matrix(rng, 1, 2)),
                           t.constant(v));
  for (int i = 0; i < 4; ++i) CHECK((single.value().row(i) - v).norm() < 1e-15);

  Matrix keys(3, 2);
  keys.rowwise() = rand_matrix(rng, 1, 2).row(0);
  const Matrix values = rand_matrix(rng, 3, 3);
  const Var same = scaled_dot_attention(t.constant(rand_matrix(rng, 2, 2)), t.constant(keys),
                                        t.constant(values));
  const Eigen::RowVectorXd mean = values.colwise().mean();
  for (int i = 0; i < 2; ++i) CHECK((same.value().row(i) - mean).norm() < 1e-12);
}

TEST_CASE("attention gradients") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Mask keys{1, 1, 0, 1, 0};
    const auto r = grad_check(
        [&](Tape& t, std::span<const Var> in) {
          return project(t, scaled_dot_attention(in[0], in[1], in[2], keys), seed);
        },
        {rand_matrix(rng, 3, 4), rand_matrix(rng, 5, 4), rand_matrix(rng, 5, 2)});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("self-attention block") {
  std::mt19937_64 rng(7);
  ParamStore store;
  const auto block = SelfAttentionBlock::create(store, "sa", 4);
  store.init_glorot(rng);
  const Matrix& wv = store[static_cast<std::size_t>(block.wv)].value;

  SUBCASE("single agent adds its own value projection") {
    Tape t;
    const Matrix h = rand_matrix(rng, 1, 4);
    const Var out = block(t, store, t.constant(h), {1});
    CHECK((out.value() - (h + h * wv)).norm() < 1e-12);
  }
  SUBCASE("masked agent passes through unchanged") {
    Tape t;
    const Matrix h = rand_matrix(rng, 3, 4);
    const Var out = block(t, store, t.constant(h), {1, 0, 1});
    CHECK(out.value().row(1) == h.row(1));
  }
  SUBCASE("permutation equivariance and masked-slot invariance") {
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + trial % 5;
      const Matrix h = rand_matrix(rng, n, 4);
      Mask present(n, 1);
      present[static_cast<std::size_t>(trial % n)] = trial % 3 == 0 ? 0 : 1;
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix hp(n, 4);
      Mask pp(n);
      for (int i = 0; i < n; ++i) {
        hp.row(i) = h.row(perm[i]);
        pp[i] = present[perm[i]];
      }
      Tape t;
      const Matrix a = block(t, store, t.constant(h), present).value();
      const Matrix b = block(t, store, t.constant(hp), pp).value();
      for (int i = 0; i < n; ++i) CHECK((b.row(i) - a.row(perm[i])).norm() < 1e-12);

      // Values stored in masked rows never leak into present rows.
      Matrix junk = h;
      for (int i = 0; i < n; ++i) {
        if (!present[i]) junk.row(i).setConstant(1e6);
      }
      const Matrix c = block(t, store, t.constant(junk), present).value();
      for (int i = 0; i < n; ++i) {
        if (present[i]) CHECK((c.row(i) - a.row(i)).norm() < 1e-12);
      }
    }
  }
  SUBCASE("gradients") {
    const Matrix h = rand_matrix(rng, 4, 4);
    const auto r = grad_check_params(store, [&](Tape& t) {
      return project(t, block(t, store, t.constant(h), {1, 1, 0, 1}), 4);
    });
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("elementwise op gradients") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto r = grad_check(
        [&](Tape& t, std::span<const Var> in) {
          Var a = in[0], b = in[1];
          Var y = add(mul(sigmoid(a), tanh(b)), elu_plus_one(sub(a, b), 1e-3));
          y = add(y, scale(relu(a), 0.7));
          y = concat_cols({y, transpose(reshape(a, 2, 3))});
          y = concat_rows({y, slice_rows(y, 0, 1),
                           repeat_rows(concat_cols({slice_rows(b, 1, 1), slice_rows(a, 0, 1)}), 2)});
          y = mask_rows(gather_rows(y, {2, -1, 0, 3, 1}), {1, 1, 0, 1, 1});
          y = add_row(y, slice_rows(y, 4, 1));
          return project(t, matmul(y, transpose(y)), seed);
        },
        {rand_matrix(rng, 3, 2), rand_matrix(rng, 3, 2)});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("grad_check catches a corrupted gradient") {
  auto broken = [](Tape& t, std::span<const Var> in) {
    const Var x = in[0];
    // Square with a pullback that is off by a factor of 1.5.
    Var y = t.push(x.value().array().square().matrix(), {x}, [x](Tape& tape, int self) {
      tape.grad(x.id()) += (3.0 * x.value().array() * tape.grad(self).array()).matrix();
    });
    return sum(y);
  };
  std::mt19937_64 rng(1);
  CHECK(grad_check(broken, {rand_matrix(rng, 2, 2)}).max_rel_error > 1e-2);
}

TEST_CASE("parameter store") {
  ParamStore store;
  store.add("a.w", 3, 4);
  store.add("a.b", 1, 4);
  CHECK_THROWS_AS(store.add("a.w", 1, 1), Error);
  CHECK(store.scalar_count() == 16);
  std::mt19937_64 rng(1);
  store.init_glorot(rng);
  const double bound = std::sqrt(6.0 / 7.0);
  CHECK(store[0].value.cwiseAbs().maxCoeff() <= bound);
  CHECK(store[0].value.cwiseAbs().maxCoeff() > 0.0);
  CHECK(store[1].value.isZero());
  for (const auto& p : store) {
    CHECK(p.grad.rows() == p.value.rows());
    CHECK(p.grad.cols() == p.value.cols());
  }

  ParamStore copy;
  copy.add("a.w", 3, 4);
  copy.add("a.b", 1, 4);
  copy.load_json(store.to_json());
  CHECK(copy[0].value == store[0].value);

  ParamStore other;
  other.add("a.w", 4, 3);
  other.add("a.b", 1, 4);
  CHECK_THROWS_AS(other.load_json(store.to_json()), ShapeMismatch);
}
