#include "pns/params.hpp"

#include <cmath>

#include "pns/errors.hpp"

namespace pns::nn {

int ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (by_name_.count(name)) throw Error("duplicate parameter name '" + name + "'");
  params_.push_back({name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  const int idx = static_cast<int>(params_.size()) - 1;
  by_name_[name] = idx;
  return idx;
}

int ParamStore::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParamStore::init_glorot(std::mt19937_64& rng) {
  for (auto& p : params_) {
    if (p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".b") == 0) {
      p.value.setZero();
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) p.value(r, c) = u(rng);
    }
  }
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : params_) {
    std::vector<double> values(p.value.data(), p.value.data() + p.value.size());
    list.push_back({{"name", p.name},
                    {"rows", p.value.rows()},
                    {"cols", p.value.cols()},
                    {"order", "column-major"},
                    {"values", std::move(values)}});
  }
  return {{"format", "pns-params"}, {"version", 1}, {"params", std::move(list)}};
}

void ParamStore::load_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pns-params" || doc.value("version", 0) != 1) {
    throw Error("unsupported parameter archive");
  }
  const auto& list = doc.at("params");
  if (list.size() != params_.size()) {
    throw ShapeMismatch("parameter archive holds " + std::to_string(list.size()) +
                        " arrays, model expects " + std::to_string(params_.size()));
  }
  for (const auto& entry : list) {
    const std::string name = entry.at("name").get<std::string>();
    if (!contains(name)) throw ShapeMismatch("unexpected parameter '" + name + "'");
    Param& p = params_[index(name)];
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto values = entry.at("values").get<std::vector<double>>();
    if (rows != p.value.rows() || cols != p.value.cols() ||
        static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw ShapeMismatch("parameter '" + name + "' has mismatched shape");
    }
    p.value = Eigen::Map<const Matrix>(values.data(), rows, cols);
  }
}

GradBuffer::GradBuffer(const ParamStore& store) {
  grads_.reserve(store.size());
  for (const auto& p : store) grads_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
}

void GradBuffer::zero() {
  for (auto& g : grads_) g.setZero();
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
}

void GradBuffer::scale(double s) {
  for (auto& g : grads_) g *= s;
}

double GradBuffer::squared_norm() const {
  double n = 0.0;
  for (const auto& g : grads_) n += g.squaredNorm();
  return n;
}

}  // namespace pns::nn
