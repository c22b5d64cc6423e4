#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pns/autodiff.hpp"

namespace pns::nn {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Named parameter arrays with same-shaped gradient accumulators.
class ParamStore {
 public:
  // Throws pns::Error on duplicate names.
  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  int index(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const;
  void zero_grad();

  // Arrays named "*.b" are biases and start at 0; everything else draws from
  // U(-sqrt(6 / (rows + cols)), +sqrt(6 / (rows + cols))).
  void init_glorot(std::mt19937_64& rng);

  // Named-array archive: {"format":"pns-params","version":1,"params":[...]}.
  nlohmann::json to_json() const;
  // Loads values into an identically shaped store. Throws ShapeMismatch.
  void load_json(const nlohmann::json& doc);

 private:
  std::vector<Param> params_;
  std::map<std::string, int> by_name_;
};

// Gradient storage aligned with a ParamStore, used for per-scene accumulation.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamStore& store);

  void zero();
  void add(const GradBuffer& other);
  void scale(double s);
  double squared_norm() const;
  std::size_t size() const { return grads_.size(); }
  Matrix& operator[](std::size_t i) { return grads_[i]; }
  const Matrix& operator[](std::size_t i) const { return grads_[i]; }

 private:
  std::vector<Matrix> grads_;
};

}  // namespace pns::nn
