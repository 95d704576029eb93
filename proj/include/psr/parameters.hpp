#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "psr/autograd.hpp"

namespace psr {

/// A named trainable leaf. Its gradient has the tensor's shape from creation.
struct Parameter {
  std::string name;
  Var var;
};

using Rng = std::mt19937_64;

/// Ordered registry of a model's parameters. Names are unique.
class ParameterSet {
 public:
  Var add(std::string name, Tensor init);

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  const Parameter* find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

Tensor normal_tensor(Shape shape, double stddev, Rng& rng);
/// He-normal init for a Co x Ci x k x k kernel.
Tensor conv_init(int cout, int cin, int k, Rng& rng);
/// Xavier-uniform init for an in x out matrix.
Tensor xavier_init(int in, int out, Rng& rng);

}  // namespace psr
