#include "psr/parameters.hpp"

#include <cmath>

#include "psr/errors.hpp"

namespace psr {

Var ParameterSet::add(std::string name, Tensor init) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  Var v(std::move(init), /*requires_grad=*/true);
  params_.push_back({std::move(name), v});
  return v;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.var.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.var.zero_grad();
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor conv_init(int cout, int cin, int k, Rng& rng) {
  return normal_tensor({cout, cin, k, k}, std::sqrt(2.0 / (cin * k * k)), rng);
}

Tensor xavier_init(int in, int out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (in + out));
  Tensor t({in, out});
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace psr
