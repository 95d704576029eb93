#pragma once

#include <string>

#include "psr/ops.hpp"
#include "psr/parameters.hpp"

namespace psr {

struct ConvParams {
  Var weight;  // Co x Ci x k x k
  Var bias;    // Co
};

struct NormParams {
  Var gamma;
  Var beta;
};

ConvParams make_conv(ParameterSet& set, const std::string& name, int cin, int cout, int k, Rng& rng);
NormParams make_norm(ParameterSet& set, const std::string& name, int channels);
MhsaParams make_mhsa(ParameterSet& set, const std::string& name, int width, Rng& rng);

inline Var apply_conv(const Var& x, const ConvParams& p, int stride = 1) {
  return conv2d(x, p.weight, p.bias, stride);
}

inline Var apply_norm(const Var& x, const NormParams& p, int groups) {
  return group_norm(x, groups, p.gamma, p.beta);
}

}  // namespace psr
