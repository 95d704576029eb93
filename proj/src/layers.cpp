#include "psr/layers.hpp"

namespace psr {

ConvParams make_conv(ParameterSet& set, const std::string& name, int cin, int cout, int k, Rng& rng) {
  ConvParams p;
  p.weight = set.add(name + ".weight", conv_init(cout, cin, k, rng));
  p.bias = set.add(name + ".bias", Tensor({cout}, 0.0));
  return p;
}

NormParams make_norm(ParameterSet& set, const std::string& name, int channels) {
  return {set.add(name + ".gamma", Tensor({channels}, 1.0)),
          set.add(name + ".beta", Tensor({channels}, 0.0))};
}

MhsaParams make_mhsa(ParameterSet& set, const std::string& name, int width, Rng& rng) {
  MhsaParams p;
  p.wq = set.add(name + ".wq", xavier_init(width, width, rng));
  p.wk = set.add(name + ".wk", xavier_init(width, width, rng));
  p.wv = set.add(name + ".wv", xavier_init(width, width, rng));
  p.wo = set.add(name + ".wo", xavier_init(width, width, rng));
  p.bq = set.add(name + ".bq", Tensor({width}, 0.0));
  p.bk = set.add(name + ".bk", Tensor({width}, 0.0));
  p.bv = set.add(name + ".bv", Tensor({width}, 0.0));
  p.bo = set.add(name + ".bo", Tensor({width}, 0.0));
  return p;
}

}  // namespace psr
