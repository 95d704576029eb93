#include "psr/pyramid.hpp"

#include <cmath>
#include <string>

#include "psr/errors.hpp"

namespace psr {

int PyramidFeatures::cell_count() const {
  int n = 0;
  for (const FeatureGrid& g : grids) n += g.data.dim(1) * g.data.dim(2);
  return n;
}

void PyramidFeatures::validate(int channels, const std::vector<int>& sides) const {
  if (grids.size() != sides.size()) {
    throw ConfigError("pyramid has " + std::to_string(grids.size()) + " grids, config expects " +
                      std::to_string(sides.size()));
  }
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const Shape expected{channels, sides[i], sides[i]};
    if (grids[i].data.shape() != expected) {
      throw ConfigError("grid " + std::to_string(i) + " has shape " + shape_str(grids[i].data.shape()) +
                        ", expected " + shape_str(expected));
    }
    if (i > 0 && (grids[i].scale_index <= grids[i - 1].scale_index || sides[i] >= sides[i - 1])) {
      throw ConfigError("pyramid scales must be ordered with strictly decreasing sides");
    }
  }
}

EncoderParams make_encoder(ParameterSet& set, const EncoderConfig& config, Rng& rng) {
  EncoderParams p;
  int cin = 3;
  for (int s = 0; s < kEncoderStages; ++s) {
    const int cout = s == 0 ? config.stem_channels : config.channels;
    const std::string name = "encoder.stage" + std::to_string(s);
    p.convs.push_back(make_conv(set, name + ".conv", cin, cout, 3, rng));
    p.norms.push_back(make_norm(set, name + ".gn", cout));
    cin = cout;
  }
  return p;
}

int stage_for_side(int side, int image_h, int image_w) {
  int chosen = 0;
  for (int s = 0; s < kEncoderStages; ++s) {
    const int extent = std::min(image_h, image_w) >> (s + 1);
    if (extent >= side) chosen = s;
  }
  return chosen;
}

EncoderOutput encode(const Var& image, const EncoderParams& params, const EncoderConfig& config) {
  const Shape& shape = image.shape();
  if (shape.size() != 3 || shape[0] != 3) {
    throw DimensionError("encode: expects a 3 x H x W image, got " + shape_str(shape));
  }
  const int h = shape[1], w = shape[2];
  if (h % kEncoderStride != 0 || w % kEncoderStride != 0) {
    throw ConfigError("encode: image " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by the encoder stride " + std::to_string(kEncoderStride));
  }
  if (config.channels % config.gn_groups != 0 || config.stem_channels % config.gn_groups != 0) {
    throw ConfigError("encode: channel counts must be divisible by gn_groups");
  }
  EncoderOutput out;
  Var x = image;
  for (int s = 0; s < kEncoderStages; ++s) {
    x = relu(apply_norm(apply_conv(x, params.convs[s], 2), params.norms[s], config.gn_groups));
    out.stages.push_back(x);
  }
  for (std::size_t i = 0; i < config.grid_sides.size(); ++i) {
    const int side = config.grid_sides[i];
    const Var& src = out.stages[stage_for_side(side, h, w)];
    out.grids.grids.push_back({static_cast<int>(i), interpolate(src, side, side)});
  }
  out.grids.validate(config.channels, config.grid_sides);
  return out;
}

Tensor sinusoid_encoding(int channels, int side) {
  if (channels % 2 != 0) {
    throw ConfigError("positional encoding needs an even channel count, got " + std::to_string(channels));
  }
  const int half = channels / 2;
  const int freqs = (half + 1) / 2;
  std::vector<double> wavelength(freqs, 1.0);
  for (int k = 0; k < freqs && freqs > 1; ++k) {
    wavelength[k] = std::pow(1e4, static_cast<double>(k) / (freqs - 1));
  }
  auto value = [&](int c, int pos) {
    const double angle = pos / wavelength[c / 2];
    return c % 2 == 0 ? std::sin(angle) : std::cos(angle);
  };
  Tensor enc({channels, side, side});
  for (int c = 0; c < half; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        enc.at(c, y, x) = value(c, x);
        enc.at(half + c, y, x) = value(c, y);
      }
    }
  }
  return enc;
}

PositionalParams make_positional(ParameterSet& set, int channels, int scales) {
  PositionalParams p;
  for (int s = 0; s < scales; ++s) {
    p.scale_bias.push_back(set.add("posenc.scale" + std::to_string(s), Tensor({channels}, 0.0)));
  }
  return p;
}

PyramidFeatures add_positional_encoding(const PyramidFeatures& p, const PositionalParams& params) {
  if (params.scale_bias.size() < p.size()) {
    throw ConfigError("positional encoding configured for fewer scales than the pyramid has");
  }
  PyramidFeatures out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const FeatureGrid& g = p.grids[i];
    if (g.data.dim(1) != g.data.dim(2)) throw DimensionError("positional encoding expects square grids");
    Var enc(sinusoid_encoding(g.channels(), g.side()), false);
    out.grids.push_back({g.scale_index, add_channel_bias(add(g.data, enc), params.scale_bias[i])});
  }
  return out;
}

}  // namespace psr
