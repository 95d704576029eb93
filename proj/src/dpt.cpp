#include "psr/dpt.hpp"

#include <algorithm>
#include <string>

#include "psr/errors.hpp"

namespace psr {

void DptConfig::validate() const {
  if (layers < 0 || conv_layers < 0) throw ConfigError("DPT layer counts must be non-negative");
  if (heads < 1 || channels % heads != 0) {
    throw ConfigError("DPT heads (" + std::to_string(heads) + ") must divide E (" + std::to_string(channels) + ")");
  }
  if (gn_groups < 1 || channels % gn_groups != 0) {
    throw ConfigError("DPT gn_groups (" + std::to_string(gn_groups) + ") must divide E (" +
                      std::to_string(channels) + ")");
  }
}

CgrParams make_cgr(ParameterSet& set, const DptConfig& config, Rng& rng) {
  config.validate();
  CgrParams p;
  for (int i = 0; i < config.conv_layers; ++i) {
    const std::string name = "cgr" + std::to_string(i);
    p.convs.push_back(make_conv(set, name + ".conv", config.channels, config.channels, 3, rng));
    p.norms.push_back(make_norm(set, name + ".gn", config.channels));
  }
  return p;
}

DptParams make_dpt(ParameterSet& set, const DptConfig& config, Rng& rng) {
  config.validate();
  const int e = config.channels;
  DptParams p;
  for (int i = 0; i < config.layers; ++i) {
    const std::string name = "dpt" + std::to_string(i);
    DptLayerParams layer;
    layer.row_column.row = make_mhsa(set, name + ".row", e, rng);
    layer.row_column.column = make_mhsa(set, name + ".column", e, rng);
    layer.row_column.norm = make_norm(set, name + ".rc_gn", e);
    layer.cross_scale.attn = make_mhsa(set, name + ".cross", e, rng);
    layer.cross_scale.norm = make_norm(set, name + ".cs_gn", e);
    layer.clcg.conv1 = make_conv(set, name + ".clcg1", e, e, 3, rng);
    layer.clcg.conv2 = make_conv(set, name + ".clcg2", e, e, 3, rng);
    layer.clcg.norm = make_norm(set, name + ".clcg_gn", e);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

PyramidFeatures cgr(const PyramidFeatures& g, const CgrParams& params, const DptConfig& config) {
  PyramidFeatures out = g;
  for (FeatureGrid& grid : out.grids) {
    for (std::size_t i = 0; i < params.convs.size(); ++i) {
      grid.data = relu(apply_norm(apply_conv(grid.data, params.convs[i]), params.norms[i], config.gn_groups));
    }
  }
  return out;
}

Var row_attention(const Var& x, const MhsaParams& params, int heads, PairCounter* counter) {
  Var rows = permute(x, {1, 2, 0});  // H x W x E
  return add(x, permute(mhsa(rows, params, heads, counter), {2, 0, 1}));
}

Var column_attention(const Var& x, const MhsaParams& params, int heads, PairCounter* counter) {
  Var cols = permute(x, {2, 1, 0});  // W x H x E
  return add(x, permute(mhsa(cols, params, heads, counter), {2, 1, 0}));
}

FeatureGrid row_column_attention(const FeatureGrid& f, const RowColumnParams& params, const DptConfig& config,
                                 PairCounter* counter) {
  Var r = row_attention(f.data, params.row, config.heads, counter);
  Var rc = column_attention(r, params.column, config.heads, counter);
  return {f.scale_index, apply_norm(rc, params.norm, config.gn_groups)};
}

PyramidFeatures cross_scale_attention(const PyramidFeatures& p, const CrossScaleParams& params,
                                      const DptConfig& config, PairCounter* counter) {
  if (p.size() == 0) throw ConfigError("cross-scale attention needs at least one scale");
  int mh = 0, mw = 0;
  for (const FeatureGrid& g : p.grids) {
    mh = std::max(mh, g.data.dim(1));
    mw = std::max(mw, g.data.dim(2));
  }
  const int s = static_cast<int>(p.size());
  const int e = p.grids.front().data.dim(0);
  std::vector<Var> up;
  for (const FeatureGrid& g : p.grids) up.push_back(interpolate(g.data, mh, mw));
  Var seq = reshape(permute(stack(up), {2, 3, 0, 1}), {mh * mw, s, e});
  Var attended = permute(reshape(mhsa(seq, params.attn, config.heads, counter), {mh, mw, s, e}), {2, 3, 0, 1});
  PyramidFeatures out;
  for (int i = 0; i < s; ++i) {
    const Var& orig = p.grids[i].data;
    Var back = interpolate(select(attended, i), orig.dim(1), orig.dim(2));
    out.grids.push_back({p.grids[i].scale_index, apply_norm(add(back, orig), params.norm, config.gn_groups)});
  }
  return out;
}

PyramidFeatures clcg(const PyramidFeatures& f, const ClcgParams& params, const DptConfig& config) {
  PyramidFeatures out;
  for (const FeatureGrid& g : f.grids) {
    Var inner = apply_conv(leaky_relu(apply_conv(g.data, params.conv1), config.leaky_slope), params.conv2);
    out.grids.push_back({g.scale_index, apply_norm(add(inner, g.data), params.norm, config.gn_groups)});
  }
  return out;
}

PyramidFeatures dpt_layer(const PyramidFeatures& f, const DptLayerParams& params, const DptConfig& config,
                          PairCounter* counter) {
  PyramidFeatures rc;
  for (const FeatureGrid& g : f.grids) rc.grids.push_back(row_column_attention(g, params.row_column, config, counter));
  return clcg(cross_scale_attention(rc, params.cross_scale, config, counter), params.clcg, config);
}

PyramidFeatures dpt_forward(const PyramidFeatures& f, const DptConfig& config, const DptParams& params,
                            PairCounter* counter) {
  PyramidFeatures x = f;
  for (const DptLayerParams& layer : params.layers) x = dpt_layer(x, layer, config, counter);
  return x;
}

PyramidFeatures all_scale_attention(const PyramidFeatures& p, const CrossScaleParams& params,
                                    const DptConfig& config, PairCounter* counter) {
  if (p.size() == 0) throw ConfigError("all-scale attention needs at least one scale");
  std::vector<Var> tokens;
  for (const FeatureGrid& g : p.grids) {
    const Shape& s = g.data.shape();
    tokens.push_back(permute(reshape(g.data, {s[0], s[1] * s[2]}), {1, 0}));  // cells x E
  }
  Var attended = mhsa(concat(tokens), params.attn, config.heads, counter);
  PyramidFeatures out;
  int offset = 0;
  for (const FeatureGrid& g : p.grids) {
    const Shape& s = g.data.shape();
    const int cells = s[1] * s[2];
    std::vector<int> rows(cells);
    for (int i = 0; i < cells; ++i) rows[i] = offset + i;
    offset += cells;
    Var back = reshape(permute(gather_rows(attended, rows), {1, 0}), s);
    out.grids.push_back({g.scale_index, apply_norm(add(back, g.data), params.norm, config.gn_groups)});
  }
  return out;
}

PairCountReport count_attention_pairs(std::int64_t S, std::int64_t H, std::int64_t W) {
  if (S < 1 || H < 1 || W < 1) throw ConfigError("pair counts need S, H, W >= 1");
  PairCountReport r;
  r.S = S;
  r.H = H;
  r.W = W;
  r.dpt_pairs = S * H * W * W + S * H * H * W + S * S * H * W;
  r.all_scale_pairs = (S * H * W) * (S * H * W);
  return r;
}

PairCountReport measure_attention_pairs(int S, int H, int W, std::uint64_t seed) {
  DptConfig config;
  config.channels = 4;
  config.heads = 1;
  config.gn_groups = 1;
  config.layers = 1;
  config.conv_layers = 0;
  ParameterSet set;
  Rng rng(seed);
  DptParams dpt = make_dpt(set, config, rng);
  PyramidFeatures p;
  for (int s = 0; s < S; ++s) p.grids.push_back({s, Var(normal_tensor({config.channels, H, W}, 1.0, rng))});

  NoGradGuard no_grad;
  PairCounter dpt_counter;
  PyramidFeatures rc;
  for (const FeatureGrid& g : p.grids) {
    rc.grids.push_back(row_column_attention(g, dpt.layers[0].row_column, config, &dpt_counter));
  }
  cross_scale_attention(rc, dpt.layers[0].cross_scale, config, &dpt_counter);

  PairCounter all_counter;
  all_scale_attention(p, dpt.layers[0].cross_scale, config, &all_counter);

  PairCountReport r;
  r.S = S;
  r.H = H;
  r.W = W;
  r.dpt_pairs = static_cast<std::int64_t>(dpt_counter.pairs);
  r.all_scale_pairs = static_cast<std::int64_t>(all_counter.pairs);
  return r;
}

}  // namespace psr
