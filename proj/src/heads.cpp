#include "psr/heads.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "psr/errors.hpp"

namespace psr {

std::vector<CellOrigin> cell_origins(const std::vector<int>& sides) {
  std::vector<CellOrigin> out;
  for (int s = 0; s < static_cast<int>(sides.size()); ++s)
    for (int y = 0; y < sides[s]; ++y)
      for (int x = 0; x < sides[s]; ++x) out.push_back({s, y, x});
  return out;
}

int cell_index(const std::vector<int>& sides, const CellOrigin& o) {
  if (o.scale < 0 || o.scale >= static_cast<int>(sides.size())) throw DimensionError("cell_index: bad scale");
  const int side = sides[o.scale];
  if (o.y < 0 || o.y >= side || o.x < 0 || o.x >= side) throw DimensionError("cell_index: cell outside grid");
  int offset = 0;
  for (int s = 0; s < o.scale; ++s) offset += sides[s] * sides[s];
  return offset + o.y * side + o.x;
}

Var gather_cells(const std::vector<Var>& maps) {
  std::vector<Var> parts;
  for (const Var& m : maps) {
    const int c = m.dim(0);
    parts.push_back(permute(reshape(m, {c, m.dim(1) * m.dim(2)}), {1, 0}));
  }
  return concat(parts);
}

PartitionHeadParams make_partition_head(ParameterSet& set, int channels, int num_ranks, Rng& rng, double prior) {
  if (num_ranks < 1) throw ConfigError("partition head needs N >= 1");
  if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("partition prior must lie in (0,1)");
  PartitionHeadParams p;
  p.conv = make_conv(set, "partition", channels, num_ranks, 3, rng);
  p.conv.bias.mutable_value().fill(std::log(prior / (1.0 - prior)));
  return p;
}

Var partition_logits(const PyramidFeatures& f_hat, const PartitionHeadParams& params) {
  std::vector<Var> maps;
  for (const FeatureGrid& g : f_hat.grids) maps.push_back(apply_conv(g.data, params.conv));
  return gather_cells(maps);
}

Var partition_forward(const PyramidFeatures& f_hat, const PartitionHeadParams& params) {
  return sigmoid(partition_logits(f_hat, params));
}

MaskHeadParams make_mask_head(ParameterSet& set, const std::vector<int>& stage_channels, int channels, int mask_dim,
                              Rng& rng) {
  int total = 0;
  for (int c : stage_channels) total += c;
  MaskHeadParams p;
  p.fuse = make_conv(set, "mask.fuse", total, mask_dim, 1, rng);
  p.kernel = make_conv(set, "mask.kernel", channels, mask_dim, 3, rng);
  return p;
}

Var global_mask_features(const std::vector<Var>& encoder_stages, int image_h, int image_w,
                         const MaskHeadParams& params) {
  const int h = image_h / 4, w = image_w / 4;
  std::vector<Var> resized;
  for (const Var& s : encoder_stages) resized.push_back(interpolate(s, h, w));
  return apply_conv(concat(resized), params.fuse);
}

Var mask_kernels(const PyramidFeatures& f_hat, const MaskHeadParams& params) {
  std::vector<Var> maps;
  for (const FeatureGrid& g : f_hat.grids) maps.push_back(apply_conv(g.data, params.kernel));
  return gather_cells(maps);
}

Var dynamic_mask_logits(const Var& kernels, const Var& global_map, const std::vector<int>& rows) {
  const int d = global_map.dim(0), h = global_map.dim(1), w = global_map.dim(2);
  if (kernels.dim(1) != d) {
    throw DimensionError("dynamic masks: kernel width " + std::to_string(kernels.dim(1)) + " vs map depth " +
                         std::to_string(d));
  }
  Var k = gather_rows(kernels, rows);
  Var logits = matmul(k, reshape(global_map, {d, h * w}));
  return reshape(logits, {static_cast<int>(rows.size()), h, w});
}

Var dynamic_masks(const Var& kernels, const Var& global_map, const std::vector<int>& rows) {
  return sigmoid(dynamic_mask_logits(kernels, global_map, rows));
}

Var mask_forward(const PyramidFeatures& f_hat, const std::vector<Var>& encoder_stages, int image_h, int image_w,
                 const MaskHeadParams& params) {
  Var kernels = mask_kernels(f_hat, params);
  std::vector<int> all(kernels.dim(0));
  for (int i = 0; i < kernels.dim(0); ++i) all[i] = i;
  return dynamic_masks(kernels, global_mask_features(encoder_stages, image_h, image_w, params), all);
}

std::vector<double> scale_boundaries(const AssignConfig& config, int image_side) {
  const std::size_t s = config.sides.size();
  if (s == 0) throw ConfigError("assignment needs at least one scale");
  if (!config.boundaries.empty()) {
    if (config.boundaries.size() != s + 1) throw ConfigError("scale boundaries must have one entry per scale plus one");
    if (!std::is_sorted(config.boundaries.begin(), config.boundaries.end())) {
      throw ConfigError("scale boundaries must be increasing");
    }
    return config.boundaries;
  }
  if (!(config.min_object > 0.0) || config.min_object >= image_side) {
    throw ConfigError("min_object must lie in (0, image side)");
  }
  std::vector<double> b(s + 1);
  const double ratio = std::log(image_side / config.min_object);
  for (std::size_t k = 0; k <= s; ++k) b[k] = config.min_object * std::exp(ratio * static_cast<double>(k) / s);
  return b;
}

int scale_for_size(double sqrt_area, const std::vector<double>& b) {
  const int s = static_cast<int>(b.size()) - 1;
  for (int k = 0; k < s; ++k) {
    if (sqrt_area < b[k + 1]) return k;
  }
  return s - 1;
}

namespace {

// Cell containing coordinate c on an axis of `extent` pixels split into
// `side` cells; exact boundaries go to the lower cell.
int cell_along(double c, int extent, int side) {
  const double u = c * side / extent;
  int i = static_cast<int>(std::floor(u));
  if (u == std::floor(u) && i > 0) --i;
  return std::clamp(i, 0, side - 1);
}

}  // namespace

CellTargets assign_targets(const SceneSample& sample, const AssignConfig& config) {
  const int h = sample.height(), w = sample.width();
  const std::vector<double> bounds = scale_boundaries(config, std::min(h, w));
  int total = 0;
  for (int s : config.sides) total += s * s;
  CellTargets t;
  t.instance.assign(total, -1);

  // Most salient first, so conflicts resolve toward lower ranks.
  std::vector<int> order(sample.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sample.instances[a].rank < sample.instances[b].rank; });

  for (int i : order) {
    const BinaryMask& m = sample.instances[i].mask;
    double area = 0, sy = 0, sx = 0;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m.at(y, x)) {
          area += 1;
          sy += y + 0.5;
          sx += x + 0.5;
        }
    if (area == 0) throw DataError("assign_targets: instance " + std::to_string(i) + " has an empty mask");
    const int scale = scale_for_size(std::sqrt(area), bounds);
    const int side = config.sides[scale];
    const CellOrigin o{scale, cell_along(sy / area, h, side), cell_along(sx / area, w, side)};
    const int cell = cell_index(config.sides, o);
    if (t.instance[cell] == -1) t.instance[cell] = i;
  }
  for (int c = 0; c < total; ++c) {
    if (t.instance[c] >= 0) {
      t.positive_cells.push_back(c);
      t.positive_instances.push_back(t.instance[c]);
    }
  }
  return t;
}

}  // namespace psr
