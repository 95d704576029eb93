#include "psr/data_synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "psr/base64.hpp"
#include "psr/errors.hpp"

namespace psr {

namespace fs = std::filesystem;
using json = nlohmann::json;

void GenConfig::validate() const {
  if (canvas < 32) throw ConfigError("canvas must be at least 32 pixels");
  if (num_ranks < 1) throw ConfigError("num_ranks must be positive");
  if (min_instances < 1 || min_instances > max_instances) throw ConfigError("invalid instance count range");
  if (max_instances > num_ranks) throw ConfigError("more instances than ranks (K > N)");
  if (min_size < 2 || min_size > max_size || max_size > canvas) throw ConfigError("invalid instance size range");
  if (min_contrast < 0.0 || min_contrast >= 1.0) throw ConfigError("min_contrast must lie in [0,1)");
  if (min_score_ratio < 1.0) throw ConfigError("min_score_ratio must be >= 1");
  if (max_retries < 1) throw ConfigError("max_retries must be positive");
}

double saliency_score(const Tensor& image, const BinaryMask& mask, const BinaryMask& background) {
  const int h = image.dim(1), w = image.dim(2);
  double inst[3] = {0, 0, 0}, back[3] = {0, 0, 0};
  double inst_n = 0, back_n = 0, cy = 0, cx = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x)) {
        for (int c = 0; c < 3; ++c) inst[c] += image.at(c, y, x);
        inst_n += 1;
        cy += y + 0.5;
        cx += x + 0.5;
      } else if (background.at(y, x)) {
        for (int c = 0; c < 3; ++c) back[c] += image.at(c, y, x);
        back_n += 1;
      }
    }
  }
  if (inst_n == 0) throw DataError("saliency_score: empty instance mask");
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double diff = inst[c] / inst_n - (back_n > 0 ? back[c] / back_n : 0.0);
    d2 += diff * diff;
  }
  const double contrast = std::sqrt(d2) / std::sqrt(3.0);
  const double area = inst_n / (static_cast<double>(h) * w);
  cy /= inst_n;
  cx /= inst_n;
  const double dist = std::hypot(cy - h / 2.0, cx - w / 2.0);
  const double proximity = 1.0 - dist / std::hypot(h / 2.0, w / 2.0);
  return contrast * area * proximity;
}

std::vector<int> ranks_from_scores(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> ranks(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r) + 1;
  return ranks;
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = base_seed * 0x9E3779B97F4A7C15ull + index + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

using Color = std::array<double, 3>;

double color_distance(const Color& a, const Color& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])) /
         std::sqrt(3.0);
}

BinaryMask draw_shape(int canvas, bool ellipse, int x0, int y0, int w, int h) {
  BinaryMask m(canvas, canvas);
  const double cx = x0 + w / 2.0, cy = y0 + h / 2.0;
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      if (ellipse) {
        const double dx = (x + 0.5 - cx) / (w / 2.0), dy = (y + 0.5 - cy) / (h / 2.0);
        if (dx * dx + dy * dy > 1.0) continue;
      }
      m.at(y, x) = 1;
    }
  }
  return m;
}

// True if `m` touches `occupied` or any of its 8-neighbours.
bool collides(const BinaryMask& m, const BinaryMask& occupied) {
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < m.height && xx >= 0 && xx < m.width && occupied.at(yy, xx)) return true;
        }
    }
  }
  return false;
}

double to_float32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

SceneSample generate_scene(const GenConfig& config, std::uint64_t seed) {
  config.validate();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = config.canvas;

  // K is fixed per seed so the score-separation retries do not bias it.
  const int k = std::uniform_int_distribution<int>(config.min_instances, config.max_instances)(rng);
  for (int scene_try = 0; scene_try < config.max_retries; ++scene_try) {
    Color base;
    for (double& c : base) c = 0.15 + 0.7 * unit(rng);
    const double fx = 0.1 + 0.3 * unit(rng), fy = 0.1 + 0.3 * unit(rng), phase = 6.283185307179586 * unit(rng);

    SceneSample s;
    s.seed = seed;
    s.image = Tensor({3, n, n});
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double texture = 0.04 * std::sin(fx * x + fy * y + phase);
        for (int c = 0; c < 3; ++c) {
          s.image.at(c, y, x) = std::clamp(base[c] + texture + 0.03 * (unit(rng) - 0.5), 0.0, 1.0);
        }
      }

    BinaryMask occupied(n, n);
    std::vector<Color> colors;
    for (int i = 0; i < k; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
        std::uniform_int_distribution<int> size(config.min_size, config.max_size);
        const int w = size(rng), h = size(rng);
        const bool ellipse = unit(rng) < 0.5;
        const int x0 = std::uniform_int_distribution<int>(0, n - w)(rng);
        const int y0 = std::uniform_int_distribution<int>(0, n - h)(rng);
        BinaryMask m = draw_shape(n, ellipse, x0, y0, w, h);
        if (m.area() == 0 || collides(m, occupied)) continue;

        Color color{};
        bool color_ok = false;
        for (int ctry = 0; ctry < config.max_retries && !color_ok; ++ctry) {
          for (double& c : color) c = unit(rng);
          color_ok = color_distance(color, base) >= config.min_contrast;
          for (const Color& other : colors) color_ok = color_ok && color_distance(color, other) >= 0.25;
        }
        if (!color_ok) continue;

        for (int y = 0; y < n; ++y)
          for (int x = 0; x < n; ++x) {
            if (!m.at(y, x)) continue;
            occupied.at(y, x) = 1;
            for (int c = 0; c < 3; ++c) s.image.at(c, y, x) = color[c];
          }
        colors.push_back(color);
        s.instances.push_back({std::move(m), 0});
        placed = true;
      }
      if (!placed) {
        throw GenerationError("could not place instance " + std::to_string(i) + " after " +
                              std::to_string(config.max_retries) + " attempts (seed " + std::to_string(seed) + ")");
      }
    }
    for (double& v : s.image.values()) v = to_float32(v);

    BinaryMask background(n, n);
    for (std::size_t p = 0; p < background.pixels(); ++p) background.data[p] = occupied.data[p] ? 0 : 1;
    std::vector<double> scores;
    for (const SceneInstance& inst : s.instances) scores.push_back(saliency_score(s.image, inst.mask, background));
    std::vector<double> sorted = scores;
    std::sort(sorted.rbegin(), sorted.rend());
    bool separated = true;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      separated = separated && sorted[i - 1] >= config.min_score_ratio * sorted[i];
    }
    if (!separated) continue;

    std::vector<int> ranks = ranks_from_scores(scores);
    for (std::size_t i = 0; i < ranks.size(); ++i) s.instances[i].rank = ranks[i];
    return s;
  }
  throw GenerationError("no scene met the score separation after " + std::to_string(config.max_retries) +
                        " attempts (seed " + std::to_string(seed) + ")");
}

std::vector<const SceneSample*> Dataset::split(const std::string& name) const {
  std::vector<const SceneSample*> out;
  for (const DatasetEntry& e : entries) {
    if (e.split == name) out.push_back(&e.sample);
  }
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "sample images are stored little-endian");

json image_to_json(const Tensor& image, ImageEncoding encoding) {
  const int h = image.dim(1), w = image.dim(2);
  if (encoding == ImageEncoding::kBase64) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w * 3 * sizeof(float));
    std::size_t off = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          const float f = static_cast<float>(image.at(c, y, x));
          std::memcpy(bytes.data() + off, &f, sizeof f);
          off += sizeof f;
        }
    return base64_encode(bytes);
  }
  json rows = json::array();
  for (int y = 0; y < h; ++y) {
    json row = json::array();
    for (int x = 0; x < w; ++x) {
      row.push_back({static_cast<float>(image.at(0, y, x)), static_cast<float>(image.at(1, y, x)),
                     static_cast<float>(image.at(2, y, x))});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor image_from_json(const json& j, int h, int w, const std::string& where) {
  Tensor image({3, h, w});
  if (j.is_string()) {
    auto bytes = base64_decode(j.get<std::string>());
    if (!bytes || bytes->size() != static_cast<std::size_t>(h) * w * 3 * sizeof(float)) {
      throw LoadError(where + ": image payload is not " + std::to_string(h) + "x" + std::to_string(w) +
                      " float32 triplets");
    }
    std::size_t off = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          float f;
          std::memcpy(&f, bytes->data() + off, sizeof f);
          off += sizeof f;
          image.at(c, y, x) = f;
        }
    return image;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != h) throw LoadError(where + ": image rows do not match canvas");
  for (int y = 0; y < h; ++y) {
    const json& row = j[y];
    if (!row.is_array() || static_cast<int>(row.size()) != w) throw LoadError(where + ": image row width mismatch");
    for (int x = 0; x < w; ++x) {
      if (!row[x].is_array() || row[x].size() != 3) throw LoadError(where + ": pixel is not an RGB triplet");
      for (int c = 0; c < 3; ++c) image.at(c, y, x) = static_cast<float>(row[x][c].get<double>());
    }
  }
  return image;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir, ImageEncoding encoding) {
  std::error_code ec;
  fs::create_directories(dir / "samples", ec);
  if (ec) throw std::runtime_error("cannot create dataset directory " + (dir / "samples").string() + ": " + ec.message());
  json manifest;
  manifest["version"] = kDatasetVersion;
  manifest["num_ranks"] = dataset.num_ranks;
  manifest["canvas"] = {{"height", dataset.height}, {"width", dataset.width}};
  manifest["count"] = dataset.entries.size();
  json refs = json::array();
  for (const DatasetEntry& e : dataset.entries) {
    const std::string file = "samples/" + e.id + ".json";
    refs.push_back({{"id", e.id}, {"file", file}, {"split", e.split}});
    json sample;
    sample["seed"] = e.sample.seed;
    sample["image"] = image_to_json(e.sample.image, encoding);
    json instances = json::array();
    for (const SceneInstance& inst : e.sample.instances) {
      instances.push_back({{"rle", rle_encode(inst.mask)}, {"rank", inst.rank}});
    }
    sample["instances"] = std::move(instances);
    write_text(dir / file, sample.dump() + "\n");
  }
  manifest["samples"] = std::move(refs);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json manifest = read_json(manifest_path);
  Dataset ds;
  try {
    if (manifest.at("version").get<std::string>() != kDatasetVersion) {
      throw LoadError(manifest_path.string() + ": unsupported version " + manifest.at("version").dump());
    }
    ds.num_ranks = manifest.at("num_ranks").get<int>();
    ds.height = manifest.at("canvas").at("height").get<int>();
    ds.width = manifest.at("canvas").at("width").get<int>();
    const std::size_t count = manifest.at("count").get<std::size_t>();
    const json& refs = manifest.at("samples");
    if (!refs.is_array() || refs.size() != count) {
      throw LoadError(manifest_path.string() + ": count " + std::to_string(count) + " does not match " +
                      std::to_string(refs.size()) + " sample references");
    }
    std::size_t on_disk = 0;
    if (fs::is_directory(dir / "samples")) {
      for (const auto& f : fs::directory_iterator(dir / "samples")) on_disk += f.path().extension() == ".json";
    }
    if (on_disk != count) {
      throw LoadError(manifest_path.string() + ": count " + std::to_string(count) + " but " +
                      std::to_string(on_disk) + " sample files present");
    }
    for (const json& ref : refs) {
      DatasetEntry e;
      e.id = ref.at("id").get<std::string>();
      e.split = ref.at("split").get<std::string>();
      const fs::path path = dir / ref.at("file").get<std::string>();
      const std::string where = "sample " + e.id + " (" + path.string() + ")";
      json sample = read_json(path);
      try {
        e.sample.seed = sample.at("seed").get<std::uint64_t>();
        e.sample.image = image_from_json(sample.at("image"), ds.height, ds.width, where);
        for (const json& inst : sample.at("instances")) {
          SceneInstance si;
          si.rank = inst.at("rank").get<int>();
          if (si.rank < 1 || si.rank > ds.num_ranks) throw LoadError(where + ": rank out of range");
          if (!rle_decode(inst.at("rle").get<std::vector<int>>(), ds.height, ds.width, si.mask)) {
            throw LoadError(where + ": corrupt RLE mask");
          }
          e.sample.instances.push_back(std::move(si));
        }
      } catch (const json::exception& ex) {
        throw LoadError(where + ": " + ex.what());
      }
      ds.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw LoadError(manifest_path.string() + ": " + ex.what());
  }
  return ds;
}

}  // namespace psr
