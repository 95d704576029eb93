#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psr/mask.hpp"
#include "psr/tensor.hpp"

namespace psr {

struct SceneInstance {
  BinaryMask mask;
  int rank = 0;  // 1 = most salient

  friend bool operator==(const SceneInstance&, const SceneInstance&) = default;
};

struct SceneSample {
  Tensor image;  // 3 x H x W, values in [0,1], float32-representable
  std::vector<SceneInstance> instances;
  std::uint64_t seed = 0;

  int height() const { return image.dim(1); }
  int width() const { return image.dim(2); }

  friend bool operator==(const SceneSample&, const SceneSample&) = default;
};

struct GenConfig {
  int canvas = 64;
  int num_ranks = 3;      // N
  int min_instances = 1;  // K drawn uniformly from [min, max]
  int max_instances = 3;
  int min_size = 8;       // bounding-box extent in pixels
  int max_size = 26;
  double min_contrast = 0.3;
  /// Consecutive GT scores must differ by at least this factor; 1 disables.
  /// Near-ties would make the rank labels arbitrary.
  double min_score_ratio = 1.5;
  int max_retries = 100;

  void validate() const;
};

/// Ground-truth saliency of one instance:
///   contrast  = |mean instance color - mean background color| / sqrt(3)
///   area      = instance pixels / canvas pixels
///   proximity = 1 - |centroid - canvas center| / |corner - canvas center|
///   score     = contrast * area * proximity
/// The background is every pixel outside all instance masks.
double saliency_score(const Tensor& image, const BinaryMask& mask, const BinaryMask& background);

/// Ranks 1..K by descending score; ties go to the lower index.
std::vector<int> ranks_from_scores(const std::vector<double>& scores);

/// Deterministic given (config, seed). Throws GenerationError naming the
/// seed when placement fails `max_retries` times.
SceneSample generate_scene(const GenConfig& config, std::uint64_t seed);

/// Per-sample seed used by dataset generation.
std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index);

enum class ImageEncoding { kBase64, kArrays };

struct DatasetEntry {
  std::string id;
  std::string split;  // "train" or "test"
  SceneSample sample;
};

struct Dataset {
  int num_ranks = 0;
  int height = 0;
  int width = 0;
  std::vector<DatasetEntry> entries;

  std::vector<const SceneSample*> split(const std::string& name) const;
};

inline constexpr const char* kDatasetVersion = "psr-dataset/1";

/// Writes manifest.json and samples/<id>.json with sorted keys.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                  ImageEncoding encoding = ImageEncoding::kBase64);
/// Throws LoadError naming the offending file.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace psr
