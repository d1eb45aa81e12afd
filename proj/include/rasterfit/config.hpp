#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rasterfit/scene.hpp"

namespace rasterfit {

enum class InitMode { StructureAware, Random };
enum class LossKind { Mse, SpatialConstrained, Combined };

struct LrGains {
  float x = 10.0f;
  float y = 10.0f;
  float s = 10.0f;
  float nu = 1.5f;
  float theta = 1.0f;
  float c = 1.0f;

  float for_slot(std::size_t slot) const noexcept;
};

struct ReinitConfig {
  bool enabled = false;
  float threshold = 0.3f;
  int period = 50;
  int warmup = 199;
  int tail_skip = 50;
};

struct StuckConfig {
  bool enabled = false;
  int grid_rows = 4;
  int grid_cols = 4;
  int per_region = 4;
  float tau_scale = 0.1f;
  float tau_alpha = 0.7f;
  float zeta = 0.7f;
  float eta = 0.3f;
  std::vector<int> trigger_epochs{20, 45, 70};
};

struct VideoConfig {
  std::filesystem::path frames_dir;
  int initial_iterations = 300;
  int sequential_iterations = 100;
  bool freeze_unchanged = true;
  float tau_diff = 2.0f / 255.0f;
  StuckConfig stuck;
};

/// Everything a fit run needs. Defaults follow the common hyperparameter
/// table; keys in the text format use the same names.
struct FitConfig {
  // Inputs and outputs (resolved relative to the config file).
  std::filesystem::path target;
  std::filesystem::path target_alpha;  // optional separate mask image
  std::vector<std::string> templates{"builtin:disk"};
  std::filesystem::path output_dir = "out";

  // Optimization
  int num_iterations = 300;
  float base_lr = 0.1f;
  LrGains gains;
  bool decay_enabled = true;
  float decay_final_fraction = 0.1f;

  // Loss
  LossKind loss = LossKind::Mse;
  float mse_weight = 1.0f;
  float gray_l1_weight = 0.0f;
  float alpha_weight = 0.3f;

  // Rendering
  bool gaussian_blur = true;
  float blur_sigma = 1.0f;
  bool radial_transparency = false;
  float alpha_max = 1.0f;
  float mu_blend = 0.0f;
  bool preserve_aspect = false;
  BackgroundPolicy background;
  int tile_size = 32;
  float skip_epsilon = 1.0f / 1024.0f;

  // Initialization
  InitMode init = InitMode::StructureAware;
  std::size_t num_primitives = 1000;
  float s_min = 2.0f;
  float s_max = 20.0f;
  float v_init_bias = -4.0f;
  float std_c_init = 0.02f;
  int variance_window = 7;
  float variance_base_prob = 0.1f;
  int max_prims_per_pixel = 100;

  ReinitConfig reinit;
  VideoConfig video;

  std::uint64_t seed = 0;
  int threads = 0;
  int log_every = 0;   // print progress every k iterations (0 = silent)
  int dump_every = 0;  // write an intermediate PNG every k iterations

  /// Throws InvalidConfig when an invariant is violated.
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys throw
/// UnknownKey. Relative paths are resolved against `base_dir`.
FitConfig parse_config(const std::string& text,
                       const std::filesystem::path& base_dir = {});

/// Reads and parses a config file. Missing files throw IoError.
FitConfig load_config(const std::filesystem::path& path);

/// All recognized keys, in documentation order.
const std::vector<std::string>& config_keys();

}  // namespace rasterfit
