#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rasterfit/image.hpp"
#include "rasterfit/rng.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

// ---------------------------------------------------------------------------
// Template preprocessing

/// Separable Gaussian blur of all four channels. The kernel is truncated at
/// radius ceil(3 sigma) and renormalized over the taps that fall inside the
/// template, so constant channels stay constant up to the border.
PrimitiveTemplate gaussian_blur_template(const PrimitiveTemplate& t, float sigma);

/// Multiplies alpha by 0.5 * (1 + cos(pi * min(r, 1))), r being the distance
/// from the template center over the smaller half extent.
PrimitiveTemplate radial_falloff(const PrimitiveTemplate& t);

/// Surrounds the template with `texels` of fully transparent border, e.g.
/// ceil(3 sigma) before blurring so the halo does not reach the edge, where
/// zero padding would cut it off.
PrimitiveTemplate pad_template(const PrimitiveTemplate& t, int texels);

/// Builds a template from an RGB(A) image; a missing alpha channel is opaque.
PrimitiveTemplate template_from_image(const Image& rgb, const Image* alpha = nullptr);

/// Procedural assets for tests and demos. Each shape is antialiased over
/// one texel and leaves a transparent border.
PrimitiveTemplate make_disk_template(int size, const std::array<float, 3>& rgb = {1, 1, 1});
PrimitiveTemplate make_square_template(int size, const std::array<float, 3>& rgb = {1, 1, 1},
                                       float fill = 1.0f);
PrimitiveTemplate make_ring_template(int size, const std::array<float, 3>& rgb = {1, 1, 1});
PrimitiveTemplate make_constant_template(int width, int height, float alpha,
                                         const std::array<float, 3>& rgb = {1, 1, 1});

// ---------------------------------------------------------------------------
// Structure-aware initialization

/// Normalized local variance in [0, 1].
struct VarianceMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Windowed per-channel variance (clipped at the borders) averaged over RGB,
/// then min-max normalized. A constant target yields all zeros.
VarianceMap local_variance_map(const Image& target, int window = 7);

struct InitOptions {
  std::size_t num_primitives = 100;
  float s_min = 2.0f;
  float s_max = 20.0f;
  float v_init_bias = -4.0f;
  float std_c_init = 0.02f;
  int variance_window = 7;
  float base_prob = 0.1f;
  int density_cap = 100;
  std::uint32_t num_templates = 1;
};

/// Draws primitives whose centers follow 0.1 + 0.9 * NLV over the pixel
/// lattice, optionally restricted to a support mask.
///
/// Per primitive the stream is consumed in a fixed order: lattice cell,
/// template id, theta, then three color normals.
class StructureSampler {
 public:
  StructureSampler(const Image& target, const InitOptions& options,
                   const Image* support_alpha = nullptr);

  /// Fresh parameters for one primitive. `z` and `template_id` are set by
  /// the caller when they must be kept.
  PrimitiveParams draw(Rng& rng);

  /// As draw(), but rejecting cells that already hold density_cap centers.
  PrimitiveParams draw_capped(Rng& rng);

  const VarianceMap& variance() const noexcept { return nlv_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::size_t sample_cell(Rng& rng) const;
  PrimitiveParams make_params(std::size_t cell, Rng& rng) const;
  void rebuild_cdf();

  const Image* target_;
  InitOptions options_;
  VarianceMap nlv_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
  std::vector<int> occupancy_;
};

/// Scene with z equal to sampling order. Throws InfeasibleDensity when the
/// cap cannot hold N centers.
Scene structure_aware_init(const Image& target, std::vector<PrimitiveTemplate> templates,
                           const InitOptions& options, Rng& rng,
                           const Image* support_alpha = nullptr);

/// Uniform positions and scales; c_var ~ 0.02 * N(0, 1).
Scene random_init(int canvas_w, int canvas_h, std::vector<PrimitiveTemplate> templates,
                  const InitOptions& options, Rng& rng);

}  // namespace rasterfit
