#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rasterfit/config.hpp"
#include "rasterfit/fit.hpp"
#include "rasterfit/image.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

/// Per-pixel change flags between two consecutive frames.
struct DiffMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

/// True where max over channels of |prev - cur| exceeds tau.
DiffMask diff_mask(const Image& prev, const Image& cur, float tau = 2.0f / 255.0f);

/// A primitive is frozen iff its padded conservative bbox holds no changed
/// pixel. Use the same padding as tile binning.
std::vector<std::uint8_t> freeze_flags(const Scene& scene, const DiffMask& mask, float padding);

using StuckPolicy = StuckConfig;

/// Grid region (row-major index) containing a primitive center; centers
/// outside the canvas are clamped to the nearest region.
std::size_t stuck_region(const Scene& scene, const PrimitiveParams& p, const StuckPolicy& policy);

/// Per grid region, among non-frozen primitives centered there, finds large
/// (s >= tau_scale * canvas_w), opaque (alpha_max * sigmoid(nu) >= tau_alpha),
/// front-ordered primitives and multiplies the opacity logit of the K with
/// the highest s * alpha by eta.
///
/// Front-ness is the rank among the region's primitives ordered back to front
/// (back-most = 0); a primitive qualifies when rank >= zeta * (count - 1).
/// Returns decayed indices in ascending order.
std::vector<std::size_t> remove_stuck(Scene& scene, std::span<const std::uint8_t> frozen,
                                      const StuckPolicy& policy);

struct VideoResult {
  std::vector<Scene> scenes;
  std::vector<std::vector<IterationRecord>> histories;
  std::vector<double> frame_mse;  // evaluation render vs frame target
  std::vector<std::size_t> frozen_counts;
};

/// Seed used for the optimizer of frame f > 0.
std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame);

/// Frame 0 runs the full pipeline for video.initial_iterations; each later
/// frame warm-starts from the previous result for video.sequential_iterations,
/// with freeze flags computed once from the frame difference and stuck
/// removal at the policy's trigger iterations.
VideoResult optimize_video(std::span<const Image> frames, std::vector<PrimitiveTemplate> templates,
                           const FitConfig& config);

}  // namespace rasterfit
