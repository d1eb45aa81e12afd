#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rasterfit/error.hpp"

namespace rasterfit {

/// Learnable state of one primitive. Positions and scale are in canvas
/// pixels; pixel (px, py) is sampled at its center (px + 0.5, py + 0.5).
struct PrimitiveParams {
  float x = 0.0f;
  float y = 0.0f;
  float s = 1.0f;      // half-extent
  float theta = 0.0f;  // radians, never wrapped
  float nu = 0.0f;     // opacity logit
  std::array<float, 3> c_var{};  // color logits
  std::uint32_t template_id = 0;
  std::uint32_t z = 0;  // depth rank, 0 = front-most

  friend bool operator==(const PrimitiveParams&, const PrimitiveParams&) = default;
};

/// RGBA raster asset. Alpha is the mask, RGB the template's own color.
struct PrimitiveTemplate {
  int width = 0;
  int height = 0;
  std::vector<float> rgba;  // row-major, 4 floats per texel

  PrimitiveTemplate() = default;
  PrimitiveTemplate(int w, int h)
      : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4, 0.0f) {}

  float texel(int u, int v, int channel) const noexcept {
    return rgba[(static_cast<std::size_t>(v) * width + u) * 4 + channel];
  }
  float& texel(int u, int v, int channel) noexcept {
    return rgba[(static_cast<std::size_t>(v) * width + u) * 4 + channel];
  }

  friend bool operator==(const PrimitiveTemplate&, const PrimitiveTemplate&) = default;
};

enum class BackgroundKind : std::uint8_t { Solid = 0, Noise = 1 };

struct BackgroundPolicy {
  BackgroundKind kind = BackgroundKind::Solid;
  std::array<float, 3> color{1.0f, 1.0f, 1.0f};

  friend bool operator==(const BackgroundPolicy&, const BackgroundPolicy&) = default;
};

struct Scene {
  std::vector<PrimitiveParams> primitives;
  std::vector<PrimitiveTemplate> templates;
  int canvas_w = 0;
  int canvas_h = 0;
  BackgroundPolicy background;
  float alpha_max = 1.0f;
  float mu_blend = 0.0f;
  // Divide v by s * (H_t / W_t) so non-square templates keep their aspect.
  bool preserve_aspect = false;

  std::size_t size() const noexcept { return primitives.size(); }

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Throws Error naming the first violated invariant and primitive index.
void validate_scene(const Scene& scene);

/// Per-template vertical aspect factor applied to v (1 unless preserve_aspect).
float aspect_factor(const Scene& scene, const PrimitiveParams& p);

/// Primitive indices sorted front-to-back (ascending z).
std::vector<std::uint32_t> front_to_back_order(const Scene& scene);

// ---------------------------------------------------------------------------
// Conservative footprint

/// Inclusive pixel rectangle; empty when x0 > x1 or y0 > y1.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;

  bool empty() const noexcept { return x0 > x1 || y0 > y1; }
  int width() const noexcept { return empty() ? 0 : x1 - x0 + 1; }
  int height() const noexcept { return empty() ? 0 : y1 - y0 + 1; }
  bool contains(int x, int y) const noexcept {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Half side of the axis-aligned square that bounds the primitive under any
/// rotation, plus padding.
float conservative_radius(const Scene& scene, const PrimitiveParams& p,
                          float padding);

/// Pixels whose centers fall inside the conservative square, clipped to the
/// canvas.
PixelRect conservative_bbox(const Scene& scene, const PrimitiveParams& p,
                            float padding);

// ---------------------------------------------------------------------------
// Parameter packing

enum class ParamGroup : int { X = 0, Y, S, Theta, Nu, C };

struct ParamLayout {
  static constexpr std::size_t kStride = 8;  // x, y, s, theta, nu, c0, c1, c2

  std::size_t num_primitives = 0;

  std::size_t size() const noexcept { return num_primitives * kStride; }
  static std::size_t offset(std::size_t primitive, std::size_t slot) noexcept {
    return primitive * kStride + slot;
  }
  static ParamGroup group_of_slot(std::size_t slot) noexcept {
    return slot < 5 ? static_cast<ParamGroup>(slot) : ParamGroup::C;
  }

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

struct PackedParams {
  std::vector<float> values;
  ParamLayout layout;
};

PackedParams pack_params(const Scene& scene);

/// Writes the flat vector back into `scene`. Template ids and depth ranks
/// are structural and kept from `scene`.
void unpack_params(std::span<const float> values, const ParamLayout& layout,
                   Scene& scene);

/// Stable 64-bit hash of everything that affects rendering.
std::uint64_t scene_fingerprint(const Scene& scene);

/// FNV-1a over a byte range.
std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

inline float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }
inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline float logit(float p) { return std::log(p / (1.0f - p)); }

}  // namespace rasterfit
