#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rasterfit/image.hpp"
#include "rasterfit/rng.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

// ---------------------------------------------------------------------------
// Per-sample geometry

template <typename T>
struct PrimCoord {
  T u;
  T v;
};

/// Canvas point to normalized primitive coordinates:
///   u = ( cos t * dx + sin t * dy) / s
///   v = (-sin t * dx + cos t * dy) / (s * aspect)
/// with (dx, dy) the offset from the primitive center.
template <typename T>
PrimCoord<T> canvas_to_prim(T x, T y, T px, T py, T s, T theta, T aspect = T(1)) {
  using std::cos;
  using std::sin;
  const T dx = x - px;
  const T dy = y - py;
  const T c = cos(theta);
  const T sn = sin(theta);
  return {(c * dx + sn * dy) / s, (-sn * dx + c * dy) / (s * aspect)};
}

inline PrimCoord<float> canvas_to_prim(float x, float y, const PrimitiveParams& p,
                                       float aspect = 1.0f) {
  return canvas_to_prim<float>(x, y, p.x, p.y, p.s, p.theta, aspect);
}

/// Normalized coordinates to continuous texel coordinates.
template <typename T>
PrimCoord<T> prim_to_texel(T u, T v, int width, int height) {
  return {(u + T(1)) / T(2) * T(width - 1), (v + T(1)) / T(2) * T(height - 1)};
}

/// Bilinear cell lookup. Returns false outside [0, W-1] x [0, H-1].
/// The cell is floor-based; on the last lattice line the cell to the left
/// (or above) is used with weight 1.
template <typename T>
bool bilinear_cell(int width, int height, T U, T V, int& u0, int& v0, T& wu, T& wv) {
  if (!(U >= T(0) && V >= T(0) && U <= T(width - 1) && V <= T(height - 1))) {
    return false;
  }
  u0 = static_cast<int>(U);
  v0 = static_cast<int>(V);
  if (u0 > width - 2) u0 = width - 2;
  if (v0 > height - 2) v0 = height - 2;
  wu = U - T(u0);
  wv = V - T(v0);
  return true;
}

/// Bilinearly sampled RGBA with partial derivatives along U and V.
template <typename T>
struct TexelSample {
  std::array<T, 4> value{};
  std::array<T, 4> d_du{};
  std::array<T, 4> d_dv{};
};

/// Samples channels [first, last) of the template. Zero padding outside.
template <typename T>
bool sample_texels(const PrimitiveTemplate& t, T U, T V, TexelSample<T>& out,
                   int first = 0, int last = 4) {
  int u0, v0;
  T wu, wv;
  if (!bilinear_cell(t.width, t.height, U, V, u0, v0, wu, wv)) {
    out = {};
    return false;
  }
  const std::size_t row = static_cast<std::size_t>(t.width) * 4;
  const float* p00 = t.rgba.data() + (static_cast<std::size_t>(v0) * t.width + u0) * 4;
  const float* p01 = p00 + 4;
  const float* p10 = p00 + row;
  const float* p11 = p10 + 4;
  for (int c = first; c < last; ++c) {
    const T a = p00[c], b = p01[c], d = p10[c], e = p11[c];
    const T top = a + wu * (b - a);
    const T bottom = d + wu * (e - d);
    out.value[c] = top + wv * (bottom - top);
    out.d_du[c] = (T(1) - wv) * (b - a) + wv * (e - d);
    out.d_dv[c] = bottom - top;
  }
  return true;
}

/// Single-channel bilinear sample with zero padding.
float sample_bilinear(const PrimitiveTemplate& t, float U, float V, int channel);

/// alpha = alpha_max * sigmoid(nu) * m
inline float primitive_alpha(float nu, float m, float alpha_max) {
  return alpha_max * sigmoid(nu) * m;
}

/// c = mu * c_org + (1 - mu) * sigmoid(c_var), per channel.
inline std::array<float, 3> blend_color(const std::array<float, 3>& c_var,
                                        const std::array<float, 3>& c_org,
                                        float mu_blend) {
  std::array<float, 3> out;
  for (int c = 0; c < 3; ++c) {
    out[c] = mu_blend * c_org[c] + (1.0f - mu_blend) * sigmoid(c_var[c]);
  }
  return out;
}

/// Everything needed to evaluate one primitive at a canvas point, hoisted
/// out of the per-pixel loop.
template <typename T>
struct Placement {
  T cx, cy;
  T cos_t, sin_t;
  T inv_s, inv_sv;  // 1/s and 1/(s * aspect)
  T half_w, half_h;  // (W-1)/2 and (H-1)/2
  T opacity;         // alpha_max * sigmoid(nu)
  std::array<T, 3> var_color;  // (1 - mu) * sigmoid(c_var)
  const PrimitiveTemplate* tmpl;

  PrimCoord<T> to_texel(T x, T y) const {
    const T dx = x - cx;
    const T dy = y - cy;
    const T u = (cos_t * dx + sin_t * dy) * inv_s;
    const T v = (-sin_t * dx + cos_t * dy) * inv_sv;
    return {(u + T(1)) * half_w, (v + T(1)) * half_h};
  }
};

template <typename T>
Placement<T> make_placement(const Scene& scene, const PrimitiveParams& p) {
  using std::cos;
  using std::sin;
  Placement<T> pl;
  const auto& t = scene.templates[p.template_id];
  pl.cx = static_cast<T>(p.x);
  pl.cy = static_cast<T>(p.y);
  pl.cos_t = cos(static_cast<T>(p.theta));
  pl.sin_t = sin(static_cast<T>(p.theta));
  pl.inv_s = T(1) / static_cast<T>(p.s);
  pl.inv_sv = T(1) / (static_cast<T>(p.s) * static_cast<T>(aspect_factor(scene, p)));
  pl.half_w = T(t.width - 1) / T(2);
  pl.half_h = T(t.height - 1) / T(2);
  pl.opacity = static_cast<T>(scene.alpha_max) / (T(1) + std::exp(-static_cast<T>(p.nu)));
  const T keep = T(1) - static_cast<T>(scene.mu_blend);
  for (int c = 0; c < 3; ++c) {
    pl.var_color[c] = keep / (T(1) + std::exp(-static_cast<T>(p.c_var[c])));
  }
  pl.tmpl = &t;
  return pl;
}

// ---------------------------------------------------------------------------
// Background

/// Per-pixel background color b used by I = C + T_N * b.
class Backdrop {
 public:
  static Backdrop solid(const std::array<float, 3>& rgb);
  static Backdrop image(Image rgb);

  std::array<float, 3> at(int x, int y) const {
    if (!image_) return color_;
    return {image_->at(x, y, 0), image_->at(x, y, 1), image_->at(x, y, 2)};
  }
  bool is_solid() const noexcept { return image_ == nullptr; }
  const std::array<float, 3>& color() const noexcept { return color_; }

 private:
  std::array<float, 3> color_{1.0f, 1.0f, 1.0f};
  std::shared_ptr<const Image> image_;
};

/// w x h x 3 image with i.i.d. uniform [0,1) channels. Each call advances
/// the stream, so successive iterations see fresh noise.
Image noisy_background(int width, int height, Rng& rng);

// ---------------------------------------------------------------------------
// Tiling and forward pass

inline constexpr int kDefaultTileSize = 32;
inline constexpr float kDefaultSkipEpsilon = 1.0f / 1024.0f;

/// 2 px plus three blur standard deviations.
inline float default_tile_padding(float blur_sigma) { return 2.0f + 3.0f * blur_sigma; }

struct TileBins {
  int tile_size = kDefaultTileSize;
  float padding = 0.0f;
  int tiles_x = 0;
  int tiles_y = 0;
  int canvas_w = 0;
  int canvas_h = 0;
  std::vector<std::vector<std::uint32_t>> lists;  // per tile, ascending z

  std::size_t tile_count() const noexcept { return lists.size(); }
  PixelRect tile_rect(std::size_t tile) const;
  std::size_t tile_of(int x, int y) const noexcept {
    return static_cast<std::size_t>(y / tile_size) * tiles_x + x / tile_size;
  }
};

TileBins bin_tiles(const Scene& scene, int tile_size = kDefaultTileSize,
                   float padding = default_tile_padding(1.0f));

template <typename T>
struct BasicRenderOutput {
  BasicImage<T> color;  // H x W x 3
  BasicImage<T> alpha;  // H x W x 1, equals 1 - T_N
};
using RenderOutput = BasicRenderOutput<float>;

/// One recorded contribution of a primitive to a pixel.
struct Contribution {
  std::uint32_t primitive;
  std::uint32_t slot;  // position of the primitive in its tile's list
  float alpha;
  float transmittance;  // T_k, light reaching this layer
  std::array<float, 3> color;
  float mask;
  float U;
  float V;
};

/// Per-pixel contribution lists cached by the forward pass, stored per tile.
struct SavedForward {
  struct TileRecord {
    std::vector<std::uint32_t> primitives;  // the tile's bin list
    std::vector<Contribution> entries;
    std::vector<std::uint32_t> offsets;  // tile pixels + 1, row-major in tile
  };

  std::uint64_t fingerprint = 0;
  int canvas_w = 0;
  int canvas_h = 0;
  int tile_size = 0;
  int tiles_x = 0;
  std::vector<TileRecord> tiles;
  Image final_transmittance;  // H x W x 1
  Image background;           // H x W x 3, b used at each pixel

  std::span<const Contribution> pixel(int x, int y) const;
  std::size_t total_entries() const;
};

struct RenderOptions {
  float skip_epsilon = kDefaultSkipEpsilon;
  int threads = 0;  // 0 = hardware concurrency
};

struct ForwardResult {
  RenderOutput output;
  std::optional<SavedForward> saved;
};

/// Tile-parallel front-to-back compositing.
ForwardResult render_forward(const Scene& scene, const TileBins& bins,
                             const Backdrop& backdrop, bool save,
                             const RenderOptions& options = {});

/// Bins with the given tile size and padding, then renders without saving.
RenderOutput render(const Scene& scene, const Backdrop& backdrop,
                    const RenderOptions& options = {},
                    int tile_size = kDefaultTileSize, float padding = 2.0f);

/// Sequential all-primitives-all-pixels reference. No binning, tiling, or
/// skip threshold.
RenderOutput render_naive(const Scene& scene, const Backdrop& backdrop);

/// Same loop in double precision, for finite-difference oracles.
BasicRenderOutput<double> render_naive_precise(const Scene& scene,
                                               const Backdrop& backdrop);

}  // namespace rasterfit
