#include "rasterfit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

namespace rasterfit {

void validate_scene(const Scene& scene) {
  if (!(scene.alpha_max > 0.0f && scene.alpha_max <= 1.0f)) {
    throw Error(ErrorCode::InvalidConfig, "alpha_max must lie in (0, 1]");
  }
  if (!(scene.mu_blend >= 0.0f && scene.mu_blend <= 1.0f)) {
    throw Error(ErrorCode::InvalidConfig, "mu_blend must lie in [0, 1]");
  }
  if (scene.canvas_w <= 0 || scene.canvas_h <= 0) {
    throw Error(ErrorCode::InvalidConfig, "canvas dimensions must be positive");
  }
  if (scene.primitives.empty()) {
    throw Error(ErrorCode::EmptyScene, "scene has no primitives");
  }

  for (std::size_t t = 0; t < scene.templates.size(); ++t) {
    const auto& tmpl = scene.templates[t];
    if (tmpl.width < 2 || tmpl.height < 2 ||
        tmpl.rgba.size() != static_cast<std::size_t>(tmpl.width) * tmpl.height * 4) {
      throw Error(ErrorCode::BadChannelRange,
                  "template " + std::to_string(t) + " must be at least 2x2 RGBA");
    }
    for (float v : tmpl.rgba) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw Error(ErrorCode::BadChannelRange,
                    "template " + std::to_string(t) + " has a channel outside [0,1]");
      }
    }
  }

  const std::size_t n = scene.primitives.size();
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = scene.primitives[i];
    if (!(p.s > 0.0f) || !std::isfinite(p.s)) {
      throw Error(ErrorCode::InvalidScale, "scale must be positive", i);
    }
    if (p.template_id >= scene.templates.size()) {
      throw Error(ErrorCode::BadTemplateRef, "template id out of range", i);
    }
    if (p.z >= n || seen[p.z]) {
      throw Error(ErrorCode::NonPermutationZ, "z ranks must be a permutation of 0..N-1", i);
    }
    seen[p.z] = true;
  }
}

float aspect_factor(const Scene& scene, const PrimitiveParams& p) {
  if (!scene.preserve_aspect) return 1.0f;
  const auto& t = scene.templates[p.template_id];
  return static_cast<float>(t.height) / static_cast<float>(t.width);
}

std::vector<std::uint32_t> front_to_back_order(const Scene& scene) {
  const std::size_t n = scene.primitives.size();
  std::vector<std::uint32_t> order(n, static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t z = scene.primitives[i].z;
    if (z >= n || order[z] != n) {
      throw Error(ErrorCode::NonPermutationZ, "z ranks must be a permutation of 0..N-1", i);
    }
    order[z] = static_cast<std::uint32_t>(i);
  }
  return order;
}

float conservative_radius(const Scene& scene, const PrimitiveParams& p,
                          float padding) {
  const float extent = p.s * std::max(1.0f, aspect_factor(scene, p));
  return extent * std::numbers::sqrt2_v<float> + padding;
}

PixelRect conservative_bbox(const Scene& scene, const PrimitiveParams& p,
                            float padding) {
  const float r = conservative_radius(scene, p, padding);
  // Pixel centers px + 0.5 within [x - r, x + r].
  PixelRect rect;
  rect.x0 = std::max(0, static_cast<int>(std::ceil(p.x - r - 0.5f)));
  rect.y0 = std::max(0, static_cast<int>(std::ceil(p.y - r - 0.5f)));
  rect.x1 = std::min(scene.canvas_w - 1, static_cast<int>(std::floor(p.x + r - 0.5f)));
  rect.y1 = std::min(scene.canvas_h - 1, static_cast<int>(std::floor(p.y + r - 0.5f)));
  return rect;
}

PackedParams pack_params(const Scene& scene) {
  PackedParams out;
  out.layout.num_primitives = scene.primitives.size();
  out.values.resize(out.layout.size());
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const auto& p = scene.primitives[i];
    float* dst = out.values.data() + ParamLayout::offset(i, 0);
    dst[0] = p.x;
    dst[1] = p.y;
    dst[2] = p.s;
    dst[3] = p.theta;
    dst[4] = p.nu;
    dst[5] = p.c_var[0];
    dst[6] = p.c_var[1];
    dst[7] = p.c_var[2];
  }
  return out;
}

void unpack_params(std::span<const float> values, const ParamLayout& layout,
                   Scene& scene) {
  if (layout.num_primitives != scene.primitives.size() ||
      values.size() != layout.size()) {
    throw Error(ErrorCode::LayoutMismatch, "parameter vector does not match scene");
  }
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    auto& p = scene.primitives[i];
    const float* src = values.data() + ParamLayout::offset(i, 0);
    p.x = src[0];
    p.y = src[1];
    p.s = src[2];
    p.theta = src[3];
    p.nu = src[4];
    p.c_var = {src[5], src[6], src[7]};
  }
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t scene_fingerprint(const Scene& scene) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) { h = fnv1a(data, bytes, h); };
  mix(&scene.canvas_w, sizeof scene.canvas_w);
  mix(&scene.canvas_h, sizeof scene.canvas_h);
  mix(&scene.alpha_max, sizeof scene.alpha_max);
  mix(&scene.mu_blend, sizeof scene.mu_blend);
  const std::uint8_t aspect = scene.preserve_aspect ? 1 : 0;
  mix(&aspect, 1);
  for (const auto& p : scene.primitives) {
    const float vals[8] = {p.x, p.y, p.s, p.theta, p.nu, p.c_var[0], p.c_var[1], p.c_var[2]};
    mix(vals, sizeof vals);
    mix(&p.template_id, sizeof p.template_id);
    mix(&p.z, sizeof p.z);
  }
  for (const auto& t : scene.templates) {
    mix(&t.width, sizeof t.width);
    mix(&t.height, sizeof t.height);
    mix(t.rgba.data(), t.rgba.size() * sizeof(float));
  }
  return h;
}

}  // namespace rasterfit
