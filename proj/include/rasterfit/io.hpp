#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rasterfit/image.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

struct LoadedImage {
  Image rgb;                   // H x W x 3 in [0, 1]
  std::optional<Image> alpha;  // H x W x 1 when the file carries alpha
};

/// Decodes PNG (8- or 16-bit, any color type) or JPEG. Gray inputs are
/// replicated to RGB. An 8-bit value v maps to v / 255.
LoadedImage load_image(const std::filesystem::path& path);

/// Writes 1 (gray), 3 (RGB), or 4 (RGBA) channel images; values are clamped
/// to [0, 1] and rounded. `bit_depth` is 8 or 16.
void save_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

/// RGB plus a separate alpha joined into one RGBA image.
Image with_alpha(const Image& rgb, const Image& alpha);

/// Numbered frames: every .png in `dir`, sorted by file name.
std::vector<Image> load_frames(const std::filesystem::path& dir);

/// Resolves template specs: "builtin:disk", "builtin:square", "builtin:ring"
/// (64 x 64 white shapes), or an image path (alpha channel = mask).
std::vector<PrimitiveTemplate> load_templates(const std::vector<std::string>& specs);

// ---------------------------------------------------------------------------
// Scene files
//
// Little-endian binary, self-contained:
//   magic "RFSCENE\0", u32 version,
//   i32 canvas_w, i32 canvas_h, f32 alpha_max, f32 mu_blend,
//   u8 preserve_aspect, u8 background kind, f32 background rgb[3],
//   u32 template count, per template: i32 w, i32 h, u64 FNV-1a of the
//     texel bytes, f32 rgba[w*h*4],
//   u32 primitive count, per primitive: f32 x, y, s, theta, nu, c_var[3],
//     u32 template_id, u32 z,
//   u64 FNV-1a of every preceding byte.

inline constexpr std::uint32_t kSceneFormatVersion = 1;

std::vector<unsigned char> encode_scene(const Scene& scene);
Scene decode_scene(const std::vector<unsigned char>& bytes);

void save_scene(const std::filesystem::path& path, const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

}  // namespace rasterfit
