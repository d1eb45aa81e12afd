#pragma once

#include <vector>

#include "rasterfit/image.hpp"
#include "rasterfit/rng.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

struct RandomSceneSpec {
  int min_primitives = 1;
  int max_primitives = 8;
  int min_canvas = 16;
  int max_canvas = 48;
  float blur_sigma = 1.0f;
  int template_size = 16;
  bool vary_blend = true;  // random alpha_max and mu_blend
};

/// Random valid scene: blurred procedural templates (disk, square, ring)
/// with random colors, primitives placed inside the canvas, random solid
/// background.
Scene random_scene(Rng& rng, const RandomSceneSpec& spec = {});

/// Uniform random RGB image.
Image random_image(int width, int height, Rng& rng);

/// Smooth color field plus a few hard-edged shapes; a stand-in natural image.
Image pattern_image(int width, int height, std::uint64_t seed);

/// Textured disk on black with its binary alpha (radius = 0.3 * size).
struct MaskedTarget {
  Image rgb;
  Image alpha;
};
MaskedTarget disk_mask_target(int size, std::uint64_t seed);

/// Axis-aligned square, inclusive pixel bounds.
struct SquareState {
  int x0;
  int y0;
  int side;
  std::array<float, 3> color;
  bool covers(int x, int y) const {
    return x >= x0 && x < x0 + side && y >= y0 && y < y0 + side;
  }
};

/// Square positions for frame f of the moving-square video.
SquareState moving_square_state(int width, int height, int frame);

/// Static textured backdrop with a solid square moving right by a few
/// pixels per frame.
std::vector<Image> moving_square_video(int width, int height, int frames);

}  // namespace rasterfit
