#include "rasterfit/synth.hpp"

#include <cmath>
#include <numbers>

#include "rasterfit/prep.hpp"

namespace rasterfit {

namespace {

std::array<float, 3> random_rgb(Rng& rng) {
  return {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
          static_cast<float>(rng.uniform())};
}

}  // namespace

Scene random_scene(Rng& rng, const RandomSceneSpec& spec) {
  Scene scene;
  const auto span = [&](int lo, int hi) {
    return lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
  };
  scene.canvas_w = span(spec.min_canvas, spec.max_canvas);
  scene.canvas_h = span(spec.min_canvas, spec.max_canvas);
  scene.background.color = random_rgb(rng);
  if (spec.vary_blend) {
    scene.alpha_max = static_cast<float>(rng.uniform(0.5, 1.0));
    scene.mu_blend = rng.uniform() < 0.5 ? 0.0f : static_cast<float>(rng.uniform(0.0, 0.8));
  }

  const int size = spec.template_size;
  const int pad = static_cast<int>(std::ceil(3.0f * spec.blur_sigma));
  std::vector<PrimitiveTemplate> raw{make_disk_template(size, random_rgb(rng)),
                                     make_square_template(size, random_rgb(rng)),
                                     make_ring_template(size, random_rgb(rng))};
  for (auto& t : raw) {
    scene.templates.push_back(gaussian_blur_template(pad_template(t, pad), spec.blur_sigma));
  }

  const int n = span(spec.min_primitives, spec.max_primitives);
  const float min_side = static_cast<float>(std::min(scene.canvas_w, scene.canvas_h));
  for (int i = 0; i < n; ++i) {
    PrimitiveParams p;
    p.x = static_cast<float>(rng.uniform(0.0, scene.canvas_w));
    p.y = static_cast<float>(rng.uniform(0.0, scene.canvas_h));
    p.s = static_cast<float>(rng.uniform(3.0, std::max(4.0, min_side / 3.0)));
    p.theta = static_cast<float>(rng.uniform(0.0, 2.0 * std::numbers::pi));
    p.nu = static_cast<float>(rng.uniform(-2.0, 2.0));
    for (float& c : p.c_var) c = static_cast<float>(rng.normal());
    p.template_id = static_cast<std::uint32_t>(rng.index(scene.templates.size()));
    scene.primitives.push_back(p);
  }
  // Random permutation of depth ranks.
  std::vector<std::uint32_t> ranks(n);
  for (int i = 0; i < n; ++i) ranks[i] = static_cast<std::uint32_t>(i);
  for (int i = n - 1; i > 0; --i) {
    std::swap(ranks[i], ranks[rng.index(static_cast<std::size_t>(i) + 1)]);
  }
  for (int i = 0; i < n; ++i) scene.primitives[i].z = ranks[i];
  return scene;
}

Image random_image(int width, int height, Rng& rng) {
  Image out(width, height, 3);
  for (float& v : out.data()) v = static_cast<float>(rng.uniform());
  return out;
}

Image pattern_image(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  Image out(width, height, 3);
  // Low-frequency field from a handful of random cosines per channel.
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;
  for (auto& list : waves) {
    for (int k = 0; k < 4; ++k) {
      list.push_back({rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.0, 6.28),
                      rng.uniform(0.05, 0.15)});
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width;
      const double v = (y + 0.5) / height;
      for (int c = 0; c < 3; ++c) {
        double val = 0.5;
        for (const Wave& w : waves[c]) {
          val += w.amp * std::cos(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
        }
        out.at(x, y, c) = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }
  // Hard-edged shapes give the variance map something to find.
  for (int k = 0; k < 6; ++k) {
    const double cx = rng.uniform(0.1, 0.9) * width;
    const double cy = rng.uniform(0.1, 0.9) * height;
    const double r = rng.uniform(0.05, 0.15) * std::min(width, height);
    const auto color = random_rgb(rng);
    const bool disk = rng.uniform() < 0.5;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        const bool inside = disk ? dx * dx + dy * dy <= r * r
                                 : std::abs(dx) <= r && std::abs(dy) <= r;
        if (inside) {
          for (int c = 0; c < 3; ++c) out.at(x, y, c) = color[c];
        }
      }
    }
  }
  return out;
}

MaskedTarget disk_mask_target(int size, std::uint64_t seed) {
  MaskedTarget t{pattern_image(size, size, seed), Image(size, size, 1)};
  const double c = size / 2.0;
  const double r = 0.3 * size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x + 0.5 - c;
      const double dy = y + 0.5 - c;
      const bool inside = dx * dx + dy * dy <= r * r;
      t.alpha.at(x, y) = inside ? 1.0f : 0.0f;
      if (!inside) {
        for (int ch = 0; ch < 3; ++ch) t.rgb.at(x, y, ch) = 0.0f;
      }
    }
  }
  return t;
}

SquareState moving_square_state(int width, int height, int frame) {
  SquareState s;
  s.side = std::max(4, width / 5);
  s.x0 = width / 8 + 3 * frame;
  s.y0 = (height - s.side) / 2;
  s.color = {0.9f, 0.15f, 0.1f};
  return s;
}

std::vector<Image> moving_square_video(int width, int height, int frames) {
  const Image backdrop = pattern_image(width, height, 77);
  std::vector<Image> out;
  for (int f = 0; f < frames; ++f) {
    Image img = backdrop;
    const SquareState sq = moving_square_state(width, height, f);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!sq.covers(x, y)) continue;
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = sq.color[c];
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace rasterfit
