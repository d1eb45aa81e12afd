#include "rasterfit/prep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rasterfit {

namespace {

std::vector<float> gaussian_kernel(float sigma) {
  const int radius = static_cast<int>(std::ceil(3.0f * sigma));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (static_cast<double>(sigma) * sigma));
    k[i + radius] = static_cast<float>(w);
    sum += w;
  }
  for (float& w : k) w = static_cast<float>(w / sum);
  return k;
}

// One separable pass along x (horizontal) or y.
void blur_pass(const std::vector<float>& src, std::vector<float>& dst, int w, int h,
               const std::vector<float>& kernel, bool horizontal) {
  const int radius = static_cast<int>(kernel.size() / 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[4] = {0, 0, 0, 0};
      double norm = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int sx = horizontal ? x + k : x;
        const int sy = horizontal ? y : y + k;
        if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
        const double weight = kernel[k + radius];
        const float* p = src.data() + (static_cast<std::size_t>(sy) * w + sx) * 4;
        for (int c = 0; c < 4; ++c) acc[c] += weight * p[c];
        norm += weight;
      }
      float* out = dst.data() + (static_cast<std::size_t>(y) * w + x) * 4;
      for (int c = 0; c < 4; ++c) {
        out[c] = std::clamp(static_cast<float>(acc[c] / norm), 0.0f, 1.0f);
      }
    }
  }
}

float smooth_step_edge(float signed_distance) {
  // 1 inside, 0 outside, linear over one texel.
  return std::clamp(0.5f - signed_distance, 0.0f, 1.0f);
}

}  // namespace

PrimitiveTemplate gaussian_blur_template(const PrimitiveTemplate& t, float sigma) {
  if (sigma < 0.0f) throw Error(ErrorCode::InvalidConfig, "blur sigma must be >= 0");
  if (sigma == 0.0f) return t;
  const auto kernel = gaussian_kernel(sigma);
  PrimitiveTemplate out = t;
  std::vector<float> tmp(t.rgba.size());
  blur_pass(t.rgba, tmp, t.width, t.height, kernel, true);
  blur_pass(tmp, out.rgba, t.width, t.height, kernel, false);
  return out;
}

PrimitiveTemplate radial_falloff(const PrimitiveTemplate& t) {
  PrimitiveTemplate out = t;
  const float cx = (t.width - 1) * 0.5f;
  const float cy = (t.height - 1) * 0.5f;
  const float reach = std::min(cx, cy);
  for (int v = 0; v < t.height; ++v) {
    for (int u = 0; u < t.width; ++u) {
      const float r = std::hypot(u - cx, v - cy) / reach;
      const float f = 0.5f * (1.0f + std::cos(std::numbers::pi_v<float> * std::min(r, 1.0f)));
      out.texel(u, v, 3) = t.texel(u, v, 3) * f;
    }
  }
  return out;
}

PrimitiveTemplate template_from_image(const Image& rgb, const Image* alpha) {
  if (rgb.channels() < 3) throw Error(ErrorCode::UnsupportedFormat, "template needs RGB");
  PrimitiveTemplate t(rgb.width(), rgb.height());
  for (int v = 0; v < rgb.height(); ++v) {
    for (int u = 0; u < rgb.width(); ++u) {
      for (int c = 0; c < 3; ++c) t.texel(u, v, c) = rgb.at(u, v, c);
      float a = 1.0f;
      if (alpha) {
        a = alpha->at(u, v);
      } else if (rgb.channels() == 4) {
        a = rgb.at(u, v, 3);
      }
      t.texel(u, v, 3) = a;
    }
  }
  return t;
}

PrimitiveTemplate pad_template(const PrimitiveTemplate& t, int texels) {
  if (texels <= 0) return t;
  PrimitiveTemplate out(t.width + 2 * texels, t.height + 2 * texels);
  for (int v = 0; v < t.height; ++v) {
    for (int u = 0; u < t.width; ++u) {
      for (int c = 0; c < 4; ++c) out.texel(u + texels, v + texels, c) = t.texel(u, v, c);
    }
  }
  // Carry the edge color outward so blurring RGB does not darken the rim.
  for (int v = 0; v < out.height; ++v) {
    const int sv = std::clamp(v - texels, 0, t.height - 1);
    for (int u = 0; u < out.width; ++u) {
      const int su = std::clamp(u - texels, 0, t.width - 1);
      for (int c = 0; c < 3; ++c) out.texel(u, v, c) = t.texel(su, sv, c);
    }
  }
  return out;
}

PrimitiveTemplate make_disk_template(int size, const std::array<float, 3>& rgb) {
  PrimitiveTemplate t(size, size);
  const float c = (size - 1) * 0.5f;
  const float radius = c - 1.5f;
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const float d = std::hypot(u - c, v - c) - radius;
      for (int k = 0; k < 3; ++k) t.texel(u, v, k) = rgb[k];
      t.texel(u, v, 3) = smooth_step_edge(d);
    }
  }
  return t;
}

PrimitiveTemplate make_square_template(int size, const std::array<float, 3>& rgb,
                                       float fill) {
  PrimitiveTemplate t(size, size);
  const float c = (size - 1) * 0.5f;
  const float half = (c - 1.5f) * fill;
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const float d = std::max(std::abs(u - c), std::abs(v - c)) - half;
      for (int k = 0; k < 3; ++k) t.texel(u, v, k) = rgb[k];
      t.texel(u, v, 3) = smooth_step_edge(d);
    }
  }
  return t;
}

PrimitiveTemplate make_ring_template(int size, const std::array<float, 3>& rgb) {
  PrimitiveTemplate t(size, size);
  const float c = (size - 1) * 0.5f;
  const float outer = c - 1.5f;
  const float inner = outer * 0.55f;
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const float r = std::hypot(u - c, v - c);
      for (int k = 0; k < 3; ++k) t.texel(u, v, k) = rgb[k];
      t.texel(u, v, 3) = std::min(smooth_step_edge(r - outer), smooth_step_edge(inner - r));
    }
  }
  return t;
}

PrimitiveTemplate make_constant_template(int width, int height, float alpha,
                                         const std::array<float, 3>& rgb) {
  PrimitiveTemplate t(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      for (int k = 0; k < 3; ++k) t.texel(u, v, k) = rgb[k];
      t.texel(u, v, 3) = alpha;
    }
  }
  return t;
}

VarianceMap local_variance_map(const Image& target, int window) {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "variance window must be odd and >= 3");
  }
  const int w = target.width();
  const int h = target.height();
  const int channels = std::min(3, target.channels());
  const int r = window / 2;

  // Summed-area tables of x and x^2 per channel, (w+1) x (h+1).
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<double> sum(stride * (h + 1) * channels, 0.0);
  std::vector<double> sq(sum.size(), 0.0);
  auto at = [&](int x, int y, int c) { return (static_cast<std::size_t>(y) * stride + x) * channels + c; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v = target.at(x, y, c);
        sum[at(x + 1, y + 1, c)] = v + sum[at(x, y + 1, c)] + sum[at(x + 1, y, c)] - sum[at(x, y, c)];
        sq[at(x + 1, y + 1, c)] = v * v + sq[at(x, y + 1, c)] + sq[at(x + 1, y, c)] - sq[at(x, y, c)];
      }
    }
  }

  VarianceMap map;
  map.width = w;
  map.height = h;
  map.values.assign(static_cast<std::size_t>(w) * h, 0.0f);
  std::vector<double> raw(map.values.size(), 0.0);
  double lo = INFINITY;
  double hi = -INFINITY;
  for (int y = 0; y < h; ++y) {
    const int ya = std::max(0, y - r);
    const int yb = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int xa = std::max(0, x - r);
      const int xb = std::min(w, x + r + 1);
      const double count = static_cast<double>(xb - xa) * (yb - ya);
      double var = 0.0;
      for (int c = 0; c < channels; ++c) {
        const double s = sum[at(xb, yb, c)] - sum[at(xa, yb, c)] - sum[at(xb, ya, c)] + sum[at(xa, ya, c)];
        const double q = sq[at(xb, yb, c)] - sq[at(xa, yb, c)] - sq[at(xb, ya, c)] + sq[at(xa, ya, c)];
        const double mean = s / count;
        var += std::max(0.0, q / count - mean * mean);
      }
      var /= channels;
      raw[static_cast<std::size_t>(y) * w + x] = var;
      lo = std::min(lo, var);
      hi = std::max(hi, var);
    }
  }
  if (hi - lo > 1e-12) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      map.values[i] = static_cast<float>((raw[i] - lo) / (hi - lo));
    }
  }
  return map;
}

StructureSampler::StructureSampler(const Image& target, const InitOptions& options,
                                   const Image* support_alpha)
    : target_(&target), options_(options), nlv_(local_variance_map(target, options.variance_window)) {
  const std::size_t cells = nlv_.values.size();
  weights_.resize(cells);
  const double base = options.base_prob;
  for (std::size_t i = 0; i < cells; ++i) {
    double w = base + (1.0 - base) * nlv_.values[i];
    if (support_alpha && !(support_alpha->data()[i] > 0.0f)) w = 0.0;
    weights_[i] = w;
  }
  occupancy_.assign(cells, 0);
  rebuild_cdf();
  if (cdf_.empty() || !(cdf_.back() > 0.0)) {
    throw Error(ErrorCode::InfeasibleDensity, "no lattice cell has positive sampling weight");
  }
}

void StructureSampler::rebuild_cdf() {
  cdf_.resize(weights_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    acc += weights_[i];
    cdf_[i] = acc;
  }
}

std::size_t StructureSampler::sample_cell(Rng& rng) const {
  const double r = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
  std::size_t cell = static_cast<std::size_t>(it - cdf_.begin());
  // upper_bound never lands on a zero-weight cell since r < cdf_.back().
  return std::min(cell, cdf_.size() - 1);
}

PrimitiveParams StructureSampler::make_params(std::size_t cell, Rng& rng) const {
  const int w = nlv_.width;
  const int px = static_cast<int>(cell % w);
  const int py = static_cast<int>(cell / w);
  const float nlv = nlv_.values[cell];

  PrimitiveParams p;
  p.x = static_cast<float>(px) + 0.5f;
  p.y = static_cast<float>(py) + 0.5f;
  p.s = options_.s_max - (options_.s_max - options_.s_min) * nlv;
  p.template_id = static_cast<std::uint32_t>(rng.index(std::max<std::uint32_t>(1, options_.num_templates)));
  p.theta = static_cast<float>(rng.uniform(0.0, 2.0 * std::numbers::pi));
  p.nu = options_.v_init_bias;
  constexpr float kClamp = 1e-4f;
  for (int c = 0; c < 3; ++c) {
    const float mean = target_->at(px, py, std::min(c, target_->channels() - 1));
    const float drawn = mean + options_.std_c_init * static_cast<float>(rng.normal());
    p.c_var[c] = logit(std::clamp(drawn, kClamp, 1.0f - kClamp));
  }
  return p;
}

PrimitiveParams StructureSampler::draw(Rng& rng) { return make_params(sample_cell(rng), rng); }

PrimitiveParams StructureSampler::draw_capped(Rng& rng) {
  const std::size_t cell = sample_cell(rng);
  if (++occupancy_[cell] >= options_.density_cap) {
    weights_[cell] = 0.0;
    rebuild_cdf();
  }
  return make_params(cell, rng);
}

Scene structure_aware_init(const Image& target, std::vector<PrimitiveTemplate> templates,
                           const InitOptions& options, Rng& rng, const Image* support_alpha) {
  if (options.num_primitives < 1) throw Error(ErrorCode::InvalidConfig, "need at least one primitive");
  if (templates.empty()) throw Error(ErrorCode::BadTemplateRef, "no templates supplied");

  InitOptions opts = options;
  opts.num_templates = static_cast<std::uint32_t>(templates.size());
  StructureSampler sampler(target, opts, support_alpha);

  std::size_t usable = 0;
  for (double w : sampler.weights()) usable += w > 0.0 ? 1 : 0;
  if (options.density_cap <= 0 ||
      options.num_primitives > usable * static_cast<std::size_t>(options.density_cap)) {
    throw Error(ErrorCode::InfeasibleDensity,
                "num_primitives exceeds max_prims_per_pixel times the usable pixel count");
  }

  Scene scene;
  scene.canvas_w = target.width();
  scene.canvas_h = target.height();
  scene.templates = std::move(templates);
  scene.primitives.reserve(options.num_primitives);
  for (std::size_t i = 0; i < options.num_primitives; ++i) {
    PrimitiveParams p = sampler.draw_capped(rng);
    p.z = static_cast<std::uint32_t>(i);
    scene.primitives.push_back(p);
  }
  return scene;
}

Scene random_init(int canvas_w, int canvas_h, std::vector<PrimitiveTemplate> templates,
                  const InitOptions& options, Rng& rng) {
  if (options.num_primitives < 1) throw Error(ErrorCode::InvalidConfig, "need at least one primitive");
  if (templates.empty()) throw Error(ErrorCode::BadTemplateRef, "no templates supplied");
  Scene scene;
  scene.canvas_w = canvas_w;
  scene.canvas_h = canvas_h;
  const auto count = static_cast<std::uint32_t>(templates.size());
  scene.templates = std::move(templates);
  for (std::size_t i = 0; i < options.num_primitives; ++i) {
    PrimitiveParams p;
    p.x = static_cast<float>(rng.uniform(0.0, canvas_w));
    p.y = static_cast<float>(rng.uniform(0.0, canvas_h));
    p.s = static_cast<float>(rng.uniform(options.s_min, options.s_max));
    p.theta = static_cast<float>(rng.uniform(0.0, 2.0 * std::numbers::pi));
    p.template_id = static_cast<std::uint32_t>(rng.index(count));
    p.nu = options.v_init_bias;
    for (int c = 0; c < 3; ++c) {
      p.c_var[c] = options.std_c_init * static_cast<float>(rng.normal());
    }
    p.z = static_cast<std::uint32_t>(i);
    scene.primitives.push_back(p);
  }
  return scene;
}

}  // namespace rasterfit
