#include "rasterfit/grad.hpp"

#include <algorithm>
#include <cmath>

#include "rasterfit/parallel.hpp"

namespace rasterfit {

double& ParamGrad::slot(std::size_t i) noexcept {
  switch (i) {
    case 0: return x;
    case 1: return y;
    case 2: return s;
    case 3: return theta;
    case 4: return nu;
    default: return c_var[i - 5];
  }
}

double ParamGrad::slot(std::size_t i) const noexcept {
  return const_cast<ParamGrad*>(this)->slot(i);
}

ParamGrad& ParamGrad::operator+=(const ParamGrad& o) noexcept {
  x += o.x;
  y += o.y;
  s += o.s;
  theta += o.theta;
  nu += o.nu;
  for (int c = 0; c < 3; ++c) c_var[c] += o.c_var[c];
  return *this;
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out(per_primitive.size() * ParamLayout::kStride);
  for (std::size_t i = 0; i < per_primitive.size(); ++i) {
    for (std::size_t k = 0; k < ParamLayout::kStride; ++k) {
      out[ParamLayout::offset(i, k)] = per_primitive[i].slot(k);
    }
  }
  return out;
}

bool Gradients::all_finite() const {
  for (const auto& g : per_primitive) {
    for (std::size_t k = 0; k < ParamLayout::kStride; ++k) {
      if (!std::isfinite(g.slot(k))) return false;
    }
  }
  return true;
}

const char* slot_name(std::size_t slot) {
  static const char* names[] = {"x", "y", "s", "theta", "nu", "c_r", "c_g", "c_b"};
  return slot < 8 ? names[slot] : "?";
}

std::array<float, 2> bilinear_grad(const PrimitiveTemplate& t, float U, float V,
                                   int channel) {
  TexelSample<float> s;
  if (!sample_texels(t, U, V, s, channel, channel + 1)) return {0.0f, 0.0f};
  return {s.d_du[channel], s.d_dv[channel]};
}

namespace {

/// Per-primitive constants for the chain rule.
struct Chain {
  Placement<float> pl;
  float aspect;
  float d_opacity_dnu;  // alpha_max * sigma(nu) * (1 - sigma(nu))
  std::array<float, 3> d_color_dcvar;  // (1 - mu) * sigma'(c_var)
};

std::vector<Chain> make_chains(const Scene& scene) {
  std::vector<Chain> chains(scene.primitives.size());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const auto& p = scene.primitives[i];
    Chain& ch = chains[i];
    ch.pl = make_placement<float>(scene, p);
    ch.aspect = aspect_factor(scene, p);
    const float sn = sigmoid(p.nu);
    ch.d_opacity_dnu = scene.alpha_max * sn * (1.0f - sn);
    for (int c = 0; c < 3; ++c) {
      const float sc = sigmoid(p.c_var[c]);
      ch.d_color_dcvar[c] = (1.0f - scene.mu_blend) * sc * (1.0f - sc);
    }
  }
  return chains;
}

/// Gradients of one contribution given dL/dalpha_k and dL/dc_k.
///
/// Geometry chains dL/dm (and, when mu > 0, dL/dc_org) through the
/// bilinear derivatives, the texel scaling, and the inverse affine map.
void accumulate_contribution(const Chain& ch, float mu, const Contribution& e,
                             float d_alpha, const std::array<float, 3>& d_color,
                             ParamGrad& g) {
  const Placement<float>& pl = ch.pl;

  g.nu += static_cast<double>(d_alpha * ch.d_opacity_dnu * e.mask);
  for (int c = 0; c < 3; ++c) {
    g.c_var[c] += static_cast<double>(d_color[c] * ch.d_color_dcvar[c]);
  }

  const bool template_color = mu > 0.0f;
  TexelSample<float> sample;
  sample_texels(*pl.tmpl, e.U, e.V, sample, template_color ? 0 : 3, 4);
  const float d_mask = d_alpha * pl.opacity;
  float dU = d_mask * sample.d_du[3];
  float dV = d_mask * sample.d_dv[3];
  if (template_color) {
    for (int c = 0; c < 3; ++c) {
      dU += d_color[c] * mu * sample.d_du[c];
      dV += d_color[c] * mu * sample.d_dv[c];
    }
  }
  if (dU == 0.0f && dV == 0.0f) return;

  const float du = dU * pl.half_w;
  const float dv = dV * pl.half_h;
  const float u = e.U / pl.half_w - 1.0f;
  const float v = e.V / pl.half_h - 1.0f;
  const float a = ch.aspect;

  // du/dx = -cos/s, dv/dx = sin/(s a); du/dy = -sin/s, dv/dy = -cos/(s a)
  // du/ds = -u/s, dv/ds = -v/s; du/dtheta = a v, dv/dtheta = -u / a
  g.x += static_cast<double>(-du * pl.cos_t * pl.inv_s + dv * pl.sin_t * pl.inv_sv);
  g.y += static_cast<double>(-du * pl.sin_t * pl.inv_s - dv * pl.cos_t * pl.inv_sv);
  g.s += static_cast<double>(-(du * u + dv * v) * pl.inv_s);
  g.theta += static_cast<double>(du * a * v - dv * u / a);
}

/// Reverse sweep over one pixel's contributions.
///
/// R holds the color seen directly behind layer k (later layers composited
/// over the background) and B the transmittance behind it, so that
///   dI/dalpha_k = T_k (c_k - R_k),   dA/dalpha_k = T_k B_k.
/// This is the suffix-sum form with S/(1 - alpha_k) expanded, which stays
/// finite at alpha_k = 1.
template <typename Sink>
void sweep_pixel(std::span<const Contribution> entries, const std::array<float, 3>& b,
                 const std::array<float, 3>& gI, float gA, Sink&& sink) {
  std::array<float, 3> behind = b;
  float back = 1.0f;
  for (std::size_t j = entries.size(); j-- > 0;) {
    const Contribution& e = entries[j];
    float d_alpha = gA * e.transmittance * back;
    std::array<float, 3> d_color;
    for (int c = 0; c < 3; ++c) {
      d_alpha += gI[c] * e.transmittance * (e.color[c] - behind[c]);
      d_color[c] = gI[c] * e.transmittance * e.alpha;
    }
    sink(e, d_alpha, d_color);
    for (int c = 0; c < 3; ++c) {
      behind[c] = e.alpha * e.color[c] + (1.0f - e.alpha) * behind[c];
    }
    back *= 1.0f - e.alpha;
  }
}

void check_gradient_inputs(const Scene& scene, const Image& dL_dI, const Image& dL_dA) {
  if (dL_dI.width() != scene.canvas_w || dL_dI.height() != scene.canvas_h ||
      dL_dI.channels() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "dL/dI must be H x W x 3");
  }
  if (!dL_dA.empty() && (dL_dA.width() != scene.canvas_w ||
                         dL_dA.height() != scene.canvas_h || dL_dA.channels() != 1)) {
    throw Error(ErrorCode::ShapeMismatch, "dL/dA must be H x W x 1");
  }
}

std::array<float, 3> pixel3(const Image& img, int x, int y) {
  return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
}

void check_saved(const Scene& scene, const SavedForward& saved) {
  if (saved.fingerprint != scene_fingerprint(scene) || saved.canvas_w != scene.canvas_w ||
      saved.canvas_h != scene.canvas_h) {
    throw Error(ErrorCode::StaleSavedState,
                "saved forward state was produced for a different scene");
  }
}

}  // namespace

Gradients backward(const Scene& scene, const SavedForward& saved, const Image& dL_dI,
                   const Image& dL_dA, const BackwardOptions& options) {
  check_saved(scene, saved);
  check_gradient_inputs(scene, dL_dI, dL_dA);

  const std::vector<Chain> chains = make_chains(scene);
  const float mu = scene.mu_blend;
  const bool has_alpha = !dL_dA.empty();
  const std::size_t tiles = saved.tiles.size();

  // Per-tile partials indexed by position in the tile's list.
  std::vector<std::vector<ParamGrad>> partials(tiles);

  auto run_tile = [&](std::size_t tile) {
    const auto& record = saved.tiles[tile];
    auto& local = partials[tile];
    local.assign(record.primitives.size(), ParamGrad{});
    if (record.entries.empty()) return;

    const int tx = static_cast<int>(tile % saved.tiles_x);
    const int ty = static_cast<int>(tile / saved.tiles_x);
    const int x0 = tx * saved.tile_size;
    const int y0 = ty * saved.tile_size;
    const int x1 = std::min(saved.canvas_w, x0 + saved.tile_size);
    const int y1 = std::min(saved.canvas_h, y0 + saved.tile_size);

    std::size_t local_pixel = 0;
    for (int py = y0; py < y1; ++py) {
      for (int px = x0; px < x1; ++px, ++local_pixel) {
        const std::uint32_t begin = record.offsets[local_pixel];
        const std::uint32_t end = record.offsets[local_pixel + 1];
        if (begin == end) continue;
        const auto gI = pixel3(dL_dI, px, py);
        const float gA = has_alpha ? dL_dA.at(px, py) : 0.0f;
        if (gI[0] == 0.0f && gI[1] == 0.0f && gI[2] == 0.0f && gA == 0.0f) continue;
        sweep_pixel({record.entries.data() + begin, end - begin},
                    pixel3(saved.background, px, py), gI, gA,
                    [&](const Contribution& e, float d_alpha,
                        const std::array<float, 3>& d_color) {
                      accumulate_contribution(chains[e.primitive], mu, e, d_alpha,
                                              d_color, local[e.slot]);
                    });
      }
    }
  };

  parallel_for(tiles, options.threads, run_tile);

  // Fixed tile order makes the sum independent of thread scheduling.
  Gradients out(scene.primitives.size());
  for (std::size_t tile = 0; tile < tiles; ++tile) {
    const auto& prims = saved.tiles[tile].primitives;
    for (std::size_t j = 0; j < prims.size(); ++j) {
      out.per_primitive[prims[j]] += partials[tile][j];
    }
  }
  return out;
}

Gradients backward_naive(const Scene& scene, const Backdrop& backdrop,
                         const Image& dL_dI, const Image& dL_dA) {
  check_gradient_inputs(scene, dL_dI, dL_dA);
  const std::vector<Chain> chains = make_chains(scene);
  const std::vector<std::uint32_t> order = front_to_back_order(scene);
  const float mu = scene.mu_blend;
  const bool template_color = mu > 0.0f;
  const bool has_alpha = !dL_dA.empty();

  Gradients out(scene.primitives.size());
  std::vector<Contribution> entries;
  entries.reserve(order.size());
  TexelSample<float> sample;
  for (int py = 0; py < scene.canvas_h; ++py) {
    const float y = static_cast<float>(py) + 0.5f;
    for (int px = 0; px < scene.canvas_w; ++px) {
      const float x = static_cast<float>(px) + 0.5f;
      entries.clear();
      float trans = 1.0f;
      for (std::uint32_t idx : order) {
        const Placement<float>& pl = chains[idx].pl;
        const PrimCoord<float> tex = pl.to_texel(x, y);
        if (!sample_texels(*pl.tmpl, tex.u, tex.v, sample, template_color ? 0 : 3, 4)) {
          continue;
        }
        const float alpha = pl.opacity * sample.value[3];
        std::array<float, 3> color = pl.var_color;
        if (template_color) {
          for (int c = 0; c < 3; ++c) color[c] += mu * sample.value[c];
        }
        entries.push_back({idx, 0, alpha, trans, color, sample.value[3], tex.u, tex.v});
        trans *= 1.0f - alpha;
      }
      sweep_pixel(entries, backdrop.at(px, py), pixel3(dL_dI, px, py),
                  has_alpha ? dL_dA.at(px, py) : 0.0f,
                  [&](const Contribution& e, float d_alpha,
                      const std::array<float, 3>& d_color) {
                    accumulate_contribution(chains[e.primitive], mu, e, d_alpha, d_color,
                                            out.per_primitive[e.primitive]);
                  });
    }
  }
  return out;
}

Image position_gradient_map(const Scene& scene, const SavedForward& saved,
                            const Image& dL_dI, const Image& dL_dA,
                            std::uint32_t primitive) {
  check_saved(scene, saved);
  check_gradient_inputs(scene, dL_dI, dL_dA);
  const std::vector<Chain> chains = make_chains(scene);
  const bool has_alpha = !dL_dA.empty();
  Image map(scene.canvas_w, scene.canvas_h, 2);
  for (int py = 0; py < scene.canvas_h; ++py) {
    for (int px = 0; px < scene.canvas_w; ++px) {
      ParamGrad g;
      sweep_pixel(saved.pixel(px, py), pixel3(saved.background, px, py),
                  pixel3(dL_dI, px, py), has_alpha ? dL_dA.at(px, py) : 0.0f,
                  [&](const Contribution& e, float d_alpha,
                      const std::array<float, 3>& d_color) {
                    if (e.primitive != primitive) return;
                    accumulate_contribution(chains[e.primitive], scene.mu_blend, e,
                                            d_alpha, d_color, g);
                  });
      map.at(px, py, 0) = static_cast<float>(g.x);
      map.at(px, py, 1) = static_cast<float>(g.y);
    }
  }
  return map;
}

Gradients reduce_partials(std::span<const Gradients> partials) {
  if (partials.empty()) return {};
  Gradients out(partials.front().size());
  for (const auto& part : partials) {
    if (part.size() != out.size()) {
      throw Error(ErrorCode::LengthMismatch, "partials disagree on primitive count");
    }
    for (std::size_t i = 0; i < part.size(); ++i) out.per_primitive[i] += part.per_primitive[i];
  }
  return out;
}

double StepSizes::for_slot(std::size_t slot) const noexcept {
  switch (slot) {
    case 0:
    case 1: return position;
    case 2: return scale;
    case 3: return theta;
    case 4: return nu;
    default: return color;
  }
}

Gradients finite_diff_grad(const Scene& scene, const Backdrop& backdrop,
                           const PreciseLoss& loss, const StepSizes& h) {
  Gradients out(scene.primitives.size());
  Scene probe = scene;
  PackedParams packed = pack_params(scene);
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    for (std::size_t k = 0; k < ParamLayout::kStride; ++k) {
      const std::size_t at = ParamLayout::offset(i, k);
      const float base = packed.values[at];
      const double step = h.for_slot(k);
      // Parameters are stored in float; use the step that is actually applied.
      const float plus = static_cast<float>(base + step);
      const float minus = static_cast<float>(base - step);

      packed.values[at] = plus;
      unpack_params(packed.values, packed.layout, probe);
      const double l_plus = loss(render_naive_precise(probe, backdrop));

      packed.values[at] = minus;
      unpack_params(packed.values, packed.layout, probe);
      const double l_minus = loss(render_naive_precise(probe, backdrop));

      packed.values[at] = base;
      out.per_primitive[i].slot(k) =
          (l_plus - l_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
    }
  }
  return out;
}

}  // namespace rasterfit
