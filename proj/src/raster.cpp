#include "rasterfit/raster.hpp"

#include <algorithm>
#include <cmath>

#include "rasterfit/parallel.hpp"

namespace rasterfit {

float sample_bilinear(const PrimitiveTemplate& t, float U, float V, int channel) {
  TexelSample<float> s;
  if (!sample_texels(t, U, V, s, channel, channel + 1)) return 0.0f;
  return s.value[channel];
}

Backdrop Backdrop::solid(const std::array<float, 3>& rgb) {
  Backdrop b;
  b.color_ = rgb;
  return b;
}

Backdrop Backdrop::image(Image rgb) {
  Backdrop b;
  b.image_ = std::make_shared<const Image>(std::move(rgb));
  return b;
}

Image noisy_background(int width, int height, Rng& rng) {
  Image out(width, height, 3);
  for (float& v : out.data()) v = static_cast<float>(rng.uniform());
  return out;
}

PixelRect TileBins::tile_rect(std::size_t tile) const {
  const int tx = static_cast<int>(tile % tiles_x);
  const int ty = static_cast<int>(tile / tiles_x);
  PixelRect r;
  r.x0 = tx * tile_size;
  r.y0 = ty * tile_size;
  r.x1 = std::min(canvas_w, (tx + 1) * tile_size) - 1;
  r.y1 = std::min(canvas_h, (ty + 1) * tile_size) - 1;
  return r;
}

TileBins bin_tiles(const Scene& scene, int tile_size, float padding) {
  if (tile_size <= 0) throw Error(ErrorCode::InvalidConfig, "tile size must be positive");
  TileBins bins;
  bins.tile_size = tile_size;
  bins.padding = padding;
  bins.canvas_w = scene.canvas_w;
  bins.canvas_h = scene.canvas_h;
  bins.tiles_x = (scene.canvas_w + tile_size - 1) / tile_size;
  bins.tiles_y = (scene.canvas_h + tile_size - 1) / tile_size;
  bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);

  // Visiting primitives in z order keeps every list sorted.
  for (std::uint32_t idx : front_to_back_order(scene)) {
    const PixelRect box = conservative_bbox(scene, scene.primitives[idx], padding);
    if (box.empty()) continue;
    for (int ty = box.y0 / tile_size; ty <= box.y1 / tile_size; ++ty) {
      for (int tx = box.x0 / tile_size; tx <= box.x1 / tile_size; ++tx) {
        bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(idx);
      }
    }
  }
  return bins;
}

std::span<const Contribution> SavedForward::pixel(int x, int y) const {
  const int tx = x / tile_size;
  const int ty = y / tile_size;
  const auto& tile = tiles[static_cast<std::size_t>(ty) * tiles_x + tx];
  const int tile_w = std::min(canvas_w, (tx + 1) * tile_size) - tx * tile_size;
  const std::size_t local =
      static_cast<std::size_t>(y - ty * tile_size) * tile_w + (x - tx * tile_size);
  const std::uint32_t begin = tile.offsets[local];
  const std::uint32_t end = tile.offsets[local + 1];
  return {tile.entries.data() + begin, end - begin};
}

std::size_t SavedForward::total_entries() const {
  std::size_t n = 0;
  for (const auto& t : tiles) n += t.entries.size();
  return n;
}

ForwardResult render_forward(const Scene& scene, const TileBins& bins,
                             const Backdrop& backdrop, bool save,
                             const RenderOptions& options) {
  const int w = scene.canvas_w;
  const int h = scene.canvas_h;
  if (bins.canvas_w != w || bins.canvas_h != h) {
    throw Error(ErrorCode::ShapeMismatch, "tile bins were built for another canvas");
  }

  const std::size_t n = scene.primitives.size();
  std::vector<Placement<float>> placements(n);
  std::vector<PixelRect> footprints(n);
  for (std::size_t i = 0; i < n; ++i) {
    placements[i] = make_placement<float>(scene, scene.primitives[i]);
    // One extra pixel so rounding at the footprint edge never drops a sample.
    footprints[i] = conservative_bbox(scene, scene.primitives[i], 1.0f);
  }
  const float mu = scene.mu_blend;
  const bool needs_template_color = mu > 0.0f;
  const float eps = options.skip_epsilon;

  ForwardResult result;
  result.output.color = Image(w, h, 3);
  result.output.alpha = Image(w, h, 1);
  SavedForward saved;
  if (save) {
    saved.fingerprint = scene_fingerprint(scene);
    saved.canvas_w = w;
    saved.canvas_h = h;
    saved.tile_size = bins.tile_size;
    saved.tiles_x = bins.tiles_x;
    saved.tiles.resize(bins.tile_count());
    saved.final_transmittance = Image(w, h, 1);
    saved.background = Image(w, h, 3);
  }

  auto render_tile = [&](std::size_t tile) {
    const PixelRect rect = bins.tile_rect(tile);
    const auto& list = bins.lists[tile];
    SavedForward::TileRecord* record = save ? &saved.tiles[tile] : nullptr;
    if (record) {
      record->offsets.reserve(static_cast<std::size_t>(rect.width()) * rect.height() + 1);
      record->offsets.push_back(0);
      record->primitives = list;
    }
    TexelSample<float> sample;
    for (int py = rect.y0; py <= rect.y1; ++py) {
      const float y = static_cast<float>(py) + 0.5f;
      for (int px = rect.x0; px <= rect.x1; ++px) {
        const float x = static_cast<float>(px) + 0.5f;
        float trans = 1.0f;
        std::array<float, 3> acc{0.0f, 0.0f, 0.0f};
        for (std::uint32_t slot = 0; slot < list.size(); ++slot) {
          const std::uint32_t idx = list[slot];
          if (!footprints[idx].contains(px, py)) continue;
          const Placement<float>& pl = placements[idx];
          const PrimCoord<float> tex = pl.to_texel(x, y);
          if (!sample_texels(*pl.tmpl, tex.u, tex.v, sample,
                             needs_template_color ? 0 : 3, 4)) {
            continue;
          }
          const float m = sample.value[3];
          if (m < eps) continue;
          const float alpha = pl.opacity * m;
          std::array<float, 3> color = pl.var_color;
          if (needs_template_color) {
            for (int c = 0; c < 3; ++c) color[c] += mu * sample.value[c];
          }
          for (int c = 0; c < 3; ++c) acc[c] += trans * alpha * color[c];
          if (record) {
            record->entries.push_back({idx, slot, alpha, trans, color, m, tex.u, tex.v});
          }
          trans *= 1.0f - alpha;
        }
        const auto b = backdrop.at(px, py);
        for (int c = 0; c < 3; ++c) result.output.color.at(px, py, c) = acc[c] + trans * b[c];
        result.output.alpha.at(px, py) = 1.0f - trans;
        if (record) {
          record->offsets.push_back(static_cast<std::uint32_t>(record->entries.size()));
          saved.final_transmittance.at(px, py) = trans;
          for (int c = 0; c < 3; ++c) saved.background.at(px, py, c) = b[c];
        }
      }
    }
  };

  parallel_for(bins.tile_count(), options.threads, render_tile);

  if (save) result.saved = std::move(saved);
  return result;
}

RenderOutput render(const Scene& scene, const Backdrop& backdrop,
                    const RenderOptions& options, int tile_size, float padding) {
  const TileBins bins = bin_tiles(scene, tile_size, padding);
  return render_forward(scene, bins, backdrop, false, options).output;
}

namespace {

template <typename T>
BasicRenderOutput<T> composite_naive(const Scene& scene, const Backdrop& backdrop) {
  const int w = scene.canvas_w;
  const int h = scene.canvas_h;
  const std::size_t pixels = static_cast<std::size_t>(w) * h;
  std::vector<T> trans(pixels, T(1));
  std::vector<T> acc(pixels * 3, T(0));
  const T mu = static_cast<T>(scene.mu_blend);
  const bool needs_template_color = scene.mu_blend > 0.0f;

  TexelSample<T> sample;
  for (std::uint32_t idx : front_to_back_order(scene)) {
    const Placement<T> pl = make_placement<T>(scene, scene.primitives[idx]);
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        const PrimCoord<T> tex = pl.to_texel(static_cast<T>(px) + T(0.5),
                                             static_cast<T>(py) + T(0.5));
        if (!sample_texels(*pl.tmpl, tex.u, tex.v, sample,
                           needs_template_color ? 0 : 3, 4)) {
          continue;
        }
        const T alpha = pl.opacity * sample.value[3];
        const std::size_t i = static_cast<std::size_t>(py) * w + px;
        for (int c = 0; c < 3; ++c) {
          T color = pl.var_color[c];
          if (needs_template_color) color += mu * sample.value[c];
          acc[i * 3 + c] += trans[i] * alpha * color;
        }
        trans[i] *= T(1) - alpha;
      }
    }
  }

  BasicRenderOutput<T> out;
  out.color = BasicImage<T>(w, h, 3);
  out.alpha = BasicImage<T>(w, h, 1);
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const std::size_t i = static_cast<std::size_t>(py) * w + px;
      const auto b = backdrop.at(px, py);
      for (int c = 0; c < 3; ++c) {
        out.color.at(px, py, c) = acc[i * 3 + c] + trans[i] * static_cast<T>(b[c]);
      }
      out.alpha.at(px, py) = T(1) - trans[i];
    }
  }
  return out;
}

}  // namespace

RenderOutput render_naive(const Scene& scene, const Backdrop& backdrop) {
  return composite_naive<float>(scene, backdrop);
}

BasicRenderOutput<double> render_naive_precise(const Scene& scene,
                                               const Backdrop& backdrop) {
  return composite_naive<double>(scene, backdrop);
}

}  // namespace rasterfit
