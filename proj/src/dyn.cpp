#include "rasterfit/dyn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rasterfit {

std::size_t DiffMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

DiffMask diff_mask(const Image& prev, const Image& cur, float tau) {
  require_same_shape(prev, cur, "diff_mask: frames differ in shape");
  DiffMask mask;
  mask.width = cur.width();
  mask.height = cur.height();
  mask.bits.assign(cur.pixel_count(), 0);
  for (int y = 0; y < cur.height(); ++y) {
    for (int x = 0; x < cur.width(); ++x) {
      float worst = 0.0f;
      for (int c = 0; c < cur.channels(); ++c) {
        worst = std::max(worst, std::abs(prev.at(x, y, c) - cur.at(x, y, c)));
      }
      if (worst > tau) mask.bits[static_cast<std::size_t>(y) * mask.width + x] = 1;
    }
  }
  return mask;
}

std::vector<std::uint8_t> freeze_flags(const Scene& scene, const DiffMask& mask, float padding) {
  if (mask.width != scene.canvas_w || mask.height != scene.canvas_h) {
    throw Error(ErrorCode::ShapeMismatch, "freeze_flags: mask differs from the canvas");
  }
  // Summed-area table over the mask makes each bbox query O(1).
  const int w = mask.width;
  const int h = mask.height;
  std::vector<std::uint32_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * (w + 1) + x; };
  for (int y = 0; y < h; ++y) {
    std::uint32_t row = 0;
    for (int x = 0; x < w; ++x) {
      row += mask.at(x, y) ? 1u : 0u;
      sat[idx(x + 1, y + 1)] = sat[idx(x + 1, y)] + row;
    }
  }

  std::vector<std::uint8_t> frozen(scene.size(), 1);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const PixelRect r = conservative_bbox(scene, scene.primitives[i], padding);
    if (r.empty()) continue;
    const std::uint32_t hits = sat[idx(r.x1 + 1, r.y1 + 1)] - sat[idx(r.x0, r.y1 + 1)] -
                               sat[idx(r.x1 + 1, r.y0)] + sat[idx(r.x0, r.y0)];
    if (hits > 0) frozen[i] = 0;
  }
  return frozen;
}

std::size_t stuck_region(const Scene& scene, const PrimitiveParams& p, const StuckPolicy& policy) {
  auto cell = [](float pos, int extent, int cells) {
    const int c = static_cast<int>(std::floor(pos / static_cast<float>(extent) * cells));
    return std::clamp(c, 0, cells - 1);
  };
  const int col = cell(p.x, scene.canvas_w, policy.grid_cols);
  const int row = cell(p.y, scene.canvas_h, policy.grid_rows);
  return static_cast<std::size_t>(row) * policy.grid_cols + col;
}

std::vector<std::size_t> remove_stuck(Scene& scene, std::span<const std::uint8_t> frozen,
                                      const StuckPolicy& policy) {
  if (!frozen.empty() && frozen.size() != scene.size()) {
    throw Error(ErrorCode::LengthMismatch, "remove_stuck: frozen flags must match the scene");
  }
  const std::size_t regions = static_cast<std::size_t>(policy.grid_rows) * policy.grid_cols;
  std::vector<std::vector<std::size_t>> members(regions);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    members[stuck_region(scene, scene.primitives[i], policy)].push_back(i);
  }

  const float min_scale = policy.tau_scale * static_cast<float>(scene.canvas_w);
  std::vector<std::size_t> decayed;
  for (auto& region : members) {
    if (region.empty()) continue;
    // Back to front: larger z is further back, so sort by descending z.
    std::sort(region.begin(), region.end(), [&](std::size_t a, std::size_t b) {
      return scene.primitives[a].z > scene.primitives[b].z;
    });
    const double rank_floor = policy.zeta * static_cast<double>(region.size() - 1);

    struct Candidate {
      double score;
      std::size_t index;
    };
    std::vector<Candidate> stuck;
    for (std::size_t rank = 0; rank < region.size(); ++rank) {
      const std::size_t i = region[rank];
      const auto& p = scene.primitives[i];
      const float alpha = scene.alpha_max * sigmoid(p.nu);
      if (p.s >= min_scale && alpha >= policy.tau_alpha && static_cast<double>(rank) >= rank_floor) {
        stuck.push_back({static_cast<double>(p.s) * alpha, i});
      }
    }
    std::sort(stuck.begin(), stuck.end(), [](const Candidate& a, const Candidate& b) {
      return a.score != b.score ? a.score > b.score : a.index < b.index;
    });
    const std::size_t take = std::min<std::size_t>(stuck.size(), static_cast<std::size_t>(policy.per_region));
    for (std::size_t k = 0; k < take; ++k) {
      scene.primitives[stuck[k].index].nu *= policy.eta;
      decayed.push_back(stuck[k].index);
    }
  }
  std::sort(decayed.begin(), decayed.end());
  return decayed;
}

std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame) {
  return derive_seed(seed, 1000 + frame);
}

VideoResult optimize_video(std::span<const Image> frames, std::vector<PrimitiveTemplate> templates,
                           const FitConfig& config) {
  if (frames.empty()) throw Error(ErrorCode::InvalidConfig, "video needs at least one frame");
  config.validate();
  const auto& video = config.video;
  const float padding = default_tile_padding(config.gaussian_blur ? config.blur_sigma : 0.0f);

  VideoResult out;
  auto record = [&](FitResult&& fit, const Image& target, std::size_t frozen_count) {
    const RenderOutput eval = render_for_eval(fit.scene, config);
    out.frame_mse.push_back(loss_mse(eval.color, target).value);
    out.scenes.push_back(std::move(fit.scene));
    out.histories.push_back(std::move(fit.history));
    out.frozen_counts.push_back(frozen_count);
  };

  FitConfig first = config;
  first.num_iterations = video.initial_iterations;
  record(optimize(frames[0], nullptr, std::move(templates), first), frames[0], 0);

  for (std::size_t f = 1; f < frames.size(); ++f) {
    require_same_shape(frames[f - 1], frames[f], "video frames differ in shape");
    Scene warm = out.scenes.back();
    std::vector<std::uint8_t> frozen;
    if (video.freeze_unchanged) {
      frozen = freeze_flags(warm, diff_mask(frames[f - 1], frames[f], video.tau_diff), padding);
    }
    const auto frozen_count = static_cast<std::size_t>(std::count(frozen.begin(), frozen.end(), 1));

    Optimizer::Hook hook;
    if (video.stuck.enabled) {
      hook = [&video](int iter, Optimizer& opt) {
        const auto& epochs = video.stuck.trigger_epochs;
        if (std::find(epochs.begin(), epochs.end(), iter) != epochs.end()) {
          remove_stuck(opt.scene(), opt.frozen(), video.stuck);
        }
      };
    }
    record(optimize_from(std::move(warm), frames[f], nullptr, config, video.sequential_iterations,
                         frame_seed(config.seed, f), std::move(frozen), hook),
           frames[f], frozen_count);
  }
  return out;
}

}  // namespace rasterfit
