#include <algorithm>
#include <cmath>

#include "rasterfit/grad.hpp"
#include "rasterfit/synth.hpp"

namespace rasterfit {

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
  GradcheckReport report;
  RandomSceneSpec spec;
  spec.max_primitives = config.max_primitives;
  spec.max_canvas = config.max_canvas;
  spec.min_canvas = std::min(spec.min_canvas, config.max_canvas);
  spec.blur_sigma = config.blur_sigma;

  for (int k = 0; k < config.seeds; ++k) {
    const std::uint64_t seed = config.first_seed + static_cast<std::uint64_t>(k);
    Rng rng(seed);
    const Scene scene = random_scene(rng, spec);
    const Image target = random_image(scene.canvas_w, scene.canvas_h, rng);
    const Backdrop backdrop = Backdrop::solid(scene.background.color);

    RenderOptions ropts;
    ropts.skip_epsilon = 0.0f;
    ropts.threads = config.threads;
    const TileBins bins = bin_tiles(scene, kDefaultTileSize, default_tile_padding(config.blur_sigma));
    const ForwardResult fwd = render_forward(scene, bins, backdrop, true, ropts);

    const auto t = target.data();
    const auto rendered = fwd.output.color.data();
    const double n = static_cast<double>(t.size());
    Image d_color(scene.canvas_w, scene.canvas_h, 3);
    auto g = d_color.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
      g[i] = static_cast<float>(2.0 * (static_cast<double>(rendered[i]) - t[i]) / n);
    }
    const Gradients analytic =
        backward(scene, *fwd.saved, d_color, Image{}, BackwardOptions{config.threads});

    const PreciseLoss loss = [&](const BasicRenderOutput<double>& out) {
      const auto c = out.color.data();
      double sum = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const double r = c[i] - t[i];
        sum += r * r;
      }
      return sum / n;
    };
    const Gradients numeric = finite_diff_grad(scene, backdrop, loss, config.steps);

    for (std::size_t i = 0; i < scene.size(); ++i) {
      for (std::size_t slot = 0; slot < ParamLayout::kStride; ++slot) {
        const double a = analytic.per_primitive[i].slot(slot);
        const double b = numeric.per_primitive[i].slot(slot);
        const double abs_err = std::abs(a - b);
        const double scale = std::max(std::abs(a), std::abs(b));
        const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
        ++report.parameters_checked;
        report.worst_abs_error = std::max(report.worst_abs_error, abs_err);
        if (abs_err > config.abs_tol) {
          report.worst_rel_error = std::max(report.worst_rel_error, rel_err);
          if (rel_err > config.rel_tol || !std::isfinite(a)) {
            report.failures.push_back({seed, i, slot_name(slot), a, b});
          }
        }
      }
    }
    ++report.scenes;
  }
  return report;
}

}  // namespace rasterfit
