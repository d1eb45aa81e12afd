// rasterfit command-line front end.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "rasterfit/config.hpp"
#include "rasterfit/dyn.hpp"
#include "rasterfit/export.hpp"
#include "rasterfit/fit.hpp"
#include "rasterfit/grad.hpp"
#include "rasterfit/io.hpp"
#include "rasterfit/parallel.hpp"
#include "rasterfit/prep.hpp"
#include "rasterfit/synth.hpp"

namespace fs = std::filesystem;
using namespace rasterfit;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output_dir;

  void apply(FitConfig& c) const {
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (output_dir) c.output_dir = *output_dir;
  }
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

int cmd_fit(const std::string& config_path, const Overrides& ov) {
  FitConfig config = load_config(config_path);
  ov.apply(config);
  config.validate();
  if (config.target.empty()) throw Error(ErrorCode::InvalidConfig, "config has no 'target'");

  const LoadedImage target = load_image(config.target);
  std::optional<Image> alpha;
  if (!config.target_alpha.empty()) {
    const LoadedImage a = load_image(config.target_alpha);
    alpha = a.alpha ? *a.alpha : [&] {
      Image gray(a.rgb.width(), a.rgb.height(), 1);
      for (int y = 0; y < gray.height(); ++y)
        for (int x = 0; x < gray.width(); ++x) gray.at(x, y) = a.rgb.at(x, y, 0);
      return gray;
    }();
  } else if (config.loss == LossKind::SpatialConstrained && target.alpha) {
    alpha = *target.alpha;
  }

  make_dir(config.output_dir);
  Optimizer::Hook dump;
  if (config.dump_every > 0) {
    dump = [&](int iter, Optimizer& opt) {
      if ((iter + 1) % config.dump_every != 0) return;
      char name[40];
      std::snprintf(name, sizeof name, "iter_%06d.png", iter + 1);
      save_png(config.output_dir / name, render_for_eval(opt.scene(), config).color);
    };
  }

  const FitResult result = optimize(target.rgb, alpha ? &*alpha : nullptr,
                                    load_templates(config.templates), config, dump);
  const RenderOutput final_render = render_for_eval(result.scene, config);
  save_scene(config.output_dir / "scene.rfs", result.scene);
  save_png(config.output_dir / "composite.png", final_render.color);
  write_history_csv(config.output_dir / "history.csv", result.history);
  std::cout << "primitives: " << result.scene.size() << "\n"
            << "iterations: " << result.history.size() << "\n"
            << "final_loss: " << result.history.back().loss << "\n"
            << "final_psnr: " << format_psnr(psnr(final_render.color, target.rgb)) << "\n"
            << "output: " << config.output_dir.string() << "\n";
  return 0;
}

int cmd_fit_video(const std::string& config_path, const Overrides& ov) {
  FitConfig config = load_config(config_path);
  ov.apply(config);
  config.validate();
  if (config.video.frames_dir.empty()) {
    throw Error(ErrorCode::InvalidConfig, "config has no 'frames_dir'");
  }
  const std::vector<Image> frames = load_frames(config.video.frames_dir);
  const VideoResult result = optimize_video(frames, load_templates(config.templates), config);

  make_dir(config.output_dir);
  std::ofstream csv(config.output_dir / "video.csv");
  if (!csv) throw Error(ErrorCode::IoError, "cannot write video.csv");
  csv << "frame,mse,psnr,frozen\n";
  for (std::size_t f = 0; f < result.scenes.size(); ++f) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%04zu", f);
    save_scene(config.output_dir / (std::string(stem) + ".rfs"), result.scenes[f]);
    save_png(config.output_dir / (std::string(stem) + ".png"),
             render_for_eval(result.scenes[f], config).color);
    const double mse = result.frame_mse[f];
    csv << f << ',' << mse << ','
        << format_psnr(mse > 0 ? 10.0 * std::log10(1.0 / mse) : INFINITY) << ','
        << result.frozen_counts[f] << '\n';
  }
  std::cout << "frames: " << result.scenes.size() << "\n"
            << "output: " << config.output_dir.string() << "\n";
  return 0;
}

int cmd_export(const std::string& scene_path, int scale, const std::string& out, int threads) {
  const Scene scene = load_scene(scene_path);
  const LayerManifest m = export_layers(scene, scale, out, threads);
  const Image recomposed = composite_layers(m, out);
  const RenderOutput reference = render_at_scale(scene, scale, threads);
  float worst = 0.0f;
  const auto a = recomposed.data();
  const auto b = reference.color.data();
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  std::cout << "layers: " << m.layers.size() << "\n"
            << "skipped: " << m.skipped.size() << "\n"
            << "canvas: " << m.width << "x" << m.height << "\n"
            << "max_layer_composite_error: " << worst << "\n"
            << "output: " << out << "\n";
  return 0;
}

int cmd_render(const std::string& scene_path, const std::string& out, int scale, int threads) {
  const Scene scene = load_scene(scene_path);
  save_png(out, render_at_scale(scene, scale, threads).color);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_gradcheck(int seeds, std::uint64_t first_seed, int threads) {
  GradcheckConfig cfg;
  cfg.seeds = seeds;
  cfg.first_seed = first_seed;
  cfg.threads = threads;
  const GradcheckReport r = run_gradcheck(cfg);
  std::cout << "scenes: " << r.scenes << "\n"
            << "parameters: " << r.parameters_checked << "\n"
            << "worst_relative_error: " << r.worst_rel_error << "\n"
            << "worst_absolute_error: " << r.worst_abs_error << "\n";
  for (const auto& f : r.failures) {
    std::cout << "  mismatch seed=" << f.seed << " primitive=" << f.primitive << " param=" << f.parameter
              << " analytic=" << f.analytic << " numeric=" << f.numeric << "\n";
  }
  std::cout << (r.passed() ? "PASS" : "FAIL") << "\n";
  return r.passed() ? 0 : 1;
}

struct BenchArgs {
  int size = 512;
  int prims = 1000;
  int iters = 20;
  int naive_iters = 3;
  int threads = 0;
  double threshold = 10.0;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& args) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  Rng rng(args.seed);
  const Image target = pattern_image(args.size, args.size, args.seed + 1);
  FitConfig config;
  config.num_primitives = static_cast<std::size_t>(args.prims);
  const auto templates = prepare_templates(load_templates({"builtin:disk"}), config);
  Scene scene = initial_scene(target, nullptr, templates, config, rng);
  for (auto& p : scene.primitives) p.nu = 0.0f;  // half-opaque, so every layer matters
  const Backdrop backdrop = Backdrop::solid(scene.background.color);
  const float padding = default_tile_padding(config.blur_sigma);
  RenderOptions ropts;
  ropts.threads = args.threads;

  auto fast_iteration = [&](double& fwd_ms, double& bwd_ms) {
    auto t0 = Clock::now();
    const TileBins bins = bin_tiles(scene, config.tile_size, padding);
    ForwardResult fwd = render_forward(scene, bins, backdrop, true, ropts);
    fwd_ms += ms_since(t0);
    t0 = Clock::now();
    const LossResult loss = loss_mse(fwd.output.color, target);
    const Gradients g = backward(scene, *fwd.saved, loss.d_color, Image{}, BackwardOptions{args.threads});
    bwd_ms += ms_since(t0);
    return g.size();
  };

  double f_ms = 0, b_ms = 0;
  fast_iteration(f_ms, b_ms);  // warm-up
  f_ms = b_ms = 0;
  for (int i = 0; i < args.iters; ++i) fast_iteration(f_ms, b_ms);
  f_ms /= args.iters;
  b_ms /= args.iters;

  double nf_ms = 0, nb_ms = 0;
  for (int i = 0; i < args.naive_iters; ++i) {
    auto t0 = Clock::now();
    const RenderOutput out = render_naive(scene, backdrop);
    nf_ms += ms_since(t0);
    t0 = Clock::now();
    const LossResult loss = loss_mse(out.color, target);
    backward_naive(scene, backdrop, loss.d_color, Image{});
    nb_ms += ms_since(t0);
  }
  nf_ms /= args.naive_iters;
  nb_ms /= args.naive_iters;

  const double fast = f_ms + b_ms;
  const double naive = nf_ms + nb_ms;
  const double speedup = naive / fast;
  std::printf("canvas: %dx%d\nprimitives: %d\nthreads: %d\nhardware_threads: %u\n", args.size, args.size,
              args.prims, resolve_threads(args.threads), std::thread::hardware_concurrency());
  std::printf("forward_ms: %.3f\nbackward_ms: %.3f\nfast_total_ms: %.3f\n", f_ms, b_ms, fast);
  std::printf("naive_forward_ms: %.3f\nnaive_backward_ms: %.3f\nnaive_total_ms: %.3f\n", nf_ms, nb_ms, naive);
  std::printf("speedup: %.2f\nthreshold: %.2f\n%s\n", speedup, args.threshold,
              speedup >= args.threshold ? "PASS" : "FAIL");
  return speedup >= args.threshold ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable bitmap-primitive renderer and optimizer"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Config file (key = value lines)")->required();
    sub->add_option("--seed", ov.seed, "Override the config seed");
    sub->add_option("--threads", ov.threads, "Worker threads (0 = all cores)");
    sub->add_option("--out", ov.output_dir, "Override output_dir");
  };
  auto* fit = app.add_subcommand("fit", "Optimize primitives toward one target image");
  add_overrides(fit);
  auto* video = app.add_subcommand("fit-video", "Optimize a sequence of frames with warm start");
  add_overrides(video);

  std::string scene_path, out_path;
  int scale = 1;
  int threads = 0;
  auto* exp = app.add_subcommand("export", "Write per-primitive layers, a manifest, and a composite");
  exp->add_option("scene", scene_path, "Scene file")->required();
  exp->add_option("--scale", scale, "Export scale (1, 2, or 4)")->check(CLI::IsMember({1, 2, 4}));
  exp->add_option("--out", out_path, "Output directory")->required();
  exp->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* rnd = app.add_subcommand("render", "Render a scene file to PNG");
  rnd->add_option("scene", scene_path, "Scene file")->required();
  rnd->add_option("--out", out_path, "Output PNG")->required();
  rnd->add_option("--scale", scale, "Render scale (1, 2, or 4)")->check(CLI::IsMember({1, 2, 4}));
  rnd->add_option("--threads", threads, "Worker threads (0 = all cores)");

  int seeds = 20;
  std::uint64_t first_seed = 1;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gc->add_option("--seeds", seeds, "Number of random scenes")->check(CLI::PositiveNumber);
  gc->add_option("--first-seed", first_seed, "Seed of the first scene");
  gc->add_option("--threads", threads, "Worker threads (0 = all cores)");

  BenchArgs bench;
  auto* bn = app.add_subcommand("bench", "Time tile-parallel vs naive forward+backward");
  bn->add_option("--size", bench.size, "Canvas side in pixels")->check(CLI::PositiveNumber);
  bn->add_option("--prims", bench.prims, "Primitive count")->check(CLI::PositiveNumber);
  bn->add_option("--iters", bench.iters, "Timed fast iterations")->check(CLI::PositiveNumber);
  bn->add_option("--naive-iters", bench.naive_iters, "Timed naive iterations")->check(CLI::PositiveNumber);
  bn->add_option("--threads", bench.threads, "Worker threads (0 = all cores)");
  bn->add_option("--threshold", bench.threshold, "Required speedup");
  bn->add_option("--seed", bench.seed, "Scene seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit) return cmd_fit(config_path, ov);
    if (*video) return cmd_fit_video(config_path, ov);
    if (*exp) return cmd_export(scene_path, scale, out_path, threads);
    if (*rnd) return cmd_render(scene_path, out_path, scale, threads);
    if (*gc) return cmd_gradcheck(seeds, first_seed, threads);
    if (*bn) return cmd_bench(bench);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
