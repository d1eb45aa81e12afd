#include "rasterfit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace rasterfit {

// ---------------------------------------------------------------------------
// Losses

LossResult loss_mse(const Image& rendered, const Image& target) {
  require_same_shape(rendered, target, "loss_mse: rendered and target differ in shape");
  LossResult out;
  out.d_color = Image(rendered.width(), rendered.height(), rendered.channels());
  const auto a = rendered.data();
  const auto b = target.data();
  auto g = out.d_color.data();
  const double n = static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = static_cast<double>(a[i]) - b[i];
    sum += r * r;
    g[i] = static_cast<float>(2.0 * r / n);
  }
  out.value = sum / n;
  return out;
}

LossResult loss_spatial(const Image& rendered, const Image& rendered_alpha,
                        const Image& target, const Image* target_alpha, float lambda) {
  if (!target_alpha) {
    throw Error(ErrorCode::MissingAlphaTarget, "spatially constrained loss needs a target alpha");
  }
  require_same_shape(rendered, target, "loss_spatial: rendered and target differ in shape");
  require_same_shape(rendered_alpha, *target_alpha,
                     "loss_spatial: rendered alpha and target alpha differ in shape");
  if (rendered_alpha.width() != rendered.width() || rendered_alpha.height() != rendered.height() ||
      rendered_alpha.channels() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "loss_spatial: alpha must be H x W x 1");
  }

  const int w = rendered.width();
  const int h = rendered.height();
  const int ch = rendered.channels();
  LossResult out;
  out.d_color = Image(w, h, ch);
  out.d_alpha = Image(w, h, 1);
  const double color_norm = static_cast<double>(w) * h * ch;
  const double alpha_norm = static_cast<double>(w) * h;

  double color_sum = 0.0;
  double alpha_sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float ta = target_alpha->at(x, y);
      if (ta > 0.0f) {
        for (int c = 0; c < ch; ++c) {
          const double r = static_cast<double>(rendered.at(x, y, c)) - target.at(x, y, c);
          color_sum += r * r;
          out.d_color.at(x, y, c) = static_cast<float>(2.0 * r / color_norm);
        }
      }
      const double ra = static_cast<double>(rendered_alpha.at(x, y)) - ta;
      alpha_sum += ra * ra;
      out.d_alpha.at(x, y) = static_cast<float>(lambda * 2.0 * ra / alpha_norm);
    }
  }
  out.value = color_sum / color_norm + lambda * alpha_sum / alpha_norm;
  return out;
}

LossResult loss_grayscale_l1(const Image& rendered, const Image& target) {
  require_same_shape(rendered, target, "loss_grayscale_l1: rendered and target differ in shape");
  if (rendered.channels() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "loss_grayscale_l1: expects RGB images");
  }
  const int w = rendered.width();
  const int h = rendered.height();
  LossResult out;
  out.d_color = Image(w, h, 3);
  const double n = static_cast<double>(w) * h;
  double sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double diff = 0.0;
      for (int c = 0; c < 3; ++c) {
        diff += static_cast<double>(kLumaWeights[c]) *
                (static_cast<double>(rendered.at(x, y, c)) - target.at(x, y, c));
      }
      sum += std::abs(diff);
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      for (int c = 0; c < 3; ++c) {
        out.d_color.at(x, y, c) = static_cast<float>(sign * kLumaWeights[c] / n);
      }
    }
  }
  out.value = sum / n;
  return out;
}

LossSpec LossSpec::from_config(const FitConfig& config, const Image& target,
                               const Image* target_alpha) {
  LossSpec spec;
  spec.kind = config.loss;
  spec.mse_weight = config.mse_weight;
  spec.gray_l1_weight = config.gray_l1_weight;
  spec.alpha_weight = config.alpha_weight;
  spec.target = &target;
  spec.target_alpha = target_alpha;
  return spec;
}

LossResult evaluate_loss(const LossSpec& spec, const RenderOutput& output) {
  if (!spec.target) throw Error(ErrorCode::InvalidConfig, "loss spec has no target");
  switch (spec.kind) {
    case LossKind::Mse:
      return loss_mse(output.color, *spec.target);
    case LossKind::SpatialConstrained:
      return loss_spatial(output.color, output.alpha, *spec.target, spec.target_alpha,
                          spec.alpha_weight);
    case LossKind::Combined: {
      LossResult mse = loss_mse(output.color, *spec.target);
      LossResult l1 = loss_grayscale_l1(output.color, *spec.target);
      LossResult out;
      out.value = spec.mse_weight * mse.value + spec.gray_l1_weight * l1.value;
      out.d_color = std::move(mse.d_color);
      auto g = out.d_color.data();
      const auto g1 = l1.d_color.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = spec.mse_weight * g[i] + spec.gray_l1_weight * g1[i];
      }
      return out;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown loss kind");
}

namespace {

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

double psnr(const Image& rendered, const Image& target) {
  require_same_shape(rendered, target, "psnr: rendered and target differ in shape");
  const auto a = rendered.data();
  const auto b = target.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = static_cast<double>(a[i]) - b[i];
    sum += r * r;
  }
  return psnr_from_mse(sum / static_cast<double>(a.size()));
}

double masked_psnr(const Image& rendered, const Image& target, const Image& mask) {
  require_same_shape(rendered, target, "masked_psnr: rendered and target differ in shape");
  if (mask.width() != rendered.width() || mask.height() != rendered.height()) {
    throw Error(ErrorCode::ShapeMismatch, "masked_psnr: mask differs in size");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < rendered.height(); ++y) {
    for (int x = 0; x < rendered.width(); ++x) {
      if (!(mask.at(x, y) > 0.0f)) continue;
      for (int c = 0; c < rendered.channels(); ++c) {
        const double r = static_cast<double>(rendered.at(x, y, c)) - target.at(x, y, c);
        sum += r * r;
        ++count;
      }
    }
  }
  if (count == 0) return std::numeric_limits<double>::infinity();
  return psnr_from_mse(sum / static_cast<double>(count));
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", db);
  return buf;
}

// ---------------------------------------------------------------------------
// Optimizer

float lr_schedule(int iter, int total, float base_lr, bool decay_enabled,
                  float final_fraction) {
  if (!decay_enabled || total <= 1) return base_lr;
  const double t = static_cast<double>(iter) / static_cast<double>(total - 1);
  return static_cast<float>(base_lr * std::pow(static_cast<double>(final_fraction), t));
}

AdamState::AdamState(std::size_t num_primitives)
    : layout{num_primitives},
      m(layout.size(), 0.0),
      v(layout.size(), 0.0),
      steps(num_primitives, 0) {}

void AdamState::reset_primitive(std::size_t i) {
  for (std::size_t k = 0; k < ParamLayout::kStride; ++k) {
    m[ParamLayout::offset(i, k)] = 0.0;
    v[ParamLayout::offset(i, k)] = 0.0;
  }
  steps[i] = 0;
}

namespace {

float& param_slot(PrimitiveParams& p, std::size_t slot) {
  switch (slot) {
    case 0: return p.x;
    case 1: return p.y;
    case 2: return p.s;
    case 3: return p.theta;
    case 4: return p.nu;
    default: return p.c_var[slot - 5];
  }
}

}  // namespace

void adam_step(Scene& scene, const Gradients& grads, AdamState& state, float lr,
               const LrGains& gains, std::span<const std::uint8_t> frozen,
               const StepBounds& bounds, const AdamHyper& hyper) {
  const std::size_t n = scene.size();
  if (grads.size() != n || state.layout.num_primitives != n || state.m.size() != n * ParamLayout::kStride ||
      state.v.size() != state.m.size() || state.steps.size() != n ||
      (!frozen.empty() && frozen.size() != n)) {
    throw Error(ErrorCode::LayoutMismatch, "adam_step: scene, gradients, and state disagree in size");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    const std::uint32_t t = ++state.steps[i];
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    PrimitiveParams& p = scene.primitives[i];
    const ParamGrad& g = grads.per_primitive[i];
    for (std::size_t k = 0; k < ParamLayout::kStride; ++k) {
      const std::size_t o = ParamLayout::offset(i, k);
      const double gk = g.slot(k);
      state.m[o] = hyper.beta1 * state.m[o] + (1.0 - hyper.beta1) * gk;
      state.v[o] = hyper.beta2 * state.v[o] + (1.0 - hyper.beta2) * gk * gk;
      const double mhat = state.m[o] / c1;
      const double vhat = state.v[o] / c2;
      const double step = static_cast<double>(lr) * gains.for_slot(k) * mhat / (std::sqrt(vhat) + hyper.eps);
      float& value = param_slot(p, k);
      value = static_cast<float>(static_cast<double>(value) - step);
    }
    p.s = std::clamp(p.s, bounds.s_min, bounds.s_max);
  }
}

std::size_t reinit_low_opacity(Scene& scene, StructureSampler& sampler, float threshold,
                               Rng& rng, AdamState* state, std::span<const std::uint8_t> frozen) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    PrimitiveParams& p = scene.primitives[i];
    if (!(sigmoid(p.nu) < threshold)) continue;
    PrimitiveParams fresh = sampler.draw(rng);
    fresh.template_id = p.template_id;
    fresh.z = p.z;
    p = fresh;
    if (state) state->reset_primitive(i);
    ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Loop

std::vector<PrimitiveTemplate> prepare_templates(std::vector<PrimitiveTemplate> raw,
                                                 const FitConfig& config) {
  for (auto& t : raw) {
    if (config.radial_transparency) t = radial_falloff(t);
    if (config.gaussian_blur && config.blur_sigma > 0.0f) {
      const int halo = static_cast<int>(std::ceil(3.0f * config.blur_sigma));
      t = gaussian_blur_template(pad_template(t, halo), config.blur_sigma);
    }
  }
  return raw;
}

InitOptions init_options(const FitConfig& config, std::uint32_t num_templates) {
  InitOptions o;
  o.num_primitives = config.num_primitives;
  o.s_min = config.s_min;
  o.s_max = config.s_max;
  o.v_init_bias = config.v_init_bias;
  o.std_c_init = config.std_c_init;
  o.variance_window = config.variance_window;
  o.base_prob = config.variance_base_prob;
  o.density_cap = config.max_prims_per_pixel;
  o.num_templates = num_templates;
  return o;
}

Scene initial_scene(const Image& target, const Image* target_alpha,
                    std::vector<PrimitiveTemplate> prepared, const FitConfig& config, Rng& rng) {
  (void)target_alpha;  // placement covers the whole canvas; reinit uses the mask
  const InitOptions opts = init_options(config, static_cast<std::uint32_t>(prepared.size()));
  Scene scene = config.init == InitMode::StructureAware
                    ? structure_aware_init(target, std::move(prepared), opts, rng)
                    : random_init(target.width(), target.height(), std::move(prepared), opts, rng);
  scene.background = config.background;
  scene.alpha_max = config.alpha_max;
  scene.mu_blend = config.mu_blend;
  scene.preserve_aspect = config.preserve_aspect;
  validate_scene(scene);
  return scene;
}

namespace {

enum Stream : std::uint64_t { kInitStream = 1, kBackgroundStream = 2, kReinitStream = 3 };

float tile_padding(const FitConfig& config) {
  return default_tile_padding(config.gaussian_blur ? config.blur_sigma : 0.0f);
}

}  // namespace

Optimizer::Optimizer(Scene scene, const Image& target, const Image* target_alpha,
                     const FitConfig& config, std::uint64_t seed)
    : scene_(std::move(scene)),
      target_(target),
      config_(config),
      adam_(scene_.size()),
      frozen_(scene_.size(), 0),
      background_rng_(derive_seed(seed, kBackgroundStream)),
      reinit_rng_(derive_seed(seed, kReinitStream)) {
  validate_scene(scene_);
  if (target_.width() != scene_.canvas_w || target_.height() != scene_.canvas_h) {
    throw Error(ErrorCode::ShapeMismatch, "target size differs from the scene canvas");
  }
  if (target_alpha) target_alpha_ = *target_alpha;
  loss_spec_ = LossSpec::from_config(config_, target_, target_alpha_ ? &*target_alpha_ : nullptr);
  if (config_.loss == LossKind::SpatialConstrained && !target_alpha_) {
    throw Error(ErrorCode::MissingAlphaTarget, "spatially constrained loss needs a target alpha");
  }
  if (config_.reinit.enabled) {
    sampler_.emplace(target_, init_options(config_, static_cast<std::uint32_t>(scene_.templates.size())),
                     target_alpha_ ? &*target_alpha_ : nullptr);
  }
}

void Optimizer::set_frozen(std::vector<std::uint8_t> frozen) {
  if (frozen.size() != scene_.size()) {
    throw Error(ErrorCode::LengthMismatch, "frozen flags must match the primitive count");
  }
  frozen_ = std::move(frozen);
}

Backdrop Optimizer::iteration_backdrop() {
  if (scene_.background.kind == BackgroundKind::Noise) {
    return Backdrop::image(noisy_background(scene_.canvas_w, scene_.canvas_h, background_rng_));
  }
  return Backdrop::solid(scene_.background.color);
}

IterationRecord Optimizer::step(int iter, int total) {
  IterationRecord rec;
  rec.iter = iter;
  rec.lr = lr_schedule(iter, total, config_.base_lr, config_.decay_enabled,
                       config_.decay_final_fraction);

  const Backdrop backdrop = iteration_backdrop();
  const TileBins bins = bin_tiles(scene_, config_.tile_size, tile_padding(config_));
  RenderOptions ropts;
  ropts.skip_epsilon = config_.skip_epsilon;
  ropts.threads = config_.threads;
  ForwardResult fwd = render_forward(scene_, bins, backdrop, true, ropts);

  LossResult loss = evaluate_loss(loss_spec_, fwd.output);
  rec.loss = loss.value;
  rec.psnr = psnr(fwd.output.color, target_);

  const Gradients grads = backward(scene_, *fwd.saved, loss.d_color, loss.d_alpha,
                                   BackwardOptions{config_.threads});
  adam_step(scene_, grads, adam_, rec.lr, config_.gains, frozen_,
            StepBounds{config_.s_min, config_.s_max});

  const auto& ri = config_.reinit;
  if (sampler_ && iter >= ri.warmup && (iter - ri.warmup) % ri.period == 0 &&
      iter < total - ri.tail_skip) {
    rec.reinit_count = reinit_low_opacity(scene_, *sampler_, ri.threshold, reinit_rng_, &adam_, frozen_);
  }
  return rec;
}

std::vector<IterationRecord> Optimizer::run(int total, const Hook& after_step) {
  std::vector<IterationRecord> history;
  history.reserve(static_cast<std::size_t>(std::max(total, 0)));
  for (int i = 0; i < total; ++i) {
    history.push_back(step(i, total));
    if (after_step) after_step(i, *this);
    if (config_.log_every > 0 && (i % config_.log_every == 0 || i + 1 == total)) {
      const auto& r = history.back();
      std::fprintf(stderr, "iter %5d  loss %.6f  psnr %s dB  lr %.5f\n", r.iter, r.loss,
                   format_psnr(r.psnr).c_str(), static_cast<double>(r.lr));
    }
  }
  return history;
}

FitResult optimize(const Image& target, const Image* target_alpha,
                   std::vector<PrimitiveTemplate> templates, const FitConfig& config,
                   const Optimizer::Hook& after_step) {
  config.validate();
  Rng init_rng(derive_seed(config.seed, kInitStream));
  Scene scene = initial_scene(target, target_alpha, prepare_templates(std::move(templates), config),
                              config, init_rng);
  return optimize_from(std::move(scene), target, target_alpha, config, config.num_iterations,
                       config.seed, {}, after_step);
}

FitResult optimize_from(Scene scene, const Image& target, const Image* target_alpha,
                        const FitConfig& config, int iterations, std::uint64_t seed,
                        std::vector<std::uint8_t> frozen, const Optimizer::Hook& after_step) {
  Optimizer opt(std::move(scene), target, target_alpha, config, seed);
  if (!frozen.empty()) opt.set_frozen(std::move(frozen));
  FitResult result;
  result.history = opt.run(iterations, after_step);
  result.scene = opt.scene();
  return result;
}

RenderOutput render_for_eval(const Scene& scene, const FitConfig& config) {
  RenderOptions ropts;
  ropts.skip_epsilon = config.skip_epsilon;
  ropts.threads = config.threads;
  return render(scene, Backdrop::solid(scene.background.color), ropts, config.tile_size,
                tile_padding(config));
}

void write_history_csv(const std::filesystem::path& path,
                       std::span<const IterationRecord> history) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "iter,loss,psnr,lr,reinit_count\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%s,%.9g,%zu\n", r.iter, r.loss,
                  format_psnr(r.psnr).c_str(), static_cast<double>(r.lr), r.reinit_count);
    out << buf;
  }
}

}  // namespace rasterfit
