#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rasterfit/config.hpp"
#include "rasterfit/grad.hpp"
#include "rasterfit/image.hpp"
#include "rasterfit/prep.hpp"
#include "rasterfit/raster.hpp"
#include "rasterfit/rng.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

// ---------------------------------------------------------------------------
// Losses

/// Scalar loss with its pixel gradients. `d_alpha` is empty when the loss
/// does not read the alpha image.
struct LossResult {
  double value = 0.0;
  Image d_color;
  Image d_alpha;
};

/// Mean squared error over all pixels and channels.
LossResult loss_mse(const Image& rendered, const Image& target);

/// Masked color MSE (mask = target_alpha > 0, normalized by H*W*3) plus
/// lambda * mean squared alpha error over the whole canvas.
LossResult loss_spatial(const Image& rendered, const Image& rendered_alpha,
                        const Image& target, const Image* target_alpha, float lambda);

/// Mean |gray(I) - gray(target)| with Rec. 601 luma weights.
LossResult loss_grayscale_l1(const Image& rendered, const Image& target);

inline constexpr std::array<float, 3> kLumaWeights{0.299f, 0.587f, 0.114f};

struct LossSpec {
  LossKind kind = LossKind::Mse;
  float mse_weight = 1.0f;
  float gray_l1_weight = 0.0f;
  float alpha_weight = 0.3f;
  const Image* target = nullptr;
  const Image* target_alpha = nullptr;

  static LossSpec from_config(const FitConfig& config, const Image& target,
                              const Image* target_alpha);
};

/// Dispatches on spec.kind. `combined` is mse_weight * MSE +
/// gray_l1_weight * grayscale L1.
LossResult evaluate_loss(const LossSpec& spec, const RenderOutput& output);

/// 10 log10(1 / MSE); +infinity for identical images.
double psnr(const Image& rendered, const Image& target);

/// PSNR restricted to pixels where mask > 0.
double masked_psnr(const Image& rendered, const Image& target, const Image& mask);

/// "inf" for the identical-image sentinel, fixed 4 decimals otherwise.
std::string format_psnr(double db);

// ---------------------------------------------------------------------------
// Optimizer

/// base_lr * final_fraction^(iter / (total - 1)) when decaying.
float lr_schedule(int iter, int total, float base_lr, bool decay_enabled,
                  float final_fraction);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments congruent with pack_params. Each primitive keeps its own
/// step count so frozen or re-initialized primitives get correct bias
/// correction when they resume.
struct AdamState {
  ParamLayout layout;
  std::vector<double> m;
  std::vector<double> v;
  std::vector<std::uint32_t> steps;

  AdamState() = default;
  explicit AdamState(std::size_t num_primitives);

  void reset_primitive(std::size_t i);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct StepBounds {
  float s_min = 2.0f;
  float s_max = 20.0f;
};

/// One Adam update with per-group learning rates lr * gain. Frozen
/// primitives (nonzero flag) keep parameters, moments, and step count.
/// Throws LayoutMismatch if the state, gradients, or flags disagree with the
/// scene.
void adam_step(Scene& scene, const Gradients& grads, AdamState& state, float lr,
               const LrGains& gains, std::span<const std::uint8_t> frozen,
               const StepBounds& bounds, const AdamHyper& hyper = {});

/// Re-samples every primitive with sigmoid(nu) < threshold from `sampler`
/// (z and template id kept) and zeroes its Adam moments. Frozen primitives
/// are left alone. Returns the number re-initialized.
std::size_t reinit_low_opacity(Scene& scene, StructureSampler& sampler, float threshold,
                               Rng& rng, AdamState* state = nullptr,
                               std::span<const std::uint8_t> frozen = {});

// ---------------------------------------------------------------------------
// Optimization loop

struct IterationRecord {
  int iter = 0;
  double loss = 0.0;
  double psnr = 0.0;
  float lr = 0.0f;
  std::size_t reinit_count = 0;
};

/// Templates as the optimizer sees them: optional radial falloff, then a
/// transparent border of ceil(3 sigma) texels and the blur.
std::vector<PrimitiveTemplate> prepare_templates(std::vector<PrimitiveTemplate> raw,
                                                 const FitConfig& config);

InitOptions init_options(const FitConfig& config, std::uint32_t num_templates);

/// Initial scene from the configured initializer. Placement always covers
/// the whole canvas; a target alpha only confines later re-initialization.
Scene initial_scene(const Image& target, const Image* target_alpha,
                    std::vector<PrimitiveTemplate> prepared, const FitConfig& config,
                    Rng& rng);

/// Stateful single-image optimizer. One instance drives one target; the
/// video pipeline builds a fresh instance per frame.
class Optimizer {
 public:
  /// Copies target images; `scene` must already hold prepared templates.
  Optimizer(Scene scene, const Image& target, const Image* target_alpha,
            const FitConfig& config, std::uint64_t seed);
  // The reinit sampler points into target_, so instances stay put.
  Optimizer(const Optimizer&) = delete;
  Optimizer& operator=(const Optimizer&) = delete;

  /// Runs one iteration and returns its record. `total` is the schedule
  /// length used for learning-rate decay and the reinit tail.
  IterationRecord step(int iter, int total);

  using Hook = std::function<void(int iter, Optimizer&)>;

  /// Runs iterations [0, total), calling `after_step` after each update.
  std::vector<IterationRecord> run(int total, const Hook& after_step = {});

  const Scene& scene() const noexcept { return scene_; }
  Scene& scene() noexcept { return scene_; }
  const AdamState& adam() const noexcept { return adam_; }
  AdamState& adam() noexcept { return adam_; }

  void set_frozen(std::vector<std::uint8_t> frozen);
  const std::vector<std::uint8_t>& frozen() const noexcept { return frozen_; }

  const FitConfig& config() const noexcept { return config_; }

 private:
  Backdrop iteration_backdrop();

  Scene scene_;
  Image target_;
  std::optional<Image> target_alpha_;
  FitConfig config_;
  LossSpec loss_spec_;
  AdamState adam_;
  std::vector<std::uint8_t> frozen_;
  Rng background_rng_;
  Rng reinit_rng_;
  std::optional<StructureSampler> sampler_;
};

struct FitResult {
  Scene scene;
  std::vector<IterationRecord> history;
};

/// Full pipeline: prepare templates, initialize, optimize.
FitResult optimize(const Image& target, const Image* target_alpha,
                   std::vector<PrimitiveTemplate> templates, const FitConfig& config,
                   const Optimizer::Hook& after_step = {});

/// Continues from an existing scene (templates already prepared).
FitResult optimize_from(Scene scene, const Image& target, const Image* target_alpha,
                        const FitConfig& config, int iterations, std::uint64_t seed,
                        std::vector<std::uint8_t> frozen = {},
                        const Optimizer::Hook& after_step = {});

/// Renders with the solid evaluation background (the configured color).
RenderOutput render_for_eval(const Scene& scene, const FitConfig& config);

/// CSV with header iter,loss,psnr,lr,reinit_count.
void write_history_csv(const std::filesystem::path& path,
                       std::span<const IterationRecord> history);

}  // namespace rasterfit
