#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rasterfit/image.hpp"
#include "rasterfit/raster.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

/// Loss partials for one primitive, in canvas-pixel and radian units.
struct ParamGrad {
  double x = 0.0;
  double y = 0.0;
  double s = 0.0;
  double theta = 0.0;
  double nu = 0.0;
  std::array<double, 3> c_var{};

  double& slot(std::size_t i) noexcept;
  double slot(std::size_t i) const noexcept;

  ParamGrad& operator+=(const ParamGrad& o) noexcept;
  friend bool operator==(const ParamGrad&, const ParamGrad&) = default;
};

/// Per-primitive gradients in scene order.
struct Gradients {
  std::vector<ParamGrad> per_primitive;

  Gradients() = default;
  explicit Gradients(std::size_t n) : per_primitive(n) {}

  std::size_t size() const noexcept { return per_primitive.size(); }
  /// Flattened in pack_params order.
  std::vector<double> flatten() const;
  bool all_finite() const;

  friend bool operator==(const Gradients&, const Gradients&) = default;
};

/// (dm/dU, dm/dV) of the bilinear sample, zero outside the template.
std::array<float, 2> bilinear_grad(const PrimitiveTemplate& t, float U, float V,
                                   int channel);

struct BackwardOptions {
  int threads = 0;
};

/// Analytic gradients from the saved forward state.
///
/// `dL_dI` is H x W x 3. `dL_dA` is H x W x 1 or empty when the loss does
/// not touch the alpha image. The background each pixel saw is taken from
/// `saved`, so it must come from the same iteration.
Gradients backward(const Scene& scene, const SavedForward& saved, const Image& dL_dI,
                   const Image& dL_dA, const BackwardOptions& options = {});

/// Sequential reference backward with no tiling and no saved state: every
/// primitive is evaluated at every pixel, then each pixel is swept in
/// reverse. Used for benchmarking and as a second derivation.
Gradients backward_naive(const Scene& scene, const Backdrop& backdrop,
                         const Image& dL_dI, const Image& dL_dA);

/// Per-pixel contribution of each pixel to dL/dx and dL/dy of one primitive
/// (H x W x 2). Summing the map over pixels gives backward()'s x and y.
Image position_gradient_map(const Scene& scene, const SavedForward& saved,
                            const Image& dL_dI, const Image& dL_dA,
                            std::uint32_t primitive);

/// Elementwise sum in the given order.
Gradients reduce_partials(std::span<const Gradients> partials);

// ---------------------------------------------------------------------------
// Finite-difference oracle

using PreciseLoss = std::function<double(const BasicRenderOutput<double>&)>;

struct StepSizes {
  double position = 1e-2;
  double scale = 1e-2;
  double theta = 1e-3;
  double nu = 1e-3;
  double color = 1e-3;

  double for_slot(std::size_t slot) const noexcept;
};

/// Central differences (L(p+h) - L(p-h)) / 2h per scalar parameter, rendered
/// with render_naive_precise.
Gradients finite_diff_grad(const Scene& scene, const Backdrop& backdrop,
                           const PreciseLoss& loss, const StepSizes& h = {});

// ---------------------------------------------------------------------------
// Gradient-check suite

struct GradcheckConfig {
  int seeds = 20;
  std::uint64_t first_seed = 1;
  int max_primitives = 8;
  int max_canvas = 48;
  float blur_sigma = 1.0f;
  double rel_tol = 1e-2;
  double abs_tol = 1e-5;
  // Geometric steps are kept well below a texel so the central difference
  // rarely straddles a bilinear lattice line.
  StepSizes steps{1e-4, 1e-4, 1e-5, 1e-3, 1e-3};
  int threads = 0;
};

struct GradcheckFailure {
  std::uint64_t seed;
  std::size_t primitive;
  std::string parameter;
  double analytic;
  double numeric;
};

struct GradcheckReport {
  int scenes = 0;
  std::size_t parameters_checked = 0;
  double worst_rel_error = 0.0;  // over parameters failing the absolute test
  double worst_abs_error = 0.0;
  std::vector<GradcheckFailure> failures;

  bool passed() const noexcept { return failures.empty(); }
};

/// Random small scenes with MSE loss against a random target; compares
/// backward() with finite_diff_grad() parameter by parameter.
GradcheckReport run_gradcheck(const GradcheckConfig& config);

const char* slot_name(std::size_t slot);

}  // namespace rasterfit
