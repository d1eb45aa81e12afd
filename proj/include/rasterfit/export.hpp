#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rasterfit/image.hpp"
#include "rasterfit/raster.hpp"
#include "rasterfit/scene.hpp"

namespace rasterfit {

/// Copy of the scene with positions, scales, and canvas multiplied by rho.
Scene scale_scene(const Scene& scene, int rho);

/// One primitive rendered alone into a cropped premultiplied RGBA buffer.
struct Layer {
  std::size_t primitive = 0;
  PixelRect bbox;  // at export scale, inclusive
  Image rgba;      // bbox.width() x bbox.height() x 4, premultiplied
};

/// Stage 1 + 2 of the export: per-primitive bboxes at scale rho, then each
/// primitive rendered in isolation (parallel over primitives). Primitives
/// whose bbox misses the canvas yield no layer and are listed in `skipped`.
std::vector<Layer> render_layers(const Scene& scene, int rho, int threads,
                                 std::vector<std::size_t>* skipped = nullptr);

struct ManifestLayer {
  std::size_t primitive = 0;
  std::uint32_t z = 0;           // stacking order, 0 = back-most
  std::uint32_t depth_rank = 0;  // the scene's z (0 = front-most)
  PixelRect bbox;
  std::string file;
  PrimitiveParams params;
};

struct LayerManifest {
  int scale = 1;
  int width = 0;
  int height = 0;
  std::array<float, 3> background{1, 1, 1};
  std::string composite_file;
  std::vector<ManifestLayer> layers;  // back to front
  std::vector<std::size_t> skipped;   // primitives with a degenerate bbox
};

/// Writes 16-bit premultiplied RGBA layer PNGs, manifest.json, and an 8-bit
/// composite.png into `outdir`. rho must be 1, 2, or 4.
LayerManifest export_layers(const Scene& scene, int rho, const std::filesystem::path& outdir,
                            int threads = 0);

LayerManifest read_manifest(const std::filesystem::path& path);

/// Back-to-front "over" of every layer in the manifest onto its background.
Image composite_layers(const LayerManifest& manifest, const std::filesystem::path& dir);

/// Same, from in-memory layers (ordered back to front).
Image composite_layers(const std::vector<Layer>& back_to_front, int width, int height,
                       const std::array<float, 3>& background);

/// Reference composite at scale rho, rendered with no skip threshold.
RenderOutput render_at_scale(const Scene& scene, int rho, int threads = 0);

}  // namespace rasterfit
