#include "rasterfit/export.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "rasterfit/io.hpp"
#include "rasterfit/parallel.hpp"

namespace rasterfit {

using ordered_json = nlohmann::ordered_json;

Scene scale_scene(const Scene& scene, int rho) {
  if (rho != 1 && rho != 2 && rho != 4) {
    throw Error(ErrorCode::InvalidConfig, "export scale must be 1, 2, or 4");
  }
  Scene out = scene;
  const float f = static_cast<float>(rho);
  out.canvas_w *= rho;
  out.canvas_h *= rho;
  for (auto& p : out.primitives) {
    p.x *= f;
    p.y *= f;
    p.s *= f;
  }
  return out;
}

std::vector<Layer> render_layers(const Scene& scene, int rho, int threads,
                                 std::vector<std::size_t>* skipped) {
  validate_scene(scene);
  const Scene big = scale_scene(scene, rho);
  const std::size_t n = big.size();

  // Stage 1: bounding boxes at export scale. The one-pixel safety margin
  // scales too, so boxes grow exactly with rho up to rounding.
  std::vector<PixelRect> boxes(n);
  const float margin = static_cast<float>(rho);
  for (std::size_t i = 0; i < n; ++i) boxes[i] = conservative_bbox(big, big.primitives[i], margin);

  // Stage 2: isolated renders into disjoint buffers.
  std::vector<Layer> layers(n);
  const float mu = big.mu_blend;
  const bool needs_template_color = mu > 0.0f;
  parallel_for(n, threads, [&](std::size_t i) {
    const PixelRect& box = boxes[i];
    if (box.empty()) return;
    Layer& layer = layers[i];
    layer.primitive = i;
    layer.bbox = box;
    layer.rgba = Image(box.width(), box.height(), 4);
    const Placement<float> pl = make_placement<float>(big, big.primitives[i]);
    TexelSample<float> sample;
    for (int py = box.y0; py <= box.y1; ++py) {
      for (int px = box.x0; px <= box.x1; ++px) {
        const PrimCoord<float> tex = pl.to_texel(static_cast<float>(px) + 0.5f,
                                                 static_cast<float>(py) + 0.5f);
        if (!sample_texels(*pl.tmpl, tex.u, tex.v, sample, needs_template_color ? 0 : 3, 4)) {
          continue;
        }
        const float alpha = pl.opacity * sample.value[3];
        const int lx = px - box.x0;
        const int ly = py - box.y0;
        for (int c = 0; c < 3; ++c) {
          float color = pl.var_color[c];
          if (needs_template_color) color += mu * sample.value[c];
          layer.rgba.at(lx, ly, c) = alpha * color;
        }
        layer.rgba.at(lx, ly, 3) = alpha;
      }
    }
  });

  std::vector<Layer> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (boxes[i].empty()) {
      if (skipped) skipped->push_back(i);
      continue;
    }
    kept.push_back(std::move(layers[i]));
  }
  return kept;
}

Image composite_layers(const std::vector<Layer>& back_to_front, int width, int height,
                       const std::array<float, 3>& background) {
  Image out(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = background[c];
    }
  }
  for (const Layer& layer : back_to_front) {
    const PixelRect& r = layer.bbox;
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) {
        const int lx = x - r.x0;
        const int ly = y - r.y0;
        const float a = layer.rgba.at(lx, ly, 3);
        for (int c = 0; c < 3; ++c) {
          out.at(x, y, c) = layer.rgba.at(lx, ly, c) + (1.0f - a) * out.at(x, y, c);
        }
      }
    }
  }
  return out;
}

RenderOutput render_at_scale(const Scene& scene, int rho, int threads) {
  RenderOptions opts;
  opts.skip_epsilon = 0.0f;
  opts.threads = threads;
  return render(scale_scene(scene, rho), Backdrop::solid(scene.background.color), opts,
                kDefaultTileSize, 2.0f);
}

namespace {

ordered_json bbox_json(const PixelRect& r) {
  return ordered_json{{"x", r.x0}, {"y", r.y0}, {"width", r.width()}, {"height", r.height()}};
}

ordered_json params_json(const PrimitiveParams& p) {
  return ordered_json{{"x", p.x},
                      {"y", p.y},
                      {"s", p.s},
                      {"theta", p.theta},
                      {"nu", p.nu},
                      {"c_var", {p.c_var[0], p.c_var[1], p.c_var[2]}},
                      {"template_id", p.template_id}};
}

std::string layer_file_name(std::size_t stack_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer_%05zu.png", stack_index);
  return buf;
}

}  // namespace

LayerManifest export_layers(const Scene& scene, int rho, const std::filesystem::path& outdir,
                            int threads) {
  std::vector<std::size_t> skipped;
  std::vector<Layer> layers = render_layers(scene, rho, threads, &skipped);
  // Back to front: descending scene z.
  std::sort(layers.begin(), layers.end(), [&](const Layer& a, const Layer& b) {
    return scene.primitives[a.primitive].z > scene.primitives[b.primitive].z;
  });

  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + outdir.string() + ": " + ec.message());

  const auto n = static_cast<std::uint32_t>(scene.size());
  LayerManifest manifest;
  manifest.scale = rho;
  manifest.width = scene.canvas_w * rho;
  manifest.height = scene.canvas_h * rho;
  manifest.background = scene.background.color;
  manifest.composite_file = "composite.png";
  manifest.skipped = skipped;

  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& layer = layers[k];
    ManifestLayer entry;
    entry.primitive = layer.primitive;
    entry.depth_rank = scene.primitives[layer.primitive].z;
    entry.z = n - 1 - entry.depth_rank;
    entry.bbox = layer.bbox;
    entry.file = layer_file_name(k);
    entry.params = scene.primitives[layer.primitive];
    save_png(outdir / entry.file, layer.rgba, 16);
    manifest.layers.push_back(std::move(entry));
  }

  const RenderOutput composite = render_at_scale(scene, rho, threads);
  save_png(outdir / manifest.composite_file, composite.color, 8);

  ordered_json doc;
  doc["format"] = "rasterfit-layers";
  doc["version"] = 1;
  doc["scale"] = rho;
  doc["canvas"] = {{"width", manifest.width}, {"height", manifest.height}};
  doc["background"] = {manifest.background[0], manifest.background[1], manifest.background[2]};
  doc["premultiplied"] = true;
  doc["composite"] = manifest.composite_file;
  ordered_json layer_list = ordered_json::array();
  for (const auto& l : manifest.layers) {
    layer_list.push_back(ordered_json{{"z", l.z},
                                      {"depth_rank", l.depth_rank},
                                      {"primitive", l.primitive},
                                      {"file", l.file},
                                      {"bbox", bbox_json(l.bbox)},
                                      {"params", params_json(l.params)}});
  }
  doc["layers"] = std::move(layer_list);
  ordered_json skipped_list = ordered_json::array();
  for (std::size_t i : manifest.skipped) {
    skipped_list.push_back(ordered_json{{"primitive", i}, {"reason", "DegenerateBBox"}});
  }
  doc["skipped"] = std::move(skipped_list);

  std::ofstream out(outdir / "manifest.json");
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest in " + outdir.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "manifest write failed");
  return manifest;
}

LayerManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
    LayerManifest m;
    m.scale = doc.at("scale").get<int>();
    m.width = doc.at("canvas").at("width").get<int>();
    m.height = doc.at("canvas").at("height").get<int>();
    for (int c = 0; c < 3; ++c) m.background[c] = doc.at("background").at(c).get<float>();
    m.composite_file = doc.at("composite").get<std::string>();
    for (const auto& l : doc.at("layers")) {
      ManifestLayer e;
      e.z = l.at("z").get<std::uint32_t>();
      e.depth_rank = l.at("depth_rank").get<std::uint32_t>();
      e.primitive = l.at("primitive").get<std::size_t>();
      e.file = l.at("file").get<std::string>();
      const auto& b = l.at("bbox");
      e.bbox.x0 = b.at("x").get<int>();
      e.bbox.y0 = b.at("y").get<int>();
      e.bbox.x1 = e.bbox.x0 + b.at("width").get<int>() - 1;
      e.bbox.y1 = e.bbox.y0 + b.at("height").get<int>() - 1;
      const auto& p = l.at("params");
      e.params.x = p.at("x").get<float>();
      e.params.y = p.at("y").get<float>();
      e.params.s = p.at("s").get<float>();
      e.params.theta = p.at("theta").get<float>();
      e.params.nu = p.at("nu").get<float>();
      for (int c = 0; c < 3; ++c) e.params.c_var[c] = p.at("c_var").at(c).get<float>();
      e.params.template_id = p.at("template_id").get<std::uint32_t>();
      e.params.z = e.depth_rank;
      m.layers.push_back(std::move(e));
    }
    for (const auto& s : doc.at("skipped")) m.skipped.push_back(s.at("primitive").get<std::size_t>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::DecodeError, path.string() + ": " + e.what());
  }
}

Image composite_layers(const LayerManifest& manifest, const std::filesystem::path& dir) {
  std::vector<Layer> layers;
  layers.reserve(manifest.layers.size());
  for (const auto& entry : manifest.layers) {
    const LoadedImage img = load_image(dir / entry.file);
    if (!img.alpha || img.rgb.width() != entry.bbox.width() ||
        img.rgb.height() != entry.bbox.height()) {
      throw Error(ErrorCode::DecodeError, entry.file + " does not match its manifest bbox");
    }
    Layer layer;
    layer.primitive = entry.primitive;
    layer.bbox = entry.bbox;
    layer.rgba = with_alpha(img.rgb, *img.alpha);
    layers.push_back(std::move(layer));
  }
  return composite_layers(layers, manifest.width, manifest.height, manifest.background);
}

}  // namespace rasterfit
