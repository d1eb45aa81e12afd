#include "rasterfit/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

// jpeglib.h expects size_t and FILE to be declared first.
#include <jpeglib.h>

#include "rasterfit/prep.hpp"

namespace rasterfit {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

// --- PNG -------------------------------------------------------------------

struct PngReadSource {
  const std::vector<unsigned char>* bytes;
  std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->pos + count > src->bytes->size()) png_error(png, "unexpected end of data");
  std::memcpy(out, src->bytes->data() + src->pos, count);
  src->pos += count;
}

[[noreturn]] void png_throw_error(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message) *message = msg;
  png_longjmp(png, 1);
}

void png_quiet_warning(png_structp, png_const_charp) {}

struct PngRaw {
  std::vector<png_byte> bytes;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int depth = 0;
  int channels = 0;
};

// Only this frame sits between setjmp and libpng's longjmp; all state it
// writes lives in `out`, so nothing local can be clobbered.
bool read_png_rows(png_structp png, png_infop info, PngReadSource* src, PngRaw& out) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_read_fn(png, src, png_read_from_memory);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // host order for little-endian reads below
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  out.depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.height);
  out.rows.resize(out.height);
  for (png_uint_32 y = 0; y < out.height; ++y) out.rows[y] = out.bytes.data() + y * stride;
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  return true;
}

LoadedImage decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::string message = "malformed PNG";
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_throw_error,
                                           png_quiet_warning);
  if (!png) throw Error(ErrorCode::DecodeError, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  PngReadSource src{&bytes, 0};
  PngRaw pr;
  const bool ok = info && read_png_rows(png, info, &src, pr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw Error(ErrorCode::DecodeError, name + ": " + message);

  const auto& raw = pr.bytes;
  const png_uint_32 width = pr.width;
  const png_uint_32 height = pr.height;
  const int depth = pr.depth;
  const int channels = pr.channels;
  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  const bool has_alpha = channels == 2 || channels == 4;
  const int color_channels = channels >= 3 ? 3 : 1;
  LoadedImage out{Image(w, h, 3), std::nullopt};
  if (has_alpha) out.alpha = Image(w, h, 1);
  const double scale = depth == 16 ? 65535.0 : 255.0;
  auto sample = [&](std::size_t i) -> float {
    if (depth == 16) {
      std::uint16_t v;
      std::memcpy(&v, raw.data() + 2 * i, 2);
      return static_cast<float>(v / scale);
    }
    return static_cast<float>(raw[i] / scale);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * channels;
      for (int c = 0; c < 3; ++c) {
        out.rgb.at(x, y, c) = sample(base + (color_channels == 3 ? c : 0));
      }
      if (has_alpha) out.alpha->at(x, y) = sample(base + channels - 1);
    }
  }
  return out;
}

// --- JPEG ------------------------------------------------------------------

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_throw_error(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

LoadedImage decode_jpeg(const std::vector<unsigned char>& bytes, const std::string& name) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_throw_error;
  err.message[0] = '\0';

  std::vector<unsigned char> raw;
  int w = 0;
  int h = 0;
  int channels = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::DecodeError, name + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  channels = cinfo.output_components;
  raw.resize(static_cast<std::size_t>(w) * h * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = raw.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  LoadedImage out{Image(w, h, 3), std::nullopt};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * channels;
      for (int c = 0; c < 3; ++c) {
        out.rgb.at(x, y, c) = raw[base + (channels == 3 ? c : 0)] / 255.0f;
      }
    }
  }
  return out;
}

bool write_png_rows(png_structp png, png_infop info, std::FILE* fp, int w, int h, int depth,
                    int color, std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

LoadedImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    return decode_png(bytes, path.string());
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return decode_jpeg(bytes, path.string());
  }
  throw Error(ErrorCode::UnsupportedFormat, path.string() + ": not a PNG or JPEG file");
}

void save_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw Error(ErrorCode::UnsupportedFormat, "PNG bit depth must be 8 or 16");
  }
  int color = 0;
  switch (image.channels()) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw Error(ErrorCode::UnsupportedFormat, "PNG output needs 1, 3, or 4 channels");
  }
  if (image.empty()) throw Error(ErrorCode::ShapeMismatch, "cannot write an empty image");

  const std::size_t bytes_per = bit_depth / 8;
  const std::size_t stride = static_cast<std::size_t>(image.width()) * image.channels() * bytes_per;
  std::vector<png_byte> raw(stride * image.height());
  const double max_value = bit_depth == 16 ? 65535.0 : 255.0;
  const auto src = image.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = std::clamp(static_cast<double>(src[i]), 0.0, 1.0);
    const auto q = static_cast<std::uint32_t>(std::lround(v * max_value));
    if (bit_depth == 16) {
      raw[2 * i] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
      raw[2 * i + 1] = static_cast<png_byte>(q & 0xFF);
    } else {
      raw[i] = static_cast<png_byte>(q);
    }
  }

  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  std::string message = "PNG encoding failed";
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_throw_error,
                                            png_quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  std::vector<png_bytep> rows(image.height());
  for (int y = 0; y < image.height(); ++y) rows[y] = raw.data() + y * stride;
  const bool ok = png && info &&
                  write_png_rows(png, info, fp, image.width(), image.height(), bit_depth, color, rows);
  png_destroy_write_struct(&png, &info);
  const bool closed = std::fclose(fp) == 0;
  if (!ok || !closed) throw Error(ErrorCode::IoError, path.string() + ": " + message);
}

Image with_alpha(const Image& rgb, const Image& alpha) {
  if (rgb.width() != alpha.width() || rgb.height() != alpha.height()) {
    throw Error(ErrorCode::ShapeMismatch, "with_alpha: sizes differ");
  }
  Image out(rgb.width(), rgb.height(), 4);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb.at(x, y, std::min(c, rgb.channels() - 1));
      out.at(x, y, 3) = alpha.at(x, y);
    }
  }
  return out;
}

std::vector<Image> load_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "frames directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::IoError, "no PNG frames in " + dir.string());
  std::vector<Image> frames;
  for (const auto& f : files) frames.push_back(load_image(f).rgb);
  return frames;
}

std::vector<PrimitiveTemplate> load_templates(const std::vector<std::string>& specs) {
  constexpr int kBuiltinSize = 64;
  std::vector<PrimitiveTemplate> out;
  for (const auto& spec : specs) {
    if (spec == "builtin:disk") {
      out.push_back(make_disk_template(kBuiltinSize));
    } else if (spec == "builtin:square") {
      out.push_back(make_square_template(kBuiltinSize));
    } else if (spec == "builtin:ring") {
      out.push_back(make_ring_template(kBuiltinSize));
    } else if (spec.rfind("builtin:", 0) == 0) {
      throw Error(ErrorCode::InvalidConfig, "unknown builtin template '" + spec + "'");
    } else {
      const LoadedImage img = load_image(spec);
      out.push_back(template_from_image(img.rgb, img.alpha ? &*img.alpha : nullptr));
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no templates configured");
  return out;
}

// ---------------------------------------------------------------------------
// Scene files

namespace {

constexpr unsigned char kMagic[8] = {'R', 'F', 'S', 'C', 'E', 'N', 'E', '\0'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const unsigned char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw Error(ErrorCode::CorruptScene, "scene file is truncated");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint64_t template_hash(const PrimitiveTemplate& t) {
  Writer w;
  for (float v : t.rgba) w.f32(v);
  return fnv1a(w.bytes().data(), w.bytes().size());
}

}  // namespace

std::vector<unsigned char> encode_scene(const Scene& scene) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kSceneFormatVersion);
  w.i32(scene.canvas_w);
  w.i32(scene.canvas_h);
  w.f32(scene.alpha_max);
  w.f32(scene.mu_blend);
  w.u8(scene.preserve_aspect ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(scene.background.kind));
  for (float c : scene.background.color) w.f32(c);
  w.u32(static_cast<std::uint32_t>(scene.templates.size()));
  for (const auto& t : scene.templates) {
    w.i32(t.width);
    w.i32(t.height);
    w.u64(template_hash(t));
    for (float v : t.rgba) w.f32(v);
  }
  w.u32(static_cast<std::uint32_t>(scene.primitives.size()));
  for (const auto& p : scene.primitives) {
    for (float v : {p.x, p.y, p.s, p.theta, p.nu, p.c_var[0], p.c_var[1], p.c_var[2]}) w.f32(v);
    w.u32(p.template_id);
    w.u32(p.z);
  }
  const std::uint64_t checksum = fnv1a(w.bytes().data(), w.bytes().size());
  w.u64(checksum);
  return std::move(w.bytes());
}

Scene decode_scene(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::CorruptScene, "not a scene file (bad magic)");
  }
  Reader header(bytes, bytes.size());
  for (std::size_t i = 0; i < sizeof kMagic; ++i) header.u8();
  const std::uint32_t version = header.u32();
  if (version != kSceneFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "scene format version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kSceneFormatVersion) + ")");
  }
  if (bytes.size() < 8 + 4 + 8) throw Error(ErrorCode::CorruptScene, "scene file is truncated");
  const std::size_t payload = bytes.size() - 8;
  Reader tail(bytes, bytes.size());
  for (std::size_t i = 0; i < payload; ++i) tail.u8();
  if (tail.u64() != fnv1a(bytes.data(), payload)) {
    throw Error(ErrorCode::CorruptScene, "scene file checksum mismatch");
  }

  Reader r(bytes, payload);
  for (std::size_t i = 0; i < sizeof kMagic + 4; ++i) r.u8();
  Scene scene;
  scene.canvas_w = r.i32();
  scene.canvas_h = r.i32();
  scene.alpha_max = r.f32();
  scene.mu_blend = r.f32();
  scene.preserve_aspect = r.u8() != 0;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw Error(ErrorCode::CorruptScene, "unknown background kind");
  scene.background.kind = static_cast<BackgroundKind>(kind);
  for (float& c : scene.background.color) c = r.f32();

  const std::uint32_t num_templates = r.u32();
  for (std::uint32_t i = 0; i < num_templates; ++i) {
    const int w = r.i32();
    const int h = r.i32();
    if (w < 0 || h < 0) throw Error(ErrorCode::CorruptScene, "negative template size");
    const std::uint64_t hash = r.u64();
    const std::size_t count = static_cast<std::size_t>(w) * h * 4;
    r.need(count * 4);
    PrimitiveTemplate t(w, h);
    for (float& v : t.rgba) v = r.f32();
    if (template_hash(t) != hash) {
      throw Error(ErrorCode::CorruptScene, "template content hash mismatch", i);
    }
    scene.templates.push_back(std::move(t));
  }
  const std::uint32_t num_prims = r.u32();
  r.need(static_cast<std::size_t>(num_prims) * 40);
  scene.primitives.resize(num_prims);
  for (auto& p : scene.primitives) {
    p.x = r.f32();
    p.y = r.f32();
    p.s = r.f32();
    p.theta = r.f32();
    p.nu = r.f32();
    for (float& c : p.c_var) c = r.f32();
    p.template_id = r.u32();
    p.z = r.u32();
  }
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptScene, "trailing bytes in scene file");
  validate_scene(scene);
  return scene;
}

void save_scene(const std::filesystem::path& path, const Scene& scene) {
  write_file(path, encode_scene(scene));
}

Scene load_scene(const std::filesystem::path& path) { return decode_scene(read_file(path)); }

}  // namespace rasterfit
