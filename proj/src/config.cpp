#include "rasterfit/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rasterfit {

float LrGains::for_slot(std::size_t slot) const noexcept {
  switch (slot) {
    case 0: return x;
    case 1: return y;
    case 2: return s;
    case 3: return theta;
    case 4: return nu;
    default: return c;
  }
}

void FitConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (num_iterations < 1) fail("num_iterations must be >= 1");
  if (!(base_lr > 0.0f)) fail("learning_rate must be > 0");
  for (float g : {gains.x, gains.y, gains.s, gains.nu, gains.theta, gains.c}) {
    if (!(g > 0.0f)) fail("learning-rate gains must be > 0");
  }
  if (!(decay_final_fraction > 0.0f && decay_final_fraction <= 1.0f)) {
    fail("decay_final_fraction must lie in (0, 1]");
  }
  if (!(alpha_max > 0.0f && alpha_max <= 1.0f)) fail("alpha_upper_bound must lie in (0, 1]");
  if (!(mu_blend >= 0.0f && mu_blend <= 1.0f)) fail("c_blend must lie in [0, 1]");
  if (!(s_min > 0.0f && s_min <= s_max)) fail("scale range must satisfy 0 < scale_min <= scale_max");
  if (blur_sigma < 0.0f) fail("blur_sigma must be >= 0");
  if (num_primitives < 1) fail("num_primitives must be >= 1");
  if (mse_weight < 0.0f || gray_l1_weight < 0.0f || alpha_weight < 0.0f) {
    fail("loss weights must be >= 0");
  }
  if (reinit.enabled && !(reinit.threshold > 0.0f && reinit.threshold < 1.0f)) {
    fail("prune_threshold must lie in (0, 1)");
  }
  if (reinit.period < 1) fail("prune_iterations must be >= 1");
  if (tile_size < 1) fail("tile_size must be >= 1");
  const auto& st = video.stuck;
  if (!(st.eta > 0.0f && st.eta < 1.0f)) fail("stuck_eta must lie in (0, 1)");
  if (!(st.zeta > 0.0f && st.zeta < 1.0f)) fail("stuck_zeta must lie in (0, 1)");
  if (st.per_region < 0) fail("stuck_k must be >= 0");
  if (st.grid_rows < 1 || st.grid_cols < 1) fail("stuck grid must be at least 1x1");
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Parser {
  const std::string& key;
  const std::string& value;

  [[noreturn]] void bad(const char* what) const {
    throw Error(ErrorCode::InvalidConfig, key + ": expected " + what + ", got '" + value + "'");
  }

  double number() const {
    // from_chars for double is missing on older toolchains; stod is locale-free for "C".
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) bad("a number");
      return v;
    } catch (const std::logic_error&) {
      bad("a number");
    }
  }
  float real() const { return static_cast<float>(number()); }
  int integer() const {
    int v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad("an integer");
    return v;
  }
  std::uint64_t u64() const {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad("an unsigned integer");
    return v;
  }
  bool flag() const {
    const std::string v = lower(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad("true/false");
  }
  std::vector<int> int_list() const {
    std::vector<int> out;
    for (const auto& item : split_list(value)) {
      Parser sub{key, item};
      out.push_back(sub.integer());
    }
    return out;
  }
};

BackgroundPolicy parse_background(const Parser& p) {
  BackgroundPolicy bg;
  const std::string v = lower(p.value);
  if (v == "white") {
    bg.color = {1, 1, 1};
  } else if (v == "black") {
    bg.color = {0, 0, 0};
  } else if (v == "random" || v == "noise") {
    bg.kind = BackgroundKind::Noise;
  } else {
    const auto parts = split_list(p.value);
    if (parts.size() != 3) p.bad("white, black, random, or r,g,b");
    for (int c = 0; c < 3; ++c) {
      bg.color[c] = Parser{p.key, parts[c]}.real();
      if (bg.color[c] < 0.0f || bg.color[c] > 1.0f) p.bad("channels in [0,1]");
    }
  }
  return bg;
}

using Setter = std::function<void(FitConfig&, const Parser&, const std::filesystem::path&)>;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"target", [](FitConfig& c, const Parser& p, const auto& b) { c.target = resolve(b, p.value); }},
      {"target_alpha", [](FitConfig& c, const Parser& p, const auto& b) { c.target_alpha = resolve(b, p.value); }},
      {"templates", [](FitConfig& c, const Parser& p, const auto& b) {
         c.templates.clear();
         for (const auto& item : split_list(p.value)) {
           c.templates.push_back(item.rfind("builtin:", 0) == 0 ? item : resolve(b, item).string());
         }
       }},
      {"output_dir", [](FitConfig& c, const Parser& p, const auto& b) { c.output_dir = resolve(b, p.value); }},
      {"num_iterations", [](FitConfig& c, const Parser& p, const auto&) { c.num_iterations = p.integer(); }},
      {"learning_rate", [](FitConfig& c, const Parser& p, const auto&) { c.base_lr = p.real(); }},
      {"lr_gain_x", [](FitConfig& c, const Parser& p, const auto&) { c.gains.x = p.real(); }},
      {"lr_gain_y", [](FitConfig& c, const Parser& p, const auto&) { c.gains.y = p.real(); }},
      {"lr_gain_r", [](FitConfig& c, const Parser& p, const auto&) { c.gains.s = p.real(); }},
      {"lr_gain_v", [](FitConfig& c, const Parser& p, const auto&) { c.gains.nu = p.real(); }},
      {"lr_gain_theta", [](FitConfig& c, const Parser& p, const auto&) { c.gains.theta = p.real(); }},
      {"lr_gain_c", [](FitConfig& c, const Parser& p, const auto&) { c.gains.c = p.real(); }},
      {"do_decay", [](FitConfig& c, const Parser& p, const auto&) { c.decay_enabled = p.flag(); }},
      {"decay_final_fraction", [](FitConfig& c, const Parser& p, const auto&) { c.decay_final_fraction = p.real(); }},
      {"loss_type", [](FitConfig& c, const Parser& p, const auto&) {
         const std::string v = lower(p.value);
         if (v == "mse") c.loss = LossKind::Mse;
         else if (v == "spatial" || v == "spatial_constrained") c.loss = LossKind::SpatialConstrained;
         else if (v == "combined") c.loss = LossKind::Combined;
         else p.bad("mse, spatial, or combined");
       }},
      {"mse_weight", [](FitConfig& c, const Parser& p, const auto&) { c.mse_weight = p.real(); }},
      {"gray_l1_weight", [](FitConfig& c, const Parser& p, const auto&) { c.gray_l1_weight = p.real(); }},
      {"alpha_weight", [](FitConfig& c, const Parser& p, const auto&) { c.alpha_weight = p.real(); }},
      {"do_gaussian_blur", [](FitConfig& c, const Parser& p, const auto&) { c.gaussian_blur = p.flag(); }},
      {"blur_sigma", [](FitConfig& c, const Parser& p, const auto&) { c.blur_sigma = p.real(); }},
      {"radial_transparency", [](FitConfig& c, const Parser& p, const auto&) { c.radial_transparency = p.flag(); }},
      {"alpha_upper_bound", [](FitConfig& c, const Parser& p, const auto&) { c.alpha_max = p.real(); }},
      {"c_blend", [](FitConfig& c, const Parser& p, const auto&) { c.mu_blend = p.real(); }},
      {"preserve_aspect", [](FitConfig& c, const Parser& p, const auto&) { c.preserve_aspect = p.flag(); }},
      {"bg_color", [](FitConfig& c, const Parser& p, const auto&) { c.background = parse_background(p); }},
      {"tile_size", [](FitConfig& c, const Parser& p, const auto&) { c.tile_size = p.integer(); }},
      {"skip_epsilon", [](FitConfig& c, const Parser& p, const auto&) { c.skip_epsilon = p.real(); }},
      {"initializer", [](FitConfig& c, const Parser& p, const auto&) {
         const std::string v = lower(p.value);
         if (v == "structure_aware") c.init = InitMode::StructureAware;
         else if (v == "random") c.init = InitMode::Random;
         else p.bad("structure_aware or random");
       }},
      {"num_primitives", [](FitConfig& c, const Parser& p, const auto&) {
         const int n = p.integer();
         if (n < 1) p.bad("a positive count");
         c.num_primitives = static_cast<std::size_t>(n);
       }},
      {"scale_min", [](FitConfig& c, const Parser& p, const auto&) { c.s_min = p.real(); }},
      {"scale_max", [](FitConfig& c, const Parser& p, const auto&) { c.s_max = p.real(); }},
      {"v_init_bias", [](FitConfig& c, const Parser& p, const auto&) { c.v_init_bias = p.real(); }},
      {"std_c_init", [](FitConfig& c, const Parser& p, const auto&) { c.std_c_init = p.real(); }},
      {"variance_window_size", [](FitConfig& c, const Parser& p, const auto&) { c.variance_window = p.integer(); }},
      {"variance_base_prob", [](FitConfig& c, const Parser& p, const auto&) { c.variance_base_prob = p.real(); }},
      {"max_prims_per_pixel", [](FitConfig& c, const Parser& p, const auto&) { c.max_prims_per_pixel = p.integer(); }},
      {"prune", [](FitConfig& c, const Parser& p, const auto&) { c.reinit.enabled = p.flag(); }},
      {"prune_threshold", [](FitConfig& c, const Parser& p, const auto&) { c.reinit.threshold = p.real(); }},
      {"prune_iterations", [](FitConfig& c, const Parser& p, const auto&) { c.reinit.period = p.integer(); }},
      {"prune_warmup", [](FitConfig& c, const Parser& p, const auto&) { c.reinit.warmup = p.integer(); }},
      {"prune_tail_skip", [](FitConfig& c, const Parser& p, const auto&) { c.reinit.tail_skip = p.integer(); }},
      {"frames_dir", [](FitConfig& c, const Parser& p, const auto& b) { c.video.frames_dir = resolve(b, p.value); }},
      {"initial_iterations", [](FitConfig& c, const Parser& p, const auto&) { c.video.initial_iterations = p.integer(); }},
      {"sequential_iterations", [](FitConfig& c, const Parser& p, const auto&) { c.video.sequential_iterations = p.integer(); }},
      {"freeze_unchanged", [](FitConfig& c, const Parser& p, const auto&) { c.video.freeze_unchanged = p.flag(); }},
      {"diff_threshold", [](FitConfig& c, const Parser& p, const auto&) { c.video.tau_diff = p.real(); }},
      {"remove_stuck", [](FitConfig& c, const Parser& p, const auto&) { c.video.stuck.enabled = p.flag(); }},
      {"stuck_grid", [](FitConfig& c, const Parser& p, const auto&) {
         const auto dims = p.int_list();
         if (dims.size() != 2) p.bad("rows,cols");
         c.video.stuck.grid_rows = dims[0];
         c.video.stuck.grid_cols = dims[1];
       }},
      {"stuck_k", [](FitConfig& c, const Parser& p, const auto&) { c.video.stuck.per_region = p.integer(); }},
      {"stuck_tau_scale", [](FitConfig& c, const Parser& p, const auto&) { c.video.stuck.tau_scale = p.real(); }},
      {"stuck_tau_alpha", [](FitConfig& c, const Parser& p, const auto&) { c.video.stuck.tau_alpha = p.real(); }},
      {"stuck_zeta", [](FitConfig& c, const Parser& p, const auto&) { c.video.stuck.zeta = p.real(); }},
      {"stuck_eta", [](FitConfig& c, const Parser& p, const auto&) { c.video.stuck.eta = p.real(); }},
      {"stuck_epochs", [](FitConfig& c, const Parser& p, const auto&) { c.video.stuck.trigger_epochs = p.int_list(); }},
      {"seed", [](FitConfig& c, const Parser& p, const auto&) { c.seed = p.u64(); }},
      {"threads", [](FitConfig& c, const Parser& p, const auto&) { c.threads = p.integer(); }},
      {"log_every", [](FitConfig& c, const Parser& p, const auto&) { c.log_every = p.integer(); }},
      {"dump_every", [](FitConfig& c, const Parser& p, const auto&) { c.dump_every = p.integer(); }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

FitConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  static const std::map<std::string, const Setter*> lookup = [] {
    std::map<std::string, const Setter*> m;
    for (const auto& [name, fn] : setters()) m[name] = &fn;
    return m;
  }();

  FitConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    auto it = lookup.find(key);
    if (it == lookup.end()) {
      throw Error(ErrorCode::UnknownKey,
                  "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    (*it->second)(config, Parser{key, value}, base_dir);
  }
  config.validate();
  return config;
}

FitConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

}  // namespace rasterfit
