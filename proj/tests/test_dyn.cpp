#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rasterfit/dyn.hpp"
#include "rasterfit/synth.hpp"
#include "test_helpers.hpp"

using namespace rasterfit;
using rasterfit::testing::blank_scene;
using rasterfit::testing::error_code_of;
using rasterfit::testing::prim;

namespace {

FitConfig small_video_config() {
  FitConfig config;
  config.num_primitives = 40;
  config.s_max = 8.0f;
  config.seed = 3;
  config.video.initial_iterations = 25;
  config.video.sequential_iterations = 10;
  return config;
}

Scene random_layout(std::size_t n, int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene = blank_scene(w, h, make_disk_template(16));
  for (std::size_t i = 0; i < n; ++i) {
    scene.primitives.push_back(prim(static_cast<float>(rng.uniform(0, w)), static_cast<float>(rng.uniform(0, h)),
                                    static_cast<float>(rng.uniform(1, 6)), 0, 0, {},
                                    static_cast<std::uint32_t>(i)));
  }
  return scene;
}

StuckPolicy single_region() {
  StuckPolicy p;
  p.enabled = true;
  p.grid_rows = 1;
  p.grid_cols = 1;
  return p;
}

}  // namespace

TEST(DiffMask, IdenticalFramesAreClean) {
  const Image f = pattern_image(20, 16, 1);
  EXPECT_EQ(diff_mask(f, f).count(), 0u);
}

TEST(DiffMask, SinglePixelChange) {
  const Image a = pattern_image(20, 16, 1);
  Image b = a;
  b.at(7, 3, 1) = b.at(7, 3, 1) > 0.5f ? b.at(7, 3, 1) - 0.5f : b.at(7, 3, 1) + 0.5f;
  const DiffMask m = diff_mask(a, b);
  EXPECT_EQ(m.count(), 1u);
  EXPECT_TRUE(m.at(7, 3));
}

TEST(DiffMask, ThresholdIsStrict) {
  const Image a(4, 4, 3, 0.5f);
  Image b = a;
  b.at(1, 1, 0) += 1.0f / 255.0f;
  b.at(2, 2, 2) += 3.0f / 255.0f;
  const DiffMask m = diff_mask(a, b);
  EXPECT_FALSE(m.at(1, 1));
  EXPECT_TRUE(m.at(2, 2));
  EXPECT_EQ(diff_mask(a, b, 0.0f).count(), 2u);
}

TEST(DiffMask, MovingSquareSymmetricDifference) {
  const int w = 48, h = 40;
  const auto frames = moving_square_video(w, h, 3);
  for (int f = 1; f < 3; ++f) {
    const DiffMask m = diff_mask(frames[f - 1], frames[f]);
    const SquareState before = moving_square_state(w, h, f - 1);
    const SquareState after = moving_square_state(w, h, f);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        EXPECT_EQ(m.at(x, y), before.covers(x, y) != after.covers(x, y)) << x << "," << y;
      }
    }
  }
}

TEST(DiffMask, ShapeMismatch) {
  EXPECT_EQ(error_code_of([] { diff_mask(Image(3, 3, 3), Image(3, 4, 3)); }), ErrorCode::ShapeMismatch);
}

TEST(FreezeFlags, AllOrNothingMasks) {
  const Scene scene = random_layout(30, 40, 30, 1);
  DiffMask mask{40, 30, std::vector<std::uint8_t>(1200, 1)};
  for (auto f : freeze_flags(scene, mask, 2.0f)) EXPECT_EQ(f, 0);
  std::fill(mask.bits.begin(), mask.bits.end(), 0);
  for (auto f : freeze_flags(scene, mask, 2.0f)) EXPECT_EQ(f, 1);
}

TEST(FreezeFlags, SingleChangedPixelMatchesBBoxScan) {
  const Scene scene = random_layout(60, 40, 30, 2);
  for (auto [px, py] : {std::pair{10, 10}, std::pair{0, 29}, std::pair{39, 0}}) {
    DiffMask mask{40, 30, std::vector<std::uint8_t>(1200, 0)};
    mask.bits[static_cast<std::size_t>(py) * 40 + px] = 1;
    const auto flags = freeze_flags(scene, mask, 5.0f);
    for (std::size_t i = 0; i < scene.size(); ++i) {
      const PixelRect r = conservative_bbox(scene, scene.primitives[i], 5.0f);
      EXPECT_EQ(flags[i] == 0, r.contains(px, py)) << i;
    }
  }
}

TEST(RemoveStuck, NoQualifierLeavesSceneUnchanged) {
  Scene scene = random_layout(20, 64, 64, 3);
  for (auto& p : scene.primitives) p.nu = 3.0f;  // opaque but small
  const Scene before = scene;
  EXPECT_TRUE(remove_stuck(scene, {}, StuckPolicy{}).empty());
  EXPECT_EQ(scene, before);
}

TEST(RemoveStuck, SingleQualifierDecays) {
  Scene scene = blank_scene(50, 50, make_disk_template(16));
  scene.primitives.push_back(prim(25, 25, 12, 0, 2.0f));
  const auto decayed = remove_stuck(scene, {}, single_region());
  ASSERT_EQ(decayed, std::vector<std::size_t>{0});
  EXPECT_FLOAT_EQ(scene.primitives[0].nu, 0.6f);
}

TEST(RemoveStuck, TopKByScore) {
  // Seven large opaque primitives in one region. The back-most one has the
  // highest score but sits below the front-ness cut; of the other six, the
  // four highest s * alpha decay.
  Scene scene = blank_scene(100, 100, make_disk_template(16));
  const float scales[7] = {50, 15, 22, 30, 12, 27, 18};
  const float nus[7] = {4, 1.2f, 2.5f, 1.0f, 3.0f, 1.9f, 2.2f};
  for (std::uint32_t i = 0; i < 7; ++i) {
    scene.primitives.push_back(prim(50, 50, scales[i], 0, nus[i], {}, 6 - i));
  }
  StuckPolicy policy = single_region();
  policy.zeta = 0.1f;
  policy.per_region = 4;

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 1; i < 7; ++i) {
    scored.push_back({-static_cast<double>(scales[i]) / (1.0 + std::exp(-static_cast<double>(nus[i]))), i});
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::size_t> expected;
  for (int k = 0; k < 4; ++k) expected.push_back(scored[k].second);
  std::sort(expected.begin(), expected.end());

  const Scene before = scene;
  EXPECT_EQ(remove_stuck(scene, {}, policy), expected);
  for (std::size_t i = 0; i < 7; ++i) {
    const bool hit = std::find(expected.begin(), expected.end(), i) != expected.end();
    EXPECT_FLOAT_EQ(scene.primitives[i].nu, hit ? 0.3f * nus[i] : nus[i]) << i;
  }
}

TEST(RemoveStuck, FrozenPrimitivesAreIgnored) {
  Scene scene = blank_scene(50, 50, make_disk_template(16));
  scene.primitives.push_back(prim(25, 25, 12, 0, 2.0f));
  const std::vector<std::uint8_t> frozen{1};
  EXPECT_TRUE(remove_stuck(scene, frozen, single_region()).empty());
  EXPECT_EQ(scene.primitives[0].nu, 2.0f);
}

TEST(RemoveStuck, UnreachableOpacityIsNoOp) {
  Scene scene = random_layout(40, 64, 64, 5);
  scene.alpha_max = 0.65f;
  for (auto& p : scene.primitives) {
    p.s = 30.0f;
    p.nu = 20.0f;
  }
  const Scene before = scene;
  EXPECT_TRUE(remove_stuck(scene, {}, StuckPolicy{}).empty());
  EXPECT_EQ(scene, before);
}

TEST(RemoveStuck, BudgetAndLogitBound) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Scene scene = random_layout(200, 64, 64, seed);
    Rng rng(seed + 100);
    for (auto& p : scene.primitives) {
      p.s = static_cast<float>(rng.uniform(1, 20));
      p.nu = static_cast<float>(rng.uniform(-3, 5));
    }
    const Scene before = scene;
    const StuckPolicy policy;
    const auto decayed = remove_stuck(scene, {}, policy);
    EXPECT_LE(decayed.size(), static_cast<std::size_t>(policy.per_region * 16));
    const float floor_logit = logit(policy.tau_alpha / scene.alpha_max);
    for (std::size_t i : decayed) EXPECT_GE(before.primitives[i].nu, floor_logit - 1e-6f);
  }
}

TEST(OptimizeVideo, StaticVideoStaysFrozen) {
  const Image frame = pattern_image(24, 24, 8);
  const std::vector<Image> frames(3, frame);
  const VideoResult r = optimize_video(frames, {make_disk_template(16)}, small_video_config());
  ASSERT_EQ(r.scenes.size(), 3u);
  EXPECT_EQ(r.scenes[1], r.scenes[0]);
  EXPECT_EQ(r.scenes[2], r.scenes[0]);
  EXPECT_EQ(r.frozen_counts[1], r.scenes[0].size());
}

TEST(OptimizeVideo, OnlyPrimitivesNearMotionChange) {
  const auto frames = moving_square_video(32, 32, 2);
  const FitConfig config = small_video_config();
  const VideoResult r = optimize_video(frames, {make_disk_template(16)}, config);
  const DiffMask mask = diff_mask(frames[0], frames[1]);
  const auto flags = freeze_flags(r.scenes[0], mask, default_tile_padding(config.blur_sigma));
  std::size_t moved = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) {
      EXPECT_EQ(r.scenes[1].primitives[i], r.scenes[0].primitives[i]) << i;
    } else if (r.scenes[1].primitives[i] != r.scenes[0].primitives[i]) {
      ++moved;
    }
  }
  EXPECT_GT(moved, 0u);
  EXPECT_LT(r.frozen_counts[1], flags.size());
}

TEST(OptimizeVideo, DisabledHeuristicsReduceToWarmStart) {
  const auto frames = moving_square_video(24, 24, 2);
  FitConfig config = small_video_config();
  config.video.freeze_unchanged = false;
  config.video.stuck.enabled = false;
  const VideoResult r = optimize_video(frames, {make_disk_template(16)}, config);

  FitConfig first = config;
  first.num_iterations = config.video.initial_iterations;
  const FitResult f0 = optimize(frames[0], nullptr, {make_disk_template(16)}, first);
  const FitResult f1 = optimize_from(f0.scene, frames[1], nullptr, config,
                                     config.video.sequential_iterations, frame_seed(config.seed, 1));
  EXPECT_EQ(r.scenes[0], f0.scene);
  EXPECT_EQ(r.scenes[1], f1.scene);
}

TEST(OptimizeVideo, EmptyInputRejected) {
  EXPECT_EQ(error_code_of([] { optimize_video({}, {make_disk_template(8)}, FitConfig{}); }),
            ErrorCode::InvalidConfig);
}
