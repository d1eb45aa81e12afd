#include <gtest/gtest.h>

#include "rasterfit/rng.hpp"
#include "rasterfit/scene.hpp"
#include "rasterfit/synth.hpp"
#include "test_helpers.hpp"

using namespace rasterfit;
using rasterfit::testing::blank_scene;
using rasterfit::testing::error_code_of;
using rasterfit::testing::error_index_of;
using rasterfit::testing::prim;

namespace {

Scene one_primitive_scene() {
  Scene scene = blank_scene(32, 32, make_disk_template(16));
  scene.primitives.push_back(prim(10, 20, 4, 0, -4));
  return scene;
}

}  // namespace

TEST(ValidateScene, AcceptsWellFormedScene) {
  const Scene scene = one_primitive_scene();
  EXPECT_NO_THROW(validate_scene(scene));
  // Pure: a second call gives the same verdict.
  EXPECT_NO_THROW(validate_scene(scene));
}

TEST(ValidateScene, ZeroScaleIsRejectedAtItsIndex) {
  Scene scene = one_primitive_scene();
  scene.primitives[0].s = 0.0f;
  EXPECT_EQ(error_code_of([&] { validate_scene(scene); }), ErrorCode::InvalidScale);
  EXPECT_EQ(error_index_of([&] { validate_scene(scene); }), 0u);
}

TEST(ValidateScene, DuplicateDepthRanks) {
  Scene scene = one_primitive_scene();
  scene.primitives.push_back(prim(5, 5, 3, 0, 0));
  scene.primitives[0].z = 0;
  scene.primitives[1].z = 0;
  EXPECT_EQ(error_code_of([&] { validate_scene(scene); }), ErrorCode::NonPermutationZ);
}

TEST(ValidateScene, TemplateReferenceOutOfRange) {
  Scene scene = one_primitive_scene();
  scene.primitives[0].template_id = 3;
  EXPECT_EQ(error_code_of([&] { validate_scene(scene); }), ErrorCode::BadTemplateRef);
}

TEST(ValidateScene, TexelOutsideUnitRange) {
  Scene scene = one_primitive_scene();
  scene.templates[0].texel(2, 2, 3) = 1.5f;
  EXPECT_EQ(error_code_of([&] { validate_scene(scene); }), ErrorCode::BadChannelRange);
}

TEST(ValidateScene, BlendParametersOutOfRange) {
  Scene scene = one_primitive_scene();
  scene.alpha_max = 0.0f;
  EXPECT_EQ(error_code_of([&] { validate_scene(scene); }), ErrorCode::InvalidConfig);
  scene.alpha_max = 1.0f;
  scene.mu_blend = 1.2f;
  EXPECT_EQ(error_code_of([&] { validate_scene(scene); }), ErrorCode::InvalidConfig);
}

TEST(PackParams, SinglePrimitiveLayout) {
  const Scene scene = one_primitive_scene();
  const PackedParams packed = pack_params(scene);
  const std::vector<float> expected{10, 20, 4, 0, -4, 0, 0, 0};
  EXPECT_EQ(packed.values, expected);
  EXPECT_EQ(packed.layout.num_primitives, 1u);
}

TEST(PackParams, EightScalarsPerPrimitive) {
  Scene scene = one_primitive_scene();
  scene.primitives.push_back(prim(1, 2, 3, 0.5f, 1.0f, {0.1f, 0.2f, 0.3f}, 1));
  const PackedParams packed = pack_params(scene);
  EXPECT_EQ(packed.values.size(), 16u);
  EXPECT_EQ(packed.values[ParamLayout::offset(1, 3)], 0.5f);
  EXPECT_EQ(packed.values[ParamLayout::offset(1, 7)], 0.3f);
}

TEST(PackParams, RoundTripIsExactOnRandomScenes) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Rng rng(seed);
    const Scene scene = random_scene(rng);
    validate_scene(scene);
    Scene copy = scene;
    // Scramble the learnable fields, then restore them from the packed vector.
    for (auto& p : copy.primitives) p = prim(0, 0, 1, 0, 0, {0, 0, 0}, p.z, p.template_id);
    const PackedParams packed = pack_params(scene);
    unpack_params(packed.values, packed.layout, copy);
    EXPECT_EQ(copy, scene) << "seed " << seed;
  }
}

TEST(PackParams, UnpackRejectsWrongLength) {
  Scene scene = one_primitive_scene();
  const std::vector<float> short_vec(7, 0.0f);
  EXPECT_EQ(error_code_of([&] { unpack_params(short_vec, ParamLayout{1}, scene); }),
            ErrorCode::LayoutMismatch);
}

TEST(ConservativeBBox, CoversRotatedFootprint) {
  Scene scene = one_primitive_scene();
  scene.primitives[0] = prim(16, 16, 5, 0.7f, 0);
  const PixelRect r = conservative_bbox(scene, scene.primitives[0], 0.0f);
  // Corner of the rotated square lies at distance s*sqrt(2) from the center.
  const float reach = 5.0f * std::sqrt(2.0f);
  EXPECT_LE(r.x0 + 0.5f, 16 - reach + 1.0f);
  EXPECT_GE(r.x1 + 0.5f, 16 + reach - 1.0f);
  EXPECT_TRUE(r.contains(16, 16));
}

TEST(ConservativeBBox, OffCanvasIsEmpty) {
  Scene scene = one_primitive_scene();
  scene.primitives[0] = prim(-40, -40, 3, 0, 0);
  EXPECT_TRUE(conservative_bbox(scene, scene.primitives[0], 2.0f).empty());
}

TEST(SceneFingerprint, SensitiveToParameters) {
  Scene scene = one_primitive_scene();
  const auto before = scene_fingerprint(scene);
  EXPECT_EQ(before, scene_fingerprint(scene));
  scene.primitives[0].theta += 1e-6f;
  EXPECT_NE(before, scene_fingerprint(scene));
}

TEST(FrontToBack, AscendingDepth) {
  Scene scene = one_primitive_scene();
  scene.primitives[0].z = 2;
  scene.primitives.push_back(prim(1, 1, 2, 0, 0, {}, 0));
  scene.primitives.push_back(prim(1, 1, 2, 0, 0, {}, 1));
  const std::vector<std::uint32_t> expected{1, 2, 0};
  EXPECT_EQ(front_to_back_order(scene), expected);
}

TEST(FrontToBack, GapInRanksThrows) {
  Scene scene = one_primitive_scene();
  scene.primitives.push_back(prim(1, 1, 2, 0, 0, {}, 2));
  EXPECT_EQ(error_code_of([&] { front_to_back_order(scene); }), ErrorCode::NonPermutationZ);
  scene.primitives[1].z = 0;
  EXPECT_EQ(error_code_of([&] { front_to_back_order(scene); }), ErrorCode::NonPermutationZ);
}
