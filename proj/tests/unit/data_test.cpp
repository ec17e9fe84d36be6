#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "canet/augment.hpp"
#include "canet/dataset.hpp"
#include "canet/errors.hpp"
#include "canet/image_io.hpp"
#include "canet/scene.hpp"
#include "support/oracles.hpp"

namespace canet {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("canet_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Scene, DeterministicInSeedAndIndex) {
  SceneSpec spec;
  const Sample a = generate_scene(spec, 3);
  const Sample b = generate_scene(spec, 3);
  const Sample c = generate_scene(spec, 4);
  EXPECT_EQ(testing::max_abs_diff(a.image, b.image), 0.0);
  EXPECT_EQ(a.label, b.label);
  EXPECT_NE(a.label, c.label);
  spec.seed = 2;
  EXPECT_NE(generate_scene(spec, 3).label, a.label);
}

TEST(Scene, ZeroObjectsIsAllBackground) {
  SceneSpec spec;
  spec.objects_per_image = 0;
  const Sample s = generate_scene(spec, 0);
  for (int v : s.label.values) EXPECT_EQ(v, 0);
  for (double v : s.image.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Scene, EveryClassAppearsAndSizesAreStratified) {
  SceneSpec spec;
  std::vector<long> hist(spec.num_classes, 0);
  for (int i = 0; i < 40; ++i) {
    const Sample s = generate_scene(spec, i);
    for (int v : s.label.values) ++hist.at(v);
  }
  for (int c = 0; c < spec.num_classes; ++c) EXPECT_GT(hist[c], 0) << "class " << c;
  // Class 2 is a large disc, class 1 a small disc of the same palette.
  EXPECT_EQ(class_style(1).palette, class_style(2).palette);
  EXPECT_EQ(class_style(1).stratum, Stratum::kSmall);
  EXPECT_EQ(class_style(2).stratum, Stratum::kLarge);
  EXPECT_GT(hist[2], 4 * hist[1]);
}

TEST(Scene, ValidationRejectsNarrowStrata) {
  SceneSpec spec;
  spec.large.max_radius = 7.0 * spec.small.min_radius;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SceneSpec{};
  spec.num_classes = 1;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Augment, IdentitySettingsReturnInput) {
  const Sample in = generate_scene(SceneSpec{}, 1);
  AugmentConfig cfg;
  cfg.flip_prob = 0.0;
  cfg.scale_min = cfg.scale_max = 1.0;
  cfg.blur_sigma_max = 0.0;
  std::mt19937_64 rng(1);
  const Sample out = augment(in, cfg, rng);
  EXPECT_EQ(out.label, in.label);
  EXPECT_EQ(testing::max_abs_diff(out.image, in.image), 0.0);
}

TEST(Augment, CropsToSizeAndKeepsLabelsValid) {
  const Sample in = generate_scene(SceneSpec{}, 2);
  std::set<int> allowed(in.label.values.begin(), in.label.values.end());
  allowed.insert(kIgnoreIndex);
  AugmentConfig cfg;
  cfg.crop_h = 48;
  cfg.crop_w = 40;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const Sample out = augment(in, cfg, rng);
    EXPECT_EQ(out.image.shape(), (Shape{1, 3, 48, 40}));
    ASSERT_EQ(out.label.h, 48);
    ASSERT_EQ(out.label.w, 40);
    for (int v : out.label.values) EXPECT_TRUE(allowed.count(v)) << v;
  }
}

TEST(Augment, FlipIsAnInvolution) {
  const Sample in = generate_scene(SceneSpec{}, 3);
  const Sample f = flip_sample(in);
  EXPECT_EQ(f.label.at(0, 5, 0), in.label.at(0, 5, 63));
  const Sample ff = flip_sample(f);
  EXPECT_EQ(ff.label, in.label);
  EXPECT_EQ(testing::max_abs_diff(ff.image, in.image), 0.0);
}

TEST(Augment, CropPadsOutsideTheSource) {
  const Sample in = generate_scene(SceneSpec{}, 4);
  const Sample c = crop_sample(in, -2, 60, 6, 8, {0.1, 0.2, 0.3}, kIgnoreIndex);
  EXPECT_EQ(c.label.at(0, 0, 0), kIgnoreIndex);
  EXPECT_EQ(c.image.at(0, 2, 0, 0), 0.3);
  EXPECT_EQ(c.label.at(0, 3, 7), kIgnoreIndex);
  EXPECT_EQ(c.label.at(0, 2, 0), in.label.at(0, 0, 60));
  EXPECT_EQ(c.image.at(0, 1, 5, 3), in.image.at(0, 1, 3, 63));
}

TEST(Augment, ScaleUsesNearestLabels) {
  const Sample in = generate_scene(SceneSpec{}, 5);
  const Sample up = scale_sample(in, 2.0);
  EXPECT_EQ(up.label.h, 128);
  for (int y = 0; y < 128; y += 7) {
    for (int x = 0; x < 128; x += 5) EXPECT_EQ(up.label.at(0, y, x), in.label.at(0, y / 2, x / 2));
  }
}

TEST(GaussianBlur, PreservesConstantsAndInteriorMass) {
  Tensor flat(Shape{1, 3, 9, 7}, 0.42);
  Tensor fb = gaussian_blur(flat, 1.3);
  for (double v : fb.data()) EXPECT_NEAR(v, 0.42, 1e-14);

  Tensor impulse(Shape{1, 1, 31, 31});
  impulse.at(0, 0, 15, 15) = 1.0;
  Tensor ib = gaussian_blur(impulse, 1.5);
  double sum = 0.0;
  for (double v : ib.data()) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(ib.at(0, 0, 15, 12), ib.at(0, 0, 15, 18), 1e-15);
  EXPECT_NEAR(ib.at(0, 0, 12, 15), ib.at(0, 0, 15, 12), 1e-15);
  EXPECT_EQ(testing::max_abs_diff(gaussian_blur(impulse, 0.0), impulse), 0.0);
}

TEST(ImageIo, RoundTripsThroughNetpbm) {
  const Sample s = generate_scene(SceneSpec{}, 6);
  const Tensor back = decode_ppm(encode_ppm(s.image));
  EXPECT_LE(testing::max_abs_diff(back, s.image), 0.5 / 255.0 + 1e-15);
  EXPECT_EQ(testing::max_abs_diff(decode_ppm(encode_ppm(back)), back), 0.0);
  LabelMap l = s.label;
  l.at(0, 0, 0) = kIgnoreIndex;
  EXPECT_EQ(decode_pgm(encode_pgm(l)), l);
}

TEST(ImageIo, MalformedPayloadsRaiseParseError) {
  std::vector<std::uint8_t> bytes = encode_pgm(LabelMap(1, 4, 4, 1));
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
  EXPECT_THROW(decode_pgm(truncated), ParseError);
  std::vector<std::uint8_t> wrong = bytes;
  wrong[1] = '2';
  EXPECT_THROW(decode_pgm(wrong), ParseError);
  EXPECT_THROW(decode_ppm(bytes), ParseError);
  const std::string bad_max = "P5\n2 2\n65535\n";
  EXPECT_THROW(decode_pgm(std::vector<std::uint8_t>(bad_max.begin(), bad_max.end())), ParseError);
  EXPECT_THROW(read_image("/nonexistent/canet.ppm"), IoError);
}

TEST(Dataset, WriteReadRoundTrip) {
  SceneSpec spec;
  spec.height = 40;
  spec.width = 36;
  const Dataset d = generate_dataset(spec, 3, 10);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.ids[0], sample_id(10));
  const fs::path dir = scratch_dir("dataset");
  write_dataset(dir, d);
  const Dataset back = read_dataset(dir);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.ids, d.ids);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.samples[i].label, d.samples[i].label);
    EXPECT_LE(testing::max_abs_diff(back.samples[i].image, d.samples[i].image), 0.5 / 255.0 + 1e-15);
  }
  const auto mean = d.channel_mean();
  double want = 0.0;
  for (const Sample& s : d.samples) {
    for (int i = 0; i < 40 * 36; ++i) want += s.image.plane(0, 1)[i];
  }
  EXPECT_NEAR(mean[1], want / (3 * 40 * 36), 1e-12);
  fs::remove_all(dir);
  EXPECT_THROW(read_dataset(dir), IoError);
}

}  // namespace
}  // namespace canet
