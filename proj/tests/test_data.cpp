#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "doctest.h"
#include "uta/data.hpp"
#include "uta/image_io.hpp"
#include "uta/nn.hpp"
#include "uta/spm.hpp"

using namespace uta;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

Sample checker_sample(int hw) {
  Sample s;
  s.id = "checker";
  s.rgb = Tensor::zeros(Shape{1, 3, hw, hw});
  s.mask = Tensor::zeros(Shape{1, 1, hw, hw});
  s.depth = Tensor::zeros(Shape{1, 1, hw, hw});
  s.has_depth = true;
  for (int y = 0; y < hw; ++y)
    for (int x = 0; x < hw; ++x) {
      s.rgb.at(0, 0, y, x) = double(x);
      s.rgb.at(0, 1, y, x) = double(y);
      s.rgb.at(0, 2, y, x) = double(x + y);
      s.depth.at(0, 0, y, x) = 0.2 + 0.6 * double(x) / hw;
      if (y >= hw / 4 && y < 3 * hw / 4 && x >= hw / 4 && x < 3 * hw / 4)
        s.mask.at(0, 0, y, x) = 1.0;
    }
  s.edge = make_edge_target(s.mask, 5);
  return s;
}

}  // namespace

TEST_CASE("synthetic dataset roundtrips through the loader") {
  TempDir tmp("uta_data_synth");
  CHECK(make_synthetic_dataset(tmp.str(), 3, 64, 5) == 3);

  auto ds = load_dataset(tmp.str(), /*need_depth=*/true, 5);
  REQUIRE(ds.size() == 3);
  CHECK(ds[0].id == "synth000");
  CHECK(ds[1].id == "synth001");
  CHECK(ds[2].id == "synth002");
  for (const Sample& s : ds) {
    CHECK(s.rgb.shape() == Shape{1, 3, 64, 64});
    CHECK(s.mask.shape() == Shape{1, 1, 64, 64});
    CHECK(s.depth.shape() == Shape{1, 1, 64, 64});
    CHECK(s.has_depth);
    CHECK(!s.depth_estimated);
    CHECK(s.source == "uta_data_synth");
    double fg = 0;
    for (std::int64_t i = 0; i < s.mask.numel(); ++i) {
      CHECK((s.mask[i] == 0.0 || s.mask[i] == 1.0));
      fg += s.mask[i];
    }
    CHECK(fg > 0);
    CHECK(fg < s.mask.numel());
    CHECK(s.depth.max() == 1.0);  // per-image max normalization
    CHECK(s.depth.min() >= kEpsDepth);
    CHECK(s.rgb.min() > -3.0);  // channel-normalized range
    CHECK(s.rgb.max() < 3.0);
    CHECK(tensors_equal(s.edge, make_edge_target(s.mask, 5)));
  }

  auto again = load_dataset(tmp.str(), true, 5);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    CHECK(ds[k].id == again[k].id);
    CHECK(tensors_equal(ds[k].rgb, again[k].rgb));
    CHECK(tensors_equal(ds[k].depth, again[k].depth));
  }

  // id-list restriction keeps only (and orders) the listed stems.
  const auto list = tmp.path / "ids.txt";
  std::ofstream(list.string()) << "synth002\nsynth000\n";
  auto subset = load_dataset(tmp.str(), true, 5, "", list.string());
  REQUIRE(subset.size() == 2);
  CHECK(subset[0].id == "synth002");
  CHECK(subset[1].id == "synth000");
}

TEST_CASE("loader errors name the offending sample") {
  TempDir tmp("uta_data_err");
  make_synthetic_dataset(tmp.str(), 2, 64, 9);
  fs::remove(tmp.path / "mask" / "synth001.png");
  try {
    load_dataset(tmp.str(), true, 5);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("synth001") != std::string::npos);
  }

  fs::remove_all(tmp.path / "depth");
  CHECK_THROWS_AS(load_dataset(tmp.str(), true, 5), IoError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/uta", true, 5), IoError);
}

TEST_CASE("sixteen-bit depth maps normalize by their own maximum") {
  TempDir tmp("uta_data_16bit");
  make_synthetic_dataset(tmp.str(), 1, 64, 3);
  cv::Mat deep(64, 64, CV_16UC1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      deep.at<std::uint16_t>(y, x) = std::uint16_t(300 + (y * 64 + x) * 14);
  cv::imwrite((tmp.path / "depth" / "synth000.png").string(), deep);

  int bits = 0;
  Tensor raw = imread_gray((tmp.path / "depth" / "synth000.png").string(),
                           &bits);
  CHECK(bits == 16);
  CHECK(raw.max() == 300.0 + 4095 * 14.0);

  auto ds = load_dataset(tmp.str(), true, 5);
  CHECK(ds[0].depth.max() == 1.0);
  CHECK(ds[0].depth.min() >= kEpsDepth);
  CHECK(ds[0].depth.min() > 0.0);

  // A colour mask collapses to gray before binarizing.
  Tensor flat = Tensor::full(Shape{1, 3, 8, 8}, 1.0);
  imwrite_rgb8((tmp.path / "colmask.png").string(), flat);
  Tensor g = imread_gray((tmp.path / "colmask.png").string(), &bits);
  CHECK(bits == 8);
  CHECK(g.max() == 255.0);
  CHECK(g.min() == 255.0);
}

TEST_CASE("augmentation core: no-op, involution, and window mapping") {
  Sample s = checker_sample(32);

  Sample same = augment_with(s, false, 0, 0, 32, 32);
  CHECK(tensors_equal(same.rgb, s.rgb));
  CHECK(tensors_equal(same.mask, s.mask));
  CHECK(tensors_equal(same.edge, s.edge));
  CHECK(tensors_equal(same.depth, s.depth));

  Sample flipped = augment_with(s, true, 0, 0, 32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      CHECK(flipped.rgb.at(0, 0, y, x) == s.rgb.at(0, 0, y, 31 - x));
  Sample twice = augment_with(flipped, true, 0, 0, 32, 32);
  CHECK(tensors_equal(twice.rgb, s.rgb));
  CHECK(tensors_equal(twice.mask, s.mask));
  CHECK(tensors_equal(twice.depth, s.depth));

  // Forced half-size corner crop: every map must equal the independently
  // assembled crop-then-resize of itself.
  Sample cropped = augment_with(s, false, 0, 0, 16, 16);
  auto expect = [&](const Tensor& t, bool binary) {
    Tensor win(Shape{1, t.shape().c, 16, 16});
    for (int c = 0; c < t.shape().c; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) win.at(0, c, y, x) = t.at(0, c, y, x);
    Tensor up = nn::resize_bilinear(win, 32, 32);
    if (binary)
      for (std::int64_t i = 0; i < up.numel(); ++i)
        up[i] = up[i] >= 0.5 ? 1.0 : 0.0;
    return up;
  };
  CHECK(tensors_equal(cropped.rgb, expect(s.rgb, false)));
  CHECK(tensors_equal(cropped.depth, expect(s.depth, false)));
  CHECK(tensors_equal(cropped.mask, expect(s.mask, true)));
  CHECK(tensors_equal(cropped.edge, expect(s.edge, true)));

  CHECK_THROWS_AS(augment_with(s, false, 20, 0, 16, 16), ShapeError);
  CHECK_THROWS_AS(augment_with(s, false, 0, 0, 0, 16), ShapeError);

  Rng rng(13);
  for (int k = 0; k < 10; ++k) {
    Sample r = augment(s, rng, 0.875);
    CHECK(r.rgb.shape() == s.rgb.shape());
    for (std::int64_t i = 0; i < r.mask.numel(); ++i)
      CHECK((r.mask[i] == 0.0 || r.mask[i] == 1.0));
  }
}

TEST_CASE("multi-scale batches resize, stack, and index the scale") {
  TempDir tmp("uta_data_batch");
  make_synthetic_dataset(tmp.str(), 3, 64, 21);
  auto ds = load_dataset(tmp.str(), true, 5);
  std::vector<const Sample*> items{&ds[0], &ds[1], &ds[2]};
  Config cfg;  // default scale set 224..352

  Batch b = multiscale_batch(items, 224, cfg);
  CHECK(b.scale_index == 0);
  CHECK(b.rgb.shape() == Shape{3, 3, 224, 224});
  CHECK(b.mask.shape() == Shape{3, 1, 224, 224});
  CHECK(b.edge.shape() == Shape{3, 1, 224, 224});
  CHECK(b.depth.shape() == Shape{3, 1, 224, 224});
  CHECK(b.has_depth);
  CHECK(b.ids == std::vector<std::string>{"synth000", "synth001", "synth002"});
  for (std::int64_t i = 0; i < b.mask.numel(); ++i)
    CHECK((b.mask[i] == 0.0 || b.mask[i] == 1.0));

  CHECK(multiscale_batch(items, 352, cfg).scale_index == 4);
  CHECK_THROWS_AS(multiscale_batch(items, 300, cfg), ConfigError);

  ds[1].has_depth = false;
  Batch nd = multiscale_batch(items, 256, cfg);
  CHECK(!nd.has_depth);

  // Uniform scale draws: each of 5 bins within 5 sigma of 2000/10000.
  Rng rng(99);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 10000; ++i) ++counts[rng.uniform_int(5)];
  for (int c : counts) CHECK(std::abs(c - 2000) <= 200);
}

TEST_CASE("estimated depth ingestion is strict about coverage") {
  TempDir tmp("uta_data_est");
  make_synthetic_dataset(tmp.str(), 3, 64, 31);
  auto ds = load_dataset(tmp.str(), /*need_depth=*/false, 5);
  for (const Sample& s : ds) CHECK(!s.has_depth);

  fs::create_directories(tmp.path / "depth_est");
  for (const char* id : {"synth000", "synth001", "synth002"})
    fs::copy(tmp.path / "depth" / (std::string(id) + ".png"),
             tmp.path / "depth_est" / (std::string(id) + ".png"));

  ingest_estimated_depth(ds, tmp.str());
  for (const Sample& s : ds) {
    CHECK(s.has_depth);
    CHECK(s.depth_estimated);
    CHECK(s.depth.max() == 1.0);
    CHECK(s.depth.min() >= kEpsDepth);
  }

  fs::remove(tmp.path / "depth_est" / "synth001.png");
  auto ds2 = load_dataset(tmp.str(), false, 5);
  try {
    ingest_estimated_depth(ds2, tmp.str());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("synth001") != std::string::npos);
  }
}

TEST_CASE("depth reads are audited") {
  TempDir tmp("uta_data_audit");
  make_synthetic_dataset(tmp.str(), 2, 64, 41);

  reset_depth_read_count();
  load_dataset(tmp.str(), /*need_depth=*/false, 5);
  CHECK(depth_read_count() == 0);  // rgb and mask reads never count

  load_dataset(tmp.str(), /*need_depth=*/true, 5);
  CHECK(depth_read_count() == 2);
  reset_depth_read_count();
  CHECK(depth_read_count() == 0);
}

TEST_CASE("rgb normalization uses the fixed channel statistics") {
  Tensor half = Tensor::full(Shape{1, 3, 2, 2}, 0.5);
  Tensor n = normalize_rgb(half);
  for (int c = 0; c < 3; ++c)
    CHECK(n.at(0, c, 0, 0) ==
          doctest::Approx((0.5 - kRgbMean[c]) / kRgbStd[c]).epsilon(1e-15));
  CHECK_THROWS_AS(normalize_rgb(Tensor::zeros(Shape{1, 1, 2, 2})), ShapeError);
}
