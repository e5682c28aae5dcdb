#include "uta/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "uta/image_io.hpp"
#include "uta/nn.hpp"
#include "uta/spm.hpp"

namespace fs = std::filesystem;

namespace uta {

const double kRgbMean[3] = {0.485, 0.456, 0.406};
const double kRgbStd[3] = {0.229, 0.224, 0.225};

Tensor normalize_rgb(const Tensor& rgb01) {
  const Shape s = rgb01.shape();
  if (s.c != 3) throw ShapeError("normalize_rgb wants 3 channels, got " + s.str());
  Tensor out = rgb01;
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          out.at(b, c, y, x) = (out.at(b, c, y, x) - kRgbMean[c]) / kRgbStd[c];
  return out;
}

namespace {

const char* kImageExts[] = {".png", ".jpg", ".jpeg", ".bmp"};

std::string find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : kImageExts) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p.string();
  }
  return "";
}

Tensor binarize(const Tensor& t, double thresh) {
  Tensor out = t;
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = out[i] >= thresh ? 1.0 : 0.0;
  return out;
}

// Match a companion map to the rgb resolution if a dataset disagrees.
Tensor fit_to(const Tensor& t, int h, int w, const std::string& id) {
  if (t.shape().h == h && t.shape().w == w) return t;
  log_warn("sample " + id + ": resizing " + t.shape().str() + " map to match rgb");
  return nn::resize_bilinear(t, h, w);
}

}  // namespace

std::vector<Sample> load_dataset(const std::string& root, bool need_depth,
                                 int edge_dilate,
                                 const std::string& source_tag,
                                 const std::string& id_list) {
  const fs::path base(root);
  if (!fs::is_directory(base / "rgb"))
    throw IoError("dataset root has no rgb/ directory: " + root);

  std::vector<std::string> stems;
  if (!id_list.empty()) {
    std::ifstream in(id_list);
    if (!in) throw IoError("cannot read id list: " + id_list);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
        line.pop_back();
      if (!line.empty()) stems.push_back(line);
    }
  } else {
    for (const auto& entry : fs::directory_iterator(base / "rgb")) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (std::find_if(std::begin(kImageExts), std::end(kImageExts),
                       [&](const char* e) { return ext == e; }) ==
          std::end(kImageExts))
        continue;
      stems.push_back(entry.path().stem().string());
    }
    std::sort(stems.begin(), stems.end());
  }

  const std::string tag =
      source_tag.empty() ? base.filename().string() : source_tag;
  std::vector<Sample> out;
  out.reserve(stems.size());
  for (const std::string& stem : stems) {
    Sample s;
    s.id = stem;
    s.source = tag;

    const std::string rgb_path = find_image(base / "rgb", stem);
    if (rgb_path.empty())
      throw IoError("sample " + stem + ": missing rgb image under " + root);
    s.rgb = normalize_rgb(imread_rgb(rgb_path));
    const int h = s.rgb.shape().h, w = s.rgb.shape().w;

    const std::string mask_path = find_image(base / "mask", stem);
    if (mask_path.empty())
      throw IoError("sample " + stem + ": missing mask under " + root);
    Tensor mask_raw = imread_gray(mask_path);
    const int mask_max = mask_raw.max() > 255.0 ? 65535 : 255;
    s.mask = binarize(fit_to(mask_raw, h, w, stem), (mask_max + 1) / 2.0);

    if (need_depth) {
      const std::string depth_path = find_image(base / "depth", stem);
      if (depth_path.empty())
        throw IoError("sample " + stem + ": missing depth under " + root);
      int bits = 8;
      Tensor raw = imread_depth(depth_path, &bits);
      s.depth = normalize_depth(fit_to(raw, h, w, stem), bits);
      s.has_depth = true;
    }

    s.edge = make_edge_target(s.mask, edge_dilate);
    out.push_back(std::move(s));
  }
  return out;
}

void ingest_estimated_depth(std::vector<Sample>& samples,
                            const std::string& root) {
  const fs::path dir = fs::path(root) / "depth_est";
  for (Sample& s : samples) {
    const std::string path = find_image(dir, s.id);
    if (path.empty())
      throw IoError("estimated depth missing for sample: " + s.id);
    int bits = 8;
    Tensor raw = imread_depth(path, &bits);
    s.depth = normalize_depth(
        fit_to(raw, s.rgb.shape().h, s.rgb.shape().w, s.id), bits);
    s.has_depth = true;
    s.depth_estimated = true;
  }
}

namespace {

Tensor flip_crop_resize(const Tensor& t, bool flip, int y0, int x0, int ch,
                        int cw) {
  const Shape s = t.shape();
  Tensor window(Shape{s.b, s.c, ch, cw});
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
          const int sx = flip ? s.w - 1 - (x0 + x) : x0 + x;
          window.at(b, c, y, x) = t.at(b, c, y0 + y, sx);
        }
  return nn::resize_bilinear(window, s.h, s.w);
}

}  // namespace

Sample augment_with(const Sample& s, bool flip, int y0, int x0, int ch,
                    int cw) {
  const Shape sh = s.rgb.shape();
  if (y0 < 0 || x0 < 0 || ch < 1 || cw < 1 || y0 + ch > sh.h ||
      x0 + cw > sh.w)
    throw ShapeError("augment crop window out of bounds");
  Sample out = s;
  out.rgb = flip_crop_resize(s.rgb, flip, y0, x0, ch, cw);
  out.mask = binarize(flip_crop_resize(s.mask, flip, y0, x0, ch, cw), 0.5);
  out.edge = binarize(flip_crop_resize(s.edge, flip, y0, x0, ch, cw), 0.5);
  if (s.has_depth)
    out.depth = flip_crop_resize(s.depth, flip, y0, x0, ch, cw);
  return out;
}

Sample augment(const Sample& s, Rng& rng, double min_area) {
  const Shape sh = s.rgb.shape();
  const bool flip = rng.uniform() < 0.5;
  const double side = std::sqrt(rng.uniform(min_area, 1.0));
  const int ch = std::max<int>(1, std::min<int>(sh.h, std::lround(sh.h * side)));
  const int cw = std::max<int>(1, std::min<int>(sh.w, std::lround(sh.w * side)));
  const int y0 = rng.uniform_int(sh.h - ch + 1);
  const int x0 = rng.uniform_int(sh.w - cw + 1);
  return augment_with(s, flip, y0, x0, ch, cw);
}

Batch multiscale_batch(const std::vector<const Sample*>& items, int scale,
                       const Config& cfg) {
  const auto it = std::find(cfg.scales.begin(), cfg.scales.end(), scale);
  if (it == cfg.scales.end())
    throw ConfigError("scale " + std::to_string(scale) +
                      " is not in the configured scale set");
  if (items.empty()) throw ShapeError("multiscale_batch: empty batch");

  Batch b;
  b.scale_index = int(it - cfg.scales.begin());
  const int n = int(items.size());
  b.rgb = Tensor::zeros(Shape{n, 3, scale, scale});
  b.mask = Tensor::zeros(Shape{n, 1, scale, scale});
  b.edge = Tensor::zeros(Shape{n, 1, scale, scale});
  b.has_depth = std::all_of(items.begin(), items.end(),
                            [](const Sample* s) { return s->has_depth; });
  if (b.has_depth) b.depth = Tensor::zeros(Shape{n, 1, scale, scale});

  auto paste = [&](Tensor& dst, const Tensor& src, int row) {
    const std::int64_t per = dst.numel() / n;
    std::copy(src.data(), src.data() + per, dst.data() + row * per);
  };
  for (int i = 0; i < n; ++i) {
    const Sample& s = *items[i];
    b.ids.push_back(s.id);
    paste(b.rgb, nn::resize_bilinear(s.rgb, scale, scale), i);
    paste(b.mask, binarize(nn::resize_bilinear(s.mask, scale, scale), 0.5), i);
    paste(b.edge, binarize(nn::resize_bilinear(s.edge, scale, scale), 0.5), i);
    if (b.has_depth)
      paste(b.depth, nn::resize_bilinear(s.depth, scale, scale), i);
  }
  return b;
}

int make_synthetic_dataset(const std::string& dir, int count, int hw,
                           std::uint64_t seed) {
  for (const char* sub : {"rgb", "depth", "mask"})
    fs::create_directories(fs::path(dir) / sub);
  Rng rng(seed);

  for (int i = 0; i < count; ++i) {
    Tensor rgb = Tensor::zeros(Shape{1, 3, hw, hw});
    Tensor depth = Tensor::zeros(Shape{1, 1, hw, hw});
    Tensor mask = Tensor::zeros(Shape{1, 1, hw, hw});

    // Background: smooth colour gradient, depth ramp receding downwards.
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
      c0[c] = rng.uniform(0.05, 0.45);
      c1[c] = rng.uniform(0.05, 0.45);
    }
    const bool circle = rng.uniform() < 0.5;
    const int cy = int(rng.uniform(hw * 0.3, hw * 0.7));
    const int cx = int(rng.uniform(hw * 0.3, hw * 0.7));
    const int r = int(rng.uniform(hw * 0.12, hw * 0.26));
    double oc[3];
    const int hot = rng.uniform_int(3);
    for (int c = 0; c < 3; ++c)
      oc[c] = c == hot ? rng.uniform(0.75, 0.95) : rng.uniform(0.05, 0.35);
    const double near = rng.uniform(0.65, 0.95);  // object sits close

    for (int y = 0; y < hw; ++y)
      for (int x = 0; x < hw; ++x) {
        const double fy = double(y) / (hw - 1);
        const bool inside = circle
                                ? (y - cy) * (y - cy) + (x - cx) * (x - cx) <=
                                      r * r
                                : std::abs(y - cy) <= r && std::abs(x - cx) <= r;
        for (int c = 0; c < 3; ++c)
          rgb.at(0, c, y, x) =
              inside ? oc[c] : c0[c] + (c1[c] - c0[c]) * fy;
        depth.at(0, 0, y, x) = inside ? near : 0.15 + 0.2 * fy;
        if (inside) mask.at(0, 0, y, x) = 1.0;
      }

    char name[32];
    std::snprintf(name, sizeof(name), "synth%03d", i);
    const fs::path base(dir);
    imwrite_rgb8((base / "rgb" / (std::string(name) + ".png")).string(), rgb);
    imwrite_gray8((base / "depth" / (std::string(name) + ".png")).string(),
                  depth);
    imwrite_gray8((base / "mask" / (std::string(name) + ".png")).string(),
                  mask);
  }
  return count;
}

}  // namespace uta
