#include "uta/metrics.hpp"

#include <cfloat>
#include <fstream>

namespace uta {

double f_beta(double p, double r, double beta2) {
  const double denom = beta2 * p + r;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta2) * p * r / denom;
}

std::array<std::pair<double, double>, 256> pr_at_thresholds(
    const Tensor& pred255, const Tensor& mask) {
  if (!pred255.same_shape(mask))
    throw ShapeError("pr_at_thresholds: shape mismatch " +
                     pred255.shape().str() + " vs " + mask.shape().str());
  // Histogram per class, then suffix sums give TP/FP at every threshold.
  std::array<long long, 256> h1{}, h0{};
  const std::int64_t n = pred255.numel();
  long long npos = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    int bin = static_cast<int>(pred255[i]);  // floor: v>=t iff floor(v)>=t
    bin = std::min(255, std::max(0, bin));
    if (mask[i] != 0.0) {
      ++h1[bin];
      ++npos;
    } else {
      ++h0[bin];
    }
  }
  std::array<std::pair<double, double>, 256> out;
  long long tp = 0, fp = 0;
  for (int t = 255; t >= 0; --t) {
    tp += h1[t];
    fp += h0[t];
    const double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 1.0;
    const double r = npos > 0 ? double(tp) / double(npos) : 1.0;
    out[t] = {p, r};
  }
  return out;
}

double mae(const Tensor& pred01, const Tensor& mask) {
  if (!pred01.same_shape(mask))
    throw ShapeError("mae: shape mismatch " + pred01.shape().str() + " vs " +
                     mask.shape().str());
  double acc = 0.0;
  for (std::int64_t i = 0; i < pred01.numel(); ++i)
    acc += std::abs(pred01[i] - mask[i]);
  return acc / double(pred01.numel());
}

namespace {

constexpr double kInf = 1e18;

// Lower-envelope 1-D squared distance transform with argmin tracking.
void dt1d(const std::vector<double>& f, int n, std::vector<double>& d,
          std::vector<int>& arg) {
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) /
          (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0)
        --k;
      else
        break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const int p = v[k];
    d[q] = double(q - p) * (q - p) + f[p];
    arg[q] = p;
  }
}

}  // namespace

void edt_nearest(const Tensor& mask, std::vector<double>& dist,
                 std::vector<int>& nearest) {
  const Shape s = mask.shape();
  const int h = s.h, w = s.w;
  dist.assign(static_cast<std::size_t>(h) * w, kInf);
  nearest.assign(static_cast<std::size_t>(h) * w, -1);

  // Column pass: squared vertical distance and source row per column.
  std::vector<double> dcol(static_cast<std::size_t>(h) * w);
  std::vector<int> rowsrc(static_cast<std::size_t>(h) * w);
  std::vector<double> f(std::max(h, w));
  std::vector<double> d1(std::max(h, w));
  std::vector<int> a1(std::max(h, w));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y)
      f[y] = mask.at(0, 0, y, x) != 0.0 ? 0.0 : kInf;
    dt1d(f, h, d1, a1);
    for (int y = 0; y < h; ++y) {
      dcol[y * w + x] = d1[y];
      rowsrc[y * w + x] = a1[y];
    }
  }
  // Row pass combines vertical and horizontal offsets.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = dcol[y * w + x];
    dt1d(f, w, d1, a1);
    for (int x = 0; x < w; ++x) {
      const double dd = d1[x];
      if (dd >= kInf) continue;  // empty mask
      const int sx = a1[x];
      const int sy = rowsrc[y * w + sx];
      dist[y * w + x] = std::sqrt(dd);
      nearest[y * w + x] = sy * w + sx;
    }
  }
}

double f_weighted(const Tensor& pred01, const Tensor& mask) {
  if (!pred01.same_shape(mask))
    throw ShapeError("f_weighted: shape mismatch " + pred01.shape().str() +
                     " vs " + mask.shape().str());
  const Shape s = mask.shape();
  const int h = s.h, w = s.w;
  const std::int64_t n = static_cast<std::int64_t>(h) * w;

  double npos = 0.0;
  for (std::int64_t i = 0; i < n; ++i) npos += mask[i] != 0.0 ? 1.0 : 0.0;
  if (npos == 0.0) {
    double pmax = 0.0;
    for (std::int64_t i = 0; i < n; ++i) pmax = std::max(pmax, pred01[i]);
    return pmax < 1e-9 ? 1.0 : 0.0;
  }

  std::vector<double> dist;
  std::vector<int> nearest;
  edt_nearest(mask, dist, nearest);

  std::vector<double> e(n), et(n);
  for (std::int64_t i = 0; i < n; ++i) {
    e[i] = std::abs(pred01[i] - (mask[i] != 0.0 ? 1.0 : 0.0));
    et[i] = e[i];
  }
  for (std::int64_t i = 0; i < n; ++i)
    if (mask[i] == 0.0) et[i] = e[nearest[i]];

  // 7x7 Gaussian (sigma 5), zero-padded correlation.
  double kern[7][7];
  double ksum = 0.0;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * 25.0));
      kern[dy + 3][dx + 3] = v;
      ksum += v;
    }
  for (auto& row : kern)
    for (double& v : row) v /= ksum;

  std::vector<double> ea(n, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -3; dy <= 3; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -3; dx <= 3; ++dx) {
          const int xx = x + dx;
          if (xx >= 0 && xx < w)
            acc += kern[dy + 3][dx + 3] * et[yy * w + xx];
        }
      }
      ea[y * w + x] = acc;
    }

  // Keep the smoothed error only where it helps, and only on foreground.
  double ew_fg = 0.0, ew_bg = 0.0;
  const double decay = std::log(0.5) / 5.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double me = e[i];
    if (mask[i] != 0.0 && ea[i] < e[i]) me = ea[i];
    if (mask[i] != 0.0) {
      ew_fg += me;  // importance weight is 1 on foreground
    } else {
      ew_bg += me * (2.0 - std::exp(decay * dist[i]));
    }
  }
  const double tpw = npos - ew_fg;
  const double fpw = ew_bg;
  const double recall = 1.0 - ew_fg / npos;
  const double precision = tpw / (DBL_EPSILON + tpw + fpw);
  return 2.0 * precision * recall / (DBL_EPSILON + precision + recall);
}

void MetricsAccumulator::add(const Tensor& pred01, const Tensor& mask) {
  Tensor p255 = pred01;
  for (std::int64_t i = 0; i < p255.numel(); ++i)
    p255[i] = double(std::lround(
        std::min(1.0, std::max(0.0, p255[i])) * 255.0));
  const auto pr = pr_at_thresholds(p255, mask);
  for (int t = 0; t < 256; ++t) {
    psum_[t] += pr[t].first;
    rsum_[t] += pr[t].second;
  }
  mae_sum_ += mae(pred01, mask);
  if (mask.sum() > 0.0) {
    fw_sum_ += f_weighted(pred01, mask);
    ++fw_n_;
  }
  if (adaptive_) {
    // Adaptive threshold: twice the map mean, clamped to [0,255].
    const double tau =
        std::min(255.0, 2.0 * p255.sum() / double(p255.numel()));
    long long tp = 0, fp = 0, npos = 0;
    for (std::int64_t i = 0; i < p255.numel(); ++i) {
      const bool pos = p255[i] >= tau;
      if (mask[i] != 0.0) {
        ++npos;
        if (pos) ++tp;
      } else if (pos) {
        ++fp;
      }
    }
    const double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 1.0;
    const double r = npos > 0 ? double(tp) / double(npos) : 1.0;
    adaptive_f_sum_ += f_beta(p, r);
  }
  ++n_;
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.images = n_;
  if (n_ == 0) return r;
  double fsum = 0.0;
  for (int t = 0; t < 256; ++t) {
    r.precision[t] = psum_[t] / n_;
    r.recall[t] = rsum_[t] / n_;
    r.f_curve[t] = f_beta(r.precision[t], r.recall[t]);
    r.f_max = std::max(r.f_max, r.f_curve[t]);
    fsum += r.f_curve[t];
  }
  r.f_mean = adaptive_ ? adaptive_f_sum_ / n_ : fsum / 256.0;
  r.f_weighted = fw_n_ > 0 ? fw_sum_ / fw_n_ : 0.0;
  r.mae = mae_sum_ / n_;
  return r;
}

void write_curves_csv(const std::string& path, const MetricsReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve csv: " + path);
  out << "threshold,precision,recall,f\n";
  for (int t = 0; t < 256; ++t)
    out << t << "," << r.precision[t] << "," << r.recall[t] << ","
        << r.f_curve[t] << "\n";
}

}  // namespace uta
