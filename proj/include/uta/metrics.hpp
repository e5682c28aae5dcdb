#ifndef UTA_METRICS_HPP
#define UTA_METRICS_HPP

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "uta/tensor.hpp"

namespace uta {

/// (1+b2)PR / (b2*P + R); 0 when the denominator vanishes.
double f_beta(double p, double r, double beta2 = 0.3);

/// Per-image precision/recall at every 8-bit threshold t: binarize pred >= t.
/// pred holds values in [0,255] (fractions are floored); mask is binary.
/// Conventions: P=1 when nothing is predicted positive, R=1 when the mask is
/// empty.
std::array<std::pair<double, double>, 256> pr_at_thresholds(
    const Tensor& pred255, const Tensor& mask);

/// Weighted F-measure of a single prediction in [0,1] against a binary mask
/// (beta^2 = 1). Errors are smoothed with a 7x7 sigma-5 Gaussian after
/// copying each background error from its nearest foreground pixel, and
/// background errors are amplified by 2-exp(ln(0.5)/5 * dist). Images with an
/// empty mask score 1 when the prediction is empty too, else 0.
double f_weighted(const Tensor& pred01, const Tensor& mask);

/// Mean absolute difference between a [0,1] prediction and a binary mask.
double mae(const Tensor& pred01, const Tensor& mask);

/// Exact Euclidean distance transform. For every pixel returns the distance
/// to the nearest nonzero mask pixel and that pixel's flat index (-1 and a
/// huge distance when the mask is empty).
void edt_nearest(const Tensor& mask, std::vector<double>& dist,
                 std::vector<int>& nearest);

struct MetricsReport {
  double f_max = 0, f_mean = 0, f_weighted = 0, mae = 0;
  std::array<double, 256> precision{}, recall{}, f_curve{};
  int images = 0;
};

/// Streams per-image statistics and folds them into dataset-level numbers:
/// dataset-mean P and R per threshold, F computed from those means.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(bool adaptive_fmean = false)
      : adaptive_(adaptive_fmean) {}

  /// pred in [0,1], shape (1,1,H,W); mask binary, same shape.
  void add(const Tensor& pred01, const Tensor& mask);
  MetricsReport report() const;

 private:
  std::array<double, 256> psum_{}, rsum_{};
  double mae_sum_ = 0, fw_sum_ = 0, adaptive_f_sum_ = 0;
  int n_ = 0, fw_n_ = 0;
  bool adaptive_ = false;
};

/// 256-row CSV: threshold, precision, recall, f.
void write_curves_csv(const std::string& path, const MetricsReport& r);

}  // namespace uta

#endif  // UTA_METRICS_HPP
