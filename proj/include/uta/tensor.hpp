#ifndef UTA_TENSOR_HPP
#define UTA_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <new>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace uta {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense shape of a 4-D feature map: batch, channels, rows, cols.
struct Shape {
  int b = 0, c = 0, h = 0, w = 0;

  std::int64_t numel() const {
    return static_cast<std::int64_t>(b) * c * h * w;
  }
  bool operator==(const Shape& o) const = default;
  std::string str() const {
    return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

/// Deterministic RNG used for parameter init and data augmentation.
/// std::normal_distribution is implementation-defined, so gaussians are
/// produced with a fixed Box-Muller transform instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // in [0,1)
    return (eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int n) {  // in [0,n)
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0, u2 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Allocator pinning every buffer to a 64-byte boundary. SIMD reductions
/// split their scalar prologue at the first aligned element, so a fixed
/// alignment keeps summation order - and hence last-bit rounding - identical
/// across runs regardless of heap history.
template <class T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::size_t alignment = 64;

  AlignedAlloc() noexcept = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(
        ::operator new(n * sizeof(T), std::align_val_t(alignment)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(alignment));
  }
  template <class U>
  bool operator==(const AlignedAlloc<U>&) const noexcept { return true; }
  template <class U>
  bool operator!=(const AlignedAlloc<U>&) const noexcept { return false; }
};

using DoubleVec = std::vector<double, AlignedAlloc<double>>;

/// Contiguous BCHW array of doubles. All network math runs in float64 so
/// finite-difference checks are meaningful.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape_(s), v_(static_cast<std::size_t>(check_shape(s).numel()), fill) {}
  Tensor(Shape s, const std::vector<double>& data)
      : shape_(s), v_(data.begin(), data.end()) {
    if (static_cast<std::int64_t>(v_.size()) != s.numel())
      throw ShapeError("tensor data size does not match shape " + s.str());
  }

  static Tensor zeros(Shape s) { return Tensor(s, 0.0); }
  static Tensor full(Shape s, double v) { return Tensor(s, v); }
  static Tensor randn(Shape s, Rng& rng, double stddev = 1.0) {
    Tensor t(s);
    for (auto& x : t.v_) x = stddev * rng.gauss();
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  DoubleVec& vec() { return v_; }
  const DoubleVec& vec() const { return v_; }

  double& at(int b, int c, int h, int w) { return v_[idx(b, c, h, w)]; }
  double at(int b, int c, int h, int w) const { return v_[idx(b, c, h, w)]; }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  std::size_t idx(int b, int c, int h, int w) const {
    return ((static_cast<std::size_t>(b) * shape_.c + c) * shape_.h + h) *
               shape_.w + w;
  }

  void fill(double v) { std::fill(v_.begin(), v_.end(), v); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double max() const {
    double m = -1e300;
    for (double x : v_) m = x > m ? x : m;
    return m;
  }
  double min() const {
    double m = 1e300;
    for (double x : v_) m = x < m ? x : m;
    return m;
  }
  double sum() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s;
  }
  double mean() const { return numel() ? sum() / numel() : 0.0; }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  static Shape check_shape(Shape s) {
    if (s.b < 1 || s.c < 1 || s.h < 1 || s.w < 1)
      throw ShapeError("all tensor dimensions must be >= 1, got " + s.str());
    return s;
  }
  Shape shape_;
  DoubleVec v_;
};

}  // namespace uta

#endif  // UTA_TENSOR_HPP
