#include "uta/image_io.hpp"

#include <atomic>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace uta {

namespace {
std::atomic<long> g_depth_reads{0};
}

Tensor imread_rgb(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + path);
  Tensor out(Shape{1, 3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at(0, 0, y, x) = row[x][2] / 255.0;  // R
      out.at(0, 1, y, x) = row[x][1] / 255.0;  // G
      out.at(0, 2, y, x) = row[x][0] / 255.0;  // B
    }
  }
  return out;
}

Tensor imread_gray(const std::string& path, int* bit_depth) {
  cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw IoError("cannot read image: " + path);
  if (img.channels() == 3) {
    cv::Mat gray;
    cv::cvtColor(img, gray, cv::COLOR_BGR2GRAY);
    img = gray;
  } else if (img.channels() == 4) {
    cv::Mat gray;
    cv::cvtColor(img, gray, cv::COLOR_BGRA2GRAY);
    img = gray;
  }
  const int bits = img.depth() == CV_16U ? 16 : 8;
  if (bit_depth) *bit_depth = bits;
  Tensor out(Shape{1, 1, img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x)
      out.at(0, 0, y, x) = bits == 16 ? double(img.at<std::uint16_t>(y, x))
                                      : double(img.at<std::uint8_t>(y, x));
  return out;
}

Tensor imread_depth(const std::string& path, int* bit_depth) {
  ++g_depth_reads;
  return imread_gray(path, bit_depth);
}

long depth_read_count() { return g_depth_reads.load(); }
void reset_depth_read_count() { g_depth_reads.store(0); }

void imwrite_gray8(const std::string& path, const Tensor& map01) {
  const Shape s = map01.shape();
  cv::Mat img(s.h, s.w, CV_8UC1);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      const double v = std::min(1.0, std::max(0.0, map01.at(0, 0, y, x)));
      img.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  if (!cv::imwrite(path, img)) throw IoError("cannot write image: " + path);
}

void imwrite_rgb8(const std::string& path, const Tensor& rgb01) {
  const Shape s = rgb01.shape();
  if (s.c != 3) throw ShapeError("imwrite_rgb8 wants (1,3,H,W), got " + s.str());
  cv::Mat img(s.h, s.w, CV_8UC3);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      auto q = [&](int c) {
        const double v = std::min(1.0, std::max(0.0, rgb01.at(0, c, y, x)));
        return static_cast<std::uint8_t>(std::lround(v * 255.0));
      };
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));  // BGR on disk
    }
  if (!cv::imwrite(path, img)) throw IoError("cannot write image: " + path);
}

}  // namespace uta
