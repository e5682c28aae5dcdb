#ifndef UTA_IMAGE_IO_HPP
#define UTA_IMAGE_IO_HPP

#include <string>

#include "uta/tensor.hpp"

namespace uta {

/// Load a colour image as (1,3,H,W) RGB in [0,1]. Throws IoError.
Tensor imread_rgb(const std::string& path);

/// Load a grayscale image as (1,1,H,W) keeping the raw integer values;
/// reports the source bit depth (8 or 16) so callers can normalize.
Tensor imread_gray(const std::string& path, int* bit_depth = nullptr);

/// All depth maps come through this audited wrapper, so the RGB-only
/// inference path can prove it never read one.
Tensor imread_depth(const std::string& path, int* bit_depth = nullptr);
long depth_read_count();
void reset_depth_read_count();

/// Write a (1,1,H,W) map in [0,1] as an 8-bit grayscale image.
void imwrite_gray8(const std::string& path, const Tensor& map01);

/// Write a (1,3,H,W) RGB tensor in [0,1] as an 8-bit colour image.
void imwrite_rgb8(const std::string& path, const Tensor& rgb01);

}  // namespace uta

#endif  // UTA_IMAGE_IO_HPP
