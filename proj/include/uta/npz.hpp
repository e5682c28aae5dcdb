#ifndef UTA_NPZ_HPP
#define UTA_NPZ_HPP

#include <map>
#include <string>

#include "uta/tensor.hpp"

namespace uta {

/// Read a numpy .npz archive (a zip of .npy members, stored or deflated).
/// Supports little-endian float32/float64 in C order with up to 4
/// dimensions. Dimensions map to tensor shape as: 4-D -> (b,c,h,w),
/// 3-D -> (1,d0,d1,d2), 2-D -> (d0,d1,1,1), 1-D -> (1,d0,1,1). Member names
/// lose their ".npy" suffix.
std::map<std::string, Tensor> load_npz(const std::string& path);

/// Write tensors as an uncompressed .npz archive of float64 .npy members.
/// A (1,d0,1,1) tensor is written 1-D, (d0,d1,1,1) 2-D, anything else 4-D,
/// mirroring the load mapping for those ranks.
void save_npz(const std::string& path,
              const std::map<std::string, Tensor>& arrays);

/// Translate a published 50-layer residual network .npz state (torch-style
/// names: bn weight/bias, num_batches_tracked, fc head) into a checkpoint
/// whose entry names match this project's backbone. Skips the classifier
/// head and the batch counters; errors on any other unrecognized entry.
void convert_backbone_npz(const std::string& npz_path,
                          const std::string& out_path);

}  // namespace uta

#endif  // UTA_NPZ_HPP
