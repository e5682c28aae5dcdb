#ifndef UTA_DATA_HPP
#define UTA_DATA_HPP

#include <string>
#include <vector>

#include "uta/core.hpp"
#include "uta/tensor.hpp"

namespace uta {

/// Channel statistics the pretrained encoder was trained with.
extern const double kRgbMean[3];
extern const double kRgbStd[3];

/// (v - mean_c) / std_c per channel; input (B,3,H,W) in [0,1].
Tensor normalize_rgb(const Tensor& rgb01);

struct Sample {
  std::string id, source;
  Tensor rgb;    // (1,3,H,W), channel-normalized
  Tensor depth;  // (1,1,H,W) in [kEpsDepth,1]; meaningful iff has_depth
  Tensor mask;   // (1,1,H,W), {0,1}
  Tensor edge;   // (1,1,H,W), {0,1}, derived from mask
  bool has_depth = false;
  bool depth_estimated = false;
};

/// Load `root/{rgb,depth,mask}/<stem>.<ext>` triples. Samples are ordered by
/// id; masks binarize at half the 8-bit range; depth (when requested) is
/// normalized to (0,1] by per-image max. `id_list` optionally restricts and
/// orders the ids (one per line). Missing counterpart files raise IoError
/// naming the sample.
std::vector<Sample> load_dataset(const std::string& root, bool need_depth,
                                 int edge_dilate,
                                 const std::string& source_tag = "",
                                 const std::string& id_list = "");

/// Attach externally estimated depth maps from `root/depth_est/` to every
/// sample. A missing estimate is a hard error naming the id.
void ingest_estimated_depth(std::vector<Sample>& samples,
                            const std::string& root);

/// Deterministic augmentation core: optional horizontal flip, then crop
/// window (y0,x0,ch,cw) applied after the flip, then resize back to the
/// original size. All maps move together; mask/edge re-binarize at 0.5.
Sample augment_with(const Sample& s, bool flip, int y0, int x0, int ch,
                    int cw);

/// Random flip (p=0.5) and random crop keeping between `min_area` and all of
/// the image, via augment_with.
Sample augment(const Sample& s, Rng& rng, double min_area);

struct Batch {
  Tensor rgb, depth, mask, edge;
  std::vector<std::string> ids;
  int scale_index = 0;
  bool has_depth = false;
};

/// Resize every sample to scale x scale and stack along the batch axis.
/// `scale` must be one of cfg.scales; the returned scale_index selects the
/// matching multi-scale predictor head.
Batch multiscale_batch(const std::vector<const Sample*>& items, int scale,
                       const Config& cfg);

/// Procedural shapes-on-gradient dataset with geometrically consistent
/// depth (object near, background ramp); writes rgb/, depth/, mask/ PNG
/// triples under dir. Returns the number of samples written.
int make_synthetic_dataset(const std::string& dir, int count, int hw,
                           std::uint64_t seed);

}  // namespace uta

#endif  // UTA_DATA_HPP
