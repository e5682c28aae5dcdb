#ifndef UTA_CHECKPOINT_HPP
#define UTA_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uta/tensor.hpp"

namespace uta {

/// On-disk training state: named tensors plus the epoch counter and the
/// config snapshot that produced them. The binary layout is little-endian
/// with raw IEEE-754 doubles, so save -> load -> save round-trips bit for
/// bit.
struct Checkpoint {
  enum Kind : std::uint8_t { kParam = 0, kMomentum = 1, kBuffer = 2 };

  struct Entry {
    std::string name;
    Kind kind = kParam;
    Tensor data;
  };

  std::uint32_t version = 1;
  std::uint32_t epoch = 0;     // epochs fully completed
  std::uint64_t step = 0;      // optimizer steps taken
  std::string config;          // `key = value` snapshot, one per line
  std::vector<Entry> entries;

  const Entry* find(const std::string& name, Kind kind) const;
  /// All entries of one kind as a name->tensor map (names must be unique
  /// within a kind).
  std::map<std::string, Tensor> by_kind(Kind kind) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace uta

#endif  // UTA_CHECKPOINT_HPP
