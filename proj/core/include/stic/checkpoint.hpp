#ifndef STIC_CHECKPOINT_HPP
#define STIC_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "stic/model.hpp"

namespace stic {

/// On-disk layout, all integers little-endian except the 4-byte magic:
///   "STIC" | u32 version | u32 tau | u64 seed | u32 len + arch descriptor
///   per tensor: u32 len + name | u32 rank | u64 dims... | f64 payload
///   u32 CRC32 over every byte after the magic.
/// There is no tensor count; readers consume tensors until only the CRC
/// trailer remains.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint32_t tau = 0;
  std::uint64_t seed = 0;
  std::string arch;
  std::vector<NamedParam> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Snapshot of a model's parameters (values are copied).
Checkpoint checkpoint_of(const ClassifierModel& model, std::uint32_t tau, std::uint64_t seed);

/// Rebuild a model from its descriptor and stored tensors. Parameter names
/// and shapes must match the architecture exactly.
ClassifierModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace stic

#endif  // STIC_CHECKPOINT_HPP
