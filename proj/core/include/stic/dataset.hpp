#ifndef STIC_DATASET_HPP
#define STIC_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "stic/rng.hpp"
#include "stic/tensor.hpp"

namespace stic {

/// Labeled sample collection. Image datasets carry raw [0, 255] intensities
/// and set pixel_domain, which tells the trainer to run them through the
/// [-1, 1] preprocessing path; 2-D point datasets store model-space
/// coordinates directly.
struct Dataset {
  std::vector<std::vector<double>> samples;
  std::vector<int> labels;
  int num_classes = 0;
  Shape sample_shape;
  bool pixel_domain = false;
  std::string name;

  std::size_t size() const { return samples.size(); }
  Tensor sample_tensor(std::size_t index) const;
  void validate() const;
};

/// C isotropic Gaussian clusters with centroids equally spaced on the unit
/// circle; n points per class, stddev `spread`.
Dataset gen_gaussians_2d(int num_classes, int n_per_class, double spread, std::uint64_t seed);

/// Two interleaved half-circles with additive Gaussian noise; n points total.
Dataset gen_moons(int n, double noise, std::uint64_t seed);

/// Grayscale side x side images of centered filled squares, circles, and
/// crosses (classes 0, 1, 2), varying in size and brightness. Values in
/// [0, 255].
Dataset gen_shapes(int n_per_class, int side, std::uint64_t seed);

/// One unsigned-byte array in IDX layout: magic 00 00 08 <rank>, big-endian
/// u32 dimension sizes, then the row-major payload.
struct IdxArray {
  Shape dims;
  std::vector<std::uint8_t> data;
};

IdxArray read_idx_array(const std::string& path);
void write_idx_array(const std::string& path, const IdxArray& array);

/// Pair an IDX image file (rank 3: count x height x width) with an IDX label
/// file (rank 1); counts must agree.
Dataset read_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace stic

#endif  // STIC_DATASET_HPP
