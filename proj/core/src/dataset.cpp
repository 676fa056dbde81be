#include "stic/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace stic {

Tensor Dataset::sample_tensor(std::size_t index) const {
  return Tensor::from(sample_shape, samples.at(index));
}

void Dataset::validate() const {
  if (samples.size() != labels.size()) {
    throw std::invalid_argument("dataset: " + std::to_string(samples.size()) + " samples vs " +
                                std::to_string(labels.size()) + " labels");
  }
  std::int64_t numel = shape_numel(sample_shape);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<std::int64_t>(samples[i].size()) != numel) {
      throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has wrong length");
    }
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) +
                                  " out of range at index " + std::to_string(i));
    }
  }
}

Dataset gen_gaussians_2d(int num_classes, int n_per_class, double spread, std::uint64_t seed) {
  if (num_classes < 1 || n_per_class < 1 || spread < 0.0) {
    throw std::invalid_argument("gen_gaussians_2d: parameters must be positive");
  }
  Rng rng(seed);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.sample_shape = {2};
  ds.pixel_domain = false;
  ds.name = "gaussians2d";
  for (int c = 0; c < num_classes; ++c) {
    double angle = 2.0 * std::numbers::pi * c / num_classes;
    double cx = std::cos(angle), cy = std::sin(angle);
    for (int i = 0; i < n_per_class; ++i) {
      ds.samples.push_back({cx + rng.normal(0.0, spread), cy + rng.normal(0.0, spread)});
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset gen_moons(int n, double noise, std::uint64_t seed) {
  if (n < 2 || noise < 0.0) {
    throw std::invalid_argument("gen_moons: need n >= 2 and nonnegative noise");
  }
  Rng rng(seed);
  Dataset ds;
  ds.num_classes = 2;
  ds.sample_shape = {2};
  ds.pixel_domain = false;
  ds.name = "moons";
  int n_outer = n / 2;
  int n_inner = n - n_outer;
  for (int i = 0; i < n_outer; ++i) {
    double t = std::numbers::pi * i / std::max(1, n_outer - 1);
    ds.samples.push_back(
        {std::cos(t) + rng.normal(0.0, noise), std::sin(t) + rng.normal(0.0, noise)});
    ds.labels.push_back(0);
  }
  for (int i = 0; i < n_inner; ++i) {
    double t = std::numbers::pi * i / std::max(1, n_inner - 1);
    ds.samples.push_back({1.0 - std::cos(t) + rng.normal(0.0, noise),
                          0.5 - std::sin(t) + rng.normal(0.0, noise)});
    ds.labels.push_back(1);
  }
  return ds;
}

namespace {

// All shapes are centered so images stay symmetric under 90-degree rotation;
// per-instance variation comes from size and brightness only.
std::vector<double> draw_shape(int cls, int side, double extent, double level) {
  std::vector<double> img(static_cast<std::size_t>(side) * side, 0.0);
  double c = (side - 1) / 2.0;
  for (int r = 0; r < side; ++r) {
    for (int q = 0; q < side; ++q) {
      double dy = r - c, dx = q - c;
      bool on = false;
      switch (cls) {
        case 0:  // filled square
          on = std::abs(dy) <= extent && std::abs(dx) <= extent;
          break;
        case 1:  // filled circle
          on = dy * dy + dx * dx <= extent * extent;
          break;
        default: {  // cross: horizontal and vertical bars
          double bar = extent * 0.45;
          on = (std::abs(dy) <= bar && std::abs(dx) <= extent) ||
               (std::abs(dx) <= bar && std::abs(dy) <= extent);
          break;
        }
      }
      if (on) img[static_cast<std::size_t>(r) * side + q] = level;
    }
  }
  return img;
}

}  // namespace

Dataset gen_shapes(int n_per_class, int side, std::uint64_t seed) {
  if (n_per_class < 1 || side < 4) {
    throw std::invalid_argument("gen_shapes: need n_per_class >= 1 and side >= 4");
  }
  Rng rng(seed);
  Dataset ds;
  ds.num_classes = 3;
  ds.sample_shape = {1, side, side};
  ds.pixel_domain = true;
  ds.name = "shapes";
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      double extent = rng.uniform(side * 0.22, side * 0.42);
      double level = rng.uniform(180.0, 255.0);
      ds.samples.push_back(draw_shape(c, side, extent, level));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

namespace {

std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
  std::uint8_t b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("idx: truncated header in " + path);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& os, std::uint32_t v) {
  std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8),
                       std::uint8_t(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

IdxArray read_idx_array(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("idx: cannot open " + path);
  std::uint8_t magic[4];
  if (!is.read(reinterpret_cast<char*>(magic), 4)) {
    throw std::runtime_error("idx: empty or truncated file " + path);
  }
  if (magic[0] != 0 || magic[1] != 0) {
    throw std::runtime_error("idx: bad magic at offset 0 in " + path);
  }
  if (magic[2] != 0x08) {
    throw std::runtime_error("idx: unsupported type byte at offset 2 in " + path +
                             " (only unsigned byte 0x08 is supported)");
  }
  int rank = magic[3];
  if (rank < 1) throw std::runtime_error("idx: bad rank at offset 3 in " + path);
  IdxArray array;
  std::int64_t total = 1;
  for (int d = 0; d < rank; ++d) {
    std::uint32_t dim = read_be_u32(is, path);
    array.dims.push_back(static_cast<int>(dim));
    total *= dim;
  }
  array.data.resize(static_cast<std::size_t>(total));
  is.read(reinterpret_cast<char*>(array.data.data()), total);
  std::int64_t got = is.gcount();
  if (got != total) {
    throw std::runtime_error("idx: truncated payload in " + path + ", expected " +
                             std::to_string(total) + " bytes, got " + std::to_string(got));
  }
  return array;
}

void write_idx_array(const std::string& path, const IdxArray& array) {
  if (array.dims.empty()) throw std::invalid_argument("idx: empty dims");
  if (shape_numel(array.dims) != static_cast<std::int64_t>(array.data.size())) {
    throw std::invalid_argument("idx: payload size does not match dims");
  }
  if (array.dims.size() > 255) throw std::invalid_argument("idx: rank exceeds one byte");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("idx: cannot write " + path);
  std::uint8_t magic[4] = {0, 0, 0x08, std::uint8_t(array.dims.size())};
  os.write(reinterpret_cast<const char*>(magic), 4);
  for (int d : array.dims) write_be_u32(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(array.data.data()),
           static_cast<std::streamsize>(array.data.size()));
  if (!os) throw std::runtime_error("idx: write failed for " + path);
}

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
  IdxArray images = read_idx_array(images_path);
  IdxArray labels = read_idx_array(labels_path);
  if (images.dims.size() != 3) {
    throw std::runtime_error("idx: image file must be rank 3 (count, height, width), got rank " +
                             std::to_string(images.dims.size()));
  }
  if (labels.dims.size() != 1) {
    throw std::runtime_error("idx: label file must be rank 1, got rank " +
                             std::to_string(labels.dims.size()));
  }
  if (images.dims[0] != labels.dims[0]) {
    throw std::runtime_error("idx: image/label count mismatch, " + std::to_string(images.dims[0]) +
                             " vs " + std::to_string(labels.dims[0]));
  }
  Dataset ds;
  ds.pixel_domain = true;
  ds.name = "idx";
  int count = images.dims[0], h = images.dims[1], w = images.dims[2];
  ds.sample_shape = {1, h, w};
  int max_label = 0;
  std::size_t stride = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < count; ++i) {
    std::vector<double> img(stride);
    for (std::size_t k = 0; k < stride; ++k) img[k] = images.data[i * stride + k];
    ds.samples.push_back(std::move(img));
    int label = labels.data[i];
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

}  // namespace stic
