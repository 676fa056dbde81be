#ifndef STIC_IMAGE_IO_HPP
#define STIC_IMAGE_IO_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "stic/tensor.hpp"

namespace stic {

/// Binary PGM (P5) for a (1, H, W) or (H, W) tensor, PPM (P6) for (3, H, W).
/// Values in [-1, 1] map as v -> round((v + 1) * 127.5); out-of-range values
/// are clipped, and the returned count says how many were.
std::size_t write_pgm(const std::string& path, const Tensor& image);
std::size_t write_ppm(const std::string& path, const Tensor& image);

/// Inverse mapping byte -> byte/127.5 - 1. Grayscale files come back as
/// (1, H, W), color ones as (3, H, W).
Tensor read_pgm(const std::string& path);
Tensor read_ppm(const std::string& path);

/// Lay out same-shape images row-major into a grid with `cols` columns;
/// missing cells are filled with -1 (black).
Tensor tile_grid(const std::vector<Tensor>& images, int cols);

}  // namespace stic

#endif  // STIC_IMAGE_IO_HPP
