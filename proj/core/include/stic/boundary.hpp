#ifndef STIC_BOUNDARY_HPP
#define STIC_BOUNDARY_HPP

#include <vector>

#include "stic/model.hpp"

namespace stic {

struct Bounds2D {
  double x_lo = -1.0;
  double x_hi = 1.0;
  double y_lo = -1.0;
  double y_hi = 1.0;
};

/// Argmax-class grid over a rectangle, evaluated at cell centres. Row 0 is
/// the top of the image (largest y), matching the raster layout the image
/// writers expect. The fake class shows up as index C.
struct BoundaryMap {
  int resolution = 0;
  Bounds2D bounds;
  std::vector<int> classes;  // row-major, resolution * resolution

  int at(int row, int col) const { return classes[static_cast<std::size_t>(row) * resolution + col]; }
};

/// Classifies every cell centre of a resolution^2 grid with a 2-input model
/// (argmax over all C+1 logits). Rejects models whose input is not a 2-vector.
BoundaryMap boundary_map(const ClassifierModel& model, const Bounds2D& bounds, int resolution);

/// Renders a map to a (3, res, res) image in [-1,1]: distinct colors per real
/// class, dark background for the fake class.
Tensor boundary_image(const BoundaryMap& map, int num_real_classes);

}  // namespace stic

#endif  // STIC_BOUNDARY_HPP
