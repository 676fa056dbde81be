#include "stic/boundary.hpp"

#include <stdexcept>

namespace stic {

BoundaryMap boundary_map(const ClassifierModel& model, const Bounds2D& bounds, int resolution) {
  if (model.spec().input_shape != Shape{2}) {
    throw std::invalid_argument("boundary_map: model input must be a 2-vector, got " +
                                shape_str(model.spec().input_shape));
  }
  if (resolution < 1) throw std::invalid_argument("boundary_map: resolution must be >= 1");
  if (!(bounds.x_lo < bounds.x_hi) || !(bounds.y_lo < bounds.y_hi)) {
    throw std::invalid_argument("boundary_map: bounds must satisfy lo < hi on both axes");
  }

  BoundaryMap map;
  map.resolution = resolution;
  map.bounds = bounds;
  map.classes.resize(static_cast<std::size_t>(resolution) * resolution);
  double dx = (bounds.x_hi - bounds.x_lo) / resolution;
  double dy = (bounds.y_hi - bounds.y_lo) / resolution;
  for (int row = 0; row < resolution; ++row) {
    double y = bounds.y_hi - (row + 0.5) * dy;
    for (int col = 0; col < resolution; ++col) {
      double x = bounds.x_lo + (col + 0.5) * dx;
      Tensor logits = model.forward_logits(Tensor::from({2}, {x, y}));
      int best = 0;
      for (int c = 1; c < model.num_logits(); ++c) {
        if (logits.at(c) > logits.at(best)) best = c;
      }
      map.classes[static_cast<std::size_t>(row) * resolution + col] = best;
    }
  }
  return map;
}

Tensor boundary_image(const BoundaryMap& map, int num_real_classes) {
  if (num_real_classes < 1) {
    throw std::invalid_argument("boundary_image: need at least one real class");
  }
  // hand-picked palette, repeated when there are more classes than entries
  static const double palette[][3] = {
      {0.8, -0.4, -0.4},  {-0.4, 0.8, -0.4}, {-0.4, -0.4, 0.8}, {0.8, 0.8, -0.4},
      {0.8, -0.4, 0.8},   {-0.4, 0.8, 0.8},  {0.9, 0.4, -0.2},  {0.4, -0.2, 0.9},
  };
  constexpr int palette_size = 8;
  int res = map.resolution;
  Tensor image = Tensor::zeros({3, res, res});
  auto px = image.mutable_data();
  std::size_t plane = static_cast<std::size_t>(res) * res;
  for (int row = 0; row < res; ++row) {
    for (int col = 0; col < res; ++col) {
      int cls = map.at(row, col);
      double r, g, b;
      if (cls >= num_real_classes) {
        r = g = b = -0.85;  // fake class as near-black background
      } else {
        const double* color = palette[cls % palette_size];
        r = color[0];
        g = color[1];
        b = color[2];
      }
      std::size_t at = static_cast<std::size_t>(row) * res + col;
      px[at] = r;
      px[plane + at] = g;
      px[2 * plane + at] = b;
    }
  }
  return image;
}

}  // namespace stic
