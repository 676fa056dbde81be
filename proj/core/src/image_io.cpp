#include "stic/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace stic {

namespace {

std::size_t write_pnm(const std::string& path, const Tensor& image, int channels,
                      const char* format) {
  const Shape& s = image.shape();
  int h, w;
  if (s.size() == 2 && channels == 1) {
    h = s[0];
    w = s[1];
  } else if (s.size() == 3 && s[0] == channels) {
    h = s[1];
    w = s[2];
  } else {
    throw std::invalid_argument(std::string(format) + ": unsupported image shape " + shape_str(s));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(std::string(format) + ": cannot write " + path);
  os << format << "\n" << w << " " << h << "\n255\n";
  auto v = image.data();
  std::size_t clipped = 0;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        // channel-major tensor layout -> interleaved pixels
        double value = v[(static_cast<std::size_t>(c) * h + y) * w + x];
        if (value < -1.0 || value > 1.0) {
          ++clipped;
          value = std::clamp(value, -1.0, 1.0);
        }
        row[static_cast<std::size_t>(x) * channels + c] =
            static_cast<std::uint8_t>(std::lround((value + 1.0) * 127.5));
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error(std::string(format) + ": write failed for " + path);
  return clipped;
}

Tensor read_pnm(const std::string& path, int channels, const char* format) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(std::string(format) + ": cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != format) {
    throw std::runtime_error(std::string(format) + ": bad magic '" + magic + "' in " + path);
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error(std::string(format) + ": unsupported header in " + path);
  }
  is.get();  // single whitespace byte after maxval
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (is.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error(std::string(format) + ": truncated payload in " + path);
  }
  std::vector<double> values(raw.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        values[(static_cast<std::size_t>(c) * h + y) * w + x] =
            raw[(static_cast<std::size_t>(y) * w + x) * channels + c] / 127.5 - 1.0;
      }
    }
  }
  return Tensor::from({channels, h, w}, std::move(values));
}

}  // namespace

std::size_t write_pgm(const std::string& path, const Tensor& image) {
  return write_pnm(path, image, 1, "P5");
}

std::size_t write_ppm(const std::string& path, const Tensor& image) {
  return write_pnm(path, image, 3, "P6");
}

Tensor read_pgm(const std::string& path) { return read_pnm(path, 1, "P5"); }

Tensor read_ppm(const std::string& path) { return read_pnm(path, 3, "P6"); }

Tensor tile_grid(const std::vector<Tensor>& images, int cols) {
  if (images.empty()) throw std::invalid_argument("tile_grid: no images");
  if (cols < 1) throw std::invalid_argument("tile_grid: cols must be positive");
  Shape s = images[0].shape();
  if (s.size() == 2) s = {1, s[0], s[1]};
  if (s.size() != 3) {
    throw std::invalid_argument("tile_grid: unsupported image shape " +
                                shape_str(images[0].shape()));
  }
  for (const Tensor& img : images) {
    Shape t = img.shape();
    if (t.size() == 2) t = {1, t[0], t[1]};
    if (t != s) {
      throw std::invalid_argument("tile_grid: mixed shapes " + shape_str(images[0].shape()) +
                                  " vs " + shape_str(img.shape()));
    }
  }
  int c = s[0], h = s[1], w = s[2];
  int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
  Shape out_shape{c, rows * h, cols * w};
  std::vector<double> out(shape_numel(out_shape), -1.0);
  for (std::size_t idx = 0; idx < images.size(); ++idx) {
    int gy = static_cast<int>(idx) / cols, gx = static_cast<int>(idx) % cols;
    auto v = images[idx].data();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out[(static_cast<std::size_t>(ch) * rows * h + gy * h + y) * (cols * w) + gx * w + x] =
              v[(static_cast<std::size_t>(ch) * h + y) * w + x];
        }
      }
    }
  }
  return Tensor::from(out_shape, std::move(out));
}

}  // namespace stic
