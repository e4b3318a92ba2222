#pragma once

// Synthetic skeleton dataset: random filled shapes over a textured
// background, with ground truth computed by connectivity-preserving thinning
// and the exhaustive distance transform kept as an independent oracle.
// Binary PGM is the on-disk raster format.

#include <cstdint>
#include <string>
#include <vector>

#include "lsn/tensor.hpp"

namespace lsn::datakit {

struct Raster {
  int h = 0, w = 0;
  std::vector<std::uint8_t> pix;  // row-major

  std::uint8_t& at(int y, int x) { return pix[static_cast<size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return pix[static_cast<size_t>(y) * w + x]; }
};

struct Sample {
  Raster image;              // grayscale [0,255]
  std::vector<std::uint8_t> gt;  // binary skeleton mask, row-major, same dims
  std::vector<std::uint8_t> fg;  // foreground shape mask (generation only)
  std::string id;
  int shape_count = 0;

  TensorF image_tensor() const;  // 1x1xHxW scaled to [0,1]
  TensorF gt_tensor() const;     // 1x1xHxW in {0,1}
};

// Deterministic per seed. size must be a multiple of 32.
Sample gen_sample(unsigned seed, int size);

std::vector<std::uint8_t> write_pgm(const Raster& r);
Raster read_pgm(const std::vector<std::uint8_t>& bytes);
void write_pgm_file(const std::string& path, const Raster& r);
Raster read_pgm_file(const std::string& path);

// Pairs images/<stem>.pgm with labels/<stem>.pgm, sorted by stem; masks
// binarized at 128.
std::vector<Sample> load_dataset(const std::string& dir);

// Centerline of a foreground mask, thinned to unit width.
std::vector<std::uint8_t> medial_axis(const std::vector<std::uint8_t>& fg, int h, int w);

// Exhaustive Euclidean distance to the nearest boundary pixel, per
// foreground pixel; the trustworthy O(pixels x boundary) oracle.
std::vector<double> exact_distance_transform(const std::vector<std::uint8_t>& fg,
                                             int h, int w);

}  // namespace lsn::datakit
