#include "lsn/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "lsn/evalkit.hpp"

namespace fs = std::filesystem;

namespace lsn::datakit {

TensorF Sample::image_tensor() const {
  TensorF t({1, 1, image.h, image.w});
  for (std::int64_t i = 0; i < t.count(); ++i)
    t.data[i] = static_cast<float>(image.pix[static_cast<size_t>(i)]) / 255.0f;
  return t;
}

TensorF Sample::gt_tensor() const {
  TensorF t({1, 1, image.h, image.w});
  for (std::int64_t i = 0; i < t.count(); ++i)
    t.data[i] = gt[static_cast<size_t>(i)] ? 1.0f : 0.0f;
  return t;
}

// --- PGM -------------------------------------------------------------------

std::vector<std::uint8_t> write_pgm(const Raster& r) {
  std::string header = "P5\n" + std::to_string(r.w) + " " + std::to_string(r.h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), r.pix.begin(), r.pix.end());
  return out;
}

namespace {

int parse_pgm_int(const std::vector<std::uint8_t>& b, size_t& pos) {
  while (pos < b.size() && (std::isspace(b[pos]) || b[pos] == '#')) {
    if (b[pos] == '#')
      while (pos < b.size() && b[pos] != '\n') ++pos;
    else
      ++pos;
  }
  if (pos >= b.size() || !std::isdigit(b[pos]))
    throw std::runtime_error("malformed PGM header at byte offset " + std::to_string(pos));
  int v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) v = v * 10 + (b[pos++] - '0');
  return v;
}

}  // namespace

Raster read_pgm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    std::string magic(bytes.begin(), bytes.begin() + std::min<size_t>(2, bytes.size()));
    throw std::runtime_error("not a binary PGM: magic \"" + magic + "\", expected \"P5\"");
  }
  size_t pos = 2;
  Raster r;
  r.w = parse_pgm_int(bytes, pos);
  r.h = parse_pgm_int(bytes, pos);
  const int maxval = parse_pgm_int(bytes, pos);
  if (maxval != 255)
    throw std::runtime_error("unsupported PGM maxval " + std::to_string(maxval));
  ++pos;  // single whitespace after maxval
  const size_t need = static_cast<size_t>(r.w) * r.h;
  if (bytes.size() - pos < need)
    throw std::runtime_error("truncated PGM payload at byte offset " + std::to_string(bytes.size()) +
                             ", need " + std::to_string(pos + need));
  r.pix.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
               bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return r;
}

void write_pgm_file(const std::string& path, const Raster& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  auto bytes = write_pgm(r);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed for " + path);
}

Raster read_pgm_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return read_pgm(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// --- distance transform and medial axis ------------------------------------

std::vector<double> exact_distance_transform(const std::vector<std::uint8_t>& fg,
                                             int h, int w) {
  std::vector<std::pair<int, int>> boundary;  // background pixels 8-adjacent to fg
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (fg[static_cast<size_t>(y) * w + x]) continue;
      bool adj = false;
      for (int dy = -1; dy <= 1 && !adj; ++dy)
        for (int dx = -1; dx <= 1 && !adj; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny >= 0 && ny < h && nx >= 0 && nx < w && fg[static_cast<size_t>(ny) * w + nx])
            adj = true;
        }
      if (adj) boundary.emplace_back(y, x);
    }
  std::vector<double> d(static_cast<size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!fg[static_cast<size_t>(y) * w + x]) continue;
      // image border counts as background one pixel outside
      double best = std::min({y + 1, h - y, x + 1, w - x});
      best *= best;
      for (const auto& [by, bx] : boundary) {
        const double dy = y - by, dx = x - bx;
        best = std::min(best, dy * dy + dx * dx);
      }
      d[static_cast<size_t>(y) * w + x] = std::sqrt(best);
    }
  return d;
}

std::vector<std::uint8_t> medial_axis(const std::vector<std::uint8_t>& fg, int h, int w) {
  // Connectivity-preserving thinning erodes the shape evenly from all sides,
  // so the surviving unit-width curve tracks the centerline. A directional
  // distance-ridge detector was tried first but is unstable on the pixel
  // grid: equidistance ties split across one-pixel offsets and sprout spur
  // branches down the distance slope.
  return evalkit::thin(fg, h, w);
}

// --- sample generation -----------------------------------------------------

namespace {

double urand(std::mt19937& rng) { return rng() / 4294967296.0; }

struct ShapeMask {
  std::vector<std::uint8_t> m;
  int area = 0;
};

ShapeMask raster_shape(std::mt19937& rng, int size) {
  ShapeMask s;
  s.m.assign(static_cast<size_t>(size) * size, 0);
  const int kind = static_cast<int>(rng() % 3);
  const double cx = size * (0.25 + 0.5 * urand(rng));
  const double cy = size * (0.25 + 0.5 * urand(rng));
  auto fill = [&](auto inside) {
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        if (inside(x + 0.5, y + 0.5)) {
          s.m[static_cast<size_t>(y) * size + x] = 1;
          ++s.area;
        }
  };
  if (kind == 0) {  // ellipse
    const double rx = size * (0.10 + 0.18 * urand(rng));
    const double ry = size * (0.10 + 0.18 * urand(rng));
    const double th = 3.14159265358979 * urand(rng);
    fill([&](double x, double y) {
      const double ux = (x - cx) * std::cos(th) + (y - cy) * std::sin(th);
      const double uy = -(x - cx) * std::sin(th) + (y - cy) * std::cos(th);
      return ux * ux / (rx * rx) + uy * uy / (ry * ry) <= 1.0;
    });
  } else if (kind == 1) {  // axis-aligned rectangle
    const double hw = size * (0.10 + 0.18 * urand(rng));
    const double hh = size * (0.08 + 0.14 * urand(rng));
    fill([&](double x, double y) {
      return std::abs(x - cx) <= hw && std::abs(y - cy) <= hh;
    });
  } else {  // capsule
    const double len = size * (0.12 + 0.22 * urand(rng));
    const double rad = size * (0.05 + 0.08 * urand(rng));
    const double th = 3.14159265358979 * urand(rng);
    const double ax = cx - len * std::cos(th), ay = cy - len * std::sin(th);
    const double bx = cx + len * std::cos(th), by = cy + len * std::sin(th);
    fill([&](double x, double y) {
      const double vx = bx - ax, vy = by - ay;
      const double t = std::clamp(((x - ax) * vx + (y - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
      const double dx = x - (ax + t * vx), dy = y - (ay + t * vy);
      return dx * dx + dy * dy <= rad * rad;
    });
  }
  return s;
}

}  // namespace

Sample gen_sample(unsigned seed, int size) {
  if (size < 32 || size % 32 != 0)
    throw std::invalid_argument("sample size must be a positive multiple of 32, got " +
                                std::to_string(size));
  std::mt19937 rng(seed);
  Sample sample;
  sample.image.h = sample.image.w = size;
  sample.image.pix.assign(static_cast<size_t>(size) * size, 0);
  sample.id = "s" + std::to_string(seed);

  // low-amplitude value-noise background: coarse random grid, bilinear lift
  const int grid = 6;
  std::vector<double> coarse(static_cast<size_t>(grid) * grid);
  for (auto& v : coarse) v = urand(rng);
  auto value_noise = [&](double y, double x) {
    const double gy = y / size * (grid - 1), gx = x / size * (grid - 1);
    const int y0 = std::min(static_cast<int>(gy), grid - 2);
    const int x0 = std::min(static_cast<int>(gx), grid - 2);
    const double fy = gy - y0, fx = gx - x0;
    return (1 - fy) * ((1 - fx) * coarse[static_cast<size_t>(y0) * grid + x0] +
                       fx * coarse[static_cast<size_t>(y0) * grid + x0 + 1]) +
           fy * ((1 - fx) * coarse[static_cast<size_t>(y0 + 1) * grid + x0] +
                 fx * coarse[static_cast<size_t>(y0 + 1) * grid + x0 + 1]);
  };

  // shapes; each carries a signed intensity offset whose range overlaps the
  // background band, so no single gray level separates figure from ground
  // and the detector has to integrate context
  const int want = 1 + static_cast<int>(rng() % 3);
  sample.fg.assign(static_cast<size_t>(size) * size, 0);
  std::vector<double> offset(static_cast<size_t>(size) * size, 0.0);
  const int min_area = size * size / 160;
  int placed = 0;
  for (int attempt = 0; attempt < 40 && placed < want; ++attempt) {
    ShapeMask sm = raster_shape(rng, size);
    const double off = 26.0 + 14.0 * urand(rng);
    if (sm.area < min_area) continue;
    for (size_t i = 0; i < sm.m.size(); ++i)
      if (sm.m[i]) {
        sample.fg[i] = 1;
        offset[i] = off;
      }
    ++placed;
  }
  if (placed == 0)
    throw std::runtime_error("sample generation failed: no non-degenerate shape after retries");
  sample.shape_count = placed;

  sample.gt = medial_axis(sample.fg, size, size);

  // render: textured background, offset foreground, additive noise
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double v = 88.0 + 44.0 * value_noise(y + 0.5, x + 0.5);
      v += offset[static_cast<size_t>(y) * size + x];
      v += 16.0 * (urand(rng) - 0.5);
      sample.image.at(y, x) =
          static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  return sample;
}

// --- dataset I/O -----------------------------------------------------------

std::vector<Sample> load_dataset(const std::string& dir) {
  const fs::path images = fs::path(dir) / "images";
  const fs::path labels = fs::path(dir) / "labels";
  if (!fs::is_directory(dir))
    throw std::runtime_error("dataset directory " + dir + " does not exist");
  std::set<std::string> img_stems, lbl_stems;
  if (fs::exists(images))
    for (const auto& e : fs::directory_iterator(images))
      if (e.path().extension() == ".pgm") img_stems.insert(e.path().stem().string());
  if (fs::exists(labels))
    for (const auto& e : fs::directory_iterator(labels))
      if (e.path().extension() == ".pgm") lbl_stems.insert(e.path().stem().string());

  std::vector<std::string> orphans;
  for (const auto& s : img_stems)
    if (!lbl_stems.count(s)) orphans.push_back("images/" + s);
  for (const auto& s : lbl_stems)
    if (!img_stems.count(s)) orphans.push_back("labels/" + s);
  if (!orphans.empty()) {
    std::string msg = "unmatched dataset stems:";
    for (const auto& o : orphans) msg += " " + o;
    throw std::runtime_error(msg);
  }

  std::vector<Sample> out;
  for (const auto& stem : img_stems) {
    Sample s;
    s.id = stem;
    s.image = read_pgm_file((images / (stem + ".pgm")).string());
    Raster lbl = read_pgm_file((labels / (stem + ".pgm")).string());
    if (lbl.h != s.image.h || lbl.w != s.image.w)
      throw std::runtime_error("pair " + stem + ": image is " + std::to_string(s.image.w) + "x" +
                               std::to_string(s.image.h) + " but label is " +
                               std::to_string(lbl.w) + "x" + std::to_string(lbl.h));
    s.gt.resize(lbl.pix.size());
    for (size_t i = 0; i < lbl.pix.size(); ++i) s.gt[i] = lbl.pix[i] >= 128 ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lsn::datakit
