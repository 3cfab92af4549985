#pragma once

#include "foothold/common.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace foothold {

struct GridSpec {
  Vec2 origin_xy{0.0, 0.0};  // world position of the center of cell (0,0)
  double resolution = 0.02;
  int n_rows = 0;  // along y
  int n_cols = 0;  // along x
};

/// Regular 2.5D elevation grid. Row index runs along +y, column index along +x,
/// storage is row-major. Cell (r,c) is centered at origin_xy + (c*res, r*res).
class TerrainGrid {
 public:
  TerrainGrid() = default;

  TerrainGrid(const GridSpec& spec, std::vector<double> heights)
      : origin_(spec.origin_xy), resolution_(spec.resolution), rows_(spec.n_rows), cols_(spec.n_cols),
        heights_(std::move(heights)) {
    if (!(resolution_ > 0.0) || !std::isfinite(resolution_))
      throw InvalidArgument("terrain resolution must be positive");
    if (rows_ <= 0 || cols_ <= 0) throw InvalidArgument("terrain dimensions must be positive");
    if (static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_) != heights_.size())
      throw InvalidArgument("terrain height count does not match n_rows*n_cols");
    for (double h : heights_)
      if (!std::isfinite(h)) throw InvalidArgument("terrain heights must be finite");
  }

  static TerrainGrid flat(const GridSpec& spec, double z = 0.0) {
    return TerrainGrid(spec, std::vector<double>(static_cast<std::size_t>(spec.n_rows) * spec.n_cols, z));
  }

  const Vec2& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  GridSpec spec() const { return {origin_, resolution_, rows_, cols_}; }
  const std::vector<double>& heights() const { return heights_; }

  double at(int r, int c) const { return heights_[static_cast<std::size_t>(r) * cols_ + c]; }

  Vec2 cell_center(int r, int c) const { return origin_ + Vec2(c * resolution_, r * resolution_); }

  double x_max() const { return origin_.x() + (cols_ - 1) * resolution_; }
  double y_max() const { return origin_.y() + (rows_ - 1) * resolution_; }

  bool contains(const Vec2& xy) const {
    constexpr double tol = 1e-9;
    return xy.x() >= origin_.x() - tol && xy.x() <= x_max() + tol && xy.y() >= origin_.y() - tol &&
           xy.y() <= y_max() + tol;
  }

  // Nearest cell index, unclamped.
  std::pair<int, int> nearest_cell(const Vec2& xy) const {
    const auto r = static_cast<int>(std::floor((xy.y() - origin_.y()) / resolution_ + 0.5));
    const auto c = static_cast<int>(std::floor((xy.x() - origin_.x()) / resolution_ + 0.5));
    return {r, c};
  }

  double nearest_height(const Vec2& xy) const {
    auto [r, c] = nearest_cell(xy);
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw OutOfExtent("nearest-cell query outside terrain grid");
    return at(r, c);
  }

 private:
  Vec2 origin_{0.0, 0.0};
  double resolution_ = 0.02;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> heights_;
};

/// Square per-foot heightmap of kWindowSize cells per side. Cell (i,j) is
/// centered at center_xy + ((j - W/2)*res, (i - W/2)*res).
struct HeightmapWindow {
  Vec2 center_xy{0.0, 0.0};
  double resolution = 0.02;
  std::array<double, kWindowCells> heights{};

  double at(int i, int j) const { return heights[static_cast<std::size_t>(i) * kWindowSize + j]; }
  double& at(int i, int j) { return heights[static_cast<std::size_t>(i) * kWindowSize + j]; }

  Vec2 cell_center(int i, int j) const {
    return center_xy + Vec2((j - kWindowSize / 2) * resolution, (i - kWindowSize / 2) * resolution);
  }

  // Nearest-cell lookup; queries beyond the window read the closest border cell.
  double lookup_clamped(double x, double y) const {
    // Clamp before the integer conversion; floor by truncation avoids a libm call in this hot path.
    auto index = [&](double v) {
      v = std::clamp(v, -1e6, 1e6);
      auto t = static_cast<long>(v);
      if (static_cast<double>(t) > v) --t;
      return static_cast<int>(std::clamp<long>(t + kWindowSize / 2, 0, kWindowSize - 1));
    };
    return at(index((y - center_xy.y()) / resolution + 0.5), index((x - center_xy.x()) / resolution + 0.5));
  }
};

/// Straight staircase climbing along +x, flat in y. The first riser is at
/// `first_riser_x`; every tread is `step_run` long and the top level extends
/// to the end of the grid.
inline TerrainGrid generate_stairs(double step_rise, double step_run, int n_steps, const GridSpec& spec,
                                   double first_riser_x) {
  if (!(step_rise > 0.0)) throw InvalidArgument("step_rise must be positive");
  if (!(spec.resolution > 0.0)) throw InvalidArgument("terrain resolution must be positive");
  if (step_run < 2.0 * spec.resolution) throw InvalidArgument("step_run must span at least two cells");
  if (n_steps < 0) throw InvalidArgument("n_steps must be non-negative");
  if (spec.n_rows <= 0 || spec.n_cols <= 0) throw InvalidArgument("terrain dimensions must be positive");

  std::vector<double> row(static_cast<std::size_t>(spec.n_cols), 0.0);
  for (int c = 0; c < spec.n_cols; ++c) {
    const double x = spec.origin_xy.x() + c * spec.resolution;
    if (n_steps == 0 || x < first_riser_x) continue;
    // Small bias keeps cell centers that sit exactly on a riser on the upper tread.
    const auto k = static_cast<int>(std::floor((x - first_riser_x) / step_run + 1e-9)) + 1;
    row[c] = step_rise * std::min(k, n_steps);
  }
  std::vector<double> heights;
  heights.reserve(static_cast<std::size_t>(spec.n_rows) * spec.n_cols);
  for (int r = 0; r < spec.n_rows; ++r) heights.insert(heights.end(), row.begin(), row.end());
  return TerrainGrid(spec, std::move(heights));
}

// Overload placing the first riser one third of the way along the grid.
inline TerrainGrid generate_stairs(double step_rise, double step_run, int n_steps, const GridSpec& spec) {
  const double x0 = spec.origin_xy.x() + (spec.n_cols - 1) * spec.resolution / 3.0;
  return generate_stairs(step_rise, step_run, n_steps, spec, x0);
}

namespace detail {

// Uniform in [-1, 1) straight from the engine bits, identical on every standard library.
inline double unit_noise(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

inline std::vector<double> box_blur(const std::vector<double>& in, int rows, int cols, int radius) {
  if (radius <= 0) return in;
  std::vector<double> tmp(in.size()), out(in.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      int n = 0;
      for (int k = std::max(0, c - radius); k <= std::min(cols - 1, c + radius); ++k, ++n) s += in[r * cols + k];
      tmp[r * cols + c] = s / n;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      int n = 0;
      for (int k = std::max(0, r - radius); k <= std::min(rows - 1, r + radius); ++k, ++n) s += tmp[k * cols + c];
      out[r * cols + c] = s / n;
    }
  return out;
}

}  // namespace detail

/// Value noise on a lattice of spacing `correlation_len`, bilinearly
/// interpolated, smoothed by two box-filter passes and rescaled so the peak
/// absolute height equals `amplitude`.
inline TerrainGrid generate_rough(double amplitude, double correlation_len, std::uint64_t seed, const GridSpec& spec) {
  if (!(amplitude >= 0.0)) throw InvalidArgument("amplitude must be non-negative");
  if (!(correlation_len > 0.0)) throw InvalidArgument("correlation_len must be positive");
  const int rows = spec.n_rows, cols = spec.n_cols;
  if (rows <= 0 || cols <= 0) throw InvalidArgument("terrain dimensions must be positive");
  if (amplitude == 0.0) return TerrainGrid::flat(spec);

  const double cells_per_node = std::max(1.0, correlation_len / spec.resolution);
  const int nr = static_cast<int>(std::ceil((rows - 1) / cells_per_node)) + 2;
  const int nc = static_cast<int>(std::ceil((cols - 1) / cells_per_node)) + 2;
  std::mt19937_64 rng(seed);
  std::vector<double> lattice(static_cast<std::size_t>(nr) * nc);
  for (double& v : lattice) v = detail::unit_noise(rng);

  std::vector<double> h(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    const double fr = r / cells_per_node;
    const int r0 = static_cast<int>(fr);
    const double tr = fr - r0;
    for (int c = 0; c < cols; ++c) {
      const double fc = c / cells_per_node;
      const int c0 = static_cast<int>(fc);
      const double tc = fc - c0;
      const double v00 = lattice[r0 * nc + c0], v01 = lattice[r0 * nc + c0 + 1];
      const double v10 = lattice[(r0 + 1) * nc + c0], v11 = lattice[(r0 + 1) * nc + c0 + 1];
      h[r * cols + c] = (1 - tr) * ((1 - tc) * v00 + tc * v01) + tr * ((1 - tc) * v10 + tc * v11);
    }
  }
  const int radius = std::max(1, static_cast<int>(cells_per_node / 4));
  h = detail::box_blur(detail::box_blur(h, rows, cols, radius), rows, cols, radius);

  double peak = 0.0;
  for (double v : h) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return TerrainGrid::flat(spec);
  const double scale = amplitude / peak;
  for (double& v : h) v = std::clamp(v * scale, -amplitude, amplitude);
  return TerrainGrid(spec, std::move(h));
}

/// Bilinear interpolation between the four surrounding cell centers.
inline double sample_height(const TerrainGrid& grid, const Vec2& xy) {
  if (!grid.contains(xy)) throw OutOfExtent("sample_height query outside terrain extent");
  // Queries within roundoff of a cell center snap onto it, so cell centers reproduce stored heights exactly.
  auto index = [](double f, double hi) {
    const double r = std::round(f);
    return std::clamp(std::abs(f - r) < 1e-9 ? r : f, 0.0, hi);
  };
  const double fx = index((xy.x() - grid.origin().x()) / grid.resolution(), grid.cols() - 1.0);
  const double fy = index((xy.y() - grid.origin().y()) / grid.resolution(), grid.rows() - 1.0);
  const int c0 = std::min(static_cast<int>(fx), std::max(grid.cols() - 2, 0));
  const int r0 = std::min(static_cast<int>(fy), std::max(grid.rows() - 2, 0));
  const int c1 = std::min(c0 + 1, grid.cols() - 1);
  const int r1 = std::min(r0 + 1, grid.rows() - 1);
  const double tx = fx - c0, ty = fy - r0;
  return (1 - ty) * ((1 - tx) * grid.at(r0, c0) + tx * grid.at(r0, c1)) +
         ty * ((1 - tx) * grid.at(r1, c0) + tx * grid.at(r1, c1));
}

inline HeightmapWindow extract_window(const TerrainGrid& grid, const Vec2& center_xy) {
  HeightmapWindow w;
  w.center_xy = center_xy;
  w.resolution = grid.resolution();
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j) {
      auto [r, c] = grid.nearest_cell(w.cell_center(i, j));
      if (r < 0 || r >= grid.rows() || c < 0 || c >= grid.cols())
        throw OutOfExtent("heightmap window footprint exceeds terrain extent");
      w.at(i, j) = grid.at(r, c);
    }
  return w;
}

}  // namespace foothold
