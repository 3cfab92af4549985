#include "foothold/terrain.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace foothold;

namespace {

GridSpec grid(int rows = 60, int cols = 120, double res = 0.02, Vec2 origin = Vec2(0.0, 0.0)) {
  return GridSpec{origin, res, rows, cols};
}

}  // namespace

TEST(Stairs, HeightPastLastStepIsTotalRise) {
  const auto g = generate_stairs(0.10, 0.30, 4, grid(20, 200), 1.0);
  // Last riser at 1.0 + 3*0.30 = 1.9 m; the top level continues to the end.
  EXPECT_DOUBLE_EQ(g.nearest_height(Vec2(2.5, 0.1)), 0.40);
  EXPECT_DOUBLE_EQ(g.nearest_height(Vec2(3.98, 0.1)), 0.40);
  EXPECT_DOUBLE_EQ(g.nearest_height(Vec2(0.5, 0.1)), 0.0);
}

TEST(Stairs, ZeroStepsIsFlat) {
  const auto g = generate_stairs(0.10, 0.30, 0, grid());
  for (double h : g.heights()) EXPECT_EQ(h, 0.0);
}

TEST(Stairs, TreadBetweenRisersIsExact) {
  const auto g = generate_stairs(0.10, 0.30, 4, grid(20, 200), 1.0);
  for (double x = 1.02; x < 1.29; x += 0.02) EXPECT_DOUBLE_EQ(g.nearest_height(Vec2(x, 0.2)), 0.10) << x;
  for (double x = 1.32; x < 1.59; x += 0.02) EXPECT_DOUBLE_EQ(g.nearest_height(Vec2(x, 0.2)), 0.20) << x;
}

TEST(Stairs, InvariantAlongY) {
  const auto g = generate_stairs(0.07, 0.24, 6, grid(40, 150), 0.5);
  for (int r = 1; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) ASSERT_EQ(g.at(r, c), g.at(0, c));
}

TEST(Stairs, MonotoneAlongX) {
  const auto g = generate_stairs(0.07, 0.24, 6, grid(4, 300), 0.5);
  for (int c = 1; c < g.cols(); ++c) EXPECT_GE(g.at(0, c), g.at(0, c - 1));
}

TEST(Stairs, RejectsBadDimensions) {
  EXPECT_THROW(generate_stairs(0.0, 0.3, 3, grid()), InvalidArgument);
  EXPECT_THROW(generate_stairs(0.1, 0.03, 3, grid()), InvalidArgument);
  EXPECT_THROW(generate_stairs(0.1, 0.3, -1, grid()), InvalidArgument);
  EXPECT_THROW(generate_stairs(0.1, 0.3, 3, grid(0, 10)), InvalidArgument);
}

TEST(Rough, ZeroAmplitudeIsFlat) {
  const auto g = generate_rough(0.0, 0.3, 5, grid());
  for (double h : g.heights()) EXPECT_EQ(h, 0.0);
}

TEST(Rough, DeterministicForSeed) {
  const auto a = generate_rough(0.06, 0.25, 42, grid());
  const auto b = generate_rough(0.06, 0.25, 42, grid());
  EXPECT_EQ(a.heights(), b.heights());
  const auto c = generate_rough(0.06, 0.25, 43, grid());
  EXPECT_NE(a.heights(), c.heights());
}

TEST(Rough, BoundedByAmplitude) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = generate_rough(0.08, 0.2 + 0.05 * seed, seed, grid());
    double peak = 0.0;
    for (double h : g.heights()) peak = std::max(peak, std::abs(h));
    EXPECT_LE(peak, 0.08);
    EXPECT_GT(peak, 0.07);  // rescaled so the peak reaches the amplitude
  }
}

TEST(Rough, GoldenChecksum) {
  const auto g = generate_rough(0.08, 0.30, 7, grid(100, 100));
  double sum = 0.0, weighted = 0.0;
  for (std::size_t k = 0; k < g.heights().size(); ++k) {
    sum += g.heights()[k];
    weighted += g.heights()[k] * static_cast<double>(k % 97 + 1);
  }
  EXPECT_NEAR(sum, -147.91675214645821, 1e-9);
  EXPECT_NEAR(weighted, -7834.2790633811865, 1e-7);
}

TEST(SampleHeight, CellCenterAndMidpoint) {
  std::vector<double> h(4 * 4, 0.0);
  for (int r = 0; r < 4; ++r) h[r * 4 + 2] = 0.1;
  const TerrainGrid g(GridSpec{Vec2(1.0, 2.0), 0.05, 4, 4}, h);
  EXPECT_DOUBLE_EQ(sample_height(g, g.cell_center(1, 2)), 0.1);
  EXPECT_DOUBLE_EQ(sample_height(g, g.cell_center(1, 1)), 0.0);
  EXPECT_NEAR(sample_height(g, 0.5 * (g.cell_center(1, 1) + g.cell_center(1, 2))), 0.05, 1e-15);
}

TEST(SampleHeight, OutOfExtentThrows) {
  const auto g = TerrainGrid::flat(grid());
  EXPECT_THROW(sample_height(g, Vec2(-0.1, 0.5)), OutOfExtent);
  EXPECT_THROW(sample_height(g, Vec2(0.5, g.y_max() + 0.01)), OutOfExtent);
  EXPECT_NO_THROW(sample_height(g, Vec2(g.x_max(), g.y_max())));
}

TEST(SampleHeight, Continuous) {
  const auto g = generate_rough(0.08, 0.2, 3, grid());
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, g.x_max() - 1e-5), uy(0.0, g.y_max() - 1e-5);
  for (int k = 0; k < 2000; ++k) {
    const Vec2 p(ux(rng), uy(rng));
    EXPECT_LT(std::abs(sample_height(g, p) - sample_height(g, p + Vec2(1e-6, 0.0))), 1e-4);
    EXPECT_LT(std::abs(sample_height(g, p) - sample_height(g, p + Vec2(0.0, 1e-6))), 1e-4);
  }
}

TEST(Window, FlatGridGivesZeroWindow) {
  const auto g = TerrainGrid::flat(grid());
  const auto w = extract_window(g, Vec2(1.2, 0.6));
  for (double h : w.heights) EXPECT_EQ(h, 0.0);
  EXPECT_EQ(w.resolution, g.resolution());
}

TEST(Window, StairEdgeReproducesProfile) {
  const auto g = generate_stairs(0.10, 0.30, 4, grid(60, 200), 1.0);
  const Vec2 c = g.cell_center(30, 50);  // x = 1.0, on the first riser
  const auto w = extract_window(g, c);
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j) {
      // Window cells coincide with grid cell centers, where bilinear sampling is exact.
      ASSERT_DOUBLE_EQ(w.at(i, j), sample_height(g, w.cell_center(i, j)));
      ASSERT_EQ(w.at(i, j), w.at(0, j));
    }
  EXPECT_EQ(w.at(5, kWindowSize / 2 - 1), 0.0);
  EXPECT_EQ(w.at(5, kWindowSize / 2), 0.10);
}

TEST(Window, CenterCellMatchesNearestGridCell) {
  const auto g = generate_rough(0.05, 0.2, 9, grid(80, 80));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.4, 1.1);
  for (int k = 0; k < 200; ++k) {
    const Vec2 c(u(rng), u(rng));
    const auto w = extract_window(g, c);
    EXPECT_EQ(w.at(kWindowSize / 2, kWindowSize / 2), g.nearest_height(c));
  }
}

TEST(Window, FootprintOutsideGridThrows) {
  const auto g = TerrainGrid::flat(grid());
  EXPECT_THROW(extract_window(g, Vec2(0.1, 0.6)), OutOfExtent);
  EXPECT_THROW(extract_window(g, Vec2(1.2, g.y_max() - 0.05)), OutOfExtent);
}

TEST(Grid, RejectsInvalidData) {
  EXPECT_THROW(TerrainGrid(GridSpec{Vec2::Zero(), 0.0, 2, 2}, std::vector<double>(4)), InvalidArgument);
  EXPECT_THROW(TerrainGrid(GridSpec{Vec2::Zero(), 0.02, 2, 2}, std::vector<double>(3)), InvalidArgument);
  EXPECT_THROW(TerrainGrid(GridSpec{Vec2::Zero(), 0.02, 1, 2}, std::vector<double>{0.0, std::nan("")}),
               InvalidArgument);
}
