#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "ssc/grid.hpp"

namespace ssc {

// Iso-surface edge-crossing counts. counts[v] belongs to the cell anchored at
// voxel v (its 8 corners are the centers of v and its +1 neighbors); voxels on
// the high faces anchor no cell and hold 0. Range 0..12.
struct ComplexityGrid {
  Dims dims;
  double iso_level = 0.5;
  std::vector<int> counts;

  int at(int i, int j, int k) const {
    return counts[(static_cast<std::size_t>(i) * dims.w + j) * dims.z + k];
  }
};

struct ResolutionGrid {
  Dims dims;
  double c0 = 6.0;
  double s = 2.0;
  std::vector<double> values;  // strictly inside (0,1)

  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(i) * dims.w + j) * dims.z + k];
  }
};

struct GavConfig {
  double c0 = 6.0;
  double s = 2.0;
  double delta = 0.5;  // voxels; converted to normalized units at use
  int n_points = 6;
  double iso = 0.5;
};

// Counts cell edges whose endpoint values straddle iso (one side < iso, the
// other >= iso). Equals the marching-cubes intersection count per cell.
ComplexityGrid edge_crossing_count(const VoxelGrid& field, double iso);

// R = 1 / (1 + exp(-(C - c0)/s)) element-wise. Requires s > 0.
ResolutionGrid resolution_map(const ComplexityGrid& complexity, double c0, double s);

// First n_points of the axis directions +x,-x,+y,-y,+z,-z, cycling past six.
std::vector<std::array<double, 3>> default_stencil(int n_points);

// p'_k = p + delta * R * stencil_k + offsets_k, in normalized coordinates.
std::vector<std::array<double, 3>> adaptive_query_points(
    const std::array<double, 3>& p, double r_value, double delta,
    const std::vector<std::array<double, 3>>& offsets,
    const std::vector<std::array<double, 3>>& stencil);

// Delta p = reshape(Wp * f) into n_points rows of 3.
std::vector<std::array<double, 3>> offset_head(const Eigen::VectorXd& f,
                                               const Eigen::MatrixXd& wp);

// Normalized-unit spread for a delta given in voxel units: the normalized
// voxel spacing of the longest axis, scaled by delta. Degenerate grids give 0.
double delta_to_normalized(double delta_voxels, const Dims& dims);

}  // namespace ssc
