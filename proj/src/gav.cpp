#include "ssc/gav.hpp"

#include <algorithm>
#include <cmath>

namespace ssc {

namespace {

// The 12 edges of a unit cell as corner-offset pairs (corners in {0,1}^3).
constexpr int kCellEdges[12][2][3] = {
    {{0, 0, 0}, {1, 0, 0}}, {{0, 1, 0}, {1, 1, 0}}, {{0, 0, 1}, {1, 0, 1}},
    {{0, 1, 1}, {1, 1, 1}}, {{0, 0, 0}, {0, 1, 0}}, {{1, 0, 0}, {1, 1, 0}},
    {{0, 0, 1}, {0, 1, 1}}, {{1, 0, 1}, {1, 1, 1}}, {{0, 0, 0}, {0, 0, 1}},
    {{1, 0, 0}, {1, 0, 1}}, {{0, 1, 0}, {0, 1, 1}}, {{1, 1, 0}, {1, 1, 1}}};

bool straddles(double a, double b, double iso) {
  return (a < iso && b >= iso) || (b < iso && a >= iso);
}

}  // namespace

ComplexityGrid edge_crossing_count(const VoxelGrid& field, double iso) {
  if (field.feature_dim != 1) {
    throw std::invalid_argument("edge_crossing_count needs a scalar field");
  }
  if (field.dims.h < 2 || field.dims.w < 2 || field.dims.z < 2) {
    throw std::invalid_argument("edge_crossing_count needs at least 2 voxels per axis");
  }
  if (!std::isfinite(iso)) throw std::invalid_argument("iso level must be finite");
  ComplexityGrid out;
  out.dims = field.dims;
  out.iso_level = iso;
  out.counts.assign(field.voxel_count(), 0);
  for (int i = 0; i + 1 < field.dims.h; ++i) {
    for (int j = 0; j + 1 < field.dims.w; ++j) {
      for (int k = 0; k + 1 < field.dims.z; ++k) {
        int count = 0;
        for (const auto& edge : kCellEdges) {
          double a = field.at(i + edge[0][0], j + edge[0][1], k + edge[0][2]);
          double b = field.at(i + edge[1][0], j + edge[1][1], k + edge[1][2]);
          if (straddles(a, b, iso)) ++count;
        }
        out.counts[field.voxel_index(i, j, k)] = count;
      }
    }
  }
  return out;
}

ResolutionGrid resolution_map(const ComplexityGrid& complexity, double c0, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("resolution_map needs s > 0");
  if (!std::isfinite(c0)) throw std::invalid_argument("c0 must be finite");
  ResolutionGrid out;
  out.dims = complexity.dims;
  out.c0 = c0;
  out.s = s;
  out.values.resize(complexity.counts.size());
  for (std::size_t v = 0; v < complexity.counts.size(); ++v) {
    out.values[v] = 1.0 / (1.0 + std::exp(-(complexity.counts[v] - c0) / s));
  }
  return out;
}

std::vector<std::array<double, 3>> default_stencil(int n_points) {
  if (n_points < 1) throw std::invalid_argument("n_points must be at least 1");
  const std::array<double, 3> axes[6] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  std::vector<std::array<double, 3>> out;
  out.reserve(n_points);
  for (int n = 0; n < n_points; ++n) out.push_back(axes[n % 6]);
  return out;
}

std::vector<std::array<double, 3>> adaptive_query_points(
    const std::array<double, 3>& p, double r_value, double delta,
    const std::vector<std::array<double, 3>>& offsets,
    const std::vector<std::array<double, 3>>& stencil) {
  if (offsets.size() != stencil.size()) {
    throw std::invalid_argument("offsets and stencil must have equal length");
  }
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be non-negative");
  std::vector<std::array<double, 3>> out(offsets.size());
  for (std::size_t n = 0; n < offsets.size(); ++n) {
    for (int a = 0; a < 3; ++a) {
      out[n][a] = p[a] + delta * r_value * stencil[n][a] + offsets[n][a];
    }
  }
  return out;
}

std::vector<std::array<double, 3>> offset_head(const Eigen::VectorXd& f,
                                               const Eigen::MatrixXd& wp) {
  if (wp.cols() != f.size()) throw std::invalid_argument("offset head input dim mismatch");
  if (wp.rows() % 3 != 0 || wp.rows() == 0) {
    throw std::invalid_argument("offset head output dim must be 3*n_points");
  }
  Eigen::VectorXd flat = wp * f;
  std::vector<std::array<double, 3>> out(static_cast<std::size_t>(wp.rows() / 3));
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = {flat(3 * n), flat(3 * n + 1), flat(3 * n + 2)};
  }
  return out;
}

double delta_to_normalized(double delta_voxels, const Dims& dims) {
  int longest = std::max({dims.h, dims.w, dims.z});
  if (longest < 2) return 0.0;
  return delta_voxels * 2.0 / (longest - 1);
}

}  // namespace ssc
