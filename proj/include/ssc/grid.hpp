#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssc/errors.hpp"

namespace ssc {

struct Dims {
  int h = 0;
  int w = 0;
  int z = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
  std::size_t count() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
           static_cast<std::size_t>(z);
  }
};

// Dense per-voxel feature grid. Row-major: i slowest, then j, then k, with the
// feature channel fastest. Values are doubles in memory; files store float32.
struct VoxelGrid {
  Dims dims;
  int feature_dim = 0;
  double voxel_size = 1.0;
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::vector<double> data;

  VoxelGrid() = default;
  VoxelGrid(Dims dims, int feature_dim, double fill = 0.0, double voxel_size = 1.0,
            std::array<double, 3> origin = {0.0, 0.0, 0.0});

  std::size_t voxel_count() const { return dims.count(); }

  std::size_t voxel_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims.w + j) * dims.z + k;
  }

  std::size_t index(int i, int j, int k, int c = 0) const {
    return voxel_index(i, j, k) * feature_dim + c;
  }

  double& at(int i, int j, int k, int c = 0) { return data[index(i, j, k, c)]; }
  double at(int i, int j, int k, int c = 0) const { return data[index(i, j, k, c)]; }

  std::span<double> feature(int i, int j, int k) {
    return {data.data() + index(i, j, k), static_cast<std::size_t>(feature_dim)};
  }
  std::span<const double> feature(int i, int j, int k) const {
    return {data.data() + index(i, j, k), static_cast<std::size_t>(feature_dim)};
  }

  // World position of the voxel center: origin + voxel_size * (index + 0.5).
  std::array<double, 3> center_world(int i, int j, int k) const {
    return {origin[0] + voxel_size * (i + 0.5), origin[1] + voxel_size * (j + 0.5),
            origin[2] + voxel_size * (k + 0.5)};
  }

  bool all_finite() const;
};

// Binary occupancy, one byte per voxel, 0 or 1. Same index order as VoxelGrid.
struct OccupancyGrid {
  Dims dims;
  std::vector<std::uint8_t> data;

  OccupancyGrid() = default;
  explicit OccupancyGrid(Dims dims, std::uint8_t fill = 0);

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims.w + j) * dims.z + k;
  }
  std::uint8_t& at(int i, int j, int k) { return data[index(i, j, k)]; }
  std::uint8_t at(int i, int j, int k) const { return data[index(i, j, k)]; }

  std::size_t occupied_count() const;
};

// Per-voxel class labels: 0 = empty, 1..M = semantic classes, 255 = ignore.
// num_classes counts the empty class, so valid labels are < num_classes or 255.
struct SemanticGrid {
  static constexpr std::uint8_t kIgnore = 255;

  Dims dims;
  int num_classes = 0;
  std::vector<std::uint8_t> labels;

  SemanticGrid() = default;
  SemanticGrid(Dims dims, int num_classes, std::uint8_t fill = 0);

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims.w + j) * dims.z + k;
  }
  std::uint8_t& at(int i, int j, int k) { return labels[index(i, j, k)]; }
  std::uint8_t at(int i, int j, int k) const { return labels[index(i, j, k)]; }
};

// Normalized grid coordinate of a voxel center along one axis. Index 0 maps to
// -1, index n-1 maps to +1 (align-corners). A single-slice axis maps to 0.
inline double index_to_norm(int index, int n) {
  return n > 1 ? -1.0 + 2.0 * index / (n - 1) : 0.0;
}

// Inverse of index_to_norm: continuous (fractional) voxel index.
inline double norm_to_index(double x, int n) {
  return n > 1 ? (x + 1.0) * 0.5 * (n - 1) : 0.0;
}

inline std::array<double, 3> voxel_norm_coord(const Dims& dims, int i, int j, int k) {
  return {index_to_norm(i, dims.h), index_to_norm(j, dims.w), index_to_norm(k, dims.z)};
}

// Block-max pooling. factor must evenly divide every dimension.
OccupancyGrid downsample_occupancy(const OccupancyGrid& occ, int factor);

}  // namespace ssc
