#include "ssc/grid.hpp"

#include <cmath>
#include <string>

namespace ssc {

namespace {

void check_dims(const Dims& dims) {
  if (dims.h < 1 || dims.w < 1 || dims.z < 1) {
    throw std::invalid_argument("grid dimensions must be at least 1, got (" +
                                std::to_string(dims.h) + ", " + std::to_string(dims.w) +
                                ", " + std::to_string(dims.z) + ")");
  }
}

}  // namespace

VoxelGrid::VoxelGrid(Dims dims_, int feature_dim_, double fill, double voxel_size_,
                     std::array<double, 3> origin_)
    : dims(dims_), feature_dim(feature_dim_), voxel_size(voxel_size_), origin(origin_) {
  check_dims(dims);
  if (feature_dim < 0) {
    throw std::invalid_argument("feature_dim must be non-negative, got " +
                                std::to_string(feature_dim));
  }
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw std::invalid_argument("voxel_size must be positive and finite");
  }
  if (!std::isfinite(fill)) {
    throw std::invalid_argument("fill value must be finite");
  }
  for (double o : origin) {
    if (!std::isfinite(o)) throw std::invalid_argument("origin must be finite");
  }
  data.assign(dims.count() * static_cast<std::size_t>(feature_dim), fill);
}

bool VoxelGrid::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

OccupancyGrid::OccupancyGrid(Dims dims_, std::uint8_t fill) : dims(dims_) {
  check_dims(dims);
  if (fill > 1) throw std::invalid_argument("occupancy fill must be 0 or 1");
  data.assign(dims.count(), fill);
}

std::size_t OccupancyGrid::occupied_count() const {
  std::size_t n = 0;
  for (std::uint8_t v : data) n += v;
  return n;
}

SemanticGrid::SemanticGrid(Dims dims_, int num_classes_, std::uint8_t fill)
    : dims(dims_), num_classes(num_classes_) {
  check_dims(dims);
  if (num_classes < 1) {
    throw std::invalid_argument("num_classes must be at least 1");
  }
  if (fill != kIgnore && fill >= num_classes) {
    throw std::invalid_argument("fill label out of range");
  }
  labels.assign(dims.count(), fill);
}

OccupancyGrid downsample_occupancy(const OccupancyGrid& occ, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample factor must be at least 1");
  if (occ.dims.h % factor != 0 || occ.dims.w % factor != 0 || occ.dims.z % factor != 0) {
    throw std::invalid_argument("downsample factor " + std::to_string(factor) +
                                " does not divide grid dimensions");
  }
  OccupancyGrid out(Dims{occ.dims.h / factor, occ.dims.w / factor, occ.dims.z / factor});
  for (int i = 0; i < occ.dims.h; ++i) {
    for (int j = 0; j < occ.dims.w; ++j) {
      for (int k = 0; k < occ.dims.z; ++k) {
        if (occ.at(i, j, k)) out.at(i / factor, j / factor, k / factor) = 1;
      }
    }
  }
  return out;
}

}  // namespace ssc
