#pragma once

#include <string>

#include "ssc/grid.hpp"

namespace ssc {

// Binary grid files, little-endian throughout.
//
//   VXG1: magic "VXG1", u32 h, w, z, d, f64 voxel_size, f64 origin[3],
//         then h*w*z*d float32 payload values in grid order.
//   VXO1: magic "VXO1", u32 h, w, z, then one byte (0/1) per voxel.
//   VXL1: magic "VXL1", u32 h, w, z, num_classes, then one label byte per voxel.
//
// Readers throw FormatError (carrying a byte offset) for bad magic, zero or
// overflowing dimensions, truncated or oversized payloads, and out-of-range
// payload values (non-finite floats, occupancy bytes other than 0/1, labels
// not below num_classes and not 255).

void write_grid(const std::string& path, const VoxelGrid& grid);
void write_grid(const std::string& path, const OccupancyGrid& grid);
void write_grid(const std::string& path, const SemanticGrid& grid);

VoxelGrid read_voxel_grid(const std::string& path);
OccupancyGrid read_occupancy_grid(const std::string& path);
SemanticGrid read_semantic_grid(const std::string& path);

// Magic string of the file at path ("VXG1", "VXO1", "VXL1").
std::string peek_magic(const std::string& path);

}  // namespace ssc
