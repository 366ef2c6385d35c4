#pragma once

#include <string>
#include <variant>
#include <vector>

#include "ssc/camera.hpp"
#include "ssc/grid.hpp"

namespace ssc {

struct SpherePrimitive {
  std::array<double, 3> center;
  double radius;
  int label;
};

struct BoxPrimitive {
  std::array<double, 3> center;
  std::array<double, 3> half_extents;
  int label;
};

// Slab of the given thickness around the plane through `point` with normal
// `normal`. The point must lie inside the grid; the slab is clipped to it.
struct PlanePrimitive {
  std::array<double, 3> point;
  std::array<double, 3> normal;
  double thickness;
  int label;
};

using Primitive = std::variant<SpherePrimitive, BoxPrimitive, PlanePrimitive>;

struct SceneSpec {
  Dims dims{32, 32, 16};
  double voxel_size = 0.4;
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  int num_classes = 20;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
};

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // row-major, v slowest; 0 marks no hit

  double at(int v, int u) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  double& at(int v, int u) { return depth[static_cast<std::size_t>(v) * width + u]; }
};

struct SceneResult {
  OccupancyGrid occupancy;
  SemanticGrid labels;
  CameraModel camera;
  DepthImage depth;
};

// Camera placed behind the low-x face, looking along +x through the grid.
CameraModel default_scene_camera(const SceneSpec& spec);

// Rasterizes the primitives over voxel centers (later primitives win where
// they overlap) and renders a depth image from the scene camera by ray
// casting. Throws invalid_argument when a primitive reaches outside the grid
// or uses an out-of-range label. Deterministic for a fixed spec.
SceneResult generate_scene(const SceneSpec& spec);

// Accumulates depth pixels into the voxel containing their backprojection.
// One channel per voxel: mean depth of the pixels that landed there, 0 where
// none did.
VoxelGrid splat_depth(const DepthImage& depth, const CameraModel& cam, const Dims& dims,
                      double voxel_size, const std::array<double, 3>& origin);

// Scene description files: flat key=value lines (scene.h, scene.w, scene.z,
// scene.voxel_size, scene.origin, scene.num_classes, scene.seed) plus one
// primitive.<index> line each, e.g.
//   primitive.0=sphere cx cy cz radius label
//   primitive.1=box cx cy cz hx hy hz label
//   primitive.2=plane px py pz nx ny nz thickness label
SceneSpec read_scene_spec(const std::string& path);

}  // namespace ssc
