#include "ssc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssc/kv.hpp"

namespace ssc {

namespace {

using Vec3 = Eigen::Vector3d;

Vec3 to_vec(const std::array<double, 3>& a) { return Vec3(a[0], a[1], a[2]); }

struct Aabb {
  Vec3 lo, hi;
};

Aabb grid_bounds(const SceneSpec& spec) {
  Vec3 lo = to_vec(spec.origin);
  Vec3 hi = lo + Vec3(spec.dims.h, spec.dims.w, spec.dims.z) * spec.voxel_size;
  return {lo, hi};
}

void check_label(int label, int num_classes) {
  if (label < 1 || label >= num_classes) {
    throw std::invalid_argument("primitive label " + std::to_string(label) +
                                " outside 1.." + std::to_string(num_classes - 1));
  }
}

void check_inside(const Aabb& bounds, const Vec3& lo, const Vec3& hi, const char* kind) {
  for (int a = 0; a < 3; ++a) {
    if (lo[a] < bounds.lo[a] || hi[a] > bounds.hi[a]) {
      throw std::invalid_argument(std::string(kind) + " primitive reaches outside the grid");
    }
  }
}

void validate_primitive(const Primitive& prim, const SceneSpec& spec) {
  Aabb bounds = grid_bounds(spec);
  if (const auto* s = std::get_if<SpherePrimitive>(&prim)) {
    check_label(s->label, spec.num_classes);
    if (!(s->radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
    Vec3 c = to_vec(s->center);
    Vec3 r = Vec3::Constant(s->radius);
    check_inside(bounds, c - r, c + r, "sphere");
  } else if (const auto* b = std::get_if<BoxPrimitive>(&prim)) {
    check_label(b->label, spec.num_classes);
    Vec3 he = to_vec(b->half_extents);
    if (!(he.minCoeff() > 0.0)) {
      throw std::invalid_argument("box half extents must be positive");
    }
    Vec3 c = to_vec(b->center);
    check_inside(bounds, c - he, c + he, "box");
  } else {
    const auto& p = std::get<PlanePrimitive>(prim);
    check_label(p.label, spec.num_classes);
    if (!(p.thickness > 0.0)) throw std::invalid_argument("plane thickness must be positive");
    Vec3 n = to_vec(p.normal);
    if (!(n.norm() > 1e-12)) throw std::invalid_argument("plane normal must be nonzero");
    Vec3 pt = to_vec(p.point);
    check_inside(bounds, pt, pt, "plane");
  }
}

bool contains(const Primitive& prim, const Vec3& x) {
  if (const auto* s = std::get_if<SpherePrimitive>(&prim)) {
    return (x - to_vec(s->center)).squaredNorm() <= s->radius * s->radius;
  }
  if (const auto* b = std::get_if<BoxPrimitive>(&prim)) {
    Vec3 d = (x - to_vec(b->center)).cwiseAbs();
    Vec3 he = to_vec(b->half_extents);
    return d[0] <= he[0] && d[1] <= he[1] && d[2] <= he[2];
  }
  const auto& p = std::get<PlanePrimitive>(prim);
  Vec3 n = to_vec(p.normal).normalized();
  return std::abs((x - to_vec(p.point)).dot(n)) <= 0.5 * p.thickness;
}

// Ray origin C and unnormalized direction d with unit camera-frame z, so the
// ray parameter equals camera depth. Returns the smallest hit depth inside the
// grid, or 0 when the primitive is missed.
double ray_hit(const Primitive& prim, const Vec3& C, const Vec3& d, const Aabb& grid) {
  double s0 = 0.0, s1 = 0.0;
  if (const auto* sp = std::get_if<SpherePrimitive>(&prim)) {
    Vec3 oc = C - to_vec(sp->center);
    double a = d.dot(d);
    double b = 2.0 * d.dot(oc);
    double c = oc.squaredNorm() - sp->radius * sp->radius;
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return 0.0;
    double sq = std::sqrt(disc);
    s0 = (-b - sq) / (2.0 * a);
    s1 = (-b + sq) / (2.0 * a);
  } else if (const auto* b = std::get_if<BoxPrimitive>(&prim)) {
    Vec3 lo = to_vec(b->center) - to_vec(b->half_extents);
    Vec3 hi = to_vec(b->center) + to_vec(b->half_extents);
    s0 = -std::numeric_limits<double>::infinity();
    s1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d[a]) < 1e-15) {
        if (C[a] < lo[a] || C[a] > hi[a]) return 0.0;
        continue;
      }
      double t0 = (lo[a] - C[a]) / d[a];
      double t1 = (hi[a] - C[a]) / d[a];
      if (t0 > t1) std::swap(t0, t1);
      s0 = std::max(s0, t0);
      s1 = std::min(s1, t1);
    }
    if (s0 > s1) return 0.0;
  } else {
    const auto& p = std::get<PlanePrimitive>(prim);
    Vec3 n = to_vec(p.normal).normalized();
    double dn = d.dot(n);
    if (std::abs(dn) < 1e-12) return 0.0;
    double base = (to_vec(p.point) - C).dot(n);
    s0 = (base - 0.5 * p.thickness) / dn;
    s1 = (base + 0.5 * p.thickness) / dn;
    if (s0 > s1) std::swap(s0, s1);
  }
  for (double s : {s0, s1}) {
    if (s < kMinDepth) continue;
    Vec3 x = C + s * d;
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      if (x[a] < grid.lo[a] - 1e-9 || x[a] > grid.hi[a] + 1e-9) inside = false;
    }
    if (inside) return s;
  }
  return 0.0;
}

}  // namespace

CameraModel default_scene_camera(const SceneSpec& spec) {
  Vec3 extent = Vec3(spec.dims.h, spec.dims.w, spec.dims.z) * spec.voxel_size;
  Vec3 eye = to_vec(spec.origin) + Vec3(-0.6 * extent[0], 0.5 * extent[1], 0.5 * extent[2]);
  CameraModel cam;
  cam.fx = cam.fy = 90.0;
  cam.width = 160;
  cam.height = 120;
  cam.cx = (cam.width - 1) / 2.0;
  cam.cy = (cam.height - 1) / 2.0;
  // Camera x right (world -y), y down (world -z), z forward (world +x).
  cam.rotation << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  cam.translation = -cam.rotation * eye;
  cam.validate();
  return cam;
}

SceneResult generate_scene(const SceneSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > 255) {
    throw std::invalid_argument("scene num_classes must be in 2..255");
  }
  if (!(spec.voxel_size > 0.0)) {
    throw std::invalid_argument("scene voxel_size must be positive");
  }
  for (const Primitive& prim : spec.primitives) validate_primitive(prim, spec);

  SceneResult out;
  out.occupancy = OccupancyGrid(spec.dims);
  out.labels = SemanticGrid(spec.dims, spec.num_classes);
  out.camera = default_scene_camera(spec);

  VoxelGrid geom(spec.dims, 0, 0.0, spec.voxel_size, spec.origin);
  for (int i = 0; i < spec.dims.h; ++i) {
    for (int j = 0; j < spec.dims.w; ++j) {
      for (int k = 0; k < spec.dims.z; ++k) {
        Vec3 center = to_vec(geom.center_world(i, j, k));
        for (const Primitive& prim : spec.primitives) {
          if (!contains(prim, center)) continue;
          out.occupancy.at(i, j, k) = 1;
          int label = std::visit([](const auto& p) { return p.label; }, prim);
          out.labels.at(i, j, k) = static_cast<std::uint8_t>(label);
        }
      }
    }
  }

  const CameraModel& cam = out.camera;
  out.depth.width = cam.width;
  out.depth.height = cam.height;
  out.depth.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0);
  Aabb grid = grid_bounds(spec);
  Vec3 eye = -(cam.rotation.transpose() * cam.translation);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      Vec3 dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      Vec3 dir = cam.rotation.transpose() * dir_cam;
      double best = 0.0;
      for (const Primitive& prim : spec.primitives) {
        double s = ray_hit(prim, eye, dir, grid);
        if (s > 0.0 && (best == 0.0 || s < best)) best = s;
      }
      out.depth.at(v, u) = best;
    }
  }
  return out;
}

VoxelGrid splat_depth(const DepthImage& depth, const CameraModel& cam, const Dims& dims,
                      double voxel_size, const std::array<double, 3>& origin) {
  VoxelGrid grid(dims, 1, 0.0, voxel_size, origin);
  std::vector<std::uint32_t> hits(grid.voxel_count(), 0);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      double dep = depth.at(v, u);
      if (!(dep > 0.0)) continue;
      Vec3 x = backproject_to_world(u, v, dep, cam);
      int i = static_cast<int>(std::floor((x[0] - origin[0]) / voxel_size));
      int j = static_cast<int>(std::floor((x[1] - origin[1]) / voxel_size));
      int k = static_cast<int>(std::floor((x[2] - origin[2]) / voxel_size));
      if (i < 0 || i >= dims.h || j < 0 || j >= dims.w || k < 0 || k >= dims.z) continue;
      grid.at(i, j, k) += dep;
      ++hits[grid.voxel_index(i, j, k)];
    }
  }
  for (std::size_t n = 0; n < hits.size(); ++n) {
    if (hits[n] > 0) grid.data[n] /= hits[n];
  }
  return grid;
}

SceneSpec read_scene_spec(const std::string& path) {
  auto kv = read_kv_file(path);
  SceneSpec spec;
  take_int(kv, "scene.h", spec.dims.h);
  take_int(kv, "scene.w", spec.dims.w);
  take_int(kv, "scene.z", spec.dims.z);
  take_double(kv, "scene.voxel_size", spec.voxel_size);
  take_int(kv, "scene.num_classes", spec.num_classes);
  take_u64(kv, "scene.seed", spec.seed);
  std::string origin_s;
  if (take_string(kv, "scene.origin", origin_s)) {
    auto vals = parse_doubles(origin_s, "scene.origin");
    if (vals.size() != 3) throw std::invalid_argument("scene.origin needs 3 values");
    spec.origin = {vals[0], vals[1], vals[2]};
  }

  for (int n = 0;; ++n) {
    std::string line;
    if (!take_string(kv, "primitive." + std::to_string(n), line)) break;
    std::string key = "primitive." + std::to_string(n);
    std::size_t sp = line.find(' ');
    std::string kind = line.substr(0, sp);
    auto vals = parse_doubles(sp == std::string::npos ? "" : line.substr(sp), key);
    if (kind == "sphere" && vals.size() == 5) {
      spec.primitives.push_back(SpherePrimitive{
          {vals[0], vals[1], vals[2]}, vals[3], static_cast<int>(vals[4])});
    } else if (kind == "box" && vals.size() == 7) {
      spec.primitives.push_back(BoxPrimitive{{vals[0], vals[1], vals[2]},
                                             {vals[3], vals[4], vals[5]},
                                             static_cast<int>(vals[6])});
    } else if (kind == "plane" && vals.size() == 8) {
      spec.primitives.push_back(PlanePrimitive{{vals[0], vals[1], vals[2]},
                                               {vals[3], vals[4], vals[5]},
                                               vals[6],
                                               static_cast<int>(vals[7])});
    } else {
      throw std::invalid_argument(key + ": expected 'sphere c3 r label', " +
                                  "'box c3 h3 label' or 'plane p3 n3 thickness label'");
    }
  }
  if (!kv.empty()) {
    throw std::invalid_argument("unknown scene key: " + kv.begin()->first);
  }
  return spec;
}

}  // namespace ssc
