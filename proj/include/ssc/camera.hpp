#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ssc/errors.hpp"
#include "ssc/grid.hpp"

namespace ssc {

// Points closer than this to the image plane count as behind the camera.
constexpr double kMinDepth = 1e-6;

// Pinhole camera. rotation/translation map world points into the camera
// frame: pc = R * p + t, with +z looking forward.
struct CameraModel {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int width = 0;
  int height = 0;

  // Throws invalid_argument unless fx,fy > 0, width,height >= 1, and rotation
  // is orthonormal within 1e-9 with determinant +1.
  void validate() const;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // z in the camera frame

  bool in_bounds(const CameraModel& cam) const {
    return u >= 0.0 && u <= cam.width - 1 && v >= 0.0 && v <= cam.height - 1;
  }
};

// Throws BehindCameraError when the camera-frame z is below kMinDepth.
Projection project_to_image(const Eigen::Vector3d& p, const CameraModel& cam);

// Non-throwing variant used by visibility tests.
std::optional<Projection> try_project(const Eigen::Vector3d& p, const CameraModel& cam);

// Inverse of project_to_image at the given depth.
Eigen::Vector3d backproject_to_world(double u, double v, double depth,
                                     const CameraModel& cam);

// Text camera files: labeled fields (fx, fy, cx, cy, R with nine row-major
// values, t with three values, width, height), one camera per block, blocks
// separated by blank lines. '#' starts a comment.
std::vector<CameraModel> read_cameras(const std::string& path);
void write_cameras(const std::string& path, const std::vector<CameraModel>& cams);

}  // namespace ssc
