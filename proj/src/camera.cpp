#include "ssc/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ssc {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("camera principal point must be finite");
  }
  if (width < 1 || height < 1) {
    throw std::invalid_argument("camera image size must be at least 1x1");
  }
  Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("camera rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("camera rotation must have determinant +1");
  }
  if (!translation.allFinite()) {
    throw std::invalid_argument("camera translation must be finite");
  }
}

Projection project_to_image(const Eigen::Vector3d& p, const CameraModel& cam) {
  Eigen::Vector3d pc = cam.rotation * p + cam.translation;
  if (pc.z() < kMinDepth) {
    throw BehindCameraError("point behind camera (z = " + std::to_string(pc.z()) + ")");
  }
  return {cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy, pc.z()};
}

std::optional<Projection> try_project(const Eigen::Vector3d& p, const CameraModel& cam) {
  Eigen::Vector3d pc = cam.rotation * p + cam.translation;
  if (pc.z() < kMinDepth) return std::nullopt;
  return Projection{cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy,
                    pc.z()};
}

Eigen::Vector3d backproject_to_world(double u, double v, double depth,
                                     const CameraModel& cam) {
  if (!(depth > 0.0)) throw std::invalid_argument("backprojection needs positive depth");
  Eigen::Vector3d pc((u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth);
  return cam.rotation.transpose() * (pc - cam.translation);
}

namespace {

std::string strip(const std::string& line) {
  std::string s = line.substr(0, line.find('#'));
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void finish_camera(CameraModel& cam, int fields_seen, std::vector<CameraModel>& out) {
  if (fields_seen == 0) return;
  if (fields_seen != 8) {
    throw std::invalid_argument("camera block is missing fields");
  }
  cam.validate();
  out.push_back(cam);
}

}  // namespace

std::vector<CameraModel> read_cameras(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open camera file: " + path);
  std::vector<CameraModel> out;
  CameraModel cam;
  int fields_seen = 0;
  std::string line;
  while (std::getline(f, line)) {
    std::string s = strip(line);
    if (s.empty()) {
      finish_camera(cam, fields_seen, out);
      cam = CameraModel{};
      fields_seen = 0;
      continue;
    }
    std::istringstream ss(s);
    std::string key;
    ss >> key;
    bool ok = true;
    if (key == "fx") ok = bool(ss >> cam.fx);
    else if (key == "fy") ok = bool(ss >> cam.fy);
    else if (key == "cx") ok = bool(ss >> cam.cx);
    else if (key == "cy") ok = bool(ss >> cam.cy);
    else if (key == "width") ok = bool(ss >> cam.width);
    else if (key == "height") ok = bool(ss >> cam.height);
    else if (key == "R") {
      for (int r = 0; r < 3 && ok; ++r)
        for (int c = 0; c < 3 && ok; ++c) ok = bool(ss >> cam.rotation(r, c));
    } else if (key == "t") {
      for (int r = 0; r < 3 && ok; ++r) ok = bool(ss >> cam.translation(r));
    } else {
      throw std::invalid_argument("unknown camera field: " + key);
    }
    if (!ok) throw std::invalid_argument("malformed camera field: " + key);
    ++fields_seen;
  }
  finish_camera(cam, fields_seen, out);
  if (out.empty()) throw std::invalid_argument("camera file holds no cameras: " + path);
  return out;
}

void write_cameras(const std::string& path, const std::vector<CameraModel>& cams) {
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot open for writing: " + path);
  f.precision(17);
  for (const CameraModel& cam : cams) {
    f << "fx " << cam.fx << "\n";
    f << "fy " << cam.fy << "\n";
    f << "cx " << cam.cx << "\n";
    f << "cy " << cam.cy << "\n";
    f << "R";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f << " " << cam.rotation(r, c);
    f << "\n";
    f << "t";
    for (int r = 0; r < 3; ++r) f << " " << cam.translation(r);
    f << "\n";
    f << "width " << cam.width << "\n";
    f << "height " << cam.height << "\n\n";
  }
}

}  // namespace ssc
