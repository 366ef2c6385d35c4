#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ssc/scene.hpp"

using namespace ssc;

namespace {

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "ssc_scene_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::array<double, 3> center_of(const SceneSpec& spec, int i, int j, int k) {
  return {spec.origin[0] + spec.voxel_size * (i + 0.5),
          spec.origin[1] + spec.voxel_size * (j + 0.5),
          spec.origin[2] + spec.voxel_size * (k + 0.5)};
}

}  // namespace

TEST_CASE("sphere rasterization marks exactly the centers inside") {
  SceneSpec spec;
  spec.dims = {8, 8, 8};
  spec.voxel_size = 0.5;
  spec.num_classes = 5;
  std::array<double, 3> c = {2.0, 2.0, 2.0};
  double r = 1.2;
  spec.primitives.push_back(SpherePrimitive{c, r, 3});
  SceneResult res = generate_scene(spec);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      for (int k = 0; k < 8; ++k) {
        auto x = center_of(spec, i, j, k);
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) d2 += (x[a] - c[a]) * (x[a] - c[a]);
        bool inside = d2 <= r * r;
        CHECK(res.occupancy.at(i, j, k) == (inside ? 1 : 0));
        CHECK(res.labels.at(i, j, k) == (inside ? 3 : 0));
      }
    }
  }
  CHECK(res.occupancy.occupied_count() > 0);
}

TEST_CASE("box and plane rasterization, later primitives win") {
  SceneSpec spec;
  spec.dims = {10, 10, 6};
  spec.voxel_size = 0.5;
  spec.num_classes = 6;
  BoxPrimitive box{{2.5, 2.5, 1.5}, {1.0, 0.75, 0.5}, 2};
  PlanePrimitive plane{{2.5, 2.5, 1.0}, {0.0, 0.0, 1.0}, 0.6, 4};
  spec.primitives.push_back(box);
  spec.primitives.push_back(plane);
  SceneResult res = generate_scene(spec);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      for (int k = 0; k < 6; ++k) {
        auto x = center_of(spec, i, j, k);
        bool in_box = std::abs(x[0] - 2.5) <= 1.0 && std::abs(x[1] - 2.5) <= 0.75 &&
                      std::abs(x[2] - 1.5) <= 0.5;
        bool in_plane = std::abs(x[2] - 1.0) <= 0.3;
        int expect = in_plane ? 4 : in_box ? 2 : 0;
        CHECK(int(res.labels.at(i, j, k)) == expect);
        CHECK(res.occupancy.at(i, j, k) == (expect != 0 ? 1 : 0));
      }
    }
  }
}

TEST_CASE("scene validation rejects bad primitives") {
  SceneSpec spec;
  spec.dims = {4, 4, 4};
  spec.voxel_size = 1.0;
  spec.num_classes = 4;

  auto with = [&](Primitive p) {
    SceneSpec s = spec;
    s.primitives.push_back(std::move(p));
    return s;
  };
  // reaches outside the grid
  CHECK_THROWS_AS(generate_scene(with(SpherePrimitive{{0.5, 2, 2}, 1.0, 1})),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(with(BoxPrimitive{{2, 2, 2}, {3, 1, 1}, 1})),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(with(PlanePrimitive{{5, 2, 2}, {0, 0, 1}, 0.5, 1})),
                  std::invalid_argument);
  // label 0 is the empty class, label >= num_classes is out of range
  CHECK_THROWS_AS(generate_scene(with(SpherePrimitive{{2, 2, 2}, 1.0, 0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(with(SpherePrimitive{{2, 2, 2}, 1.0, 4})),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(with(SpherePrimitive{{2, 2, 2}, -1.0, 1})),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(with(PlanePrimitive{{2, 2, 2}, {0, 0, 0}, 0.5, 1})),
                  std::invalid_argument);

  SceneSpec bad = spec;
  bad.num_classes = 1;
  CHECK_THROWS_AS(generate_scene(bad), std::invalid_argument);
  bad = spec;
  bad.voxel_size = 0.0;
  CHECK_THROWS_AS(generate_scene(bad), std::invalid_argument);
}

TEST_CASE("projection and backprojection invert each other") {
  CameraModel cam;
  cam.fx = 2.0;
  cam.fy = 3.0;
  cam.cx = 10.0;
  cam.cy = 20.0;
  cam.width = 32;
  cam.height = 32;
  Projection p = project_to_image({1.0, 2.0, 4.0}, cam);
  CHECK(p.u == doctest::Approx(10.5).epsilon(1e-15));
  CHECK(p.v == doctest::Approx(21.5).epsilon(1e-15));
  CHECK(p.depth == 4.0);
  Eigen::Vector3d back = backproject_to_world(p.u, p.v, p.depth, cam);
  CHECK(back.isApprox(Eigen::Vector3d(1, 2, 4), 1e-12));

  CHECK_THROWS_AS(project_to_image({0, 0, 0}, cam), BehindCameraError);
  CHECK_THROWS_AS(project_to_image({0, 0, -5}, cam), BehindCameraError);
  CHECK(!try_project({0, 0, -5}, cam).has_value());
  CHECK_THROWS_AS(backproject_to_world(0, 0, 0.0, cam), std::invalid_argument);

  // round trip through a rotated camera
  SceneSpec spec;
  CameraModel scene_cam = default_scene_camera(spec);
  scene_cam.validate();
  Eigen::Vector3d world(3.1, 5.2, 2.7);
  Projection q = project_to_image(world, scene_cam);
  CHECK(backproject_to_world(q.u, q.v, q.depth, scene_cam).isApprox(world, 1e-9));
}

TEST_CASE("depth image holds first sphere intersections") {
  SceneSpec spec;
  spec.dims = {16, 16, 8};
  spec.voxel_size = 0.4;
  spec.num_classes = 5;
  Eigen::Vector3d c(3.2, 3.2, 1.6);
  double r = 1.2;
  spec.primitives.push_back(SpherePrimitive{{c.x(), c.y(), c.z()}, r, 1});
  SceneResult res = generate_scene(spec);
  const CameraModel& cam = res.camera;
  CHECK(res.depth.width == cam.width);
  CHECK(res.depth.height == cam.height);

  Eigen::Vector3d eye = -(cam.rotation.transpose() * cam.translation);
  int hits = 0;
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      Eigen::Vector3d dir =
          cam.rotation.transpose() *
          Eigen::Vector3d((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      // closest approach of the ray line to the sphere center
      Eigen::Vector3d rel = c - eye;
      double t_star = rel.dot(dir) / dir.squaredNorm();
      double miss = (rel - t_star * dir).norm();
      double d = res.depth.at(v, u);
      if (miss > r + 1e-9) {
        CHECK(d == 0.0);
        continue;
      }
      if (miss < r - 1e-6) {
        REQUIRE(d > 0.0);
        ++hits;
        Eigen::Vector3d x = eye + d * dir;
        // the hit lies on the sphere surface, on the near side
        CHECK(std::abs((x - c).norm() - r) <= 1e-9);
        CHECK(dir.dot(c - x) >= -1e-9);
      }
    }
  }
  CHECK(hits > 50);
}

TEST_CASE("splat accumulates mean depth per voxel") {
  CameraModel cam;
  cam.fx = 1.0;
  cam.fy = 100.0;
  cam.cx = 0.0;
  cam.cy = 0.0;
  cam.width = 1;
  cam.height = 2;
  DepthImage img;
  img.width = 1;
  img.height = 2;
  img.depth = {1.2, 1.8};  // both rays stay in voxel (0,0,1)
  VoxelGrid g = splat_depth(img, cam, Dims{2, 2, 4}, 1.0, {0, 0, 0});
  CHECK(g.at(0, 0, 1) == doctest::Approx(1.5).epsilon(1e-15));
  double total = 0.0;
  for (double v : g.data) total += std::abs(v);
  CHECK(total == doctest::Approx(1.5).epsilon(1e-15));

  img.depth = {1.2, 0.0};  // zero depth pixels are skipped
  g = splat_depth(img, cam, Dims{2, 2, 4}, 1.0, {0, 0, 0});
  CHECK(g.at(0, 0, 1) == 1.2);

  img.depth = {100.0, 0.0};  // backprojects outside the grid
  g = splat_depth(img, cam, Dims{2, 2, 4}, 1.0, {0, 0, 0});
  for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("scene spec files parse every field") {
  auto path = temp_file("spec.txt");
  {
    std::ofstream f(path);
    f << "# comment\n";
    f << "scene.h=6\nscene.w=5\nscene.z=4\n";
    f << "scene.voxel_size=0.25\n";
    f << "scene.origin=1 2 3\n";
    f << "scene.num_classes=7\n";
    f << "scene.seed=99\n";
    f << "primitive.0=sphere 1.5 2.5 3.5 0.25 2\n";
    f << "primitive.1=box 1.5 2.5 3.5 0.2 0.2 0.2 3\n";
    f << "primitive.2=plane 1.5 2.5 3.5 0 0 1 0.1 4\n";
  }
  SceneSpec spec = read_scene_spec(path.string());
  CHECK(spec.dims == Dims{6, 5, 4});
  CHECK(spec.voxel_size == 0.25);
  CHECK(spec.origin == std::array<double, 3>{1, 2, 3});
  CHECK(spec.num_classes == 7);
  CHECK(spec.seed == 99);
  REQUIRE(spec.primitives.size() == 3);
  auto& s = std::get<SpherePrimitive>(spec.primitives[0]);
  CHECK(s.center == std::array<double, 3>{1.5, 2.5, 3.5});
  CHECK(s.radius == 0.25);
  CHECK(s.label == 2);
  auto& b = std::get<BoxPrimitive>(spec.primitives[1]);
  CHECK(b.half_extents == std::array<double, 3>{0.2, 0.2, 0.2});
  CHECK(b.label == 3);
  auto& pl = std::get<PlanePrimitive>(spec.primitives[2]);
  CHECK(pl.thickness == 0.1);
  CHECK(pl.label == 4);

  {
    std::ofstream f(path);
    f << "scene.h=6\nscene.bogus=1\n";
  }
  CHECK_THROWS_AS(read_scene_spec(path.string()), std::invalid_argument);
  {
    std::ofstream f(path);
    f << "primitive.0=sphere 1 2 3 4\n";  // too few values
  }
  CHECK_THROWS_AS(read_scene_spec(path.string()), std::invalid_argument);
}

TEST_CASE("camera files round trip") {
  SceneSpec spec;
  spec.dims = {12, 10, 8};
  CameraModel cam = default_scene_camera(spec);
  auto path = temp_file("cams.txt");
  write_cameras(path.string(), {cam, cam});
  auto cams = read_cameras(path.string());
  REQUIRE(cams.size() == 2);
  CHECK(cams[0].fx == cam.fx);
  CHECK(cams[0].cx == cam.cx);
  CHECK(cams[0].cy == cam.cy);
  CHECK((cams[0].rotation.array() == cam.rotation.array()).all());
  CHECK((cams[0].translation.array() == cam.translation.array()).all());
  CHECK(cams[0].width == cam.width);
  CHECK(cams[0].height == cam.height);

  CHECK_THROWS_AS(read_cameras("/nonexistent/cams.txt"), std::invalid_argument);
  {
    std::ofstream f(path);
    f << "fx 10\nfy 10\n";  // incomplete block
  }
  CHECK_THROWS_AS(read_cameras(path.string()), std::invalid_argument);
}
