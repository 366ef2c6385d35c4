#include <doctest.h>

#include <cmath>

#include "ssc/pipeline.hpp"
#include "ssc/rng.hpp"

using namespace ssc;

namespace {

// Scene whose camera and depth image drive the pipeline inputs.
SceneResult toy_scene(const PipelineConfig& config) {
  SceneSpec spec;
  spec.dims = config.output_dims();
  spec.voxel_size = config.voxel_size;
  spec.origin = config.origin;
  spec.num_classes = config.num_classes;
  double ext_h = config.h * config.low_res_voxel_size();
  double ext_w = config.w * config.low_res_voxel_size();
  double ext_z = config.z * config.low_res_voxel_size();
  double r = 0.3 * std::min({ext_h, ext_w, ext_z});
  spec.primitives.push_back(
      SpherePrimitive{{0.5 * ext_h, 0.5 * ext_w, 0.5 * ext_z}, r, 1});
  return generate_scene(spec);
}

struct ForwardInputs {
  std::vector<ImageInput> images;
  VoxelGrid depth_grid;
};

ForwardInputs make_inputs(const PipelineConfig& config) {
  SceneResult scene = toy_scene(config);
  ForwardInputs in;
  in.images.push_back({depth_image_features(scene.depth), scene.camera});
  in.depth_grid = splat_depth(scene.depth, scene.camera, config.low_res_dims(),
                              config.low_res_voxel_size(), config.origin);
  return in;
}

}  // namespace

TEST_CASE("proposals gather masked query rows in index order") {
  VoxelGrid queries(Dims{1, 2, 2}, 2);
  queries.data = {1, 2, 3, 4, 5, 6, 7, 8};
  OccupancyGrid mask(Dims{1, 2, 2});
  mask.data = {1, 0, 0, 1};
  QueryProposalSet set = stage1_proposals(queries, mask);
  REQUIRE(set.indices == std::vector<std::size_t>{0, 3});
  REQUIRE(set.features.rows() == 2);
  CHECK(set.features(0, 0) == 1);
  CHECK(set.features(0, 1) == 2);
  CHECK(set.features(1, 0) == 7);
  CHECK(set.features(1, 1) == 8);

  OccupancyGrid wrong(Dims{2, 2, 1});
  CHECK_THROWS_AS(stage1_proposals(queries, wrong), std::invalid_argument);
}

TEST_CASE("zero-initialized parameters give a neutral forward pass") {
  PipelineConfig config;
  config.h = 4;
  config.w = 4;
  config.z = 2;
  PipelineParams params = make_params(config, 3, ParamInit::zero);
  CHECK(params.voxel_queries.data == std::vector<double>(4 * 4 * 2 * 8, 0.0));
  CHECK(params.dca_params.wq.isZero(0.0));
  CHECK(params.occ_head.isZero(0.0));
  CHECK(params.class_head.isZero(0.0));
  // zero LocNet weight keeps the identity transform
  std::vector<double> q(9, 0.7);
  AffineTheta theta = locnet_forward(q, params.locnet);
  CHECK(theta.linear.isIdentity(0.0));
  CHECK(theta.translation.isZero(0.0));

  ForwardInputs in = make_inputs(config);
  ForwardResult res = pipeline_forward(in.images, in.depth_grid, config, params);
  CHECK(res.m_out.occupied_count() == 0);  // sigmoid(0) is not above 0.5
  CHECK(res.proposals.indices.empty());
  CHECK(res.stage2_logits.feature_dim == config.num_classes);
  CHECK(res.stage2_logits.dims == config.output_dims());
  for (double v : res.stage2_logits.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(make_params(config, 0, ParamInit::zero), std::invalid_argument);
}

TEST_CASE("forward output has one channel per class and matches the output dims") {
  PipelineConfig config;
  config.h = 3;
  config.w = 3;
  config.z = 2;
  config.seed = 11;
  ForwardInputs in = make_inputs(config);
  PipelineParams params = make_params(config, 3, ParamInit::seeded);
  ForwardResult res = pipeline_forward(in.images, in.depth_grid, config, params);
  CHECK(res.stage2_logits.feature_dim == 20);
  CHECK(res.stage2_logits.dims == Dims{6, 6, 4});
  CHECK(res.stage2_logits.all_finite());
  CHECK(res.stage1_logits.dims == config.low_res_dims());
  CHECK(res.proposals.indices.size() == res.m_out.occupied_count());
}

TEST_CASE("forward is deterministic in the seed") {
  PipelineConfig config;
  config.h = 3;
  config.w = 3;
  config.z = 2;
  config.seed = 5;
  ForwardInputs in = make_inputs(config);
  PipelineParams a = make_params(config, 3, ParamInit::seeded);
  PipelineParams b = make_params(config, 3, ParamInit::seeded);
  ForwardResult ra = pipeline_forward(in.images, in.depth_grid, config, a);
  ForwardResult rb = pipeline_forward(in.images, in.depth_grid, config, b);
  CHECK(ra.stage2_logits.data == rb.stage2_logits.data);
  CHECK(ra.stage1_logits.data == rb.stage1_logits.data);

  config.seed = 6;
  PipelineParams c = make_params(config, 3, ParamInit::seeded);
  ForwardResult rc = pipeline_forward(in.images, in.depth_grid, config, c);
  CHECK(ra.stage2_logits.data != rc.stage2_logits.data);
}

TEST_CASE("thread count does not change the forward output") {
  PipelineConfig config;
  config.h = 3;
  config.w = 3;
  config.z = 2;
  config.seed = 12;
  ForwardInputs in = make_inputs(config);
  PipelineParams params = make_params(config, 3, ParamInit::seeded);
  ForwardResult base = pipeline_forward(in.images, in.depth_grid, config, params);
  for (int threads : {2, 3, 7}) {
    PipelineConfig threaded = config;
    threaded.threads = threads;
    ForwardResult res = pipeline_forward(in.images, in.depth_grid, threaded, params);
    CHECK(res.stage2_logits.data == base.stage2_logits.data);
    CHECK(res.stage1_logits.data == base.stage1_logits.data);
    CHECK(res.m_out.data == base.m_out.data);
  }
}

TEST_CASE("forward reduces to a per-voxel linear map when the stack is neutral") {
  // Single-voxel clusters, near-zero connection bandwidth, identity LocNet and
  // GCN, one attention point with zero offsets: stage 2 is then
  // class_head * wv * [masked stage-1 feature | depth] at every voxel.
  PipelineConfig config;
  config.h = 3;
  config.w = 3;
  config.z = 2;  // per-axis extents with exact normalized lattice coordinates
  config.seed = 21;
  config.stgf.k = 18;
  config.stgf.sigma = 1e-9;
  config.gav.n_points = 1;
  config.gav.delta = 0.0;
  ForwardInputs in = make_inputs(config);
  PipelineParams params = make_params(config, 3, ParamInit::seeded);
  int df = config.query_dim + 1;
  params.locnet = LocNetParams::identity_init(df);
  params.gcn = GcnParams::identity_init(df, config.stgf.gcn_layers);
  params.dsa_params.wp.setZero();

  ForwardResult res = pipeline_forward(in.images, in.depth_grid, config, params);

  Dims low = config.low_res_dims();
  for (int i = 0; i < low.h; ++i) {
    for (int j = 0; j < low.w; ++j) {
      for (int k = 0; k < low.z; ++k) {
        Eigen::VectorXd q(config.query_dim);
        auto src = params.voxel_queries.feature(i, j, k);
        for (int c = 0; c < config.query_dim; ++c) q(c) = src[c];
        auto center = params.voxel_queries.center_world(i, j, k);
        DcaResult r = dca(q, Eigen::Vector3d(center[0], center[1], center[2]),
                          in.images, params.dca_params);
        double logit = params.occ_head.dot(r.feature);
        std::size_t v = res.stage1_logits.voxel_index(i, j, k);
        CHECK(res.stage1_logits.data[v] == logit);
        bool proposed = 1.0 / (1.0 + std::exp(-logit)) > 0.5;
        CHECK(res.m_out.data[v] == (proposed ? 1 : 0));

        Eigen::VectorXd stacked = Eigen::VectorXd::Zero(df);
        if (proposed) stacked.head(config.query_dim) = r.feature;
        stacked(config.query_dim) = in.depth_grid.data[v];
        Eigen::VectorXd expect = params.class_head * (params.dsa_params.wv * stacked);
        for (int up_i = 0; up_i < 2; ++up_i) {
          for (int up_j = 0; up_j < 2; ++up_j) {
            for (int up_k = 0; up_k < 2; ++up_k) {
              auto got = res.stage2_logits.feature(2 * i + up_i, 2 * j + up_j,
                                                   2 * k + up_k);
              for (int c = 0; c < config.num_classes; ++c) {
                CHECK(std::abs(got[c] - expect(c)) <= 1e-9);
              }
            }
          }
        }
      }
    }
  }
}

TEST_CASE("forward input validation") {
  PipelineConfig config;
  config.h = 3;
  config.w = 3;
  config.z = 2;
  ForwardInputs in = make_inputs(config);
  PipelineParams params = make_params(config, 3, ParamInit::zero);

  VoxelGrid bad_dims(Dims{2, 2, 2}, 1);
  CHECK_THROWS_AS(pipeline_forward(in.images, bad_dims, config, params),
                  std::invalid_argument);
  VoxelGrid bad_channels(config.low_res_dims(), 2);
  CHECK_THROWS_AS(pipeline_forward(in.images, bad_channels, config, params),
                  std::invalid_argument);
  CHECK_THROWS_AS(pipeline_forward({}, in.depth_grid, config, params),
                  std::invalid_argument);
}

TEST_CASE("nearest upsampling repeats blocks") {
  Rng rng(51);
  VoxelGrid g(Dims{2, 3, 2}, 2, 0.0, 0.8);
  for (auto& v : g.data) v = rng.normal();
  VoxelGrid up = upsample_nearest(g, 2);
  CHECK(up.dims == Dims{4, 6, 4});
  CHECK(up.voxel_size == 0.4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) {
      for (int k = 0; k < 4; ++k) {
        for (int c = 0; c < 2; ++c) {
          CHECK(up.at(i, j, k, c) == g.at(i / 2, j / 2, k / 2, c));
        }
      }
    }
  }
  CHECK_THROWS_AS(upsample_nearest(g, 0), std::invalid_argument);
}

TEST_CASE("depth image features normalize depth and pixel coordinates") {
  DepthImage img;
  img.width = 2;
  img.height = 2;
  img.depth = {2.0, 4.0, 0.0, 1.0};
  FeatureMap2D map = depth_image_features(img);
  REQUIRE(map.channels == 3);
  CHECK(map.at(0, 0, 0) == 0.5);
  CHECK(map.at(0, 1, 0) == 1.0);
  CHECK(map.at(1, 0, 0) == 0.0);
  CHECK(map.at(1, 1, 0) == 0.25);
  CHECK(map.at(0, 1, 1) == 1.0);  // u / (width-1)
  CHECK(map.at(1, 0, 2) == 1.0);  // v / (height-1)
  CHECK(map.at(0, 0, 1) == 0.0);

  img.depth = {0.0, 0.0, 0.0, 0.0};
  map = depth_image_features(img);
  CHECK(map.at(0, 0, 0) == 0.0);
}

TEST_CASE("toy overfit descends and is deterministic") {
  SceneSpec spec;
  spec.dims = {8, 8, 4};
  spec.voxel_size = 0.4;
  spec.num_classes = 6;
  spec.seed = 2;
  spec.primitives.push_back(SpherePrimitive{{1.6, 1.6, 0.8}, 0.6, 2});

  OverfitResult a = overfit_toy(spec, 40, 1.0);
  REQUIRE(a.losses.size() == 40);
  CHECK(a.losses.back() < a.losses.front());
  CHECK(a.report.miou > 0.5);
  OverfitResult b = overfit_toy(spec, 40, 1.0);
  CHECK(a.losses == b.losses);
  CHECK(a.final_labels.labels == b.final_labels.labels);

  OverfitResult frozen = overfit_toy(spec, 5, 0.0);
  CHECK(frozen.losses.front() == frozen.losses.back());

  CHECK_THROWS_AS(overfit_toy(spec, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(overfit_toy(spec, 5, -1.0), std::invalid_argument);
  CHECK_THROWS_WITH_AS(overfit_toy(spec, 5, 1e308), "overfit diverged at step 1",
                       NumericError);
}
