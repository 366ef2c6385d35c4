#include "ssc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "ssc/rng.hpp"

namespace ssc {

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const SingularTransformError& e) {
    throw SingularTransformError(std::string(stage) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(stage) + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(stage) + ": " + e.what());
  }
}

void fill_normal(Eigen::MatrixXd& m, Rng& rng, double stddev) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal(0.0, stddev);
  }
}

void fill_normal(Eigen::VectorXd& v, Rng& rng, double stddev) {
  for (Eigen::Index r = 0; r < v.size(); ++r) v(r) = rng.normal(0.0, stddev);
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Runs fn(v) over [0, n) split into contiguous chunks, one thread each.
// Writes must be disjoint per v so results match the sequential order.
void parallel_voxels(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t v = 0; v < n; ++v) fn(v);
    return;
  }
  std::size_t n_threads = std::min<std::size_t>(threads, n);
  std::size_t chunk = (n + n_threads - 1) / n_threads;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    std::size_t begin = t * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end] {
      try {
        for (std::size_t v = begin; v < end; ++v) fn(v);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace

QueryProposalSet stage1_proposals(const VoxelGrid& queries, const OccupancyGrid& m_out) {
  if (!(queries.dims == m_out.dims)) {
    throw std::invalid_argument("stage1_proposals dim mismatch");
  }
  QueryProposalSet out;
  std::size_t count = m_out.occupied_count();
  out.features.resize(count, queries.feature_dim);
  out.indices.reserve(count);
  std::size_t row = 0;
  for (std::size_t v = 0; v < m_out.data.size(); ++v) {
    if (!m_out.data[v]) continue;
    for (int c = 0; c < queries.feature_dim; ++c) {
      out.features(row, c) = queries.data[v * queries.feature_dim + c];
    }
    out.indices.push_back(v);
    ++row;
  }
  return out;
}

PipelineParams make_params(const PipelineConfig& config, int image_channels,
                           ParamInit init) {
  config.validate();
  if (image_channels < 1) throw std::invalid_argument("image_channels must be at least 1");
  int d = config.query_dim;
  int df = d + 1;  // query channels plus the depth channel
  PipelineParams p;
  p.voxel_queries = VoxelGrid(config.low_res_dims(), d, 0.0, config.low_res_voxel_size(),
                              config.origin);

  p.dca_params.n_points = config.attn.n_points;
  p.dca_params.d_k = config.attn.d_k;
  p.dca_params.query_source = config.attn.query_source;
  int dca_q_in = config.attn.query_source == QuerySource::position
                     ? 3 * config.attn.n_points
                     : d;
  p.dca_params.wq = Eigen::MatrixXd::Zero(config.attn.d_k, dca_q_in);
  p.dca_params.wk = Eigen::MatrixXd::Zero(config.attn.d_k, image_channels);
  p.dca_params.wv = Eigen::MatrixXd::Zero(d, image_channels);
  p.dca_params.wp = Eigen::MatrixXd::Zero(3 * config.attn.n_points, d);

  p.occ_head = Eigen::VectorXd::Zero(d);
  p.locnet = LocNetParams::identity_init(df);
  p.gcn = GcnParams::identity_init(df, config.stgf.gcn_layers);

  p.dsa_params.n_points = config.gav.n_points;
  p.dsa_params.d_k = config.attn.d_k;
  p.dsa_params.query_source = config.attn.query_source;
  int dsa_q_in = config.attn.query_source == QuerySource::position
                     ? 3 * config.gav.n_points
                     : df;
  p.dsa_params.wq = Eigen::MatrixXd::Zero(config.attn.d_k, dsa_q_in);
  p.dsa_params.wk = Eigen::MatrixXd::Zero(config.attn.d_k, df);
  p.dsa_params.wv = Eigen::MatrixXd::Zero(df, df);
  p.dsa_params.wp = Eigen::MatrixXd::Zero(3 * config.gav.n_points, df);
  p.class_head = Eigen::MatrixXd::Zero(config.num_classes, df);

  if (init == ParamInit::zero) return p;

  Rng rng(config.seed);
  for (double& v : p.voxel_queries.data) v = rng.normal(0.0, 0.5);
  fill_normal(p.dca_params.wq, rng, 0.3);
  fill_normal(p.dca_params.wk, rng, 0.3);
  fill_normal(p.dca_params.wv, rng, 0.3);
  fill_normal(p.dca_params.wp, rng, 0.05);
  fill_normal(p.occ_head, rng, 0.5);
  fill_normal(p.locnet.weight, rng, 0.05);
  for (auto& w : p.gcn.weights) {
    Eigen::MatrixXd noise = w;
    fill_normal(noise, rng, 0.1);
    w += noise;
  }
  fill_normal(p.dsa_params.wq, rng, 0.3);
  fill_normal(p.dsa_params.wk, rng, 0.3);
  fill_normal(p.dsa_params.wv, rng, 0.3);
  fill_normal(p.dsa_params.wp, rng, 0.05);
  fill_normal(p.class_head, rng, 0.3);
  return p;
}

FeatureMap2D depth_image_features(const DepthImage& depth) {
  FeatureMap2D map(depth.width, depth.height, 3);
  double max_depth = 0.0;
  for (double d : depth.depth) max_depth = std::max(max_depth, d);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      map.at(v, u, 0) = max_depth > 0.0 ? depth.at(v, u) / max_depth : 0.0;
      map.at(v, u, 1) = depth.width > 1 ? double(u) / (depth.width - 1) : 0.0;
      map.at(v, u, 2) = depth.height > 1 ? double(v) / (depth.height - 1) : 0.0;
    }
  }
  return map;
}

VoxelGrid upsample_nearest(const VoxelGrid& grid, int factor) {
  if (factor < 1) throw std::invalid_argument("upsample factor must be at least 1");
  VoxelGrid out(Dims{grid.dims.h * factor, grid.dims.w * factor, grid.dims.z * factor},
                grid.feature_dim, 0.0, grid.voxel_size / factor, grid.origin);
  for (int i = 0; i < out.dims.h; ++i) {
    for (int j = 0; j < out.dims.w; ++j) {
      for (int k = 0; k < out.dims.z; ++k) {
        auto src = grid.feature(i / factor, j / factor, k / factor);
        auto dst = out.feature(i, j, k);
        std::copy(src.begin(), src.end(), dst.begin());
      }
    }
  }
  return out;
}

ForwardResult pipeline_forward(const std::vector<ImageInput>& images,
                               const VoxelGrid& depth_grid, const PipelineConfig& config,
                               const PipelineParams& params) {
  config.validate();
  Dims low = config.low_res_dims();
  if (!(depth_grid.dims == low)) {
    throw std::invalid_argument("stage1: depth grid dims must match the low-res grid");
  }
  if (depth_grid.feature_dim != 1) {
    throw std::invalid_argument("stage1: depth grid must have one channel");
  }

  ForwardResult res;
  res.stage1_logits = VoxelGrid(low, 1, 0.0, config.low_res_voxel_size(), config.origin);
  res.m_out = OccupancyGrid(low);
  VoxelGrid updated(low, config.query_dim, 0.0, config.low_res_voxel_size(), config.origin);

  run_stage("stage1/dca", [&] {
    std::size_t n = low.count();
    parallel_voxels(n, config.threads, [&](std::size_t v) {
      int i = static_cast<int>(v / (static_cast<std::size_t>(low.w) * low.z));
      int rem = static_cast<int>(v % (static_cast<std::size_t>(low.w) * low.z));
      int j = rem / low.z;
      int k = rem % low.z;
      Eigen::VectorXd q(config.query_dim);
      auto src = params.voxel_queries.feature(i, j, k);
      for (int c = 0; c < config.query_dim; ++c) q(c) = src[c];
      auto center = updated.center_world(i, j, k);
      DcaResult r = dca(q, Eigen::Vector3d(center[0], center[1], center[2]), images,
                        params.dca_params);
      auto dst = updated.feature(i, j, k);
      for (int c = 0; c < config.query_dim; ++c) dst[c] = r.feature(c);
      double logit = params.occ_head.dot(r.feature);
      res.stage1_logits.data[v] = logit;
      res.m_out.data[v] = sigmoid(logit) > 0.5 ? 1 : 0;
    });
    return 0;
  });

  res.proposals = run_stage("stage1/proposals",
                            [&] { return stage1_proposals(updated, res.m_out); });

  // Unproposed voxels carry a zero feature into stage 2.
  VoxelGrid masked = updated;
  for (std::size_t v = 0; v < res.m_out.data.size(); ++v) {
    if (res.m_out.data[v]) continue;
    for (int c = 0; c < masked.feature_dim; ++c) masked.data[v * masked.feature_dim + c] = 0.0;
  }

  StgfConfig stgf_cfg = config.stgf;
  stgf_cfg.locnet = params.locnet;
  stgf_cfg.gcn = params.gcn;
  VoxelGrid fused = run_stage("stage2/stgf",
                              [&] { return stgf_apply(masked, depth_grid, stgf_cfg); });

  VoxelGrid features = std::move(fused);
  if (config.stgf_output == StgfOutput::add) {
    run_stage("stage2/stgf", [&] {
      VoxelGrid stacked = stack_depth(masked, depth_grid);
      if (stacked.feature_dim != features.feature_dim) {
        throw std::invalid_argument("add mode needs matching stack and fusion dims");
      }
      for (std::size_t n = 0; n < features.data.size(); ++n) {
        features.data[n] += stacked.data[n];
      }
      return 0;
    });
  }

  ResolutionGrid resolution = run_stage("stage2/gav", [&] {
    VoxelGrid prob(low, 1, 0.0, config.low_res_voxel_size(), config.origin);
    for (std::size_t v = 0; v < prob.data.size(); ++v) {
      double source = config.gav_source == GavSource::stage1
                          ? res.stage1_logits.data[v]
                          : features.data[v * features.feature_dim];
      prob.data[v] = sigmoid(source);
    }
    ComplexityGrid complexity = edge_crossing_count(prob, config.gav.iso);
    return resolution_map(complexity, config.gav.c0, config.gav.s);
  });

  VoxelGrid refined = run_stage("stage2/dsa", [&] {
    double delta = delta_to_normalized(config.gav.delta, low);
    return dsa(features, resolution, params.dsa_params, delta, config.threads);
  });

  VoxelGrid lowres_logits(low, config.num_classes, 0.0, config.low_res_voxel_size(),
                          config.origin);
  run_stage("stage2/head", [&] {
    if (params.class_head.cols() != refined.feature_dim) {
      throw std::invalid_argument("class head input dim mismatch");
    }
    std::size_t n = low.count();
    Eigen::VectorXd f(refined.feature_dim);
    for (std::size_t v = 0; v < n; ++v) {
      for (int c = 0; c < refined.feature_dim; ++c) f(c) = refined.data[v * refined.feature_dim + c];
      Eigen::VectorXd logits = params.class_head * f;
      for (int c = 0; c < config.num_classes; ++c) {
        lowres_logits.data[v * config.num_classes + c] = logits(c);
      }
    }
    return 0;
  });

  res.stage2_logits = run_stage("stage2/upsample",
                                [&] { return upsample_nearest(lowres_logits, config.upsample); });
  if (!res.stage2_logits.all_finite()) {
    throw NumericError("stage2: non-finite logits");
  }
  return res;
}

OverfitResult overfit_toy(const SceneSpec& spec, int steps, double step_size,
                          const LossConfig& loss_config) {
  if (steps < 1) throw std::invalid_argument("overfit_toy needs at least one step");
  if (!(step_size >= 0.0)) throw std::invalid_argument("step_size must be non-negative");
  SceneResult scene = generate_scene(spec);
  const SemanticGrid& labels = scene.labels;
  std::vector<double> weights = inverse_log_frequency_weights(labels);

  std::size_t evaluable = 0;
  for (std::uint8_t y : labels.labels) {
    if (y != SemanticGrid::kIgnore) ++evaluable;
  }
  if (evaluable == 0) throw std::invalid_argument("scene has no evaluable voxels");
  // Losses are means over voxels; scaling the step by the voxel count makes
  // per-voxel updates independent of grid size.
  double scale = step_size * static_cast<double>(evaluable);

  VoxelGrid logits(spec.dims, spec.num_classes, 0.0, spec.voxel_size, spec.origin);
  Rng rng(spec.seed);
  for (double& v : logits.data) v = rng.normal(0.0, 0.01);

  OverfitResult out;
  out.losses.reserve(steps);
  for (int step = 0; step < steps; ++step) {
    LossValue lv = total_stage2_loss(logits, labels, weights, loss_config, true);
    if (!std::isfinite(lv.value)) {
      throw NumericError("overfit diverged at step " + std::to_string(step));
    }
    out.losses.push_back(lv.value);
    for (std::size_t n = 0; n < logits.data.size(); ++n) {
      logits.data[n] -= scale * lv.gradient->data[n];
    }
  }
  out.final_labels = argmax_labels(logits, spec.num_classes);
  out.report = semantic_miou(out.final_labels, labels);
  return out;
}

}  // namespace ssc
