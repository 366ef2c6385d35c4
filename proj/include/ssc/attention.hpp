#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ssc/camera.hpp"
#include "ssc/gav.hpp"
#include "ssc/grid.hpp"

namespace ssc {

// Dense 2D feature map, row-major with v slowest and the channel fastest.
// Sampled bilinearly in normalized [-1,1] coordinates with border clamp,
// align-corners like the voxel sampler.
struct FeatureMap2D {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  FeatureMap2D() = default;
  FeatureMap2D(int width, int height, int channels, double fill = 0.0);

  std::size_t index(int v, int u, int c = 0) const {
    return (static_cast<std::size_t>(v) * width + u) * channels + c;
  }
  double& at(int v, int u, int c = 0) { return data[index(v, u, c)]; }
  double at(int v, int u, int c = 0) const { return data[index(v, u, c)]; }

  // Pixel coordinates mapped to [-1, 1]: u=0 -> -1, u=width-1 -> +1.
  double norm_u(double u) const { return index_to_norm_f(u, width); }
  double norm_v(double v) const { return index_to_norm_f(v, height); }

  static double index_to_norm_f(double idx, int n) {
    return n > 1 ? -1.0 + 2.0 * idx / (n - 1) : 0.0;
  }

  Eigen::VectorXd sample(double x_norm, double y_norm) const;
};

enum class QuerySource { position, content };

struct AttentionParams {
  Eigen::MatrixXd wq;  // d_k x (3*n_points) in position mode, d_k x query_dim otherwise
  Eigen::MatrixXd wk;  // d_k x field_dim
  Eigen::MatrixXd wv;  // d_v x field_dim
  Eigen::MatrixXd wp;  // (3*n_points) x query_dim, shared offset head
  int n_points = 6;
  int d_k = 4;
  QuerySource query_source = QuerySource::position;
};

// Softmax attention over sampled field values:
// Q' from positions (or from f in content mode), K_k/V_k from the field at
// p_k, output = sum_k softmax(Q'.K_k / sqrt(d_k)) V_k. weights_out, when
// given, receives the softmax weights (they sum to 1).
Eigen::VectorXd deformable_attention(const Eigen::VectorXd& f,
                                     const std::vector<std::array<double, 3>>& points,
                                     const VoxelGrid& field, const AttentionParams& params,
                                     std::vector<double>* weights_out = nullptr);

// 2D variant; points carry (x, y) in the map's normalized coordinates and are
// embedded as (x, y, 0) for the position-mode query.
Eigen::VectorXd deformable_attention(const Eigen::VectorXd& f,
                                     const std::vector<std::array<double, 2>>& points,
                                     const FeatureMap2D& field,
                                     const AttentionParams& params,
                                     std::vector<double>* weights_out = nullptr);

struct ImageInput {
  FeatureMap2D features;
  CameraModel camera;
};

struct DcaResult {
  Eigen::VectorXd feature;
  int views_hit = 0;
};

// Deformable cross-attention: project p into every image, attend in the views
// where it lands in front of the camera and inside bounds, and average. With
// no such view the query passes through unchanged.
DcaResult dca(const Eigen::VectorXd& q_p, const Eigen::Vector3d& p_world,
              const std::vector<ImageInput>& images, const AttentionParams& params);

// Resolution-adaptive deformable self-attention. Query points per voxel come
// from adaptive_query_points with the voxel's R value, delta, the default
// stencil, and offsets from the shared offset head. Output per voxel has
// wv.rows() channels. threads > 1 splits voxels into disjoint chunks; output
// is identical for any thread count.
VoxelGrid dsa(const VoxelGrid& field, const ResolutionGrid& resolution,
              const AttentionParams& params, double delta, int threads = 1);

}  // namespace ssc
