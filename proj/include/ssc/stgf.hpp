#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ssc/grid.hpp"
#include "ssc/stn.hpp"

namespace ssc {

// Per-voxel attribute rows [alpha*q' | beta*(i,j,k) in [0,1] | gamma*q'_neigh],
// length 2*feature_dim + 3, voxel-major.
struct SpatialAttributes {
  Dims dims;
  int attr_dim = 0;
  double alpha = 1.0, beta = 1.0, gamma = 1.0;
  std::vector<double> data;

  std::size_t count() const { return dims.count(); }
  std::span<const double> row(std::size_t v) const {
    return {data.data() + v * attr_dim, static_cast<std::size_t>(attr_dim)};
  }
  std::span<double> row(std::size_t v) {
    return {data.data() + v * attr_dim, static_cast<std::size_t>(attr_dim)};
  }
};

struct KMeansResult {
  int k = 0;
  std::vector<int> assignments;         // one per point
  Eigen::MatrixXd centroids;            // k x attr_dim
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
  int iterations = 0;
  bool converged = false;
};

struct GcnParams {
  std::vector<Eigen::MatrixXd> weights;  // one per layer

  static GcnParams identity_init(int dim, int layers);
};

struct StgfConfig {
  int k = 0;  // 0 picks max(2, round(N/64))
  double alpha = 1.0, beta = 1.0, gamma = 1.0;
  double sigma = 0.0;  // 0 picks the median pairwise centroid distance
  int gcn_layers = 1;
  std::uint64_t seed = 0;
  // When unset, the LocNet is zero-weight + identity-bias and the GCN weights
  // are identity, so the whole pass is geometry-preserving.
  std::optional<LocNetParams> locnet;
  std::optional<GcnParams> gcn;
};

// Intermediate products of stgf_apply, exposed for debugging and tests.
struct StgfDetail {
  std::vector<AffineTheta> voxel_thetas;
  VoxelGrid warped;  // q' grid
  SpatialAttributes attributes;
  KMeansResult clusters;
  Eigen::MatrixXd connection;                          // W, k x k
  std::vector<AffineTheta> cluster_thetas;             // regularized member means
  std::vector<std::array<double, 3>> node_positions;   // spatial centroids, normalized
  std::vector<std::array<double, 3>> node_positions_out;  // after cluster theta
  Eigen::MatrixXd fused;    // F_C, k x d
  Eigen::MatrixXd aligned;  // F*, k x d
  Eigen::MatrixXd refined;  // F', k x d_out
};

// Channel-wise concatenation, q channels first. depth may have 0 channels.
VoxelGrid stack_depth(const VoxelGrid& q, const VoxelGrid& depth);

// Mean over the in-bounds subset of the 6 face neighbors.
Eigen::VectorXd neighbor_mean(const VoxelGrid& grid, int i, int j, int k);

SpatialAttributes spatial_attributes(const VoxelGrid& warped, double alpha, double beta,
                                     double gamma);

// Seeded k-means++ then Lloyd's iterations (max 100) until no assignment
// changes. Ties go to the lowest cluster index; an emptied cluster steals the
// point farthest from its centroid. Deterministic for a fixed seed.
KMeansResult kmeans_cluster(const SpatialAttributes& attrs, int k, std::uint64_t seed);

// W_mn = exp(-|C_m - C_n|^2 / (2 sigma^2)). sigma <= 0 selects the median
// pairwise distance (1 when all centroids coincide). Entries clamped to
// >= 1e-300 so they stay in (0, 1].
Eigen::MatrixXd connection_matrix(const Eigen::MatrixXd& centroids, double sigma);

// Row m = mean feature of the voxels assigned to cluster m.
Eigen::MatrixXd fuse_cluster_features(const VoxelGrid& warped,
                                      const std::vector<int>& assignments, int k);

// Piecewise cluster-feature field: value at a normalized position is the row
// of `values` for the nearest node position (ties to the lowest index).
Eigen::VectorXd sample_cluster_field(const Eigen::MatrixXd& values,
                                     const std::vector<std::array<double, 3>>& nodes,
                                     const std::array<double, 3>& pos);

struct AlignedFeatures {
  Eigen::MatrixXd features;  // F*, k x d
  std::vector<AffineTheta> cluster_thetas;
  std::vector<std::array<double, 3>> node_positions;
  std::vector<std::array<double, 3>> node_positions_out;
};

// Representative theta per cluster (mean of member parameters, regularized);
// F*_m = cluster field of F_C evaluated at theta_m(node position m).
AlignedFeatures align_cluster_features(const Eigen::MatrixXd& cluster_features,
                                       const std::vector<AffineTheta>& voxel_thetas,
                                       const std::vector<int>& assignments,
                                       const Dims& dims);

// Per layer: F <- act(D^{-1/2} (W+I) D^{-1/2} * F * weight), ReLU on all but
// the last layer.
Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& fstar, const Eigen::MatrixXd& w,
                            const GcnParams& params);

// Each voxel samples the cluster field of F' at theta_m^{-1} of its own
// normalized position, m being its cluster.
VoxelGrid backproject_features(const Eigen::MatrixXd& refined,
                               const std::vector<int>& assignments,
                               const std::vector<AffineTheta>& cluster_thetas,
                               const std::vector<std::array<double, 3>>& node_positions,
                               const Dims& dims);

// Full pass: stack -> locnet/warp -> attributes -> cluster -> connect -> fuse
// -> align -> GCN -> backproject. Errors are re-thrown with the stage name.
VoxelGrid stgf_apply(const VoxelGrid& q, const VoxelGrid& depth, const StgfConfig& config,
                     StgfDetail* detail = nullptr);

// Cluster-graph edges (m < n) whose connection weight reaches the threshold.
std::vector<std::pair<int, int>> connection_edges(const Eigen::MatrixXd& w,
                                                  double threshold);

int default_cluster_count(std::size_t n_voxels);

}  // namespace ssc
