#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ssc/grid.hpp"

namespace ssc {

struct LossValue {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  std::optional<VoxelGrid> gradient;  // same dims/channels as the prediction
};

struct SpatialLossValue {
  double value = 0.0;
  // d(loss)/d(G_trans), one 3-vector per node.
  std::vector<std::array<double, 3>> gradient;
};

using PointSet = std::vector<std::array<double, 3>>;

enum class SpatialPairing { edges, consecutive };

struct LossConfig {
  double lambda_ce = 1.0;
  double lambda_aff = 0.5;
  double lambda_geo = 0.1;
  SpatialPairing spatial_pairing = SpatialPairing::edges;
  double w_threshold = 0.1;
};

// Mean over voxels of the stable binary cross-entropy of sigmoid(logit)
// against the 0/1 target. Gradient: (sigmoid(x) - y) / N.
LossValue bce_occupancy(const VoxelGrid& logits, const OccupancyGrid& targets,
                        bool with_grad);

// Mean over edges of | d(G_orig,a,b) - d(G_trans,a,b) |. Gradient is with
// respect to G_trans; ties and zero-length transformed edges contribute a
// zero subgradient.
SpatialLossValue spatial_continuity_loss(const PointSet& g_orig, const PointSet& g_trans,
                                         const std::vector<std::pair<int, int>>& edges,
                                         bool with_grad);

// w_c = 1 / log(1.02 + freq_c) over non-ignore voxels of the labels.
std::vector<double> inverse_log_frequency_weights(const SemanticGrid& labels);

// Mean over non-ignore voxels of w_y * (-log softmax(x)_y), stable log-softmax.
// Gradient: w_y * (softmax(x) - onehot(y)) / count(non-ignore).
LossValue weighted_ce(const VoxelGrid& logits, const SemanticGrid& labels,
                      const std::vector<double>& class_weights, bool with_grad);

// For each class present in the (non-ignore) labels: soft precision, recall,
// and specificity in log form, averaged; degenerate denominators skip their
// term. probs rows must sum to 1 within 1e-4.
LossValue scene_class_affinity(const VoxelGrid& probs, const SemanticGrid& labels,
                               bool with_grad);

// Exact symmetric Hausdorff distance; each set may hold at most 4096 points.
double hausdorff(const PointSet& p, const PointSet& q);

// World-space centers of voxels whose label (argmax channel for grids) is a
// semantic class.
PointSet occupied_centers(const SemanticGrid& labels, double voxel_size,
                          const std::array<double, 3>& origin);
SemanticGrid argmax_labels(const VoxelGrid& logits, int num_classes);

// lambda_ce * weighted_ce + lambda_aff * affinity(softmax(logits)) +
// lambda_geo * hausdorff(pred centers, gt centers). The geometric term is 0
// when either center set is empty (it carries no gradient either way).
// Gradient is with respect to the logits.
LossValue total_stage2_loss(const VoxelGrid& logits, const SemanticGrid& labels,
                            const std::vector<double>& class_weights,
                            const LossConfig& config, bool with_grad);

// Per-voxel softmax across channels.
VoxelGrid softmax_channels(const VoxelGrid& logits);

std::string loss_report_kv(const LossValue& loss);

}  // namespace ssc
