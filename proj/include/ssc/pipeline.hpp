#pragma once

#include <string>
#include <vector>

#include "ssc/attention.hpp"
#include "ssc/config.hpp"
#include "ssc/metrics.hpp"
#include "ssc/scene.hpp"

namespace ssc {

struct QueryProposalSet {
  Eigen::MatrixXd features;          // N_p x d, lexicographic voxel order
  std::vector<std::size_t> indices;  // flat voxel indices into the low-res grid
};

// Gathers query features where the mask is 1, preserving index order.
QueryProposalSet stage1_proposals(const VoxelGrid& queries, const OccupancyGrid& m_out);

enum class ParamInit { seeded, zero };

// Every learnable tensor of the two-stage pipeline. Drawn from the config
// seed; `zero` keeps all maps zero (LocNet bias stays the identity transform).
struct PipelineParams {
  VoxelGrid voxel_queries;     // low-res grid, query_dim channels
  AttentionParams dca_params;  // 2D attention against image features
  Eigen::VectorXd occ_head;    // query_dim -> occupancy logit
  LocNetParams locnet;
  GcnParams gcn;
  AttentionParams dsa_params;  // 3D attention over the refined grid
  Eigen::MatrixXd class_head;  // num_classes x dsa value dim
};

PipelineParams make_params(const PipelineConfig& config, int image_channels,
                           ParamInit init);

struct ForwardResult {
  VoxelGrid stage1_logits;  // low-res, 1 channel
  OccupancyGrid m_out;
  QueryProposalSet proposals;
  VoxelGrid stage2_logits;  // output dims, num_classes channels
};

// Two-stage pass: voxel queries are refined by cross-attention against the
// images, thresholded into proposals, pushed through the graph-fusion stack
// together with the depth grid, refined by resolution-adaptive self-attention
// and mapped to per-class logits at output resolution.
ForwardResult pipeline_forward(const std::vector<ImageInput>& images,
                               const VoxelGrid& depth_grid, const PipelineConfig& config,
                               const PipelineParams& params);

// Depth image for the scene camera turned into per-channel features
// (depth / max_depth, u and v in [0,1]).
FeatureMap2D depth_image_features(const DepthImage& depth);

VoxelGrid upsample_nearest(const VoxelGrid& grid, int factor);

struct GradcheckReport {
  std::string subject;
  int trials = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

extern const std::vector<std::string> kGradcheckSubjects;

// Compares analytic gradients against central finite differences (step 1e-5)
// over seeded random instances; pass iff max relative error <= 1e-4.
GradcheckReport gradcheck(const std::string& subject, int trials, std::uint64_t seed);
std::vector<GradcheckReport> gradcheck_all(int trials, std::uint64_t seed);

struct OverfitResult {
  std::vector<double> losses;  // one entry per step
  EvalReport report;           // final argmax grid against the scene labels
  SemanticGrid final_labels;
};

// Optimizes a free logit grid directly against the generated scene with
// total_stage2_loss. The descent step is scaled by the evaluable voxel count
// so step_size is resolution-independent. Throws NumericError (naming the
// step) if the loss stops being finite.
OverfitResult overfit_toy(const SceneSpec& spec, int steps, double step_size,
                          const LossConfig& loss_config = {});

}  // namespace ssc
