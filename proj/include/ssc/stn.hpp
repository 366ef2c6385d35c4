#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>

#include "ssc/errors.hpp"
#include "ssc/grid.hpp"

namespace ssc {

// Transforms below kDetEpsilon in |det| are rejected as singular.
constexpr double kDetEpsilon = 1e-6;

// Per-voxel affine transform in normalized grid coordinates:
// p_in = linear * p_out + translation.
struct AffineTheta {
  Eigen::Matrix3d linear = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static AffineTheta identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return linear * p + translation; }

  // Row-major [A | t], twelve values.
  std::array<double, 12> params() const;
  static AffineTheta from_params(std::span<const double> p);
};

// Adds the smallest lambda from {0, 1e-3, 1e-2, 1e-1, 1} to the diagonal so
// that |det| reaches kDetEpsilon. Throws SingularTransformError if none works.
AffineTheta regularize_theta(const AffineTheta& theta);

// Single linear map from a voxel feature to the twelve transform parameters.
// The bias defaults to the identity transform so a zero weight is a no-op.
struct LocNetParams {
  Eigen::MatrixXd weight;  // 12 x input_dim
  Eigen::VectorXd bias;    // 12

  static LocNetParams identity_init(int input_dim);
};

// theta = from_params(weight * q + bias), regularized.
AffineTheta locnet_forward(std::span<const double> q, const LocNetParams& params);

// Grid of sampling positions, feature_dim 3 holding (x, y, z) in [-1, 1]
// normalized coordinates: each output voxel center is mapped through theta.
VoxelGrid generate_sampling_grid(const AffineTheta& theta, const Dims& out_dims);

// Trilinear interpolation of `field` at one normalized position, writing
// field.feature_dim values to out. Positions are clamped to the border.
// Exact at voxel centers and for fields affine in the coordinates.
void sample_point(const VoxelGrid& field, const std::array<double, 3>& pos,
                  std::span<double> out);

// Samples the field at every position in `positions` (feature_dim 3).
// Output dims match positions, feature_dim matches the field.
VoxelGrid trilinear_sample(const VoxelGrid& field, const VoxelGrid& positions);

struct TrilinearGrad {
  VoxelGrid field;      // d(loss)/d(field values)
  VoxelGrid positions;  // d(loss)/d(normalized positions)
};

// Vector-Jacobian products for trilinear_sample given upstream = d(loss)/d(output).
TrilinearGrad trilinear_sample_grad(const VoxelGrid& field, const VoxelGrid& positions,
                                    const VoxelGrid& upstream);

// Exact inverse. Throws SingularTransformError when |det| < kDetEpsilon.
AffineTheta invert_theta(const AffineTheta& theta);

// a after b: compose(a, b).apply(p) == a.apply(b.apply(p)).
AffineTheta compose_theta(const AffineTheta& a, const AffineTheta& b);

}  // namespace ssc
