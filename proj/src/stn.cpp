#include "ssc/stn.hpp"

#include <algorithm>
#include <cmath>

namespace ssc {

std::array<double, 12> AffineTheta::params() const {
  std::array<double, 12> p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p[r * 4 + c] = linear(r, c);
    p[r * 4 + 3] = translation(r);
  }
  return p;
}

AffineTheta AffineTheta::from_params(std::span<const double> p) {
  if (p.size() != 12) throw std::invalid_argument("theta needs 12 parameters");
  AffineTheta t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t.linear(r, c) = p[r * 4 + c];
    t.translation(r) = p[r * 4 + 3];
  }
  return t;
}

AffineTheta regularize_theta(const AffineTheta& theta) {
  if (!theta.linear.allFinite() || !theta.translation.allFinite()) {
    throw std::invalid_argument("theta parameters must be finite");
  }
  for (double lambda : {0.0, 1e-3, 1e-2, 1e-1, 1.0}) {
    AffineTheta out = theta;
    out.linear += lambda * Eigen::Matrix3d::Identity();
    if (std::abs(out.linear.determinant()) >= kDetEpsilon) return out;
  }
  throw SingularTransformError("theta could not be regularized to a usable determinant");
}

LocNetParams LocNetParams::identity_init(int input_dim) {
  if (input_dim < 0) throw std::invalid_argument("locnet input_dim must be non-negative");
  LocNetParams p;
  p.weight = Eigen::MatrixXd::Zero(12, input_dim);
  p.bias = Eigen::VectorXd::Zero(12);
  p.bias(0) = p.bias(5) = p.bias(10) = 1.0;  // row-major identity [A | t]
  return p;
}

AffineTheta locnet_forward(std::span<const double> q, const LocNetParams& params) {
  if (params.weight.rows() != 12 || params.bias.size() != 12) {
    throw std::invalid_argument("locnet parameters must map to 12 outputs");
  }
  if (static_cast<Eigen::Index>(q.size()) != params.weight.cols()) {
    throw std::invalid_argument("locnet input size mismatch");
  }
  Eigen::Map<const Eigen::VectorXd> qv(q.data(), static_cast<Eigen::Index>(q.size()));
  Eigen::VectorXd raw = params.weight * qv + params.bias;
  std::array<double, 12> p;
  for (int n = 0; n < 12; ++n) p[n] = raw(n);
  return regularize_theta(AffineTheta::from_params(p));
}

VoxelGrid generate_sampling_grid(const AffineTheta& theta, const Dims& out_dims) {
  VoxelGrid grid(out_dims, 3);
  for (int i = 0; i < out_dims.h; ++i) {
    for (int j = 0; j < out_dims.w; ++j) {
      for (int k = 0; k < out_dims.z; ++k) {
        auto c = voxel_norm_coord(out_dims, i, j, k);
        Eigen::Vector3d p = theta.apply(Eigen::Vector3d(c[0], c[1], c[2]));
        auto f = grid.feature(i, j, k);
        f[0] = p[0];
        f[1] = p[1];
        f[2] = p[2];
      }
    }
  }
  return grid;
}

namespace {

// One axis of the interpolation: base index, fraction, and the derivative of
// the continuous index with respect to the normalized coordinate (0 in the
// clamped region or on single-slice axes).
struct AxisSample {
  int i0 = 0;
  int i1 = 0;
  double frac = 0.0;
  double didx = 0.0;
};

AxisSample axis_sample(double x, int n) {
  AxisSample s;
  if (n == 1) return s;
  bool inside = x >= -1.0 && x <= 1.0;
  double xc = std::clamp(x, -1.0, 1.0);
  double idx = (xc + 1.0) * 0.5 * (n - 1);
  int i0 = static_cast<int>(std::floor(idx));
  double frac = idx - i0;
  if (i0 >= n - 1) {
    i0 = n - 2;
    frac = 1.0;
  }
  if (i0 < 0) {
    i0 = 0;
    frac = 0.0;
  }
  s.i0 = i0;
  s.i1 = i0 + 1;
  s.frac = frac;
  s.didx = inside ? 0.5 * (n - 1) : 0.0;
  return s;
}

void check_positions(const VoxelGrid& positions) {
  if (positions.feature_dim != 3) {
    throw std::invalid_argument("positions grid must have feature_dim 3");
  }
}

}  // namespace

void sample_point(const VoxelGrid& field, const std::array<double, 3>& pos,
                  std::span<double> out) {
  AxisSample sx = axis_sample(pos[0], field.dims.h);
  AxisSample sy = axis_sample(pos[1], field.dims.w);
  AxisSample sz = axis_sample(pos[2], field.dims.z);
  int d = field.feature_dim;
  for (int c = 0; c < d; ++c) out[c] = 0.0;
  for (int a = 0; a < 2; ++a) {
    double wx = a ? sx.frac : 1.0 - sx.frac;
    if (field.dims.h == 1 && a) continue;
    for (int b = 0; b < 2; ++b) {
      double wy = b ? sy.frac : 1.0 - sy.frac;
      if (field.dims.w == 1 && b) continue;
      for (int cz = 0; cz < 2; ++cz) {
        if (field.dims.z == 1 && cz) continue;
        double wz = cz ? sz.frac : 1.0 - sz.frac;
        double wgt = wx * wy * wz;
        if (wgt == 0.0) continue;
        auto f = field.feature(a ? sx.i1 : sx.i0, b ? sy.i1 : sy.i0, cz ? sz.i1 : sz.i0);
        for (int c = 0; c < d; ++c) out[c] += wgt * f[c];
      }
    }
  }
}

VoxelGrid trilinear_sample(const VoxelGrid& field, const VoxelGrid& positions) {
  check_positions(positions);
  VoxelGrid out(positions.dims, field.feature_dim, 0.0, field.voxel_size, field.origin);
  for (int i = 0; i < positions.dims.h; ++i) {
    for (int j = 0; j < positions.dims.w; ++j) {
      for (int k = 0; k < positions.dims.z; ++k) {
        auto p = positions.feature(i, j, k);
        sample_point(field, {p[0], p[1], p[2]}, out.feature(i, j, k));
      }
    }
  }
  return out;
}

TrilinearGrad trilinear_sample_grad(const VoxelGrid& field, const VoxelGrid& positions,
                                    const VoxelGrid& upstream) {
  check_positions(positions);
  if (!(upstream.dims == positions.dims) || upstream.feature_dim != field.feature_dim) {
    throw std::invalid_argument("upstream gradient shape mismatch");
  }
  TrilinearGrad grad{VoxelGrid(field.dims, field.feature_dim),
                     VoxelGrid(positions.dims, 3)};
  int d = field.feature_dim;
  int nx = field.dims.h, ny = field.dims.w, nz = field.dims.z;
  for (int i = 0; i < positions.dims.h; ++i) {
    for (int j = 0; j < positions.dims.w; ++j) {
      for (int k = 0; k < positions.dims.z; ++k) {
        auto p = positions.feature(i, j, k);
        auto up = upstream.feature(i, j, k);
        AxisSample sx = axis_sample(p[0], nx);
        AxisSample sy = axis_sample(p[1], ny);
        AxisSample sz = axis_sample(p[2], nz);
        double gx = 0.0, gy = 0.0, gz = 0.0;
        for (int a = 0; a < 2; ++a) {
          if (nx == 1 && a) continue;
          double wx = a ? sx.frac : 1.0 - sx.frac;
          double dwx = a ? 1.0 : -1.0;
          for (int b = 0; b < 2; ++b) {
            if (ny == 1 && b) continue;
            double wy = b ? sy.frac : 1.0 - sy.frac;
            double dwy = b ? 1.0 : -1.0;
            for (int cz = 0; cz < 2; ++cz) {
              if (nz == 1 && cz) continue;
              double wz = cz ? sz.frac : 1.0 - sz.frac;
              double dwz = cz ? 1.0 : -1.0;
              int ii = a ? sx.i1 : sx.i0;
              int jj = b ? sy.i1 : sy.i0;
              int kk = cz ? sz.i1 : sz.i0;
              auto f = field.feature(ii, jj, kk);
              auto gf = grad.field.feature(ii, jj, kk);
              double wgt = wx * wy * wz;
              for (int c = 0; c < d; ++c) {
                gf[c] += up[c] * wgt;
                gx += up[c] * f[c] * dwx * wy * wz;
                gy += up[c] * f[c] * wx * dwy * wz;
                gz += up[c] * f[c] * wx * wy * dwz;
              }
            }
          }
        }
        auto gp = grad.positions.feature(i, j, k);
        gp[0] = gx * sx.didx;
        gp[1] = gy * sy.didx;
        gp[2] = gz * sz.didx;
      }
    }
  }
  return grad;
}

AffineTheta invert_theta(const AffineTheta& theta) {
  double det = theta.linear.determinant();
  if (std::abs(det) < kDetEpsilon) {
    throw SingularTransformError("cannot invert theta with |det| = " + std::to_string(std::abs(det)));
  }
  AffineTheta inv;
  inv.linear = theta.linear.inverse();
  inv.translation = -(inv.linear * theta.translation);
  return inv;
}

AffineTheta compose_theta(const AffineTheta& a, const AffineTheta& b) {
  AffineTheta out;
  out.linear = a.linear * b.linear;
  out.translation = a.linear * b.translation + a.translation;
  return out;
}

}  // namespace ssc
