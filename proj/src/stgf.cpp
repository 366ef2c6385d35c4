#include "ssc/stgf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssc/rng.hpp"

namespace ssc {

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const SingularTransformError& e) {
    throw SingularTransformError(std::string("stgf/") + stage + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("stgf/") + stage + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("stgf/") + stage + ": " + e.what());
  }
}

double sq_dist(std::span<const double> a, const Eigen::MatrixXd& centroids, int m) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    double d = a[c] - centroids(m, static_cast<Eigen::Index>(c));
    s += d * d;
  }
  return s;
}

}  // namespace

int default_cluster_count(std::size_t n_voxels) {
  int k = static_cast<int>(std::llround(static_cast<double>(n_voxels) / 64.0));
  k = std::max(2, k);
  return std::min<int>(k, static_cast<int>(n_voxels));
}

GcnParams GcnParams::identity_init(int dim, int layers) {
  if (dim < 1 || layers < 1) throw std::invalid_argument("gcn needs dim, layers >= 1");
  GcnParams p;
  p.weights.assign(layers, Eigen::MatrixXd::Identity(dim, dim));
  return p;
}

VoxelGrid stack_depth(const VoxelGrid& q, const VoxelGrid& depth) {
  if (!(q.dims == depth.dims)) {
    throw std::invalid_argument("stack_depth needs equal spatial dims");
  }
  VoxelGrid out(q.dims, q.feature_dim + depth.feature_dim, 0.0, q.voxel_size, q.origin);
  for (int i = 0; i < q.dims.h; ++i) {
    for (int j = 0; j < q.dims.w; ++j) {
      for (int k = 0; k < q.dims.z; ++k) {
        auto dst = out.feature(i, j, k);
        auto a = q.feature(i, j, k);
        auto b = depth.feature(i, j, k);
        std::copy(a.begin(), a.end(), dst.begin());
        std::copy(b.begin(), b.end(), dst.begin() + q.feature_dim);
      }
    }
  }
  return out;
}

Eigen::VectorXd neighbor_mean(const VoxelGrid& grid, int i, int j, int k) {
  if (i < 0 || i >= grid.dims.h || j < 0 || j >= grid.dims.w || k < 0 || k >= grid.dims.z) {
    throw std::invalid_argument("neighbor_mean index out of bounds");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(grid.feature_dim);
  int count = 0;
  const int offs[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  for (const auto& o : offs) {
    int ni = i + o[0], nj = j + o[1], nk = k + o[2];
    if (ni < 0 || ni >= grid.dims.h || nj < 0 || nj >= grid.dims.w || nk < 0 ||
        nk >= grid.dims.z) {
      continue;
    }
    auto f = grid.feature(ni, nj, nk);
    for (int c = 0; c < grid.feature_dim; ++c) sum(c) += f[c];
    ++count;
  }
  if (count > 0) sum /= count;
  return sum;
}

SpatialAttributes spatial_attributes(const VoxelGrid& warped, double alpha, double beta,
                                     double gamma) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    throw std::invalid_argument("attribute weights must be non-negative and finite");
  }
  SpatialAttributes attrs;
  attrs.dims = warped.dims;
  attrs.attr_dim = 2 * warped.feature_dim + 3;
  attrs.alpha = alpha;
  attrs.beta = beta;
  attrs.gamma = gamma;
  attrs.data.assign(attrs.count() * attrs.attr_dim, 0.0);
  int d = warped.feature_dim;
  for (int i = 0; i < warped.dims.h; ++i) {
    for (int j = 0; j < warped.dims.w; ++j) {
      for (int k = 0; k < warped.dims.z; ++k) {
        auto row = attrs.row(warped.voxel_index(i, j, k));
        auto f = warped.feature(i, j, k);
        for (int c = 0; c < d; ++c) row[c] = alpha * f[c];
        row[d + 0] = beta * (warped.dims.h > 1 ? double(i) / (warped.dims.h - 1) : 0.0);
        row[d + 1] = beta * (warped.dims.w > 1 ? double(j) / (warped.dims.w - 1) : 0.0);
        row[d + 2] = beta * (warped.dims.z > 1 ? double(k) / (warped.dims.z - 1) : 0.0);
        Eigen::VectorXd nm = neighbor_mean(warped, i, j, k);
        for (int c = 0; c < d; ++c) row[d + 3 + c] = gamma * nm(c);
      }
    }
  }
  return attrs;
}

KMeansResult kmeans_cluster(const SpatialAttributes& attrs, int k, std::uint64_t seed) {
  std::size_t n = attrs.count();
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (static_cast<std::size_t>(k) > n) {
    throw std::invalid_argument("k exceeds the number of points");
  }
  int dim = attrs.attr_dim;
  KMeansResult res;
  res.k = k;
  res.centroids.resize(k, dim);

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  chosen.push_back(rng.below(n));
  for (int m = 1; m < k; ++m) {
    std::size_t last = chosen.back();
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double dd = 0.0;
      auto row = attrs.row(p);
      auto cr = attrs.row(last);
      for (int c = 0; c < dim; ++c) {
        double diff = row[c] - cr[c];
        dd += diff * diff;
      }
      d2[p] = std::min(d2[p], dd);
      total += d2[p];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double cum = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        cum += d2[p];
        if (cum > r) {
          pick = p;
          break;
        }
      }
      if (pick == n) pick = n - 1;
    } else {
      // All remaining mass is zero (duplicate points); take the lowest index
      // not yet chosen so clusters stay distinct.
      for (std::size_t p = 0; p < n; ++p) {
        if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) {
          pick = p;
          break;
        }
      }
    }
    chosen.push_back(pick);
  }
  for (int m = 0; m < k; ++m) {
    auto row = attrs.row(chosen[m]);
    for (int c = 0; c < dim; ++c) res.centroids(m, c) = row[c];
  }

  res.assignments.assign(n, -1);
  std::vector<int> sizes(k, 0);
  std::vector<double> best(n, 0.0);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> next(n, 0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      int arg = 0;
      double bd = sq_dist(attrs.row(p), res.centroids, 0);
      for (int m = 1; m < k; ++m) {
        double dd = sq_dist(attrs.row(p), res.centroids, m);
        if (dd < bd) {
          bd = dd;
          arg = m;
        }
      }
      next[p] = arg;
      best[p] = bd;
      ++sizes[arg];
    }
    // Repair empty clusters with the farthest point of any multi-member cluster.
    for (int m = 0; m < k; ++m) {
      if (sizes[m] > 0) continue;
      std::size_t far = n;
      for (std::size_t p = 0; p < n; ++p) {
        if (sizes[next[p]] < 2) continue;
        if (far == n || best[p] > best[far]) far = p;
      }
      if (far == n) throw std::runtime_error("cluster repair found no donor point");
      --sizes[next[far]];
      next[far] = m;
      sizes[m] = 1;
      best[far] = 0.0;
      for (int c = 0; c < dim; ++c) res.centroids(m, c) = attrs.row(far)[c];
    }
    bool changed = (next != res.assignments);
    res.assignments = next;
    res.centroids.setZero();
    for (std::size_t p = 0; p < n; ++p) {
      auto row = attrs.row(p);
      for (int c = 0; c < dim; ++c) res.centroids(res.assignments[p], c) += row[c];
    }
    for (int m = 0; m < k; ++m) res.centroids.row(m) /= sizes[m];
    double inertia = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      inertia += sq_dist(attrs.row(p), res.centroids, res.assignments[p]);
    }
    res.inertia_history.push_back(inertia);
    res.iterations = iter + 1;
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Eigen::MatrixXd connection_matrix(const Eigen::MatrixXd& centroids, double sigma) {
  if (!centroids.allFinite()) {
    throw std::invalid_argument("connection_matrix needs finite centroids");
  }
  Eigen::Index k = centroids.rows();
  if (k < 1) throw std::invalid_argument("connection_matrix needs at least one centroid");
  if (sigma <= 0.0) {
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(k) * (k - 1) / 2);
    for (Eigen::Index m = 0; m < k; ++m) {
      for (Eigen::Index n = m + 1; n < k; ++n) {
        dists.push_back((centroids.row(m) - centroids.row(n)).norm());
      }
    }
    if (dists.empty()) {
      sigma = 1.0;
    } else {
      std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
      sigma = dists[dists.size() / 2];
      if (!(sigma > 0.0)) sigma = 1.0;
    }
  }
  Eigen::MatrixXd w(k, k);
  for (Eigen::Index m = 0; m < k; ++m) {
    w(m, m) = 1.0;
    for (Eigen::Index n = m + 1; n < k; ++n) {
      double d2v = (centroids.row(m) - centroids.row(n)).squaredNorm();
      double v = std::exp(-d2v / (2.0 * sigma * sigma));
      v = std::max(v, 1e-300);  // keep entries in (0, 1] under extreme sigma
      w(m, n) = v;
      w(n, m) = v;
    }
  }
  return w;
}

Eigen::MatrixXd fuse_cluster_features(const VoxelGrid& warped,
                                      const std::vector<int>& assignments, int k) {
  if (assignments.size() != warped.voxel_count()) {
    throw std::invalid_argument("assignment count mismatch");
  }
  Eigen::MatrixXd fused = Eigen::MatrixXd::Zero(k, warped.feature_dim);
  std::vector<int> sizes(k, 0);
  for (std::size_t v = 0; v < assignments.size(); ++v) {
    int m = assignments[v];
    if (m < 0 || m >= k) throw std::invalid_argument("assignment out of range");
    for (int c = 0; c < warped.feature_dim; ++c) fused(m, c) += warped.data[v * warped.feature_dim + c];
    ++sizes[m];
  }
  for (int m = 0; m < k; ++m) {
    if (sizes[m] == 0) throw std::runtime_error("empty cluster in fuse_cluster_features");
    fused.row(m) /= sizes[m];
  }
  return fused;
}

Eigen::VectorXd sample_cluster_field(const Eigen::MatrixXd& values,
                                     const std::vector<std::array<double, 3>>& nodes,
                                     const std::array<double, 3>& pos) {
  if (nodes.empty() || values.rows() != static_cast<Eigen::Index>(nodes.size())) {
    throw std::invalid_argument("cluster field needs one value row per node");
  }
  int arg = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    double dx = pos[0] - nodes[m][0];
    double dy = pos[1] - nodes[m][1];
    double dz = pos[2] - nodes[m][2];
    double dd = dx * dx + dy * dy + dz * dz;
    if (dd < bd) {
      bd = dd;
      arg = static_cast<int>(m);
    }
  }
  return values.row(arg);
}

AlignedFeatures align_cluster_features(const Eigen::MatrixXd& cluster_features,
                                       const std::vector<AffineTheta>& voxel_thetas,
                                       const std::vector<int>& assignments,
                                       const Dims& dims) {
  std::size_t n = dims.count();
  if (voxel_thetas.size() != n || assignments.size() != n) {
    throw std::invalid_argument("align needs one theta and assignment per voxel");
  }
  int k = static_cast<int>(cluster_features.rows());
  AlignedFeatures out;
  out.node_positions.assign(k, {0.0, 0.0, 0.0});
  std::vector<std::array<double, 12>> param_sums(k, std::array<double, 12>{});
  std::vector<int> sizes(k, 0);
  std::size_t v = 0;
  for (int i = 0; i < dims.h; ++i) {
    for (int j = 0; j < dims.w; ++j) {
      for (int kk = 0; kk < dims.z; ++kk, ++v) {
        int m = assignments[v];
        if (m < 0 || m >= k) throw std::invalid_argument("assignment out of range");
        auto p = voxel_thetas[v].params();
        for (int c = 0; c < 12; ++c) param_sums[m][c] += p[c];
        auto nc = voxel_norm_coord(dims, i, j, kk);
        for (int a = 0; a < 3; ++a) out.node_positions[m][a] += nc[a];
        ++sizes[m];
      }
    }
  }
  out.cluster_thetas.reserve(k);
  out.node_positions_out.resize(k);
  out.features.resize(k, cluster_features.cols());
  for (int m = 0; m < k; ++m) {
    if (sizes[m] == 0) throw std::runtime_error("empty cluster in align_cluster_features");
    for (int c = 0; c < 12; ++c) param_sums[m][c] /= sizes[m];
    for (int a = 0; a < 3; ++a) out.node_positions[m][a] /= sizes[m];
    out.cluster_thetas.push_back(regularize_theta(AffineTheta::from_params(param_sums[m])));
  }
  for (int m = 0; m < k; ++m) {
    Eigen::Vector3d p = out.cluster_thetas[m].apply(Eigen::Vector3d(
        out.node_positions[m][0], out.node_positions[m][1], out.node_positions[m][2]));
    out.node_positions_out[m] = {p[0], p[1], p[2]};
    out.features.row(m) =
        sample_cluster_field(cluster_features, out.node_positions, out.node_positions_out[m]);
  }
  return out;
}

Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& fstar, const Eigen::MatrixXd& w,
                            const GcnParams& params) {
  Eigen::Index k = fstar.rows();
  if (w.rows() != k || w.cols() != k) {
    throw std::invalid_argument("connection matrix must be k x k");
  }
  if (params.weights.empty()) throw std::invalid_argument("gcn needs at least one layer");
  Eigen::MatrixXd a = w + Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::VectorXd dinv = deg.array().rsqrt();
  Eigen::MatrixXd ahat = dinv.asDiagonal() * a * dinv.asDiagonal();
  Eigen::MatrixXd f = fstar;
  for (std::size_t layer = 0; layer < params.weights.size(); ++layer) {
    const Eigen::MatrixXd& wt = params.weights[layer];
    if (wt.rows() != f.cols()) {
      throw std::invalid_argument("gcn layer " + std::to_string(layer) + " dim mismatch");
    }
    f = ahat * f * wt;
    if (layer + 1 < params.weights.size()) f = f.cwiseMax(0.0);
  }
  return f;
}

VoxelGrid backproject_features(const Eigen::MatrixXd& refined,
                               const std::vector<int>& assignments,
                               const std::vector<AffineTheta>& cluster_thetas,
                               const std::vector<std::array<double, 3>>& node_positions,
                               const Dims& dims) {
  if (assignments.size() != dims.count()) {
    throw std::invalid_argument("assignment count mismatch");
  }
  if (cluster_thetas.size() != node_positions.size() ||
      static_cast<Eigen::Index>(cluster_thetas.size()) != refined.rows()) {
    throw std::invalid_argument("cluster data size mismatch");
  }
  std::vector<AffineTheta> inverses;
  inverses.reserve(cluster_thetas.size());
  for (const AffineTheta& t : cluster_thetas) inverses.push_back(invert_theta(t));
  VoxelGrid out(dims, static_cast<int>(refined.cols()));
  std::size_t v = 0;
  for (int i = 0; i < dims.h; ++i) {
    for (int j = 0; j < dims.w; ++j) {
      for (int kk = 0; kk < dims.z; ++kk, ++v) {
        int m = assignments[v];
        auto nc = voxel_norm_coord(dims, i, j, kk);
        Eigen::Vector3d p = inverses[m].apply(Eigen::Vector3d(nc[0], nc[1], nc[2]));
        Eigen::VectorXd f = sample_cluster_field(refined, node_positions, {p[0], p[1], p[2]});
        auto dst = out.feature(i, j, kk);
        for (Eigen::Index c = 0; c < f.size(); ++c) dst[c] = f(c);
      }
    }
  }
  return out;
}

VoxelGrid stgf_apply(const VoxelGrid& q, const VoxelGrid& depth, const StgfConfig& config,
                     StgfDetail* detail) {
  StgfDetail local;
  StgfDetail& d = detail ? *detail : local;

  VoxelGrid stacked = run_stage("stack", [&] { return stack_depth(q, depth); });
  std::size_t n = stacked.voxel_count();

  LocNetParams locnet =
      config.locnet ? *config.locnet : LocNetParams::identity_init(stacked.feature_dim);

  run_stage("warp", [&] {
    d.voxel_thetas.reserve(n);
    d.warped = VoxelGrid(stacked.dims, stacked.feature_dim, 0.0, stacked.voxel_size,
                         stacked.origin);
    std::size_t v = 0;
    for (int i = 0; i < stacked.dims.h; ++i) {
      for (int j = 0; j < stacked.dims.w; ++j) {
        for (int k = 0; k < stacked.dims.z; ++k, ++v) {
          AffineTheta theta = locnet_forward(stacked.feature(i, j, k), locnet);
          auto nc = voxel_norm_coord(stacked.dims, i, j, k);
          Eigen::Vector3d p = theta.apply(Eigen::Vector3d(nc[0], nc[1], nc[2]));
          sample_point(stacked, {p[0], p[1], p[2]}, d.warped.feature(i, j, k));
          d.voxel_thetas.push_back(theta);
        }
      }
    }
    return 0;
  });

  run_stage("attributes", [&] {
    d.attributes = spatial_attributes(d.warped, config.alpha, config.beta, config.gamma);
    return 0;
  });

  int k = config.k > 0 ? config.k : default_cluster_count(n);
  run_stage("cluster", [&] {
    d.clusters = kmeans_cluster(d.attributes, k, config.seed);
    return 0;
  });

  run_stage("connect", [&] {
    d.connection = connection_matrix(d.clusters.centroids, config.sigma);
    return 0;
  });

  run_stage("fuse", [&] {
    d.fused = fuse_cluster_features(d.warped, d.clusters.assignments, k);
    return 0;
  });

  run_stage("align", [&] {
    AlignedFeatures aligned = align_cluster_features(d.fused, d.voxel_thetas,
                                                     d.clusters.assignments, stacked.dims);
    d.aligned = aligned.features;
    d.cluster_thetas = aligned.cluster_thetas;
    d.node_positions = aligned.node_positions;
    d.node_positions_out = aligned.node_positions_out;
    return 0;
  });

  GcnParams gcn = config.gcn ? *config.gcn
                             : GcnParams::identity_init(stacked.feature_dim,
                                                        std::max(1, config.gcn_layers));
  run_stage("gcn", [&] {
    d.refined = gcn_forward(d.aligned, d.connection, gcn);
    return 0;
  });

  VoxelGrid out = run_stage("backproject", [&] {
    return backproject_features(d.refined, d.clusters.assignments, d.cluster_thetas,
                                d.node_positions, stacked.dims);
  });
  out.voxel_size = stacked.voxel_size;
  out.origin = stacked.origin;
  if (!out.all_finite()) throw NumericError("stgf produced non-finite features");
  return out;
}

std::vector<std::pair<int, int>> connection_edges(const Eigen::MatrixXd& w,
                                                  double threshold) {
  std::vector<std::pair<int, int>> edges;
  for (Eigen::Index m = 0; m < w.rows(); ++m) {
    for (Eigen::Index n = m + 1; n < w.cols(); ++n) {
      if (w(m, n) >= threshold) edges.emplace_back(static_cast<int>(m), static_cast<int>(n));
    }
  }
  return edges;
}

}  // namespace ssc
