#include "ssc/attention.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ssc/stn.hpp"

namespace ssc {

FeatureMap2D::FeatureMap2D(int width_, int height_, int channels_, double fill)
    : width(width_), height(height_), channels(channels_) {
  if (width < 1 || height < 1 || channels < 1) {
    throw std::invalid_argument("feature map dims must be at least 1");
  }
  data.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

namespace {

struct Axis2D {
  int i0 = 0, i1 = 0;
  double frac = 0.0;
};

Axis2D axis2d(double x, int n) {
  Axis2D s;
  if (n == 1) return s;
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
  return s;
}

// Shared core: given Q' and per-point sampled values, apply Wk/Wv and the
// softmax-weighted sum.
Eigen::VectorXd attend(const Eigen::VectorXd& qprime,
                       const std::vector<Eigen::VectorXd>& samples,
                       const AttentionParams& params, std::vector<double>* weights_out) {
  if (params.d_k < 1) throw std::invalid_argument("d_k must be at least 1");
  if (params.wq.rows() != params.d_k || params.wk.rows() != params.d_k) {
    throw std::invalid_argument("wq/wk must produce d_k rows");
  }
  std::size_t n = samples.size();
  std::vector<double> scores(n);
  double scale = 1.0 / std::sqrt(static_cast<double>(params.d_k));
  double max_score = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> values(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (params.wk.cols() != samples[k].size() || params.wv.cols() != samples[k].size()) {
      throw std::invalid_argument("wk/wv input dim mismatch with field features");
    }
    Eigen::VectorXd key = params.wk * samples[k];
    values[k] = params.wv * samples[k];
    scores[k] = qprime.dot(key) * scale;
    max_score = std::max(max_score, scores[k]);
  }
  double denom = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    scores[k] = std::exp(scores[k] - max_score);
    denom += scores[k];
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(params.wv.rows());
  if (weights_out) weights_out->resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double w = scores[k] / denom;
    if (weights_out) (*weights_out)[k] = w;
    out += w * values[k];
  }
  return out;
}

Eigen::VectorXd position_query(const std::vector<std::array<double, 3>>& embedded,
                               const AttentionParams& params) {
  Eigen::VectorXd flat(3 * static_cast<Eigen::Index>(embedded.size()));
  for (std::size_t k = 0; k < embedded.size(); ++k) {
    flat(3 * k) = embedded[k][0];
    flat(3 * k + 1) = embedded[k][1];
    flat(3 * k + 2) = embedded[k][2];
  }
  if (params.wq.cols() != flat.size()) {
    throw std::invalid_argument("wq expects 3*n_points inputs in position mode");
  }
  return params.wq * flat;
}

Eigen::VectorXd content_query(const Eigen::VectorXd& f, const AttentionParams& params) {
  if (params.wq.cols() != f.size()) {
    throw std::invalid_argument("wq input dim mismatch with query feature");
  }
  return params.wq * f;
}

}  // namespace

Eigen::VectorXd FeatureMap2D::sample(double x_norm, double y_norm) const {
  Axis2D sx = axis2d(x_norm, width);
  Axis2D sy = axis2d(y_norm, height);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(channels);
  for (int b = 0; b < 2; ++b) {
    if (height == 1 && b) continue;
    double wy = b ? sy.frac : 1.0 - sy.frac;
    for (int a = 0; a < 2; ++a) {
      if (width == 1 && a) continue;
      double wx = a ? sx.frac : 1.0 - sx.frac;
      double wgt = wx * wy;
      if (wgt == 0.0) continue;
      for (int c = 0; c < channels; ++c) {
        out(c) += wgt * at(b ? sy.i1 : sy.i0, a ? sx.i1 : sx.i0, c);
      }
    }
  }
  return out;
}

Eigen::VectorXd deformable_attention(const Eigen::VectorXd& f,
                                     const std::vector<std::array<double, 3>>& points,
                                     const VoxelGrid& field, const AttentionParams& params,
                                     std::vector<double>* weights_out) {
  if (points.empty()) throw std::invalid_argument("attention needs at least one point");
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(points.size());
  for (const auto& p : points) {
    Eigen::VectorXd s(field.feature_dim);
    sample_point(field, p, {s.data(), static_cast<std::size_t>(field.feature_dim)});
    samples.push_back(std::move(s));
  }
  Eigen::VectorXd qprime = params.query_source == QuerySource::position
                               ? position_query(points, params)
                               : content_query(f, params);
  return attend(qprime, samples, params, weights_out);
}

Eigen::VectorXd deformable_attention(const Eigen::VectorXd& f,
                                     const std::vector<std::array<double, 2>>& points,
                                     const FeatureMap2D& field,
                                     const AttentionParams& params,
                                     std::vector<double>* weights_out) {
  if (points.empty()) throw std::invalid_argument("attention needs at least one point");
  std::vector<Eigen::VectorXd> samples;
  std::vector<std::array<double, 3>> embedded;
  samples.reserve(points.size());
  embedded.reserve(points.size());
  for (const auto& p : points) {
    samples.push_back(field.sample(p[0], p[1]));
    embedded.push_back({p[0], p[1], 0.0});
  }
  Eigen::VectorXd qprime = params.query_source == QuerySource::position
                               ? position_query(embedded, params)
                               : content_query(f, params);
  return attend(qprime, samples, params, weights_out);
}

DcaResult dca(const Eigen::VectorXd& q_p, const Eigen::Vector3d& p_world,
              const std::vector<ImageInput>& images, const AttentionParams& params) {
  if (images.empty()) throw std::invalid_argument("dca needs at least one image");
  std::vector<std::array<double, 3>> offsets = offset_head(q_p, params.wp);
  DcaResult res;
  res.feature = Eigen::VectorXd::Zero(params.wv.rows());
  for (const ImageInput& img : images) {
    auto proj = try_project(p_world, img.camera);
    if (!proj || !proj->in_bounds(img.camera)) continue;
    double xn = img.features.norm_u(proj->u);
    double yn = img.features.norm_v(proj->v);
    std::vector<std::array<double, 2>> points(offsets.size());
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      points[k] = {xn + offsets[k][0], yn + offsets[k][1]};
    }
    res.feature += deformable_attention(q_p, points, img.features, params);
    ++res.views_hit;
  }
  if (res.views_hit == 0) {
    res.feature = q_p;
    return res;
  }
  res.feature /= res.views_hit;
  return res;
}

VoxelGrid dsa(const VoxelGrid& field, const ResolutionGrid& resolution,
              const AttentionParams& params, double delta, int threads) {
  if (!(field.dims == resolution.dims)) {
    throw std::invalid_argument("dsa needs matching field and resolution dims");
  }
  if (params.n_points < 1) throw std::invalid_argument("n_points must be at least 1");
  auto stencil = default_stencil(params.n_points);
  VoxelGrid out(field.dims, static_cast<int>(params.wv.rows()), 0.0, field.voxel_size,
                field.origin);

  auto worker = [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd f(field.feature_dim);
    for (std::size_t v = begin; v < end; ++v) {
      int i = static_cast<int>(v / (static_cast<std::size_t>(field.dims.w) * field.dims.z));
      int rem = static_cast<int>(v % (static_cast<std::size_t>(field.dims.w) * field.dims.z));
      int j = rem / field.dims.z;
      int k = rem % field.dims.z;
      auto feat = field.feature(i, j, k);
      for (int c = 0; c < field.feature_dim; ++c) f(c) = feat[c];
      auto offsets = offset_head(f, params.wp);
      if (offsets.size() != stencil.size()) {
        throw std::invalid_argument("offset head n_points mismatch");
      }
      auto points = adaptive_query_points(voxel_norm_coord(field.dims, i, j, k),
                                          resolution.at(i, j, k), delta, offsets, stencil);
      Eigen::VectorXd o = deformable_attention(f, points, field, params);
      auto dst = out.feature(i, j, k);
      for (Eigen::Index c = 0; c < o.size(); ++c) dst[c] = o(c);
    }
  };

  std::size_t n = field.voxel_count();
  if (threads <= 1 || n < 2) {
    worker(0, n);
    return out;
  }
  std::size_t n_threads = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  std::size_t chunk = (n + n_threads - 1) / n_threads;
  std::vector<std::exception_ptr> errors(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    std::size_t begin = t * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end] {
      try {
        worker(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return out;
}

}  // namespace ssc
