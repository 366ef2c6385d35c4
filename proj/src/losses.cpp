#include "ssc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ssc {

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

LossValue bce_occupancy(const VoxelGrid& logits, const OccupancyGrid& targets,
                        bool with_grad) {
  if (!(logits.dims == targets.dims) || logits.feature_dim != 1) {
    throw std::invalid_argument("bce_occupancy needs a scalar grid matching the targets");
  }
  std::size_t n = logits.voxel_count();
  LossValue out;
  if (with_grad) out.gradient = VoxelGrid(logits.dims, 1, 0.0, logits.voxel_size, logits.origin);
  double sum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    double x = logits.data[v];
    double y = targets.data[v];
    // -[y log s(x) + (1-y) log(1-s(x))] == softplus(x) - y*x
    sum += softplus(x) - y * x;
    if (with_grad) out.gradient->data[v] = (sigmoid(x) - y) / static_cast<double>(n);
  }
  out.value = sum / static_cast<double>(n);
  out.terms.emplace_back("bce", out.value);
  return out;
}

SpatialLossValue spatial_continuity_loss(const PointSet& g_orig, const PointSet& g_trans,
                                         const std::vector<std::pair<int, int>>& edges,
                                         bool with_grad) {
  if (g_orig.size() != g_trans.size()) {
    throw std::invalid_argument("node lists must have equal length");
  }
  SpatialLossValue out;
  if (with_grad) out.gradient.assign(g_trans.size(), {0.0, 0.0, 0.0});
  if (edges.empty()) return out;
  int n = static_cast<int>(g_orig.size());
  double sum = 0.0;
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n) {
      throw std::invalid_argument("edge index out of range");
    }
    double d_orig = dist(g_orig[a], g_orig[b]);
    double d_trans = dist(g_trans[a], g_trans[b]);
    double diff = d_trans - d_orig;
    sum += std::abs(diff);
    if (!with_grad || diff == 0.0 || d_trans == 0.0) continue;
    double sign = diff > 0.0 ? 1.0 : -1.0;
    double scale = sign / (d_trans * static_cast<double>(edges.size()));
    for (int c = 0; c < 3; ++c) {
      double g = scale * (g_trans[a][c] - g_trans[b][c]);
      out.gradient[a][c] += g;
      out.gradient[b][c] -= g;
    }
  }
  out.value = sum / static_cast<double>(edges.size());
  return out;
}

std::vector<double> inverse_log_frequency_weights(const SemanticGrid& labels) {
  std::vector<std::size_t> counts(labels.num_classes, 0);
  std::size_t total = 0;
  for (std::uint8_t y : labels.labels) {
    if (y == SemanticGrid::kIgnore) continue;
    counts[y] += 1;
    ++total;
  }
  std::vector<double> weights(labels.num_classes);
  for (int c = 0; c < labels.num_classes; ++c) {
    double freq = total > 0 ? static_cast<double>(counts[c]) / static_cast<double>(total) : 0.0;
    weights[c] = 1.0 / std::log(1.02 + freq);
  }
  return weights;
}

LossValue weighted_ce(const VoxelGrid& logits, const SemanticGrid& labels,
                      const std::vector<double>& class_weights, bool with_grad) {
  if (!(logits.dims == labels.dims)) throw std::invalid_argument("weighted_ce dim mismatch");
  int m = logits.feature_dim;
  if (m != labels.num_classes) {
    throw std::invalid_argument("logit channels must equal num_classes");
  }
  if (static_cast<int>(class_weights.size()) != m) {
    throw std::invalid_argument("class_weights length must equal num_classes");
  }
  std::size_t n = logits.voxel_count();
  LossValue out;
  if (with_grad) {
    out.gradient = VoxelGrid(logits.dims, m, 0.0, logits.voxel_size, logits.origin);
  }
  std::size_t valid = 0;
  for (std::size_t v = 0; v < n; ++v) {
    std::uint8_t y = labels.labels[v];
    if (y == SemanticGrid::kIgnore) continue;
    if (y >= m) throw std::invalid_argument("label out of range in weighted_ce");
    ++valid;
  }
  if (valid == 0) {
    out.terms.emplace_back("weighted_ce", 0.0);
    return out;
  }
  double sum = 0.0;
  std::vector<double> p(m);
  for (std::size_t v = 0; v < n; ++v) {
    std::uint8_t y = labels.labels[v];
    if (y == SemanticGrid::kIgnore) continue;
    const double* x = logits.data.data() + v * m;
    double mx = x[0];
    for (int c = 1; c < m; ++c) mx = std::max(mx, x[c]);
    double denom = 0.0;
    for (int c = 0; c < m; ++c) {
      p[c] = std::exp(x[c] - mx);
      denom += p[c];
    }
    double log_denom = std::log(denom);
    sum += class_weights[y] * (log_denom - (x[y] - mx));
    if (with_grad) {
      double* g = out.gradient->data.data() + v * m;
      for (int c = 0; c < m; ++c) {
        double soft = p[c] / denom;
        g[c] = class_weights[y] * (soft - (c == y ? 1.0 : 0.0)) / static_cast<double>(valid);
      }
    }
  }
  out.value = sum / static_cast<double>(valid);
  out.terms.emplace_back("weighted_ce", out.value);
  return out;
}

LossValue scene_class_affinity(const VoxelGrid& probs, const SemanticGrid& labels,
                               bool with_grad) {
  if (!(probs.dims == labels.dims)) throw std::invalid_argument("affinity dim mismatch");
  int m = probs.feature_dim;
  if (m != labels.num_classes) {
    throw std::invalid_argument("prob channels must equal num_classes");
  }
  std::size_t n = probs.voxel_count();
  std::vector<std::size_t> valid_voxels;
  valid_voxels.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::uint8_t y = labels.labels[v];
    if (y == SemanticGrid::kIgnore) continue;
    if (y >= m) throw std::invalid_argument("label out of range in affinity");
    const double* row = probs.data.data() + v * m;
    double rowsum = 0.0;
    for (int c = 0; c < m; ++c) rowsum += row[c];
    if (std::abs(rowsum - 1.0) > 1e-4) {
      throw std::invalid_argument("affinity probs must sum to 1 per voxel");
    }
    valid_voxels.push_back(v);
  }
  LossValue out;
  if (with_grad) {
    out.gradient = VoxelGrid(probs.dims, m, 0.0, probs.voxel_size, probs.origin);
  }
  if (valid_voxels.empty()) {
    out.terms.emplace_back("affinity", 0.0);
    return out;
  }

  std::vector<std::size_t> class_count(m, 0);
  for (std::size_t v : valid_voxels) class_count[labels.labels[v]] += 1;
  std::vector<int> present;
  for (int c = 0; c < m; ++c) {
    if (class_count[c] > 0) present.push_back(c);
  }

  constexpr double kFloor = 1e-300;
  double total = 0.0;
  for (int c : present) {
    double hit = 0.0;    // sum of p_c where y == c
    double mass = 0.0;   // sum of p_c everywhere
    double spec = 0.0;   // sum of (1 - p_c) where y != c
    std::size_t negatives = valid_voxels.size() - class_count[c];
    for (std::size_t v : valid_voxels) {
      double pc = probs.data[v * m + c];
      mass += pc;
      if (labels.labels[v] == c) {
        hit += pc;
      } else {
        spec += 1.0 - pc;
      }
    }
    int terms = 0;
    double class_sum = 0.0;
    // Precision: log(hit / mass); skipped when no predicted mass.
    bool has_prec = mass > 0.0;
    if (has_prec) {
      class_sum += std::log(std::max(hit, kFloor)) - std::log(mass);
      ++terms;
    }
    // Recall: log(hit / |y==c|); class is present so the denominator is > 0.
    class_sum += std::log(std::max(hit, kFloor)) - std::log(double(class_count[c]));
    ++terms;
    // Specificity: log(spec / |y!=c|); skipped when every voxel is class c.
    bool has_spec = negatives > 0;
    if (has_spec) {
      class_sum += std::log(std::max(spec, kFloor)) - std::log(double(negatives));
      ++terms;
    }
    total += -class_sum / terms;

    if (with_grad) {
      double scale = -1.0 / (static_cast<double>(present.size()) * terms);
      for (std::size_t v : valid_voxels) {
        double* g = out.gradient->data.data() + v * m;
        bool is_c = labels.labels[v] == c;
        double d = 0.0;
        if (has_prec) {
          if (is_c && hit > kFloor) d += 1.0 / hit;
          d -= 1.0 / mass;
        }
        if (is_c && hit > kFloor) d += 1.0 / hit;  // recall numerator
        if (has_spec && !is_c && spec > kFloor) d -= 1.0 / spec;
        g[c] += scale * d;
      }
    }
  }
  out.value = total / static_cast<double>(present.size());
  out.terms.emplace_back("affinity", out.value);
  return out;
}

double hausdorff(const PointSet& p, const PointSet& q) {
  if (p.empty() || q.empty()) {
    throw std::invalid_argument("hausdorff needs non-empty point sets");
  }
  if (p.size() > 4096 || q.size() > 4096) {
    throw std::invalid_argument("hausdorff point sets capped at 4096 points");
  }
  auto directed = [](const PointSet& a, const PointSet& b) {
    double worst = 0.0;
    for (const auto& pa : a) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& pb : b) best = std::min(best, dist(pa, pb));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(p, q), directed(q, p));
}

PointSet occupied_centers(const SemanticGrid& labels, double voxel_size,
                          const std::array<double, 3>& origin) {
  PointSet out;
  std::size_t v = 0;
  for (int i = 0; i < labels.dims.h; ++i) {
    for (int j = 0; j < labels.dims.w; ++j) {
      for (int k = 0; k < labels.dims.z; ++k, ++v) {
        std::uint8_t y = labels.labels[v];
        if (y == 0 || y == SemanticGrid::kIgnore) continue;
        out.push_back({origin[0] + voxel_size * (i + 0.5), origin[1] + voxel_size * (j + 0.5),
                       origin[2] + voxel_size * (k + 0.5)});
      }
    }
  }
  return out;
}

SemanticGrid argmax_labels(const VoxelGrid& logits, int num_classes) {
  if (logits.feature_dim != num_classes) {
    throw std::invalid_argument("argmax channel count mismatch");
  }
  SemanticGrid out(logits.dims, num_classes);
  std::size_t n = logits.voxel_count();
  for (std::size_t v = 0; v < n; ++v) {
    const double* x = logits.data.data() + v * num_classes;
    int arg = 0;
    for (int c = 1; c < num_classes; ++c) {
      if (x[c] > x[arg]) arg = c;
    }
    out.labels[v] = static_cast<std::uint8_t>(arg);
  }
  return out;
}

VoxelGrid softmax_channels(const VoxelGrid& logits) {
  VoxelGrid out = logits;
  int m = logits.feature_dim;
  std::size_t n = logits.voxel_count();
  for (std::size_t v = 0; v < n; ++v) {
    double* x = out.data.data() + v * m;
    double mx = x[0];
    for (int c = 1; c < m; ++c) mx = std::max(mx, x[c]);
    double denom = 0.0;
    for (int c = 0; c < m; ++c) {
      x[c] = std::exp(x[c] - mx);
      denom += x[c];
    }
    for (int c = 0; c < m; ++c) x[c] /= denom;
  }
  return out;
}

LossValue total_stage2_loss(const VoxelGrid& logits, const SemanticGrid& labels,
                            const std::vector<double>& class_weights,
                            const LossConfig& config, bool with_grad) {
  LossValue out;
  if (with_grad) {
    out.gradient = VoxelGrid(logits.dims, logits.feature_dim, 0.0, logits.voxel_size,
                             logits.origin);
  }

  LossValue ce = weighted_ce(logits, labels, class_weights, with_grad);
  out.value += config.lambda_ce * ce.value;
  out.terms.emplace_back("weighted_ce", ce.value);
  if (with_grad && ce.gradient) {
    for (std::size_t n = 0; n < out.gradient->data.size(); ++n) {
      out.gradient->data[n] += config.lambda_ce * ce.gradient->data[n];
    }
  }

  VoxelGrid probs = softmax_channels(logits);
  LossValue aff = scene_class_affinity(probs, labels, with_grad);
  out.value += config.lambda_aff * aff.value;
  out.terms.emplace_back("affinity", aff.value);
  if (with_grad && aff.gradient) {
    // Chain through the softmax: dL/dx_c = p_c * (g_c - sum_k p_k g_k).
    int m = logits.feature_dim;
    std::size_t n = logits.voxel_count();
    for (std::size_t v = 0; v < n; ++v) {
      const double* p = probs.data.data() + v * m;
      const double* g = aff.gradient->data.data() + v * m;
      double dot = 0.0;
      for (int c = 0; c < m; ++c) dot += p[c] * g[c];
      double* o = out.gradient->data.data() + v * m;
      for (int c = 0; c < m; ++c) o[c] += config.lambda_aff * p[c] * (g[c] - dot);
    }
  }

  double geo = 0.0;
  if (config.lambda_geo != 0.0) {
    SemanticGrid pred = argmax_labels(logits, labels.num_classes);
    PointSet pred_pts = occupied_centers(pred, logits.voxel_size, logits.origin);
    PointSet gt_pts = occupied_centers(labels, logits.voxel_size, logits.origin);
    // The term is piecewise constant in the logits, so it contributes no
    // gradient; an empty side would make hausdorff undefined, count it as 0.
    if (!pred_pts.empty() && !gt_pts.empty()) geo = hausdorff(pred_pts, gt_pts);
  }
  out.value += config.lambda_geo * geo;
  out.terms.emplace_back("geo", geo);
  return out;
}

std::string loss_report_kv(const LossValue& loss) {
  std::ostringstream ss;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", loss.value);
  ss << "loss.total=" << buf << "\n";
  for (const auto& [name, value] : loss.terms) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    ss << "loss." << name << "=" << buf << "\n";
  }
  return ss.str();
}

}  // namespace ssc
