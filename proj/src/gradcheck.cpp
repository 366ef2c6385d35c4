#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "ssc/losses.hpp"
#include "ssc/pipeline.hpp"
#include "ssc/rng.hpp"
#include "ssc/stn.hpp"

namespace ssc {

const std::vector<std::string> kGradcheckSubjects = {
    "trilinear_sample", "bce_occupancy", "weighted_ce", "scene_class_affinity",
    "spatial_continuity",
};

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kGradTol = 1e-4;

double rel_error(double analytic, double fd) {
  double scale = std::max({1e-5, std::abs(analytic), std::abs(fd)});
  return std::abs(analytic - fd) / scale;
}

// Central finite differences over every listed parameter against the
// precomputed analytic gradient; returns the worst relative error.
double fd_sweep(const std::vector<double*>& params, const std::vector<double>& analytic,
                const std::function<double()>& eval) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double orig = *params[i];
    *params[i] = orig + kFdStep;
    double fp = eval();
    *params[i] = orig - kFdStep;
    double fm = eval();
    *params[i] = orig;
    double fd = (fp - fm) / (2.0 * kFdStep);
    worst = std::max(worst, rel_error(analytic[i], fd));
  }
  return worst;
}

Dims random_dims(Rng& rng, int lo, int hi) {
  auto pick = [&] { return lo + static_cast<int>(rng.index(hi - lo + 1)); };
  return Dims{pick(), pick(), pick()};
}

// Positions are kept away from cell boundaries and the clamp region so the
// finite-difference step never crosses a kink of the interpolant.
double interior_coord(Rng& rng, int n) {
  if (n == 1) return 0.0;
  int cell = static_cast<int>(rng.index(n - 1));
  double idx = cell + 0.05 + 0.9 * rng.uniform();
  return -1.0 + 2.0 * idx / (n - 1);
}

double check_trilinear(Rng& rng) {
  Dims dims = random_dims(rng, 2, 4);
  int d = 1 + static_cast<int>(rng.index(2));
  VoxelGrid field(dims, d);
  for (double& v : field.data) v = rng.normal(0.0, 1.0);

  int np = 4 + static_cast<int>(rng.index(4));
  VoxelGrid positions(Dims{np, 1, 1}, 3);
  const int axis_n[3] = {dims.h, dims.w, dims.z};
  for (int p = 0; p < np; ++p) {
    for (int a = 0; a < 3; ++a) {
      double c;
      if (rng.uniform() < 0.15) {
        c = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (1.1 + 0.4 * rng.uniform());
      } else {
        c = interior_coord(rng, axis_n[a]);
      }
      positions.data[static_cast<std::size_t>(p) * 3 + a] = c;
    }
  }
  VoxelGrid upstream(Dims{np, 1, 1}, d);
  for (double& v : upstream.data) v = rng.normal(0.0, 1.0);

  TrilinearGrad grad = trilinear_sample_grad(field, positions, upstream);
  std::vector<double*> params;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < field.data.size(); ++i) {
    params.push_back(&field.data[i]);
    analytic.push_back(grad.field.data[i]);
  }
  for (std::size_t i = 0; i < positions.data.size(); ++i) {
    params.push_back(&positions.data[i]);
    analytic.push_back(grad.positions.data[i]);
  }
  auto eval = [&] {
    VoxelGrid out = trilinear_sample(field, positions);
    double s = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * upstream.data[i];
    return s;
  };
  return fd_sweep(params, analytic, eval);
}

double check_bce(Rng& rng) {
  Dims dims = random_dims(rng, 2, 4);
  VoxelGrid logits(dims, 1);
  OccupancyGrid targets(dims);
  for (double& v : logits.data) v = rng.normal(0.0, 2.0);
  for (auto& t : targets.data) t = rng.uniform() < 0.5 ? 0 : 1;

  LossValue loss = bce_occupancy(logits, targets, true);
  std::vector<double*> params;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    params.push_back(&logits.data[i]);
    analytic.push_back(loss.gradient->data[i]);
  }
  auto eval = [&] { return bce_occupancy(logits, targets, false).value; };
  return fd_sweep(params, analytic, eval);
}

SemanticGrid random_labels(Rng& rng, const Dims& dims, int m, double ignore_rate) {
  SemanticGrid labels(dims, m);
  bool any_valid = false;
  for (auto& y : labels.labels) {
    if (rng.uniform() < ignore_rate) {
      y = SemanticGrid::kIgnore;
    } else {
      y = static_cast<std::uint8_t>(rng.index(m));
      any_valid = true;
    }
  }
  if (!any_valid) labels.labels[0] = 0;
  return labels;
}

double check_weighted_ce(Rng& rng) {
  Dims dims = random_dims(rng, 2, 3);
  int m = 3 + static_cast<int>(rng.index(3));
  VoxelGrid logits(dims, m);
  for (double& v : logits.data) v = rng.normal(0.0, 2.0);
  SemanticGrid labels = random_labels(rng, dims, m, 0.1);
  std::vector<double> weights(m);
  for (double& w : weights) w = 0.2 + 2.0 * rng.uniform();

  LossValue loss = weighted_ce(logits, labels, weights, true);
  std::vector<double*> params;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    params.push_back(&logits.data[i]);
    analytic.push_back(loss.gradient->data[i]);
  }
  auto eval = [&] { return weighted_ce(logits, labels, weights, false).value; };
  return fd_sweep(params, analytic, eval);
}

double check_affinity(Rng& rng) {
  Dims dims = random_dims(rng, 2, 3);
  int m = 3 + static_cast<int>(rng.index(2));
  VoxelGrid logits(dims, m);
  for (double& v : logits.data) v = rng.normal(0.0, 1.0);
  // Mixing with the uniform distribution keeps every soft count well away
  // from zero, where the log terms would amplify finite-difference error.
  VoxelGrid probs = softmax_channels(logits);
  for (double& p : probs.data) p = 0.7 * p + 0.3 / m;
  SemanticGrid labels = random_labels(rng, dims, m, 0.1);

  LossValue loss = scene_class_affinity(probs, labels, true);
  std::vector<double*> params;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < probs.data.size(); ++i) {
    params.push_back(&probs.data[i]);
    analytic.push_back(loss.gradient->data[i]);
  }
  auto eval = [&] { return scene_class_affinity(probs, labels, false).value; };
  return fd_sweep(params, analytic, eval);
}

double check_spatial(Rng& rng) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    int n = 5 + static_cast<int>(rng.index(4));
    PointSet g_orig(n), g_trans(n);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) {
        g_orig[i][a] = rng.normal(0.0, 1.0);
        g_trans[i][a] = g_orig[i][a] + rng.normal(0.0, 0.5);
      }
    }
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (rng.uniform() < 0.5) edges.emplace_back(a, b);
      }
    }
    if (edges.empty()) edges.emplace_back(0, 1);

    // Stay clear of the non-differentiable points: degenerate edges and
    // ties between the original and transformed edge lengths.
    auto dist = [](const PointSet& g, int a, int b) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += (g[a][c] - g[b][c]) * (g[a][c] - g[b][c]);
      return std::sqrt(s);
    };
    bool ok = true;
    for (auto [a, b] : edges) {
      double d_o = dist(g_orig, a, b);
      double d_t = dist(g_trans, a, b);
      if (d_o < 0.3 || d_t < 0.3 || std::abs(d_o - d_t) < 1e-2) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    SpatialLossValue loss = spatial_continuity_loss(g_orig, g_trans, edges, true);
    std::vector<double*> params;
    std::vector<double> analytic;
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) {
        params.push_back(&g_trans[i][a]);
        analytic.push_back(loss.gradient[i][a]);
      }
    }
    auto eval = [&] { return spatial_continuity_loss(g_orig, g_trans, edges, false).value; };
    return fd_sweep(params, analytic, eval);
  }
  throw std::runtime_error("spatial gradcheck could not build a well-separated instance");
}

}  // namespace

GradcheckReport gradcheck(const std::string& subject, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("gradcheck needs at least one trial");
  double (*check)(Rng&) = nullptr;
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < kGradcheckSubjects.size(); ++i) {
    if (kGradcheckSubjects[i] == subject) {
      offset = 0x9e3779b97f4a7c15ull * (i + 1);
      break;
    }
  }
  if (subject == "trilinear_sample") check = &check_trilinear;
  else if (subject == "bce_occupancy") check = &check_bce;
  else if (subject == "weighted_ce") check = &check_weighted_ce;
  else if (subject == "scene_class_affinity") check = &check_affinity;
  else if (subject == "spatial_continuity") check = &check_spatial;
  if (!check) {
    std::string known;
    for (const auto& s : kGradcheckSubjects) known += " " + s;
    throw std::invalid_argument("unknown gradcheck subject '" + subject + "'; known:" + known);
  }
  GradcheckReport report;
  report.subject = subject;
  report.trials = trials;
  Rng rng(seed ^ offset);
  for (int t = 0; t < trials; ++t) {
    report.max_rel_error = std::max(report.max_rel_error, check(rng));
  }
  report.pass = report.max_rel_error <= kGradTol;
  return report;
}

std::vector<GradcheckReport> gradcheck_all(int trials, std::uint64_t seed) {
  std::vector<GradcheckReport> out;
  out.reserve(kGradcheckSubjects.size());
  for (const auto& subject : kGradcheckSubjects) {
    out.push_back(gradcheck(subject, trials, seed));
  }
  return out;
}

}  // namespace ssc
