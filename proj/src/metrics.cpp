#include "ssc/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ssc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[48];
  if (std::isnan(v)) return "nan";
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

SemanticGrid crop(const SemanticGrid& g, int axis, int keep) {
  Dims d = g.dims;
  (axis == 0 ? d.h : axis == 1 ? d.w : d.z) = keep;
  SemanticGrid out(d, g.num_classes);
  for (int i = 0; i < d.h; ++i) {
    for (int j = 0; j < d.w; ++j) {
      for (int k = 0; k < d.z; ++k) out.at(i, j, k) = g.at(i, j, k);
    }
  }
  return out;
}

}  // namespace

OccupancyScores occupancy_scores(const OccupancyGrid& pred, const OccupancyGrid& gt,
                                 const OccupancyGrid* ignore) {
  if (!(pred.dims == gt.dims) || (ignore && !(ignore->dims == gt.dims))) {
    throw std::invalid_argument("occupancy_scores dim mismatch");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t v = 0; v < pred.data.size(); ++v) {
    if (ignore && ignore->data[v]) continue;
    bool p = pred.data[v] != 0;
    bool g = gt.data[v] != 0;
    if (p && g) ++tp;
    else if (p) ++fp;
    else if (g) ++fn;
  }
  OccupancyScores s;
  s.iou = (tp + fp + fn) > 0 ? double(tp) / double(tp + fp + fn) : kNan;
  s.precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : ((tp + fn) == 0 ? 1.0 : 0.0);
  s.recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : ((tp + fp) == 0 ? 1.0 : 0.0);
  return s;
}

OccupancyGrid occupancy_from_labels(const SemanticGrid& labels) {
  OccupancyGrid out(labels.dims);
  for (std::size_t v = 0; v < labels.labels.size(); ++v) {
    std::uint8_t y = labels.labels[v];
    out.data[v] = (y != 0 && y != SemanticGrid::kIgnore) ? 1 : 0;
  }
  return out;
}

EvalReport semantic_miou(const SemanticGrid& pred, const SemanticGrid& gt) {
  if (!(pred.dims == gt.dims) || pred.num_classes != gt.num_classes) {
    throw std::invalid_argument("semantic_miou needs matching dims and num_classes");
  }
  int m = gt.num_classes;
  std::vector<std::size_t> tp(m, 0), fp(m, 0), fn(m, 0);
  std::size_t evaluated = 0;
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    std::uint8_t y = gt.labels[v];
    if (y == SemanticGrid::kIgnore) continue;
    std::uint8_t p = pred.labels[v];
    if (p == SemanticGrid::kIgnore || p >= m || y >= m) {
      throw std::invalid_argument("label out of range in semantic_miou");
    }
    ++evaluated;
    if (p == y) {
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  if (evaluated == 0) {
    throw std::invalid_argument("semantic_miou: no evaluable voxels");
  }

  EvalReport rep;
  OccupancyGrid ignore(gt.dims);
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    ignore.data[v] = gt.labels[v] == SemanticGrid::kIgnore ? 1 : 0;
  }
  OccupancyScores occ = occupancy_scores(occupancy_from_labels(pred),
                                         occupancy_from_labels(gt), &ignore);
  rep.iou = occ.iou;
  rep.precision = occ.precision;
  rep.recall = occ.recall;

  rep.per_class_iou.assign(m - 1, kNan);
  double sum = 0.0;
  int defined = 0;
  for (int c = 1; c < m; ++c) {
    std::size_t denom = tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;  // absent from both sides
    rep.per_class_iou[c - 1] = double(tp[c]) / double(denom);
    sum += rep.per_class_iou[c - 1];
    ++defined;
  }
  rep.miou = defined > 0 ? sum / defined : kNan;
  return rep;
}

std::vector<EvalReport> ranged_eval(const SemanticGrid& pred, const SemanticGrid& gt,
                                    const std::vector<double>& ranges, double voxel_size,
                                    int forward_axis) {
  if (!(pred.dims == gt.dims)) throw std::invalid_argument("ranged_eval dim mismatch");
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");
  if (forward_axis < 0 || forward_axis > 2) {
    throw std::invalid_argument("forward_axis must be 0, 1, or 2");
  }
  if (ranges.empty()) throw std::invalid_argument("ranged_eval needs at least one range");
  int extent = forward_axis == 0 ? gt.dims.h : forward_axis == 1 ? gt.dims.w : gt.dims.z;
  std::vector<EvalReport> out;
  double prev = -std::numeric_limits<double>::infinity();
  for (double r : ranges) {
    if (!(r > prev)) throw std::invalid_argument("ranges must be strictly ascending");
    prev = r;
    int keep = 0;
    while (keep < extent && voxel_size * (keep + 0.5) < r) ++keep;
    if (keep < 1) {
      throw std::invalid_argument("range smaller than one voxel: " + std::to_string(r));
    }
    EvalReport rep = keep == extent
                         ? semantic_miou(pred, gt)
                         : semantic_miou(crop(pred, forward_axis, keep),
                                         crop(gt, forward_axis, keep));
    char label[32];
    std::snprintf(label, sizeof label, "%g", r);
    rep.range_label = label;
    out.push_back(std::move(rep));
  }
  return out;
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream ss;
  ss << "range,iou,precision,recall,miou";
  std::size_t m = reports.empty() ? 0 : reports.front().per_class_iou.size();
  for (std::size_t c = 0; c < m; ++c) ss << ",class_" << c;
  ss << "\n";
  for (const EvalReport& rep : reports) {
    ss << rep.range_label << "," << fmt(rep.iou) << "," << fmt(rep.precision) << ","
       << fmt(rep.recall) << "," << fmt(rep.miou);
    for (double v : rep.per_class_iou) ss << "," << fmt(v);
    ss << "\n";
  }
  return ss.str();
}

std::string reports_to_kv(const std::vector<EvalReport>& reports) {
  std::ostringstream ss;
  for (const EvalReport& rep : reports) {
    std::string p = "eval." + rep.range_label + ".";
    ss << p << "iou=" << fmt(rep.iou) << "\n";
    ss << p << "precision=" << fmt(rep.precision) << "\n";
    ss << p << "recall=" << fmt(rep.recall) << "\n";
    ss << p << "miou=" << fmt(rep.miou) << "\n";
    for (std::size_t c = 0; c < rep.per_class_iou.size(); ++c) {
      ss << p << "class_" << c << "=" << fmt(rep.per_class_iou[c]) << "\n";
    }
  }
  return ss.str();
}

}  // namespace ssc
