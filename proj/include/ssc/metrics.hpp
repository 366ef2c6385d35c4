#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssc/grid.hpp"

namespace ssc {

struct OccupancyScores {
  double iou = 0.0;  // NaN when TP+FP+FN == 0
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<double> per_class_iou;  // semantic classes 1..M; NaN = undefined
  double miou = 0.0;                  // mean of the defined entries, NaN if none
  std::string range_label = "full";
};

// Confusion scores over non-ignored voxels. Conventions: no predicted
// positives gives precision 0, or 1 when the ground truth is also empty
// (mirrored for recall); TP+FP+FN == 0 leaves IoU undefined (NaN).
OccupancyScores occupancy_scores(const OccupancyGrid& pred, const OccupancyGrid& gt,
                                 const OccupancyGrid* ignore = nullptr);

// Per-class IoU over semantic classes (empty class 0 excluded), ignoring
// voxels labeled 255 in gt. Classes absent from both sides are excluded from
// the mean. Throws invalid_argument when every voxel is ignored.
EvalReport semantic_miou(const SemanticGrid& pred, const SemanticGrid& gt);

// Label grid reduced to occupancy: 1 for semantic classes, 0 for empty.
OccupancyGrid occupancy_from_labels(const SemanticGrid& labels);

// For each range r, evaluates both grids cropped to voxels whose forward-axis
// center coordinate (voxel_size * (index + 0.5)) is below r. Ranges must be
// ascending and at least one voxel deep; ranges beyond the grid cover it all.
std::vector<EvalReport> ranged_eval(const SemanticGrid& pred, const SemanticGrid& gt,
                                    const std::vector<double>& ranges, double voxel_size,
                                    int forward_axis = 0);

std::string reports_to_csv(const std::vector<EvalReport>& reports);
std::string reports_to_kv(const std::vector<EvalReport>& reports);

}  // namespace ssc
