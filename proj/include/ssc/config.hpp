#pragma once

#include <string>

#include "ssc/attention.hpp"
#include "ssc/gav.hpp"
#include "ssc/losses.hpp"
#include "ssc/stgf.hpp"

namespace ssc {

struct AttnConfig {
  int d_k = 4;
  int n_points = 6;
  QuerySource query_source = QuerySource::position;
};

// Recorded for completeness; the desk-scale harness never trains weights.
struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
};

enum class StgfOutput { replace, add };
enum class GavSource { stage1, post_stgf };

struct PipelineConfig {
  // Low-resolution query grid; the output grid is upsample times larger.
  int h = 8, w = 8, z = 4;
  int upsample = 2;
  double voxel_size = 0.4;  // output-resolution voxel edge, meters
  int num_classes = 20;     // M semantic classes plus empty
  int query_dim = 8;
  std::uint64_t seed = 0;
  int threads = 1;
  StgfOutput stgf_output = StgfOutput::replace;
  GavSource gav_source = GavSource::stage1;
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  StgfConfig stgf;
  GavConfig gav;
  AttnConfig attn;
  LossConfig loss;
  TrainConfig train;

  Dims low_res_dims() const { return {h, w, z}; }
  Dims output_dims() const { return {h * upsample, w * upsample, z * upsample}; }
  double low_res_voxel_size() const { return voxel_size * upsample; }

  void validate() const;
};

// Flat section.key=value text; unknown keys are an error.
PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig read_pipeline_config(const std::string& path);
std::string pipeline_config_to_text(const PipelineConfig& config);

}  // namespace ssc
