#include "ssc/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ssc/kv.hpp"

namespace ssc {

void PipelineConfig::validate() const {
  if (h < 2 || w < 2 || z < 2) {
    throw std::invalid_argument("pipeline dims must be at least 2 per axis");
  }
  if (upsample < 1) throw std::invalid_argument("pipeline.upsample must be at least 1");
  if (!(voxel_size > 0.0)) throw std::invalid_argument("pipeline.voxel_size must be positive");
  if (num_classes < 2 || num_classes > 255) {
    throw std::invalid_argument("pipeline.num_classes must be in 2..255");
  }
  if (query_dim < 1) throw std::invalid_argument("pipeline.query_dim must be at least 1");
  if (threads < 1) throw std::invalid_argument("pipeline.threads must be at least 1");
  if (stgf.k < 0) throw std::invalid_argument("stgf.k must be non-negative");
  if (stgf.gcn_layers < 1) throw std::invalid_argument("stgf.gcn_layers must be at least 1");
  if (!(gav.s > 0.0)) throw std::invalid_argument("gav.s must be positive");
  if (!(gav.delta >= 0.0)) throw std::invalid_argument("gav.delta must be non-negative");
  if (gav.n_points < 1) throw std::invalid_argument("gav.n_points must be at least 1");
  if (attn.d_k < 1) throw std::invalid_argument("attn.d_k must be at least 1");
  if (attn.n_points < 1) throw std::invalid_argument("attn.n_points must be at least 1");
  if (!(loss.w_threshold >= 0.0)) {
    throw std::invalid_argument("loss.w_threshold must be non-negative");
  }
}

PipelineConfig parse_pipeline_config(const std::string& text) {
  auto kv = parse_kv_text(text);
  PipelineConfig c;
  take_int(kv, "pipeline.h", c.h);
  take_int(kv, "pipeline.w", c.w);
  take_int(kv, "pipeline.z", c.z);
  take_int(kv, "pipeline.upsample", c.upsample);
  take_double(kv, "pipeline.voxel_size", c.voxel_size);
  take_int(kv, "pipeline.num_classes", c.num_classes);
  take_int(kv, "pipeline.query_dim", c.query_dim);
  take_u64(kv, "pipeline.seed", c.seed);
  take_int(kv, "pipeline.threads", c.threads);

  std::string s;
  if (take_string(kv, "pipeline.stgf_output", s)) {
    if (s == "replace") c.stgf_output = StgfOutput::replace;
    else if (s == "add") c.stgf_output = StgfOutput::add;
    else throw std::invalid_argument("pipeline.stgf_output must be replace or add");
  }
  if (take_string(kv, "pipeline.gav_source", s)) {
    if (s == "stage1") c.gav_source = GavSource::stage1;
    else if (s == "post_stgf") c.gav_source = GavSource::post_stgf;
    else throw std::invalid_argument("pipeline.gav_source must be stage1 or post_stgf");
  }
  if (take_string(kv, "pipeline.origin", s)) {
    auto vals = parse_doubles(s, "pipeline.origin");
    if (vals.size() != 3) throw std::invalid_argument("pipeline.origin needs 3 values");
    c.origin = {vals[0], vals[1], vals[2]};
  }

  take_int(kv, "stgf.k", c.stgf.k);
  take_double(kv, "stgf.alpha", c.stgf.alpha);
  take_double(kv, "stgf.beta", c.stgf.beta);
  take_double(kv, "stgf.gamma", c.stgf.gamma);
  take_double(kv, "stgf.sigma", c.stgf.sigma);
  take_int(kv, "stgf.gcn_layers", c.stgf.gcn_layers);
  take_u64(kv, "stgf.seed", c.stgf.seed);

  take_double(kv, "gav.c0", c.gav.c0);
  take_double(kv, "gav.s", c.gav.s);
  take_double(kv, "gav.delta", c.gav.delta);
  take_int(kv, "gav.n_points", c.gav.n_points);
  take_double(kv, "gav.iso", c.gav.iso);

  take_int(kv, "attn.d_k", c.attn.d_k);
  take_int(kv, "attn.n_points", c.attn.n_points);
  if (take_string(kv, "attn.query_source", s)) {
    if (s == "position") c.attn.query_source = QuerySource::position;
    else if (s == "content") c.attn.query_source = QuerySource::content;
    else throw std::invalid_argument("attn.query_source must be position or content");
  }

  take_double(kv, "loss.lambda_ce", c.loss.lambda_ce);
  take_double(kv, "loss.lambda_aff", c.loss.lambda_aff);
  take_double(kv, "loss.lambda_geo", c.loss.lambda_geo);
  take_double(kv, "loss.w_threshold", c.loss.w_threshold);
  if (take_string(kv, "loss.spatial_pairing", s)) {
    if (s == "edges") c.loss.spatial_pairing = SpatialPairing::edges;
    else if (s == "consecutive") c.loss.spatial_pairing = SpatialPairing::consecutive;
    else throw std::invalid_argument("loss.spatial_pairing must be edges or consecutive");
  }

  take_double(kv, "train.lr", c.train.lr);
  take_double(kv, "train.weight_decay", c.train.weight_decay);

  if (!kv.empty()) {
    throw std::invalid_argument("unknown config key: " + kv.begin()->first);
  }
  c.validate();
  return c;
}

PipelineConfig read_pipeline_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_pipeline_config(buf.str());
}

std::string pipeline_config_to_text(const PipelineConfig& c) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "pipeline.h=" << c.h << "\npipeline.w=" << c.w << "\npipeline.z=" << c.z << "\n";
  ss << "pipeline.upsample=" << c.upsample << "\n";
  ss << "pipeline.voxel_size=" << c.voxel_size << "\n";
  ss << "pipeline.num_classes=" << c.num_classes << "\n";
  ss << "pipeline.query_dim=" << c.query_dim << "\n";
  ss << "pipeline.seed=" << c.seed << "\n";
  ss << "pipeline.threads=" << c.threads << "\n";
  ss << "pipeline.stgf_output=" << (c.stgf_output == StgfOutput::replace ? "replace" : "add")
     << "\n";
  ss << "pipeline.gav_source=" << (c.gav_source == GavSource::stage1 ? "stage1" : "post_stgf")
     << "\n";
  ss << "pipeline.origin=" << c.origin[0] << " " << c.origin[1] << " " << c.origin[2] << "\n";
  ss << "stgf.k=" << c.stgf.k << "\nstgf.alpha=" << c.stgf.alpha << "\nstgf.beta="
     << c.stgf.beta << "\nstgf.gamma=" << c.stgf.gamma << "\nstgf.sigma=" << c.stgf.sigma
     << "\nstgf.gcn_layers=" << c.stgf.gcn_layers << "\nstgf.seed=" << c.stgf.seed << "\n";
  ss << "gav.c0=" << c.gav.c0 << "\ngav.s=" << c.gav.s << "\ngav.delta=" << c.gav.delta
     << "\ngav.n_points=" << c.gav.n_points << "\ngav.iso=" << c.gav.iso << "\n";
  ss << "attn.d_k=" << c.attn.d_k << "\nattn.n_points=" << c.attn.n_points
     << "\nattn.query_source="
     << (c.attn.query_source == QuerySource::position ? "position" : "content") << "\n";
  ss << "loss.lambda_ce=" << c.loss.lambda_ce << "\nloss.lambda_aff=" << c.loss.lambda_aff
     << "\nloss.lambda_geo=" << c.loss.lambda_geo << "\nloss.spatial_pairing="
     << (c.loss.spatial_pairing == SpatialPairing::edges ? "edges" : "consecutive")
     << "\nloss.w_threshold=" << c.loss.w_threshold << "\n";
  ss << "train.lr=" << c.train.lr << "\ntrain.weight_decay=" << c.train.weight_decay << "\n";
  return ss.str();
}

}  // namespace ssc
