#include "ssc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssc/config.hpp"
#include "ssc/grid_io.hpp"
#include "ssc/metrics.hpp"
#include "ssc/pipeline.hpp"
#include "ssc/scene.hpp"

namespace ssc {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  out << text;
}

VoxelGrid depth_to_grid(const DepthImage& depth) {
  VoxelGrid g(Dims{depth.height, depth.width, 1}, 1);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) g.at(v, u, 0, 0) = depth.at(v, u);
  }
  return g;
}

VoxelGrid occupancy_to_field(const OccupancyGrid& occ) {
  VoxelGrid f(occ.dims, 1);
  for (std::size_t v = 0; v < occ.data.size(); ++v) f.data[v] = occ.data[v] ? 1.0 : 0.0;
  return f;
}

std::vector<double> parse_ranges(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = std::stod(item, &used);
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size()) throw std::invalid_argument("bad range value: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("no ranges given");
  return out;
}

struct CommonOpts {
  std::string scene_path;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

PipelineConfig load_config(const CommonOpts& opts) {
  PipelineConfig config =
      opts.config_path.empty() ? PipelineConfig{} : read_pipeline_config(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  config.validate();
  return config;
}

SceneSpec load_scene(const CommonOpts& opts) {
  SceneSpec spec = read_scene_spec(opts.scene_path);
  if (opts.seed) spec.seed = *opts.seed;
  return spec;
}

int cmd_generate(const CommonOpts& opts) {
  SceneSpec spec = load_scene(opts);
  SceneResult scene = generate_scene(spec);
  ensure_dir(opts.out_dir);
  write_grid(join(opts.out_dir, "occupancy.vxo"), scene.occupancy);
  write_grid(join(opts.out_dir, "labels.vxl"), scene.labels);
  write_grid(join(opts.out_dir, "depth.vxg"), depth_to_grid(scene.depth));
  write_cameras(join(opts.out_dir, "camera.txt"), {scene.camera});
  std::size_t hits = 0;
  for (double d : scene.depth.depth) {
    if (d > 0.0) ++hits;
  }
  std::cout << "generated dims=" << spec.dims.h << "x" << spec.dims.w << "x" << spec.dims.z
            << " occupied=" << scene.occupancy.occupied_count() << " depth_hits=" << hits
            << "\n";
  return 0;
}

int cmd_forward(const CommonOpts& opts, const std::string& depth_path) {
  PipelineConfig config = load_config(opts);
  SceneSpec spec = load_scene(opts);
  SceneResult scene = generate_scene(spec);

  std::vector<ImageInput> images;
  images.push_back({depth_image_features(scene.depth), scene.camera});

  VoxelGrid depth_grid =
      depth_path.empty()
          ? splat_depth(scene.depth, scene.camera, config.low_res_dims(),
                        config.low_res_voxel_size(), config.origin)
          : read_voxel_grid(depth_path);

  PipelineParams params = make_params(config, images[0].features.channels, ParamInit::seeded);
  ForwardResult result = pipeline_forward(images, depth_grid, config, params);

  ensure_dir(opts.out_dir);
  write_grid(join(opts.out_dir, "stage1_logits.vxg"), result.stage1_logits);
  write_grid(join(opts.out_dir, "m_out.vxo"), result.m_out);
  write_grid(join(opts.out_dir, "stage2_logits.vxg"), result.stage2_logits);
  SemanticGrid pred = argmax_labels(result.stage2_logits, config.num_classes);
  write_grid(join(opts.out_dir, "pred_labels.vxl"), pred);

  std::cout << "proposals=" << result.proposals.indices.size()
            << " channels=" << result.stage2_logits.feature_dim << "\n";
  if (spec.dims == config.output_dims() && spec.num_classes == config.num_classes) {
    EvalReport report = semantic_miou(pred, scene.labels);
    write_text(join(opts.out_dir, "report.kv"), reports_to_kv({report}));
    std::cout << "iou=" << report.iou << " miou=" << report.miou << "\n";
  } else {
    std::cout << "scene dims differ from output dims; skipping eval\n";
  }
  return 0;
}

int cmd_stgf(const CommonOpts& opts) {
  PipelineConfig config = load_config(opts);
  SceneSpec spec = load_scene(opts);
  SceneResult scene = generate_scene(spec);

  PipelineParams params = make_params(config, 3, ParamInit::seeded);
  VoxelGrid depth_grid = splat_depth(scene.depth, scene.camera, config.low_res_dims(),
                                     config.low_res_voxel_size(), config.origin);
  StgfConfig stgf_cfg = config.stgf;
  stgf_cfg.locnet = params.locnet;
  stgf_cfg.gcn = params.gcn;
  StgfDetail detail;
  VoxelGrid out = stgf_apply(params.voxel_queries, depth_grid, stgf_cfg, &detail);

  ensure_dir(opts.out_dir);
  write_grid(join(opts.out_dir, "stgf_out.vxg"), out);
  if (detail.clusters.k <= 255) {
    SemanticGrid assign(config.low_res_dims(), std::max(detail.clusters.k, 2));
    for (std::size_t v = 0; v < assign.labels.size(); ++v) {
      assign.labels[v] = static_cast<std::uint8_t>(detail.clusters.assignments[v]);
    }
    write_grid(join(opts.out_dir, "assignments.vxl"), assign);
  }
  std::ostringstream csv;
  csv << "m,n,w\n";
  for (int m = 0; m < detail.connection.rows(); ++m) {
    for (int n = 0; n < detail.connection.cols(); ++n) {
      csv << m << "," << n << "," << detail.connection(m, n) << "\n";
    }
  }
  write_text(join(opts.out_dir, "connection.csv"), csv.str());

  auto edges = connection_edges(detail.connection, config.loss.w_threshold);
  SpatialLossValue sl = spatial_continuity_loss(detail.node_positions,
                                                detail.node_positions_out, edges, false);
  std::cout << "clusters=" << detail.clusters.k << " iterations=" << detail.clusters.iterations
            << " edges=" << edges.size() << " spatial_loss=" << sl.value << "\n";
  return 0;
}

int cmd_gav(const CommonOpts& opts, const std::string& occupancy_path) {
  PipelineConfig config = load_config(opts);
  SceneSpec spec = load_scene(opts);
  SceneResult scene = generate_scene(spec);
  if (!occupancy_path.empty()) {
    scene.occupancy = read_occupancy_grid(occupancy_path);
    spec.dims = scene.occupancy.dims;
  }

  VoxelGrid field = occupancy_to_field(scene.occupancy);
  ComplexityGrid complexity = edge_crossing_count(field, config.gav.iso);
  ResolutionGrid resolution = resolution_map(complexity, config.gav.c0, config.gav.s);

  VoxelGrid cgrid(spec.dims, 1, 0.0, spec.voxel_size, spec.origin);
  VoxelGrid rgrid(spec.dims, 1, 0.0, spec.voxel_size, spec.origin);
  int cmax = 0;
  for (std::size_t v = 0; v < cgrid.data.size(); ++v) {
    cgrid.data[v] = complexity.counts[v];
    rgrid.data[v] = resolution.values[v];
    cmax = std::max(cmax, complexity.counts[v]);
  }
  ensure_dir(opts.out_dir);
  write_grid(join(opts.out_dir, "complexity.vxg"), cgrid);
  write_grid(join(opts.out_dir, "resolution.vxg"), rgrid);
  std::cout << "max_crossings=" << cmax
            << " r_at_max=" << 1.0 / (1.0 + std::exp(-(cmax - config.gav.c0) / config.gav.s))
            << "\n";
  return 0;
}

int cmd_attend(const CommonOpts& opts) {
  PipelineConfig config = load_config(opts);
  SceneSpec spec = load_scene(opts);
  SceneResult scene = generate_scene(spec);

  PipelineParams params = make_params(config, 3, ParamInit::seeded);
  VoxelGrid depth_grid = splat_depth(scene.depth, scene.camera, config.low_res_dims(),
                                     config.low_res_voxel_size(), config.origin);
  VoxelGrid field = stack_depth(params.voxel_queries, depth_grid);

  VoxelGrid prob(config.low_res_dims(), 1);
  for (std::size_t v = 0; v < prob.data.size(); ++v) {
    prob.data[v] = depth_grid.data[v] > 0.0 ? 1.0 : 0.0;
  }
  ComplexityGrid complexity = edge_crossing_count(prob, config.gav.iso);
  ResolutionGrid resolution = resolution_map(complexity, config.gav.c0, config.gav.s);
  double delta = delta_to_normalized(config.gav.delta, config.low_res_dims());
  VoxelGrid out = dsa(field, resolution, params.dsa_params, delta, config.threads);

  ensure_dir(opts.out_dir);
  write_grid(join(opts.out_dir, "attend_out.vxg"), out);
  std::cout << "channels=" << out.feature_dim << " voxels=" << out.dims.count() << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& ranges_text, int axis, double voxel_size,
             const std::string& out_dir) {
  SemanticGrid pred = read_semantic_grid(pred_path);
  SemanticGrid gt = read_semantic_grid(gt_path);
  std::vector<EvalReport> reports;
  if (ranges_text.empty()) {
    reports.push_back(semantic_miou(pred, gt));
  } else {
    reports = ranged_eval(pred, gt, parse_ranges(ranges_text), voxel_size, axis);
  }
  std::string csv = reports_to_csv(reports);
  std::cout << csv;
  if (!out_dir.empty() && out_dir != "-") {
    ensure_dir(out_dir);
    write_text(join(out_dir, "report.csv"), csv);
    write_text(join(out_dir, "report.kv"), reports_to_kv(reports));
  }
  return 0;
}

int cmd_gradcheck(const std::string& subject, int trials, std::uint64_t seed) {
  std::vector<GradcheckReport> reports;
  if (subject == "all") {
    reports = gradcheck_all(trials, seed);
  } else {
    reports.push_back(gradcheck(subject, trials, seed));
  }
  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << "subject=" << r.subject << " trials=" << r.trials << " max_rel_err="
              << r.max_rel_error << " pass=" << (r.pass ? 1 : 0) << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 3;
}

int cmd_overfit(const CommonOpts& opts, int steps, double step_size) {
  SceneSpec spec = load_scene(opts);
  OverfitResult result = overfit_toy(spec, steps, step_size);

  ensure_dir(opts.out_dir);
  std::ostringstream csv;
  csv << "step,loss\n";
  for (std::size_t i = 0; i < result.losses.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", result.losses[i]);
    csv << i << "," << buf << "\n";
  }
  write_text(join(opts.out_dir, "loss_curve.csv"), csv.str());
  write_grid(join(opts.out_dir, "final_labels.vxl"), result.final_labels);
  write_text(join(opts.out_dir, "report.kv"), reports_to_kv({result.report}));
  std::cout << "final_loss=" << result.losses.back() << " miou=" << result.report.miou
            << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"semantic scene completion toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool needs_scene) {
    if (needs_scene) {
      sub->add_option("--scene", opts.scene_path, "scene description file")->required();
    }
    sub->add_option("--config", opts.config_path, "pipeline config file");
    sub->add_option("--out-dir", opts.out_dir, "output directory");
    sub->add_option("--seed", seed_value, "override the configured seed")
        ->each([&](const std::string&) { opts.seed = seed_value; });
  };

  auto* gen = app.add_subcommand("generate", "rasterize a scene and render its depth image");
  add_common(gen, true);

  std::string depth_path;
  auto* fwd = app.add_subcommand("forward", "run the two-stage completion pass");
  add_common(fwd, true);
  fwd->add_option("--depth", depth_path, "low-res depth grid (.vxg) replacing the splat");

  auto* stgf_cmd = app.add_subcommand("stgf", "run the graph-fusion stack on seeded queries");
  add_common(stgf_cmd, true);

  std::string occupancy_path;
  auto* gav_cmd = app.add_subcommand("gav", "edge-crossing complexity and resolution maps");
  add_common(gav_cmd, true);
  gav_cmd->add_option("--occupancy", occupancy_path,
                      "occupancy grid (.vxo) replacing the rasterized scene");

  auto* att = app.add_subcommand("attend", "resolution-adaptive self-attention demo");
  add_common(att, true);

  std::string pred_path, gt_path, ranges_text;
  int axis = 0;
  double eval_voxel_size = 1.0;
  std::string eval_out;
  auto* ev = app.add_subcommand("eval", "score predicted labels against ground truth");
  ev->add_option("--pred", pred_path, "predicted labels (.vxl)")->required();
  ev->add_option("--gt", gt_path, "ground-truth labels (.vxl)")->required();
  ev->add_option("--ranges", ranges_text, "comma-separated ranges, e.g. 12.8,25.6,51.2");
  ev->add_option("--axis", axis, "forward axis for ranged eval (0,1,2)");
  ev->add_option("--voxel-size", eval_voxel_size, "voxel edge length for ranges");
  ev->add_option("--out-dir", eval_out, "also write report.csv / report.kv here");

  std::string subject = "all";
  int trials = 50;
  std::uint64_t gc_seed = 7;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--subject", subject, "subject name or 'all'");
  gc->add_option("--trials", trials, "instances per subject")->check(CLI::PositiveNumber);
  gc->add_option("--seed", gc_seed, "rng seed");

  int steps = 500;
  double step_size = 1.0;
  auto* ov = app.add_subcommand("overfit", "fit a free logit grid to a generated scene");
  add_common(ov, true);
  ov->add_option("--steps", steps, "descent steps")->check(CLI::PositiveNumber);
  ov->add_option("--step-size", step_size, "per-voxel step scale");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_generate(opts);
    if (fwd->parsed()) return cmd_forward(opts, depth_path);
    if (stgf_cmd->parsed()) return cmd_stgf(opts);
    if (gav_cmd->parsed()) return cmd_gav(opts, occupancy_path);
    if (att->parsed()) return cmd_attend(opts);
    if (ev->parsed()) return cmd_eval(pred_path, gt_path, ranges_text, axis,
                                      eval_voxel_size, eval_out);
    if (gc->parsed()) {
      bool known = subject == "all" ||
                   std::find(kGradcheckSubjects.begin(), kGradcheckSubjects.end(), subject) !=
                       kGradcheckSubjects.end();
      if (!known) {
        std::cerr << "error: unknown gradcheck subject '" << subject << "'\n";
        return 1;
      }
      return cmd_gradcheck(subject, trials, gc_seed);
    }
    if (ov->parsed()) return cmd_overfit(opts, steps, step_size);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const BehindCameraError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const SingularTransformError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ssc
