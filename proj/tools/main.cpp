#include "pieceflow/io.hpp"
#include "pieceflow/metrics.hpp"
#include "pieceflow/oversegment.hpp"
#include "pieceflow/pipeline.hpp"
#include "pieceflow/types.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pieceflow;

namespace {

// ---------------------------------------------------------------------------
// config files: flat "key = value" lines, '#' comments, unknown keys rejected

std::string trim(std::string s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) return {};
  const auto to = s.find_last_not_of(" \t\r");
  return s.substr(from, to - from + 1);
}

[[noreturn]] void config_fail(const fs::path& path, std::size_t line_no, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what + " at line " + std::to_string(line_no));
}

template <typename T>
T parse_integer(const fs::path& path, std::size_t line_no, const std::string& key,
                const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    config_fail(path, line_no, "invalid value '" + value + "' for " + key);
  }
  return out;
}

double parse_real(const fs::path& path, std::size_t line_no, const std::string& key,
                  const std::string& value) {
  double out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    config_fail(path, line_no, "invalid value '" + value + "' for " + key);
  }
  return out;
}

bool parse_flag(const fs::path& path, std::size_t line_no, const std::string& key,
                const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  config_fail(path, line_no, "invalid value '" + value + "' for " + key +
                                 " (expected true/false/1/0)");
}

void apply_config_file(PipelineConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open config file");

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) config_fail(path, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) config_fail(path, line_no, "expected 'key = value'");

    if (key == "supervoxel_count") {
      cfg.supervoxel_count = parse_integer<std::uint32_t>(path, line_no, key, value);
    } else if (key == "iterations") {
      cfg.iterations = parse_integer<std::uint32_t>(path, line_no, key, value);
    } else if (key == "beta1") {
      cfg.beta1 = parse_real(path, line_no, key, value);
    } else if (key == "beta2") {
      cfg.beta2 = parse_real(path, line_no, key, value);
    } else if (key == "theta_sq") {
      cfg.theta_sq = parse_real(path, line_no, key, value);
    } else if (key == "warmup") {
      cfg.warmup = parse_flag(path, line_no, key, value);
    } else if (key == "bootstrap_rounds") {
      cfg.bootstrap_rounds = parse_integer<std::uint32_t>(path, line_no, key, value);
    } else if (key == "seed") {
      cfg.seed = parse_integer<std::uint64_t>(path, line_no, key, value);
    } else if (key == "remove_ground") {
      cfg.remove_ground = parse_flag(path, line_no, key, value);
    } else if (key == "ransac.distance_threshold") {
      cfg.ransac.distance_threshold = parse_real(path, line_no, key, value);
    } else if (key == "ransac.max_iterations") {
      cfg.ransac.max_iterations = parse_integer<std::uint32_t>(path, line_no, key, value);
    } else {
      config_fail(path, line_no, "unknown configuration key '" + key + "'");
    }
  }
}

PipelineConfig profile_config(const std::string& name) {
  if (name == "scene") return PipelineConfig::scene_flow_profile();
  if (name == "motion") return PipelineConfig::motion_profile();
  throw std::runtime_error("unknown profile '" + name + "' (expected scene or motion)");
}

// ---------------------------------------------------------------------------
// shared helpers

PointCloud load_cloud_auto(const std::string& path) {
  return load_point_cloud(path, detect_cloud_format(path));
}

void write_trace_file(const PseudoLabelResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write_trace_jsonl(result, out);
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

/// Same round structure as bootstrap_flow, but keeps the final forward pass
/// whole so the labels command can also emit its partition/objective trace.
PseudoLabelResult bootstrap_with_trace(const PointCloud& source, const PointCloud& target,
                                       const PipelineConfig& cfg, unsigned threads) {
  if (cfg.bootstrap_rounds == 0) {
    throw std::invalid_argument("bootstrap_rounds must be >= 1");
  }
  PseudoLabelResult forward = warmup_flow(source, target, cfg, threads);
  if (cfg.bootstrap_rounds > 1) {
    FlowField bwd = warmup_flow(target, source, cfg, threads).labels;
    for (std::uint32_t round = 1; round < cfg.bootstrap_rounds; ++round) {
      PseudoLabelResult next =
          generate_pseudo_labels(source, target, forward.labels, bwd, cfg, threads);
      if (round + 1 < cfg.bootstrap_rounds) {
        bwd = generate_pseudo_labels(target, source, bwd, next.labels, cfg, threads).labels;
      }
      forward = std::move(next);
    }
  }
  return forward;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pieceflow: piecewise-rigid scene flow estimation and pseudo-labeling"};
  app.require_subcommand(1);

  // --- segment -------------------------------------------------------------
  auto* seg = app.add_subcommand("segment", "Partition a point cloud into compact regions");
  std::string seg_cloud, seg_out;
  std::uint32_t seg_regions = 0;
  std::uint64_t seg_seed = 0;
  seg->add_option("--cloud,--input", seg_cloud, "Input point cloud (.xyz or ascii .ply)")
      ->required();
  seg->add_option("--regions", seg_regions, "Number of regions (>= 1)")->required();
  seg->add_option("--seed", seg_seed, "Segmentation seed");
  seg->add_option("--out,--output", seg_out, "Output label file (one region index per line)")
      ->required();
  seg->callback([&] {
    const PointCloud cloud = load_cloud_auto(seg_cloud);
    save_labels(segment(cloud, seg_regions, seg_seed).labels(), seg_out);
  });

  // --- labels ----------------------------------------------------------------
  auto* lab = app.add_subcommand(
      "labels", "Generate locally rigid pseudo-labels with a validity mask");
  std::string lab_source, lab_target, lab_forward, lab_backward, lab_out_flow, lab_out_mask,
      lab_trace, lab_profile = "scene", lab_config;
  unsigned lab_threads = 0;
  std::uint64_t lab_seed = 0;
  lab->add_option("--source", lab_source, "Source point cloud")->required();
  lab->add_option("--target", lab_target, "Target point cloud")->required();
  auto* lab_fwd_opt = lab->add_option("--forward", lab_forward,
                                      "Forward flow estimate (source -> target)");
  auto* lab_bwd_opt = lab->add_option("--backward", lab_backward,
                                      "Backward flow estimate (target -> source)");
  lab->add_option("--profile", lab_profile, "Parameter profile: scene or motion");
  lab->add_option("--config", lab_config, "key = value configuration file");
  auto* lab_seed_opt = lab->add_option("--seed", lab_seed, "Pipeline seed");
  lab->add_option("--threads", lab_threads, "Worker cap (0 = all cores)");
  lab->add_option("--out-flow", lab_out_flow, "Output pseudo-label flow file")->required();
  lab->add_option("--out-mask", lab_out_mask, "Output validity mask file")->required();
  lab->add_option("--trace", lab_trace, "Optional JSONL objective trace");
  lab->callback([&] {
    if ((lab_fwd_opt->count() > 0) != (lab_bwd_opt->count() > 0)) {
      throw std::runtime_error("--forward and --backward must be given together");
    }
    PipelineConfig cfg = profile_config(lab_profile);
    if (!lab_config.empty()) apply_config_file(cfg, lab_config);
    if (lab_seed_opt->count() > 0) cfg.seed = lab_seed;
    cfg.validate();

    const PointCloud source = load_cloud_auto(lab_source);
    const PointCloud target = load_cloud_auto(lab_target);

    std::optional<PseudoLabelResult> result;
    if (lab_fwd_opt->count() > 0) {
      result = generate_pseudo_labels(source, target, load_flow(lab_forward),
                                      load_flow(lab_backward), cfg, lab_threads);
    } else {
      result = bootstrap_with_trace(source, target, cfg, lab_threads);
    }
    save_flow(result->labels, lab_out_flow);
    save_mask(result->validity, lab_out_mask);
    if (!lab_trace.empty()) write_trace_file(*result, lab_trace);
  });

  // --- estimate --------------------------------------------------------------
  auto* est = app.add_subcommand(
      "estimate", "Estimate scene flow from scratch by bootstrapped self-labeling");
  std::string est_source, est_target, est_out_flow, est_out_mask, est_profile = "scene",
              est_config;
  std::uint32_t est_rounds = 0;
  unsigned est_threads = 0;
  std::uint64_t est_seed = 0;
  est->add_option("--source", est_source, "Source point cloud")->required();
  est->add_option("--target", est_target, "Target point cloud")->required();
  auto* est_rounds_opt = est->add_option("--rounds", est_rounds, "Bootstrap rounds (>= 1)");
  est->add_option("--profile", est_profile, "Parameter profile: scene or motion");
  est->add_option("--config", est_config, "key = value configuration file");
  auto* est_seed_opt = est->add_option("--seed", est_seed, "Pipeline seed");
  est->add_option("--threads", est_threads, "Worker cap (0 = all cores)");
  est->add_option("--out-flow", est_out_flow, "Output flow file")->required();
  est->add_option("--out-mask", est_out_mask, "Optional validity mask file");
  est->callback([&] {
    PipelineConfig cfg = profile_config(est_profile);
    if (!est_config.empty()) apply_config_file(cfg, est_config);
    if (est_rounds_opt->count() > 0) cfg.bootstrap_rounds = est_rounds;
    if (est_seed_opt->count() > 0) cfg.seed = est_seed;
    cfg.validate();

    const PointCloud source = load_cloud_auto(est_source);
    const PointCloud target = load_cloud_auto(est_target);
    const BootstrapResult boot = bootstrap_flow(source, target, cfg, est_threads);
    save_flow(boot.flow, est_out_flow);
    if (!est_out_mask.empty()) save_mask(boot.validity, est_out_mask);
  });

  // --- eval ------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Score a flow against ground truth");
  std::string ev_flow, ev_truth, ev_occluded;
  bool ev_json = false;
  ev->add_option("--flow", ev_flow, "Estimated flow file")->required();
  ev->add_option("--truth", ev_truth, "Ground-truth flow file")->required();
  ev->add_option("--occluded", ev_occluded, "Occlusion mask (1 = excluded from EPE/AS/AR/Out)");
  ev->add_flag("--json", ev_json, "Emit a JSON object instead of text");
  ev->callback([&] {
    const FlowField flow = load_flow(ev_flow);
    const FlowField truth = load_flow(ev_truth);
    std::vector<std::uint8_t> occluded;
    if (!ev_occluded.empty()) occluded = load_mask(ev_occluded);
    const FlowMetrics m = evaluate(flow, truth, occluded);

    if (ev_json) {
      nlohmann::ordered_json j;
      j["epe_full"] = m.epe_full;
      j["epe"] = m.epe;
      j["accuracy_strict_pct"] = m.accuracy_strict_pct;
      j["accuracy_relaxed_pct"] = m.accuracy_relaxed_pct;
      j["outlier_pct"] = m.outlier_pct;
      j["evaluated_points"] = m.evaluated_points;
      // short aliases for script consumers
      j["as"] = m.accuracy_strict_pct;
      j["ar"] = m.accuracy_relaxed_pct;
      j["out"] = m.outlier_pct;
      j["n"] = m.evaluated_points;
      std::cout << j.dump() << '\n';
    } else {
      std::cout << std::fixed << std::setprecision(4)
                << "EPE (all points)  : " << m.epe_full << " m\n"
                << "EPE (evaluated)   : " << m.epe << " m\n"
                << "Accuracy strict   : " << m.accuracy_strict_pct << " %\n"
                << "Accuracy relaxed  : " << m.accuracy_relaxed_pct << " %\n"
                << "Outliers          : " << m.outlier_pct << " %\n"
                << "Evaluated points  : " << m.evaluated_points << '\n';
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
