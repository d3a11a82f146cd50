// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train, localize, close-loops, segment, eval,
// make-synthetic. Exit codes: 0 success, 1 operational failure, 2 usage
// error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segloop/cloud_io.hpp"
#include "segloop/cloud_ops.hpp"
#include "segloop/config.hpp"
#include "segloop/dataset.hpp"
#include "segloop/descriptors.hpp"
#include "segloop/forest.hpp"
#include "segloop/metrics.hpp"
#include "segloop/pipeline.hpp"
#include "segloop/rng.hpp"
#include "segloop/segmentation.hpp"
#include "segloop/synthetic.hpp"
#include "segloop/target_map.hpp"

namespace {

using namespace segloop;

/// Errors that are the caller's fault (missing required combination of
/// options) — reported with exit code 2 like CLI11's own parse errors.
struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_config(path);
}

ScanProvider provider_for(const SequenceDataset& dataset) {
  return [&dataset](std::size_t pos) { return dataset.load_scan(pos); };
}

void write_closures_tsv(const std::string& path,
                        const std::vector<LoopClosure>& closures) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "scan_index\tconsensus\tr00\tr01\tr02\ttx\tr10\tr11\tr12\tty\t"
         "r20\tr21\tr22\ttz\n";
  out << std::setprecision(17);
  for (const LoopClosure& c : closures) {
    out << c.source_scan_index << '\t' << c.consensus_size;
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        out << '\t' << c.transform.rotation(row, col);
      }
      out << '\t' << c.transform.translation(row);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::pair<double, bool>> load_scores_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scores file: " + path);
  std::vector<std::pair<double, bool>> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "score\tlabel") continue;
    std::istringstream row(line);
    double score = 0.0;
    int label = 0;
    if (!(row >> score >> label) || (label != 0 && label != 1)) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": expected 'score label(0|1)'");
    }
    scores.emplace_back(score, label == 1);
  }
  return scores;
}

void report_sequence(const SequenceResult& result) {
  std::cout << "scans admitted: " << result.records.size() << "\n";
  std::cout << "total travel: " << std::fixed << std::setprecision(1)
            << result.total_travel << " m\n";
  std::cout.unsetf(std::ios::floatfield);
  std::cout << "closures: " << result.closures.size() << " (true "
            << result.true_positives << ", false " << result.false_positives
            << ")\n";
}

void write_sequence_outputs(const SequenceResult& result,
                            const std::string& closures_out,
                            const std::string& records_out,
                            const std::string& timing_out,
                            const std::string& localization_out) {
  if (!closures_out.empty()) write_closures_tsv(closures_out, result.closures);
  if (!records_out.empty()) write_records_tsv(records_out, result.records);
  if (!timing_out.empty()) {
    write_timing_tsv(timing_out, timing_report(result.records));
  }
  if (!localization_out.empty()) {
    write_localization_tsv(localization_out,
                           localization_probability(result.detection_per_meter));
  }
}

struct TrainOptions {
  std::string scans, poses, config, output;
};

void run_train(const TrainOptions& opt) {
  const RunConfig config = load_run_config(opt.config);
  const SequenceDataset dataset = load_sequence(opt.scans, opt.poses);
  const TrainingSet set = generate_training_pairs(
      config.pipeline, dataset.poses, provider_for(dataset));
  std::size_t positives = 0;
  for (const bool label : set.labels) positives += label ? 1 : 0;
  std::cout << "training pairs: " << set.size() << " (" << positives
            << " positive, " << set.size() - positives << " negative)\n";
  const ForestModel model = train(set, config.forest, config.pipeline.seed);
  save_model(model, opt.output);
  std::cout << "model: " << model.trees.size() << " trees -> " << opt.output
            << "\n";
}

struct SequenceOptions {
  std::string scans, poses, config, model, map_in, map_out;
  std::string closures_out, records_out, timing_out, localization_out;
};

Pipeline make_pipeline(const RunConfig& config, const std::string& model_path,
                       std::optional<ForestModel>& model_storage) {
  if (config.pipeline.classifier == ClassifierMode::kForest) {
    if (model_path.empty()) {
      throw UsageFailure(
          "the forest classifier needs --model (or set 'classifier = l2' "
          "in the config)");
    }
    model_storage = load_model(model_path);
    return Pipeline(config.pipeline, &*model_storage);
  }
  return Pipeline(config.pipeline);
}

void run_close_loops(const SequenceOptions& opt) {
  RunConfig config = load_run_config(opt.config);
  config.pipeline.mode = PipelineMode::kLoopClosure;
  const SequenceDataset dataset = load_sequence(opt.scans, opt.poses);
  std::optional<ForestModel> model;
  Pipeline pipeline = make_pipeline(config, opt.model, model);
  const SequenceResult result =
      run_sequence(pipeline, dataset.poses, provider_for(dataset));
  report_sequence(result);
  write_sequence_outputs(result, opt.closures_out, opt.records_out,
                         opt.timing_out, opt.localization_out);
  if (!opt.map_out.empty()) {
    pipeline.target_map().save(opt.map_out);
    std::cout << "map: " << pipeline.target_map().size() << " segments -> "
              << opt.map_out << "\n";
  }
}

void run_localize(const SequenceOptions& opt) {
  RunConfig config = load_run_config(opt.config);
  config.pipeline.mode = PipelineMode::kLocalization;
  const SequenceDataset dataset = load_sequence(opt.scans, opt.poses);
  std::optional<ForestModel> model;
  Pipeline pipeline = make_pipeline(config, opt.model, model);
  pipeline.set_target_map(TargetMap::load(opt.map_in));
  const SequenceResult result =
      run_sequence(pipeline, dataset.poses, provider_for(dataset));
  report_sequence(result);
  write_sequence_outputs(result, opt.closures_out, opt.records_out,
                         opt.timing_out, opt.localization_out);
}

struct SegmentOptions {
  std::string cloud, config, features_out;
  bool describe = false;
};

void run_segment(const SegmentOptions& opt) {
  const RunConfig config = load_run_config(opt.config);
  PointCloud cloud = load_cloud(opt.cloud);
  cloud = voxel_grid_filter(cloud, config.pipeline.voxel_leaf,
                            config.pipeline.min_points_per_voxel);
  cloud = remove_ground(cloud, config.pipeline.segmentation);
  std::vector<Segment> segments =
      euclidean_segmenter(cloud, config.pipeline.segmentation);
  std::cout << "segments: " << segments.size() << "\n";
  std::cout << "id\tpoints\tcx\tcy\tcz\n";
  std::cout << std::setprecision(6);
  for (const Segment& seg : segments) {
    std::cout << seg.id << '\t' << seg.points.size() << '\t' << seg.centroid.x
              << '\t' << seg.centroid.y << '\t' << seg.centroid.z << '\n';
  }
  if (opt.describe || !opt.features_out.empty()) {
    std::vector<FeatureVector> features;
    features.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const Segment described =
          describe(segments[i], config.pipeline.esf_samples,
                   mix_seed(config.pipeline.seed, i));
      features.push_back(*described.feature);
    }
    if (!opt.features_out.empty()) {
      save_features(opt.features_out, features);
      std::cout << "features: " << features.size() << " -> "
                << opt.features_out << "\n";
    }
  }
}

struct EvalOptions {
  std::string records, scores;
  std::string roc_out, localization_out, timing_out;
};

void run_eval(const EvalOptions& opt) {
  if (opt.records.empty() && opt.scores.empty()) {
    throw UsageFailure("eval needs --records and/or --scores");
  }
  if (!opt.scores.empty()) {
    const RocResult roc = roc_curve(load_scores_tsv(opt.scores));
    std::cout << "auc: " << std::setprecision(6) << roc.auc << "\n";
    const RocPoint& op = roc.points.at(roc.operating_index);
    std::cout << "operating point (nearest FPR 0.2): fpr " << op.fpr
              << " tpr " << op.tpr << " threshold " << op.threshold << "\n";
    if (!opt.roc_out.empty()) write_roc_tsv(opt.roc_out, roc);
  }
  if (!opt.records.empty()) {
    const std::vector<EvalRecord> records = load_records_tsv(opt.records);
    double total = 0.0;
    for (const EvalRecord& r : records) total = std::max(total, r.travel_m);
    std::vector<bool> per_meter(
        static_cast<std::size_t>(std::max(1.0, std::ceil(total))), false);
    for (const EvalRecord& r : records) {
      if (r.outcome != EvalRecord::Outcome::kTruePositive) continue;
      auto meter = static_cast<std::size_t>(r.travel_m);
      if (meter >= per_meter.size()) meter = per_meter.size() - 1;
      per_meter[meter] = true;
    }
    const std::vector<double> p_of_x = localization_probability(per_meter);
    std::cout << "records: " << records.size() << ", total travel " << total
              << " m\n";
    if (!opt.localization_out.empty()) {
      write_localization_tsv(opt.localization_out, p_of_x);
    }
    if (!opt.timing_out.empty()) {
      write_timing_tsv(opt.timing_out, timing_report(records));
    }
  }
}

struct SynthOptions {
  std::string output;
  std::uint64_t seed = 0;
  std::size_t objects = 40;
  double spacing = 1.0;
  double scan_radius = 60.0;
  bool with_ground = false;
  bool labels = false;
};

void run_make_synthetic(const SynthOptions& opt) {
  namespace fs = std::filesystem;
  const fs::path dir(opt.output);
  fs::create_directories(dir / "scans");
  // Labels live in a sibling directory: the scan directory must contain
  // nothing but scans so it stays loadable as a sequence.
  if (opt.labels) fs::create_directories(dir / "labels");

  synthetic::WorldParams wp;
  wp.object_count = opt.objects;
  wp.with_ground = opt.with_ground;
  const synthetic::World world = synthetic::World::generate(wp, opt.seed);
  const Trajectory trajectory = world.trajectory(opt.spacing);

  synthetic::ScanParams sp;
  sp.radius = opt.scan_radius;
  const auto& entries = trajectory.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const synthetic::LabeledScan scan =
        world.sample_scan(from_eigen(entries[i].second.translation), sp,
                          mix_seed(opt.seed, i));
    std::ostringstream name;
    name << std::setw(6) << std::setfill('0') << i;
    save_cloud((dir / "scans" / (name.str() + ".segpc")).string(), scan.cloud);
    if (opt.labels) {
      std::ofstream labels(dir / "labels" / (name.str() + ".labels"));
      for (const int label : scan.labels) labels << label << '\n';
    }
  }
  save_pose_file((dir / "poses.txt").string(), trajectory);

  std::ofstream objects(dir / "objects.tsv");
  objects << "kind\tcx\tcy\tcz\tdim0\tdim1\tdim2\tyaw\n"
          << std::setprecision(17);
  for (const synthetic::Object& o : world.objects()) {
    objects << static_cast<int>(o.kind) << '\t' << o.center.x << '\t'
            << o.center.y << '\t' << o.center.z << '\t' << o.dims[0] << '\t'
            << o.dims[1] << '\t' << o.dims[2] << '\t' << o.yaw << '\n';
  }
  std::cout << "world: " << world.objects().size() << " objects, "
            << entries.size() << " scans -> " << opt.output << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segloop: segment-based place recognition for 3D point clouds"};
  app.require_subcommand(1);

  TrainOptions train_opt;
  CLI::App* train_cmd = app.add_subcommand(
      "train", "Generate labelled segment pairs from a revisit sequence and "
               "train the random-forest matcher");
  train_cmd->add_option("--scans", train_opt.scans, "Scan directory")
      ->required();
  train_cmd->add_option("--poses", train_opt.poses, "Ground-truth pose file")
      ->required();
  train_cmd->add_option("--config", train_opt.config, "Config file");
  train_cmd->add_option("--output", train_opt.output, "Model output path")
      ->required();
  train_cmd->callback([&] { run_train(train_opt); });

  SequenceOptions close_opt;
  CLI::App* close_cmd = app.add_subcommand(
      "close-loops", "Run the online loop-closure pipeline over a sequence");
  close_cmd->add_option("--scans", close_opt.scans, "Scan directory")
      ->required();
  close_cmd->add_option("--poses", close_opt.poses, "Pose file")->required();
  close_cmd->add_option("--config", close_opt.config, "Config file");
  close_cmd->add_option("--model", close_opt.model, "Forest model file");
  close_cmd->add_option("--map-out", close_opt.map_out,
                        "Save the built target map");
  close_cmd->add_option("--closures-out", close_opt.closures_out,
                        "Closure table (TSV)");
  close_cmd->add_option("--records-out", close_opt.records_out,
                        "Per-scan records (TSV)");
  close_cmd->add_option("--timing-out", close_opt.timing_out,
                        "Stage timing table (TSV)");
  close_cmd->add_option("--localization-out", close_opt.localization_out,
                        "P(x) table (TSV)");
  close_cmd->callback([&] { run_close_loops(close_opt); });

  SequenceOptions loc_opt;
  CLI::App* loc_cmd = app.add_subcommand(
      "localize", "Localize a sequence against a target map loaded from disk");
  loc_cmd->add_option("--scans", loc_opt.scans, "Scan directory")->required();
  loc_cmd->add_option("--poses", loc_opt.poses, "Pose file")->required();
  loc_cmd->add_option("--map", loc_opt.map_in, "Target map file")->required();
  loc_cmd->add_option("--config", loc_opt.config, "Config file");
  loc_cmd->add_option("--model", loc_opt.model, "Forest model file");
  loc_cmd->add_option("--closures-out", loc_opt.closures_out,
                      "Closure table (TSV)");
  loc_cmd->add_option("--records-out", loc_opt.records_out,
                      "Per-scan records (TSV)");
  loc_cmd->add_option("--timing-out", loc_opt.timing_out,
                      "Stage timing table (TSV)");
  loc_cmd->add_option("--localization-out", loc_opt.localization_out,
                      "P(x) table (TSV)");
  loc_cmd->callback([&] { run_localize(loc_opt); });

  SegmentOptions seg_opt;
  CLI::App* seg_cmd = app.add_subcommand(
      "segment", "Segment a single cloud and report the segments");
  seg_cmd->add_option("--cloud", seg_opt.cloud, "Point-cloud file")
      ->required();
  seg_cmd->add_option("--config", seg_opt.config, "Config file");
  seg_cmd->add_flag("--describe", seg_opt.describe,
                    "Also compute descriptors");
  seg_cmd->add_option("--features-out", seg_opt.features_out,
                      "Save descriptors (implies --describe)");
  seg_cmd->callback([&] { run_segment(seg_opt); });

  EvalOptions eval_opt;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Compute ROC / localization-probability / timing tables");
  eval_cmd->add_option("--records", eval_opt.records,
                       "Per-scan records TSV (from a sequence run)");
  eval_cmd->add_option("--scores", eval_opt.scores,
                       "Scored pairs TSV: score label(0|1)");
  eval_cmd->add_option("--roc-out", eval_opt.roc_out, "ROC table (TSV)");
  eval_cmd->add_option("--localization-out", eval_opt.localization_out,
                       "P(x) table (TSV)");
  eval_cmd->add_option("--timing-out", eval_opt.timing_out,
                       "Stage timing table (TSV)");
  eval_cmd->callback([&] { run_eval(eval_opt); });

  SynthOptions synth_opt;
  CLI::App* synth_cmd = app.add_subcommand(
      "make-synthetic", "Generate a labelled synthetic world sequence");
  synth_cmd->add_option("--output", synth_opt.output, "Output directory")
      ->required();
  synth_cmd->add_option("--seed", synth_opt.seed, "World/scan seed");
  synth_cmd->add_option("--objects", synth_opt.objects, "Object count");
  synth_cmd->add_option("--spacing", synth_opt.spacing,
                        "Pose spacing along the loop [m]");
  synth_cmd->add_option("--scan-radius", synth_opt.scan_radius,
                        "Sensor visibility radius [m]");
  synth_cmd->add_flag("--with-ground", synth_opt.with_ground,
                      "Sample a ground surface");
  synth_cmd->add_flag("--labels", synth_opt.labels,
                      "Write per-point object labels to a labels/ directory");
  synth_cmd->callback([&] { run_make_synthetic(synth_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
