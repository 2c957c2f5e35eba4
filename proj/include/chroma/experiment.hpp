#pragma once

#include <filesystem>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "chroma/analysis.hpp"
#include "chroma/synthdigits.hpp"

namespace chroma {

// A full pipeline run: generate the colorized variants, train one model per
// (scheme, norm) pair, evaluate every model on every test variant, emit one
// report. Desk scale subsets the data and shortens training so trends are
// checkable in minutes.
struct ExperimentPlan {
  std::string source = "mnist";
  std::vector<ColorScheme> schemes = {ColorScheme::GreenOnly, ColorScheme::RandomSingleChannel,
                                      ColorScheme::HorizontalThirds};
  std::vector<NormKind> norms = {NormKind::batch};
  InputStage input_stage = InputStage::plain3;
  CustomDropoutConfig dropout;
  uint64_t data_seed = 42;
  uint64_t model_seed = 1;
  uint64_t shuffle_seed = 7;
  bool desk = true;
  int64_t train_subset = 10000;  // desk scale only
  int64_t val_subset = 2000;     // desk scale only
  int epochs = 10;               // 50 at full scale
  int64_t batch_size = 128;
  OptimizerConfig optimizer = OptimizerConfig::adam();
  int jobs = 1;
  bool write_csv = false;
};

struct ExperimentResult {
  EvalReport report;
  std::vector<std::string> snapshot_paths;
  std::string report_path;
};

inline std::string model_id_for(const std::string& source, ColorScheme scheme, NormKind norm,
                                InputStage stage, bool multiple_norms) {
  std::string id = source == "fashionmnist" ? "FM" : "MM";
  switch (scheme) {
    case ColorScheme::GreenOnly: id += "1"; break;
    case ColorScheme::RandomSingleChannel: id += "2"; break;
    default: id += "3"; break;
  }
  if (multiple_norms || norm != NormKind::batch) id += std::string("-") + norm_kind_name(norm);
  if (stage == InputStage::gray4) id += "-gray4";
  return id;
}

inline ExperimentResult run_experiment(const ExperimentPlan& plan, const DataSource& source,
                                       const std::string& out_dir, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  if (plan.schemes.empty()) throw std::invalid_argument("experiment: no color schemes selected");
  fs::create_directories(out_dir);
  auto say = [&](const std::string& line) {
    if (log) (*log) << line << std::endl;
  };

  // Stage 1: datasets. Full-size containers are written as artifacts; desk
  // runs subset in memory at train time.
  struct SchemeData {
    ColorScheme scheme;
    LabeledDataset train, val, test;
  };
  std::vector<SchemeData> data;
  for (ColorScheme scheme : plan.schemes) {
    SchemeData d{scheme,
                 build_dataset(source, "train", scheme, plan.data_seed),
                 build_dataset(source, "val", scheme, plan.data_seed),
                 build_dataset(source, "test", scheme, plan.data_seed)};
    if (plan.desk) {
      d.train = d.train.subset(plan.train_subset);
      d.val = d.val.subset(plan.val_subset);
    }
    const std::string id = d.test.id();
    write_dataset(d.train, (fs::path(out_dir) / (id + "-train.cmds")).string());
    write_dataset(d.val, (fs::path(out_dir) / (id + "-val.cmds")).string());
    write_dataset(d.test, (fs::path(out_dir) / (id + "-test.cmds")).string());
    say("generated " + id + ": train " + std::to_string(d.train.size()) + ", val " +
        std::to_string(d.val.size()) + ", test " + std::to_string(d.test.size()));
    data.push_back(std::move(d));
  }

  // Stage 2: training jobs, one per (scheme, norm).
  struct Job {
    size_t scheme_index;
    NormKind norm;
    std::string id;
  };
  std::vector<Job> jobs;
  const bool multi_norm = plan.norms.size() > 1;
  for (size_t si = 0; si < data.size(); ++si)
    for (NormKind norm : plan.norms)
      jobs.push_back({si, norm, model_id_for(plan.source, data[si].scheme, norm, plan.input_stage, multi_norm)});

  std::vector<ModelSnapshot> snapshots(jobs.size());
  std::mutex log_mutex;
  auto run_job = [&](size_t ji) {
    const Job& job = jobs[ji];
    ModelConfig mc;
    mc.norm = job.norm;
    mc.input_stage = plan.input_stage;
    mc.dropout = plan.dropout;
    mc.seed = plan.model_seed;
    Model model(mc);
    const SchemeData& d = data[job.scheme_index];
    const LabeledDataset& train_set = d.train;
    const LabeledDataset& val_set = d.val;
    TrainConfig tc;
    tc.epochs = plan.epochs;
    tc.batch_size = plan.batch_size;
    tc.optimizer = plan.optimizer;
    tc.shuffle_seed = plan.shuffle_seed;
    ModelSnapshot snap = train(model, train_set, val_set, tc);
    snap.model_id = job.id;
    snapshots[ji] = std::move(snap);
    std::lock_guard<std::mutex> lock(log_mutex);
    say("trained " + job.id + " on " + d.train.id() + ": best val acc " +
        std::to_string(snapshots[ji].best_val_accuracy) + " at epoch " +
        std::to_string(snapshots[ji].epoch_of_best));
  };
  const int workers = std::max(1, plan.jobs);
  if (workers == 1) {
    for (size_t ji = 0; ji < jobs.size(); ++ji) run_job(ji);
  } else {
    size_t next = 0;
    std::mutex next_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          size_t ji;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= jobs.size()) return;
            ji = next++;
          }
          run_job(ji);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  ExperimentResult result;
  for (size_t ji = 0; ji < jobs.size(); ++ji) {
    const std::string path = (fs::path(out_dir) / (jobs[ji].id + ".cmsn")).string();
    save_snapshot(snapshots[ji], path);
    result.snapshot_paths.push_back(path);
  }

  // Stage 3: the cross-distribution report over the test variants.
  std::vector<LabeledDataset> tests;
  for (SchemeData& d : data) tests.push_back(std::move(d.test));
  result.report = full_report(snapshots, tests);
  result.report.provenance["plan"] = {{"source", plan.source},
                                      {"data_seed", plan.data_seed},
                                      {"model_seed", plan.model_seed},
                                      {"shuffle_seed", plan.shuffle_seed},
                                      {"scale", plan.desk ? "desk" : "full"},
                                      {"train_subset", plan.desk ? plan.train_subset : int64_t{-1}},
                                      {"val_subset", plan.desk ? plan.val_subset : int64_t{-1}},
                                      {"epochs", plan.epochs},
                                      {"batch_size", plan.batch_size}};
  result.report_path = (fs::path(out_dir) / "report.json").string();
  emit_report_json(result.report, result.report_path);
  if (plan.write_csv) emit_report_csv(result.report, (fs::path(out_dir) / "csv").string());
  say("report written to " + result.report_path);
  return result;
}

}  // namespace chroma
