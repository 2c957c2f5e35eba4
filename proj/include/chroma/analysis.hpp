#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "chroma/training.hpp"

namespace chroma {

// ---------------------------------------------------------------------------
// Report rows. Confidence and class-count summaries keep the model id as
// well, so one report can carry the full cross product.

struct MatrixEntry {
  std::string model, dataset;
  double accuracy = 0.0;
};

struct ConfidenceEntry {
  std::string model, dataset;
  int class_label = 0;
  bool correct = false;
  double mean_max_prob = 0.0;
  int64_t count = 0;
};

struct ClassCountEntry {
  std::string model, dataset;
  int class_label = 0;
  int64_t correct = 0, total = 0;
};

struct EvalReport {
  std::vector<MatrixEntry> matrix;
  std::vector<ConfidenceEntry> confidence;
  std::vector<ClassCountEntry> class_counts;
  nlohmann::json provenance = nlohmann::json::object();
};

// Per (class, correctness) arithmetic means of the max softmax probability.
// Empty buckets are absent from the result, not zero-filled.
inline std::vector<ConfidenceEntry> confidence_report(const std::vector<PerExample>& records,
                                                      int classes = 10) {
  std::vector<double> sum(static_cast<size_t>(classes) * 2, 0.0);
  std::vector<int64_t> count(static_cast<size_t>(classes) * 2, 0);
  for (const PerExample& r : records) {
    const size_t slot = static_cast<size_t>(r.label) * 2 + (r.prediction == r.label ? 0 : 1);
    sum[slot] += r.max_prob;
    count[slot] += 1;
  }
  std::vector<ConfidenceEntry> out;
  for (int c = 0; c < classes; ++c) {
    for (int b = 0; b < 2; ++b) {
      const size_t slot = static_cast<size_t>(c) * 2 + static_cast<size_t>(b);
      if (count[slot] == 0) continue;
      ConfidenceEntry e;
      e.class_label = c;
      e.correct = b == 0;
      e.mean_max_prob = sum[slot] / static_cast<double>(count[slot]);
      e.count = count[slot];
      out.push_back(e);
    }
  }
  return out;
}

// Per-class correct and total prediction counts.
inline std::vector<ClassCountEntry> class_count_report(const std::vector<PerExample>& records,
                                                       int classes = 10) {
  std::vector<ClassCountEntry> out(static_cast<size_t>(classes));
  for (int c = 0; c < classes; ++c) out[static_cast<size_t>(c)].class_label = c;
  for (const PerExample& r : records) {
    auto& e = out[static_cast<size_t>(r.label)];
    e.total += 1;
    if (r.prediction == r.label) e.correct += 1;
  }
  return out;
}

// Evaluates every snapshot on every dataset and assembles the full report.
// Rows are ordered (model index, dataset index), so the output is a pure
// function of the inputs.
inline EvalReport full_report(std::vector<ModelSnapshot>& snapshots,
                              const std::vector<LabeledDataset>& datasets) {
  EvalReport report;
  nlohmann::json prov_models = nlohmann::json::array();
  nlohmann::json prov_datasets = nlohmann::json::array();
  for (const LabeledDataset& ds : datasets)
    prov_datasets.push_back({{"dataset", ds.id()},
                             {"split", ds.provenance.split},
                             {"scheme", scheme_name(ds.provenance.scheme)},
                             {"seed", ds.provenance.seed},
                             {"count", ds.size()}});
  for (ModelSnapshot& snap : snapshots) {
    Model model = restore_model(snap);
    prov_models.push_back({{"model", snap.model_id},
                           {"trained_on", snap.trained_on},
                           {"config", snap.config},
                           {"best_val_accuracy", snap.best_val_accuracy},
                           {"epoch_of_best", snap.epoch_of_best}});
    for (const LabeledDataset& ds : datasets) {
      const EvalResult r = evaluate(model, ds);
      report.matrix.push_back({snap.model_id, ds.id(), r.accuracy});
      for (ConfidenceEntry e : confidence_report(r.records, static_cast<int>(snap.config.classes))) {
        e.model = snap.model_id;
        e.dataset = ds.id();
        report.confidence.push_back(e);
      }
      for (ClassCountEntry e : class_count_report(r.records, static_cast<int>(snap.config.classes))) {
        e.model = snap.model_id;
        e.dataset = ds.id();
        report.class_counts.push_back(e);
      }
    }
  }
  report.provenance = {{"models", prov_models}, {"datasets", prov_datasets}};
  return report;
}

// Matrix only, per the narrow contract.
inline std::vector<MatrixEntry> accuracy_matrix(std::vector<ModelSnapshot>& snapshots,
                                                const std::vector<LabeledDataset>& datasets) {
  std::vector<MatrixEntry> out;
  for (ModelSnapshot& snap : snapshots) {
    Model model = restore_model(snap);
    for (const LabeledDataset& ds : datasets)
      out.push_back({snap.model_id, ds.id(), evaluate(model, ds).accuracy});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. Numbers are rounded to 4 decimal places at emission;
// internal values keep full precision.

inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j{{"matrix", nlohmann::json::array()},
                   {"confidence", nlohmann::json::array()},
                   {"class_counts", nlohmann::json::array()},
                   {"provenance", report.provenance}};
  for (const MatrixEntry& e : report.matrix)
    j["matrix"].push_back({{"model", e.model}, {"dataset", e.dataset}, {"accuracy", round4(e.accuracy)}});
  for (const ConfidenceEntry& e : report.confidence)
    j["confidence"].push_back({{"model", e.model},
                               {"dataset", e.dataset},
                               {"class", e.class_label},
                               {"bucket", e.correct ? "correct" : "incorrect"},
                               {"mean_max_prob", round4(e.mean_max_prob)},
                               {"count", e.count}});
  for (const ClassCountEntry& e : report.class_counts)
    j["class_counts"].push_back({{"model", e.model},
                                 {"dataset", e.dataset},
                                 {"class", e.class_label},
                                 {"correct", e.correct},
                                 {"total", e.total}});
  return j;
}

inline void emit_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path);
  os << report_to_json(report).dump(2) << "\n";
  if (!os) throw FormatError("write failure on " + path);
}

// One CSV file per table under dir: matrix.csv (wide, one row per model),
// confidence.csv and class_counts.csv (long form).
inline void emit_report_csv(const EvalReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  char buf[32];

  std::vector<std::string> models, datasets;
  for (const MatrixEntry& e : report.matrix) {
    if (std::find(models.begin(), models.end(), e.model) == models.end()) models.push_back(e.model);
    if (std::find(datasets.begin(), datasets.end(), e.dataset) == datasets.end()) datasets.push_back(e.dataset);
  }
  {
    std::ofstream os((fs::path(dir) / "matrix.csv").string());
    if (!os) throw FormatError("cannot write matrix.csv in " + dir);
    os << "model";
    for (const std::string& d : datasets) os << "," << d;
    os << "\n";
    for (const std::string& m : models) {
      os << m;
      for (const std::string& d : datasets) {
        double acc = 0.0;
        for (const MatrixEntry& e : report.matrix)
          if (e.model == m && e.dataset == d) acc = e.accuracy;
        std::snprintf(buf, sizeof(buf), "%.4f", acc);
        os << "," << buf;
      }
      os << "\n";
    }
  }
  {
    std::ofstream os((fs::path(dir) / "confidence.csv").string());
    if (!os) throw FormatError("cannot write confidence.csv in " + dir);
    os << "model,dataset,class,bucket,mean_max_prob,count\n";
    for (const ConfidenceEntry& e : report.confidence) {
      std::snprintf(buf, sizeof(buf), "%.4f", e.mean_max_prob);
      os << e.model << "," << e.dataset << "," << e.class_label << "," << (e.correct ? "correct" : "incorrect")
         << "," << buf << "," << e.count << "\n";
    }
  }
  {
    std::ofstream os((fs::path(dir) / "class_counts.csv").string());
    if (!os) throw FormatError("cannot write class_counts.csv in " + dir);
    os << "model,dataset,class,correct,total\n";
    for (const ClassCountEntry& e : report.class_counts)
      os << e.model << "," << e.dataset << "," << e.class_label << "," << e.correct << "," << e.total << "\n";
  }
}

}  // namespace chroma
