#include <catch2/catch_amalgamated.hpp>

#include "chroma/analysis.hpp"
#include "support/fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace chroma;

TEST_CASE("confidence report means and bucket omission", "[analysis]") {
  std::vector<PerExample> records = {
      {0, 0, 1.0f}, {0, 0, 1.0f},          // class 0, correct with prob 1
      {1, 1, 0.6f}, {1, 1, 0.8f},          // class 1, correct mean 0.7
      {2, 5, 0.55f},                        // class 2, incorrect only
  };
  auto conf = confidence_report(records, 10);
  REQUIRE(conf.size() == 3);
  CHECK(conf[0].class_label == 0);
  CHECK(conf[0].correct);
  CHECK(conf[0].mean_max_prob == Catch::Approx(1.0));
  CHECK(conf[0].count == 2);
  CHECK(conf[1].class_label == 1);
  CHECK(conf[1].mean_max_prob == Catch::Approx(0.7));
  CHECK_FALSE(conf[2].correct);
  CHECK(conf[2].mean_max_prob == Catch::Approx(0.55));
  // no incorrect bucket for class 0, no correct bucket for class 2, nothing for classes 3..9
}

TEST_CASE("class count report", "[analysis]") {
  std::vector<PerExample> records;
  for (int i = 0; i < 40; ++i) {
    PerExample r;
    r.label = static_cast<uint8_t>(i % 4);
    r.prediction = r.label;  // perfect model
    r.max_prob = 0.9f;
    records.push_back(r);
  }
  auto counts = class_count_report(records, 10);
  REQUIRE(counts.size() == 10);
  for (int c = 0; c < 4; ++c) {
    CHECK(counts[static_cast<size_t>(c)].total == 10);
    CHECK(counts[static_cast<size_t>(c)].correct == 10);
  }
  for (int c = 4; c < 10; ++c) CHECK(counts[static_cast<size_t>(c)].total == 0);
}

TEST_CASE("a chance model stays inside the binomial band per class", "[analysis]") {
  Rng rng(404);
  std::vector<PerExample> records;
  const int n_per_class = 1000;
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < n_per_class; ++i) {
      PerExample r;
      r.label = static_cast<uint8_t>(c);
      r.prediction = static_cast<uint8_t>(rng.uniform_u32(10));
      r.max_prob = 0.1f;
      records.push_back(r);
    }
  auto counts = class_count_report(records, 10);
  // 99 percent band: n*p +- 2.576*sqrt(n*p*(1-p))
  const double expect = n_per_class * 0.1;
  const double band = 2.576 * std::sqrt(n_per_class * 0.1 * 0.9);
  for (const auto& e : counts) {
    CHECK(e.total == n_per_class);
    CHECK(e.correct > expect - band);
    CHECK(e.correct < expect + band);
  }
}

namespace {

struct ReportFixture {
  std::vector<ModelSnapshot> snapshots;
  std::vector<LabeledDataset> datasets;
  EvalReport report;

  ReportFixture() {
    const auto& source = testsupport::mini_source();
    const auto opts = testsupport::mini_options();
    for (ColorScheme scheme :
         {ColorScheme::GreenOnly, ColorScheme::RandomSingleChannel, ColorScheme::HorizontalThirds})
      datasets.push_back(build_dataset(source, "test", scheme, 21, opts));
    for (uint64_t seed = 0; seed < 3; ++seed) {
      ModelConfig cfg;
      cfg.conv_widths = {4, 6, 8};
      cfg.dense_widths = {24, 16};
      cfg.seed = seed;
      Model model(cfg);
      ModelSnapshot snap = capture_snapshot(model);
      snap.model_id = "M" + std::to_string(seed);
      snap.trained_on = "MD1";
      snapshots.push_back(std::move(snap));
    }
    report = full_report(snapshots, datasets);
  }
};

}  // namespace

TEST_CASE("full report covers the cross product and is reproducible", "[analysis]") {
  ReportFixture fx;
  CHECK(fx.report.matrix.size() == 9);
  for (const MatrixEntry& e : fx.report.matrix) {
    CHECK(e.accuracy >= 0.0);
    CHECK(e.accuracy <= 1.0);
  }
  // re-running the narrow matrix op on the same artifacts reproduces the values
  auto matrix = accuracy_matrix(fx.snapshots, fx.datasets);
  REQUIRE(matrix.size() == fx.report.matrix.size());
  for (size_t i = 0; i < matrix.size(); ++i) {
    CHECK(matrix[i].model == fx.report.matrix[i].model);
    CHECK(matrix[i].dataset == fx.report.matrix[i].dataset);
    CHECK(matrix[i].accuracy == fx.report.matrix[i].accuracy);
  }
}

TEST_CASE("per-class rates recompose into the matrix accuracy", "[analysis]") {
  ReportFixture fx;
  for (const MatrixEntry& m : fx.report.matrix) {
    int64_t correct = 0, total = 0;
    for (const ClassCountEntry& e : fx.report.class_counts)
      if (e.model == m.model && e.dataset == m.dataset) {
        correct += e.correct;
        total += e.total;
      }
    CHECK(total == fx.datasets[0].size());
    CHECK(std::fabs(static_cast<double>(correct) / total - m.accuracy) < 1e-6);
  }
}

TEST_CASE("confidence entries match a brute-force recomputation", "[analysis]") {
  ReportFixture fx;
  Model model = restore_model(fx.snapshots[1]);
  EvalResult r = evaluate(model, fx.datasets[2]);
  auto conf = confidence_report(r.records, 10);
  for (const auto& e : conf) {
    double sum = 0.0;
    int64_t count = 0;
    for (const PerExample& rec : r.records) {
      if (rec.label != e.class_label) continue;
      if ((rec.prediction == rec.label) != e.correct) continue;
      sum += rec.max_prob;
      ++count;
    }
    REQUIRE(count == e.count);
    CHECK(std::fabs(sum / count - e.mean_max_prob) < 1e-9);
    CHECK(e.mean_max_prob >= 0.1);
    CHECK(e.mean_max_prob <= 1.0);
  }
}

TEST_CASE("report JSON round trips at emission precision", "[analysis]") {
  ReportFixture fx;
  std::filesystem::create_directories("unit_scratch");
  emit_report_json(fx.report, "unit_scratch/report.json");
  std::ifstream is("unit_scratch/report.json");
  nlohmann::json parsed = nlohmann::json::parse(is);
  REQUIRE(parsed.contains("matrix"));
  REQUIRE(parsed.contains("confidence"));
  REQUIRE(parsed.contains("class_counts"));
  REQUIRE(parsed.contains("provenance"));
  REQUIRE(parsed["matrix"].size() == fx.report.matrix.size());
  for (size_t i = 0; i < fx.report.matrix.size(); ++i) {
    CHECK(parsed["matrix"][i]["model"] == fx.report.matrix[i].model);
    CHECK(parsed["matrix"][i]["dataset"] == fx.report.matrix[i].dataset);
    CHECK(parsed["matrix"][i]["accuracy"].get<double>() == round4(fx.report.matrix[i].accuracy));
  }
  // provenance carries every dataset seed
  for (const auto& ds : parsed["provenance"]["datasets"]) CHECK(ds["seed"].get<uint64_t>() == 21);
  CHECK(parsed["provenance"]["datasets"].size() == 3);
}

TEST_CASE("CSV emission shapes", "[analysis]") {
  ReportFixture fx;
  emit_report_csv(fx.report, "unit_scratch/csv");
  std::ifstream ms("unit_scratch/csv/matrix.csv");
  std::string line;
  int rows = 0;
  std::getline(ms, line);
  CHECK(line == "model,MD1,MD2,MD3");
  while (std::getline(ms, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);  // 1 header + |models| data rows

  std::ifstream cs("unit_scratch/csv/confidence.csv");
  std::getline(cs, line);
  CHECK(line == "model,dataset,class,bucket,mean_max_prob,count");
}
