// chroma: colorized-digit dataset generation, CNN training, and
// cross-distribution evaluation from one binary.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "chroma/experiment.hpp"

namespace {

std::string default_data_dir() {
  const char* env = std::getenv("CHROMA_DATA_DIR");
  return env ? env : ".";
}

chroma::ColorScheme scheme_from_flag(const std::string& flag) {
  if (flag == "green") return chroma::ColorScheme::GreenOnly;
  if (flag == "single") return chroma::ColorScheme::RandomSingleChannel;
  if (flag == "thirds") return chroma::ColorScheme::HorizontalThirds;
  throw CLI::ValidationError("--scheme", "unknown scheme \"" + flag + "\"");
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= csv.size()) {
    const size_t comma = csv.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(csv.substr(start));
      break;
    }
    out.push_back(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"colorized digit experiments: data generation, training, evaluation"};
  app.require_subcommand(1);

  // --- gen-data ----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "colorize an IDX source into a dataset container");
  std::string gen_source = "mnist", gen_scheme = "green", gen_split = "train", gen_out;
  std::string gen_data_dir = default_data_dir();
  uint64_t gen_seed = 42;
  int64_t gen_val_size = 5000;
  bool gen_column_bands = false;
  gen->add_option("--source", gen_source, "idx source")->check(CLI::IsMember({"mnist", "fashionmnist"}));
  gen->add_option("--scheme", gen_scheme, "colorization scheme")
      ->check(CLI::IsMember({"green", "single", "thirds"}));
  gen->add_option("--split", gen_split, "data split")->check(CLI::IsMember({"train", "val", "test"}));
  gen->add_option("--seed", gen_seed, "colorization seed");
  gen->add_option("--out", gen_out, "output container path")->required();
  gen->add_option("--data-dir", gen_data_dir, "directory holding <source>/ IDX files (default $CHROMA_DATA_DIR)");
  gen->add_option("--val-size", gen_val_size, "validation images held out from the train file tail");
  gen->add_flag("--column-bands", gen_column_bands, "split thirds into column bands instead of row bands");

  // --- train -------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train a model on a dataset container");
  std::string tr_data, tr_val, tr_out, tr_norm = "batch", tr_input = "plain3", tr_optimizer = "adam";
  float tr_dropout_prob = 0.5f, tr_lr = 1e-3f, tr_momentum = 0.9f;
  int tr_epochs = 50;
  int64_t tr_batch = 128;
  uint64_t tr_seed = 1, tr_shuffle_seed = 7;
  bool tr_per_sample = false;
  tr->add_option("--data", tr_data, "training container")->required();
  tr->add_option("--val", tr_val, "validation container")->required();
  tr->add_option("--norm", tr_norm, "normalization kind")
      ->check(CLI::IsMember({"batch", "layer", "instance", "none"}));
  tr->add_option("--input", tr_input, "input stage")->check(CLI::IsMember({"plain3", "gray4"}));
  tr->add_option("--dropout-prob", tr_dropout_prob, "gray4 channel-dropout probability");
  tr->add_flag("--per-sample-mask", tr_per_sample, "draw the dropout mask per sample instead of per batch");
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--batch", tr_batch, "batch size");
  tr->add_option("--optimizer", tr_optimizer, "optimizer")->check(CLI::IsMember({"adam", "sgd"}));
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--momentum", tr_momentum, "sgd momentum");
  tr->add_option("--seed", tr_seed, "model init seed");
  tr->add_option("--shuffle-seed", tr_shuffle_seed, "epoch shuffle seed");
  tr->add_option("--out", tr_out, "snapshot output path")->required();

  // --- eval-matrix -------------------------------------------------------
  auto* ev = app.add_subcommand("eval-matrix", "evaluate snapshots across dataset containers");
  std::vector<std::string> ev_snapshots, ev_datasets;
  std::string ev_out = "report.json", ev_csv_dir;
  ev->add_option("--snapshots", ev_snapshots, "snapshot files")->required()->expected(-1);
  ev->add_option("--datasets", ev_datasets, "dataset containers")->required()->expected(-1);
  ev->add_option("--out", ev_out, "report JSON path");
  ev->add_option("--csv-dir", ev_csv_dir, "also emit CSV tables into this directory");

  // --- reproduce ---------------------------------------------------------
  auto* rp = app.add_subcommand("reproduce", "one-shot pipeline: datasets, models, report");
  std::string rp_source = "mnist", rp_schemes = "green,single,thirds", rp_norms = "batch";
  std::string rp_input = "plain3", rp_scale = "desk", rp_out_dir = "reproduce-out";
  std::string rp_data_dir = default_data_dir(), rp_csv_dir;
  float rp_dropout_prob = 0.5f;
  uint64_t rp_seed = 42;
  int64_t rp_subset = 10000, rp_val_subset = 2000, rp_batch = 128;
  int rp_epochs = -1, rp_jobs = 1;
  rp->add_option("--source", rp_source, "idx source")->check(CLI::IsMember({"mnist", "fashionmnist"}));
  rp->add_option("--schemes", rp_schemes, "comma list of green,single,thirds");
  rp->add_option("--norms", rp_norms, "comma list of batch,layer,instance,none");
  rp->add_option("--input", rp_input, "input stage")->check(CLI::IsMember({"plain3", "gray4"}));
  rp->add_option("--dropout-prob", rp_dropout_prob, "gray4 channel-dropout probability");
  rp->add_option("--scale", rp_scale, "desk (subset) or full")->check(CLI::IsMember({"desk", "full"}));
  rp->add_option("--subset", rp_subset, "desk-scale training subset size");
  rp->add_option("--val-subset", rp_val_subset, "desk-scale validation subset size");
  rp->add_option("--epochs", rp_epochs, "override epoch count (default 10 desk, 50 full)");
  rp->add_option("--batch", rp_batch, "batch size");
  rp->add_option("--seed", rp_seed, "master seed (data, model and shuffle seeds derive from it)");
  rp->add_option("--jobs", rp_jobs, "concurrent trainers");
  rp->add_option("--data-dir", rp_data_dir, "directory holding <source>/ IDX files (default $CHROMA_DATA_DIR)");
  rp->add_option("--out-dir", rp_out_dir, "artifact directory");
  rp->add_option("--csv-dir", rp_csv_dir, "also emit CSV tables into this directory");

  // --- synth-idx ---------------------------------------------------------
  auto* sy = app.add_subcommand("synth-idx", "write a deterministic synthetic digit corpus in IDX format");
  std::string sy_out_dir;
  int sy_train = 6000, sy_test = 1000;
  uint64_t sy_seed = 20240607;
  sy->add_option("--out-dir", sy_out_dir, "directory for the four IDX files")->required();
  sy->add_option("--train-per-class", sy_train, "training images per class");
  sy->add_option("--test-per-class", sy_test, "test images per class");
  sy->add_option("--seed", sy_seed, "corpus seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      const auto source = chroma::DataSource::standard(gen_source, gen_data_dir);
      chroma::BuildOptions opts{gen_val_size, gen_column_bands};
      chroma::LabeledDataset ds =
          chroma::build_dataset(source, gen_split, scheme_from_flag(gen_scheme), gen_seed, opts);
      chroma::write_dataset(ds, gen_out);
      std::cout << "wrote " << gen_out << ": count " << ds.size() << ", scheme "
                << chroma::scheme_name(ds.provenance.scheme) << ", seed " << gen_seed << "\n";
    } else if (tr->parsed()) {
      chroma::LabeledDataset train_set = chroma::read_dataset(tr_data);
      chroma::LabeledDataset val_set = chroma::read_dataset(tr_val);
      chroma::ModelConfig mc;
      mc.norm = chroma::norm_kind_from_name(tr_norm);
      mc.input_stage = tr_input == "gray4" ? chroma::InputStage::gray4 : chroma::InputStage::plain3;
      mc.dropout.prob = tr_dropout_prob;
      mc.dropout.per_sample = tr_per_sample;
      mc.seed = tr_seed;
      chroma::Model model(mc);
      std::cout << "model parameters: " << model.param_count() << "\n";
      chroma::TrainConfig tc;
      tc.epochs = tr_epochs;
      tc.batch_size = tr_batch;
      tc.optimizer = tr_optimizer == "sgd" ? chroma::OptimizerConfig::sgd_momentum(tr_lr, tr_momentum)
                                           : chroma::OptimizerConfig::adam(tr_lr);
      tc.shuffle_seed = tr_shuffle_seed;
      tc.log = &std::cout;
      chroma::ModelSnapshot snap = chroma::train(model, train_set, val_set, tc);
      snap.model_id = chroma::model_id_for(train_set.provenance.source, train_set.provenance.scheme, mc.norm,
                                           mc.input_stage, false);
      chroma::save_snapshot(snap, tr_out);
      std::cout << "wrote " << tr_out << ": best val acc " << snap.best_val_accuracy << " at epoch "
                << snap.epoch_of_best << "\n";
    } else if (ev->parsed()) {
      std::vector<chroma::ModelSnapshot> snapshots;
      for (const std::string& p : ev_snapshots) snapshots.push_back(chroma::load_snapshot(p));
      std::vector<chroma::LabeledDataset> datasets;
      for (const std::string& p : ev_datasets) datasets.push_back(chroma::read_dataset(p));
      chroma::EvalReport report = chroma::full_report(snapshots, datasets);
      chroma::emit_report_json(report, ev_out);
      if (!ev_csv_dir.empty()) chroma::emit_report_csv(report, ev_csv_dir);
      for (const chroma::MatrixEntry& e : report.matrix)
        std::cout << e.model << " on " << e.dataset << ": " << chroma::round4(e.accuracy) << "\n";
      std::cout << "wrote " << ev_out << "\n";
    } else if (rp->parsed()) {
      chroma::ExperimentPlan plan;
      plan.source = rp_source;
      plan.schemes.clear();
      for (const std::string& s : split_list(rp_schemes)) plan.schemes.push_back(scheme_from_flag(s));
      plan.norms.clear();
      for (const std::string& s : split_list(rp_norms)) plan.norms.push_back(chroma::norm_kind_from_name(s));
      plan.input_stage = rp_input == "gray4" ? chroma::InputStage::gray4 : chroma::InputStage::plain3;
      plan.dropout.prob = rp_dropout_prob;
      plan.desk = rp_scale == "desk";
      plan.train_subset = rp_subset;
      plan.val_subset = rp_val_subset;
      plan.epochs = rp_epochs > 0 ? rp_epochs : (plan.desk ? 10 : 50);
      plan.batch_size = rp_batch;
      plan.data_seed = rp_seed;
      plan.model_seed = chroma::Rng::derive(rp_seed, 1).next_u64();
      plan.shuffle_seed = chroma::Rng::derive(rp_seed, 2).next_u64();
      plan.jobs = rp_jobs;
      const auto source = chroma::DataSource::standard(rp_source, rp_data_dir);
      chroma::ExperimentResult result = chroma::run_experiment(plan, source, rp_out_dir, &std::cout);
      if (!rp_csv_dir.empty()) chroma::emit_report_csv(result.report, rp_csv_dir);
    } else if (sy->parsed()) {
      chroma::synth::SynthSpec spec;
      spec.train_per_class = sy_train;
      spec.test_per_class = sy_test;
      spec.seed = sy_seed;
      chroma::synth::write_synthetic_idx(sy_out_dir, spec);
      std::cout << "wrote synthetic corpus to " << sy_out_dir << ": " << (10 * sy_train) << " train, "
                << (10 * sy_test) << " test\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
