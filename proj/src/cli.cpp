#include "hyconex/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hyconex/csv.hpp"
#include "hyconex/digest.hpp"
#include "hyconex/error.hpp"
#include "hyconex/evaluate.hpp"
#include "hyconex/persist.hpp"
#include "hyconex/rng.hpp"
#include "hyconex/sampling.hpp"
#include "hyconex/service.hpp"
#include "hyconex/synthetic.hpp"

namespace fs = std::filesystem;

namespace hcx {

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> pretrain_epochs;
  std::optional<int> flow_epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<std::string> scaling;
  bool no_cf_ce = false;
  bool no_proximity = false;
  bool no_plausibility = false;
  bool global_threshold = false;
};

void add_overrides(CLI::App* sub, Overrides& o) {
  sub->add_option("--seed", o.seed, "Random seed");
  sub->add_option("--epochs", o.epochs, "Maximum epochs of the counterfactual phase");
  sub->add_option("--pretrain-epochs", o.pretrain_epochs, "Pre-training epochs");
  sub->add_option("--flow-epochs", o.flow_epochs, "Flow fitting epochs");
  sub->add_option("--batch-size", o.batch_size, "Minibatch size");
  sub->add_option("--lr", o.lr, "Learning rate");
  sub->add_option("--scaling", o.scaling, "Numeric scaling")->check(CLI::IsMember({"standard", "minmax"}));
  sub->add_flag("--no-cf-ce", o.no_cf_ce, "Drop the counterfactual cross-entropy term");
  sub->add_flag("--no-proximity", o.no_proximity, "Drop the proximity term");
  sub->add_flag("--no-plausibility", o.no_plausibility, "Drop the flow plausibility term");
  sub->add_flag("--global-threshold", o.global_threshold, "Use the global density threshold in the flow term");
}

TrainConfig resolve_config(const std::string& path, const Overrides& o) {
  TrainConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("config '" + path + "' is not valid JSON: " + e.what());
    }
    from_json(j, c);
  }
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.pretrain_epochs) c.pretrain_epochs = *o.pretrain_epochs;
  if (o.flow_epochs) c.flow_epochs = *o.flow_epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.lr) c.lr = *o.lr;
  if (o.scaling) c.scaling = *o.scaling == "minmax" ? Scaling::MinMax : Scaling::Standard;
  if (o.no_cf_ce) c.toggles.counterfactual_ce = false;
  if (o.no_proximity) c.toggles.proximity = false;
  if (o.no_plausibility) c.toggles.plausibility = false;
  if (o.global_threshold) c.per_class_threshold = false;
  return c;
}

// Uses the sidecar manifest's schema when one exists, else infers it.
RawDataset load_training_csv(const fs::path& path, const std::string& target) {
  if (fs::exists(manifest_path(path))) {
    const auto manifest = read_manifest(path);
    return load_csv(path, manifest.at("schema").get<Schema>());
  }
  CsvOptions options;
  options.target = target;
  return load_csv(path, options);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

fs::path sibling_with_suffix(const fs::path& csv, const std::string& suffix) {
  return csv.parent_path() / (csv.stem().string() + suffix + csv.extension().string());
}

nlohmann::json validation_json(const ValidationMetrics& m) {
  return {{"accuracy", m.accuracy}, {"validity", m.validity}, {"mean_l2", m.mean_l2}, {"p_plaus", m.p_plaus}};
}

// --- subcommands -------------------------------------------------------------

struct GenDataArgs {
  std::string kind;
  std::size_t n = 2000;
  double noise = 0.1;
  std::uint64_t seed = 0;
  int classes = 3;
  int dim = 2;
  double test_fraction = 0.2;
  std::string out;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  RawDataset data = a.kind == "moons" ? make_moons(a.n, a.noise, a.seed) : make_blobs(a.n, a.classes, a.seed, a.dim);
  const fs::path path(a.out);
  nlohmann::json extra{{"generator", a.kind}, {"n", a.n},       {"seed", a.seed},
                       {"test_fraction", a.test_fraction}};
  if (a.kind == "moons") extra["noise"] = a.noise;
  else extra["classes"] = a.classes, extra["dim"] = a.dim;
  if (a.test_fraction > 0.0) {
    auto [train, test] = split_train_test(data, a.test_fraction, hash_key(a.seed, 0x7e57ULL));
    const fs::path test_path = sibling_with_suffix(path, "_test");
    write_csv(train, path);
    write_csv(test, test_path);
    extra["split"] = "train";
    write_manifest(path, data.schema, extra);
    extra["split"] = "test";
    write_manifest(test_path, data.schema, extra);
    out << "wrote " << path.string() << " (" << train.size() << " rows) and " << test_path.string() << " ("
        << test.size() << " rows)\n";
  } else {
    write_csv(data, path);
    extra["split"] = "all";
    write_manifest(path, data.schema, extra);
    out << "wrote " << path.string() << " (" << data.size() << " rows)\n";
  }
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string log;
  std::string target;
  bool balance = false;
  bool quiet = false;
  Overrides overrides;
};

int train_cmd(const TrainArgs& a, std::ostream& out) {
  const TrainConfig config = resolve_config(a.config, a.overrides);
  RawDataset data = load_training_csv(a.data, a.target);
  if (a.balance) data = downsample_balance(data, hash_key(config.seed, 0xba1aULL));
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write training log '" + log_path.string() + "'");
  std::string log_text;
  auto write_record = [&](const nlohmann::json& r) {
    const std::string line = r.dump() + "\n";
    log << line;
    log.flush();
    log_text += line;
  };
  write_record({{"phase", "config"}, {"config", config}, {"data", a.data}, {"rows", data.size()}});
  auto sink = [&](const nlohmann::json& r) {
    write_record(r);
    if (a.quiet) return;
    const auto phase = r.at("phase").get<std::string>();
    if (phase == "train") {
      out << "epoch " << r["epoch"] << "  loss " << r["loss"] << "  validity " << r["validity"] << "  p_plaus "
          << r["p_plaus"] << "  l2 " << r["mean_l2"] << '\n';
    } else if (phase == "flow") {
      out << "flow fitted, final nll " << r["final_nll"] << '\n';
    } else if (phase == "pretrain" && (r["epoch"].get<int>() + 1) % 10 == 0) {
      out << "pretrain epoch " << r["epoch"] << "  loss " << r["loss"] << "  val accuracy " << r["val_accuracy"] << '\n';
    }
  };
  FitResult fit = fit_model(data, config, sink);
  ModelBundle bundle;
  bundle.model = std::move(fit.model);
  bundle.metadata = {{"data", a.data},
                     {"rows", data.size()},
                     {"balanced", a.balance},
                     {"validation", validation_json(fit.validation)},
                     {"pretrain_accuracy", fit.pretrain_accuracy},
                     {"best_epoch", fit.best_epoch},
                     {"gates_passed", fit.gates_passed},
                     {"log_sha256", sha256_hex(log_text)}};
  const auto header = save_bundle(bundle, a.out);
  out << "saved " << a.out << "  hash " << header.at("hash").get<std::string>() << '\n';
  out << "validation: accuracy " << fit.validation.accuracy << "  validity " << fit.validation.validity
      << "  p_plaus " << fit.validation.p_plaus << "  mean_l2 " << fit.validation.mean_l2 << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string report;
  std::string split = "all";
  std::size_t wachter = 0;
  bool no_outliers = false;
};

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const ModelBundle bundle = load_bundle(a.model);
  const Model& model = bundle.model;
  RawDataset raw = load_csv(a.data, model.schema());
  if (a.split == "validation") {
    raw = split_train_test(raw, model.config.validation_fraction, hash_key(model.config.seed, 0xda7aULL)).second;
    const Dataset val = model.prep.encode(raw);
    const ValidationMetrics m = validation_metrics(model.net, model.flow, model.thresholds, val);
    const nlohmann::json j = validation_json(m);
    out << j.dump(2) << '\n';
    const auto& stored = bundle.metadata.value("validation", nlohmann::json());
    out << (stored == j ? "matches the training log\n" : "differs from the training log\n");
    if (!a.report.empty()) {
      ensure_dir(a.report);
      write_text(fs::path(a.report) / "validation.json", j.dump(2) + "\n");
    }
    return kExitOk;
  }
  const Dataset test = model.prep.encode(raw);
  EvalOptions options;
  options.outlier_scores = !a.no_outliers;
  options.iso_seed = model.config.seed;
  Evaluation ev = evaluate(model, test, options);
  std::vector<std::pair<std::string, CFReport>> rows{{"HyConEx", ev.cf}};
  nlohmann::json report{{"model", a.model},
                        {"model_hash", hash_model(bundle)},
                        {"data", a.data},
                        {"config", model.config},
                        {"classification", to_json(ev.classif)},
                        {"counterfactuals", to_json(ev.cf)}};
  if (a.wachter > 0) {
    const std::size_t n = std::min<std::size_t>(a.wachter, test.size());
    CounterfactualBatch wb;
    wb.num_classes = ev.batch.num_classes;
    wb.x = test.x.topRows(static_cast<Eigen::Index>(n));
    std::vector<RowVector> cfs;
    const double secs = timed([&] {
      for (std::size_t e = 0; e < ev.batch.size() && static_cast<std::size_t>(ev.batch.source[e]) < n; ++e) {
        const auto r = wachter_baseline(model.net, test.x.row(ev.batch.source[e]), ev.batch.target[e]);
        cfs.push_back(r.x);
        wb.source.push_back(ev.batch.source[e]);
        wb.target.push_back(ev.batch.target[e]);
        wb.valid.push_back(r.valid ? 1 : 0);
      }
    });
    wb.cf.resize(static_cast<Eigen::Index>(cfs.size()), test.x.cols());
    for (std::size_t i = 0; i < cfs.size(); ++i) wb.cf.row(static_cast<Eigen::Index>(i)) = cfs[i];
    wb.unprojected = wb.cf;
    wb.valid_unprojected = wb.valid;
    wb.log_density = model.flow.log_prob(wb.cf, wb.target);
    std::unique_ptr<LofIndex> lof;
    std::unique_ptr<IsoForest> iso;
    if (options.outlier_scores && model.reference.rows() > options.lof_k) {
      lof = std::make_unique<LofIndex>(model.reference, options.lof_k);
      iso = std::make_unique<IsoForest>(model.reference, options.iso_seed, options.iso_trees);
    }
    const CFReport wr = cf_report(wb, test.groups, model.thresholds.global, lof.get(), iso.get(), secs);
    rows.emplace_back("Wachter(" + std::to_string(n) + ")", wr);
    report["wachter"] = to_json(wr);
  }
  const std::string table = format_classif(ev.classif) + format_cf_table(rows);
  out << table;
  if (!a.report.empty()) {
    const fs::path dir(a.report);
    ensure_dir(dir);
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "report.txt", table);
    std::ofstream csv(dir / "counterfactuals.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write counterfactual export");
    write_counterfactual_csv(csv, model.schema(), to_sets(ev.batch, model.prep));
    out << "report written to " << dir.string() << '\n';
  }
  return kExitOk;
}

struct ExplainArgs {
  std::string model;
  std::string data;
  std::size_t row = 0;
  std::string features;
};

int explain_cmd(const ExplainArgs& a, std::ostream& out) {
  const ModelBundle bundle = load_bundle(a.model);
  const Model& model = bundle.model;
  RawRow row;
  if (!a.features.empty()) {
    const Service service(bundle);
    nlohmann::json request;
    try {
      request = nlohmann::json::parse(a.features);
    } catch (const nlohmann::json::exception&) {
      throw DataError("--features is not valid JSON");
    }
    const HttpResponse r = service.predict(request);
    if (r.status != 200) throw DataError(r.body.at("message").get<std::string>());
    out << r.body.dump(2) << '\n';
    return kExitOk;
  }
  if (a.data.empty()) throw DataError("explain needs --data with --row, or --features");
  const RawDataset raw = load_csv(a.data, model.schema());
  if (a.row >= raw.size()) {
    throw DataError("row " + std::to_string(a.row) + " is out of range (" + std::to_string(raw.size()) + " rows)");
  }
  const CounterfactualSet set = model.explain(raw.rows[a.row]);
  nlohmann::json j = to_json(model.schema(), set);
  j["row"] = a.row;
  j["true_label"] = model.schema().class_labels[static_cast<std::size_t>(raw.labels[a.row])];
  out << j.dump(2) << '\n';
  return kExitOk;
}

struct AblateArgs {
  std::string config;
  std::string data;
  std::string test;
  std::string out;
  std::string target;
  Overrides overrides;
};

int ablate_cmd(const AblateArgs& a, std::ostream& out) {
  const TrainConfig config = resolve_config(a.config, a.overrides);
  const RawDataset data = load_training_csv(a.data, a.target);
  RawDataset train = data, test;
  if (a.test.empty()) {
    std::tie(train, test) = split_train_test(data, 0.2, hash_key(config.seed, 0x7e57ULL));
  } else {
    test = load_csv(a.test, data.schema);
  }
  EvalOptions options;
  options.iso_seed = config.seed;
  const auto rows = ablation_matrix(config, train, test, options, [&out](const AblationRow& r) {
    out << r.name << (r.ok ? " done" : " failed: " + r.error) << '\n';
  });
  std::vector<std::pair<std::string, CFReport>> table;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    if (r.ok) {
      table.emplace_back(r.name, r.eval.cf);
      j.push_back({{"name", r.name}, {"toggles", r.toggles}, {"classification", to_json(r.eval.classif)},
                   {"counterfactuals", to_json(r.eval.cf)}});
    } else {
      j.push_back({{"name", r.name}, {"toggles", r.toggles}, {"error", r.error}});
    }
  }
  const std::string text = format_cf_table(table);
  out << text;
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_text(fs::path(a.out) / "ablation.json", nlohmann::json{{"config", config}, {"rows", j}}.dump(2) + "\n");
    write_text(fs::path(a.out) / "ablation.txt", text);
  }
  for (const auto& r : rows) {
    if (!r.ok) return kExitDivergence;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interpretable hypernetwork classifier with built-in counterfactual explanations", "hyconex"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV plus manifest");
  gen_cmd->add_option("kind", gen.kind, "moons or blobs")->required()->check(CLI::IsMember({"moons", "blobs"}));
  gen_cmd->add_option("--n", gen.n, "Number of rows")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Moons noise")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Blob count")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Blob dimension")->capture_default_str();
  gen_cmd->add_option("--test-fraction", gen.test_fraction, "Held-out share written to <out>_test.csv (0: none)")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.99));
  gen_cmd->add_option("--out", gen.out, "Output CSV")->required();

  TrainArgs tr;
  auto* train_sub = app.add_subcommand("train", "Train a model bundle");
  train_sub->add_option("--config", tr.config, "JSON config file");
  train_sub->add_option("--data", tr.data, "Training CSV")->required();
  train_sub->add_option("--out", tr.out, "Output .hcx bundle")->required();
  train_sub->add_option("--log", tr.log, "Training log (default <out>.log.jsonl)");
  train_sub->add_option("--target", tr.target, "Target column when no manifest exists (default: last)");
  train_sub->add_flag("--balance", tr.balance, "Downsample every class to the minority count");
  train_sub->add_flag("--quiet", tr.quiet, "Only print the summary");
  add_overrides(train_sub, tr.overrides);

  EvalArgs ev;
  auto* eval_sub = app.add_subcommand("eval", "Evaluate a bundle on a CSV");
  eval_sub->add_option("--model", ev.model, "Model bundle")->required();
  eval_sub->add_option("--data", ev.data, "Evaluation CSV")->required();
  eval_sub->add_option("--report", ev.report, "Report directory");
  eval_sub->add_option("--split", ev.split, "all, or validation to recompute the training validation metrics")
      ->check(CLI::IsMember({"all", "validation"}));
  eval_sub->add_option("--wachter", ev.wachter, "Also run the Wachter baseline on the first N rows");
  eval_sub->add_flag("--no-outliers", ev.no_outliers, "Skip LOF and isolation forest");

  ExplainArgs ex;
  auto* explain_sub = app.add_subcommand("explain", "Print the counterfactual set of one row");
  explain_sub->add_option("--model", ex.model, "Model bundle")->required();
  explain_sub->add_option("--data", ex.data, "CSV holding the row");
  explain_sub->add_option("--row", ex.row, "Zero-based row index")->capture_default_str();
  explain_sub->add_option("--features", ex.features, "JSON object of raw feature values instead of --data");

  std::string serve_model, host = "127.0.0.1";
  int port = 8080;
  auto* serve_sub = app.add_subcommand("serve", "Serve predictions and counterfactuals over HTTP");
  serve_sub->add_option("--model", serve_model, "Model bundle (omit to start without one)");
  serve_sub->add_option("--host", host, "Bind address")->capture_default_str();
  serve_sub->add_option("--port", port, "Port")->capture_default_str();

  AblateArgs ab;
  auto* ablate_sub = app.add_subcommand("ablate", "Train and compare the loss-component configurations");
  ablate_sub->add_option("--config", ab.config, "JSON config file");
  ablate_sub->add_option("--data", ab.data, "Training CSV")->required();
  ablate_sub->add_option("--test", ab.test, "Test CSV (default: hold out 20% of --data)");
  ablate_sub->add_option("--out", ab.out, "Output directory");
  ablate_sub->add_option("--target", ab.target, "Target column when no manifest exists");
  add_overrides(ablate_sub, ab.overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return gen_data(gen, out);
    if (train_sub->parsed()) return train_cmd(tr, out);
    if (eval_sub->parsed()) return eval_cmd(ev, out);
    if (explain_sub->parsed()) return explain_cmd(ex, out);
    if (ablate_sub->parsed()) return ablate_cmd(ab, out);
    if (serve_sub->parsed()) {
      const Service service = serve_model.empty() ? Service() : Service(load_bundle(serve_model));
      out << "listening on http://" << host << ':' << port << '\n';
      out.flush();
      serve(service, host, port);
      return kExitOk;
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hcx
