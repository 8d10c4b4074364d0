#include "hyconex/counterfact.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "hyconex/csv.hpp"
#include "hyconex/error.hpp"

namespace hcx {

void project_categorical(Matrix& x, const GroupIndex& groups) {
  for (const auto& g : groups) {
    if (g.kind != ColumnKind::Categorical) continue;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::Index best = argmax(x.row(i).segment(g.offset, g.width));
      x.row(i).segment(g.offset, g.width).setZero();
      x(i, g.offset + best) = 1.0;
    }
  }
}

RowVector project_categorical(const RowVector& x, const GroupIndex& groups) {
  Matrix m = x;
  project_categorical(m, groups);
  return m.row(0);
}

CounterfactualBatch generate_all(const HyperNet& net, const MafFlow* flow, const Matrix& x, const GroupIndex& groups,
                                 const GenerateOptions& options) {
  const int k = net.config().num_classes;
  const Eigen::Index d = x.cols();
  CounterfactualBatch out;
  out.num_classes = k;
  out.x = x;
  out.weights = net.weights(x);
  const Matrix logits = local_logits(out.weights, x);
  out.probabilities = softmax_rows(logits);
  const auto n = static_cast<std::size_t>(x.rows());
  out.predicted.resize(n);
  const std::size_t entries = n * static_cast<std::size_t>(k - 1);
  out.unprojected.resize(static_cast<Eigen::Index>(entries), d);
  out.source.reserve(entries);
  out.target.reserve(entries);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const int pred = static_cast<int>(argmax(logits.row(ii)));
    out.predicted[i] = pred;
    for (int m = 0; m < k; ++m) {
      if (m == pred) continue;
      out.unprojected.row(row++) = x.row(ii) - out.weights.row(ii).segment(m * (d + 1) + 1, d);
      out.source.push_back(static_cast<int>(i));
      out.target.push_back(m);
    }
  }
  out.cf = out.unprojected;
  bool has_categorical = false;
  for (const auto& g : groups) has_categorical = has_categorical || g.kind == ColumnKind::Categorical;
  if (options.project && has_categorical) project_categorical(out.cf, groups);

  if (options.verify && entries > 0) {
    out.cf_predicted = net.predict(out.cf);
    out.valid.resize(entries);
    for (std::size_t e = 0; e < entries; ++e) out.valid[e] = out.cf_predicted[e] == out.target[e] ? 1 : 0;
    if (options.project && has_categorical) {
      const auto raw_pred = net.predict(out.unprojected);
      out.valid_unprojected.resize(entries);
      for (std::size_t e = 0; e < entries; ++e) out.valid_unprojected[e] = raw_pred[e] == out.target[e] ? 1 : 0;
    } else {
      out.valid_unprojected = out.valid;
    }
  }
  if (options.densities && flow != nullptr && entries > 0) out.log_density = flow->log_prob(out.cf, out.target);
  return out;
}

std::vector<FeatureDiff> feature_diffs(const Schema& schema, const RawRow& from, const RawRow& to) {
  std::vector<FeatureDiff> diffs;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    FeatureDiff f;
    f.column = schema.columns[c].name;
    f.kind = schema.columns[c].kind;
    if (f.kind == ColumnKind::Numeric) {
      f.from = std::get<double>(from[c]);
      f.to = std::get<double>(to[c]);
      f.delta = f.to - f.from;
      f.changed = f.delta != 0.0;
    } else {
      f.from_category = std::get<std::string>(from[c]);
      f.to_category = std::get<std::string>(to[c]);
      f.changed = f.from_category != f.to_category;
    }
    diffs.push_back(std::move(f));
  }
  return diffs;
}

std::vector<CounterfactualSet> to_sets(const CounterfactualBatch& batch, const Preprocessor& prep) {
  const Schema& schema = prep.schema();
  std::vector<CounterfactualSet> sets(batch.inputs());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    sets[i].encoded = batch.x.row(ii);
    sets[i].raw = prep.inverse_transform(sets[i].encoded);
    sets[i].predicted = batch.predicted[i];
    sets[i].probabilities = batch.probabilities.row(ii);
  }
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto ee = static_cast<Eigen::Index>(e);
    CounterfactualSet& s = sets[static_cast<std::size_t>(batch.source[e])];
    CounterfactualEntry entry;
    entry.target = batch.target[e];
    entry.encoded = batch.cf.row(ee);
    entry.raw = prep.inverse_transform(entry.encoded);
    if (!batch.cf_predicted.empty()) {
      entry.predicted = batch.cf_predicted[e];
      entry.valid = batch.valid[e] != 0;
    }
    if (batch.log_density.size() > 0) {
      entry.log_density = batch.log_density(ee);
      entry.has_density = true;
    }
    entry.diffs = feature_diffs(schema, s.raw, entry.raw);
    s.entries.push_back(std::move(entry));
  }
  return sets;
}

nlohmann::json raw_row_json(const Schema& schema, const RawRow& row) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (const auto* v = std::get_if<double>(&row[c])) {
      j[schema.columns[c].name] = *v;
    } else {
      j[schema.columns[c].name] = std::get<std::string>(row[c]);
    }
  }
  return j;
}

namespace {

nlohmann::json diff_json(const FeatureDiff& f) {
  nlohmann::json j{{"column", f.column}, {"changed", f.changed}};
  if (f.kind == ColumnKind::Numeric) {
    j["kind"] = "numeric";
    j["from"] = f.from;
    j["to"] = f.to;
    j["delta"] = f.delta;
  } else {
    j["kind"] = "categorical";
    j["from"] = f.from_category;
    j["to"] = f.to_category;
  }
  return j;
}

std::vector<double> to_vector(const RowVector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json to_json(const Schema& schema, const CounterfactualEntry& e) {
  nlohmann::json diffs = nlohmann::json::array();
  for (const auto& f : e.diffs) diffs.push_back(diff_json(f));
  nlohmann::json j{{"target", e.target},
                   {"target_label", schema.class_labels.at(static_cast<std::size_t>(e.target))},
                   {"features", raw_row_json(schema, e.raw)},
                   {"encoded", to_vector(e.encoded)},
                   {"diffs", std::move(diffs)}};
  if (e.predicted >= 0) {
    j["predicted"] = e.predicted;
    j["predicted_label"] = schema.class_labels.at(static_cast<std::size_t>(e.predicted));
    j["valid"] = e.valid;
  }
  if (e.has_density) j["log_density"] = e.log_density;
  return j;
}

nlohmann::json to_json(const Schema& schema, const CounterfactualSet& s) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : s.entries) entries.push_back(to_json(schema, e));
  return {{"predicted", s.predicted},
          {"predicted_label", schema.class_labels.at(static_cast<std::size_t>(s.predicted))},
          {"probabilities", to_vector(s.probabilities)},
          {"features", raw_row_json(schema, s.raw)},
          {"counterfactuals", std::move(entries)}};
}

void write_counterfactual_csv(std::ostream& out, const Schema& schema, const std::vector<CounterfactualSet>& sets) {
  out << "input,target,predicted,valid,log_density";
  for (const auto& c : schema.columns) out << ',' << c.name;
  for (const auto& c : schema.columns) out << ",diff_" << c.name;
  out << '\n';
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (const auto& e : sets[i].entries) {
      out << i << ',' << schema.class_labels[static_cast<std::size_t>(e.target)] << ','
          << (e.predicted >= 0 ? schema.class_labels[static_cast<std::size_t>(e.predicted)] : std::string()) << ','
          << (e.valid ? 1 : 0) << ',' << (e.has_density ? format_number(e.log_density) : std::string());
      for (const auto& v : e.raw) {
        out << ',';
        if (const auto* d = std::get_if<double>(&v)) out << format_number(*d);
        else out << std::get<std::string>(v);
      }
      for (const auto& f : e.diffs) {
        out << ',';
        if (f.kind == ColumnKind::Numeric) out << format_number(f.delta);
        else if (f.changed) out << f.from_category << "->" << f.to_category;
      }
      out << '\n';
    }
  }
}

WachterResult wachter_baseline(const HyperNet& net, const RowVector& x, int target, const WachterOptions& options) {
  if (target < 0 || target >= net.config().num_classes) throw ShapeError("wachter: target class out of range");
  WachterResult best;
  best.distance = std::numeric_limits<double>::infinity();
  RowVector cur = x;
  const std::vector<int> labels{target};
  for (int step = 0; step <= options.steps; ++step) {
    ad::Tape tape;
    const auto bound = net.params().bind(tape, false);
    const ad::Var xv = tape.variable(Matrix(cur));
    const ad::Var logits = ad::local_logits(net.forward(bound, xv), xv);
    const double dist = (cur - x).squaredNorm();
    if (static_cast<int>(argmax(logits.value().row(0))) == target && dist < best.distance) {
      best.x = cur;
      best.valid = true;
      best.distance = dist;
      best.iterations = step;
    }
    if (step == options.steps) break;
    const ad::Var loss = ad::sum(ad::softmax_cross_entropy(logits, labels)) +
                         options.c * ad::sum(ad::squared_norm_rows(xv - tape.constant(Matrix(x))));
    tape.backward(loss);
    cur -= options.lr * tape.grad(xv).row(0);
    if (!cur.allFinite()) break;
  }
  if (!best.valid) {
    best.x = cur;
    best.distance = (cur - x).squaredNorm();
    best.iterations = options.steps;
  }
  return best;
}

}  // namespace hcx
