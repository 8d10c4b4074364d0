#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyconex/dataset.hpp"
#include "hyconex/flow.hpp"
#include "hyconex/hypernet.hpp"
#include "hyconex/preprocessor.hpp"

namespace hcx {

/// Replaces every categorical block by the one-hot vector of its argmax
/// (lowest index on ties). Numeric coordinates are untouched.
void project_categorical(Matrix& x, const GroupIndex& groups);
[[nodiscard]] RowVector project_categorical(const RowVector& x, const GroupIndex& groups);

struct GenerateOptions {
  bool project = true;    // snap categorical blocks to one-hot
  bool verify = true;     // classify the counterfactuals (one more forward pass)
  bool densities = true;  // attach log p_F(x' | m) when a flow is given
};

/// Counterfactuals for every alternative class of every input. Entries are
/// ordered by input, then by ascending target class.
struct CounterfactualBatch {
  int num_classes = 0;
  Matrix x;
  Matrix weights;               // B x K(D+1)
  Matrix probabilities;         // B x K
  std::vector<int> predicted;   // per input
  std::vector<int> source;      // per entry: input row
  std::vector<int> target;      // per entry: class m
  Matrix unprojected;           // x - W_m
  Matrix cf;                    // after projection
  std::vector<int> cf_predicted;             // empty unless verified
  std::vector<char> valid;                   // cf_predicted == target
  std::vector<char> valid_unprojected;       // same test before projection
  Vector log_density;                        // empty unless computed

  [[nodiscard]] std::size_t size() const { return target.size(); }
  [[nodiscard]] std::size_t inputs() const { return predicted.size(); }
};

/// One hypernetwork evaluation yields W for the whole batch; every
/// alternative class m gets x' = x - W_m with no iterative search.
CounterfactualBatch generate_all(const HyperNet& net, const MafFlow* flow, const Matrix& x, const GroupIndex& groups,
                                 const GenerateOptions& options = {});

struct FeatureDiff {
  std::string column;
  ColumnKind kind = ColumnKind::Numeric;
  double from = 0.0;  // numeric only
  double to = 0.0;
  double delta = 0.0;
  std::string from_category;  // categorical only
  std::string to_category;
  bool changed = false;
};

struct CounterfactualEntry {
  int target = 0;
  RowVector encoded;
  RawRow raw;
  int predicted = -1;
  bool valid = false;
  double log_density = 0.0;
  bool has_density = false;
  std::vector<FeatureDiff> diffs;
};

/// Raw-space view of the counterfactuals of one input.
struct CounterfactualSet {
  RowVector encoded;
  RawRow raw;
  int predicted = 0;
  RowVector probabilities;
  std::vector<CounterfactualEntry> entries;  // K - 1 of them
};

std::vector<FeatureDiff> feature_diffs(const Schema& schema, const RawRow& from, const RawRow& to);
std::vector<CounterfactualSet> to_sets(const CounterfactualBatch& batch, const Preprocessor& prep);

nlohmann::json raw_row_json(const Schema& schema, const RawRow& row);
nlohmann::json to_json(const Schema& schema, const CounterfactualEntry& e);
nlohmann::json to_json(const Schema& schema, const CounterfactualSet& s);

/// One CSV record per (input, target): raw counterfactual values followed by diffs.
void write_counterfactual_csv(std::ostream& out, const Schema& schema, const std::vector<CounterfactualSet>& sets);

struct WachterOptions {
  double c = 0.1;
  double lr = 0.05;
  int steps = 1000;
};

struct WachterResult {
  RowVector x;
  bool valid = false;
  double distance = 0.0;  // squared Euclidean
  int iterations = 0;
};

/// Gradient descent on CE(f(x'; H(x')), target) + C ||x - x'||^2 from x' = x.
/// Returns the closest iterate classified as `target`, or the last iterate flagged invalid.
WachterResult wachter_baseline(const HyperNet& net, const RowVector& x, int target, const WachterOptions& options = {});

}  // namespace hcx
