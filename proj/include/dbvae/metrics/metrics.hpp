#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dbvae/datasets/dataset.hpp"
#include "dbvae/model/partition.hpp"
#include "dbvae/model/vae.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::metrics {

// Posterior means with the generating factors of each row.
struct CodeTable {
  Eigen::MatrixXd codes;    // N x m
  Eigen::MatrixXi factors;  // N x F
  std::vector<datasets::Factor> factor_info;
  model::LatentPartition partition;
  datasets::SplitTag split = datasets::SplitTag::kUnbiased;

  int rows() const { return static_cast<int>(codes.rows()); }
  int dims() const { return static_cast<int>(codes.cols()); }
  int factor_index(const std::string& name) const;
  std::vector<int> target_columns() const;
  // Row counts agree, codes finite, factor values in range; throws kConsistency.
  void validate() const;
};

CodeTable encode_table(model::VaeModel<float>& vae, const datasets::Dataset& data, int batch = 256);

// --- mutual information ------------------------------------------------------

// Uniform-width bins over [min, max]; a constant input maps to bin 0.
std::vector<int> discretize(const Eigen::Ref<const Eigen::VectorXd>& values, int bins);
// Natural-log plug-in estimates from label counts.
double discrete_entropy(std::span<const int> labels);
double discrete_mutual_information(std::span<const int> a, std::span<const int> b);
// I(code dim j; factor column k) for every dim and the given factor columns: m x |columns|.
Eigen::MatrixXd mutual_information_matrix(const CodeTable& table, const std::vector<int>& columns, int bins);

struct MigResult {
  double value = 0.0;  // mean over factors, clipped to [0, 1]
  double raw = 0.0;    // mean before clipping
  std::map<std::string, double> per_factor;
};

// Per target factor: (max MI over dims of its block - max MI over all other
// dims) / H(S_i).
MigResult adapted_mig(const CodeTable& table, int bins = 20);
// Per target factor: gap between the two most informative dims / H(S_i).
MigResult mig_original(const CodeTable& table, int bins = 20);

// Max over block dims of I(z_j; S_i) / H(S_i).
double nontriviality(const CodeTable& table, const std::string& factor, int bins = 20);

// --- FactorVAE score ---------------------------------------------------------

struct FactorVaeOptions {
  int train_votes = 800;
  int test_votes = 200;
  int samples_per_vote = 64;
  double prune_threshold = 0.05;  // relative to the mean std of all dims
};

// Target factors only. Throws kDegenerate with fewer than 2 active dims.
double factorvae_score(const CodeTable& table, Rng& rng, const FactorVaeOptions& options = {});

// --- linear probes -------------------------------------------------------------

struct SoftmaxOptions {
  double l1 = 0.0;
  double l2 = 0.0;
  int iterations = 500;
};

// Multinomial logistic regression on standardized features, fitted by
// accelerated proximal gradient from a zero start (deterministic).
struct SoftmaxModel {
  Eigen::MatrixXd weight;  // classes x d, on standardized features
  Eigen::VectorXd bias;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;  // 0 marks a constant feature

  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const;
  std::vector<int> predict(const Eigen::MatrixXd& x) const;
  double accuracy(const Eigen::MatrixXd& x, std::span<const int> labels) const;
};

SoftmaxModel fit_softmax(const Eigen::MatrixXd& x, std::span<const int> labels, int classes,
                         const SoftmaxOptions& options = {});

// --- DCI --------------------------------------------------------------------

struct DciOptions {
  double l1 = 0.01;
  int iterations = 1000;
};

struct DciResult {
  double disentanglement = 0.0;
  double completeness = 0.0;
  Eigen::MatrixXd importance;  // m x n
};

// Scores from an importance matrix (dims x factors); all zero gives 0, 0.
DciResult dci_from_importance(const Eigen::MatrixXd& importance);
// Importance = summed absolute L1-probe coefficients per dim and target factor.
DciResult dci(const CodeTable& table, const DciOptions& options = {});

// --- downstream accuracy --------------------------------------------------------

// Per target factor: probe on the factor's block codes of `train`, scored on
// `test`. Throws kDegenerate when a train factor has a single class.
std::map<std::string, double> downstream_accuracy(const CodeTable& train, const CodeTable& test,
                                                  const SoftmaxOptions& options = {});

// --- consistency / restrictiveness ----------------------------------------------

// Maps factor rows (one value per factor) to codes (rows x m).
using CodeFunction = std::function<Eigen::MatrixXd(const std::vector<std::vector<int>>& factor_rows)>;

struct EstimatorResult {
  double value = 0.0;
  bool degenerate = false;  // the normalizing code variance is zero
};

// E||e_i(g(S_i, S_rest)) - e_i(g(S_i, S_rest'))||^2 over the variance of the
// block codes: 0 when the block ignores every other factor.
EstimatorResult consistency_estimator(const CodeFunction& encoder, const datasets::FactorSpec& spec,
                                      const model::LatentPartition& partition, const std::string& factor,
                                      int trials, Rng& rng);
// E||e_rest(g(S_i, S_rest)) - e_rest(g(S_i', S_rest))||^2 over the variance of
// the complement codes: 0 when no other dim responds to S_i.
EstimatorResult restrictiveness_estimator(const CodeFunction& encoder, const datasets::FactorSpec& spec,
                                          const model::LatentPartition& partition, const std::string& factor,
                                          int trials, Rng& rng);

// Renders factor rows with the procedural renderer and encodes posterior means.
CodeFunction model_code_function(model::VaeModel<float>& vae, const datasets::FactorSpec& spec,
                                 std::uint64_t render_seed);

// --- counterexample ---------------------------------------------------------------

struct CounterexampleCheck {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct CounterexampleReport {
  std::vector<CounterexampleCheck> checks;
  bool passed() const;
};

// S1, S2 ~ N(0, 1) with X = S1 * S2, S1 labelled by `classes` equal-count
// bins. The trivial encoder z1 = 0, z2 = X reconstructs X and has zero match
// pairing loss on S1, yet carries no information about S1; the positive probe
// loss exposes it while a non-trivial z1 = S1 lowers it.
CounterexampleReport counterexample_suite(int samples = 10000, int classes = 4, std::uint64_t seed = 0);

// --- report ---------------------------------------------------------------------

struct MetricsReport {
  double factorvae_score = 0.0;
  double adapted_mig = 0.0;
  double adapted_mig_raw = 0.0;
  double mig_original = 0.0;
  double dci_disentanglement = 0.0;
  double dci_completeness = 0.0;
  std::map<std::string, double> downstream_accuracy;
  std::map<std::string, double> consistency;
  std::map<std::string, double> restrictiveness;
  std::map<std::string, double> nontriviality;
  nlohmann::json info;

  // Fields finite and bounded ones in [0, 1]; throws kConsistency.
  void validate() const;
};

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

// Scalar fields in a fixed order; per-factor entries become "field.factor".
std::vector<std::pair<std::string, double>> flatten(const MetricsReport& r);

struct EvaluationInputs {
  const datasets::Dataset* train = nullptr;     // biased train split, no feedback samples
  const datasets::Dataset* test = nullptr;      // shifted split
  const datasets::Dataset* unbiased = nullptr;  // every factor combination
};

struct EvaluationOptions {
  int bins = 20;
  int trials = 1000;
  std::uint64_t seed = 0;
  FactorVaeOptions factorvae;
  DciOptions dci;
};

MetricsReport evaluate(model::VaeModel<float>& vae, const EvaluationInputs& inputs,
                       const EvaluationOptions& options = {});

}  // namespace dbvae::metrics
