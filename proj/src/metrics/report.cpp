#include <cmath>

#include "dbvae/error.hpp"
#include "dbvae/metrics/metrics.hpp"

namespace dbvae::metrics {

using nlohmann::json;

void MetricsReport::validate() const {
  const auto bounded = [](const std::string& name, double v) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(ErrorKind::kConsistency, "metrics: " + name + " outside [0, 1]");
    }
  };
  const auto non_negative = [](const std::string& name, double v) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorKind::kConsistency, "metrics: " + name + " must be finite and >= 0");
  };
  bounded("factorvae_score", factorvae_score);
  bounded("adapted_mig", adapted_mig);
  bounded("mig_original", mig_original);
  bounded("dci_disentanglement", dci_disentanglement);
  bounded("dci_completeness", dci_completeness);
  if (!std::isfinite(adapted_mig_raw)) throw Error(ErrorKind::kConsistency, "metrics: adapted_mig_raw not finite");
  for (const auto& [f, v] : downstream_accuracy) bounded("downstream_accuracy." + f, v);
  for (const auto& [f, v] : nontriviality) bounded("nontriviality." + f, v);
  for (const auto& [f, v] : consistency) non_negative("consistency." + f, v);
  for (const auto& [f, v] : restrictiveness) non_negative("restrictiveness." + f, v);
}

void to_json(json& j, const MetricsReport& r) {
  j = {{"factorvae_score", r.factorvae_score},
       {"adapted_mig", r.adapted_mig},
       {"adapted_mig_raw", r.adapted_mig_raw},
       {"mig_original", r.mig_original},
       {"dci_disentanglement", r.dci_disentanglement},
       {"dci_completeness", r.dci_completeness},
       {"downstream_accuracy", r.downstream_accuracy},
       {"consistency", r.consistency},
       {"restrictiveness", r.restrictiveness},
       {"nontriviality", r.nontriviality},
       {"info", r.info}};
}

std::vector<std::pair<std::string, double>> flatten(const MetricsReport& r) {
  std::vector<std::pair<std::string, double>> out = {{"factorvae_score", r.factorvae_score},
                                                     {"adapted_mig", r.adapted_mig},
                                                     {"adapted_mig_raw", r.adapted_mig_raw},
                                                     {"mig_original", r.mig_original},
                                                     {"dci_disentanglement", r.dci_disentanglement},
                                                     {"dci_completeness", r.dci_completeness}};
  const std::pair<const char*, const std::map<std::string, double>*> maps[] = {
      {"downstream_accuracy", &r.downstream_accuracy},
      {"consistency", &r.consistency},
      {"restrictiveness", &r.restrictiveness},
      {"nontriviality", &r.nontriviality}};
  for (const auto& [name, values] : maps) {
    for (const auto& [factor, v] : *values) out.emplace_back(std::string(name) + "." + factor, v);
  }
  return out;
}

void from_json(const json& j, MetricsReport& r) {
  try {
    r.factorvae_score = j.at("factorvae_score").get<double>();
    r.adapted_mig = j.at("adapted_mig").get<double>();
    r.adapted_mig_raw = j.at("adapted_mig_raw").get<double>();
    r.mig_original = j.at("mig_original").get<double>();
    r.dci_disentanglement = j.at("dci_disentanglement").get<double>();
    r.dci_completeness = j.at("dci_completeness").get<double>();
    r.downstream_accuracy = j.at("downstream_accuracy").get<std::map<std::string, double>>();
    r.consistency = j.at("consistency").get<std::map<std::string, double>>();
    r.restrictiveness = j.at("restrictiveness").get<std::map<std::string, double>>();
    r.nontriviality = j.at("nontriviality").get<std::map<std::string, double>>();
    r.info = j.value("info", json::object());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("metrics report: ") + e.what());
  }
}

MetricsReport evaluate(model::VaeModel<float>& vae, const EvaluationInputs& inputs, const EvaluationOptions& options) {
  require(inputs.train && inputs.test && inputs.unbiased, "evaluate: train, test and unbiased data are required");
  require(inputs.train->split == datasets::SplitTag::kTrain, "evaluate: downstream probes train on the train split");
  const auto& spec = inputs.unbiased->spec;
  require(inputs.train->spec == spec && inputs.test->spec == spec, "evaluate: splits use different factor specs");

  const CodeTable train = encode_table(vae, *inputs.train);
  const CodeTable test = encode_table(vae, *inputs.test);
  const CodeTable full = encode_table(vae, *inputs.unbiased);

  MetricsReport r;
  Rng fv_rng(derive_seed(options.seed, 10));
  r.factorvae_score = factorvae_score(full, fv_rng, options.factorvae);
  const auto amig = adapted_mig(full, options.bins);
  r.adapted_mig = amig.value;
  r.adapted_mig_raw = amig.raw;
  r.mig_original = mig_original(full, options.bins).value;
  const auto d = dci(full, options.dci);
  r.dci_disentanglement = d.disentanglement;
  r.dci_completeness = d.completeness;
  r.downstream_accuracy = downstream_accuracy(train, test, {0.0, 1e-3, 500});

  const auto encoder = model_code_function(vae, spec, derive_seed(options.seed, 30));
  const auto targets = spec.target_names();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& f = targets[i];
    Rng c_rng(derive_seed(options.seed, 100 + i));
    Rng r_rng(derive_seed(options.seed, 200 + i));
    r.consistency[f] = consistency_estimator(encoder, spec, vae.partition(), f, options.trials, c_rng).value;
    r.restrictiveness[f] = restrictiveness_estimator(encoder, spec, vae.partition(), f, options.trials, r_rng).value;
    r.nontriviality[f] = nontriviality(full, f, options.bins);
  }
  r.info = {{"bins", options.bins},
            {"trials", options.trials},
            {"seed", options.seed},
            {"factorvae", {{"train_votes", options.factorvae.train_votes},
                           {"test_votes", options.factorvae.test_votes},
                           {"samples_per_vote", options.factorvae.samples_per_vote},
                           {"prune_threshold", options.factorvae.prune_threshold}}},
            {"dci_importance", "L1 multinomial logistic probes on standardized codes (not tree ensembles)"},
            {"adapted_mig_block_mi", "max over single dims within the block"},
            {"train_data", inputs.train->id()},
            {"test_data", inputs.test->id()},
            {"unbiased_data", inputs.unbiased->id()}};
  r.validate();
  return r;
}

}  // namespace dbvae::metrics
