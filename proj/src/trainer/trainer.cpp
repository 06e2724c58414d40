#include "dbvae/trainer/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "dbvae/error.hpp"
#include "dbvae/model/checkpoint.hpp"
#include "dbvae/nn/adam.hpp"

namespace dbvae::trainer {

namespace fs = std::filesystem;
using nlohmann::json;
using Mat = model::Matrix<float>;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kProposed: return "proposed";
    case Variant::kNoLabels: return "no_labels";
    case Variant::kBaselineBetaVae: return "baseline_beta_vae";
  }
  return "unknown";
}

TrainingConfig TrainingConfig::proposed(double lambda_mp_pos, double lambda_neg) {
  TrainingConfig c;
  c.name = "proposed";
  c.weights = losses::LossWeights::proposed(lambda_mp_pos, lambda_neg);
  return c;
}

TrainingConfig TrainingConfig::no_labels_ablation(double lambda_mp) {
  TrainingConfig c;
  c.name = "no_labels";
  c.no_labels = true;
  c.weights = {lambda_mp, 0.0, 0.0, 1.0};
  return c;
}

TrainingConfig TrainingConfig::beta_vae(double beta) {
  TrainingConfig c;
  c.name = "beta_vae";
  c.baseline_beta_vae = true;
  c.weights = losses::LossWeights::beta_vae(beta);
  return c;
}

Variant TrainingConfig::variant() const {
  if (baseline_beta_vae) return Variant::kBaselineBetaVae;
  if (no_labels) return Variant::kNoLabels;
  return Variant::kProposed;
}

std::vector<std::string> TrainingConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidArgument, msg); };
  if (no_labels && baseline_beta_vae) fail("config: no_labels and baseline_beta_vae are mutually exclusive");
  if (batch_size < 1) fail("config: batch_size must be positive");
  if (feedback_batch_size < 1) fail("config: feedback_batch_size must be positive");
  if (epochs < 1) fail("config: epochs must be positive");
  if (!(learning_rate > 0.0) || !(probe_learning_rate > 0.0)) fail("config: learning rates must be positive");
  if (latent_dims < 0) fail("config: latent_dims must be >= 0");
  weights.validate();
  datasets::family_from_string(preset);

  std::vector<std::string> warnings;
  switch (variant()) {
    case Variant::kProposed:
      if (!weights.in_recommended_set()) {
        warnings.push_back("weights outside the recommended set (lambda_mp == lambda_pos, lambda_neg in {1, 10})");
      }
      break;
    case Variant::kNoLabels:
      if (weights.lambda_pos != 0.0 || weights.lambda_neg != 0.0) {
        warnings.push_back("no_labels ignores lambda_pos and lambda_neg");
      }
      break;
    case Variant::kBaselineBetaVae:
      if (weights.lambda_mp != 0.0 || weights.lambda_pos != 0.0 || weights.lambda_neg != 0.0) {
        warnings.push_back("baseline_beta_vae ignores the feedback weights");
      }
      break;
  }
  return warnings;
}

void to_json(json& j, const TrainingConfig& c) {
  j = {{"name", c.name},
       {"weights", c.weights},
       {"batch_size", c.batch_size},
       {"feedback_batch_size", c.feedback_batch_size},
       {"epochs", c.epochs},
       {"learning_rate", c.learning_rate},
       {"probe_learning_rate", c.probe_learning_rate},
       {"seed", c.seed},
       {"preset", c.preset},
       {"latent_dims", c.latent_dims},
       {"no_labels", c.no_labels},
       {"baseline_beta_vae", c.baseline_beta_vae}};
}

void from_json(const json& j, TrainingConfig& c) {
  static const std::vector<std::string> known = {"name", "weights", "batch_size", "feedback_batch_size",
                                                 "epochs", "learning_rate", "probe_learning_rate", "seed",
                                                 "preset", "latent_dims", "no_labels", "baseline_beta_vae"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::kInvalidArgument, "config: unknown field '" + key + "'");
    }
  }
  c = TrainingConfig{};
  c.name = j.value("name", c.name);
  if (j.contains("weights")) c.weights = j.at("weights").get<losses::LossWeights>();
  c.batch_size = j.value("batch_size", c.batch_size);
  c.feedback_batch_size = j.value("feedback_batch_size", c.feedback_batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.probe_learning_rate = j.value("probe_learning_rate", c.probe_learning_rate);
  c.seed = j.value("seed", c.seed);
  c.preset = j.value("preset", c.preset);
  c.latent_dims = j.value("latent_dims", c.latent_dims);
  c.no_labels = j.value("no_labels", c.no_labels);
  c.baseline_beta_vae = j.value("baseline_beta_vae", c.baseline_beta_vae);
}

TrainingConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  try {
    return json::parse(in).get<TrainingConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, "config " + path.string() + ": " + e.what());
  }
}

void save_config(const TrainingConfig& config, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write config " + path.string());
  out << json(config).dump(2) << "\n";
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> log_header(const std::vector<std::string>& factors) {
  std::vector<std::string> h = {"epoch", "step", "total", "neg_elbo", "reconstruction", "kl"};
  for (const auto& f : factors) {
    h.push_back("mp_" + f);
    h.push_back("cl_pos_" + f);
    h.push_back("cl_neg_" + f);
  }
  return h;
}

std::vector<LogRow> read_log_csv(const fs::path& path, const std::vector<std::string>& factors) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read training log " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = log_header(factors);
  if (split_csv(line) != header) throw Error(ErrorKind::kConsistency, "training log header mismatch");
  std::vector<LogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw Error(ErrorKind::kFormat, "training log row width mismatch");
    LogRow r;
    r.epoch = std::stoi(cells[0]);
    r.step = std::stol(cells[1]);
    r.loss.total = std::stod(cells[2]);
    r.loss.neg_elbo = std::stod(cells[3]);
    r.loss.reconstruction = std::stod(cells[4]);
    r.loss.kl = std::stod(cells[5]);
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const auto& mp = cells[6 + 3 * i];
      const auto& pos = cells[7 + 3 * i];
      const auto& neg = cells[8 + 3 * i];
      if (!mp.empty()) r.loss.mp[factors[i]] = std::stod(mp);
      if (!pos.empty()) r.loss.cl_pos[factors[i]] = std::stod(pos);
      if (!neg.empty()) r.loss.cl_neg[factors[i]] = std::stod(neg);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

bool all_finite(const losses::LossBreakdown& b) {
  if (!std::isfinite(b.total) || !std::isfinite(b.neg_elbo)) return false;
  for (const auto* m : {&b.mp, &b.cl_pos, &b.cl_neg}) {
    for (const auto& [f, v] : *m) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<std::string> names_of(const std::vector<nn::Parameter<float>*>& params) {
  std::vector<std::string> out;
  for (const auto* p : params) out.push_back(p->name);
  return out;
}

// Feedback pairs of one factor with the labels of both members.
struct FactorFeedback {
  std::string factor;
  std::vector<const datasets::FeedbackPair*> pairs;
  std::vector<int> order;  // reshuffled every epoch
};

}  // namespace

void write_log_csv(const std::vector<LogRow>& rows, const std::vector<std::string>& factors,
                   const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorKind::kIo, "cannot write training log " + path.string());
    const auto header = log_header(factors);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& r : rows) {
      out << r.epoch << "," << r.step << "," << format_double(r.loss.total) << ","
          << format_double(r.loss.neg_elbo) << "," << format_double(r.loss.reconstruction) << ","
          << format_double(r.loss.kl);
      for (const auto& f : factors) {
        for (const auto* m : {&r.loss.mp, &r.loss.cl_pos, &r.loss.cl_neg}) {
          out << ",";
          if (const auto it = m->find(f); it != m->end()) out << format_double(it->second);
        }
      }
      out << "\n";
    }
  }
  fs::rename(tmp, path);
}

std::vector<LogRow> epoch_means(const std::vector<LogRow>& log) {
  std::vector<LogRow> out;
  std::map<int, std::pair<LogRow, int>> acc;
  for (const auto& r : log) {
    auto& [sum, count] = acc[r.epoch];
    sum.epoch = r.epoch;
    sum.step = r.step;
    sum.loss.total += r.loss.total;
    sum.loss.neg_elbo += r.loss.neg_elbo;
    sum.loss.reconstruction += r.loss.reconstruction;
    sum.loss.kl += r.loss.kl;
    for (const auto& [f, v] : r.loss.mp) sum.loss.mp[f] += v;
    for (const auto& [f, v] : r.loss.cl_pos) sum.loss.cl_pos[f] += v;
    for (const auto& [f, v] : r.loss.cl_neg) sum.loss.cl_neg[f] += v;
    ++count;
  }
  for (auto& [epoch, entry] : acc) {
    auto& [sum, count] = entry;
    const double n = count;
    sum.loss.total /= n;
    sum.loss.neg_elbo /= n;
    sum.loss.reconstruction /= n;
    sum.loss.kl /= n;
    for (auto* m : {&sum.loss.mp, &sum.loss.cl_pos, &sum.loss.cl_neg}) {
      for (auto& [f, v] : *m) v /= n;
    }
    out.push_back(sum);
  }
  return out;
}

TrainResult train(const TrainingConfig& config, const datasets::Dataset& data,
                  const datasets::FeedbackSet* feedback, const TrainOptions& options) {
  TrainResult result;
  result.warnings = config.validate();
  const Variant variant = config.variant();
  require(data.split == datasets::SplitTag::kTrain, "train: dataset must be a train split");
  require(data.size >= 1, "train: empty dataset");
  require(datasets::family_from_string(config.preset) == data.spec.family,
          "train: config preset does not match the dataset family");
  const bool uses_feedback = variant != Variant::kBaselineBetaVae;
  const bool uses_probes = variant == Variant::kProposed;
  if (uses_feedback && (feedback == nullptr || feedback->pairs.empty())) {
    throw Error(ErrorKind::kInvalidArgument, "train: feedback is required unless baseline_beta_vae is set");
  }

  losses::LossWeights weights = config.weights;
  if (variant == Variant::kNoLabels) weights.lambda_pos = weights.lambda_neg = 0.0;
  if (variant == Variant::kBaselineBetaVae) weights.lambda_mp = weights.lambda_pos = weights.lambda_neg = 0.0;

  const auto& spec = data.spec;
  const auto targets = spec.target_names();
  model::Architecture arch = model::Architecture::preset(spec.family);
  if (config.latent_dims > 0) arch.latent_dims = config.latent_dims;
  auto partition = model::default_partition(spec, arch.latent_dims);

  result.model = std::make_unique<model::VaeModel<float>>(arch, partition, derive_seed(config.seed, 1));
  if (uses_probes) {
    std::vector<std::pair<std::string, int>> cards;
    for (const auto& t : targets) cards.emplace_back(t, spec.factor(t).cardinality);
    result.probes = std::make_unique<model::ProbeBank<float>>(partition, cards, derive_seed(config.seed, 2));
  }
  auto& vae = *result.model;
  nn::Adam<float> vae_opt(vae.parameters(), {config.learning_rate});
  std::unique_ptr<nn::Adam<float>> probe_opt;
  if (uses_probes) probe_opt = std::make_unique<nn::Adam<float>>(result.probes->parameters(),
                                                                  nn::Adam<float>::Options{config.probe_learning_rate});
  Rng rng(derive_seed(config.seed, 3));

  const bool persist = !options.out_dir.empty();
  const fs::path ckpt_path = options.out_dir / kCheckpointFile;
  const fs::path log_path = options.out_dir / kLogFile;
  int start_epoch = 0;
  long step = 0;
  if (persist) fs::create_directories(options.out_dir);
  if (persist && options.resume && fs::exists(ckpt_path)) {
    auto loaded = model::load_checkpoint(ckpt_path);
    const auto saved = loaded.extra.at("config").get<TrainingConfig>();
    if (json(saved) != json(config)) {
      throw Error(ErrorKind::kConsistency, "resume: checkpoint was written with a different config");
    }
    if (loaded.extra.value("data_id", std::string()) != data.id()) {
      throw Error(ErrorKind::kConsistency, "resume: checkpoint was trained on different data");
    }
    const auto src = loaded.model->parameters();
    const auto dst = vae.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
    model::restore_optimizer(loaded.archive, "vae_opt", vae_opt);
    if (uses_probes) {
      const auto psrc = loaded.probes->parameters();
      const auto pdst = result.probes->parameters();
      for (std::size_t i = 0; i < pdst.size(); ++i) pdst[i]->value = psrc[i]->value;
      model::restore_optimizer(loaded.archive, "probe_opt", *probe_opt);
    }
    rng = loaded.rng;
    start_epoch = loaded.extra.at("epochs_completed").get<int>();
    step = loaded.extra.at("steps").get<long>();
    if (fs::exists(log_path)) {
      for (auto& r : read_log_csv(log_path, targets)) {
        if (r.epoch < start_epoch) result.log.push_back(std::move(r));
      }
    }
  }
  if (persist) save_config(config, options.out_dir / kConfigFile);

  // Feedback images and labels, converted once.
  Mat fb_images;
  std::vector<std::map<std::string, int>> fb_labels;
  std::vector<FactorFeedback> per_factor;
  if (uses_feedback) {
    const auto& samples = feedback->samples;
    require(samples.spec == spec, "train: feedback was built for a different factor spec");
    std::vector<int> all(samples.size);
    std::iota(all.begin(), all.end(), 0);
    fb_images = model::image_batch<float>(samples, all);
    fb_labels.resize(samples.size);
    for (const auto& l : feedback->labels) fb_labels.at(l.idx)[l.factor] = l.value;
    for (const auto& t : targets) {
      FactorFeedback ff{t, feedback->pairs_for(t), {}};
      if (ff.pairs.empty()) continue;
      ff.order.resize(ff.pairs.size());
      per_factor.push_back(std::move(ff));
    }
    require(!per_factor.empty(), "train: feedback has no pairs for any target factor");
  }

  const auto make_pair_batch = [&](FactorFeedback& ff, int step_in_epoch) {
    const int p = config.feedback_batch_size;
    const int n = static_cast<int>(ff.order.size());
    losses::PairBatch<float> b;
    b.factor = ff.factor;
    b.first.resize(fb_images.rows(), p);
    b.second.resize(fb_images.rows(), p);
    for (const auto& t : targets) {
      b.first_labels[t].assign(p, -1);
      b.second_labels[t].assign(p, -1);
    }
    for (int j = 0; j < p; ++j) {
      const auto* pair = ff.pairs[ff.order[(static_cast<long>(step_in_epoch) * p + j) % n]];
      b.first.col(j) = fb_images.col(pair->idx_a);
      b.second.col(j) = fb_images.col(pair->idx_b);
      if (uses_probes) {
        for (const auto& [f, v] : fb_labels[pair->idx_a]) b.first_labels[f][j] = v;
        for (const auto& [f, v] : fb_labels[pair->idx_b]) b.second_labels[f][j] = v;
      }
    }
    if (!uses_probes) {
      b.first_labels.clear();
      b.second_labels.clear();
    }
    return b;
  };

  losses::TotalLossOptions<float> loss_opts;
  loss_opts.backpropagate = true;
  if (uses_probes) {
    loss_opts.before_probes = [&](const Mat& codes, const losses::LabelTable& labels) {
      result.probes->zero_grad();
      losses::probe_update_loss<float>(*result.probes, codes, labels);
      probe_opt->step();
      if (options.on_step) options.on_step({step, "probe", names_of(result.probes->parameters())});
    };
  }

  std::vector<int> perm(data.size);
  const int steps_per_epoch = (data.size + config.batch_size - 1) / config.batch_size;

  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    // Each epoch's order depends only on the rng state, so resuming matches.
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    for (auto& ff : per_factor) {
      std::iota(ff.order.begin(), ff.order.end(), 0);
      rng.shuffle(std::span<int>(ff.order));
    }
    for (int s = 0; s < steps_per_epoch; ++s) {
      const int begin = s * config.batch_size;
      const int count = std::min(config.batch_size, data.size - begin);
      const Mat x = model::image_batch<float>(data, std::span<const int>(perm).subspan(begin, count));
      std::vector<losses::PairBatch<float>> fb;
      for (auto& ff : per_factor) fb.push_back(make_pair_batch(ff, s));

      vae.zero_grad();
      const auto bd = losses::total_loss<float>(vae, result.probes.get(), x, fb, weights, rng, loss_opts);
      if (!all_finite(bd)) {
        throw Error(ErrorKind::kNumeric, "training diverged at epoch " + std::to_string(epoch) + " step " +
                                             std::to_string(step) +
                                             (persist ? "; last good checkpoint kept at " + ckpt_path.string()
                                                      : std::string()));
      }
      vae_opt.step();
      if (options.on_step) options.on_step({step, "vae", names_of(vae.parameters())});
      result.log.push_back({epoch, step, bd});
      ++step;
    }

    if (persist) {
      model::CheckpointRefs refs;
      refs.model = &vae;
      refs.probes = result.probes.get();
      refs.vae_optimizer = &vae_opt;
      refs.probe_optimizer = probe_opt.get();
      refs.rng = &rng;
      refs.extra = {{"config", config}, {"epochs_completed", epoch + 1}, {"steps", step}, {"data_id", data.id()},
                    {"spec", spec}};
      model::save_checkpoint(refs, ckpt_path);
      write_log_csv(result.log, targets, log_path);
    }
    if (options.on_epoch) {
      const auto means = epoch_means(result.log);
      options.on_epoch(epoch, means.back());
    }
  }
  return result;
}

}  // namespace dbvae::trainer
