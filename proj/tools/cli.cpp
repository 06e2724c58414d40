#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dbvae/datasets/bias_rule.hpp"
#include "dbvae/datasets/feedback.hpp"
#include "dbvae/datasets/io.hpp"
#include "dbvae/error.hpp"
#include "dbvae/evalgen/evalgen.hpp"
#include "dbvae/metrics/metrics.hpp"
#include "dbvae/model/checkpoint.hpp"
#include "dbvae/trainer/matrix.hpp"
#include "dbvae/trainer/trainer.hpp"

namespace dbvae::cli {
namespace fs = std::filesystem;
using nlohmann::json;

fs::path output_path(const fs::path& p) {
  const char* root = std::getenv("DBVAE_OUT_ROOT");
  if (p.is_absolute() || root == nullptr || *root == '\0') return p;
  return fs::path(root) / p;
}

namespace {

void must_exist(const fs::path& p, const std::string& flag) {
  if (!fs::exists(p)) throw Error(ErrorKind::kIo, flag + ": no such path " + p.string());
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n') ? ' ' : c;
  }
  return out;
}

int fail(std::string_view kind, const std::string& message) {
  fmt::print(stderr, "error: kind={} msg=\"{}\"\n", kind, escape(message));
  return 2;
}

// A checkpoint flag may name the training directory or the archive itself.
fs::path checkpoint_file(const fs::path& p) {
  must_exist(p, "--checkpoint");
  return fs::is_directory(p) ? p / trainer::kCheckpointFile : p;
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
  std::string family = "glyphs10";
  std::string rule = "none";
  std::string split = "train";
  int n = 0;
  std::uint64_t seed = 1;
  std::string like;
  std::string out;
};

void gen_data(const GenDataArgs& a) {
  datasets::FactorSpec spec;
  if (!a.like.empty()) {
    must_exist(a.like, "--like");
    spec = datasets::read_dataset(a.like).spec;
    require(spec.family == datasets::family_from_string(a.family), "--like: dataset family differs from --family");
  } else {
    spec = datasets::FactorSpec::preset(datasets::family_from_string(a.family), a.seed);
  }
  const auto ds = datasets::generate_split(spec, datasets::BiasRule::parse(a.rule, spec), a.n, a.seed,
                                           datasets::split_from_string(a.split));
  const fs::path out = output_path(a.out);
  datasets::write_dataset(ds, out);
  fmt::print("wrote {} samples to {}\n", ds.size, out.string());
}

// ---- make-feedback ---------------------------------------------------------

struct FeedbackArgs {
  std::string data;
  int budget = 600;
  std::string geometry = "anchor";
  std::vector<std::string> targets;
  std::uint64_t seed = 1;
  std::string out;
};

void make_feedback(const FeedbackArgs& a) {
  must_exist(a.data, "--data");
  datasets::FeedbackOptions fo;
  fo.budget = a.budget;
  fo.geometry = datasets::geometry_from_string(a.geometry);
  fo.targets = a.targets;
  fo.seed = a.seed;
  const auto fs = datasets::build_feedback(datasets::read_dataset(a.data).spec, fo);
  const fs::path out = output_path(a.out);
  datasets::write_feedback(fs, out);
  fmt::print("wrote {} pairs and {} labels to {}\n", fs.pairs.size(), fs.labels.size(), out.string());
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string feedback;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

void train(const TrainArgs& a) {
  must_exist(a.config, "--config");
  must_exist(a.data, "--data");
  auto config = trainer::load_config(a.config);
  if (a.seed) config.seed = *a.seed;
  const auto data = datasets::read_dataset(a.data);
  std::optional<datasets::FeedbackSet> feedback;
  if (config.variant() != trainer::Variant::kBaselineBetaVae) {
    require(!a.feedback.empty(), "--feedback is required unless the config is a beta-VAE baseline");
    must_exist(a.feedback, "--feedback");
    feedback = datasets::read_feedback(a.feedback);
  }
  trainer::TrainOptions to;
  to.out_dir = output_path(a.out);
  to.resume = a.resume;
  to.on_epoch = [&](int epoch, const trainer::LogRow& m) {
    fmt::print(stderr, "epoch {}/{} total {:.4f} reconstruction {:.4f} kl {:.4f}\n", epoch + 1, config.epochs,
               m.loss.total, m.loss.reconstruction, m.loss.kl);
  };
  const auto result = trainer::train(config, data, feedback ? &*feedback : nullptr, to);
  for (const auto& w : result.warnings) fmt::print(stderr, "warning: {}\n", w);
  fmt::print("wrote {}\n", (to.out_dir / trainer::kCheckpointFile).string());
}

// ---- metrics ---------------------------------------------------------------

struct MetricsArgs {
  std::string checkpoint;
  std::string data;
  std::string test;
  std::string unbiased;
  std::string out = "metrics.json";
  std::string aggregate;
  std::uint64_t seed = 1;
  int trials = 1000;
  int bins = 20;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

// Replaces the row with the same config and seed, so reruns stay idempotent.
void upsert_aggregate_row(const fs::path& path, const trainer::CellResult& cell) {
  const fs::path tmp = path.string() + ".tmp";
  trainer::write_aggregate_csv({cell}, tmp);
  std::ifstream fresh(tmp);
  std::string header, row;
  std::getline(fresh, header);
  std::getline(fresh, row);
  fresh.close();
  fs::remove(tmp);

  std::vector<std::string> rows;
  if (fs::exists(path)) {
    std::ifstream in(path);
    std::string existing_header, line;
    std::getline(in, existing_header);
    if (existing_header != header) {
      throw Error(ErrorKind::kConsistency, "aggregate CSV " + path.string() + " has different columns");
    }
    const auto key = split_csv_line(row);
    while (std::getline(in, line)) {
      const auto f = split_csv_line(line);
      if (f.size() > 2 && f[0] == key[0] && f[2] == key[2]) continue;
      rows.push_back(line);
    }
  }
  rows.push_back(row);
  std::ofstream out(path);
  out << header << "\n";
  for (const auto& r : rows) out << r << "\n";
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

void metrics_cmd(const MetricsArgs& a) {
  const fs::path ckpt = checkpoint_file(a.checkpoint);
  must_exist(a.data, "--data");
  const fs::path root(a.data);
  const fs::path test = a.test.empty() ? root / "test" : fs::path(a.test);
  const fs::path unbiased = a.unbiased.empty() ? root / "unbiased" : fs::path(a.unbiased);
  const fs::path train_dir = fs::exists(root / "train") ? root / "train" : root;
  must_exist(test, "--test");
  must_exist(unbiased, "--unbiased");
  const auto train_ds = datasets::read_dataset(train_dir);
  const auto test_ds = datasets::read_dataset(test);
  const auto unbiased_ds = datasets::read_dataset(unbiased);

  auto loaded = model::load_checkpoint(ckpt);
  metrics::EvaluationOptions eo;
  eo.seed = a.seed;
  eo.trials = a.trials;
  eo.bins = a.bins;
  trainer::CellResult cell;
  cell.report = metrics::evaluate(*loaded.model, {&train_ds, &test_ds, &unbiased_ds}, eo);
  const auto config = loaded.extra.at("config").get<trainer::TrainingConfig>();
  cell.config = config.name;
  cell.variant = trainer::to_string(config.variant());
  cell.seed = config.seed;
  cell.status = "done";

  const fs::path out = output_path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_json(cell.report, out);
  write_json({{"config", cell.config}, {"variant", cell.variant}, {"seed", cell.seed}},
             out.parent_path() / trainer::kCellFile);
  const fs::path aggregate = a.aggregate.empty()
                                 ? fs::absolute(out).parent_path().parent_path() / trainer::kAggregateFile
                                 : output_path(a.aggregate);
  upsert_aggregate_row(aggregate, cell);
  fmt::print("wrote {} and a row in {}\n", out.string(), aggregate.string());
}

// ---- eval-grids ------------------------------------------------------------

struct GridArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::vector<int> rows;
  int traverse_row = 0;
  std::vector<int> dims;
};

void eval_grids(const GridArgs& a) {
  must_exist(a.data, "--data");
  auto loaded = model::load_checkpoint(checkpoint_file(a.checkpoint));
  auto& vae = *loaded.model;
  const auto data = datasets::read_dataset(a.data);
  const fs::path out = output_path(a.out);
  fs::create_directories(out);

  std::vector<int> rows = a.rows;
  for (int i = 0; rows.empty() && i < std::min(8, data.size); ++i) rows.push_back(i);
  const auto recon = evalgen::reconstruction_grid(vae, data, rows);
  evalgen::write_artifact(recon.image, recon.sidecar, out / "reconstruction");

  const auto& part = vae.partition();
  if (part.has_block("shape") && part.has_block("color")) {
    const auto hybrid = evalgen::hybrid_grid(vae, data, evalgen::representatives(data, "shape"),
                                             evalgen::representatives(data, "color"));
    evalgen::write_artifact(hybrid.image, hybrid.sidecar, out / "hybrid");
    fmt::print("hybrid palette oracle: {}/{} cells\n", hybrid.correct, hybrid.total);
  }

  std::vector<int> dims = a.dims;
  if (dims.empty()) {
    for (const auto& b : part.blocks()) {
      for (int d = b.begin; d < b.end; ++d) dims.push_back(d);
    }
  }
  const auto trav = evalgen::traversal_grid(vae, data, a.traverse_row, dims, evalgen::traversal_values());
  evalgen::write_artifact(trav.image, trav.sidecar, out / "traversal");
  fmt::print("wrote grids to {}\n", out.string());
}

// ---- report ----------------------------------------------------------------

void report(const std::string& in, const std::string& out_arg) {
  must_exist(in, "--in");
  const fs::path out = out_arg.empty() ? fs::path(in) : output_path(out_arg);
  for (const auto& p : write_report(in, out)) fmt::print("wrote {}\n", p.string());
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Disentangle biased image datasets with a small amount of labelled feedback."};
  app.name("dbvae");
  app.require_subcommand(1);
  app.footer("Relative --out paths resolve under $DBVAE_OUT_ROOT when set.");

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Render a dataset split to a directory.");
  gen->add_option("--family", gd.family, "glyphs10, sprites or scene")->capture_default_str();
  gen->add_option("--rule", gd.rule, "Bias rule: none, diag, reverse or offset:<k>")->capture_default_str();
  gen->add_option("--split", gd.split, "train, test, feedback or unbiased")->capture_default_str();
  gen->add_option("--n", gd.n, "Number of samples")->required();
  gen->add_option("--seed", gd.seed, "Sampling seed; also the palette seed unless --like is given")
      ->capture_default_str();
  gen->add_option("--like", gd.like, "Reuse the factor spec (palette) of an existing dataset");
  gen->add_option("--out", gd.out, "Output directory")->required();

  FeedbackArgs fb;
  auto* feed = app.add_subcommand("make-feedback", "Build match pairs and sparse labels for the target factors.");
  feed->add_option("--data", fb.data, "Dataset whose factor spec the feedback must share")->required();
  feed->add_option("--budget", fb.budget, "Total referenced samples")->capture_default_str();
  feed->add_option("--geometry", fb.geometry, "anchor or random pair layout")->capture_default_str();
  feed->add_option("--targets", fb.targets, "Target factors (default: all)");
  feed->add_option("--seed", fb.seed, "Sampling seed")->capture_default_str();
  feed->add_option("--out", fb.out, "Output directory")->required();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a model; resumable from its checkpoint.");
  trn->add_option("--config", tr.config, "JSON file with the training config fields")->required();
  trn->add_option("--data", tr.data, "Training dataset directory")->required();
  trn->add_option("--feedback", tr.feedback, "Feedback directory (not used by beta-VAE baselines)");
  trn->add_option("--out", tr.out, "Run directory for checkpoint, log and config")->required();
  trn->add_option("--seed", tr.seed, "Overrides the config seed");
  trn->add_flag("--resume", tr.resume, "Continue from the checkpoint in --out");

  MetricsArgs me;
  auto* met = app.add_subcommand("metrics", "Evaluate a checkpoint and record the scores.");
  met->add_option("--checkpoint", me.checkpoint, "Run directory or checkpoint file")->required();
  met->add_option("--data", me.data, "Directory with train/, test/ and unbiased/ splits")->required();
  met->add_option("--test", me.test, "Shifted split (default: <data>/test)");
  met->add_option("--unbiased", me.unbiased, "Split with every combination (default: <data>/unbiased)");
  met->add_option("--out", me.out, "metrics.json path; cell.json is written beside it")->capture_default_str();
  met->add_option("--aggregate", me.aggregate, "Aggregate CSV (default: aggregate.csv one level above --out)");
  met->add_option("--seed", me.seed, "Seed for the sampled estimators")->capture_default_str();
  met->add_option("--trials", me.trials, "Monte-Carlo trials per estimator")->capture_default_str();
  met->add_option("--bins", me.bins, "Histogram bins for mutual information")->capture_default_str();

  GridArgs gr;
  auto* grids = app.add_subcommand("eval-grids", "Write reconstruction, hybrid and traversal grids as PNG + JSON.");
  grids->add_option("--checkpoint", gr.checkpoint, "Run directory or checkpoint file")->required();
  grids->add_option("--data", gr.data, "Dataset to draw source images from (unbiased recommended)")->required();
  grids->add_option("--out", gr.out, "Output directory")->required();
  grids->add_option("--rows", gr.rows, "Rows for the reconstruction grid (default: first 8)");
  grids->add_option("--traverse-row", gr.traverse_row, "Seed image for traversals")->capture_default_str();
  grids->add_option("--dims", gr.dims, "Latent dims to traverse (default: every target block dim)");

  std::string report_in, report_out;
  auto* rep = app.add_subcommand("report", "Aggregate result cells into CSVs and SVG plots.");
  rep->add_option("--in", report_in, "Results directory holding one subdirectory per cell")->required();
  rep->add_option("--out", report_out, "Output directory (default: --in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(to_string(ErrorKind::kInvalidArgument), e.what());
  }

  try {
    if (gen->parsed()) gen_data(gd);
    if (feed->parsed()) make_feedback(fb);
    if (trn->parsed()) train(tr);
    if (met->parsed()) metrics_cmd(me);
    if (grids->parsed()) eval_grids(gr);
    if (rep->parsed()) report(report_in, report_out);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}

}  // namespace dbvae::cli
