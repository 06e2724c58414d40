#include "dbvae/trainer/matrix.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "dbvae/datasets/bias_rule.hpp"
#include "dbvae/error.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::trainer {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

std::string cell_name(const TrainingConfig& c, std::uint64_t seed) {
  return c.name + "_s" + std::to_string(seed);
}

struct SeedData {
  datasets::Dataset train;
  datasets::Dataset test;
  datasets::Dataset unbiased;
  datasets::FeedbackSet feedback;
};

SeedData make_seed_data(const MatrixData& d, std::uint64_t seed) {
  const auto spec = datasets::FactorSpec::preset(datasets::family_from_string(d.family), seed);
  SeedData out;
  out.train = datasets::generate_split(spec, datasets::BiasRule::parse(d.train_rule, spec), d.train_size, seed,
                                       datasets::SplitTag::kTrain);
  out.test = datasets::generate_split(spec, datasets::BiasRule::parse(d.test_rule, spec), d.test_size,
                                      derive_seed(seed, 101), datasets::SplitTag::kTest);
  out.unbiased = datasets::generate_split(spec, std::nullopt, d.unbiased_size, derive_seed(seed, 102),
                                          datasets::SplitTag::kUnbiased);
  datasets::FeedbackOptions fo;
  fo.budget = d.feedback_budget;
  fo.geometry = d.geometry;
  fo.seed = derive_seed(seed, 103);
  out.feedback = datasets::build_feedback(spec, fo);
  return out;
}

CellResult load_cell(const fs::path& dir) {
  const json meta = read_json(dir / kCellFile);
  CellResult cell;
  cell.config = meta.at("config").get<std::string>();
  cell.variant = meta.at("variant").get<std::string>();
  cell.seed = meta.at("seed").get<std::uint64_t>();
  cell.dir = dir;
  if (fs::exists(dir / kMetricsFile)) {
    cell.status = "done";
    cell.report = read_json(dir / kMetricsFile).get<metrics::MetricsReport>();
  } else {
    cell.status = "failed";
    cell.error = fs::exists(dir / kErrorFile) ? read_json(dir / kErrorFile).value("message", "") : "incomplete";
  }
  return cell;
}

CellResult run_cell(const TrainingConfig& base, std::uint64_t seed, const SeedData& data, const fs::path& dir,
                    const metrics::EvaluationOptions& evaluation) {
  TrainingConfig config = base;
  config.seed = seed;
  CellResult cell{config.name, to_string(config.variant()), seed, "done", "", {}, dir};
  fs::create_directories(dir);
  write_json({{"config", cell.config}, {"variant", cell.variant}, {"seed", seed}}, dir / kCellFile);
  fs::remove(dir / kErrorFile);
  try {
    TrainOptions to;
    to.out_dir = dir;
    to.resume = true;
    const bool baseline = config.variant() == Variant::kBaselineBetaVae;
    auto trained = train(config, data.train, baseline ? nullptr : &data.feedback, to);
    auto eo = evaluation;
    eo.seed = derive_seed(seed, 104);
    cell.report = metrics::evaluate(*trained.model, {&data.train, &data.test, &data.unbiased}, eo);
    write_json(cell.report, dir / kMetricsFile);
  } catch (const Error& e) {
    cell.status = "failed";
    cell.error = e.what();
    write_json({{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}, dir / kErrorFile);
  }
  return cell;
}

std::vector<std::string> metric_columns(const std::vector<CellResult>& cells) {
  std::vector<std::string> columns;
  for (const auto& c : cells) {
    if (c.status == "failed") continue;
    for (const auto& [name, v] : metrics::flatten(c.report)) columns.push_back(name);
    break;
  }
  return columns;
}

std::map<std::string, double> as_map(const metrics::MetricsReport& r) {
  std::map<std::string, double> m;
  for (const auto& [name, v] : metrics::flatten(r)) m[name] = v;
  return m;
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

}  // namespace

MatrixResult run_matrix(const std::vector<TrainingConfig>& configs, const std::vector<std::uint64_t>& seeds,
                        const MatrixOptions& options) {
  require(!configs.empty() && !seeds.empty(), "run_matrix: needs at least one config and one seed");
  require(!options.out_dir.empty(), "run_matrix: out_dir is required");
  std::set<std::string> names;
  for (const auto& c : configs) {
    require(names.insert(c.name).second, "run_matrix: duplicate config name '" + c.name + "'");
  }
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
          "run_matrix: duplicate seed");
  fs::create_directories(options.out_dir);

  MatrixResult result;
  for (const auto seed : seeds) {
    std::optional<SeedData> data;
    for (const auto& config : configs) {
      const fs::path dir = options.out_dir / cell_name(config, seed);
      CellResult cell;
      if (fs::exists(dir / kMetricsFile) && fs::exists(dir / kCellFile)) {
        cell = load_cell(dir);
        cell.status = "skipped";
      } else {
        if (!data) data = make_seed_data(options.data, seed);
        cell = run_cell(config, seed, *data, dir, options.evaluation);
      }
      if (options.on_cell) options.on_cell(cell);
      result.cells.push_back(std::move(cell));
    }
  }
  result.aggregate_csv = options.out_dir / kAggregateFile;
  result.means_csv = options.out_dir / kMeansFile;
  write_aggregate_csv(result.cells, result.aggregate_csv);
  write_means_csv(result.cells, result.means_csv);
  return result;
}

std::vector<CellResult> collect_cells(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kIo, "not a directory: " + dir.string());
  std::vector<CellResult> cells;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / kCellFile)) cells.push_back(load_cell(entry.path()));
  }
  std::sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    return std::tie(a.config, a.seed) < std::tie(b.config, b.seed);
  });
  return cells;
}

void write_aggregate_csv(const std::vector<CellResult>& cells, const fs::path& path) {
  const auto columns = metric_columns(cells);
  auto out = open_csv(path);
  out << "config,variant,seed,status";
  for (const auto& c : columns) out << "," << c;
  out << "\n";
  for (const auto& cell : cells) {
    out << cell.config << "," << cell.variant << "," << cell.seed << "," << (cell.succeeded() ? "ok" : "failed");
    const auto values = cell.succeeded() ? as_map(cell.report) : std::map<std::string, double>{};
    for (const auto& c : columns) {
      out << ",";
      if (const auto it = values.find(c); it != values.end()) out << format_double(it->second);
    }
    out << "\n";
  }
}

void write_means_csv(const std::vector<CellResult>& cells, const fs::path& path) {
  const auto columns = metric_columns(cells);
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CellResult*>> by_config;
  for (const auto& cell : cells) {
    if (!by_config.count(cell.config)) order.push_back(cell.config);
    by_config[cell.config].push_back(&cell);
  }
  auto out = open_csv(path);
  out << "config,variant,cells";
  for (const auto& c : columns) out << "," << c;
  out << "\n";
  for (const auto& name : order) {
    const auto& group = by_config[name];
    std::vector<std::map<std::string, double>> ok;
    for (const auto* cell : group) {
      if (cell->succeeded()) ok.push_back(as_map(cell->report));
    }
    out << name << "," << group.front()->variant << "," << ok.size();
    for (const auto& c : columns) {
      out << ",";
      double sum = 0.0;
      int n = 0;
      for (const auto& m : ok) {
        if (const auto it = m.find(c); it != m.end()) {
          sum += it->second;
          ++n;
        }
      }
      if (n > 0) out << format_double(sum / n);
    }
    out << "\n";
  }
}

}  // namespace dbvae::trainer
