#include "dbvae/datasets/io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dbvae/error.hpp"

namespace dbvae::datasets {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'B', 'V', 'A', 'E', '0', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw Error(ErrorKind::kFormat, path.string() + " has no header");
  return rows;
}

int parse_int(const std::string& s, const fs::path& source) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kFormat, source.string() + ": '" + s + "' is not an integer");
  }
}

}  // namespace

void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json meta = {{"spec", ds.spec},
               {"rule", ds.rule ? json(*ds.rule) : json(nullptr)},
               {"seed", ds.seed},
               {"split_tag", std::string(to_string(ds.split))},
               {"N", ds.size}};
  open_out(dir / "meta.json") << meta.dump(2) << "\n";

  auto bin = open_out(dir / "images.bin", true);
  bin.write(kMagic.data(), kMagic.size());
  put_u32(bin, static_cast<std::uint32_t>(ds.size));
  put_u32(bin, static_cast<std::uint32_t>(ds.spec.dims.height));
  put_u32(bin, static_cast<std::uint32_t>(ds.spec.dims.width));
  put_u32(bin, static_cast<std::uint32_t>(ds.spec.dims.channels));
  bin.write(reinterpret_cast<const char*>(ds.images.data()),
            static_cast<std::streamsize>(ds.images.size()));

  auto csv = open_out(dir / "factors.csv");
  for (std::size_t i = 0; i < ds.spec.factors.size(); ++i) {
    csv << (i ? "," : "") << ds.spec.factors[i].name;
  }
  csv << "\n";
  const std::size_t nf = ds.spec.factors.size();
  for (int n = 0; n < ds.size; ++n) {
    for (std::size_t i = 0; i < nf; ++i) csv << (i ? "," : "") << ds.factors[n * nf + i];
    csv << "\n";
  }
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  json meta;
  try {
    meta = json::parse(slurp(dir / "meta.json"));
    ds.spec = meta.at("spec").get<FactorSpec>();
    if (!meta.at("rule").is_null()) ds.rule = meta.at("rule").get<BiasRule>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.split = split_from_string(meta.at("split_tag").get<std::string>());
    ds.size = meta.at("N").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, (dir / "meta.json").string() + ": " + e.what());
  }

  const std::string bin = slurp(dir / "images.bin");
  constexpr std::size_t kHeader = 8 + 16;
  if (bin.size() < kMagic.size() || std::memcmp(bin.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorKind::kFormat, "images.bin: bad magic");
  }
  if (bin.size() < kHeader) throw Error(ErrorKind::kFormat, "images.bin: truncated header");
  const auto* hdr = reinterpret_cast<const unsigned char*>(bin.data()) + 8;
  const std::uint32_t n = get_u32(hdr), h = get_u32(hdr + 4), w = get_u32(hdr + 8),
                      c = get_u32(hdr + 12);
  if (static_cast<int>(n) != ds.size || static_cast<int>(h) != ds.spec.dims.height ||
      static_cast<int>(w) != ds.spec.dims.width || static_cast<int>(c) != ds.spec.dims.channels) {
    throw Error(ErrorKind::kConsistency, "images.bin header disagrees with meta.json");
  }
  const std::size_t payload = static_cast<std::size_t>(n) * h * w * c;
  if (bin.size() - kHeader < payload) throw Error(ErrorKind::kFormat, "images.bin: truncated payload");
  if (bin.size() - kHeader > payload) {
    throw Error(ErrorKind::kConsistency, "images.bin: payload larger than header N*H*W*C");
  }
  ds.images.assign(bin.begin() + kHeader, bin.end());

  const auto rows = read_csv(dir / "factors.csv");
  const std::size_t nf = ds.spec.factors.size();
  if (rows[0].size() != nf) throw Error(ErrorKind::kConsistency, "factors.csv header width mismatch");
  for (std::size_t i = 0; i < nf; ++i) {
    if (rows[0][i] != ds.spec.factors[i].name) {
      throw Error(ErrorKind::kConsistency, "factors.csv header does not match spec");
    }
  }
  if (rows.size() - 1 != n) {
    throw Error(ErrorKind::kConsistency, "factors.csv has " + std::to_string(rows.size() - 1) +
                                             " rows but header N is " + std::to_string(n));
  }
  ds.factors.reserve(n * nf);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != nf) {
      throw Error(ErrorKind::kConsistency, "factors.csv row " + std::to_string(r) + " width mismatch");
    }
    for (const auto& cell : rows[r]) ds.factors.push_back(parse_int(cell, dir / "factors.csv"));
  }
  ds.check_invariants();
  return ds;
}

void write_feedback(const FeedbackSet& fbs, const fs::path& dir) {
  write_dataset(fbs.samples, dir);
  auto pairs = open_out(dir / "pairs.csv");
  pairs << "idx_a,idx_b,shared_factor\n";
  for (const auto& p : fbs.pairs) pairs << p.idx_a << "," << p.idx_b << "," << p.shared_factor << "\n";
  auto labels = open_out(dir / "labels.csv");
  labels << "idx,factor,value\n";
  for (const auto& l : fbs.labels) labels << l.idx << "," << l.factor << "," << l.value << "\n";
  json meta = {{"source_dataset_id", fbs.source_dataset_id},
               {"geometry", to_string(fbs.geometry)},
               {"anchors", fbs.anchors},
               {"referenced_samples", fbs.samples.size}};
  open_out(dir / "feedback.json") << meta.dump(2) << "\n";
}

FeedbackSet read_feedback(const fs::path& dir) {
  FeedbackSet fbs;
  fbs.samples = read_dataset(dir);
  try {
    const json meta = json::parse(slurp(dir / "feedback.json"));
    fbs.source_dataset_id = meta.at("source_dataset_id").get<std::string>();
    fbs.geometry = geometry_from_string(meta.at("geometry").get<std::string>());
    fbs.anchors = meta.at("anchors").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, (dir / "feedback.json").string() + ": " + e.what());
  }
  const auto pair_rows = read_csv(dir / "pairs.csv");
  for (std::size_t r = 1; r < pair_rows.size(); ++r) {
    const auto& row = pair_rows[r];
    if (row.size() != 3) throw Error(ErrorKind::kFormat, "pairs.csv row width mismatch");
    fbs.pairs.push_back({parse_int(row[0], dir / "pairs.csv"), parse_int(row[1], dir / "pairs.csv"), row[2]});
  }
  const auto label_rows = read_csv(dir / "labels.csv");
  for (std::size_t r = 1; r < label_rows.size(); ++r) {
    const auto& row = label_rows[r];
    if (row.size() != 3) throw Error(ErrorKind::kFormat, "labels.csv row width mismatch");
    fbs.labels.push_back({parse_int(row[0], dir / "labels.csv"), row[1], parse_int(row[2], dir / "labels.csv")});
  }
  fbs.check_invariants();
  return fbs;
}

}  // namespace dbvae::datasets
