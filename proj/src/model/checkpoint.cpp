#include "dbvae/model/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dbvae/error.hpp"

namespace dbvae::model {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'B', 'V', 'A', 'E', 'C', 'K', 'P'};

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::kFormat, "checkpoint is truncated");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

void add_params(CheckpointArchive& ar, const std::vector<nn::Parameter<float>*>& params) {
  for (const auto* p : params) ar.arrays.push_back({p->name, p->value});
}

void add_optimizer(CheckpointArchive& ar, const std::string& prefix, const nn::Adam<float>& opt) {
  for (const auto& [name, m] : opt.state()) ar.arrays.push_back({prefix + "/" + name, *m});
  ar.meta[prefix + "_steps"] = opt.steps();
}

void load_params(const CheckpointArchive& ar, const std::vector<nn::Parameter<float>*>& params) {
  for (auto* p : params) {
    const auto* a = ar.find(p->name);
    if (!a || a->values.rows() != p->value.rows() || a->values.cols() != p->value.cols()) {
      throw Error(ErrorKind::kConsistency, "checkpoint lacks parameter " + p->name);
    }
    p->value = a->values;
    p->grad.setZero();
  }
}

}  // namespace

const NamedArray* CheckpointArchive::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void write_archive(const CheckpointArchive& archive, const fs::path& path) {
  std::string out(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(out, CheckpointArchive::kFormatVersion);
  const std::string meta = archive.meta.dump();
  put<std::uint64_t>(out, meta.size());
  out += meta;
  put<std::uint64_t>(out, archive.rng_state.size());
  out += archive.rng_state;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.arrays.size()));
  for (const auto& a : archive.arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.values.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.values.cols()));
    for (Eigen::Index i = 0; i < a.values.size(); ++i) {
      std::uint32_t bits;
      const float v = a.values.data()[i];
      std::memcpy(&bits, &v, sizeof bits);
      put<std::uint32_t>(out, bits);
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(ErrorKind::kIo, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

CheckpointArchive read_archive(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  Reader r(ss.str());
  if (r.take(kMagic.size()) != std::string(kMagic.begin(), kMagic.end())) {
    throw Error(ErrorKind::kFormat, path.string() + " is not a checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != CheckpointArchive::kFormatVersion) {
    throw Error(ErrorKind::kVersion, "checkpoint format version " + std::to_string(version) +
                                         " is not supported (expected " +
                                         std::to_string(CheckpointArchive::kFormatVersion) + ")");
  }
  CheckpointArchive ar;
  try {
    ar.meta = json::parse(r.take(r.get<std::uint64_t>()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint metadata: ") + e.what());
  }
  ar.rng_state = r.take(r.get<std::uint64_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.take(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    a.values.resize(rows, cols);
    for (Eigen::Index k = 0; k < a.values.size(); ++k) {
      const auto bits = r.get<std::uint32_t>();
      std::memcpy(a.values.data() + k, &bits, sizeof bits);
    }
    ar.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw Error(ErrorKind::kFormat, "trailing bytes after checkpoint arrays");
  return ar;
}

void save_checkpoint(const CheckpointRefs& refs, const fs::path& path) {
  require(refs.model != nullptr, "save_checkpoint: model is required");
  CheckpointArchive ar;
  ar.meta = {{"version_tag", VaeModel<float>::kVersionTag},
             {"architecture", refs.model->architecture()},
             {"partition", refs.model->partition()},
             {"extra", refs.extra}};
  add_params(ar, refs.model->parameters());
  if (refs.probes) {
    json probes = json::array();
    for (const auto& e : refs.probes->entries()) probes.push_back({e.factor, e.cardinality});
    ar.meta["probes"] = probes;
    add_params(ar, refs.probes->parameters());
  }
  if (refs.vae_optimizer) add_optimizer(ar, "vae_opt", *refs.vae_optimizer);
  if (refs.probe_optimizer) add_optimizer(ar, "probe_opt", *refs.probe_optimizer);
  if (refs.rng) ar.rng_state = refs.rng->serialize();
  write_archive(ar, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  LoadedCheckpoint out;
  out.archive = read_archive(path);
  const auto& meta = out.archive.meta;
  const std::string tag = meta.value("version_tag", std::string());
  if (tag != VaeModel<float>::kVersionTag) {
    throw Error(ErrorKind::kVersion, "checkpoint version tag '" + tag + "' does not match '" +
                                         VaeModel<float>::kVersionTag + "'");
  }
  try {
    out.model = std::make_unique<VaeModel<float>>(meta.at("architecture").get<Architecture>(),
                                                  meta.at("partition").get<LatentPartition>(), 0);
    load_params(out.archive, out.model->parameters());
    if (meta.contains("probes")) {
      std::vector<std::pair<std::string, int>> cards;
      for (const auto& p : meta.at("probes")) cards.emplace_back(p.at(0).get<std::string>(), p.at(1).get<int>());
      out.probes = std::make_unique<ProbeBank<float>>(out.model->partition(), cards, 0);
      load_params(out.archive, out.probes->parameters());
    }
    out.extra = meta.value("extra", json::object());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint metadata: ") + e.what());
  }
  out.rng = out.archive.rng_state.empty() ? Rng(0) : Rng::deserialize(out.archive.rng_state);
  return out;
}

void restore_optimizer(const CheckpointArchive& archive, const std::string& prefix,
                       nn::Adam<float>& optimizer) {
  std::vector<std::pair<std::string, Matrix<float>>> moments;
  const std::string head = prefix + "/";
  for (const auto& a : archive.arrays) {
    if (a.name.starts_with(head)) moments.emplace_back(a.name.substr(head.size()), a.values);
  }
  optimizer.load_state(moments, archive.meta.value(prefix + "_steps", 0L));
}

}  // namespace dbvae::model
