#include "dbvae/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dbvae/error.hpp"

namespace dbvae {

std::uint64_t Rng::mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int Rng::uniform_int(int n) {
  require(n > 0, "uniform_int: n must be positive");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<int>(draw % range);
}

double Rng::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::fork(std::uint64_t stream) const {
  std::mt19937_64 copy = engine_;
  Rng child(0);
  child.engine_.seed(mix(copy() ^ mix(stream)));
  return child;
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

Rng Rng::deserialize(const std::string& state) {
  Rng rng(0);
  std::istringstream in(state);
  in >> rng.engine_;
  if (in.fail()) throw Error(ErrorKind::kFormat, "rng state is not parseable");
  return rng;
}

}  // namespace dbvae
