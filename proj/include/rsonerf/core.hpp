#pragma once

// Shared scalar aliases, contract checks, deterministic RNG and the worker
// pool used across the library. Everything numeric is templated on the
// scalar type; float is the production mode, double the verification mode.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rsonerf {

using Index = Eigen::Index;

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat3 = Eigen::Matrix<S, 3, 3>;
template <typename S>
using Mat4 = Eigen::Matrix<S, 4, 4>;

// Contract violation (bad shapes, out-of-range arguments, invalid configs).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Unrecoverable runtime failure (non-finite loss, corrupt files).
class AbortError : public std::runtime_error {
 public:
  explicit AbortError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

template <typename... Parts>
std::string cat(Parts&&... parts) {
  std::string out;
  ((out += [](auto&& p) {
     if constexpr (std::is_convertible_v<decltype(p), std::string>)
       return std::string(p);
     else
       return std::to_string(p);
   }(std::forward<Parts>(parts))),
   ...);
  return out;
}

// splitmix64: the stream-derivation and bulk generator used everywhere.
// Chosen over std:: engines so that draws are identical across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased enough for dataset-scale n; deterministic across platforms
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Independent child stream, e.g. per pixel or per step.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    Rng mix(seed ^ (0x632be59bd9b4e019ull + stream * 0x9e3779b97f4a7c15ull));
    return mix.next_u64();
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Worker count: min(hardware, RSONERF_THREADS if set, explicit cap if given).
int worker_count(int cap = 0);

// Human-readable execution device, for benchmark tables.
std::string device_description();

// Runs fn(worker, begin, end) over [0, n) split into one contiguous chunk per
// worker. Chunk boundaries depend only on (n, workers), so any reduction done
// in worker order is deterministic for a fixed thread cap.
template <typename Fn>
void parallel_chunks(Index n, Fn&& fn, int cap = 0) {
  const int workers = static_cast<int>(std::min<Index>(n, worker_count(cap)));
  if (workers <= 1) {
    if (n > 0) fn(0, Index(0), n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const Index chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Index begin = std::min<Index>(n, w * chunk);
    const Index end = std::min<Index>(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rsonerf
