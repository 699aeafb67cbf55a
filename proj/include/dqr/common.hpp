#ifndef DQR_COMMON_HPP
#define DQR_COMMON_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Error taxonomy. std::invalid_argument is used directly for precondition
// violations; the types below carry failure context for the batch runner.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A sampler chain produced a non-finite value.
struct DivergedChainError : Error {
  long iteration;
  DivergedChainError(long iter, const std::string& what)
      : Error(what), iteration(iter) {}
};

/// A linear solve or factorization failed beyond the jitter escalation.
struct NumericalFailureError : Error {
  using Error::Error;
};

/// Requested operation needs artifacts or state that are not present.
struct InvalidStateError : Error {
  using Error::Error;
};

/// The noncrossing bandwidth search hit its ladder cap.
struct AdjustmentFailureError : Error {
  int worst_point = -1;       // check-point index of the worst violation
  double worst_gap = 0.0;     // magnitude of the worst remaining decrease
  AdjustmentFailureError(const std::string& what, int point, double gap)
      : Error(what), worst_point(point), worst_gap(gap) {}
};

/// CSV ingestion problem with location information.
struct IngestError : Error {
  long row = -1;              // 1-based data row, -1 if not applicable
  std::string column;
  IngestError(const std::string& what, long r = -1, std::string col = {})
      : Error(what), row(r), column(std::move(col)) {}
};

// ---------------------------------------------------------------------------
// RNG plumbing. Every sampler instance owns a std::mt19937_64; task seeds are
// derived from the base seed with a splitmix64 mix so they never collide in
// practice and do not depend on scheduling.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the (direction, tau) task with the given indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t direction_index,
                                 std::uint64_t tau_index) {
  std::uint64_t s = splitmix64(base ^ (0xA24BAED4963EE407ULL * (direction_index + 1)));
  return splitmix64(s ^ (0x9FB21C651E98DF25ULL * (tau_index + 1)));
}

inline double draw_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

/// Gamma draw parameterized by shape and rate.
inline double draw_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

/// Inverse-gamma draw parameterized by shape and rate.
inline double draw_inverse_gamma(Rng& rng, double shape, double rate) {
  return 1.0 / draw_gamma(rng, shape, rate);
}

/// Exponential draw with the given mean.
inline double draw_exponential_mean(Rng& rng, double mean) {
  std::exponential_distribution<double> e(1.0 / mean);
  return e(rng);
}

// ---------------------------------------------------------------------------
// Small statistics helpers shared by summaries and tests.

inline double mean_of(const Vec& x) {
  return x.size() == 0 ? 0.0 : x.mean();
}

inline double sd_of(const Vec& x) {
  const long n = x.size();
  if (n < 2) return 0.0;
  const double m = x.mean();
  return std::sqrt((x.array() - m).square().sum() / double(n - 1));
}

/// Linear-interpolation sample quantile (the common "type 7" convention).
inline double quantile_of(std::vector<double> sorted_or_not, double p) {
  if (sorted_or_not.empty())
    throw InvalidStateError("quantile_of: empty sample");
  std::sort(sorted_or_not.begin(), sorted_or_not.end());
  const long n = long(sorted_or_not.size());
  if (n == 1) return sorted_or_not[0];
  const double h = (double(n) - 1.0) * p;
  const long lo = long(std::floor(h));
  const long hi = std::min(lo + 1, n - 1);
  const double w = h - double(lo);
  return (1.0 - w) * sorted_or_not[size_t(lo)] + w * sorted_or_not[size_t(hi)];
}

}  // namespace dqr

#endif  // DQR_COMMON_HPP
