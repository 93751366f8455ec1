#ifndef GAPKIT_CORE_HPP
#define GAPKIT_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gapkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed input: dimension mismatch, non-finite entries, bad descriptor.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested operation is not defined for this kind of space.
class UnsupportedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A solver or lift failed to reach its guarantee.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exponent of an l_p type norm.  Infinity is a distinguished state and never
/// enters arithmetic as a floating point infinity.
class Exponent {
 public:
  constexpr Exponent() = default;
  constexpr explicit Exponent(double p) : value_(p) {}

  static constexpr Exponent infinity() {
    Exponent e;
    e.infinite_ = true;
    e.value_ = 0.0;
    return e;
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr double value() const { return value_; }

  bool is_one() const { return !infinite_ && value_ == 1.0; }
  bool is_two() const { return !infinite_ && value_ == 2.0; }

  /// Hoelder conjugate, 1 <-> inf.
  Exponent conjugate() const {
    if (infinite_) return Exponent(1.0);
    if (value_ == 1.0) return infinity();
    return Exponent(value_ / (value_ - 1.0));
  }

  /// 1/p with 1/inf = 0.
  double reciprocal() const { return infinite_ ? 0.0 : 1.0 / value_; }

  friend bool operator==(const Exponent& a, const Exponent& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

  std::string to_string() const;

 private:
  double value_ = 2.0;
  bool infinite_ = false;
};

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[64];
    std::snprintf(tmp, sizeof(tmp), "%.*g", prec, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

inline std::string Exponent::to_string() const {
  return infinite_ ? std::string("inf") : format_real(value_);
}

inline void require_finite(const Vector& v, const char* what) {
  if (v.size() < 1) throw InputError(std::string(what) + ": empty vector");
  if (!v.allFinite()) throw InputError(std::string(what) + ": non-finite entry");
}

inline void require_dim(const Vector& v, Eigen::Index dim, const char* what) {
  if (v.size() != dim) {
    throw InputError(std::string(what) + ": dimension " + std::to_string(v.size()) +
                     " does not match " + std::to_string(dim));
  }
}

// ---------------------------------------------------------------------------
// Randomness.  Every randomized routine takes an explicit 64-bit seed; derived
// streams are keyed with splitmix64 so that sub-computations are independent of
// how many draws other sub-computations made.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(a + 0x51ed2701ULL)) ^ (b * 0x2545f4914f6cdd1dULL));
}

using Rng = std::mt19937_64;

/// Standard normal draws via Box-Muller, so that streams do not depend on the
/// standard library's distribution implementation.
inline double gaussian(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Vector gaussian_vector(Rng& rng, Eigen::Index n) {
  Vector g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = gaussian(rng);
  return g;
}

// ---------------------------------------------------------------------------
// Homogeneous extension helpers.  A map f defined on "canonical" vectors is
// extended to all vectors by scaling out a power of two (exact in floating
// point), so that f(2^k v) = 2^k f(v) bit-for-bit.

struct PowerOfTwoScale {
  Vector canonical;
  int exponent = 0;
};

inline PowerOfTwoScale power_of_two_canonical(const Vector& v) {
  PowerOfTwoScale out;
  const double m = v.cwiseAbs().maxCoeff();
  if (m == 0.0) {
    out.canonical = v;
    return out;
  }
  std::frexp(m, &out.exponent);
  out.canonical = v.unaryExpr([&](double x) { return std::ldexp(x, -out.exponent); });
  return out;
}

inline Vector scale_by_power_of_two(const Vector& v, int exponent) {
  return v.unaryExpr([&](double x) { return std::ldexp(x, exponent); });
}

/// Sign making the first nonzero coordinate positive (+1 for the zero vector).
inline double canonical_sign(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0) return 1.0;
    if (v[i] < 0.0) return -1.0;
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Parallel loops.  Every index writes only its own output slot, so results do
// not depend on the thread count.

/// GAPKIT_THREADS if set to a positive integer, else the hardware count.
inline unsigned thread_count() {
  if (const char* env = std::getenv("GAPKIT_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {
inline thread_local bool in_parallel_worker = false;
}

/// Calls f(i) for i in [0, n).  The exception of the lowest failing index is
/// rethrown after all workers finish.  Calls made from inside a worker run
/// serially.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (threads <= 1 || detail::in_parallel_worker) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::mutex m;
  std::size_t next = 0;
  auto work = [&] {
    detail::in_parallel_worker = true;
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(m);
        if (next >= n) return;
        i = next++;
      }
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gapkit

#endif  // GAPKIT_CORE_HPP
