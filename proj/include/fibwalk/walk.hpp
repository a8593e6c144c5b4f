#ifndef FIBWALK_WALK_HPP
#define FIBWALK_WALK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "fibwalk/real.hpp"
#include "fibwalk/scaling.hpp"

namespace fibwalk {

// Counter-based generator: identical seeds reproduce streams bit-exactly,
// and per-walker streams derive from (seed, walker index).
struct SplitMix64 {
  uint64_t state;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  SplitMix64(uint64_t seed, uint64_t stream)
      : state(scramble(seed + 0x9E3779B97F4A7C15ULL * (stream + 1))) {}

  static uint64_t scramble(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    return scramble(state);
  }

  // uniform in [0,1) with 53 bits
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
};

// Increment law on j >= 1: prefix probabilities plus an optional exact
// geometric tail. Cumulative sampling uses doubles; the moment bookkeeping
// stays in Real.
struct NuLaw {
  SequencePair seq;  // only the nu side is used
  std::vector<double> cdf;
  double prefix_mass = 0.0;
  double tail_ratio = 0.0;

  static NuLaw from(std::vector<Real> nu, Real tail) {
    NuLaw law;
    law.seq.a = {Real(1L, 64), Real(1L, 64)};  // unused a side
    law.seq.a_tail_ratio = Real(0L, 64);
    law.seq.nu = std::move(nu);
    law.seq.nu_tail_ratio = std::move(tail);
    Real s = law.seq.nu_sum();
    Real one(1L, law.seq.prec());
    if ((s - one).abs() > one.mul_2exp(-40))
      throw InvalidLawError("NuLaw: probabilities sum to " + s.str(20));
    double acc = 0.0;
    for (const auto& x : law.seq.nu) {
      acc += x.to_double();
      law.cdf.push_back(acc);
    }
    law.prefix_mass = acc;
    law.tail_ratio = law.seq.nu_tail_ratio.to_double();
    return law;
  }

  long sample(SplitMix64& rng) const {
    double u = rng.uniform01();
    if (u < prefix_mass || tail_ratio <= 0.0) {
      auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) return static_cast<long>(cdf.size());
      return static_cast<long>(it - cdf.begin()) + 1;
    }
    // geometric continuation beyond the prefix
    double rest = 1.0 - prefix_mass;
    double w = (u - prefix_mass) / rest;  // uniform in [0,1)
    long g = static_cast<long>(
        std::floor(std::log1p(-w) / std::log(tail_ratio)));
    if (g < 0) g = 0;
    return static_cast<long>(cdf.size()) + 1 + g;
  }

  std::pair<Real, Real> moments12() const { return moments(seq); }
};

// Doob decomposition history of one walker.
struct WalkTrace {
  std::vector<long> phi;
  std::vector<Real> Z, W, M;
  std::optional<long> tau;
  bool escaped = false;
};

struct WalkConfig {
  NuLaw nu;
  long k0 = 2;
  long r0 = 0;
  long s = 10;
  long horizon = 1000;
  long n_walkers = 1000;
  uint64_t seed = 0;
  int threads = 0;
  long record_walkers = 0;
  // override the iid law with a per-state law (state -> NuLaw)
  std::function<const NuLaw&(long)> state_law;
};

struct WalkEnsembleResult {
  long n_walkers = 0;
  long escaped = 0;
  double escape_fraction = 0.0;
  double slope_mean = 0.0;
  double slope_q10 = 0.0, slope_q50 = 0.0, slope_q90 = 0.0;
  double hr_statistic = 0.0;      // max over walkers of max_t |M_t|/(s-r0+t)
  double hr_exceed_fraction = 0.0;  // walkers whose HR statistic reached 1
  bool doob_exact = true;
  bool drift_warning = false;     // m1 < k0 + 2
  Real m1, m2;
  std::vector<WalkTrace> recorded;
};

namespace detail {

struct WalkerSummary {
  bool escaped = false;
  long tau = -1;
  double slope = 0.0;
  double hr_max = 0.0;
  bool doob_exact = true;
};

}  // namespace detail

// Simulates phi_{t+1} = phi_t + (j - k0 - 1) with j ~ nu, stopped at
// phi <= r0. Z is phi frozen at tau, W the predictable part with
// increments m1 - k0 - 1 before tau, M = Z - W the martingale; the
// identity Z = W + M is checked bit-exactly at every step (precision 320
// keeps the accumulation rounding-free for any realistic horizon).
inline WalkEnsembleResult simulate_walk(const WalkConfig& cfg) {
  if (cfg.n_walkers < 1 || cfg.horizon < 0)
    throw DomainError("simulate_walk: bad ensemble parameters");
  if (cfg.s <= cfg.r0) throw DomainError("simulate_walk: s > r0 required");
  constexpr long kAccPrec = 320;
  WalkEnsembleResult out;
  auto [m1, m2] = cfg.nu.moments12();
  out.m1 = m1;
  out.m2 = m2;
  out.n_walkers = cfg.n_walkers;
  out.drift_warning = m1 < Real(cfg.k0 + 2, m1.precision());

  std::vector<detail::WalkerSummary> sums(static_cast<size_t>(cfg.n_walkers));
  out.recorded.resize(
      static_cast<size_t>(std::min(cfg.record_walkers, cfg.n_walkers)));

  auto run_walker = [&](long w) {
    SplitMix64 rng(cfg.seed, static_cast<uint64_t>(w));
    detail::WalkerSummary& sm = sums[static_cast<size_t>(w)];
    bool record = w < static_cast<long>(out.recorded.size());
    WalkTrace* tr = record ? &out.recorded[static_cast<size_t>(w)] : nullptr;
    long phi = cfg.s;
    Real drift = (cfg.state_law ? Real(0L, kAccPrec)
                                : (m1 - Real(cfg.k0 + 1, m1.precision()))
                                      .with_precision(kAccPrec));
    Real W(cfg.s, kAccPrec), M(0L, kAccPrec);
    long tau = -1;
    if (tr) {
      tr->phi.push_back(phi);
      tr->Z.push_back(Real(phi, kAccPrec));
      tr->W.push_back(W);
      tr->M.push_back(M);
    }
    double denom0 = static_cast<double>(cfg.s - cfg.r0);
    for (long t = 1; t <= cfg.horizon; ++t) {
      if (tau < 0) {
        const NuLaw& law = cfg.state_law ? cfg.state_law(phi) : cfg.nu;
        Real step_drift = drift;
        if (cfg.state_law) {
          auto [lm1, lm2] = law.moments12();
          (void)lm2;
          step_drift =
              (lm1 - Real(cfg.k0 + 1, lm1.precision())).with_precision(kAccPrec);
        }
        long j = law.sample(rng);
        long dphi = j - cfg.k0 - 1;
        phi += dphi;
        W = W + step_drift;
        M = M + (Real(dphi, kAccPrec) - step_drift);
        if (phi <= cfg.r0) tau = t;
      }
      Real Z(phi, kAccPrec);
      if (Z != W + M) sm.doob_exact = false;
      double hr = std::abs(M.to_double()) /
                  (denom0 + static_cast<double>(tau < 0 ? t : tau));
      if (hr > sm.hr_max) sm.hr_max = hr;
      if (tr) {
        tr->phi.push_back(phi);
        tr->Z.push_back(Z);
        tr->W.push_back(W);
        tr->M.push_back(M);
      }
    }
    sm.escaped = tau < 0;
    sm.tau = tau;
    sm.slope = cfg.horizon > 0
                   ? static_cast<double>(phi) / static_cast<double>(cfg.horizon)
                   : static_cast<double>(phi);
    if (tr) {
      tr->escaped = sm.escaped;
      if (tau >= 0) tr->tau = tau;
    }
  };

  int nthreads = cfg.threads > 0
                     ? cfg.threads
                     : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  if (nthreads == 1 || cfg.n_walkers < 64) {
    for (long w = 0; w < cfg.n_walkers; ++w) run_walker(w);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&, t] {
        for (long w = t; w < cfg.n_walkers; w += nthreads) run_walker(w);
      });
    for (auto& th : pool) th.join();
  }

  // walker-order reduction keeps results independent of the thread layout
  std::vector<double> slopes;
  for (const auto& sm : sums) {
    out.doob_exact = out.doob_exact && sm.doob_exact;
    if (sm.hr_max > out.hr_statistic) out.hr_statistic = sm.hr_max;
    if (sm.hr_max >= 1.0) out.hr_exceed_fraction += 1.0;
    if (sm.escaped) {
      ++out.escaped;
      slopes.push_back(sm.slope);
    }
  }
  out.hr_exceed_fraction /= static_cast<double>(cfg.n_walkers);
  out.escape_fraction =
      static_cast<double>(out.escaped) / static_cast<double>(cfg.n_walkers);
  if (!slopes.empty()) {
    std::sort(slopes.begin(), slopes.end());
    double acc = 0.0;
    for (double s : slopes) acc += s;
    out.slope_mean = acc / static_cast<double>(slopes.size());
    auto q = [&](double frac) {
      size_t i = static_cast<size_t>(frac * static_cast<double>(slopes.size() - 1));
      return slopes[i];
    };
    out.slope_q10 = q(0.10);
    out.slope_q50 = q(0.50);
    out.slope_q90 = q(0.90);
  }
  return out;
}

}  // namespace fibwalk

#endif  // FIBWALK_WALK_HPP
