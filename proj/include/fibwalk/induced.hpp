#ifndef FIBWALK_INDUCED_HPP
#define FIBWALK_INDUCED_HPP

#include <map>
#include <optional>
#include <thread>
#include <vector>

#include "fibwalk/distortion.hpp"
#include "fibwalk/nest.hpp"
#include "fibwalk/walk.hpp"

namespace fibwalk {

// Annuli A_k = (u_k, û_k) \ (u_{k+1}, û_{k+1}) of the principal nest,
// described by the symmetric radii r_k = |u_k - c|. Levels start at 1: the
// level-0 annulus is degenerate under the fixed-point seed (û_1 = u_0).
// I_k is the component on the side of u_k, Î_k its reflection; by exact
// symmetry |A_k| = 2 (r_k - r_{k+1}).
struct AnnulusPartition {
  int start_level = 1;
  int deepest = 0;            // D: levels 1..D-1 are full annuli, r_D known
  std::vector<Real> radius;   // radius[k] = |u_k - c|, k = 0..D
  std::vector<int> side;      // side of u_k
  std::vector<Real> a_len;    // a_len[k] = |A_k| for k = 1..D-1
  Real c;

  int level_of(const Real& dist) const {
    // r_{k+1} <= dist < r_k  =>  level k; dist >= r_1 => 0 (above the top);
    // dist < r_D => -1 (deeper than computed)
    if (dist >= radius[1]) return 0;
    int lo = 1, hi = deepest;
    while (lo < hi) {
      int mid = (lo + hi) / 2;
      if (dist >= radius[static_cast<size_t>(mid + 1)])
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo > deepest - 1 ? -1 : lo;
  }
};

inline AnnulusPartition build_annuli(const NestData& nest) {
  if (nest.K < 4) throw DomainError("build_annuli: nest depth >= 4 required");
  AnnulusPartition part;
  part.c = nest.f.c();
  part.deepest = nest.K;
  long prec = nest.f.precision();
  part.radius.resize(static_cast<size_t>(nest.K) + 1, Real(0L, prec));
  part.side.resize(static_cast<size_t>(nest.K) + 1, 0);
  for (int k = 0; k <= nest.K; ++k) {
    part.radius[static_cast<size_t>(k)] = nest.levels[static_cast<size_t>(k)].dist_u;
    part.side[static_cast<size_t>(k)] = nest.levels[static_cast<size_t>(k)].side;
  }
  for (int k = 1; k < nest.K; ++k)
    if (!(part.radius[static_cast<size_t>(k + 1)] < part.radius[static_cast<size_t>(k)]))
      throw NestingViolationError("build_annuli: (u_{k+1}) not strictly inside (u_k) at level " +
                                  std::to_string(k));
  part.a_len.resize(static_cast<size_t>(nest.K), Real(0L, prec));
  for (int k = 1; k < nest.K; ++k)
    part.a_len[static_cast<size_t>(k)] =
        (part.radius[static_cast<size_t>(k)] - part.radius[static_cast<size_t>(k + 1)])
            .mul_2exp(1);
  return part;
}

struct InducedStepResult {
  Real x_next;
  int k_from = 0;
  int k_to = 0;          // 0 = exited above the top annulus
  long iterate_used = 0;
  bool absorbed = false;  // image deeper than the computed levels
};

// Verified monotone branches of f^{S_k} over the host components, built
// once per level.
class BranchCache {
 public:
  // Verifies that f^{S_k} is a diffeomorphism on the closed component of
  // A_k on the side of u_k (the reflected component follows by symmetry).
  void ensure(const NestData& nest, const AnnulusPartition& part, int k) {
    if (verified_.size() < static_cast<size_t>(nest.K)) verified_.resize(static_cast<size_t>(nest.K), false);
    if (verified_[static_cast<size_t>(k)]) return;
    const Real& c = nest.f.c();
    bool right = part.side[static_cast<size_t>(k)] > 0;
    Real lo_d = part.radius[static_cast<size_t>(k + 1)];
    Real hi_d = part.radius[static_cast<size_t>(k)];
    Real mid_d = (lo_d + hi_d).mul_2exp(-1);
    Real mid = right ? c + mid_d : c - mid_d;
    IntervalR branch = monotone_branch(nest.f, nest.S[static_cast<size_t>(k)], mid);
    Real comp_lo = right ? c + lo_d : c - hi_d;
    Real comp_hi = right ? c + hi_d : c - lo_d;
    if (branch.lo > comp_lo || branch.hi < comp_hi)
      throw BranchError("induced_step: f^{S_k} not monotone across component of A_" +
                        std::to_string(k));
    verified_[static_cast<size_t>(k)] = true;
  }

 private:
  std::vector<bool> verified_;
};

// One induced-map step: x in a component of A_k moves by f^{S_k}. The
// image level never drops below k-2 (hard assertion); images deeper than
// the computed nest are flagged absorbed.
inline InducedStepResult induced_step(const NestData& nest,
                                      const AnnulusPartition& part,
                                      const Real& x, BranchCache& cache) {
  const Real& c = nest.f.c();
  Real dist = (x - c).abs();
  int k = part.level_of(dist);
  if (k <= 0)
    throw OutsidePartitionError(
        k == 0 ? "induced_step: x above the top annulus"
               : "induced_step: x deeper than the computed nest");
  cache.ensure(nest, part, k);
  long Sk = nest.S[static_cast<size_t>(k)];
  Real y = x;
  for (long i = 0; i < Sk; ++i) y = nest.f.eval(y);
  Real dist_y = (y - c).abs();
  int kt = part.level_of(dist_y);
  InducedStepResult res{y, k, kt < 0 ? part.deepest : kt, Sk, kt < 0};
  if (!res.absorbed && res.k_to < k - 2)
    throw BranchError("induced_step: image level " + std::to_string(res.k_to) +
                      " below k_from - 2 = " + std::to_string(k - 2) +
                      " (contradicts the verified combinatorics)");
  return res;
}

struct EmpiricalTransitions {
  int r = 0;
  long samples = 0;
  long absorbed = 0;
  long dropped = 0;  // burn-in walkers that left A_r or the partition
  long boundary_resamples = 0;
  std::map<int, long> counts;       // target level -> count (excl. absorbed)
  std::vector<Real> nu_hat;         // index i-1 holds nu_i, i = k_to - r + k0 + 1
  long k0 = 2;
};

namespace detail {

// Uniform point of the level-k annulus; exact boundary hits are resampled.
inline Real sample_annulus(const AnnulusPartition& part, int k, SplitMix64& rng,
                           long prec, long* resamples) {
  const Real lo = part.radius[static_cast<size_t>(k + 1)];
  const Real hi = part.radius[static_cast<size_t>(k)];
  for (;;) {
    double u = rng.uniform01();
    bool right = (rng.next() & 1) != 0;
    Real dist = lo + (hi - lo) * Real(u, prec);
    if (dist == lo || dist == hi || dist.is_zero()) {
      ++(*resamples);
      continue;
    }
    return right ? part.c + dist : part.c - dist;
  }
}

}  // namespace detail

// Lebesgue sampling of the transition law from level r: draws points
// uniformly in A_r, applies the induced step, tallies target levels.
// Depth-exceeded images are counted as absorbed and left out of nu_hat.
// burn_in > 0 pushes the Lebesgue measure forward first: each sample is
// evolved that many induced steps and tallied only if it sits in A_r
// again (samples that leave the partition or never return are dropped
// from the tally but still counted).
inline EmpiricalTransitions estimate_transitions(const NestData& nest,
                                                 const AnnulusPartition& part,
                                                 int r, long samples,
                                                 uint64_t seed,
                                                 int threads = 0,
                                                 long burn_in = 0) {
  if (r < part.start_level || r >= part.deepest)
    throw OutsidePartitionError("estimate_transitions: r outside the partition");
  if (samples < 1000)
    throw DomainError("estimate_transitions: samples >= 1000 required");
  long prec = nest.f.precision();
  EmpiricalTransitions out;
  out.r = r;
  out.samples = samples;

  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  struct Slot {
    int k_to = 0;
    bool absorbed = false;
    bool dropped = false;
    long resamples = 0;
  };
  std::vector<Slot> slots(static_cast<size_t>(samples));
  BranchCache cache;
  for (int k = part.start_level; k < part.deepest; ++k)
    cache.ensure(nest, part, k);  // verify once before the parallel section
  auto worker = [&](int tid) {
    BranchCache local = cache;
    for (long i = tid; i < samples; i += nthreads) {
      SplitMix64 rng(seed, static_cast<uint64_t>(i));
      Slot& sl = slots[static_cast<size_t>(i)];
      Real x = detail::sample_annulus(part, r, rng, prec, &sl.resamples);
      for (long b = 0; b < burn_in; ++b) {
        auto st = induced_step(nest, part, x, local);
        if (st.absorbed || st.k_to < part.start_level) {
          sl.dropped = true;
          break;
        }
        x = st.x_next;
      }
      if (!sl.dropped && burn_in > 0 &&
          part.level_of((x - part.c).abs()) != r)
        sl.dropped = true;
      if (sl.dropped) continue;
      auto st = induced_step(nest, part, x, local);
      sl.k_to = st.k_to;
      sl.absorbed = st.absorbed;
    }
  };
  if (nthreads == 1 || samples < 256) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& sl : slots) {
    out.boundary_resamples += sl.resamples;
    if (sl.dropped)
      ++out.dropped;
    else if (sl.absorbed)
      ++out.absorbed;
    else
      ++out.counts[sl.k_to];
  }
  long kept = samples - out.absorbed - out.dropped;
  int max_i = 0;
  for (const auto& [kt, cnt] : out.counts) {
    int i = kt - r + static_cast<int>(out.k0) + 1;
    if (i < 1)
      throw BranchError("estimate_transitions: observed target below r - k0");
    max_i = std::max(max_i, i);
  }
  out.nu_hat.assign(static_cast<size_t>(max_i), Real(0L, prec));
  if (kept > 0)
    for (const auto& [kt, cnt] : out.counts) {
      int i = kt - r + static_cast<int>(out.k0) + 1;
      out.nu_hat[static_cast<size_t>(i - 1)] = Real(cnt, prec) / Real(kept, prec);
    }
  return out;
}

struct BasinReport {
  long samples = 0;
  long horizon = 0;
  int start_level = 1;
  int r0 = 0;
  double drift_mean = 0.0;       // mean per-step level jump
  double escape_fraction = 0.0;  // never dropped to level <= r0
  double recurrence_fraction = 0.0;
  double absorbed_fraction = 0.0;  // reached below the computed nest
  long total_steps = 0;
  std::map<int, long> jump_counts;  // k_to - k_from tallies (non-absorbed)
  std::vector<int> min_level, max_level;
};

// Monte Carlo over walkers started Lebesgue-uniformly in the top annulus.
// A walker stops when it leaves through the top (level <= r0: recurrence)
// or lands deeper than the computed nest (absorbed).
inline BasinReport montecarlo_basin(const NestData& nest,
                                    const AnnulusPartition& part, long samples,
                                    long horizon, uint64_t seed, int r0 = 0,
                                    int start_level = 1, int threads = 0) {
  if (samples < 1) throw DomainError("montecarlo_basin: samples >= 1 required");
  if (start_level < part.start_level || start_level >= part.deepest)
    throw OutsidePartitionError("montecarlo_basin: start level outside partition");
  long prec = nest.f.precision();
  BasinReport rep;
  rep.samples = samples;
  rep.horizon = horizon;
  rep.start_level = start_level;
  rep.r0 = r0;
  rep.min_level.resize(static_cast<size_t>(samples));
  rep.max_level.resize(static_cast<size_t>(samples));

  struct Slot {
    bool recurred = false;
    bool absorbed = false;
    int min_lv = 0, max_lv = 0;
    long steps = 0;
    std::map<int, long> jumps;
    long resamples = 0;
  };
  std::vector<Slot> slots(static_cast<size_t>(samples));
  BranchCache shared;
  for (int k = part.start_level; k < part.deepest; ++k)
    shared.ensure(nest, part, k);

  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  auto worker = [&](int tid) {
    BranchCache cache = shared;
    for (long i = tid; i < samples; i += nthreads) {
      SplitMix64 rng(seed, static_cast<uint64_t>(i));
      Slot& sl = slots[static_cast<size_t>(i)];
      Real x = detail::sample_annulus(part, start_level, rng, prec, &sl.resamples);
      int level = start_level;
      sl.min_lv = sl.max_lv = level;
      for (long t = 0; t < horizon; ++t) {
        auto st = induced_step(nest, part, x, cache);
        ++sl.steps;
        if (st.absorbed) {
          sl.absorbed = true;
          sl.max_lv = std::max(sl.max_lv, part.deepest);
          break;
        }
        sl.jumps[st.k_to - st.k_from] += 1;
        level = st.k_to;
        x = st.x_next;
        sl.min_lv = std::min(sl.min_lv, level);
        sl.max_lv = std::max(sl.max_lv, level);
        if (level <= r0) {
          sl.recurred = true;
          break;
        }
      }
    }
  };
  if (nthreads == 1 || samples < 64) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  double jump_sum = 0.0;
  long jump_n = 0;
  for (long i = 0; i < samples; ++i) {
    const Slot& sl = slots[static_cast<size_t>(i)];
    rep.min_level[static_cast<size_t>(i)] = sl.min_lv;
    rep.max_level[static_cast<size_t>(i)] = sl.max_lv;
    rep.total_steps += sl.steps;
    if (sl.recurred) rep.recurrence_fraction += 1.0;
    if (sl.absorbed) rep.absorbed_fraction += 1.0;
    for (const auto& [dk, cnt] : sl.jumps) {
      rep.jump_counts[dk] += cnt;
      jump_sum += static_cast<double>(dk) * static_cast<double>(cnt);
      jump_n += cnt;
    }
  }
  rep.recurrence_fraction /= static_cast<double>(samples);
  rep.absorbed_fraction /= static_cast<double>(samples);
  rep.escape_fraction = 1.0 - rep.recurrence_fraction;
  rep.drift_mean = jump_n > 0 ? jump_sum / static_cast<double>(jump_n) : 0.0;
  return rep;
}

}  // namespace fibwalk

#endif  // FIBWALK_INDUCED_HPP
