#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace qpool_test {

/// Assays for one pool under exact tests, written directly from the stopping
/// rules: the pool sum is compared to C, MPA subtracts tested values and the
/// last member is deduced.
inline std::uint64_t mp_assays(const std::vector<double>& v, double C) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum > C ? 1 + v.size() : 1;
}

inline std::uint64_t sequential_assays(const std::vector<double>& v_in_test_order, double C) {
  double rem = 0.0;
  for (double x : v_in_test_order) rem += x;
  std::uint64_t assays = 1;
  for (std::size_t j = 0; j + 1 < v_in_test_order.size() && rem > C; ++j) {
    ++assays;
    rem -= v_in_test_order[j];
  }
  return assays;
}

/// Sum over K! orders of the sequential assay count.
inline std::uint64_t mpa_assays_all_orders(std::vector<double> v, double C) {
  std::sort(v.begin(), v.end());
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::uint64_t total = 0;
  std::vector<double> ordered(v.size());
  do {
    for (std::size_t k = 0; k < idx.size(); ++k) ordered[k] = v[idx[k]];
    total += sequential_assays(ordered, C);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return total;
}

/// Descending score order; scores are assumed distinct.
inline std::uint64_t mmpa_assays(const std::vector<double>& v, const std::vector<double>& s, double C) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  std::vector<double> ordered;
  for (std::size_t i : idx) ordered.push_back(v[i]);
  return sequential_assays(ordered, C);
}

/// Exact efficiency as num / den over every choice of left-out remainder and
/// every partition of the rest into unordered pools of size K (and, for MPA,
/// every within-pool order).
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 0;
};

struct PartitionOracle {
  Fraction mp, mpa, mmpa;
};

inline PartitionOracle partition_oracle(const std::vector<double>& v, const std::vector<double>& s, std::size_t K,
                                        double C) {
  const std::size_t N = v.size();
  const std::size_t pools = N / K;
  const std::size_t rest = N - pools * K;
  std::uint64_t k_fact = 1;
  for (std::size_t k = 2; k <= K; ++k) k_fact *= k;

  PartitionOracle out;
  std::uint64_t structures = 0;
  std::vector<bool> used(N, false);
  std::vector<std::size_t> block;

  std::uint64_t mp = 0, mpa = 0, mmpa = 0;
  std::function<void(std::uint64_t, std::uint64_t, std::uint64_t)> partition =
      [&](std::uint64_t a_mp, std::uint64_t a_mpa, std::uint64_t a_mmpa) {
        std::size_t first = N;
        for (std::size_t i = 0; i < N; ++i) {
          if (!used[i]) {
            first = i;
            break;
          }
        }
        if (first == N) {
          ++structures;
          mp += a_mp;
          mpa += a_mpa;
          mmpa += a_mmpa;
          return;
        }
        // choose K-1 companions for `first` among later unused items
        std::vector<std::size_t> cand;
        for (std::size_t i = first + 1; i < N; ++i) {
          if (!used[i]) cand.push_back(i);
        }
        std::vector<bool> pick(cand.size(), false);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(K - 1), true);
        used[first] = true;
        do {
          std::vector<std::size_t> members{first};
          for (std::size_t c = 0; c < cand.size(); ++c) {
            if (pick[c]) members.push_back(cand[c]);
          }
          std::vector<double> pv, ps;
          for (std::size_t m : members) {
            pv.push_back(v[m]);
            ps.push_back(s.empty() ? 0.0 : s[m]);
            used[m] = true;
          }
          partition(a_mp + mp_assays(pv, C) * k_fact, a_mpa + mpa_assays_all_orders(pv, C),
                    a_mmpa + (s.empty() ? 0 : mmpa_assays(pv, ps, C) * k_fact));
          for (std::size_t m : members) {
            if (m != first) used[m] = false;
          }
        } while (std::prev_permutation(pick.begin(), pick.end()));
        used[first] = false;
      };

  // left-out remainder sets of size `rest`
  std::vector<bool> out_pick(N, false);
  std::fill(out_pick.begin(), out_pick.begin() + static_cast<std::ptrdiff_t>(rest), true);
  do {
    for (std::size_t i = 0; i < N; ++i) used[i] = out_pick[i];
    partition(0, 0, 0);
  } while (std::prev_permutation(out_pick.begin(), out_pick.end()));

  const std::uint64_t den = structures * k_fact * pools * K;
  out.mp = {mp, den};
  out.mpa = {mpa, den};
  out.mmpa = {mmpa, den};
  return out;
}

inline bool fraction_equals(std::uint64_t a_num, std::uint64_t a_den, const Fraction& b) {
  return a_num * b.den == b.num * a_den;
}

}  // namespace qpool_test
