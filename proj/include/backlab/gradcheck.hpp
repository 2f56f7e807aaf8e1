#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "backlab/model.hpp"
#include "backlab/ops.hpp"
#include "backlab/tensor.hpp"

namespace backlab {

struct GradCheckOptions {
  // Entries compared per parameter tensor; tensors at most this large are
  // offered exhaustively.
  int samples_per_tensor = 24;
  uint64_t sample_seed = 0;
  // Probe distance. Small enough that softmax curvature stays below the
  // comparison tolerance, large enough that float64 cancellation noise does
  // not dominate the quotient.
  double h = 1e-5;
  // Gradient magnitude below which entries are compared absolutely: the
  // quotient (lp-lm)/2h carries ~eps*loss/h of rounding noise, so entries
  // this small cannot be certified relatively by a finite-difference oracle.
  // An entry passes a tolerance t when |a-n| <= t * max(|a|, |n|, floor).
  double denominator_floor = 1e-3;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  size_t entries_checked = 0;
  // Candidates rejected because the +-h evaluations landed in different
  // relu/pool regions, where a central difference does not estimate the
  // one-sided analytic gradient.
  size_t kink_skipped = 0;
  // Tensors where every candidate straddled a region boundary. This happens
  // when the evaluation point sits exactly on a kink (e.g. zero-initialized
  // biases behind a fully dead relu window make the next preactivation
  // exactly 0); no probe distance can certify a subgradient choice there, so
  // the tensor is reported rather than scored.
  size_t tensors_unresolved = 0;
  size_t worst_tensor = 0;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference check of the analytic gradient. Both sides run in
// float64 through the same kernels, so the comparison probes the math, not
// float32 rounding. Relative error per entry is
// |analytic - numeric| / max(|analytic|, |numeric|, denominator_floor).
//
// The loss is only piecewise smooth (relu, maxpool); an entry whose +-h
// probes leave the center's region is skipped and another drawn, up to a
// budget. A tensor whose every candidate straddles counts as unresolved in
// the result instead of being scored, because the evaluation point then sits
// on a kink where no finite difference estimates a subgradient.
inline GradCheckResult finite_diff_check(const Model& m, const Batch& batch,
                                         GradCheckOptions opt = {}) {
  validate_batch(batch, m.arch.classes);
  require(opt.h > 0.0, ErrKind::config, "finite-difference step must be positive");
  const int n = batch.n();
  std::vector<double> input(batch.images.data.begin(), batch.images.data.end());
  detail::Params<double> params(m.params.size());
  for (size_t i = 0; i < m.params.size(); ++i) {
    params[i].assign(m.params[i].begin(), m.params[i].end());
  }

  auto cache = detail::forward_pass<double>(m.arch, params, input, n);
  auto bw = detail::backward_pass<double>(m.arch, params, cache, batch.labels);
  const uint64_t pat_center = detail::pattern_digest(m.arch, cache);

  struct Probe {
    size_t index;
    double numeric;
    bool stable;
  };

  std::mt19937_64 rng(opt.sample_seed);
  GradCheckResult res;
  for (size_t t = 0; t < params.size(); ++t) {
    const size_t len = params[t].size();
    const size_t want = std::min(len, static_cast<size_t>(opt.samples_per_tensor));
    std::vector<size_t> candidates;
    if (len <= static_cast<size_t>(opt.samples_per_tensor)) {
      candidates.resize(len);
      for (size_t j = 0; j < len; ++j) candidates[j] = j;
    } else {
      std::uniform_int_distribution<size_t> dist(0, len - 1);
      candidates.resize(want * 8);
      for (size_t& c : candidates) c = dist(rng);
    }

    auto probe_at = [&](size_t idx) {
      const double saved = params[t][idx];
      uint64_t pat_p = 0, pat_m = 0;
      params[t][idx] = saved + opt.h;
      const double lp =
          detail::loss_only<double>(m.arch, params, input, n, batch.labels, &pat_p);
      params[t][idx] = saved - opt.h;
      const double lm =
          detail::loss_only<double>(m.arch, params, input, n, batch.labels, &pat_m);
      params[t][idx] = saved;
      // Both endpoints must share the center's region: agreeing endpoints can
      // still bracket a dip through a boundary in the middle.
      const bool stable = pat_p == pat_center && pat_m == pat_center;
      return Probe{idx, (lp - lm) / (2.0 * opt.h), stable};
    };

    std::vector<Probe> kept;
    for (size_t c : candidates) {
      if (kept.size() >= want) break;
      Probe p = probe_at(c);
      if (p.stable) {
        kept.push_back(p);
      } else {
        ++res.kink_skipped;
      }
    }
    if (kept.empty()) {
      ++res.tensors_unresolved;
      continue;
    }

    for (const Probe& p : kept) {
      const double analytic = bw.grads[t][p.index];
      const double rel =
          std::abs(analytic - p.numeric) /
          std::max({std::abs(analytic), std::abs(p.numeric), opt.denominator_floor});
      ++res.entries_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_tensor = t;
        res.worst_index = p.index;
        res.worst_analytic = analytic;
        res.worst_numeric = p.numeric;
      }
    }
  }
  return res;
}

}  // namespace backlab
