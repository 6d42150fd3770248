#pragma once

// Integration of the n-gram distribution with LSA information: partial
// reranking, linear and geometric interpolation, and density-based
// confidence weights. All distributions here are indexed by n-gram
// vocabulary id.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "wordpred/corpus.hpp"
#include "wordpred/error.hpp"
#include "wordpred/lsa_predictor.hpp"
#include "wordpred/semantic_space.hpp"

namespace wordpred {

using Distribution = std::vector<double>;

/// Floor for LSA probabilities inside geometric interpolation.
inline constexpr double kLsaFloor = 1e-12;

/// Word correspondence between the n-gram vocabulary and a space.
struct VocabBridge {
  static constexpr std::int64_t kNone = -1;
  std::vector<std::int64_t> lm_to_space;
  std::vector<std::int64_t> space_to_lm;

  static VocabBridge build(const Vocabulary& lm, const SemanticSpace& space) {
    VocabBridge b;
    b.lm_to_space.assign(lm.size(), kNone);
    b.space_to_lm.assign(space.size(), kNone);
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (auto id = lm.find(space.word(i)); id && *id != lm.unk_id()) {
        b.lm_to_space[*id] = static_cast<std::int64_t>(i);
        b.space_to_lm[i] = static_cast<std::int64_t>(*id);
      }
    }
    return b;
  }

  std::optional<std::size_t> space_index(WordId id) const {
    if (id >= lm_to_space.size() || lm_to_space[id] == kNone) return std::nullopt;
    return static_cast<std::size_t>(lm_to_space[id]);
  }
};

inline double normalize(Distribution& d) {
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  if (total > 0.0) {
    for (double& p : d) p /= total;
  }
  return total;
}

/// Restricts an LSA distribution to the n-gram vocabulary and renormalizes
/// it there. Words outside the space get 0. Empty when no mass survives.
inline std::optional<Distribution> project_lsa(const LsaDistribution& lsa, const VocabBridge& bridge) {
  Distribution out(bridge.lm_to_space.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < lsa.probs.size() && i < bridge.space_to_lm.size(); ++i) {
    if (bridge.space_to_lm[i] != VocabBridge::kNone) {
      out[static_cast<std::size_t>(bridge.space_to_lm[i])] = lsa.probs[i];
      total += lsa.probs[i];
    }
  }
  if (!(total > 0.0)) return std::nullopt;
  for (double& p : out) p /= total;
  return out;
}

namespace detail {

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("interpolation weight must be in [0,1]");
}

inline void check_sizes(const Distribution& a, const Distribution& b) {
  if (a.size() != b.size()) throw Error("distributions cover different vocabularies");
}

}  // namespace detail

/// P'(w) = lambda * P_b(w) + (1 - lambda) * P_s(w); lambda is the weight
/// of the base model.
inline Distribution linear_interpolate(const Distribution& base, const Distribution& lsa, double lambda) {
  detail::check_sizes(base, lsa);
  detail::check_lambda(lambda);
  Distribution out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = lambda * base[i] + (1.0 - lambda) * lsa[i];
  return out;
}

/// Per-word base weights; the result is renormalized because the
/// convex combinations no longer sum to one.
inline Distribution linear_interpolate(const Distribution& base, const Distribution& lsa,
                                       std::span<const double> lambdas) {
  detail::check_sizes(base, lsa);
  if (lambdas.size() != base.size()) throw Error("one interpolation weight per word expected");
  Distribution out(base.size());
  bool all_base = true;
  for (std::size_t i = 0; i < base.size(); ++i) {
    detail::check_lambda(lambdas[i]);
    all_base = all_base && lambdas[i] == 1.0;
    out[i] = lambdas[i] * base[i] + (1.0 - lambdas[i]) * lsa[i];
  }
  if (!all_base) normalize(out);
  return out;
}

namespace detail {

inline double geometric_term(double pb, double ps, double lambda) {
  if (lambda == 1.0) return pb;
  if (pb <= 0.0 && lambda > 0.0) return 0.0;
  ps = std::max(ps, kLsaFloor);
  if (lambda == 0.0) return ps;
  return std::exp(lambda * std::log(pb) + (1.0 - lambda) * std::log(ps));
}

}  // namespace detail

/// P'(w) proportional to P_b(w)^lambda * P_s(w)^(1 - lambda), with zero LSA
/// probabilities floored at kLsaFloor.
inline Distribution geometric_interpolate(const Distribution& base, const Distribution& lsa, double lambda) {
  detail::check_sizes(base, lsa);
  detail::check_lambda(lambda);
  Distribution out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = detail::geometric_term(base[i], lsa[i], lambda);
  normalize(out);
  return out;
}

inline Distribution geometric_interpolate(const Distribution& base, const Distribution& lsa,
                                          std::span<const double> lambdas) {
  detail::check_sizes(base, lsa);
  if (lambdas.size() != base.size()) throw Error("one interpolation weight per word expected");
  Distribution out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    detail::check_lambda(lambdas[i]);
    out[i] = detail::geometric_term(base[i], lsa[i], lambdas[i]);
  }
  normalize(out);
  return out;
}

/// LSA-side coefficient beta * D(w) when D(w) > 0, else 0.
inline double confidence_lambda(double density, double beta) {
  if (!(beta >= 0.0)) throw Error("confidence weight beta must be non-negative");
  return density > 0.0 ? beta * density : 0.0;
}

inline double confidence_lambda(const SemanticSpace& space, std::string_view word, double beta) {
  if (!(beta >= 0.0)) throw Error("confidence weight beta must be non-negative");
  auto i = space.find(word);
  return i ? confidence_lambda(space.stored_density(*i), beta) : 0.0;
}

/// Base-model weights (1 - lambda_i) for every n-gram word.
inline std::vector<double> confidence_base_weights(const SemanticSpace& space, const VocabBridge& bridge,
                                                   double beta) {
  std::vector<double> out(bridge.lm_to_space.size(), 1.0);
  for (std::size_t w = 0; w < out.size(); ++w) {
    if (auto i = bridge.space_index(static_cast<WordId>(w))) {
      out[w] = 1.0 - confidence_lambda(space.stored_density(*i), beta);
    }
  }
  return out;
}

/// The n_best most probable words, ties by id.
inline std::vector<WordId> best_n(const Distribution& base, std::size_t n_best) {
  std::vector<WordId> ids(base.size());
  std::iota(ids.begin(), ids.end(), WordId{0});
  const std::size_t take = std::min(n_best, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&](WordId a, WordId b) { return base[a] != base[b] ? base[a] > base[b] : a < b; });
  ids.resize(take);
  return ids;
}

/// Largest fraction of a BEST_n member's base probability given up to pay
/// for the bonuses.
inline constexpr double kMaxRerankSubtraction = 0.5;

/// Partial reranking before the final renormalization. Each in-space
/// member of the n_best list gets the bonus beta * cos(w,h) * D(w)
/// (negative bonuses are clipped to 0). The total bonus is taken from the
/// in-space members in proportion to their base probability, but no member
/// loses more than kMaxRerankSubtraction of it. Out-of-space members and
/// words outside the list are untouched.
inline Distribution partial_rerank_unnormalized(const Distribution& base, const ContextScores& scores,
                                                const SemanticSpace& space, const VocabBridge& bridge,
                                                std::size_t n_best, double beta) {
  if (n_best == 0) throw Error("reranking list size must be at least 1");
  Distribution out = base;
  if (beta == 0.0 || scores.degenerate) return out;
  const auto best = best_n(base, n_best);
  std::vector<double> bonus(best.size(), 0.0);
  std::vector<bool> in_space(best.size(), false);
  double bonus_total = 0.0, mass = 0.0;
  for (std::size_t j = 0; j < best.size(); ++j) {
    if (auto i = bridge.space_index(best[j])) {
      in_space[j] = true;
      mass += base[best[j]];
      const double cos = scores.cosines(static_cast<Eigen::Index>(*i));
      bonus[j] = std::max(0.0, beta * cos * space.stored_density(*i));
      bonus_total += bonus[j];
    }
  }
  if (!(bonus_total > 0.0) || !(mass > 0.0)) return out;
  const double keep = 1.0 - std::min(bonus_total / mass, kMaxRerankSubtraction);
  for (std::size_t j = 0; j < best.size(); ++j) {
    if (in_space[j]) out[best[j]] = base[best[j]] * keep + bonus[j];
  }
  return out;
}

inline Distribution partial_rerank(const Distribution& base, const ContextScores& scores, const SemanticSpace& space,
                                   const VocabBridge& bridge, std::size_t n_best, double beta) {
  if (beta == 0.0) return base;
  Distribution out = partial_rerank_unnormalized(base, scores, space, bridge, n_best, beta);
  normalize(out);
  return out;
}

}  // namespace wordpred
