#pragma once

// Context vectors and the cosine-to-probability transform of the LSA
// predictor.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wordpred/error.hpp"
#include "wordpred/semantic_space.hpp"

namespace wordpred {

inline constexpr double kDefaultGamma = 5.0;

/// Sum of the unit vectors of the in-space history words (not normalized).
struct ContextVector {
  Eigen::VectorXd v;
  std::size_t word_count = 0;

  bool empty() const { return word_count == 0; }
};

inline ContextVector context_vector(const SemanticSpace& space, std::span<const std::string> history) {
  ContextVector ctx{Eigen::VectorXd::Zero(space.dims()), 0};
  for (const auto& w : history) {
    if (auto i = space.find(w)) {
      ctx.v += space.vector(*i).transpose();
      ++ctx.word_count;
    }
  }
  return ctx;
}

/// Cosine of every space word with a context, plus the minimum. Computed
/// once per context and shared by the combiners.
struct ContextScores {
  Eigen::VectorXd cosines;
  double cos_min = 0.0;
  /// No in-space context word, a zero context vector, or all cosines equal.
  bool degenerate = true;
};

inline ContextScores score_context(const SemanticSpace& space, const ContextVector& ctx) {
  ContextScores s;
  const double norm = ctx.v.size() ? ctx.v.norm() : 0.0;
  if (ctx.empty() || space.size() == 0 || !(norm > 0.0)) {
    s.cosines = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.size()));
    return s;
  }
  s.cosines = space.vectors() * (ctx.v / norm);
  s.cos_min = s.cosines.minCoeff();
  s.degenerate = !(s.cosines.maxCoeff() > s.cos_min);
  return s;
}

struct LsaDistribution {
  /// Indexed like the space's words.
  std::vector<double> probs;
  double gamma = kDefaultGamma;
  bool degenerate = false;
};

/// P(w|h) proportional to (cos(w,h) - cos_min(h))^gamma over the space
/// vocabulary; uniform (and flagged degenerate) when that is undefined.
inline LsaDistribution lsa_distribution(const ContextScores& scores, double gamma) {
  if (!(gamma > 0.0)) throw Error("contrast exponent gamma must be positive");
  LsaDistribution d;
  d.gamma = gamma;
  const auto n = static_cast<std::size_t>(scores.cosines.size());
  if (n == 0) {
    d.degenerate = true;
    return d;
  }
  d.probs.resize(n);
  double total = 0.0;
  if (!scores.degenerate) {
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = scores.cosines(static_cast<Eigen::Index>(i)) - scores.cos_min;
      d.probs[i] = diff > 0.0 ? std::pow(diff, gamma) : 0.0;
      total += d.probs[i];
    }
  }
  if (scores.degenerate || !(total > 0.0) || !std::isfinite(total)) {
    std::fill(d.probs.begin(), d.probs.end(), 1.0 / static_cast<double>(n));
    d.degenerate = true;
    return d;
  }
  for (double& p : d.probs) p /= total;
  return d;
}

inline LsaDistribution lsa_distribution(const SemanticSpace& space, const ContextVector& ctx,
                                        double gamma = kDefaultGamma) {
  if (!(gamma > 0.0)) throw Error("contrast exponent gamma must be positive");
  return lsa_distribution(score_context(space, ctx), gamma);
}

}  // namespace wordpred
