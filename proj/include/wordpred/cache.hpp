#pragma once

// Exponentially decaying word cache and its semantic ("bring your
// friends") variant.

#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "wordpred/corpus.hpp"
#include "wordpred/error.hpp"

namespace wordpred {

/// Gaussian bump peaking at position mu: exp(-0.5 * ((p - mu) / sigma)^2)
/// with sigma = mu/3 before the peak and length/3 from the peak on.
/// Absent words (no position) get 0.
inline double decay_factor(std::optional<double> position, double mu, double length) {
  if (!position) return 0.0;
  const double p = *position;
  const double sigma = p < mu ? mu / 3.0 : length / 3.0;
  if (!(sigma > 0.0)) return p == mu ? 1.0 : 0.0;
  const double z = (p - mu) / sigma;
  return std::exp(-0.5 * z * z);
}

struct CacheEntry {
  WordId word = 0;
  /// 1 for words that occurred; the source cosine for added neighbours.
  double weight = 1.0;
  bool operator==(const CacheEntry&) const = default;
};

struct CacheParams {
  /// Base length l; the semantic variant scales it with the group size.
  std::size_t length = 400;
  /// Base peak position.
  double mu = 20.0;
  /// Influence constant.
  double beta = 0.1 / 400.0;
  bool semantic = false;
  /// Neighbours per occurred word and their cosine threshold (semantic only).
  std::size_t neighbors = 10;
  double theta = 0.4;
};

/// Newest-first recency buffer. Position 1 is the most recent entry.
class CacheState {
 public:
  CacheState() = default;
  explicit CacheState(CacheParams params) : params_(params) {
    if (params_.length == 0) throw Error("cache length must be at least 1");
  }

  const CacheParams& params() const { return params_; }
  const std::deque<CacheEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  /// 1 + average number of neighbours added per occurred word; l and mu
  /// are scaled by it so the decay curve follows word positions.
  double group_scale() const {
    if (!params_.semantic || occurred_ == 0) return 1.0;
    return 1.0 + static_cast<double>(neighbors_added_) / static_cast<double>(occurred_);
  }
  double effective_length() const { return static_cast<double>(params_.length) * group_scale(); }
  double effective_mu() const { return params_.mu * group_scale(); }

  /// Prepends an occurred word (weight 1) followed by its neighbours, in the
  /// given order, then evicts beyond the effective length.
  void push(WordId word, std::span<const CacheEntry> neighbors = {}) {
    for (auto it = neighbors.rbegin(); it != neighbors.rend(); ++it) entries_.push_front(*it);
    entries_.push_front({word, 1.0});
    ++occurred_;
    neighbors_added_ += neighbors.size();
    const auto cap = static_cast<std::size_t>(std::floor(effective_length()));
    while (entries_.size() > std::max<std::size_t>(cap, 1)) entries_.pop_back();
  }

  /// beta * sum over entries equal to `word` of weight * decay(position).
  double score(WordId word) const {
    double total = 0.0;
    const double mu = effective_mu(), len = effective_length();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].word == word) {
        total += entries_[i].weight * decay_factor(static_cast<double>(i + 1), mu, len);
      }
    }
    return params_.beta * total;
  }

  /// Adds score(w) to mass[w] for every cached word.
  void add_scores(std::vector<double>& mass) const {
    const double mu = effective_mu(), len = effective_length();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.word < mass.size()) {
        mass[e.word] += params_.beta * e.weight * decay_factor(static_cast<double>(i + 1), mu, len);
      }
    }
  }

 private:
  CacheParams params_;
  std::deque<CacheEntry> entries_;
  std::size_t occurred_ = 0;
  std::size_t neighbors_added_ = 0;
};

/// P'(w) proportional to P_base(w) + cache score(w). Returns the base
/// distribution unchanged when the cache adds no mass.
inline std::vector<double> combine_cache(const std::vector<double>& base, const CacheState& cache) {
  std::vector<double> out = base;
  std::vector<double> mass(base.size(), 0.0);
  cache.add_scores(mass);
  double added = 0.0;
  for (double m : mass) added += m;
  if (!(added > 0.0)) return out;
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += (out[i] += mass[i]);
  for (double& p : out) p /= total;
  return out;
}

}  // namespace wordpred
