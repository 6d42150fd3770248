#pragma once

// A configured predictor: n-gram model + optional space + combiner, with
// per-session prediction state and top-n candidate selection.

#include <algorithm>
#include <deque>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "wordpred/cache.hpp"
#include "wordpred/combiners.hpp"
#include "wordpred/config.hpp"
#include "wordpred/corpus.hpp"
#include "wordpred/lsa_predictor.hpp"
#include "wordpred/ngram.hpp"
#include "wordpred/semantic_space.hpp"
#include "wordpred/utf8.hpp"

namespace wordpred {

struct Prediction {
  std::string word;
  WordId id = 0;
  double probability = 0.0;
  bool operator==(const Prediction&) const = default;
};

using PredictionList = std::vector<Prediction>;

/// Mutable per-session context. Created by Pipeline::new_state().
struct PredictionState {
  /// Ids of the current sentence, starting with <s> when the model has it.
  std::vector<WordId> history;
  ContextVector context;
  /// Space indices of the most recent words (only with a context window).
  std::deque<std::optional<std::size_t>> recent;
  std::optional<CacheState> cache;
  std::size_t words = 0;
};

class Pipeline {
 public:
  Pipeline(std::shared_ptr<const NGramModel> lm, std::shared_ptr<const SemanticSpace> space, CombinerConfig config)
      : lm_(std::move(lm)), space_(std::move(space)), config_(std::move(config)) {
    if (!lm_) throw Error("a language model is required");
    config_.validate();
    if (uses_space(config_.method) && !space_) {
      throw Error("method '" + std::string(to_string(config_.method)) + "' needs a semantic space");
    }
    const auto& vocab = lm_->vocab();
    if (space_) bridge_ = VocabBridge::build(vocab, *space_);
    predictable_.assign(vocab.size(), false);
    for (WordId id = 0; id < vocab.size(); ++id) {
      const auto& w = vocab.word(id);
      if (id == vocab.unk_id() || w.empty() || w == kSentenceStart || w == kSentenceEnd || is_numeral(w)) continue;
      std::size_t pos = 0;
      if (utf8::is_punctuation(utf8::decode(w, pos))) continue;
      predictable_[id] = true;
      sorted_.push_back(id);
    }
    std::sort(sorted_.begin(), sorted_.end(), [&](WordId a, WordId b) { return vocab.word(a) < vocab.word(b); });
    if (config_.method == Method::cwli || config_.method == Method::cwgi) {
      base_weights_ = confidence_base_weights(*space_, bridge_, config_.beta);
    }
    history_keep_ = static_cast<std::size_t>(std::max(1, std::min(config_.order, lm_->order())) - 1);
  }

  const NGramModel& model() const { return *lm_; }
  const SemanticSpace* space() const { return space_.get(); }
  const CombinerConfig& config() const { return config_; }
  const VocabBridge& bridge() const { return bridge_; }
  bool predictable(WordId id) const { return id < predictable_.size() && predictable_[id]; }

  PredictionState new_state() const {
    PredictionState s;
    if (auto b = lm_->bos()) s.history.push_back(*b);
    if (space_) s.context = {Eigen::VectorXd::Zero(space_->dims()), 0};
    if (config_.method == Method::cache || config_.method == Method::semantic_cache) {
      CacheParams p;
      p.length = config_.cache_length;
      p.mu = config_.mu;
      p.beta = config_.beta;
      p.semantic = config_.method == Method::semantic_cache;
      p.neighbors = config_.neighbors;
      p.theta = config_.theta;
      s.cache.emplace(p);
    }
    return s;
  }

  void commit_word(PredictionState& s, std::string_view surface) const {
    const std::string word = utf8::to_lower(surface);
    const WordId id = lm_->vocab().lookup(word);
    s.history.push_back(id);
    if (s.history.size() > static_cast<std::size_t>(kMaxOrder)) s.history.erase(s.history.begin());
    ++s.words;

    std::optional<std::size_t> sidx;
    if (space_) sidx = space_->find(word);
    if (space_) {
      if (config_.context_window) {
        s.recent.push_back(sidx);
        if (sidx) add_to_context(s.context, *sidx, 1.0);
        if (s.recent.size() > *config_.context_window) {
          if (auto old = s.recent.front()) add_to_context(s.context, *old, -1.0);
          s.recent.pop_front();
        }
      } else if (sidx) {
        add_to_context(s.context, *sidx, 1.0);
      }
    }

    if (s.cache && id != lm_->vocab().unk_id()) {
      std::vector<CacheEntry> friends;
      if (s.cache->params().semantic && sidx) {
        for (const auto& n : space_->neighbors(*sidx, config_.neighbors, config_.theta)) {
          if (bridge_.space_to_lm[n.index] == VocabBridge::kNone) continue;
          friends.push_back({static_cast<WordId>(bridge_.space_to_lm[n.index]), n.cosine});
        }
      }
      s.cache->push(id, friends);
    }
  }

  /// Sentence end: the n-gram history restarts; LSA context and cache persist.
  void commit_boundary(PredictionState& s) const {
    s.history.clear();
    if (auto b = lm_->bos()) s.history.push_back(*b);
  }

  /// Commits a token: words extend the context, sentence-final marks and
  /// boundary tokens restart the n-gram history, other punctuation is ignored.
  void commit(PredictionState& s, const Token& t) const {
    if (t.kind == TokenKind::word) {
      commit_word(s, t.surface);
    } else if (t.kind == TokenKind::sentence_boundary) {
      commit_boundary(s);
    } else {
      std::size_t pos = 0;
      if (!t.surface.empty() && utf8::is_sentence_final(utf8::decode(t.surface, pos))) commit_boundary(s);
    }
  }

  std::span<const WordId> lm_history(const PredictionState& s) const {
    std::span<const WordId> h(s.history);
    return h.size() > history_keep_ ? h.subspan(h.size() - history_keep_) : h;
  }

  /// Combined distribution over the n-gram vocabulary for the next word.
  Distribution distribution(const PredictionState& s) const {
    Distribution base;
    lm_->distribution(lm_history(s), base);
    switch (config_.method) {
      case Method::baseline:
        return base;
      case Method::cache:
      case Method::semantic_cache:
        return s.cache ? combine_cache(base, *s.cache) : base;
      case Method::rerank:
        return partial_rerank(base, score_context(*space_, s.context), *space_, bridge_, config_.n_best,
                              config_.beta);
      case Method::li:
      case Method::gi:
      case Method::cwli:
      case Method::cwgi:
        break;
    }
    const auto lsa = project_lsa(lsa_distribution(*space_, s.context, config_.gamma), bridge_);
    if (!lsa) return base;
    switch (config_.method) {
      case Method::li:
        return linear_interpolate(base, *lsa, config_.lambda);
      case Method::gi:
        return geometric_interpolate(base, *lsa, config_.lambda);
      case Method::cwli:
        return linear_interpolate(base, *lsa, base_weights_);
      default:
        return geometric_interpolate(base, *lsa, base_weights_);
    }
  }

  /// Top-n predictable words starting with `prefix` (case-insensitive) and
  /// not in `excluded`, by descending probability then id.
  PredictionList top_n(const Distribution& dist, std::string_view prefix, std::size_t n,
                       const WordSet& excluded = {}) const {
    if (n == 0) throw Error("list size must be at least 1");
    const auto& vocab = lm_->vocab();
    const std::string p = utf8::to_lower(prefix);
    auto first = std::lower_bound(sorted_.begin(), sorted_.end(), p,
                                  [&](WordId id, const std::string& key) { return vocab.word(id) < key; });
    const auto better = [&](WordId a, WordId b) { return dist[a] != dist[b] ? dist[a] > dist[b] : a < b; };
    std::priority_queue<WordId, std::vector<WordId>, decltype(better)> heap(better);
    for (auto it = first; it != sorted_.end(); ++it) {
      const auto& w = vocab.word(*it);
      if (w.compare(0, p.size(), p) != 0) break;
      if (excluded.contains(w)) continue;
      if (heap.size() < n) {
        heap.push(*it);
      } else if (better(*it, heap.top())) {
        heap.pop();
        heap.push(*it);
      }
    }
    PredictionList out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      const WordId id = heap.top();
      heap.pop();
      out[i] = {vocab.word(id), id, dist[id]};
    }
    return out;
  }

  PredictionList predict(const PredictionState& s, std::string_view prefix, std::size_t n,
                         const WordSet& excluded = {}) const {
    return top_n(distribution(s), prefix, n, excluded);
  }

 private:
  void add_to_context(ContextVector& ctx, std::size_t index, double sign) const {
    ctx.v += sign * space_->vector(index).transpose();
    if (sign > 0) {
      ++ctx.word_count;
    } else {
      --ctx.word_count;
      if (ctx.word_count == 0) ctx.v.setZero();
    }
  }

  std::shared_ptr<const NGramModel> lm_;
  std::shared_ptr<const SemanticSpace> space_;
  CombinerConfig config_;
  VocabBridge bridge_;
  std::vector<bool> predictable_;
  std::vector<WordId> sorted_;
  std::vector<double> base_weights_;
  std::size_t history_keep_ = 0;
};

/// Prediction for a list of context tokens (sentence-final marks restart
/// the n-gram history).
inline PredictionList predict_top_n(const Pipeline& pipeline, std::span<const std::string> context,
                                    std::string_view prefix, std::size_t n, const WordSet& excluded = {}) {
  auto state = pipeline.new_state();
  for (const auto& w : context) {
    std::size_t pos = 0;
    const char32_t c = w.empty() ? U'\0' : utf8::decode(w, pos);
    if (w == kSentenceEnd) {
      pipeline.commit_boundary(state);
    } else if (!w.empty() && utf8::is_punctuation(c) && pos == w.size()) {
      if (utf8::is_sentence_final(c)) pipeline.commit_boundary(state);
    } else {
      pipeline.commit_word(state, w);
    }
  }
  return pipeline.predict(state, prefix, n, excluded);
}

}  // namespace wordpred
