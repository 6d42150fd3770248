#pragma once

// Backoff n-gram language model: counting, count pruning, interpolated
// modified Kneser-Ney / Witten-Bell estimation in backoff form, and
// queries.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wordpred/corpus.hpp"
#include "wordpred/error.hpp"

namespace wordpred {

inline constexpr int kMaxOrder = 5;

/// log10 value written for impossible events (ARPA convention).
inline constexpr double kLogZero = -99.0;

/// Fixed-capacity id sequence used as a hash key.
struct NGramKey {
  std::array<WordId, kMaxOrder> ids{};
  std::uint8_t size = 0;

  NGramKey() = default;
  explicit NGramKey(std::span<const WordId> s) {
    if (s.size() > kMaxOrder) throw Error("n-gram longer than the maximum order");
    std::copy(s.begin(), s.end(), ids.begin());
    size = static_cast<std::uint8_t>(s.size());
  }
  NGramKey(std::initializer_list<WordId> s) : NGramKey(std::span<const WordId>(s.begin(), s.size())) {}

  std::span<const WordId> view() const { return {ids.data(), size}; }
  WordId front() const { return ids[0]; }
  WordId back() const { return ids[size - 1]; }

  /// All but the last id.
  NGramKey prefix() const {
    NGramKey k = *this;
    k.ids[--k.size] = 0;
    return k;
  }
  /// All but the first id.
  NGramKey suffix() const { return NGramKey(view().subspan(1)); }

  NGramKey extended(WordId w) const {
    NGramKey k = *this;
    k.ids.at(k.size++) = w;
    return k;
  }

  bool operator==(const NGramKey&) const = default;
  bool operator<(const NGramKey& o) const {
    return std::lexicographical_compare(ids.begin(), ids.begin() + size, o.ids.begin(),
                                        o.ids.begin() + o.size);
  }
};

struct NGramKeyHash {
  std::size_t operator()(const NGramKey& k) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ k.size;
    for (std::size_t i = 0; i < k.size; ++i) {
      h ^= k.ids[i];
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

template <typename T>
using NGramMap = std::unordered_map<NGramKey, T, NGramKeyHash>;

/// Raw n-gram counts of every order up to `order`, over sentences padded
/// with <s> ... </s>.
///
/// Without pruning, count(g) equals the sum of count(g w) over all w for
/// every g that does not end in </s>.
struct CountTable {
  int order = 0;
  Vocabulary vocab;
  /// counts[n-1] holds the n-grams.
  std::vector<NGramMap<std::uint64_t>> counts;
  /// left_extensions[n-1][g] = number of distinct words v with count(v g) > 0,
  /// for n < order. Computed before any pruning.
  std::vector<NGramMap<std::uint64_t>> left_extensions;
  std::uint64_t total_tokens = 0;
  bool pruned = false;

  WordId bos() const { return vocab.lookup(kSentenceStart); }
  WordId eos() const { return vocab.lookup(kSentenceEnd); }

  std::uint64_t count(std::span<const WordId> ngram) const {
    if (ngram.empty() || static_cast<int>(ngram.size()) > order) return 0;
    const auto& m = counts[ngram.size() - 1];
    auto it = m.find(NGramKey(ngram));
    return it == m.end() ? 0 : it->second;
  }

  bool empty() const { return total_tokens == 0; }
};

namespace detail {

inline void compute_left_extensions(CountTable& table) {
  table.left_extensions.assign(table.order, {});
  for (int n = 2; n <= table.order; ++n) {
    for (const auto& [g, c] : table.counts[n - 1]) {
      if (c > 0) ++table.left_extensions[n - 2][g.suffix()];
    }
  }
}

}  // namespace detail

/// Counts every n-gram of order <= `order` in the given sentences (each a
/// sequence of words; unknown words map to unk). Sentences are padded with
/// one <s> and one </s>.
inline CountTable count_ngrams(const std::vector<std::vector<std::string>>& sentences,
                               const Vocabulary& vocab, int order) {
  if (order < 1 || order > kMaxOrder) throw Error("n-gram order must be in 1..5");
  CountTable table;
  table.order = order;
  table.vocab = vocab;
  const WordId bos = table.vocab.add(kSentenceStart);
  const WordId eos = table.vocab.add(kSentenceEnd);
  table.counts.assign(order, {});

  std::vector<WordId> padded;
  for (const auto& sentence : sentences) {
    if (sentence.empty()) continue;
    padded.clear();
    padded.push_back(bos);
    for (const auto& w : sentence) padded.push_back(table.vocab.lookup(w));
    padded.push_back(eos);
    table.total_tokens += sentence.size() + 1;
    for (std::size_t end = 1; end <= padded.size(); ++end) {
      for (int n = 1; n <= order && static_cast<std::size_t>(n) <= end; ++n) {
        ++table.counts[n - 1][NGramKey(std::span(padded).subspan(end - n, n))];
      }
    }
  }
  detail::compute_left_extensions(table);
  return table;
}

/// Tokenized-corpus convenience overload: sentences come from boundary
/// tokens, punctuation is dropped.
inline CountTable count_ngrams(std::span<const Token> tokens, const Vocabulary& vocab, int order) {
  return count_ngrams(sentences_of(tokens), vocab, order);
}

/// Drops n-grams of order >= 2 whose count is below min_count[n-1]
/// (unigrams are never dropped; missing entries mean 1). Prefixes of kept
/// n-grams are restored at the lower orders so that every history keeps
/// its backoff slot.
inline CountTable prune_counts(const CountTable& table, const std::vector<std::uint64_t>& min_count) {
  CountTable out = table;
  const auto threshold = [&](int n) -> std::uint64_t {
    return n - 1 < static_cast<int>(min_count.size()) ? min_count[n - 1] : 1;
  };
  bool changed = false;
  for (int n = 2; n <= table.order; ++n) {
    const std::uint64_t t = threshold(n);
    if (t <= 1) continue;
    std::erase_if(out.counts[n - 1], [&](const auto& kv) { return kv.second < t; });
    changed = true;
  }
  for (int n = table.order; n >= 3; --n) {
    for (const auto& [g, c] : out.counts[n - 1]) {
      const NGramKey p = g.prefix();
      if (!out.counts[n - 2].count(p)) out.counts[n - 2][p] = table.counts[n - 2].at(p);
    }
  }
  out.pruned = table.pruned || changed;
  return out;
}

enum class Smoothing { modified_kneser_ney, witten_bell };

inline std::string to_string(Smoothing s) {
  return s == Smoothing::modified_kneser_ney ? "mkn" : "wb";
}

inline Smoothing smoothing_from_string(std::string_view s) {
  if (s == "mkn" || s == "kn" || s == "modified-kneser-ney") return Smoothing::modified_kneser_ney;
  if (s == "wb" || s == "witten-bell") return Smoothing::witten_bell;
  throw Error("unknown smoothing method: " + std::string(s));
}

struct NGramEntry {
  double logprob = kLogZero;
  double backoff = 0.0;
  bool has_backoff = false;
};

struct ModelInfo {
  Smoothing requested = Smoothing::modified_kneser_ney;
  Smoothing used = Smoothing::modified_kneser_ney;
  /// MKN discounts could not be estimated; Witten-Bell was used instead.
  bool fell_back = false;
  /// Per order: D1, D2, D3+ (MKN only).
  std::vector<std::array<double, 3>> discounts;
};

/// Order-N backoff model with log10 probabilities and backoff weights.
/// Immutable once finalized; queries are const and thread-safe.
class NGramModel {
 public:
  NGramModel() = default;
  NGramModel(int order, Vocabulary vocab) : order_(order), vocab_(std::move(vocab)) {
    if (order < 1 || order > kMaxOrder) throw Error("n-gram order must be in 1..5");
    grams_.assign(order, {});
  }

  int order() const { return order_; }
  const Vocabulary& vocab() const { return vocab_; }
  const ModelInfo& info() const { return info_; }
  ModelInfo& info() { return info_; }

  std::optional<WordId> bos() const { return vocab_.find(kSentenceStart); }
  std::optional<WordId> eos() const { return vocab_.find(kSentenceEnd); }

  std::size_t size(int n) const { return grams_.at(n - 1).size(); }
  const NGramMap<NGramEntry>& grams(int n) const { return grams_.at(n - 1); }

  void set(std::span<const WordId> ngram, NGramEntry entry) {
    grams_.at(ngram.size() - 1)[NGramKey(ngram)] = entry;
    finalized_ = false;
  }

  const NGramEntry* find(std::span<const WordId> ngram) const {
    if (ngram.empty() || static_cast<int>(ngram.size()) > order_) return nullptr;
    const auto& m = grams_[ngram.size() - 1];
    auto it = m.find(NGramKey(ngram));
    return it == m.end() ? nullptr : &it->second;
  }

  /// Builds the lookup structures used by distribution(). Must be called
  /// after the last set().
  void finalize() {
    unigram_.assign(vocab_.size(), 0.0);
    for (const auto& [g, e] : grams_[0]) unigram_[g.front()] = to_linear(e.logprob);
    children_.assign(order_, {});
    for (int n = 2; n <= order_; ++n) {
      for (const auto& [g, e] : grams_[n - 1]) {
        children_[n - 1][g.prefix()].emplace_back(g.back(), to_linear(e.logprob));
      }
    }
    finalized_ = true;
  }

  /// log10 P(word | history), Katz backoff recursion. The history is
  /// truncated to its last order-1 ids.
  double log10_probability(WordId word, std::span<const WordId> history) const {
    history = truncate(history);
    double bow = 0.0;
    for (std::size_t k = history.size() + 1; k-- > 0;) {
      NGramKey ctx(history.subspan(history.size() - k));
      if (const NGramEntry* e = find(ctx.extended(word).view())) return bow + e->logprob;
      if (k > 0) {
        if (const NGramEntry* c = find(ctx.view()); c && c->has_backoff) bow += c->backoff;
      }
    }
    return bow + kLogZero;
  }

  double probability(WordId word, std::span<const WordId> history) const {
    return std::pow(10.0, log10_probability(word, history));
  }

  /// P(w | history) for every id in the vocabulary (entry for <s> is 0).
  void distribution(std::span<const WordId> history, std::vector<double>& out) const {
    if (!finalized_) throw Error("model used before finalize()");
    history = truncate(history);
    out = unigram_;
    for (std::size_t k = 1; k <= history.size(); ++k) {
      NGramKey ctx(history.subspan(history.size() - k));
      const NGramEntry* c = find(ctx.view());
      if (c && c->has_backoff && c->backoff != 0.0) {
        const double scale = std::pow(10.0, c->backoff);
        for (double& p : out) p *= scale;
      }
      const auto& kids = children_[k];
      if (auto it = kids.find(ctx); it != kids.end()) {
        for (const auto& [w, p] : it->second) out[w] = p;
      }
    }
    if (auto b = bos()) out[*b] = 0.0;
  }

  std::vector<double> distribution(std::span<const WordId> history) const {
    std::vector<double> out;
    distribution(history, out);
    return out;
  }

  std::span<const WordId> truncate(std::span<const WordId> history) const {
    const std::size_t keep = static_cast<std::size_t>(order_ - 1);
    return history.size() > keep ? history.subspan(history.size() - keep) : history;
  }

 private:
  static double to_linear(double logprob) {
    return logprob <= kLogZero ? 0.0 : std::pow(10.0, logprob);
  }

  int order_ = 0;
  Vocabulary vocab_;
  std::vector<NGramMap<NGramEntry>> grams_;
  std::vector<double> unigram_;
  std::vector<NGramMap<std::vector<std::pair<WordId, double>>>> children_;
  bool finalized_ = false;
  ModelInfo info_;
};

namespace detail {

/// Chen-Goodman discounts from the count-of-counts n1..n4. Empty when the
/// statistics are degenerate.
inline std::optional<std::array<double, 3>> mkn_discounts(const std::array<std::uint64_t, 5>& n) {
  if (n[1] == 0 || n[2] == 0 || n[3] == 0 || n[4] == 0) return std::nullopt;
  const double y = static_cast<double>(n[1]) / (n[1] + 2.0 * n[2]);
  const std::array<double, 3> d = {1.0 - 2.0 * y * n[2] / n[1], 2.0 - 3.0 * y * n[3] / n[2],
                                   3.0 - 4.0 * y * n[4] / n[3]};
  for (int i = 0; i < 3; ++i) {
    if (!(d[i] > 0.0) || !(d[i] < i + 1.0)) return std::nullopt;
  }
  return d;
}

}  // namespace detail

/// Estimates an interpolated smoothed model and stores it in backoff form:
/// each stored n-gram carries its interpolated probability and each history
/// carries its interpolation weight as backoff weight.
///
/// Modified Kneser-Ney uses continuation counts for lower orders (raw counts
/// for n-grams starting with <s>) and three discounts per order. When the
/// count-of-counts cannot support the discounts, the model falls back to
/// Witten-Bell and records it in info().
inline NGramModel estimate_model(const CountTable& table,
                                 Smoothing smoothing = Smoothing::modified_kneser_ney) {
  if (table.empty()) throw Error("cannot estimate a model from an empty count table");
  const int order = table.order;
  const WordId bos = table.bos();

  // Adjusted counts per order.
  std::vector<NGramMap<double>> adjusted(order);
  const auto fill_adjusted = [&](bool kneser_ney) {
    for (int n = 1; n <= order; ++n) {
      auto& out = adjusted[n - 1];
      out.clear();
      for (const auto& [g, c] : table.counts[n - 1]) {
        if (n == 1 && g.front() == bos) continue;
        double a = static_cast<double>(c);
        if (kneser_ney && n < order && g.front() != bos) {
          const auto& ext = table.left_extensions[n - 1];
          auto it = ext.find(g);
          a = it == ext.end() ? 0.0 : static_cast<double>(it->second);
        }
        if (a > 0.0) out[g] = a;
      }
    }
  };

  ModelInfo info;
  info.requested = smoothing;
  info.used = smoothing;
  if (smoothing == Smoothing::modified_kneser_ney) {
    fill_adjusted(true);
    for (int n = 1; n <= order; ++n) {
      std::array<std::uint64_t, 5> coc{};
      for (const auto& [g, a] : adjusted[n - 1]) {
        const auto c = static_cast<std::uint64_t>(a);
        if (c >= 1 && c <= 4) ++coc[c];
      }
      auto d = detail::mkn_discounts(coc);
      if (!d) {
        info.used = Smoothing::witten_bell;
        info.fell_back = true;
        info.discounts.clear();
        break;
      }
      info.discounts.push_back(*d);
    }
  }
  if (info.used == Smoothing::witten_bell) fill_adjusted(false);

  NGramModel model(order, table.vocab);
  const std::size_t predictable = table.vocab.size() - 1;  // everything but <s>

  // Per-history totals: sum of adjusted counts and the mass freed for the
  // lower order.
  std::vector<NGramMap<std::pair<double, double>>> stats(order);
  for (int n = 1; n <= order; ++n) {
    auto& st = stats[n - 1];
    for (const auto& [g, a] : adjusted[n - 1]) {
      auto& [total, freed] = st[g.prefix()];
      total += a;
      if (info.used == Smoothing::modified_kneser_ney) {
        const auto& d = info.discounts[n - 1];
        freed += a >= 3.0 ? d[2] : d[static_cast<int>(a) - 1];
      } else {
        freed += 1.0;  // distinct followers
      }
    }
  }
  const auto discounted = [&](int n, double a) {
    if (info.used == Smoothing::modified_kneser_ney) {
      const auto& d = info.discounts[n - 1];
      return a - (a >= 3.0 ? d[2] : d[static_cast<int>(a) - 1]);
    }
    return a;
  };
  const auto history_weights = [&](int n, const NGramKey& h) -> std::optional<std::pair<double, double>> {
    auto it = stats[n - 1].find(h);
    if (it == stats[n - 1].end()) return std::nullopt;
    const auto [total, freed] = it->second;
    if (info.used == Smoothing::modified_kneser_ney) return std::pair{total, freed / total};
    return std::pair{total + freed, freed / (total + freed)};
  };

  // Linear probabilities of the previous order, used for interpolation.
  NGramMap<double> lower;
  const auto lower_prob = [&](const NGramKey& g) {
    // Walk down to the longest stored suffix, accumulating backoff weights.
    double bow = 1.0;
    NGramKey k = g;
    while (k.size > 0) {
      if (auto it = lower.find(k); it != lower.end()) return bow * it->second;
      if (k.size == 1) break;
      if (const NGramEntry* e = model.find(k.prefix().view()); e && e->has_backoff) {
        bow *= std::pow(10.0, e->backoff);
      }
      k = k.suffix();
    }
    return 0.0;
  };

  // Unigrams.
  {
    const auto hw = history_weights(1, NGramKey());
    const double denom = hw->first;
    const double gamma = hw->second;
    for (WordId w = 0; w < table.vocab.size(); ++w) {
      if (w == bos) {
        model.set(std::array{w}, {kLogZero, 0.0, false});
        continue;
      }
      double p = gamma / static_cast<double>(predictable);
      if (auto it = adjusted[0].find(NGramKey{w}); it != adjusted[0].end()) {
        p += discounted(1, it->second) / denom;
      }
      model.set(std::array{w}, {std::log10(p), 0.0, false});
      lower[NGramKey{w}] = p;
    }
  }

  for (int n = 2; n <= order; ++n) {
    // Backoff weights of the (n-1)-gram histories.
    for (const auto& [h, unused] : stats[n - 1]) {
      NGramEntry e = *model.find(h.view());
      e.has_backoff = true;
      e.backoff = std::log10(history_weights(n, h)->second);
      model.set(h.view(), e);
    }
    NGramMap<double> current;
    for (const auto& [g, c] : table.counts[n - 1]) {
      const NGramKey h = g.prefix();
      const double low = lower_prob(g.suffix());
      double p = 0.0;
      if (auto hw = history_weights(n, h)) {
        auto it = adjusted[n - 1].find(g);
        const double a = it == adjusted[n - 1].end() ? 0.0 : it->second;
        p = (a > 0.0 ? discounted(n, a) / hw->first : 0.0) + hw->second * low;
      } else {
        p = low;
      }
      current[g] = p;
    }
    for (const auto& [g, p] : current) model.set(g.view(), {std::log10(p), 0.0, false});
    for (auto& kv : current) lower.insert_or_assign(kv.first, kv.second);
  }

  model.info() = info;
  model.finalize();
  return model;
}

struct NGramTrainOptions {
  int order = 4;
  Smoothing smoothing = Smoothing::modified_kneser_ney;
  std::size_t vocab_size = 141000;
  std::uint64_t min_count = 1;
  /// Per-order count cutoffs; empty keeps everything.
  std::vector<std::uint64_t> prune;
};

/// Vocabulary, counts, optional cutoffs and smoothing in one call.
inline NGramModel train_ngram(std::span<const Token> tokens, const NGramTrainOptions& opt = {}) {
  const Vocabulary vocab = build_vocabulary(tokens, opt.vocab_size, opt.min_count);
  CountTable table = count_ngrams(tokens, vocab, opt.order);
  if (!opt.prune.empty()) table = prune_counts(table, opt.prune);
  return estimate_model(table, opt.smoothing);
}

}  // namespace wordpred
