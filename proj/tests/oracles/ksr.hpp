#pragma once

// Reference keystroke counter and a scripted predictor for toy texts made
// of space-separated lowercase ASCII tokens.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wordpred/corpus.hpp"
#include "wordpred/pipeline.hpp"

namespace oracle {

/// Deterministic pseudo-random ranking of a fixed word list, keyed on the
/// number of committed words. Honors prefix and exclusions.
class ScriptedPredictor {
 public:
  ScriptedPredictor(std::vector<std::string> words, std::uint64_t seed) : words_(std::move(words)), seed_(seed) {}

  wordpred::PredictionList predict(std::string_view prefix, std::size_t n, const wordpred::WordSet& excluded) {
    std::vector<std::pair<std::uint64_t, std::string>> ranked;
    for (const auto& w : words_) {
      if (w.compare(0, prefix.size(), prefix) != 0 || excluded.contains(w)) continue;
      ranked.emplace_back(mix(seed_ ^ (position_ * 0x9e3779b97f4a7c15ULL) ^ std::hash<std::string>{}(w)), w);
    }
    std::sort(ranked.begin(), ranked.end());
    wordpred::PredictionList out;
    for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back({ranked[i].second, 0, 0.0});
    return out;
  }

  void commit(const wordpred::Token& t) {
    if (t.is_word()) ++position_;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    return x ^ (x >> 33);
  }

  std::vector<std::string> words_;
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
};

/// Always lists the next target word first.
class OmniscientPredictor {
 public:
  explicit OmniscientPredictor(std::vector<std::string> targets) : targets_(std::move(targets)) {}
  wordpred::PredictionList predict(std::string_view, std::size_t, const wordpred::WordSet&) {
    if (next_ >= targets_.size()) return {};
    return {{targets_[next_], 0, 1.0}};
  }
  void commit(const wordpred::Token& t) {
    if (t.is_word()) ++next_;
  }

 private:
  std::vector<std::string> targets_;
  std::size_t next_ = 0;
};

/// Never lists anything.
struct SilentPredictor {
  wordpred::PredictionList predict(std::string_view, std::size_t, const wordpred::WordSet&) { return {}; }
  void commit(const wordpred::Token&) {}
};

struct Counts {
  std::uint64_t kp = 0;
  std::uint64_t ka = 0;
  double ksr = 0;
};

inline bool is_punct_token(const std::string& t) { return t.size() == 1 && std::ispunct(static_cast<unsigned char>(t[0])); }

/// Counts keystrokes straight from the interaction rules: a selection costs
/// one key and brings its own space; each typed letter costs one; a typed
/// word or a punctuation mark needs one more key for the following space
/// unless it ends the text; words shown once stay hidden until the word is
/// finished.
template <typename P>
Counts reference_ksr(P predictor, const std::string& text, std::size_t n) {
  std::vector<std::string> toks;
  std::istringstream ss(text);
  for (std::string t; ss >> t;) toks.push_back(t);
  Counts c;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    const bool last = i + 1 == toks.size();
    c.ka += t.size() + (last ? 0 : 1);
    if (is_punct_token(t)) {
      c.kp += last ? 1 : 2;
      predictor.commit({t, wordpred::TokenKind::punctuation});
      continue;
    }
    wordpred::WordSet shown;
    std::string typed;
    bool picked = false;
    while (typed.size() < t.size()) {
      const auto list = predictor.predict(typed, n, shown);
      if (std::any_of(list.begin(), list.end(), [&](const auto& p) { return p.word == t; })) {
        c.kp += 1;
        picked = true;
        break;
      }
      for (const auto& p : list) shown.insert(p.word);
      typed += t[typed.size()];
      c.kp += 1;
    }
    if (!picked && !last) c.kp += 1;
    predictor.commit({t, wordpred::TokenKind::word});
  }
  c.ksr = (1.0 - static_cast<double>(c.kp) / static_cast<double>(c.ka)) * 100.0;
  return c;
}

}  // namespace oracle
