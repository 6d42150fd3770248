#pragma once

// Keystroke-level state machine shared by the batch KSR simulation and the
// interactive service: prefix, per-word offered set, committed tokens and
// keystroke counters.

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wordpred/corpus.hpp"
#include "wordpred/error.hpp"
#include "wordpred/pipeline.hpp"
#include "wordpred/utf8.hpp"

namespace wordpred {

/// Anything that can list candidates for a prefix and absorb committed tokens.
template <typename P>
concept Predictor = requires(P p, std::string_view prefix, std::size_t n, const WordSet& excluded, const Token& t) {
  { p.predict(prefix, n, excluded) } -> std::convertible_to<PredictionList>;
  p.commit(t);
};

/// Adapts a Pipeline; the combined distribution is computed once per word
/// position and reused while the prefix grows.
class PipelinePredictor {
 public:
  explicit PipelinePredictor(const Pipeline& pipeline) : pipeline_(&pipeline), state_(pipeline.new_state()) {}

  PredictionList predict(std::string_view prefix, std::size_t n, const WordSet& excluded) {
    if (!dist_) dist_ = pipeline_->distribution(state_);
    return pipeline_->top_n(*dist_, prefix, n, excluded);
  }

  void commit(const Token& t) {
    pipeline_->commit(state_, t);
    dist_.reset();
  }

  /// Probability of `word` at the current position under the combined model.
  double probability(WordId id) {
    if (!dist_) dist_ = pipeline_->distribution(state_);
    return (*dist_)[id];
  }

  const Pipeline& pipeline() const { return *pipeline_; }
  const PredictionState& state() const { return state_; }

 private:
  const Pipeline* pipeline_;
  PredictionState state_;
  std::optional<Distribution> dist_;
};

struct KeyEvent {
  enum class Type { character, select, backspace };
  Type type = Type::character;
  char32_t ch = 0;
  std::size_t rank = 0;

  static KeyEvent character(char32_t c) { return {Type::character, c, 0}; }
  static KeyEvent select(std::size_t r) { return {Type::select, 0, r}; }
  static KeyEvent backspace() { return {Type::backspace, 0, 0}; }
  bool operator==(const KeyEvent&) const = default;
};

/// One keystroke = one unit of k_p. Selecting a word commits it and inserts
/// the following space for free; a typed space costs 1. Words shown in a
/// list are excluded from later lists until the word is committed.
template <Predictor P>
class TypingSession {
 public:
  TypingSession(P predictor, std::size_t list_size) : predictor_(std::move(predictor)), list_size_(list_size) {
    if (list_size_ == 0) throw Error("list size must be at least 1");
  }

  P& predictor() { return predictor_; }
  std::size_t list_size() const { return list_size_; }
  std::string prefix() const { return utf8::from_u32(prefix_); }
  const WordSet& offered() const { return offered_; }
  const std::vector<Token>& committed() const { return committed_; }
  const std::vector<KeyEvent>& events() const { return events_; }
  std::uint64_t kp() const { return kp_; }

  /// Characters of the committed tokens joined with single spaces, plus the
  /// pending prefix.
  std::uint64_t ka() const {
    std::uint64_t n = 0;
    for (const auto& t : committed_) n += utf8::length(t.surface);
    if (!committed_.empty()) n += committed_.size() - 1;
    if (!prefix_.empty()) n += prefix_.size() + (committed_.empty() ? 0 : 1);
    return n;
  }

  double ksr() const {
    const auto a = ka();
    return a == 0 ? 0.0 : (1.0 - static_cast<double>(kp_) / static_cast<double>(a)) * 100.0;
  }

  /// Current list for the pending prefix, computed on first request.
  const PredictionList& predictions() {
    if (!list_) list_ = predictor_.predict(prefix(), list_size_, offered_);
    return *list_;
  }

  bool has_predictions() const { return list_.has_value(); }

  void apply(const KeyEvent& e) {
    switch (e.type) {
      case KeyEvent::Type::character:
        type_char(e.ch);
        break;
      case KeyEvent::Type::select:
        select(e.rank);
        break;
      case KeyEvent::Type::backspace:
        backspace();
        break;
    }
  }

  void type_char(char32_t c) {
    events_.push_back(KeyEvent::character(c));
    ++kp_;
    if (list_) {
      for (const auto& p : *list_) offered_.insert(p.word);
    }
    list_.reset();
    if (utf8::is_space(c)) {
      if (!prefix_.empty()) commit_prefix();
      return;
    }
    if (extends_word(c)) {
      prefix_.push_back(utf8::to_lower(c));
      return;
    }
    if (!prefix_.empty()) commit_prefix();
    std::string s;
    utf8::append(s, c);
    commit_token({s, TokenKind::punctuation});
  }

  /// Commits the word at 1-based `rank` of the current list.
  const Token& select(std::size_t rank) {
    const auto& list = predictions();
    if (list.empty()) throw Error("no predictions to select from");
    if (rank < 1 || rank > list.size()) {
      throw Error("rank " + std::to_string(rank) + " outside the list (1.." + std::to_string(list.size()) + ")");
    }
    events_.push_back(KeyEvent::select(rank));
    ++kp_;
    std::string word = list[rank - 1].word;
    prefix_.clear();
    commit_token({std::move(word), TokenKind::word});
    return committed_.back();
  }

  /// Removes the last prefix character; costs a keystroke, counters are
  /// never rolled back.
  void backspace() {
    events_.push_back(KeyEvent::backspace());
    ++kp_;
    if (list_) {
      for (const auto& p : *list_) offered_.insert(p.word);
    }
    list_.reset();
    if (!prefix_.empty()) prefix_.pop_back();
  }

  /// Commits a pending prefix without a keystroke (end of input).
  void finish() {
    if (!prefix_.empty()) commit_prefix();
  }

 private:
  bool extends_word(char32_t c) const {
    if (!utf8::is_punctuation(c)) return true;
    if (prefix_.empty()) return false;
    if (utf8::is_apostrophe(c) || utf8::is_hyphen(c)) return true;
    return (c == U'.' || c == U',') && utf8::is_digit(prefix_.back());
  }

  void commit_prefix() {
    std::string w = utf8::from_u32(prefix_);
    prefix_.clear();
    commit_token({std::move(w), TokenKind::word});
  }

  void commit_token(Token t) {
    predictor_.commit(t);
    committed_.push_back(std::move(t));
    offered_.clear();
    list_.reset();
  }

  P predictor_;
  std::size_t list_size_;
  std::u32string prefix_;
  WordSet offered_;
  std::vector<Token> committed_;
  std::vector<KeyEvent> events_;
  std::uint64_t kp_ = 0;
  std::optional<PredictionList> list_;
};

}  // namespace wordpred
