#pragma once

// Tokenization, vocabularies and stopword lists shared by the trainers and
// evaluators.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "wordpred/error.hpp"
#include "wordpred/utf8.hpp"

namespace wordpred {

using WordId = std::uint32_t;
using WordSet = std::unordered_set<std::string>;

inline constexpr std::string_view kUnkWord = "<unk>";
inline constexpr std::string_view kSentenceStart = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";

enum class TokenKind { word, punctuation, sentence_boundary };

struct Token {
  std::string surface;
  TokenKind kind = TokenKind::word;

  bool is_word() const { return kind == TokenKind::word; }
  bool operator==(const Token&) const = default;
};

struct TokenPolicy {
  bool lowercase = true;
  /// "l'ami" -> "l'", "ami"
  bool split_clitics = true;
  bool keep_punctuation = true;
};

/// True for tokens that contain a digit; such words are never offered as
/// predictions.
inline bool is_numeral(std::string_view word) {
  return std::any_of(word.begin(), word.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// Splits text into word, punctuation and sentence-boundary tokens.
///
/// Whitespace separates words. Punctuation marks become single-character
/// tokens, except hyphens between letters ("grand-père") and '.'/','
/// between digits ("3.5"). An apostrophe closes the current word
/// ("l'ami" -> "l'", "ami"). A run of sentence-final marks (. ! ? …) is
/// followed by one sentence-boundary token.
inline std::vector<Token> tokenize(std::string_view text, const TokenPolicy& policy = {}) {
  std::vector<Token> out;
  std::u32string cps = utf8::to_u32(text);
  std::string word;

  const auto flush = [&] {
    if (!word.empty()) {
      out.push_back({std::move(word), TokenKind::word});
      word.clear();
    }
  };
  const auto letter_like = [](char32_t cp) {
    return !utf8::is_space(cp) && !utf8::is_punctuation(cp) && !utf8::is_hyphen(cp);
  };

  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t cp = policy.lowercase ? utf8::to_lower(cps[i]) : cps[i];
    const char32_t next = i + 1 < cps.size() ? cps[i + 1] : U'\0';

    if (utf8::is_space(cp)) {
      flush();
      continue;
    }
    if (utf8::is_apostrophe(cp)) {
      if (!word.empty() && policy.split_clitics) {
        word.push_back('\'');
        flush();
        continue;
      }
      if (!word.empty()) {
        word.push_back('\'');
        continue;
      }
      cp = U'\'';
    }
    if (utf8::is_hyphen(cp) && !word.empty() && letter_like(next)) {
      utf8::append(word, cp);
      continue;
    }
    if ((cp == U'.' || cp == U',') && !word.empty() && utf8::is_digit(next) &&
        utf8::is_digit(utf8::to_u32(word).back())) {
      utf8::append(word, cp);
      continue;
    }
    if (utf8::is_punctuation(cp) || utf8::is_hyphen(cp)) {
      flush();
      if (policy.keep_punctuation) {
        std::string mark;
        utf8::append(mark, cp);
        out.push_back({std::move(mark), TokenKind::punctuation});
      }
      if (utf8::is_sentence_final(cp) && !utf8::is_sentence_final(next)) {
        out.push_back({std::string(kSentenceEnd), TokenKind::sentence_boundary});
      }
      continue;
    }
    utf8::append(word, cp);
  }
  flush();
  return out;
}

/// Bidirectional word <-> id map. Id 0 is always the unknown-word sentinel.
class Vocabulary {
 public:
  static constexpr WordId kUnkId = 0;

  Vocabulary() { add(kUnkWord); }

  /// Returns the id of `word`, inserting it with zero count if new.
  WordId add(std::string_view word) {
    if (auto it = index_.find(std::string(word)); it != index_.end()) return it->second;
    const auto id = static_cast<WordId>(words_.size());
    words_.emplace_back(word);
    counts_.push_back(0);
    stopword_.push_back(false);
    index_.emplace(words_.back(), id);
    return id;
  }

  std::optional<WordId> find(std::string_view word) const {
    if (auto it = index_.find(std::string(word)); it != index_.end()) return it->second;
    return std::nullopt;
  }

  /// Maps unknown words to the unk id.
  WordId lookup(std::string_view word) const { return find(word).value_or(kUnkId); }

  bool contains(std::string_view word) const { return find(word).has_value(); }

  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }
  WordId unk_id() const { return kUnkId; }

  std::uint64_t count(WordId id) const { return counts_.at(id); }
  void set_count(WordId id, std::uint64_t c) { counts_.at(id) = c; }

  bool is_stopword(WordId id) const { return stopword_.at(id); }
  void set_stopword(WordId id, bool flag) { stopword_.at(id) = flag; }

  const std::vector<std::string>& words() const { return words_; }

  /// Text form: a version header, then "id TAB word TAB count TAB stopflag".
  void save(std::ostream& os) const {
    os << "#wordpred-vocab\tv1\t" << words_.size() << '\n';
    for (std::size_t i = 0; i < words_.size(); ++i) {
      os << i << '\t' << words_[i] << '\t' << counts_[i] << '\t' << (stopword_[i] ? 1 : 0)
         << '\n';
    }
  }

  static Vocabulary load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("#wordpred-vocab\tv1", 0) != 0) {
      throw ParseError("missing vocabulary header", 1);
    }
    Vocabulary vocab;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string id, word, count, flag;
      if (!std::getline(fields, id, '\t') || !std::getline(fields, word, '\t') ||
          !std::getline(fields, count, '\t') || !std::getline(fields, flag, '\t')) {
        throw ParseError("expected 4 tab-separated fields", lineno);
      }
      try {
        if (std::stoul(id) != vocab.size() && word != kUnkWord) {
          throw ParseError("ids must be dense and ordered", lineno);
        }
        const WordId wid = vocab.add(word);
        vocab.set_count(wid, std::stoull(count));
        vocab.set_stopword(wid, flag == "1");
      } catch (const std::logic_error&) {
        throw ParseError("bad numeric field", lineno);
      }
    }
    return vocab;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::vector<bool> stopword_;
  std::unordered_map<std::string, WordId> index_;
};

/// Keeps the `max_size` most frequent word tokens with count >= min_count
/// (ties broken lexicographically). Everything else is counted under unk.
inline Vocabulary build_vocabulary(std::span<const Token> tokens, std::size_t max_size,
                                   std::uint64_t min_count = 1, const WordSet& stopwords = {}) {
  if (max_size == 0) throw Error("vocabulary size must be at least 1");

  std::unordered_map<std::string, std::uint64_t> freq;
  for (const Token& t : tokens) {
    if (t.is_word()) ++freq[t.surface];
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  ranked.reserve(freq.size());
  for (auto& [w, c] : freq) {
    if (w != kUnkWord) ranked.emplace_back(w, c);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary vocab;
  std::uint64_t unk = freq.count(std::string(kUnkWord)) ? freq[std::string(kUnkWord)] : 0;
  for (const auto& [w, c] : ranked) {
    if (vocab.size() - 1 < max_size && c >= min_count) {
      const WordId id = vocab.add(w);
      vocab.set_count(id, c);
      vocab.set_stopword(id, stopwords.count(w) > 0);
    } else {
      unk += c;
    }
  }
  vocab.set_count(Vocabulary::kUnkId, unk);
  return vocab;
}

/// One word per line; lowercased, blank lines skipped.
inline WordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open stopword file: " + path);
  WordSet out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    out.insert(utf8::to_lower(line.substr(first)));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Splits a token stream into sentences of word tokens. Punctuation is
/// dropped; sentence boundaries end a sentence.
inline std::vector<std::vector<std::string>> sentences_of(std::span<const Token> tokens) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> current;
  for (const Token& t : tokens) {
    if (t.kind == TokenKind::word) {
      current.push_back(t.surface);
    } else if (t.kind == TokenKind::sentence_boundary && !current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace wordpred
