#pragma once

// ARPA backoff-model text format.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wordpred/error.hpp"
#include "wordpred/ngram.hpp"

namespace wordpred {

namespace detail {

inline std::string format_log(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) out.push_back(f);
  return out;
}

inline double parse_double(const std::string& s, std::size_t lineno) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("bad number '" + s + "'", lineno);
  return v;
}

inline std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  const auto first = s.find_first_not_of(" \t");
  return first == std::string::npos ? std::string() : s.substr(first);
}

}  // namespace detail

/// Writes the model; values are printed with 6 fractional digits, n-grams
/// sorted by id sequence.
inline void write_arpa(const NGramModel& model, std::ostream& os) {
  os << "\n\\data\\\n";
  for (int n = 1; n <= model.order(); ++n) os << "ngram " << n << '=' << model.size(n) << '\n';
  const auto& vocab = model.vocab();
  for (int n = 1; n <= model.order(); ++n) {
    os << "\n\\" << n << "-grams:\n";
    std::vector<std::pair<NGramKey, NGramEntry>> rows(model.grams(n).begin(), model.grams(n).end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [g, e] : rows) {
      os << detail::format_log(e.logprob) << '\t';
      for (std::size_t i = 0; i < g.size; ++i) os << (i ? " " : "") << vocab.word(g.ids[i]);
      if (e.has_backoff) os << '\t' << detail::format_log(e.backoff);
      os << '\n';
    }
  }
  os << "\n\\end\\\n";
}

inline NGramModel read_arpa(std::istream& is) {
  std::string raw;
  std::size_t lineno = 0;
  const auto next = [&](std::string& line) {
    if (!std::getline(is, raw)) return false;
    ++lineno;
    line = detail::trim(raw);
    return true;
  };

  std::string line;
  bool found = false;
  while (next(line)) {
    if (line == "\\data\\") {
      found = true;
      break;
    }
  }
  if (!found) throw ParseError("missing \\data\\ header", lineno);

  std::vector<std::size_t> declared;
  while (next(line)) {
    if (line.empty()) {
      if (!declared.empty()) break;
      continue;
    }
    if (line.rfind("ngram ", 0) != 0) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("bad ngram count line", lineno);
    std::size_t n = 0, count = 0;
    try {
      n = std::stoul(line.substr(6, eq - 6));
      count = std::stoul(line.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw ParseError("bad ngram count line", lineno);
    }
    if (n != declared.size() + 1) throw ParseError("ngram orders must be listed 1..N", lineno);
    declared.push_back(count);
  }
  if (declared.empty()) throw ParseError("no ngram counts in header", lineno);
  if (declared.size() > static_cast<std::size_t>(kMaxOrder)) {
    throw ParseError("order exceeds the supported maximum", lineno);
  }

  struct Row {
    double logprob;
    std::vector<std::string> words;
    std::optional<double> backoff;
  };
  std::vector<std::vector<Row>> sections(declared.size());
  int current = 0;
  bool ended = false;
  const auto check_section = [&](int n) {
    if (n > 0 && sections[n - 1].size() != declared[n - 1]) {
      throw ParseError(std::to_string(n) + "-grams: expected " + std::to_string(declared[n - 1]) +
                           " entries, found " + std::to_string(sections[n - 1].size()),
                       lineno);
    }
  };
  // `line` may already hold the first section header.
  bool have_line = !line.empty() && line.rfind("ngram ", 0) != 0;
  while (have_line || next(line)) {
    have_line = false;
    if (line.empty()) continue;
    if (line == "\\end\\") {
      check_section(current);
      ended = true;
      break;
    }
    if (line.front() == '\\') {
      int n = 0;
      if (std::sscanf(line.c_str(), "\\%d-grams:", &n) != 1 || n != current + 1 ||
          n > static_cast<int>(declared.size())) {
        throw ParseError("unexpected section '" + line + "'", lineno);
      }
      check_section(current);
      current = n;
      continue;
    }
    if (current == 0) throw ParseError("n-gram entry outside a section", lineno);
    auto fields = detail::split_ws(line);
    const std::size_t n = static_cast<std::size_t>(current);
    if (fields.size() != n + 1 && fields.size() != n + 2) {
      throw ParseError("expected " + std::to_string(n) + " words", lineno);
    }
    Row row;
    row.logprob = detail::parse_double(fields[0], lineno);
    row.words.assign(fields.begin() + 1, fields.begin() + 1 + n);
    if (fields.size() == n + 2) row.backoff = detail::parse_double(fields.back(), lineno);
    sections[n - 1].push_back(std::move(row));
  }
  if (!ended) throw ParseError("truncated model: missing \\end\\ marker", lineno);
  for (std::size_t n = 1; n <= declared.size(); ++n) {
    if (sections[n - 1].size() != declared[n - 1]) {
      throw ParseError("missing " + std::to_string(n) + "-grams section entries", lineno);
    }
  }

  Vocabulary vocab;
  for (const Row& r : sections[0]) vocab.add(r.words[0]);
  NGramModel model(static_cast<int>(declared.size()), vocab);
  std::vector<WordId> ids;
  for (const auto& section : sections) {
    for (const Row& r : section) {
      ids.clear();
      for (const auto& w : r.words) {
        auto id = vocab.find(w);
        if (!id) throw ParseError("word '" + w + "' missing from the unigram section", 0);
        ids.push_back(*id);
      }
      model.set(ids, {r.logprob, r.backoff.value_or(0.0), r.backoff.has_value()});
    }
  }
  model.finalize();
  return model;
}

inline NGramModel import_arpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open ARPA file: " + path);
  return read_arpa(in);
}

inline void export_arpa(const NGramModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write ARPA file: " + path);
  write_arpa(model, out);
}

}  // namespace wordpred
