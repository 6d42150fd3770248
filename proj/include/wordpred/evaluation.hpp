#pragma once

// Keystroke saving rate simulation, perplexity, and the Pearson statistic.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <map>
#include <optional>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wordpred/config.hpp"
#include "wordpred/corpus.hpp"
#include "wordpred/error.hpp"
#include "wordpred/pipeline.hpp"
#include "wordpred/typing_session.hpp"
#include "wordpred/utf8.hpp"

namespace wordpred {

struct WordTrace {
  std::string word;
  std::uint64_t keystrokes = 0;
  /// 1-based list rank when selected, 0 when typed out.
  std::size_t rank = 0;
  std::size_t chars_typed = 0;
};

struct KsrReport {
  std::uint64_t kp = 0;
  std::uint64_t ka = 0;
  double ksr = 0.0;
  std::size_t list_size = 5;
  std::size_t words = 0;
  std::size_t selections = 0;
  std::vector<WordTrace> trace;
  /// Filled when recording: every key event and the list on screen before
  /// it (empty when none was requested at that point).
  std::vector<KeyEvent> events;
  std::vector<std::optional<PredictionList>> lists;

  nlohmann::json to_json(bool with_trace = false) const {
    nlohmann::json j = {{"kp", kp}, {"ka", ka}, {"ksr", ksr}, {"list_size", list_size},
                        {"words", words}, {"selections", selections}};
    if (with_trace) {
      auto& t = j["trace"] = nlohmann::json::array();
      for (const auto& w : trace) {
        t.push_back({{"word", w.word}, {"keystrokes", w.keystrokes}, {"rank", w.rank}, {"typed", w.chars_typed}});
      }
    }
    return j;
  }
};

struct KsrOptions {
  bool trace = false;
  bool record = false;
};

/// Tokens driving the simulation: words and punctuation, no boundary markers.
inline std::vector<Token> typing_tokens(std::string_view text) {
  std::vector<Token> out;
  for (auto& t : tokenize(text)) {
    if (t.kind != TokenKind::sentence_boundary) out.push_back(std::move(t));
  }
  return out;
}

template <Predictor P>
KsrReport simulate_ksr(P predictor, std::string_view text, std::size_t n = 5, const KsrOptions& opt = {}) {
  const auto tokens = typing_tokens(text);
  if (std::none_of(tokens.begin(), tokens.end(), [](const Token& t) { return t.is_word(); })) {
    throw Error("text contains no words");
  }
  TypingSession<P> session(std::move(predictor), n);
  KsrReport r;
  r.list_size = n;
  const auto press = [&](char32_t c) {
    if (opt.record) {
      r.events.push_back(KeyEvent::character(c));
      r.lists.push_back(session.has_predictions() ? std::optional(session.predictions()) : std::nullopt);
    }
    session.type_char(c);
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool more = i + 1 < tokens.size();
    const Token& tok = tokens[i];
    if (!tok.is_word()) {
      for (char32_t c : utf8::to_u32(tok.surface)) press(c);
      if (more) press(U' ');
      continue;
    }
    ++r.words;
    const std::uint64_t before = session.kp();
    const std::u32string target = utf8::to_u32(tok.surface);
    WordTrace wt{tok.surface, 0, 0, 0};
    for (std::size_t pos = 0; pos < target.size(); ++pos) {
      const PredictionList& list = session.predictions();
      std::size_t rank = 0;
      for (std::size_t k = 0; k < list.size(); ++k) {
        if (list[k].word == tok.surface) {
          rank = k + 1;
          break;
        }
      }
      if (rank) {
        if (opt.record) {
          r.events.push_back(KeyEvent::select(rank));
          r.lists.push_back(list);
        }
        session.select(rank);
        wt.rank = rank;
        ++r.selections;
        break;
      }
      press(target[pos]);
      ++wt.chars_typed;
    }
    if (!wt.rank) {
      if (more) {
        press(U' ');
      } else {
        session.finish();
      }
    }
    wt.keystrokes = session.kp() - before;
    if (opt.trace) r.trace.push_back(std::move(wt));
  }
  r.kp = session.kp();
  r.ka = session.ka();
  r.ksr = session.ksr();
  return r;
}

inline KsrReport simulate_ksr(const Pipeline& pipeline, std::string_view text, std::size_t n = 5,
                              const KsrOptions& opt = {}) {
  return simulate_ksr(PipelinePredictor(pipeline), text, n, opt);
}

struct PerplexityReport {
  double perplexity = 0.0;
  std::size_t tokens = 0;
  std::size_t oov = 0;
  double log10_sum = 0.0;
};

/// 10^(-mean log10 P') over word tokens, updating stateful components word
/// by word as in the KSR simulation.
inline PerplexityReport perplexity(const Pipeline& pipeline, std::string_view text) {
  PipelinePredictor pred(pipeline);
  const auto& vocab = pipeline.model().vocab();
  PerplexityReport r;
  for (const Token& t : typing_tokens(text)) {
    if (t.is_word()) {
      const WordId id = vocab.lookup(t.surface);
      if (id == vocab.unk_id()) ++r.oov;
      const double p = pred.probability(id);
      if (!(p > 0.0)) throw Error("zero probability for word '" + t.surface + "'");
      r.log10_sum += std::log10(p);
      ++r.tokens;
    }
    pred.commit(t);
  }
  if (r.tokens == 0) throw Error("text contains no words");
  r.perplexity = std::pow(10.0, -r.log10_sum / static_cast<double>(r.tokens));
  return r;
}

/// Sample Pearson correlation.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error("pearson: sequences differ in length");
  if (xs.size() < 2) throw Error("pearson: at least two points required");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("pearson: correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct EvalReport {
  std::string config;
  std::string file;
  KsrReport ksr;
  PerplexityReport ppl;

  nlohmann::json to_json(bool with_trace = false) const {
    return {{"v", 1},
            {"config", config},
            {"file", file},
            {"ksr", ksr.to_json(with_trace)},
            {"perplexity", ppl.perplexity},
            {"tokens", ppl.tokens},
            {"oov", ppl.oov}};
  }
};

inline EvalReport evaluate(const Pipeline& pipeline, std::string_view text, std::string file = {},
                           std::optional<std::size_t> list_size = {}, bool trace = false) {
  EvalReport r;
  r.config = pipeline.config().name;
  r.file = std::move(file);
  r.ksr = simulate_ksr(pipeline, text, list_size.value_or(pipeline.config().list_size), {trace, false});
  r.ppl = perplexity(pipeline, text);
  return r;
}

struct Comparison {
  std::vector<EvalReport> runs;
  std::optional<double> correlation;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"v", 1}, {"runs", nlohmann::json::array()}};
    for (const auto& r : runs) j["runs"].push_back(r.to_json());
    j["pearson_ksr_perplexity"] = correlation ? nlohmann::json(*correlation) : nlohmann::json(nullptr);
    return j;
  }
};

/// Runs every config on every text (in parallel) and correlates ksr with
/// perplexity over all (config, file) pairs.
inline Comparison compare_configs(std::shared_ptr<const NGramModel> lm, std::shared_ptr<const SemanticSpace> space,
                                  const std::vector<CombinerConfig>& configs,
                                  const std::vector<std::pair<std::string, std::string>>& texts,
                                  std::optional<std::size_t> list_size = {}) {
  std::vector<std::shared_ptr<const Pipeline>> pipelines;
  for (const auto& c : configs) pipelines.push_back(std::make_shared<const Pipeline>(lm, space, c));
  std::vector<std::future<EvalReport>> jobs;
  for (const auto& p : pipelines) {
    for (const auto& [file, text] : texts) {
      jobs.push_back(std::async(std::launch::async, [p, &file, &text, list_size] {
        return evaluate(*p, text, file, list_size);
      }));
    }
  }
  Comparison c;
  for (auto& j : jobs) c.runs.push_back(j.get());
  std::vector<double> xs, ys;
  for (const auto& r : c.runs) {
    xs.push_back(r.ksr.ksr);
    ys.push_back(r.ppl.perplexity);
  }
  try {
    c.correlation = pearson(xs, ys);
  } catch (const Error&) {
    c.correlation.reset();
  }
  return c;
}

/// Plain-text table: one row per run, then per-config means and the
/// correlation.
inline std::string format_table(const Comparison& c) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-24s %8s %8s %8s %12s %6s\n", "config", "file", "kp", "ka", "ksr",
                "perplexity", "oov");
  os << buf;
  std::map<std::string, std::tuple<double, double, int>> means;
  std::vector<std::string> order;
  for (const auto& r : c.runs) {
    std::snprintf(buf, sizeof buf, "%-10s %-24s %8llu %8llu %8.2f %12.2f %6zu\n", r.config.c_str(), r.file.c_str(),
                  static_cast<unsigned long long>(r.ksr.kp), static_cast<unsigned long long>(r.ksr.ka), r.ksr.ksr,
                  r.ppl.perplexity, r.ppl.oov);
    os << buf;
    auto [it, fresh] = means.try_emplace(r.config, 0.0, 0.0, 0);
    if (fresh) order.push_back(r.config);
    std::get<0>(it->second) += r.ksr.ksr;
    std::get<1>(it->second) += r.ppl.perplexity;
    std::get<2>(it->second) += 1;
  }
  os << '\n';
  std::snprintf(buf, sizeof buf, "%-10s %8s %12s\n", "config", "mean ksr", "mean ppl");
  os << buf;
  for (const auto& name : order) {
    const auto& [k, p, n] = means[name];
    std::snprintf(buf, sizeof buf, "%-10s %8.2f %12.2f\n", name.c_str(), k / n, p / n);
    os << buf;
  }
  if (c.correlation) {
    std::snprintf(buf, sizeof buf, "\npearson(ksr, perplexity) = %.4f over %zu runs\n", *c.correlation,
                  c.runs.size());
  } else {
    std::snprintf(buf, sizeof buf, "\npearson(ksr, perplexity) undefined\n");
  }
  os << buf;
  return os.str();
}

}  // namespace wordpred
