#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles/smoothing.hpp"
#include "toy.hpp"
#include "wordpred/ngram.hpp"

using namespace wordpred;

namespace {

std::vector<std::vector<std::string>> split(const std::vector<std::string>& lines) {
  std::vector<std::vector<std::string>> out;
  for (const auto& l : lines) {
    std::istringstream ss(l);
    std::vector<std::string> s;
    for (std::string w; ss >> w;) s.push_back(w);
    out.push_back(s);
  }
  return out;
}

Vocabulary vocab_of(const std::vector<std::vector<std::string>>& sentences) {
  std::vector<Token> toks;
  for (const auto& s : sentences) {
    for (const auto& w : s) toks.push_back({w, TokenKind::word});
  }
  return build_vocabulary(toks, 1000);
}

NGramModel model_of(const std::vector<std::vector<std::string>>& sentences, int order, Smoothing s) {
  return estimate_model(count_ngrams(sentences, vocab_of(sentences), order), s);
}

std::vector<WordId> ids(const NGramModel& m, const std::vector<std::string>& words) {
  std::vector<WordId> out;
  for (const auto& w : words) out.push_back(m.vocab().lookup(w));
  return out;
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST(Counts, BigramsOfShortSentence) {
  const auto s = split({"a b"});
  const auto t = count_ngrams(s, vocab_of(s), 2);
  const WordId a = t.vocab.lookup("a"), b = t.vocab.lookup("b");
  EXPECT_EQ(t.counts[1].size(), 3u);
  EXPECT_EQ(t.count(std::vector<WordId>{t.bos(), a}), 1u);
  EXPECT_EQ(t.count(std::vector<WordId>{a, b}), 1u);
  EXPECT_EQ(t.count(std::vector<WordId>{b, t.eos()}), 1u);
}

TEST(Counts, UnigramsWithBoundaries) {
  const auto s = split({"a a a"});
  const auto t = count_ngrams(s, vocab_of(s), 1);
  EXPECT_EQ(t.count(std::vector<WordId>{t.vocab.lookup("a")}), 3u);
  EXPECT_EQ(t.count(std::vector<WordId>{t.eos()}), 1u);
  EXPECT_EQ(t.count(std::vector<WordId>{t.bos()}), 1u);
}

TEST(Counts, EmptyCorpus) {
  const auto t = count_ngrams(std::vector<std::vector<std::string>>{}, Vocabulary{}, 3);
  EXPECT_TRUE(t.empty());
  EXPECT_THROW(estimate_model(t), Error);
}

TEST(Counts, RejectsBadOrder) {
  EXPECT_THROW(count_ngrams(split({"a"}), Vocabulary{}, 0), Error);
  EXPECT_THROW(count_ngrams(split({"a"}), Vocabulary{}, 6), Error);
}

TEST(Counts, MarginalsAreConsistent) {
  std::mt19937_64 rng(3);
  const auto tokens = tokenize(toy::random_text(rng, 15, 30));
  const auto vocab = build_vocabulary(tokens, 100);
  const auto t = count_ngrams(tokens, vocab, 3);
  for (int n = 1; n < 3; ++n) {
    NGramMap<std::uint64_t> sums;
    for (const auto& [g, c] : t.counts[n]) sums[g.prefix()] += c;
    for (const auto& [g, c] : t.counts[n - 1]) {
      if (g.back() == t.eos()) continue;
      EXPECT_EQ(sums[g], c);
    }
  }
}

TEST(Prune, KeepsFrequentBigrams) {
  const auto s = split({"a b a b"});
  const auto t = prune_counts(count_ngrams(s, vocab_of(s), 2), {1, 2});
  ASSERT_EQ(t.counts[1].size(), 1u);
  EXPECT_EQ(t.count(std::vector<WordId>{t.vocab.lookup("a"), t.vocab.lookup("b")}), 2u);
  EXPECT_EQ(t.counts[0].size(), count_ngrams(s, vocab_of(s), 2).counts[0].size());
  EXPECT_TRUE(t.pruned);
}

TEST(Prune, UnitThresholdIsIdentity) {
  const auto s = split({"a b a b", "b c"});
  const auto full = count_ngrams(s, vocab_of(s), 3);
  const auto t = prune_counts(full, {1, 1, 1});
  for (int n = 0; n < 3; ++n) EXPECT_EQ(t.counts[n], full.counts[n]);
}

TEST(Prune, HighThresholdEmptiesHigherOrders) {
  const auto s = split({"a b a b"});
  const auto t = prune_counts(count_ngrams(s, vocab_of(s), 3), {1, 100, 100});
  EXPECT_TRUE(t.counts[1].empty());
  EXPECT_TRUE(t.counts[2].empty());
  EXPECT_NEAR(sum(estimate_model(t, Smoothing::witten_bell).distribution(std::vector<WordId>{})), 1.0, 1e-9);
}

TEST(Prune, RestoresPrefixesOfKeptGrams) {
  const auto s = split({"a b c", "a b c", "x b y"});
  const auto t = prune_counts(count_ngrams(s, vocab_of(s), 3), {1, 3, 2});
  const WordId a = t.vocab.lookup("a"), b = t.vocab.lookup("b");
  EXPECT_EQ(t.count(std::vector<WordId>{a, b, t.vocab.lookup("c")}), 2u);
  EXPECT_EQ(t.count(std::vector<WordId>{a, b}), 2u);
}

TEST(WittenBell, HandValue) {
  const auto m = model_of(split({"a b a b"}), 2, Smoothing::witten_bell);
  const auto p = m.probability(m.vocab().lookup("b"), ids(m, {"a"}));
  EXPECT_NEAR(p, 0.78125, 1e-10);
}

TEST(WittenBell, UnseenBigramBacksOff) {
  const auto m = model_of(split({"a b a b"}), 2, Smoothing::witten_bell);
  const WordId a = m.vocab().lookup("a");
  const double p = m.probability(a, std::vector<WordId>{a});
  EXPECT_NEAR(p, 2.75 / 8.0 / 3.0, 1e-10);
  const auto* ctx = m.find(std::vector<WordId>{a});
  ASSERT_TRUE(ctx && ctx->has_backoff);
  EXPECT_NEAR(p, std::pow(10.0, ctx->backoff) * std::pow(10.0, ctx->logprob), 1e-10);
}

TEST(WittenBell, SingleWordCorpus) {
  for (auto s : {Smoothing::witten_bell, Smoothing::modified_kneser_ney}) {
    const auto m = model_of(split({"a"}), 1, s);
    const std::vector<WordId> none;
    const double total = m.probability(m.vocab().lookup("a"), none) + m.probability(m.vocab().unk_id(), none) +
                         m.probability(*m.eos(), none);
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
}

TEST(KneserNey, DegenerateCountsFallBack) {
  const auto m = model_of(split({"a b c d"}), 2, Smoothing::modified_kneser_ney);
  EXPECT_TRUE(m.info().fell_back);
  EXPECT_EQ(m.info().used, Smoothing::witten_bell);
  EXPECT_EQ(m.info().requested, Smoothing::modified_kneser_ney);
}

TEST(Model, HistoryIsTruncated) {
  const auto m = model_of(split({"a b c a b d", "c a b c"}), 3, Smoothing::witten_bell);
  const WordId c = m.vocab().lookup("c");
  EXPECT_EQ(m.probability(c, ids(m, {"d", "d", "a", "b"})), m.probability(c, ids(m, {"a", "b"})));
}

TEST(Model, StoredEntriesAreReturnedExactly) {
  std::mt19937_64 rng(5);
  const auto m = *toy::random_model(rng, 20, 40, 3, Smoothing::modified_kneser_ney);
  for (int n = 1; n <= 3; ++n) {
    for (const auto& [g, e] : m.grams(n)) {
      const auto v = g.view();
      EXPECT_EQ(m.log10_probability(v.back(), v.first(v.size() - 1)), e.logprob);
    }
  }
}

TEST(Model, NormalizedForRandomHistories) {
  std::mt19937_64 rng(9);
  for (auto s : {Smoothing::witten_bell, Smoothing::modified_kneser_ney}) {
    const auto m = toy::random_model(rng, 50, 200, 4, s);
    std::uniform_int_distribution<WordId> pick(0, static_cast<WordId>(m->vocab().size() - 1));
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<WordId> h(rng() % 4);
      for (auto& w : h) w = pick(rng);
      double total = 0;
      for (WordId w = 0; w < m->vocab().size(); ++w) total += m->probability(w, h);
      EXPECT_NEAR(total, 1.0, 1e-4);
      const auto d = m->distribution(h);
      EXPECT_NEAR(sum(d), 1.0, 1e-4);
      for (WordId w = 0; w < m->vocab().size(); ++w) {
        if (w == *m->bos()) continue;
        EXPECT_NEAR(d[w], m->probability(w, h), 1e-12);
      }
    }
  }
}

TEST(Model, MatchesBruteForceOracle) {
  std::mt19937_64 rng(21);
  for (int order = 1; order <= 3; ++order) {
    int wb_checked = 0, mkn_checked = 0;
    for (int attempt = 0; attempt < 40000 && (wb_checked < 60 || mkn_checked < 15); ++attempt) {
      const auto sentences = toy::tiny_corpus(rng, 4 + rng() % 9, 30 + rng() % 21);
      for (bool kn : {false, true}) {
        if (!kn && wb_checked >= 60) continue;
        const oracle::BruteLm brute(sentences, order, kn);
        const auto m = model_of(sentences, order, kn ? Smoothing::modified_kneser_ney : Smoothing::witten_bell);
        ASSERT_EQ(m.info().fell_back, brute.fell_back());
        if (kn && (brute.fell_back() || mkn_checked >= 15)) continue;
        (kn ? mkn_checked : wb_checked) += 1;
        if (kn) {
          for (std::size_t n = 0; n < brute.discounts().size(); ++n) {
            for (int i = 0; i < 3; ++i) EXPECT_NEAR(m.info().discounts[n][i], brute.discounts()[n][i], 1e-12);
          }
        }
        for (const auto& h : oracle::histories(brute.vocab(), order)) {
          for (const auto& w : brute.vocab()) {
            EXPECT_NEAR(m.probability(m.vocab().lookup(w), ids(m, h)), brute.prob(w, h), 1e-10)
                << "order " << order << " kn " << kn << " w " << w;
          }
        }
      }
    }
    EXPECT_EQ(wb_checked, 60) << "order " << order;
    EXPECT_EQ(mkn_checked, 15) << "order " << order;
  }
}

TEST(Smoothing, NamesRoundTrip) {
  EXPECT_EQ(smoothing_from_string(to_string(Smoothing::witten_bell)), Smoothing::witten_bell);
  EXPECT_EQ(smoothing_from_string("mkn"), Smoothing::modified_kneser_ney);
  EXPECT_THROW(smoothing_from_string("good-turing"), Error);
}

TEST(Train, OneCallPipeline) {
  NGramTrainOptions opt;
  opt.order = 2;
  opt.vocab_size = 2;
  const auto m = train_ngram(tokenize("a b a c. a b."), opt);
  EXPECT_EQ(m.order(), 2);
  EXPECT_FALSE(m.vocab().contains("c"));
  EXPECT_GT(m.probability(m.vocab().unk_id(), std::vector<WordId>{}), 0.0);
}
