#pragma once

// Brute-force interpolated Witten-Bell and modified Kneser-Ney, evaluated
// directly from the count formulas on string n-grams. Shares no code with
// the library.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Gram = std::vector<std::string>;

class BruteLm {
 public:
  /// `sentences` are word sequences without padding; `extra_vocab` lists
  /// vocabulary words that never occur (e.g. "<unk>").
  BruteLm(const std::vector<std::vector<std::string>>& sentences, int order, bool kneser_ney,
          std::set<std::string> extra_vocab = {"<unk>"})
      : order_(order), kn_(kneser_ney) {
    for (const auto& s : sentences) {
      if (s.empty()) continue;
      Gram p{"<s>"};
      p.insert(p.end(), s.begin(), s.end());
      p.push_back("</s>");
      for (std::size_t i = 0; i < p.size(); ++i) {
        for (int n = 1; n <= order && static_cast<int>(i) + 1 >= n; ++n) {
          Gram g(p.begin() + static_cast<long>(i) + 1 - n, p.begin() + static_cast<long>(i) + 1);
          raw_[g] += 1;
        }
      }
      for (std::size_t i = 1; i < p.size(); ++i) vocab_.insert(p[i]);
    }
    for (const auto& w : extra_vocab) vocab_.insert(w);
    // Left extensions: distinct v with raw count(v g) > 0.
    for (const auto& [g, c] : raw_) {
      if (g.size() >= 2) left_[Gram(g.begin() + 1, g.end())].insert(g.front());
    }
    if (kn_) {
      for (int n = 1; n <= order_; ++n) {
        std::array<double, 5> coc{};
        for (const auto& [g, c] : raw_) {
          if (static_cast<int>(g.size()) != n || (n == 1 && g[0] == "<s>")) continue;
          const double a = adjusted(g);
          if (a >= 1 && a <= 4) coc[static_cast<int>(a)] += 1;
        }
        if (coc[1] == 0 || coc[2] == 0 || coc[3] == 0 || coc[4] == 0) {
          kn_ = false;
          fell_back_ = true;
          break;
        }
        const double y = coc[1] / (coc[1] + 2 * coc[2]);
        std::array<double, 3> d{1 - 2 * y * coc[2] / coc[1], 2 - 3 * y * coc[3] / coc[2],
                                3 - 4 * y * coc[4] / coc[3]};
        bool ok = true;
        for (int i = 0; i < 3; ++i) ok = ok && d[i] > 0 && d[i] < i + 1;
        if (!ok) {
          kn_ = false;
          fell_back_ = true;
          break;
        }
        discounts_.push_back(d);
      }
    }
  }

  bool fell_back() const { return fell_back_; }
  const std::vector<std::array<double, 3>>& discounts() const { return discounts_; }
  const std::set<std::string>& vocab() const { return vocab_; }

  /// P(w | h) with h truncated to order-1 words.
  double prob(const std::string& w, Gram h) const {
    if (static_cast<int>(h.size()) > order_ - 1) h.erase(h.begin(), h.end() - (order_ - 1));
    if (w == "<s>") return 0.0;
    return interp(w, h);
  }

 private:
  double raw(const Gram& g) const {
    auto it = raw_.find(g);
    return it == raw_.end() ? 0.0 : it->second;
  }

  double adjusted(const Gram& g) const {
    if (!kn_ || static_cast<int>(g.size()) == order_ || g[0] == "<s>") return raw(g);
    auto it = left_.find(g);
    return it == left_.end() ? 0.0 : static_cast<double>(it->second.size());
  }

  double discount(int n, double a) const {
    const auto& d = discounts_[n - 1];
    return a >= 3 ? d[2] : d[static_cast<int>(a) - 1];
  }

  double interp(const std::string& w, const Gram& h) const {
    const int n = static_cast<int>(h.size()) + 1;
    // Followers of h at order n.
    double total = 0, freed = 0, distinct = 0;
    for (const auto& v : vocab_) {
      Gram g = h;
      g.push_back(v);
      const double a = adjusted(g);
      if (a <= 0) continue;
      total += a;
      distinct += 1;
      if (kn_) freed += discount(n, a);
    }
    Gram g = h;
    g.push_back(w);
    const double a = adjusted(g);
    const double lower = h.empty() ? 1.0 / static_cast<double>(vocab_.size())
                                   : interp(w, Gram(h.begin() + 1, h.end()));
    if (total == 0) return lower;
    if (kn_) return (a > 0 ? (a - discount(n, a)) / total : 0.0) + freed / total * lower;
    return (a + distinct * lower) / (total + distinct);
  }

  int order_;
  bool kn_;
  bool fell_back_ = false;
  std::map<Gram, double> raw_;
  std::map<Gram, std::set<std::string>> left_;
  std::set<std::string> vocab_;
  std::vector<std::array<double, 3>> discounts_;
};

/// Every history of 0..order-1 words over the vocabulary plus <s>.
inline std::vector<Gram> histories(const std::set<std::string>& vocab, int order) {
  std::vector<std::string> words(vocab.begin(), vocab.end());
  words.push_back("<s>");
  std::vector<Gram> out{{}};
  std::size_t from = 0;
  for (int k = 1; k < order; ++k) {
    const std::size_t to = out.size();
    for (std::size_t i = from; i < to; ++i) {
      for (const auto& w : words) {
        Gram g = out[i];
        g.insert(g.begin(), w);
        out.push_back(std::move(g));
      }
    }
    from = to;
  }
  return out;
}

}  // namespace oracle
