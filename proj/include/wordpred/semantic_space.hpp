#pragma once

// LSA space: term x term co-occurrence counting, truncated SVD, unit term
// vectors, nearest neighbours and the neighbourhood density measure.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "wordpred/corpus.hpp"
#include "wordpred/error.hpp"

namespace wordpred {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rows are indexed by LSA vocabulary id (row 0, the unk sentinel, stays
/// empty); columns are the ids 1..C, i.e. the C most frequent words.
struct CooccurrenceMatrix {
  SparseMatrix cells;
  std::vector<WordId> column_ids;
  std::size_t window_half_width = 0;
};

/// Word tokens that take part in co-occurrence counting: everything but
/// stopwords and numerals.
inline std::vector<std::string> content_words(std::span<const Token> tokens, const WordSet& stopwords) {
  std::vector<std::string> out;
  for (const Token& t : tokens) {
    if (t.is_word() && !stopwords.count(t.surface) && !is_numeral(t.surface)) out.push_back(t.surface);
  }
  return out;
}

/// Counts, for each row word r, how often each column word occurs within
/// +-window positions of r in the content-word stream. The window includes
/// the centre position itself. Cells hold log(1 + count).
inline CooccurrenceMatrix build_cooccurrence(std::span<const Token> tokens, const Vocabulary& lsa_vocab,
                                             std::size_t column_count, std::size_t window,
                                             const WordSet& stopwords = {}) {
  if (window == 0) throw Error("co-occurrence window must be at least 1");
  if (column_count == 0 || column_count > lsa_vocab.size() - 1) {
    throw Error("column count must be in 1..vocabulary size");
  }
  std::vector<WordId> stream;
  for (const auto& w : content_words(tokens, stopwords)) stream.push_back(lsa_vocab.lookup(w));

  const auto unk = lsa_vocab.unk_id();
  const auto column_of = [&](WordId id) -> std::int64_t {
    return id != unk && id <= column_count ? static_cast<std::int64_t>(id) - 1 : -1;
  };

  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  const std::size_t n = stream.size();
  for (std::size_t i = 0; i < n; ++i) {
    const WordId row = stream[i];
    if (row == unk) continue;
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(n - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      const auto col = column_of(stream[j]);
      if (col >= 0) ++counts[static_cast<std::uint64_t>(row) * column_count + static_cast<std::uint64_t>(col)];
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    triplets.emplace_back(static_cast<int>(key / column_count), static_cast<int>(key % column_count),
                          std::log1p(static_cast<double>(c)));
  }
  CooccurrenceMatrix m;
  m.cells.resize(static_cast<Eigen::Index>(lsa_vocab.size()), static_cast<Eigen::Index>(column_count));
  m.cells.setFromTriplets(triplets.begin(), triplets.end());
  m.cells.makeCompressed();
  for (std::size_t c = 0; c < column_count; ++c) m.column_ids.push_back(static_cast<WordId>(c + 1));
  m.window_half_width = window;
  return m;
}

struct SvdOptions {
  std::uint64_t seed = 42;
  /// Stop when no top-k singular value moves by more than tolerance * sigma_max.
  double tolerance = 1e-8;
  int max_iterations = 1000;
  /// Extra block columns beyond k; they speed up convergence.
  int oversample = 10;
};

struct SvdResult {
  Eigen::VectorXd singular_values;
  /// U_k * Sigma_k, one row per matrix row.
  Eigen::MatrixXd row_vectors;
  /// V_k, one column per singular direction.
  Eigen::MatrixXd right_vectors;
  int iterations = 0;
};

namespace detail {

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace detail

/// Top-k singular triplets by block power iteration on A^T A with
/// re-orthonormalization and a Rayleigh-Ritz step each round.
/// Deterministic for a fixed seed.
inline SvdResult truncated_svd(const SparseMatrix& a, int k, const SvdOptions& opt = {}) {
  const Eigen::Index rows = a.rows(), cols = a.cols();
  if (k < 1 || k > std::min(rows, cols)) {
    throw Error("requested " + std::to_string(k) + " dimensions but the matrix is " +
                std::to_string(rows) + "x" + std::to_string(cols));
  }
  bool any = false;
  for (Eigen::Index i = 0; i < a.outerSize() && !any; ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      if (it.value() != 0.0) {
        any = true;
        break;
      }
    }
  }
  if (!any) throw Error("matrix has no nonzero entries");

  const Eigen::MatrixXd gram = Eigen::MatrixXd(SparseMatrix(a.transpose() * a));
  const Eigen::Index block = std::min<Eigen::Index>(cols, k + std::max(0, opt.oversample));

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd q(cols, block);
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index i = 0; i < cols; ++i) q(i, j) = normal(rng);
  }
  q = detail::orthonormalize(q);

  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(k), previous = Eigen::VectorXd::Constant(k, -1.0);
  Eigen::MatrixXd ritz_vectors;
  Eigen::VectorXd ritz_values;
  int iteration = 0;
  bool converged = false;
  while (iteration < opt.max_iterations) {
    ++iteration;
    q = detail::orthonormalize(gram * q);
    const Eigen::MatrixXd t = q.transpose() * gram * q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    ritz_values = es.eigenvalues().reverse();
    ritz_vectors = es.eigenvectors().rowwise().reverse();
    for (int i = 0; i < k; ++i) sigma(i) = std::sqrt(std::max(0.0, ritz_values(i)));
    const double scale = std::max(sigma(0), std::numeric_limits<double>::min());
    if ((sigma - previous).cwiseAbs().maxCoeff() <= opt.tolerance * scale) {
      converged = true;
      break;
    }
    previous = sigma;
  }

  Eigen::MatrixXd v = q * ritz_vectors.leftCols(k);
  if (!converged) {
    const Eigen::MatrixXd residual = gram * v - v * ritz_values.head(k).asDiagonal();
    throw ConvergenceError("truncated SVD did not converge in " + std::to_string(iteration) + " iterations",
                           residual.norm());
  }
  for (int j = 0; j < k; ++j) {
    Eigen::Index arg = 0;
    v.col(j).cwiseAbs().maxCoeff(&arg);
    if (v(arg, j) < 0) v.col(j) = -v.col(j);
  }

  SvdResult out;
  out.right_vectors = v;
  out.row_vectors = a * v;
  out.singular_values.resize(k);
  for (int j = 0; j < k; ++j) out.singular_values(j) = out.row_vectors.col(j).norm();
  out.iterations = iteration;
  return out;
}

struct Neighbor {
  std::size_t index = 0;
  std::string word;
  double cosine = 0.0;
};

/// Unit-length term vectors plus the per-term density table. Immutable
/// after construction.
class SemanticSpace {
 public:
  static constexpr int kDefaultDensityM = 100;
  /// Rows shorter than this share of the longest row count as zero.
  static constexpr double kZeroRowTolerance = 1e-10;

  SemanticSpace() = default;

  /// Normalizes each row; words whose row is (numerically) zero are left out
  /// of the space.
  /// Densities are computed with `density_m` neighbours.
  static SemanticSpace from_rows(const std::vector<std::string>& words, const Eigen::MatrixXd& rows,
                                 int density_m = kDefaultDensityM) {
    if (static_cast<Eigen::Index>(words.size()) != rows.rows()) throw Error("one word per row expected");
    if (density_m < 1) throw Error("density neighbour count must be at least 1");
    SemanticSpace s;
    std::vector<Eigen::Index> keep;
    const double floor = kZeroRowTolerance * (rows.size() ? rows.rowwise().norm().maxCoeff() : 0.0);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      if (rows.row(i).norm() > floor) keep.push_back(i);
    }
    s.vectors_.resize(static_cast<Eigen::Index>(keep.size()), rows.cols());
    for (std::size_t j = 0; j < keep.size(); ++j) {
      s.vectors_.row(static_cast<Eigen::Index>(j)) = rows.row(keep[j]).normalized();
      s.add_word(words[static_cast<std::size_t>(keep[j])]);
    }
    s.density_m_ = density_m;
    s.density_ = s.compute_all_densities(density_m);
    return s;
  }

  /// Builds a space from already-normalized vectors and a density table
  /// (used by the file readers).
  static SemanticSpace from_parts(std::vector<std::string> words, RowMatrix vectors,
                                  std::vector<double> density, int density_m) {
    SemanticSpace s;
    for (auto& w : words) s.add_word(std::move(w));
    s.vectors_ = std::move(vectors);
    s.density_ = std::move(density);
    s.density_m_ = density_m;
    return s;
  }

  std::size_t size() const { return words_.size(); }
  int dims() const { return static_cast<int>(vectors_.cols()); }
  int density_m() const { return density_m_; }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  const std::vector<std::string>& words() const { return words_; }
  const RowMatrix& vectors() const { return vectors_; }
  auto vector(std::size_t i) const { return vectors_.row(static_cast<Eigen::Index>(i)); }
  double stored_density(std::size_t i) const { return density_.at(i); }

  std::optional<std::size_t> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  double cosine(std::size_t a, std::size_t b) const { return vector(a).dot(vector(b)); }

  /// Up to m words other than `index` with cosine > theta, by descending
  /// cosine then ascending index.
  std::vector<Neighbor> neighbors(std::size_t index, std::size_t m, double theta) const {
    if (m == 0) return {};
    const Eigen::VectorXd cos = vectors_ * vector(index).transpose();
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < size(); ++j) {
      if (j != index && cos(static_cast<Eigen::Index>(j)) > theta) candidates.push_back(j);
    }
    const auto better = [&](std::size_t x, std::size_t y) {
      const double cx = cos(static_cast<Eigen::Index>(x)), cy = cos(static_cast<Eigen::Index>(y));
      return cx != cy ? cx > cy : x < y;
    };
    const std::size_t take = std::min(m, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), better);
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < take; ++i) {
      out.push_back({candidates[i], words_[candidates[i]], cos(static_cast<Eigen::Index>(candidates[i]))});
    }
    return out;
  }

  /// Mean cosine of the m nearest neighbours (fewer if the space is small;
  /// 0 for a single-word space).
  double compute_density(std::size_t index, std::size_t m) const {
    const auto nn = neighbors(index, m, -std::numeric_limits<double>::infinity());
    if (nn.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& n : nn) sum += n.cosine;
    return sum / static_cast<double>(nn.size());
  }

  void save_text(std::ostream& os) const {
    os << "#wordpred-lsa\tv1\t" << dims() << '\t' << size() << '\t' << density_m_ << '\n';
    char buf[64];
    const auto put = [&](double v) {
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      os.write(buf, res.ptr - buf);
    };
    for (std::size_t i = 0; i < size(); ++i) {
      os << words_[i] << '\t';
      put(density_[i]);
      os << '\t';
      for (int d = 0; d < dims(); ++d) {
        if (d) os << ' ';
        put(vectors_(static_cast<Eigen::Index>(i), d));
      }
      os << '\n';
    }
  }

  static SemanticSpace load_text(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty space file", 1);
    std::istringstream header(line);
    std::string magic, version;
    long dims = 0, count = 0, m = 0;
    if (!(header >> magic >> version >> dims >> count >> m) || magic != "#wordpred-lsa" || version != "v1" ||
        dims < 1 || count < 0 || m < 1) {
      throw ParseError("bad space header", 1);
    }
    std::vector<std::string> words;
    std::vector<double> density;
    RowMatrix vectors(count, dims);
    std::size_t lineno = 1;
    for (long i = 0; i < count; ++i) {
      if (!std::getline(is, line)) throw ParseError("space file ends early", lineno);
      ++lineno;
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) throw ParseError("expected word, density and vector", lineno);
      words.push_back(line.substr(0, t1));
      const char* p = line.data() + t1 + 1;
      const char* end = line.data() + line.size();
      double v = 0.0;
      auto r = std::from_chars(p, line.data() + t2, v);
      if (r.ec != std::errc()) throw ParseError("bad density", lineno);
      density.push_back(v);
      p = line.data() + t2 + 1;
      for (long d = 0; d < dims; ++d) {
        while (p < end && *p == ' ') ++p;
        r = std::from_chars(p, end, v);
        if (r.ec != std::errc()) throw ParseError("bad vector component", lineno);
        vectors(i, d) = v;
        p = r.ptr;
      }
      while (p < end && (*p == ' ' || *p == '\r')) ++p;
      if (p != end) throw ParseError("too many vector components", lineno);
    }
    return from_parts(std::move(words), std::move(vectors), std::move(density), static_cast<int>(m));
  }

  /// Little-endian binary variant of the text layout.
  void save_binary(std::ostream& os) const {
    os.write(kBinaryMagic, sizeof kBinaryMagic);
    put_u32(os, static_cast<std::uint32_t>(dims()));
    put_u32(os, static_cast<std::uint32_t>(size()));
    put_u32(os, static_cast<std::uint32_t>(density_m_));
    for (std::size_t i = 0; i < size(); ++i) {
      put_u32(os, static_cast<std::uint32_t>(words_[i].size()));
      os.write(words_[i].data(), static_cast<std::streamsize>(words_[i].size()));
      put_f64(os, density_[i]);
      for (int d = 0; d < dims(); ++d) put_f64(os, vectors_(static_cast<Eigen::Index>(i), d));
    }
  }

  static SemanticSpace load_binary(std::istream& is) {
    char magic[sizeof kBinaryMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kBinaryMagic, sizeof magic) != 0) {
      throw ParseError("not a binary space file", 0);
    }
    const auto dims = get_u32(is), count = get_u32(is), m = get_u32(is);
    std::vector<std::string> words;
    std::vector<double> density;
    RowMatrix vectors(count, dims);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string w(get_u32(is), '\0');
      if (!is.read(w.data(), static_cast<std::streamsize>(w.size()))) throw ParseError("truncated space file", 0);
      words.push_back(std::move(w));
      density.push_back(get_f64(is));
      for (std::uint32_t d = 0; d < dims; ++d) vectors(i, d) = get_f64(is);
    }
    return from_parts(std::move(words), std::move(vectors), std::move(density), static_cast<int>(m));
  }

  /// Files ending in ".lsab" use the binary layout.
  void save(const std::string& path) const {
    const bool binary = path.ends_with(".lsab");
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw LoadError("cannot write space file: " + path);
    binary ? save_binary(out) : save_text(out);
  }

  static SemanticSpace load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open space file: " + path);
    char first = static_cast<char>(in.peek());
    return first == kBinaryMagic[0] ? load_binary(in) : load_text(in);
  }

 private:
  static constexpr char kBinaryMagic[8] = {'W', 'P', 'L', 'S', 'A', 'B', '1', '\0'};

  void add_word(std::string w) {
    index_.emplace(w, words_.size());
    words_.push_back(std::move(w));
  }

  std::vector<double> compute_all_densities(int m) const {
    std::vector<double> out(size(), 0.0);
    const Eigen::Index n = static_cast<Eigen::Index>(size());
    if (n < 2) return out;
    const Eigen::Index block = 256;
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(m), size() - 1);
    std::vector<double> row;
    for (Eigen::Index b0 = 0; b0 < n; b0 += block) {
      const Eigen::Index len = std::min(block, n - b0);
      const Eigen::MatrixXd sims = vectors_.middleRows(b0, len) * vectors_.transpose();
      for (Eigen::Index i = 0; i < len; ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != b0 + i) row.push_back(sims(i, j));
        }
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(take - 1), row.end(),
                         std::greater<>());
        double sum = 0.0;
        for (std::size_t t = 0; t < take; ++t) sum += row[t];
        out[static_cast<std::size_t>(b0 + i)] = sum / static_cast<double>(take);
      }
    }
    return out;
  }

  static void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  static void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
  static void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  static std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated space file", 0);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  static double get_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ParseError("truncated space file", 0);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  RowMatrix vectors_;
  std::vector<double> density_;
  int density_m_ = kDefaultDensityM;
};

/// Dot product of the stored unit vectors; empty if either word is not in
/// the space.
inline std::optional<double> cosine(const SemanticSpace& space, std::string_view a, std::string_view b) {
  auto ia = space.find(a), ib = space.find(b);
  if (!ia || !ib) return std::nullopt;
  return space.cosine(*ia, *ib);
}

inline std::optional<std::vector<Neighbor>> nearest_neighbors(const SemanticSpace& space, std::string_view word,
                                                              std::size_t m, double theta) {
  if (m == 0) throw Error("neighbour count must be at least 1");
  auto i = space.find(word);
  if (!i) return std::nullopt;
  return space.neighbors(*i, m, theta);
}

/// D_m(w): the stored table when m matches the space's density m,
/// recomputed otherwise.
inline std::optional<double> density(const SemanticSpace& space, std::string_view word,
                                     int m = SemanticSpace::kDefaultDensityM) {
  if (m < 1) throw Error("density neighbour count must be at least 1");
  auto i = space.find(word);
  if (!i) return std::nullopt;
  if (m == space.density_m()) return space.stored_density(*i);
  return space.compute_density(*i, static_cast<std::size_t>(m));
}

struct LsaTrainOptions {
  int dims = 150;
  std::size_t window = 100;
  std::size_t columns = 3000;
  std::size_t vocab_size = 80000;
  std::uint64_t min_count = 1;
  int density_m = SemanticSpace::kDefaultDensityM;
  SvdOptions svd;
};

/// Whole training pipeline: content-word vocabulary, co-occurrence matrix,
/// truncated SVD, normalization and densities.
inline SemanticSpace train_space(std::span<const Token> tokens, const WordSet& stopwords,
                                 const LsaTrainOptions& opt = {}) {
  std::vector<Token> content;
  for (const auto& w : content_words(tokens, stopwords)) content.push_back({w, TokenKind::word});
  const Vocabulary vocab = build_vocabulary(content, opt.vocab_size, opt.min_count, stopwords);
  if (vocab.size() < 2) throw Error("no content words to build a semantic space from");
  const std::size_t columns = std::min(opt.columns, vocab.size() - 1);
  const auto matrix = build_cooccurrence(content, vocab, columns, opt.window);
  const auto svd = truncated_svd(matrix.cells, opt.dims, opt.svd);
  return SemanticSpace::from_rows(vocab.words(), svd.row_vectors, opt.density_m);
}

}  // namespace wordpred
