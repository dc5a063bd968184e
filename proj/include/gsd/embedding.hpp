#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gsd/domain.hpp"

namespace gsd {

/// Unit-norm, finite, fixed-dimension vector representing one domain name.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  /// L2-normalizes `values`. Throws InvalidVector for empty or non-finite
  /// input and DegenerateVector for an all-zero input.
  static EmbeddingVector from_raw(std::vector<double> values);
  static EmbeddingVector basis(std::size_t dim, std::size_t axis);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

/// u.v / (|u| |v|). Throws DimensionMismatch.
double cosine(std::span<const double> u, std::span<const double> v);
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Row-major block of vectors with cached row norms; the layout kernels use.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::span<const EmbeddingVector> rows);

  std::size_t rows() const noexcept { return norms_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  double norm(std::size_t i) const { return norms_[i]; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::vector<double> norms_;
};

enum class TokenKind { Separator, Brand, Tld, Word, SubwordHead, SubwordCont, Bigram };

struct Token {
  std::string text;  // continuation pieces carry a "##" prefix
  TokenKind kind = TokenKind::Word;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Subword inventory plus brand and TLD tokens that are always kept whole.
class TokenVocabulary {
 public:
  TokenVocabulary() = default;
  TokenVocabulary(std::vector<std::string> base_subwords, std::vector<std::string> tlds,
                  std::vector<std::string> brands);

  /// Reads subwords.txt, tlds.txt and brands.txt from `dir`.
  static TokenVocabulary load(const std::filesystem::path& dir);
  static const TokenVocabulary& bundled();

  bool is_brand(const std::string& s) const { return brands_.contains(s); }
  bool is_tld(const std::string& s) const { return tlds_.contains(s); }
  bool is_subword(const std::string& s) const { return base_.contains(s); }
  /// Brands in insertion order, unique and lowercase.
  const std::vector<std::string>& brands() const noexcept { return brand_list_; }
  std::size_t max_piece() const noexcept { return max_piece_; }

 private:
  std::unordered_set<std::string> base_;
  std::unordered_set<std::string> tlds_;
  std::unordered_set<std::string> brands_;
  std::vector<std::string> brand_list_;
  std::size_t max_piece_ = 0;
};

/// Splits on '.' and '-' (kept as separator tokens). A segment found whole in
/// the vocabulary is one token; otherwise it is cut greedily into the longest
/// known pieces, falling back to character 2-grams where nothing matches.
std::vector<Token> tokenize(std::string_view fqdn, const TokenVocabulary& vocab);

/// Batch interface shared by the reference embedder and external adapters.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  /// Identifier recorded in embedding-file headers.
  virtual std::string model() const = 0;
  /// One vector per input, in input order.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> fqdns) = 0;
};

struct ReferenceEmbedderOptions {
  std::size_t dim = 256;
  std::uint64_t seed = 0;
};

/// Deterministic feature-hashing embedder. Features are the tokens, character
/// trigrams and shape of each zone of the name (subdomain, registrable label,
/// public suffix), plus zone-independent brand evidence: exact brand tokens,
/// brand substrings and near-miss spellings of a brand. Each feature group is
/// scaled to a fixed weight before the final normalization, so the cosine
/// between two names is a weighted blend of their per-group agreement.
class ReferenceEmbedder : public Embedder {
 public:
  explicit ReferenceEmbedder(ReferenceEmbedderOptions opts = {},
                             const TokenVocabulary& vocab = TokenVocabulary::bundled(),
                             const PublicSuffixSnapshot& psl = PublicSuffixSnapshot::bundled());

  std::size_t dim() const override { return opts_.dim; }
  std::string model() const override;
  std::vector<EmbeddingVector> embed(std::span<const std::string> fqdns) override;

  EmbeddingVector embed_one(std::string_view fqdn) const;
  /// Same output as embed(), computed on the calling thread only.
  std::vector<EmbeddingVector> embed_serial(std::span<const std::string> fqdns) const;

  /// Closest brand within the near-miss budget for `segment`, or empty.
  std::string fuzzy_brand(std::string_view segment) const;

 private:
  ReferenceEmbedderOptions opts_;
  const TokenVocabulary* vocab_;
  const PublicSuffixSnapshot* psl_;
};

/// Free-function form of the reference embedder.
EmbeddingVector embed_reference(std::string_view fqdn, const TokenVocabulary& vocab, std::size_t dim,
                                std::uint64_t seed);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace gsd
