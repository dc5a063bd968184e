#include "gsd/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

#include "gsd/edit_distance.hpp"
#include "gsd/error.hpp"

namespace gsd {

// ---------------------------------------------------------------------------
// Vectors

EmbeddingVector EmbeddingVector::from_raw(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::InvalidVector, "empty vector");
  double sq = 0.0;
  for (double x : values) {
    if (!std::isfinite(x)) throw Error(Errc::InvalidVector, "non-finite component");
    sq += x * x;
  }
  if (sq == 0.0) throw Error(Errc::DegenerateVector, "all-zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : values) x *= inv;
  EmbeddingVector v;
  v.values_ = std::move(values);
  return v;
}

EmbeddingVector EmbeddingVector::basis(std::size_t dim, std::size_t axis) {
  if (axis >= dim) throw Error(Errc::InvalidArgument, "basis axis out of range");
  std::vector<double> values(dim, 0.0);
  values[axis] = 1.0;
  return from_raw(std::move(values));
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) { return cosine(u.values(), v.values()); }

EmbeddingMatrix::EmbeddingMatrix(std::span<const EmbeddingVector> rows) {
  if (rows.empty()) return;
  dim_ = rows.front().dim();
  data_.reserve(rows.size() * dim_);
  norms_.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.dim() != dim_) {
      throw Error(Errc::DimensionMismatch, std::to_string(r.dim()) + " vs " + std::to_string(dim_));
    }
    double sq = 0.0;
    for (double x : r.values()) {
      data_.push_back(x);
      sq += x * x;
    }
    norms_.push_back(std::sqrt(sq));
  }
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Vocabulary and tokenizer

TokenVocabulary::TokenVocabulary(std::vector<std::string> base_subwords, std::vector<std::string> tlds,
                                 std::vector<std::string> brands) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  for (auto& s : base_subwords) {
    if (s.empty()) continue;
    max_piece_ = std::max(max_piece_, s.size());
    base_.insert(lower(std::move(s)));
  }
  for (auto& s : tlds) {
    s = lower(std::move(s));
    if (s.starts_with('.')) s.erase(0, 1);
    if (!s.empty()) tlds_.insert(std::move(s));
  }
  for (auto& s : brands) {
    s = lower(std::move(s));
    if (s.empty() || brands_.contains(s)) continue;
    max_piece_ = std::max(max_piece_, s.size());
    brands_.insert(s);
    brand_list_.push_back(std::move(s));
  }
}

namespace {

std::vector<std::string> read_word_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with('#')) continue;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return words;
}

bool is_separator(char c) { return c == '.' || c == '-'; }

void tokenize_segment(std::string_view seg, const TokenVocabulary& vocab, std::vector<Token>& out) {
  const std::string whole(seg);
  if (vocab.is_brand(whole)) {
    out.push_back({whole, TokenKind::Brand});
    return;
  }
  if (vocab.is_tld(whole)) {
    out.push_back({whole, TokenKind::Tld});
    return;
  }
  if (vocab.is_subword(whole)) {
    out.push_back({whole, TokenKind::Word});
    return;
  }
  std::size_t pos = 0;
  while (pos < seg.size()) {
    const std::size_t longest = std::min(vocab.max_piece(), seg.size() - pos);
    std::size_t take = 0;
    for (std::size_t len = longest; len >= 2; --len) {
      const std::string piece(seg.substr(pos, len));
      if (vocab.is_subword(piece) || vocab.is_brand(piece)) {
        take = len;
        break;
      }
    }
    const std::string prefix = pos == 0 ? "" : "##";
    if (take > 0) {
      out.push_back({prefix + std::string(seg.substr(pos, take)),
                     pos == 0 ? TokenKind::SubwordHead : TokenKind::SubwordCont});
    } else {
      take = std::min<std::size_t>(2, seg.size() - pos);
      out.push_back({prefix + std::string(seg.substr(pos, take)), TokenKind::Bigram});
    }
    pos += take;
  }
}

}  // namespace

TokenVocabulary TokenVocabulary::load(const std::filesystem::path& dir) {
  return TokenVocabulary(read_word_file(dir / "subwords.txt"), read_word_file(dir / "tlds.txt"),
                         read_word_file(dir / "brands.txt"));
}

const TokenVocabulary& TokenVocabulary::bundled() {
  static const TokenVocabulary vocab = load(data_dir());
  return vocab;
}

std::vector<Token> tokenize(std::string_view fqdn, const TokenVocabulary& vocab) {
  std::vector<Token> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= fqdn.size(); ++i) {
    if (i < fqdn.size() && !is_separator(fqdn[i])) continue;
    if (i > start) tokenize_segment(fqdn.substr(start, i - start), vocab, out);
    if (i < fqdn.size()) out.push_back({std::string(1, fqdn[i]), TokenKind::Separator});
    start = i + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference embedder

namespace {

enum class Zone { Sub, Reg, Suffix, Any };

std::string_view zone_tag(Zone z) {
  switch (z) {
    case Zone::Sub: return "s";
    case Zone::Reg: return "r";
    case Zone::Suffix: return "t";
    case Zone::Any: return "*";
  }
  return "?";
}

std::string_view kind_tag(TokenKind k) {
  switch (k) {
    case TokenKind::Separator: return "sep";
    case TokenKind::Brand: return "brand";
    case TokenKind::Tld: return "tld";
    case TokenKind::Word: return "word";
    case TokenKind::SubwordHead: return "head";
    case TokenKind::SubwordCont: return "cont";
    case TokenKind::Bigram: return "bi";
  }
  return "?";
}

double token_weight(TokenKind k) {
  switch (k) {
    case TokenKind::Brand: return 2.0;
    case TokenKind::Tld: return 1.0;
    case TokenKind::Word: return 1.5;
    case TokenKind::SubwordHead:
    case TokenKind::SubwordCont: return 1.0;
    case TokenKind::Bigram: return 0.5;
    case TokenKind::Separator: return 0.0;
  }
  return 0.0;
}

// Relative weights of the feature groups.
constexpr double kBrandGroup = 2.0;
constexpr double kTokenGroup = 1.0;
constexpr double kGramGroup = 1.0;
constexpr double kSuffixGroup = 0.5;
constexpr double kShapeGroup = 1.0;
constexpr double kRegUnderSub = 0.4;

constexpr std::size_t kMinBrandEvidence = 4;

std::size_t near_miss_budget(std::size_t brand_len) {
  if (brand_len < 5) return 0;
  if (brand_len == 5) return 1;
  if (brand_len <= 8) return 2;
  return 3;
}

/// Features of one group; weights are accumulated per key in sorted order so
/// the float sum is independent of insertion order.
class FeatureGroup {
 public:
  void add(std::string key, double weight) { features_[std::move(key)] += weight; }
  bool empty() const { return features_.empty(); }

  void scatter(std::vector<double>& out, double group_weight, std::uint64_t basis) const {
    double sq = 0.0;
    for (const auto& [key, w] : features_) sq += w * w;
    if (sq == 0.0) return;
    const double scale = group_weight / std::sqrt(sq);
    const std::size_t dim = out.size();
    for (const auto& [key, w] : features_) {
      const std::uint64_t h = fnv1a64(key, basis);
      const std::size_t bucket = static_cast<std::size_t>((h >> 1) % dim);
      const double sign = (h & 1) ? 1.0 : -1.0;
      out[bucket] += sign * w * scale;
    }
  }

 private:
  std::map<std::string, double> features_;
};

std::string key(std::string_view kind, Zone z, std::string_view text) {
  std::string k;
  k.reserve(kind.size() + text.size() + 4);
  k += kind;
  k += '\x1f';
  k += zone_tag(z);
  k += '\x1f';
  k += text;
  return k;
}

struct Zones {
  std::string sub;     // subdomain labels joined by dots
  std::string reg;     // leftmost label of the registrable domain
  std::string suffix;  // public suffix without leading dot
};

Zones split_zones(std::string_view fqdn, const PublicSuffixSnapshot& psl) {
  try {
    const DomainName d = parse_fqdn(fqdn, psl);
    const auto suffix_labels = static_cast<std::size_t>(std::count(d.tld.begin(), d.tld.end(), '.'));
    return {d.subdomain(), d.labels[d.labels.size() - suffix_labels - 1], d.tld.substr(1)};
  } catch (const Error&) {
    // Unparseable input still embeds: last label as suffix, the one before
    // as the registrable label.
    std::vector<std::string_view> labels;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= fqdn.size(); ++i) {
      if (i < fqdn.size() && fqdn[i] != '.') continue;
      if (i > start) labels.push_back(fqdn.substr(start, i - start));
      start = i + 1;
    }
    Zones z;
    if (labels.empty()) return z;
    if (labels.size() == 1) {
      z.reg = labels[0];
      return z;
    }
    z.suffix = labels.back();
    z.reg = labels[labels.size() - 2];
    for (std::size_t i = 0; i + 2 < labels.size(); ++i) {
      if (i) z.sub += '.';
      z.sub += labels[i];
    }
    return z;
  }
}

std::string shape_of(std::string_view s, bool coarse) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c >= 'a' && c <= 'z') {
      out.push_back(coarse ? 'x' : 'a');
    } else if (c >= '0' && c <= '9') {
      out.push_back(coarse ? 'x' : '9');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string_view> segments(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && !is_separator(s[i])) continue;
    if (i > start) out.push_back(s.substr(start, i - start));
    start = i + 1;
  }
  return out;
}

}  // namespace

ReferenceEmbedder::ReferenceEmbedder(ReferenceEmbedderOptions opts, const TokenVocabulary& vocab,
                                     const PublicSuffixSnapshot& psl)
    : opts_(opts), vocab_(&vocab), psl_(&psl) {
  if (opts_.dim < 16) throw Error(Errc::InvalidArgument, "reference embedder needs dim >= 16");
}

std::string ReferenceEmbedder::model() const {
  return "reference-v1:dim=" + std::to_string(opts_.dim) + ",seed=" + std::to_string(opts_.seed);
}

std::string ReferenceEmbedder::fuzzy_brand(std::string_view segment) const {
  std::string best;
  std::size_t best_d = 0;
  for (const auto& brand : vocab_->brands()) {
    const std::size_t budget = near_miss_budget(brand.size());
    if (budget == 0) continue;
    const std::size_t d = damerau_levenshtein_bounded(segment, brand, budget);
    if (d == 0 || d > budget) continue;
    if (best.empty() || d < best_d || (d == best_d && brand < best)) {
      best = brand;
      best_d = d;
    }
  }
  return best;
}

EmbeddingVector ReferenceEmbedder::embed_one(std::string_view fqdn) const {
  const Zones zones = split_zones(fqdn, *psl_);
  const std::uint64_t basis = fnv1a64(std::to_string(opts_.seed));

  FeatureGroup brand_group, suffix_group, shape_group;
  FeatureGroup token_groups[2], gram_groups[2];
  const std::string_view zone_text[2] = {zones.sub, zones.reg};
  const Zone zone_id[2] = {Zone::Sub, Zone::Reg};

  for (int zi = 0; zi < 2; ++zi) {
    const std::string_view text = zone_text[zi];
    if (text.empty()) continue;
    const Zone z = zone_id[zi];
    for (const Token& tok : tokenize(text, *vocab_)) {
      if (tok.kind == TokenKind::Separator) continue;
      token_groups[zi].add(key(kind_tag(tok.kind), z, tok.text), token_weight(tok.kind));
      if (tok.kind == TokenKind::Brand) brand_group.add(key("brand", Zone::Any, tok.text), 1.0);
    }
    for (std::string_view seg : segments(text)) {
      const std::string framed = "^" + std::string(seg) + "$";
      for (std::size_t i = 0; i + 3 <= framed.size(); ++i) {
        gram_groups[zi].add(key("tri", z, framed.substr(i, 3)), 1.0);
      }
      if (seg.size() < kMinBrandEvidence) continue;
      const std::string s(seg);
      if (vocab_->is_brand(s)) continue;  // already counted as a token
      bool found = false;
      for (const auto& brand : vocab_->brands()) {
        if (brand.size() >= kMinBrandEvidence && s.find(brand) != std::string::npos) {
          brand_group.add(key("brand", Zone::Any, brand), 1.0);
          token_groups[zi].add(key("brand", z, brand), token_weight(TokenKind::Brand));
          found = true;
        }
      }
      if (!found) {
        const std::string near = fuzzy_brand(s);
        if (!near.empty()) {
          brand_group.add(key("brand", Zone::Any, near), 1.0);
          token_groups[zi].add(key("brand", z, near), token_weight(TokenKind::Brand));
        }
      }
    }
  }
  if (!zones.suffix.empty()) suffix_group.add(key("suffix", Zone::Suffix, zones.suffix), 1.0);

  std::string body = zones.sub.empty() ? zones.reg : zones.sub + "." + zones.reg;
  shape_group.add(key("shape", Zone::Any, shape_of(body, false)), 1.0);
  shape_group.add(key("cshape", Zone::Any, shape_of(body, true)), 1.0);
  shape_group.add(key("len", Zone::Any, std::to_string(body.size())), 1.0);

  std::vector<double> acc(opts_.dim, 0.0);
  brand_group.scatter(acc, kBrandGroup, basis);
  // With a subdomain present the registrable label is often a throwaway
  // random string; the subdomain carries the lure.
  const double zone_weight[2] = {1.0, zones.sub.empty() ? 1.0 : kRegUnderSub};
  for (int zi = 0; zi < 2; ++zi) {
    token_groups[zi].scatter(acc, kTokenGroup * zone_weight[zi], basis);
    gram_groups[zi].scatter(acc, kGramGroup * zone_weight[zi], basis);
  }
  suffix_group.scatter(acc, kSuffixGroup, basis);
  shape_group.scatter(acc, kShapeGroup, basis);

  try {
    return EmbeddingVector::from_raw(std::move(acc));
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateVector) throw;
    warn("degenerate embedding for '" + std::string(fqdn) + "', using e_0");
    return EmbeddingVector::basis(opts_.dim, 0);
  }
}

std::vector<EmbeddingVector> ReferenceEmbedder::embed_serial(std::span<const std::string> fqdns) const {
  std::vector<EmbeddingVector> out;
  out.reserve(fqdns.size());
  for (const auto& f : fqdns) out.push_back(embed_one(f));
  return out;
}

std::vector<EmbeddingVector> ReferenceEmbedder::embed(std::span<const std::string> fqdns) {
  std::vector<EmbeddingVector> out(fqdns.size());
  std::exception_ptr failure;
  std::once_flag once;
  const auto n = static_cast<std::ptrdiff_t>(fqdns.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = embed_one(fqdns[static_cast<std::size_t>(i)]);
    } catch (...) {
      std::call_once(once, [&] { failure = std::current_exception(); });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EmbeddingVector embed_reference(std::string_view fqdn, const TokenVocabulary& vocab, std::size_t dim,
                                std::uint64_t seed) {
  return ReferenceEmbedder({dim, seed}, vocab, PublicSuffixSnapshot::bundled()).embed_one(fqdn);
}

}  // namespace gsd
