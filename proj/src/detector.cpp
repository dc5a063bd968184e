#include "gsd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>

#include <json.hpp>

#include "gsd/error.hpp"
#include "gsd/prefilter.hpp"

namespace gsd {

namespace {

// Slack on the angular pruning bound; covers acos round-off near 0.
constexpr double kAngleSlack = 1e-6;
constexpr std::size_t kStep2Chunk = 4096;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double norm_of(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

double angle(double cos) { return std::acos(std::clamp(cos, -1.0, 1.0)); }

}  // namespace

std::string_view to_string(SearchMode m) {
  switch (m) {
    case SearchMode::Exact: return "exact";
    case SearchMode::AnnVerified: return "ann-verified";
    case SearchMode::Ann: return "ann";
  }
  return "exact";
}

SearchMode search_mode_from_string(std::string_view s) {
  if (s == "exact") return SearchMode::Exact;
  if (s == "ann-verified") return SearchMode::AnnVerified;
  if (s == "ann") return SearchMode::Ann;
  throw Error(Errc::InvalidArgument, "unknown search mode '" + std::string(s) + "'");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Gsd: return "gsd";
    case Verdict::RejectedByRule: return "rejected_by_rule";
    case Verdict::NotSimilar: return "not_similar";
  }
  return "not_similar";
}

std::string to_json_line(const DetectionResult& r) {
  std::string out = "{\"domain\":" + nlohmann::json(r.domain.fqdn).dump();
  out += ",\"verdict\":\"" + std::string(to_string(r.verdict)) + "\"";
  out += ",\"nearest_cluster\":" + (r.nearest_cluster ? std::to_string(*r.nearest_cluster) : std::string("null"));
  out += ",\"matches\":[";
  char buf[32];
  for (std::size_t i = 0; i < r.matches.size(); ++i) {
    if (i) out += ',';
    std::snprintf(buf, sizeof buf, "%.6f", r.matches[i].sim);
    out += "{\"domain\":" + nlohmann::json(r.matches[i].domain).dump() + ",\"sim\":" + buf + "}";
  }
  out += "]}";
  return out;
}

ReferenceIndex ReferenceIndex::build(std::vector<ReferenceEntry> refs, std::map<int, std::optional<MatchingRule>> rules,
                                     const IndexParams& params) {
  if (refs.empty()) throw Error(Errc::EmptyReferenceSet, "no reference embeddings");
  if (!(params.threshold > 0.0 && params.threshold < 1.0)) throw Error(Errc::InvalidArgument, "threshold must be in (0, 1)");
  if (params.k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");

  ReferenceIndex idx;
  idx.params_ = params;
  std::vector<EmbeddingVector> vecs;
  vecs.reserve(refs.size());
  for (auto& r : refs) {
    idx.domains_.push_back(r.domain.fqdn);
    idx.owner_.push_back(r.cluster_id);
    rules.try_emplace(r.cluster_id, std::nullopt);
    vecs.push_back(std::move(r.vector));
  }
  idx.refs_ = EmbeddingMatrix(vecs);
  idx.rules_ = std::move(rules);
  if (params.mode != SearchMode::Exact) idx.train_lists();
  return idx;
}

ReferenceIndex ReferenceIndex::build(const Step1Result& step1, const IndexParams& params) {
  std::vector<ReferenceEntry> refs;
  refs.reserve(step1.reference_domains.size());
  for (std::size_t i = 0; i < step1.reference_domains.size(); ++i) {
    refs.push_back({step1.reference_domains[i], step1.reference_clusters[i], step1.reference_vectors[i]});
  }
  std::map<int, std::optional<MatchingRule>> rules;
  for (const auto& c : step1.clusters) rules[c.cluster_id] = c.rule;
  return build(std::move(refs), std::move(rules), params);
}

void ReferenceIndex::train_lists() {
  const std::size_t n = refs_.rows();
  std::size_t lists = params_.ann.lists ? params_.ann.lists
                                        : static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  lists = std::clamp<std::size_t>(lists, 1, n);

  // Seeded partial Fisher-Yates picks the initial centroids.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t state = params_.ann.seed;
  for (std::size_t i = 0; i < lists; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(splitmix64(state) % (n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<double>> centroids(lists);
  for (std::size_t c = 0; c < lists; ++c) {
    const auto row = refs_.row(order[c]);
    centroids[c].assign(row.begin(), row.end());
  }

  std::vector<std::size_t> assign(n, 0);
  const std::size_t dim = refs_.dim();
  auto assign_all = [&] {
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
      const auto row = refs_.row(static_cast<std::size_t>(i));
      std::size_t best = 0;
      double best_sim = -2.0;
      for (std::size_t c = 0; c < lists; ++c) {
        const double s = kernels::dot(row, centroids[c]);
        if (s > best_sim) {
          best_sim = s;
          best = c;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
    }
  };
  for (int it = 0; it < params_.ann.iterations; ++it) {
    assign_all();
    std::vector<std::vector<double>> sums(lists, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = refs_.row(i);
      auto& s = sums[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += row[d] / refs_.norm(i);
    }
    for (std::size_t c = 0; c < lists; ++c) {
      const double nrm = norm_of(sums[c]);
      if (nrm == 0.0) continue;  // empty list keeps its centroid
      for (double& x : sums[c]) x /= nrm;
      centroids[c] = std::move(sums[c]);
    }
  }
  assign_all();

  members_.assign(lists, {});
  radius_.assign(lists, 0.0);
  centroids_.clear();
  for (auto& c : centroids) centroids_.push_back(EmbeddingVector::from_raw(std::move(c)));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = assign[i];
    members_[c].push_back(static_cast<std::uint32_t>(i));
    const double cos = kernels::dot(refs_.row(i), centroids_[c].values()) / refs_.norm(i);
    radius_[c] = std::max(radius_[c], angle(cos));
  }
}

std::vector<kernels::Hit> ReferenceIndex::candidates_exact(const EmbeddingVector& u) const {
  const double nu = norm_of(u.values());
  std::vector<kernels::Hit> hits;
  for (std::size_t r = 0; r < refs_.rows(); ++r) {
    const double sim = kernels::dot(u.values(), refs_.row(r)) / (nu * refs_.norm(r));
    if (sim >= params_.threshold) hits.push_back({static_cast<std::uint32_t>(r), sim});
  }
  return hits;
}

std::vector<kernels::Hit> ReferenceIndex::candidates_ann(const EmbeddingVector& u, bool bounded) const {
  const std::size_t lists = centroids_.size();
  const double nu = norm_of(u.values());
  std::vector<double> cos(lists);
  for (std::size_t c = 0; c < lists; ++c) cos[c] = kernels::dot(u.values(), centroids_[c].values()) / nu;

  std::vector<std::size_t> probe;
  if (bounded) {
    const double limit = angle(params_.threshold) + kAngleSlack;
    for (std::size_t c = 0; c < lists; ++c) {
      if (angle(cos[c]) - radius_[c] <= limit) probe.push_back(c);
    }
  } else {
    probe.resize(lists);
    std::iota(probe.begin(), probe.end(), 0);
    const std::size_t take = std::min(params_.ann.probes, lists);
    std::partial_sort(probe.begin(), probe.begin() + static_cast<std::ptrdiff_t>(take), probe.end(),
                      [&](std::size_t a, std::size_t b) { return cos[a] > cos[b] || (cos[a] == cos[b] && a < b); });
    probe.resize(take);
  }

  std::vector<std::uint32_t> cand;
  for (std::size_t c : probe) cand.insert(cand.end(), members_[c].begin(), members_[c].end());
  std::sort(cand.begin(), cand.end());
  return kernels::threshold_scan_subset(u.values(), nu, refs_, cand, params_.threshold);
}

DetectionResult ReferenceIndex::decide(std::vector<kernels::Hit> hits, const DomainName& domain) const {
  std::sort(hits.begin(), hits.end(), [&](const kernels::Hit& a, const kernels::Hit& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    if (domains_[a.ref] != domains_[b.ref]) return domains_[a.ref] < domains_[b.ref];
    return a.ref < b.ref;
  });
  DetectionResult r;
  r.domain = domain;
  r.matches.reserve(hits.size());
  for (const auto& h : hits) r.matches.push_back({domains_[h.ref], h.sim});
  if (!hits.empty()) r.nearest_cluster = owner_[hits.front().ref];
  if (hits.size() < static_cast<std::size_t>(params_.k)) {
    r.verdict = Verdict::NotSimilar;
    return r;
  }
  const auto& rule = rules_.at(owner_[hits.front().ref]);
  r.verdict = rule && !rule->matches(domain) ? Verdict::RejectedByRule : Verdict::Gsd;
  return r;
}

DetectionResult ReferenceIndex::query(const EmbeddingVector& u, const DomainName& domain) const {
  if (u.dim() != refs_.dim()) {
    throw Error(Errc::DimensionMismatch, "query dim " + std::to_string(u.dim()) + " vs index dim " +
                                             std::to_string(refs_.dim()));
  }
  switch (params_.mode) {
    case SearchMode::Exact:
      return decide(candidates_exact(u), domain);
    case SearchMode::Ann:
      return decide(candidates_ann(u, false), domain);
    case SearchMode::AnnVerified: {
      DetectionResult pruned = decide(candidates_ann(u, true), domain);
      if (pruned.verdict == Verdict::NotSimilar) return pruned;
      DetectionResult full = decide(candidates_exact(u), domain);
      if (full.verdict != pruned.verdict || full.matches != pruned.matches) {
        mismatches_->fetch_add(1);
        return full;
      }
      return pruned;
    }
  }
  return decide(candidates_exact(u), domain);
}

std::vector<DetectionResult> ReferenceIndex::query_batch(std::span<const EmbeddingVector> us,
                                                         std::span<const DomainName> domains) const {
  if (us.size() != domains.size()) throw Error(Errc::InvalidArgument, "vectors and domains differ in length");
  for (const auto& u : us) {
    if (u.dim() != refs_.dim()) {
      throw Error(Errc::DimensionMismatch, "query dim " + std::to_string(u.dim()) + " vs index dim " +
                                               std::to_string(refs_.dim()));
    }
  }
  std::vector<DetectionResult> out(us.size());
  if (params_.mode == SearchMode::Exact) {
    const EmbeddingMatrix queries(us);
    auto hits = kernels::threshold_scan_omp(queries, refs_, params_.threshold);
    for (std::size_t i = 0; i < us.size(); ++i) out[i] = decide(std::move(hits[i]), domains[i]);
    return out;
  }
  const auto n = static_cast<std::ptrdiff_t>(us.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = query(us[k], domains[k]);
  }
  return out;
}

std::vector<DetectionResult> run_step2(std::span<const IngestRecord> records, const ReferenceIndex& index,
                                       Embedder& embedder, Step2Stats* stats) {
  Step2Stats local;
  local.input = records.size();
  std::vector<DomainName> kept;
  for (const auto& rec : records) {
    if (filter_domain(rec.domain).keep) {
      kept.push_back(rec.domain);
    } else {
      ++local.filtered;
    }
  }
  std::vector<DetectionResult> out;
  out.reserve(kept.size());
  for (std::size_t start = 0; start < kept.size(); start += kStep2Chunk) {
    const std::size_t end = std::min(kept.size(), start + kStep2Chunk);
    std::vector<std::string> names;
    for (std::size_t i = start; i < end; ++i) names.push_back(kept[i].fqdn);
    const auto vecs = embedder.embed(names);
    auto results = index.query_batch(vecs, std::span(kept).subspan(start, end - start));
    for (auto& r : results) {
      switch (r.verdict) {
        case Verdict::Gsd: ++local.gsd; break;
        case Verdict::RejectedByRule: ++local.rejected; break;
        case Verdict::NotSimilar: ++local.not_similar; break;
      }
      out.push_back(std::move(r));
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace gsd
