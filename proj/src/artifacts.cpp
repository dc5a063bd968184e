#include "gsd/artifacts.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gsd/adapters.hpp"
#include "gsd/error.hpp"

namespace gsd {

namespace {

/// Writes through a temporary file so readers never see a partial artifact.
void write_atomically(const std::filesystem::path& path, const std::string& body) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << body;
    if (!out) throw Error(Errc::Io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  return in;
}

}  // namespace

void write_clusters(const std::filesystem::path& path, std::span<const Cluster> clusters) {
  std::string body;
  for (const auto& c : clusters) {
    nlohmann::ordered_json j;
    j["cluster_id"] = c.cluster_id;
    auto& members = j["members"] = nlohmann::ordered_json::array();
    for (const auto& m : c.members) members.push_back(m.fqdn);
    body += j.dump() + "\n";
  }
  write_atomically(path, body);
}

std::vector<Cluster> read_clusters(const std::filesystem::path& path, const PublicSuffixSnapshot& psl) {
  auto in = open_or_throw(path);
  std::vector<Cluster> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Cluster c;
      c.cluster_id = j.at("cluster_id").get<int>();
      for (const auto& m : j.at("members")) c.members.push_back(parse_fqdn(m.get<std::string>(), psl));
      c.rule = generate_rule(c);
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_rules(const std::filesystem::path& path, std::span<const Cluster> clusters) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : clusters) {
    nlohmann::ordered_json j;
    j["cluster_id"] = c.cluster_id;
    if (c.rule) {
      if (c.rule->tld) j["tld"] = *c.rule->tld;
      if (c.rule->e2ld) j["e2ld"] = *c.rule->e2ld;
      if (c.rule->num) j["num"] = *c.rule->num;
    }
    arr.push_back(std::move(j));
  }
  write_atomically(path, arr.dump() + "\n");
}

std::map<int, std::optional<MatchingRule>> read_rules(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::map<int, std::optional<MatchingRule>> out;
  try {
    const auto arr = nlohmann::json::parse(ss.str());
    if (!arr.is_array()) throw Error(Errc::MalformedRecord, path.string() + ": expected a JSON array");
    for (const auto& j : arr) {
      MatchingRule r;
      if (j.contains("tld")) r.tld = j["tld"].get<std::string>();
      if (j.contains("e2ld")) r.e2ld = j["e2ld"].get<std::string>();
      if (j.contains("num")) r.num = j["num"].get<std::size_t>();
      out[j.at("cluster_id").get<int>()] = r.empty() ? std::nullopt : std::optional(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, path.string() + ": " + e.what());
  }
  return out;
}

void write_step1(const Step1Result& r, const std::filesystem::path& clusters, const std::filesystem::path& rules,
                 const std::filesystem::path& embeddings, std::string_view model, std::size_t dim) {
  write_clusters(clusters, r.clusters);
  write_rules(rules, r.clusters);
  std::vector<std::string> names;
  names.reserve(r.reference_domains.size());
  for (const auto& d : r.reference_domains) names.push_back(d.fqdn);
  write_embedding_file(embeddings, model, dim, names, r.reference_vectors);
}

std::vector<ReferenceEntry> load_reference_entries(const std::filesystem::path& clusters,
                                                   const std::filesystem::path& embeddings,
                                                   const PublicSuffixSnapshot& psl) {
  const auto cl = read_clusters(clusters, psl);
  const auto table = PrecomputedEmbeddings::load(embeddings);
  std::vector<ReferenceEntry> out;
  for (const auto& c : cl) {
    for (const auto& m : c.members) {
      const EmbeddingVector* v = table.find(m.fqdn);
      if (!v) throw Error(Errc::MissingEmbedding, "no reference vector for " + m.fqdn);
      out.push_back({m, c.cluster_id, *v});
    }
  }
  return out;
}

}  // namespace gsd
