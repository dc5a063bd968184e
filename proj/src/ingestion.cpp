#include "gsd/ingestion.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "gsd/error.hpp"

namespace gsd {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Timestamps

namespace {

int read_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw Error(Errc::MalformedRecord, "truncated timestamp");
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') throw Error(Errc::MalformedRecord, "bad timestamp digit in " + std::string(s));
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect(std::string_view s, std::size_t pos, char c) {
  if (pos >= s.size() || s[pos] != c) throw Error(Errc::MalformedRecord, "bad timestamp " + std::string(s));
}

}  // namespace

Timestamp parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  const int y = read_int(s, 0, 4);
  expect(s, 4, '-');
  const int mo = read_int(s, 5, 2);
  expect(s, 7, '-');
  const int d = read_int(s, 8, 2);
  if (s.size() <= 10 || (s[10] != 'T' && s[10] != 't' && s[10] != ' ')) {
    throw Error(Errc::MalformedRecord, "bad timestamp " + std::string(s));
  }
  const int hh = read_int(s, 11, 2);
  expect(s, 13, ':');
  const int mm = read_int(s, 14, 2);
  expect(s, 16, ':');
  const int ss = read_int(s, 17, 2);
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  int offset_min = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const int sign = s[pos] == '+' ? 1 : -1;
    const int oh = read_int(s, pos + 1, 2);
    expect(s, pos + 3, ':');
    const int om = read_int(s, pos + 4, 2);
    offset_min = sign * (oh * 60 + om);
    pos += 6;
  } else {
    throw Error(Errc::MalformedRecord, "timestamp without zone: " + std::string(s));
  }
  if (pos != s.size()) throw Error(Errc::MalformedRecord, "trailing characters in timestamp " + std::string(s));
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) throw Error(Errc::MalformedRecord, "invalid date " + std::string(s));
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_min};
}

std::string format_rfc3339(Timestamp ts) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(ts);
  const year_month_day ymd{days};
  const hh_mm_ss hms{ts - days};
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Ct: return "ct";
    case Source::Zone: return "zone";
    case Source::Pdns: return "pdns";
    case Source::Ti: return "ti";
  }
  return "ti";
}

Source source_from_string(std::string_view s) {
  if (s == "ct") return Source::Ct;
  if (s == "zone") return Source::Zone;
  if (s == "pdns") return Source::Pdns;
  if (s == "ti") return Source::Ti;
  throw Error(Errc::MalformedRecord, "unknown source '" + std::string(s) + "'");
}

std::string to_json_line(const IngestRecord& rec) {
  ordered_json j;
  j["domain"] = rec.domain.fqdn;
  j["source"] = to_string(rec.source);
  j["first_seen"] = rec.first_seen ? json(format_rfc3339(*rec.first_seen)) : json(nullptr);
  j["ips"] = rec.ips ? json(*rec.ips) : json(nullptr);
  j["brand"] = rec.brand ? json(*rec.brand) : json(nullptr);
  j["wildcard"] = rec.wildcard;
  return j.dump();
}

IngestRecord ingest_record_from_json(std::string_view line, const PublicSuffixSnapshot& psl) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRecord, e.what());
  }
  if (!j.is_object() || !j.contains("domain") || !j["domain"].is_string()) {
    throw Error(Errc::MalformedRecord, "record without domain");
  }
  IngestRecord rec;
  try {
    auto parsed = parse_domain(j["domain"].get<std::string>(), psl);
    rec.domain = std::move(parsed.name);
    rec.wildcard = parsed.wildcard || j.value("wildcard", false);
    rec.source = source_from_string(j.value("source", std::string("ti")));
    if (j.contains("first_seen") && j["first_seen"].is_string()) {
      rec.first_seen = parse_rfc3339(j["first_seen"].get<std::string>());
    }
    if (j.contains("ips") && j["ips"].is_array()) rec.ips = j["ips"].get<std::vector<std::string>>();
    if (j.contains("brand") && j["brand"].is_string()) rec.brand = j["brand"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRecord, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedRecord) throw;
    throw Error(Errc::MalformedRecord, e.what());
  }
  return rec;
}

std::vector<IngestRecord> read_ingest_records(std::istream& in, const PublicSuffixSnapshot& psl) {
  std::vector<IngestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ingest_record_from_json(line, psl));
    } catch (const Error& e) {
      throw Error(Errc::MalformedRecord, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SeenSet

namespace {

constexpr std::string_view kBloomMagic = "GSDBLOOM1\n";
constexpr int kBloomProbes = 20;
// -ln(1e-6) / ln(2)^2
constexpr double kBloomBitsPerItem = 28.7552;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

SeenSet::SeenSet(Options opts) : opts_(opts), mu_(std::make_unique<std::mutex>()) {
  if (opts_.mode == Mode::Approximate) {
    const auto want = static_cast<std::uint64_t>(
        std::ceil(static_cast<double>(std::max<std::uint64_t>(opts_.expected_items, 1)) * kBloomBitsPerItem));
    nbits_ = (want + 63) / 64 * 64;
    bits_.assign(nbits_ / 64, 0);
  }
}

SeenSet::SeenSet(SeenSet&&) noexcept = default;
SeenSet& SeenSet::operator=(SeenSet&&) noexcept = default;

SeenSet::~SeenSet() {
  if (!mu_) return;
  try {
    flush();
  } catch (const std::exception& e) {
    warn(std::string("seen-set flush failed: ") + e.what());
  }
}

SeenSet SeenSet::open(const std::filesystem::path& path, Options opts) {
  SeenSet set(opts);
  set.path_ = path;
  std::ifstream in(path, std::ios::binary);
  if (!in) return set;  // created on first flush

  if (opts.mode == Mode::Approximate) {
    std::string magic(kBloomMagic.size(), '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (in.gcount() == 0) return set;
    if (magic != kBloomMagic) throw Error(Errc::Io, "not a bloom seen-set file: " + path.string());
    std::uint64_t nbits = 0, count = 0;
    in.read(reinterpret_cast<char*>(&nbits), sizeof nbits);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || nbits % 64 != 0 || nbits == 0) throw Error(Errc::Io, "corrupt bloom header: " + path.string());
    set.nbits_ = nbits;
    set.count_ = count;
    set.bits_.assign(nbits / 64, 0);
    in.read(reinterpret_cast<char*>(set.bits_.data()), static_cast<std::streamsize>(nbits / 8));
    if (!in) throw Error(Errc::Io, "truncated bloom file: " + path.string());
    return set;
  }

  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (line.empty()) continue;
    std::string key = line.substr(0, tab);
    std::int64_t ts = 0;
    if (tab != std::string::npos) ts = std::stoll(line.substr(tab + 1));
    set.exact_[std::move(key)] = ts;  // later lines override earlier ones
  }
  return set;
}

bool SeenSet::bloom_test(std::string_view key) const {
  const std::uint64_t h1 = fnv(key);
  const std::uint64_t h2 = mix64(h1) | 1;
  for (int i = 0; i < kBloomProbes; ++i) {
    const std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % nbits_;
    if (!(bits_[bit / 64] & (1ULL << (bit % 64)))) return false;
  }
  return true;
}

void SeenSet::bloom_set(std::string_view key) {
  const std::uint64_t h1 = fnv(key);
  const std::uint64_t h2 = mix64(h1) | 1;
  for (int i = 0; i < kBloomProbes; ++i) {
    const std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % nbits_;
    bits_[bit / 64] |= 1ULL << (bit % 64);
  }
}

bool SeenSet::contains(std::string_view fqdn) const {
  std::lock_guard lock(*mu_);
  if (opts_.mode == Mode::Approximate) return bloom_test(fqdn);
  return exact_.contains(std::string(fqdn));
}

bool SeenSet::insert_if_absent(std::string_view fqdn, std::optional<Timestamp> ts) {
  std::lock_guard lock(*mu_);
  const std::int64_t epoch = ts ? ts->time_since_epoch().count() : 0;
  if (opts_.mode == Mode::Approximate) {
    if (bloom_test(fqdn)) return false;
    bloom_set(fqdn);
    ++count_;
    dirty_ = true;
    return true;
  }
  auto it = exact_.find(std::string(fqdn));
  if (it != exact_.end()) {
    if (!opts_.ttl || !ts || epoch - it->second <= opts_.ttl->count()) return false;
    it->second = epoch;
  } else {
    exact_.emplace(std::string(fqdn), epoch);
  }
  pending_.emplace_back(std::string(fqdn), epoch);
  dirty_ = true;
  return true;
}

void SeenSet::flush() {
  std::lock_guard lock(*mu_);
  if (path_.empty() || !dirty_) return;
  if (opts_.mode == Mode::Approximate) {
    const auto tmp = path_.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(kBloomMagic.data(), static_cast<std::streamsize>(kBloomMagic.size()));
      out.write(reinterpret_cast<const char*>(&nbits_), sizeof nbits_);
      out.write(reinterpret_cast<const char*>(&count_), sizeof count_);
      out.write(reinterpret_cast<const char*>(bits_.data()), static_cast<std::streamsize>(nbits_ / 8));
      if (!out) throw Error(Errc::Io, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path_);
  } else {
    std::ofstream out(path_, std::ios::app);
    for (const auto& [key, ts] : pending_) out << key << '\t' << ts << '\n';
    out.flush();
    if (!out) throw Error(Errc::Io, "cannot append to " + path_.string());
    pending_.clear();
  }
  dirty_ = false;
}

std::size_t SeenSet::size() const {
  std::lock_guard lock(*mu_);
  return opts_.mode == Mode::Approximate ? static_cast<std::size_t>(count_) : exact_.size();
}

double SeenSet::bloom_bits_per_item() const {
  return opts_.mode == Mode::Approximate && opts_.expected_items
             ? static_cast<double>(nbits_) / static_cast<double>(opts_.expected_items)
             : 0.0;
}

// ---------------------------------------------------------------------------
// Stream transformers

namespace {

bool valid_ip(const std::string& ip) {
  unsigned char buf[sizeof(struct in6_addr)];
  return inet_pton(AF_INET, ip.c_str(), buf) == 1 || inet_pton(AF_INET6, ip.c_str(), buf) == 1;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

bool looks_like_ipv4(std::string_view host) {
  return !host.empty() && std::all_of(host.begin(), host.end(), [](char c) { return c == '.' || (c >= '0' && c <= '9'); });
}

}  // namespace

IngestStats ingest_ct(std::istream& in, SeenSet& seen, const PublicSuffixSnapshot& psl, const RecordSink& sink) {
  IngestStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    ++stats.lines;
    Timestamp ts;
    std::vector<std::string> names;
    try {
      const json j = json::parse(line);
      ts = parse_rfc3339(j.at("ts").get<std::string>());
      names = j.at("names").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      ++stats.malformed;
      continue;
    } catch (const Error&) {
      ++stats.malformed;
      continue;
    }
    for (const auto& raw : names) {
      ParsedDomain parsed;
      try {
        parsed = parse_domain(raw, psl);
      } catch (const Error&) {
        ++stats.malformed;
        continue;
      }
      if (!seen.insert_if_absent(parsed.name.fqdn, ts)) {
        ++stats.duplicates;
        continue;
      }
      IngestRecord rec;
      rec.domain = std::move(parsed.name);
      rec.source = Source::Ct;
      rec.first_seen = ts;
      rec.wildcard = parsed.wildcard;
      sink(rec);
      ++stats.emitted;
    }
  }
  return stats;
}

IngestStats ingest_pdns(std::istream& in, SeenSet& seen, const PublicSuffixSnapshot& psl, const RecordSink& sink) {
  IngestStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    ++stats.lines;
    IngestRecord rec;
    rec.source = Source::Pdns;
    try {
      const json j = json::parse(line);
      rec.first_seen = parse_rfc3339(j.at("ts").get<std::string>());
      auto parsed = parse_domain(j.at("domain").get<std::string>(), psl);
      rec.domain = std::move(parsed.name);
      rec.wildcard = parsed.wildcard;
      const std::string ip = j.at("ip").get<std::string>();
      if (!valid_ip(ip)) throw Error(Errc::MalformedRecord, "bad ip " + ip);
      rec.ips = std::vector<std::string>{ip};
    } catch (const json::exception&) {
      ++stats.malformed;
      continue;
    } catch (const Error&) {
      ++stats.malformed;
      continue;
    }
    if (!seen.insert_if_absent(rec.domain.fqdn, rec.first_seen)) {
      ++stats.duplicates;
      continue;
    }
    sink(rec);
    ++stats.emitted;
  }
  return stats;
}

std::size_t diff_zone(std::istream& today, std::istream& yesterday,
                      const std::function<void(const std::string&)>& sink) {
  auto next = [](std::istream& in, std::string& prev, std::string& out, const char* which) {
    while (std::getline(in, out)) {
      while (!out.empty() && (out.back() == '\r' || out.back() == ' ')) out.pop_back();
      if (out.empty()) continue;
      if (!prev.empty() && !(prev < out)) {
        throw Error(Errc::UnsortedInput, std::string(which) + " list not strictly ascending at '" + out + "'");
      }
      prev = out;
      return true;
    }
    return false;
  };
  std::string prev_t, prev_y, t, y;
  bool have_t = next(today, prev_t, t, "today");
  bool have_y = next(yesterday, prev_y, y, "yesterday");
  std::size_t emitted = 0;
  while (have_t) {
    if (!have_y || t < y) {
      sink(t);
      ++emitted;
      have_t = next(today, prev_t, t, "today");
    } else if (y < t) {
      have_y = next(yesterday, prev_y, y, "yesterday");
    } else {
      have_t = next(today, prev_t, t, "today");
      have_y = next(yesterday, prev_y, y, "yesterday");
    }
  }
  // Drain so ordering violations later in yesterday's list are still reported.
  while (have_y) have_y = next(yesterday, prev_y, y, "yesterday");
  return emitted;
}

std::string host_of(std::string_view raw) {
  std::string s = refang(raw);
  std::string_view v = s;
  if (auto scheme = v.find("://"); scheme != std::string_view::npos) v.remove_prefix(scheme + 3);
  v = v.substr(0, v.find_first_of("/?#"));
  if (auto at = v.rfind('@'); at != std::string_view::npos) v.remove_prefix(at + 1);
  if (auto colon = v.rfind(':'); colon != std::string_view::npos) v = v.substr(0, colon);
  return std::string(v);
}

std::vector<IngestRecord> load_ti(std::istream& in, const PublicSuffixSnapshot& psl, IngestStats* stats) {
  IngestStats local;
  std::vector<IngestRecord> out;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line) || line.starts_with('#')) continue;
    ++local.lines;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);

    IngestRecord rec;
    rec.source = Source::Ti;
    try {
      const std::string host = host_of(cols.at(0));
      if (looks_like_ipv4(host)) throw Error(Errc::MalformedRecord, "IP literal host");
      auto parsed = parse_domain(host, psl);
      rec.domain = std::move(parsed.name);
      rec.wildcard = parsed.wildcard;
      if (cols.size() > 1 && !cols[1].empty()) rec.brand = cols[1];
      if (cols.size() > 2 && !cols[2].empty()) rec.first_seen = parse_rfc3339(cols[2]);
    } catch (const Error&) {
      ++local.malformed;
      continue;
    }
    auto [it, fresh] = index.emplace(rec.domain.fqdn, out.size());
    if (fresh) {
      out.push_back(std::move(rec));
      ++local.emitted;
      continue;
    }
    ++local.duplicates;
    IngestRecord& kept = out[it->second];
    if (rec.first_seen && (!kept.first_seen || *rec.first_seen < *kept.first_seen)) kept.first_seen = rec.first_seen;
    if (!kept.brand && rec.brand) kept.brand = rec.brand;
  }
  if (stats) *stats = local;
  return out;
}

std::vector<IngestRecord> load_ti_files(std::span<const std::filesystem::path> paths, const PublicSuffixSnapshot& psl,
                                        IngestStats* stats) {
  std::stringstream merged;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw Error(Errc::Io, "cannot read TI feed " + p.string());
    merged << in.rdbuf() << '\n';
  }
  return load_ti(merged, psl, stats);
}

}  // namespace gsd
