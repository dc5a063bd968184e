#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gsd/domain.hpp"

namespace gsd {

using Timestamp = std::chrono::sys_seconds;

/// Accepts "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)"; throws MalformedRecord.
Timestamp parse_rfc3339(std::string_view text);
/// "YYYY-MM-DDTHH:MM:SSZ".
std::string format_rfc3339(Timestamp ts);

enum class Source { Ct, Zone, Pdns, Ti };
std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

/// One observation of a domain from a source stream.
struct IngestRecord {
  DomainName domain;
  Source source = Source::Ti;
  std::optional<Timestamp> first_seen;
  std::optional<std::vector<std::string>> ips;
  std::optional<std::string> brand;
  bool wildcard = false;
};

std::string to_json_line(const IngestRecord& rec);
/// Parses one IngestRecord line; throws MalformedRecord.
IngestRecord ingest_record_from_json(std::string_view line, const PublicSuffixSnapshot& psl);
std::vector<IngestRecord> read_ingest_records(std::istream& in, const PublicSuffixSnapshot& psl);

enum class SeenMode { Exact, Approximate };

struct SeenSetOptions {
  SeenMode mode = SeenMode::Exact;
  std::uint64_t expected_items = 1'000'000;
  /// Exact mode only: a key older than this is treated as unseen again.
  std::optional<std::chrono::seconds> ttl;
};

/// Persistent set of seen FQDNs with atomic check-and-insert.
///
/// Exact mode keeps every key in memory and appends new keys to a text log
/// ("fqdn<TAB>epoch-seconds" per line) on flush. Approximate mode is a Bloom
/// filter sized for `expected_items` at a false-positive rate of at most
/// 1e-6 (20 hash probes, about 28.8 bits per item); it never reports a false
/// negative and is stored as a binary bit image.
class SeenSet {
 public:
  using Mode = SeenMode;
  using Options = SeenSetOptions;

  /// In-memory set, nothing persisted.
  SeenSet() : SeenSet(Options{}) {}
  explicit SeenSet(Options opts);
  /// Opens (or creates) the backing file at `path`, loading existing keys.
  static SeenSet open(const std::filesystem::path& path, Options opts = {});

  SeenSet(SeenSet&&) noexcept;
  SeenSet& operator=(SeenSet&&) noexcept;
  ~SeenSet();

  bool contains(std::string_view fqdn) const;
  /// True when `fqdn` was absent (or expired) and has now been recorded.
  bool insert_if_absent(std::string_view fqdn, std::optional<Timestamp> ts = std::nullopt);
  /// Writes pending state to the backing file, if any.
  void flush();

  std::size_t size() const;
  Mode mode() const noexcept { return opts_.mode; }
  double bloom_bits_per_item() const;

 private:
  bool bloom_test(std::string_view key) const;
  void bloom_set(std::string_view key);

  Options opts_;
  std::filesystem::path path_;
  mutable std::unique_ptr<std::mutex> mu_;
  std::unordered_map<std::string, std::int64_t> exact_;
  std::vector<std::pair<std::string, std::int64_t>> pending_;
  std::vector<std::uint64_t> bits_;
  std::uint64_t nbits_ = 0;
  std::uint64_t count_ = 0;
  bool dirty_ = false;
};

struct IngestStats {
  std::size_t lines = 0;
  std::size_t emitted = 0;
  std::size_t duplicates = 0;
  std::size_t malformed = 0;
};

using RecordSink = std::function<void(const IngestRecord&)>;

/// Certificate records, one JSON object per line: {"ts": ..., "names": [...]}.
/// Each name is emitted once for the lifetime of `seen`.
IngestStats ingest_ct(std::istream& in, SeenSet& seen, const PublicSuffixSnapshot& psl, const RecordSink& sink);

/// Passive-DNS observations {"ts","domain","ip"}; first observation wins.
IngestStats ingest_pdns(std::istream& in, SeenSet& seen, const PublicSuffixSnapshot& psl, const RecordSink& sink);

/// today \ yesterday over sorted unique lists, streamed in order. Throws
/// UnsortedInput when either list is not strictly ascending.
std::size_t diff_zone(std::istream& today, std::istream& yesterday, const std::function<void(const std::string&)>& sink);

/// Threat-intelligence feed lines: "<url-or-domain>[TAB brand[TAB rfc3339]]".
/// Duplicates collapse onto the earliest timestamp; first appearance fixes order.
std::vector<IngestRecord> load_ti(std::istream& in, const PublicSuffixSnapshot& psl, IngestStats* stats = nullptr);
std::vector<IngestRecord> load_ti_files(std::span<const std::filesystem::path> paths,
                                        const PublicSuffixSnapshot& psl, IngestStats* stats = nullptr);

/// Host part of a URL (scheme, userinfo, port, path stripped), or the input
/// itself when it has no URL structure.
std::string host_of(std::string_view url_or_domain);

}  // namespace gsd
