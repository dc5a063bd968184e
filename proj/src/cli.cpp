#include "gsd/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsd/adapters.hpp"
#include "gsd/analytics.hpp"
#include "gsd/artifacts.hpp"
#include "gsd/error.hpp"
#include "gsd/prefilter.hpp"
#include "gsd/synth.hpp"

namespace gsd::cli {

namespace fs = std::filesystem;

PipelineConfig load_config(const fs::path& path, PipelineConfig cfg) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, "config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "eps") cfg.eps = v.get<double>();
      else if (key == "min_pts") cfg.min_pts = v.get<int>();
      else if (key == "threshold") cfg.threshold = v.get<double>();
      else if (key == "k") cfg.k = v.get<int>();
      else if (key == "embedder") cfg.embedder = v.get<std::string>();
      else if (key == "psl") cfg.psl = v.get<std::string>();
      else if (key == "lookback_days") cfg.lookback_days = v.get<int>();
      else if (key == "clusters") cfg.clusters = v.get<std::string>();
      else if (key == "rules") cfg.rules = v.get<std::string>();
      else if (key == "embeddings") cfg.embeddings = v.get<std::string>();
      else if (key == "out") cfg.out = v.get<std::string>();
      else if (key == "mode") cfg.mode = search_mode_from_string(v.get<std::string>());
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "dim") cfg.dim = v.get<std::size_t>();
      else throw Error(Errc::InvalidArgument, "unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, "config " + path.string() + ": " + e.what());
  }
  return cfg;
}

namespace {

/// Raised inside a command to leave with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

void validate(const PipelineConfig& c) {
  if (!(c.eps > 0.0 && c.eps < 1.0)) throw Exit{kExitConfig, "eps must be in (0, 1)"};
  if (c.min_pts < 2) throw Exit{kExitConfig, "min-pts must be at least 2"};
  const double t = c.effective_threshold();
  if (!(t > 0.0 && t < 1.0)) throw Exit{kExitConfig, "threshold must be in (0, 1)"};
  if (c.k < 1) throw Exit{kExitConfig, "k must be at least 1"};
  if (c.dim < 16) throw Exit{kExitConfig, "dim must be at least 16"};
  if (c.lookback_days < 0) throw Exit{kExitConfig, "lookback-days must be non-negative"};
}

/// Owns the output file when --out is set; otherwise forwards to `fallback`.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Exit{kExitConfig, "cannot write " + path};
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Exit{kExitConfig, "cannot read " + path};
  return in;
}

/// Reads all of `paths` (or standard input when empty or "-") into one string.
std::string slurp(const std::vector<std::string>& paths) {
  std::ostringstream ss;
  if (paths.empty()) {
    ss << std::cin.rdbuf();
    return ss.str();
  }
  for (const auto& p : paths) {
    if (p == "-") {
      ss << std::cin.rdbuf();
      continue;
    }
    auto in = open_input(p);
    ss << in.rdbuf();
    const std::string s = ss.str();
    if (!s.empty() && s.back() != '\n') ss << '\n';
  }
  return ss.str();
}

bool looks_like_json_lines(std::string_view text) {
  const auto pos = text.find_first_not_of(" \t\r\n");
  return pos != std::string_view::npos && text[pos] == '{';
}

/// IngestRecord lines when the input is JSON, a TI feed otherwise.
std::vector<IngestRecord> read_records(const std::vector<std::string>& paths, Source plain_source,
                                       const PublicSuffixSnapshot& psl) {
  const std::string text = slurp(paths);
  std::istringstream in(text);
  if (looks_like_json_lines(text)) return read_ingest_records(in, psl);
  auto records = load_ti(in, psl);
  for (auto& r : records) r.source = plain_source;
  return records;
}

std::vector<IngestRecord> apply_lookback(std::vector<IngestRecord> records, int days) {
  std::optional<Timestamp> newest;
  for (const auto& r : records) {
    if (r.first_seen && (!newest || *r.first_seen > *newest)) newest = r.first_seen;
  }
  if (!newest) return records;
  const Timestamp cutoff = *newest - std::chrono::days(days);
  std::erase_if(records, [&](const IngestRecord& r) { return r.first_seen && *r.first_seen < cutoff; });
  return records;
}

struct Context {
  PipelineConfig cfg;
  std::optional<PublicSuffixSnapshot> custom_psl;
  const PublicSuffixSnapshot& psl() const { return custom_psl ? *custom_psl : PublicSuffixSnapshot::bundled(); }
  std::unique_ptr<Embedder> embedder() const {
    try {
      return make_embedder(cfg.embedder, {cfg.dim, cfg.seed}, psl());
    } catch (const Error& e) {
      throw Exit{kExitConfig, e.what()};
    }
  }
};

int cmd_step1(const Context& ctx, const std::vector<std::string>& ti, std::ostream& err) {
  if (ti.empty()) throw Exit{kExitConfig, "step1 needs at least one --ti file"};
  auto records = apply_lookback(read_records(ti, Source::Ti, ctx.psl()), ctx.cfg.lookback_days);
  auto embedder = ctx.embedder();
  Step1Result r;
  try {
    r = run_step1(records, *embedder, ctx.cfg.eps, ctx.cfg.min_pts);
  } catch (const Error& e) {
    if (e.code() == Errc::EmptyInput) throw Exit{kExitEmptyReference, e.what()};
    throw;
  }
  char line[256];
  std::snprintf(line, sizeof line, "step1: input=%zu filtered=%zu unique=%zu clustered=%zu noise=%zu clusters=%zu\n",
                r.stats.input, r.stats.filtered, r.stats.unique, r.stats.clustered, r.stats.noise, r.clusters.size());
  err << line;
  if (r.clusters.empty()) throw Exit{kExitEmptyReference, "no clusters: the reference set is empty"};
  write_step1(r, ctx.cfg.clusters, ctx.cfg.rules, ctx.cfg.embeddings, embedder->model(), embedder->dim());
  return kExitOk;
}

int cmd_step2(const Context& ctx, const std::vector<std::string>& inputs, std::ostream& out, std::ostream& err) {
  for (const auto& p : {ctx.cfg.clusters, ctx.cfg.rules, ctx.cfg.embeddings}) {
    if (!fs::exists(p)) throw Exit{kExitMissingArtifacts, "missing Step-1 artifact: " + p};
  }
  std::vector<ReferenceEntry> refs;
  std::map<int, std::optional<MatchingRule>> rules;
  try {
    refs = load_reference_entries(ctx.cfg.clusters, ctx.cfg.embeddings, ctx.psl());
    rules = read_rules(ctx.cfg.rules);
  } catch (const Error& e) {
    throw Exit{kExitMissingArtifacts, e.what()};
  }
  if (refs.empty()) throw Exit{kExitEmptyReference, "the reference set is empty"};

  IndexParams params;
  params.threshold = ctx.cfg.effective_threshold();
  params.k = ctx.cfg.k;
  params.mode = ctx.cfg.mode;
  params.ann.seed = ctx.cfg.seed;
  auto embedder = ctx.embedder();
  if (embedder->dim() != refs.front().vector.dim()) {
    throw Exit{kExitConfig, "embedder dim " + std::to_string(embedder->dim()) + " does not match reference dim " +
                                std::to_string(refs.front().vector.dim())};
  }
  const auto index = ReferenceIndex::build(std::move(refs), std::move(rules), params);

  const auto records = read_records(inputs, Source::Ct, ctx.psl());
  Step2Stats stats;
  const auto results = run_step2(records, index, *embedder, &stats);
  Output o(ctx.cfg.out, out);
  for (const auto& res : results) o.get() << to_json_line(res) << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "step2: input=%zu filtered=%zu gsd=%zu rejected_by_rule=%zu not_similar=%zu\n",
                stats.input, stats.filtered, stats.gsd, stats.rejected, stats.not_similar);
  err << line;
  if (params.mode == SearchMode::AnnVerified && index.verification_mismatches() > 0) {
    err << "step2: verification mismatches=" << index.verification_mismatches() << '\n';
  }
  return kExitOk;
}

int cmd_filter(const Context& ctx, const std::vector<std::string>& inputs, std::ostream& out, std::ostream& err) {
  const std::string text = slurp(inputs);
  std::istringstream in(text);
  Output o(ctx.cfg.out, out);
  std::size_t kept = 0, dropped = 0, malformed = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const auto d = parse_fqdn(host_of(line), ctx.psl());
      const auto v = filter_domain(d);
      if (v.keep) {
        o.get() << d.fqdn << "\tkeep\n";
        ++kept;
      } else {
        o.get() << d.fqdn << "\tdrop\t" << to_string(v.reason) << '\n';
        ++dropped;
      }
    } catch (const Error& e) {
      warn(e.what());
      ++malformed;
    }
  }
  err << "filter: kept=" << kept << " dropped=" << dropped << " malformed=" << malformed << '\n';
  return kExitOk;
}

struct IngestArgs {
  std::string source = "ct";
  std::string seen;
  std::string seen_mode = "exact";
  std::uint64_t expected_items = 1'000'000;
  std::string today, yesterday, date;
};

int cmd_ingest(const Context& ctx, const IngestArgs& a, const std::vector<std::string>& inputs, std::ostream& out,
               std::ostream& err) {
  Output o(ctx.cfg.out, out);
  const Source source = [&] {
    try {
      return source_from_string(a.source);
    } catch (const Error& e) {
      throw Exit{kExitConfig, e.what()};
    }
  }();

  if (source == Source::Zone) {
    if (a.today.empty() || a.yesterday.empty()) throw Exit{kExitConfig, "zone ingestion needs --today and --yesterday"};
    std::optional<Timestamp> ts;
    if (!a.date.empty()) ts = parse_rfc3339(a.date);
    auto today = open_input(a.today);
    auto yesterday = open_input(a.yesterday);
    std::size_t emitted = 0, malformed = 0;
    diff_zone(today, yesterday, [&](const std::string& name) {
      try {
        IngestRecord rec;
        rec.domain = parse_fqdn(name, ctx.psl());
        rec.source = Source::Zone;
        rec.first_seen = ts;
        o.get() << to_json_line(rec) << '\n';
        ++emitted;
      } catch (const Error& e) {
        warn(e.what());
        ++malformed;
      }
    });
    err << "ingest: source=zone emitted=" << emitted << " malformed=" << malformed << '\n';
    return kExitOk;
  }

  if (source == Source::Ti) {
    IngestStats stats;
    const std::string text = slurp(inputs);
    std::istringstream in(text);
    for (const auto& rec : load_ti(in, ctx.psl(), &stats)) o.get() << to_json_line(rec) << '\n';
    err << "ingest: source=ti lines=" << stats.lines << " emitted=" << stats.emitted
        << " duplicates=" << stats.duplicates << " malformed=" << stats.malformed << '\n';
    return kExitOk;
  }

  SeenSet::Options opts;
  if (a.seen_mode == "exact") opts.mode = SeenSet::Mode::Exact;
  else if (a.seen_mode == "approximate" || a.seen_mode == "bloom") opts.mode = SeenSet::Mode::Approximate;
  else throw Exit{kExitConfig, "unknown --seen-mode " + a.seen_mode};
  opts.expected_items = a.expected_items;
  SeenSet seen = a.seen.empty() ? SeenSet(opts) : SeenSet::open(a.seen, opts);

  const std::string text = slurp(inputs);
  std::istringstream in(text);
  const RecordSink sink = [&](const IngestRecord& rec) { o.get() << to_json_line(rec) << '\n'; };
  const IngestStats stats =
      source == Source::Ct ? ingest_ct(in, seen, ctx.psl(), sink) : ingest_pdns(in, seen, ctx.psl(), sink);
  seen.flush();
  err << "ingest: source=" << to_string(source) << " lines=" << stats.lines << " emitted=" << stats.emitted
      << " duplicates=" << stats.duplicates << " malformed=" << stats.malformed << '\n';
  return kExitOk;
}

int cmd_analyze(const Context& ctx, const std::vector<std::string>& records_paths, std::ostream& out,
                std::ostream& err) {
  if (!fs::exists(ctx.cfg.clusters)) throw Exit{kExitMissingArtifacts, "missing clusters file: " + ctx.cfg.clusters};
  const auto clusters = read_clusters(ctx.cfg.clusters, ctx.psl());
  const auto records = read_records(records_paths, Source::Ti, ctx.psl());
  const auto meta = ClusterMetadata::from_records(records);
  const auto reports = analyze_clusters(clusters, meta);
  Output o(ctx.cfg.out, out);
  for (const auto& r : reports) o.get() << to_json_line(r) << '\n';
  err << "analyze: clusters=" << clusters.size() << " reported=" << reports.size() << '\n';
  return kExitOk;
}

std::vector<double> parse_grid(const std::string& grid) {
  std::vector<double> out;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Exit{kExitConfig, "bad --grid value: " + item};
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_sweep(const Context& ctx, const std::vector<std::string>& inputs, const std::string& grid, std::ostream& out,
              std::ostream& err) {
  const std::string text = slurp(inputs);
  std::istringstream in(text);
  std::vector<LabeledDomain> labeled;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.starts_with('#')) continue;
    const auto tab = line.find('\t');
    const std::string label = tab == std::string::npos ? "" : line.substr(tab + 1);
    if (label != "0" && label != "1") throw Exit{kExitConfig, "line " + std::to_string(lineno) + ": expected <domain>\\t<0|1>"};
    try {
      const auto d = parse_fqdn(line.substr(0, tab), ctx.psl());
      if (!filter_domain(d).keep) continue;
      labeled.push_back({d.fqdn, label == "1"});
    } catch (const Error& e) {
      warn(e.what());
    }
  }
  auto embedder = ctx.embedder();
  const auto rows = eval_sweep(labeled, *embedder, parse_grid(grid), ctx.cfg.min_pts);
  Output o(ctx.cfg.out, out);
  o.get() << sweep_tsv(rows);
  err << "sweep: domains=" << labeled.size() << " rows=" << rows.size() << '\n';
  return kExitOk;
}

struct SynthArgs {
  std::string templates;
  std::string source = "ti";
  std::size_t benign = 0;
  std::string start = "2026-01-01T00:00:00Z";
};

int cmd_synth(const Context& ctx, const SynthArgs& a, std::ostream& out, std::ostream& err) {
  const Source source = a.source == "ct" ? Source::Ct : a.source == "ti" ? Source::Ti : throw Exit{kExitConfig, "--source must be ti or ct"};
  const Timestamp start = parse_rfc3339(a.start);
  Output o(ctx.cfg.out, out);
  std::size_t n = 0, clusters = 0;
  auto emit = [&](const DomainName& d, std::optional<std::string> brand) {
    IngestRecord rec;
    rec.domain = d;
    rec.source = source;
    rec.first_seen = start + std::chrono::minutes(static_cast<long>(n++));
    if (brand && source == Source::Ti) rec.brand = std::move(brand);
    o.get() << to_json_line(rec) << '\n';
  };
  if (!a.templates.empty()) {
    auto in = open_input(a.templates);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto tpl = synth_template_from_json(line);
      for (const auto& d : synthesize_cluster(tpl)) emit(d, tpl.brand);
      ++clusters;
    }
  }
  if (a.benign > 0) {
    for (const auto& d : synthesize_benign(a.benign, ctx.cfg.seed)) emit(d, std::nullopt);
  }
  err << "synth: clusters=" << clusters << " records=" << n << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generated squatting domain detection"};
  app.require_subcommand(1);
  app.fallthrough();

  PipelineConfig flags;
  std::string config_path, mode;
  std::vector<std::string> ti, fresh, inputs, records;
  IngestArgs ingest;
  SynthArgs synth;
  std::string grid = "0.01,0.02,0.03,0.04,0.05,0.06,0.07";

  auto* o_eps = app.add_option("--eps", flags.eps, "DBSCAN radius in cosine distance");
  auto* o_min = app.add_option("--min-pts", flags.min_pts, "DBSCAN core-point threshold");
  double threshold = 0.0;
  auto* o_thr = app.add_option("--threshold", threshold, "similarity threshold (default 1 - eps)");
  auto* o_k = app.add_option("--k", flags.k, "minimum similar references for a detection");
  auto* o_emb = app.add_option("--embedder", flags.embedder, "reference | file:<path> | sidecar:<command>");
  auto* o_psl = app.add_option("--psl", flags.psl, "public suffix list file");
  auto* o_look = app.add_option("--lookback-days", flags.lookback_days, "TI window for step1");
  auto* o_cl = app.add_option("--clusters", flags.clusters, "clusters file");
  auto* o_ru = app.add_option("--rules", flags.rules, "rules file");
  auto* o_em = app.add_option("--embeddings", flags.embeddings, "reference embeddings file");
  auto* o_out = app.add_option("--out", flags.out, "output file (default stdout)");
  auto* o_mode = app.add_option("--mode", mode, "exact | ann-verified | ann");
  auto* o_seed = app.add_option("--seed", flags.seed, "seed for the reference embedder, ANN index and synth");
  auto* o_dim = app.add_option("--dim", flags.dim, "reference embedder dimension");
  app.add_option("--config", config_path, "config file (overrides PR_CONFIG)");

  auto* step1 = app.add_subcommand("step1", "cluster TI domains and write reference artifacts");
  step1->add_option("--ti,ti", ti, "TI files");
  auto* step2 = app.add_subcommand("step2", "score new domains against the references");
  step2->add_option("--new,new", fresh, "new-domain files (default stdin)");
  auto* filter = app.add_subcommand("filter", "prefilter a domain list");
  filter->add_option("inputs", inputs, "domain lists (default stdin)");
  auto* ing = app.add_subcommand("ingest", "normalize a source stream into IngestRecord lines");
  ing->add_option("--source", ingest.source, "ct | pdns | zone | ti");
  ing->add_option("--seen", ingest.seen, "persistent seen-set file");
  ing->add_option("--seen-mode", ingest.seen_mode, "exact | approximate");
  ing->add_option("--expected-items", ingest.expected_items, "approximate seen-set capacity");
  ing->add_option("--today", ingest.today, "today's sorted zone list");
  ing->add_option("--yesterday", ingest.yesterday, "yesterday's sorted zone list");
  ing->add_option("--date", ingest.date, "first_seen stamp for zone records");
  ing->add_option("inputs", inputs, "input files (default stdin)");
  auto* analyze = app.add_subcommand("analyze", "per-cluster reports");
  analyze->add_option("--records,records", records, "IngestRecord or TI files with first_seen/ips/brand");
  auto* sweep = app.add_subcommand("sweep", "precision/recall over an eps grid");
  sweep->add_option("inputs", inputs, "labeled file: <domain>\\t<0|1>");
  sweep->add_option("--grid", grid, "comma-separated eps values");
  auto* syn = app.add_subcommand("synth", "generate synthetic clusters and benign names");
  syn->add_option("--templates", synth.templates, "template file");
  syn->add_option("--source", synth.source, "ti | ct");
  syn->add_option("--benign", synth.benign, "number of benign names");
  syn->add_option("--start", synth.start, "first_seen of the first record");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    Context ctx;
    if (config_path.empty()) {
      if (const char* env = std::getenv("PR_CONFIG"); env && *env) config_path = env;
    }
    if (!config_path.empty()) ctx.cfg = load_config(config_path);
    // Flags override the config file.
    if (o_eps->count()) ctx.cfg.eps = flags.eps;
    if (o_min->count()) ctx.cfg.min_pts = flags.min_pts;
    if (o_thr->count()) ctx.cfg.threshold = threshold;
    if (o_k->count()) ctx.cfg.k = flags.k;
    if (o_emb->count()) ctx.cfg.embedder = flags.embedder;
    if (o_psl->count()) ctx.cfg.psl = flags.psl;
    if (o_look->count()) ctx.cfg.lookback_days = flags.lookback_days;
    if (o_cl->count()) ctx.cfg.clusters = flags.clusters;
    if (o_ru->count()) ctx.cfg.rules = flags.rules;
    if (o_em->count()) ctx.cfg.embeddings = flags.embeddings;
    if (o_out->count()) ctx.cfg.out = flags.out;
    if (o_mode->count()) ctx.cfg.mode = search_mode_from_string(mode);
    if (o_seed->count()) ctx.cfg.seed = flags.seed;
    if (o_dim->count()) ctx.cfg.dim = flags.dim;
    validate(ctx.cfg);
    if (!ctx.cfg.psl.empty()) {
      try {
        ctx.custom_psl = PublicSuffixSnapshot::load(ctx.cfg.psl);
      } catch (const Error& e) {
        throw Exit{kExitConfig, e.what()};
      }
    }

    if (step1->parsed()) return cmd_step1(ctx, ti, err);
    if (step2->parsed()) return cmd_step2(ctx, fresh, out, err);
    if (filter->parsed()) return cmd_filter(ctx, inputs, out, err);
    if (ing->parsed()) return cmd_ingest(ctx, ingest, inputs, out, err);
    if (analyze->parsed()) return cmd_analyze(ctx, records, out, err);
    if (sweep->parsed()) return cmd_sweep(ctx, inputs, grid, out, err);
    if (syn->parsed()) return cmd_synth(ctx, synth, out, err);
    return kExitConfig;
  } catch (const Exit& e) {
    err << "error: " << e.message << '\n';
    return e.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.code()) {
      case Errc::InvalidArgument:
      case Errc::Io:
      case Errc::AdapterUnavailable:
      case Errc::DimensionMismatch:
        return kExitConfig;
      case Errc::EmptyReferenceSet:
        return kExitEmptyReference;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace gsd::cli
