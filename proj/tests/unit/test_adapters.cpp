#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "gsd/adapters.hpp"
#include "gsd/artifacts.hpp"
#include "gsd/error.hpp"
#include "gsd/synth.hpp"

using namespace gsd;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gsd_adapters_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
}

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

std::string stub(const std::string& flags = "") { return std::string(GSD_STUB_SIDECAR) + " " + flags; }

}  // namespace

TEST_CASE("precomputed file: lookup, normalization, missing key") {
  const auto p = temp_path("emb.jsonl");
  write_text(p, R"({"dim":3,"model":"unit"}
{"domain":"a-site.test","vec":[3,4,0]}
{"domain":"B-Site.Test.","vec":[0,0,2]}
)");
  auto emb = PrecomputedEmbeddings::load(p);
  CHECK(emb.dim() == 3);
  CHECK(emb.model() == "unit");
  CHECK(emb.size() == 2);
  CHECK(emb.domains() == std::vector<std::string>{"a-site.test", "b-site.test"});
  const std::vector<std::string> q = {"a-site.test", "b-site.test"};
  const auto v = emb.embed(q);
  CHECK(v[0][0] == doctest::Approx(0.6));
  CHECK(v[0][1] == doctest::Approx(0.8));
  CHECK(v[1][2] == doctest::Approx(1.0));
  REQUIRE(emb.find("A-SITE.test"));
  CHECK_FALSE(emb.find("c-site.test"));
  const std::vector<std::string> missing = {"a-site.test", "c-site.test"};
  try {
    emb.embed(missing);
    FAIL("expected MissingEmbedding");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingEmbedding);
    CHECK(std::string(e.what()).find("c-site.test") != std::string::npos);
  }
}

TEST_CASE("precomputed file: errors") {
  CHECK(error_of([] { PrecomputedEmbeddings::load(temp_path("does-not-exist.jsonl")); }) == Errc::AdapterUnavailable);
  const auto p = temp_path("bad.jsonl");
  write_text(p, "{\"dim\":3,\"model\":\"unit\"}\n{\"domain\":\"a-site.test\",\"vec\":[1,2]}\n");
  CHECK(error_of([&] { PrecomputedEmbeddings::load(p); }) == Errc::DimensionMismatch);
  write_text(p, "{\"dim\":3,\"model\":\"unit\"}\n{\"domain\":\"a-site.test\"\n");
  CHECK(error_of([&] { PrecomputedEmbeddings::load(p); }) == Errc::MalformedRecord);
  write_text(p, "{\"model\":\"unit\"}\n");
  CHECK(error_of([&] { PrecomputedEmbeddings::load(p); }) == Errc::MalformedRecord);
}

TEST_CASE("precomputed file: header-only file loads empty") {
  const auto p = temp_path("empty.jsonl");
  write_text(p, "{\"dim\":8,\"model\":\"unit\"}\n");
  const auto emb = PrecomputedEmbeddings::load(p);
  CHECK(emb.size() == 0);
  CHECK(emb.dim() == 8);
}

TEST_CASE("write then load round-trips and is byte-stable") {
  ReferenceEmbedder ref;
  std::vector<std::string> names;
  for (const auto& d : synthesize_benign(50, 3)) names.push_back(d.fqdn);
  const auto vecs = ref.embed(names);
  const auto p1 = temp_path("rt1.jsonl"), p2 = temp_path("rt2.jsonl");
  write_embedding_file(p1, ref.model(), ref.dim(), names, vecs);
  write_embedding_file(p2, ref.model(), ref.dim(), names, vecs);
  std::ifstream a(p1), b(p2);
  const std::string ta((std::istreambuf_iterator<char>(a)), {}), tb((std::istreambuf_iterator<char>(b)), {});
  CHECK(ta == tb);
  CHECK(ta.starts_with(R"({"dim":256,"model":"reference-v1:dim=256,seed=0"})"));

  auto loaded = PrecomputedEmbeddings::load(p1);
  CHECK(loaded.model() == ref.model());
  const auto back = loaded.embed(names);
  for (std::size_t i = 0; i < names.size(); ++i) {
    // Re-normalization on load may move the last bit.
    for (std::size_t k = 0; k < back[i].dim(); ++k) CHECK(back[i][k] == doctest::Approx(vecs[i][k]).epsilon(1e-15));
  }
}

TEST_CASE("step-1 artifacts join back into reference entries") {
  ReferenceEmbedder ref;
  std::vector<IngestRecord> ti;
  for (const char* n : {"amazon-co-jp.qazwsx.icu", "amazon-co-jp.edcrfv.icu", "amazon-co-jp.tgbyhn.icu"}) {
    ti.push_back({parse_fqdn(n), Source::Ti, std::nullopt, std::nullopt, std::nullopt, false});
  }
  const auto r = run_step1(ti, ref, 0.25, 3);
  REQUIRE(r.clusters.size() == 1);
  const auto c = temp_path("clusters.jsonl"), ru = temp_path("rules.json"), e = temp_path("refs.jsonl");
  write_step1(r, c, ru, e, ref.model(), ref.dim());
  const auto clusters = read_clusters(c);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].members.size() == 3);
  const auto rules = read_rules(ru);
  REQUIRE(rules.at(0));
  CHECK(to_json(*rules.at(0)) == R"({"tld":".icu","num":23})");
  const auto entries = load_reference_entries(c, e);
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].domain.fqdn == r.reference_domains[0].fqdn);
  CHECK(cosine(entries[0].vector, r.reference_vectors[0]) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sidecar: 1000 domains in batches") {
  SidecarEmbedder side(stub("--dim 16"), {.batch = 64, .timeout = std::chrono::milliseconds(10'000)});
  CHECK(side.dim() == 16);
  CHECK(side.model().starts_with("sidecar:"));
  std::vector<std::string> names;
  for (int i = 0; i < 1000; ++i) names.push_back("name" + std::to_string(i) + ".test");
  const auto vecs = side.embed(names);
  REQUIRE(vecs.size() == 1000);
  for (const auto& v : vecs) CHECK(v.dim() == 16);
  // Same text, same vector; different text, (almost surely) different vector.
  const std::vector<std::string> again = {"name0.test", "name1.test"};
  const auto v2 = side.embed(again);
  CHECK(v2[0] == vecs[0]);
  CHECK_FALSE(v2[0] == v2[1]);
}

TEST_CASE("sidecar: failure modes") {
  CHECK(error_of([] { SidecarEmbedder side("/nonexistent/sidecar-binary"); }) == Errc::AdapterUnavailable);
  CHECK(error_of([] { SidecarEmbedder side(stub("--no-hello"), {.batch = 8, .timeout = std::chrono::milliseconds(300)}); }) ==
        Errc::AdapterUnavailable);

  SidecarEmbedder erroring(stub("--error-on poison.test"));
  const std::vector<std::string> poison = {"fine.test", "poison.test"};
  CHECK(error_of([&] { erroring.embed(poison); }) == Errc::AdapterUnavailable);

  SidecarEmbedder bad_dim(stub("--bad-dim"));
  const std::vector<std::string> one = {"fine.test"};
  CHECK(error_of([&] { bad_dim.embed(one); }) == Errc::DimensionMismatch);

  SidecarEmbedder dying(stub("--exit-after 1"), {.batch = 2, .timeout = std::chrono::milliseconds(5'000)});
  const std::vector<std::string> four = {"a1.test", "a2.test", "a3.test", "a4.test"};
  CHECK(error_of([&] { dying.embed(four); }) == Errc::AdapterUnavailable);
}

TEST_CASE("make_embedder specs") {
  CHECK(make_embedder("reference")->model() == "reference-v1:dim=256,seed=0");
  CHECK(make_embedder("reference", {64, 3})->dim() == 64);
  CHECK(make_embedder("sidecar:" + stub("--dim 12"))->dim() == 12);
  const auto p = temp_path("spec.jsonl");
  write_text(p, "{\"dim\":2,\"model\":\"unit\"}\n{\"domain\":\"a-site.test\",\"vec\":[1,0]}\n");
  CHECK(make_embedder("file:" + p.string())->dim() == 2);
  CHECK(error_of([] { make_embedder("bert"); }) == Errc::InvalidArgument);
}
