#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gsd/embedding.hpp"

namespace gsd {

/// Lookup table loaded from a precomputed embedding file: a header line
/// {"dim":N,"model":"..."} followed by {"domain":"...","vec":[...]} lines.
/// Immutable after load.
class PrecomputedEmbeddings : public Embedder {
 public:
  /// Throws AdapterUnavailable (unreadable file), MalformedRecord or
  /// DimensionMismatch. Vectors are re-normalized on load.
  static PrecomputedEmbeddings load(const std::filesystem::path& path);

  std::size_t dim() const override { return dim_; }
  std::string model() const override { return model_; }
  /// Throws MissingEmbedding naming the first absent domain.
  std::vector<EmbeddingVector> embed(std::span<const std::string> fqdns) override;

  const EmbeddingVector* find(std::string_view fqdn) const;
  std::size_t size() const noexcept { return order_.size(); }
  /// Domains in file order.
  const std::vector<std::string>& domains() const noexcept { return order_; }

 private:
  std::size_t dim_ = 0;
  std::string model_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, EmbeddingVector> table_;
};

/// Writes the precomputed embedding format. Output is byte-identical for
/// identical inputs (shortest round-trip float formatting).
void write_embedding_file(const std::filesystem::path& path, std::string_view model, std::size_t dim,
                          std::span<const std::string> domains, std::span<const EmbeddingVector> vectors);

/// Child process speaking the line protocol on its stdin/stdout:
///   {"op":"hello"} -> {"dim":N}
///   {"op":"embed","id":I,"texts":[...]} -> {"id":I,"vecs":[[...],...]} | {"id":I,"error":"..."}
/// Requests are serialized per instance.
class SidecarEmbedder : public Embedder {
 public:
  struct Options {
    std::size_t batch = 256;
    std::chrono::milliseconds timeout{60'000};
  };

  /// Starts `/bin/sh -c command` and performs the handshake. Throws
  /// AdapterUnavailable when the process cannot start or answer.
  explicit SidecarEmbedder(const std::string& command);
  SidecarEmbedder(const std::string& command, Options opts);
  ~SidecarEmbedder() override;
  SidecarEmbedder(const SidecarEmbedder&) = delete;
  SidecarEmbedder& operator=(const SidecarEmbedder&) = delete;

  std::size_t dim() const override { return dim_; }
  std::string model() const override { return "sidecar:" + command_; }
  /// Throws AdapterUnavailable (dead process, timeout, error reply) or
  /// DimensionMismatch (vector length differs from the handshake).
  std::vector<EmbeddingVector> embed(std::span<const std::string> fqdns) override;

 private:
  std::string roundtrip(const std::string& request);
  void shutdown();

  std::string command_;
  Options opts_;
  int fd_ = -1;
  int pid_ = -1;
  std::size_t dim_ = 0;
  long next_id_ = 1;
  std::string buffer_;
  std::mutex mu_;
};

/// "reference", "file:<path>" or "sidecar:<command>". Throws InvalidArgument
/// for other specs. `psl` must outlive a reference embedder.
std::unique_ptr<Embedder> make_embedder(std::string_view spec, ReferenceEmbedderOptions ref = {},
                                        const PublicSuffixSnapshot& psl = PublicSuffixSnapshot::bundled());

}  // namespace gsd
