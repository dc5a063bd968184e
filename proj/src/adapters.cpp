#include "gsd/adapters.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gsd/error.hpp"

namespace gsd {

namespace {

std::string normalize_key(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '.')) s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

EmbeddingVector vector_from_json(const nlohmann::json& vec, std::size_t dim) {
  if (!vec.is_array()) throw Error(Errc::InvalidVector, "vector is not an array");
  if (vec.size() != dim) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(dim) + " values, got " + std::to_string(vec.size()));
  }
  std::vector<double> v;
  v.reserve(dim);
  for (const auto& x : vec) {
    if (!x.is_number()) throw Error(Errc::InvalidVector, "non-numeric vector element");
    v.push_back(x.get<double>());
  }
  return EmbeddingVector::from_raw(std::move(v));
}

}  // namespace

PrecomputedEmbeddings PrecomputedEmbeddings::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::AdapterUnavailable, "cannot read embedding file " + path.string());
  PrecomputedEmbeddings out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": not JSON");
    }
    try {
      if (!header) {
        out.dim_ = j.at("dim").get<std::size_t>();
        out.model_ = j.value("model", "");
        if (out.dim_ == 0) throw Error(Errc::MalformedRecord, "header dim must be positive");
        header = true;
        continue;
      }
      std::string key = normalize_key(j.at("domain").get<std::string>());
      EmbeddingVector v = vector_from_json(j.at("vec"), out.dim_);
      if (out.table_.emplace(key, std::move(v)).second) out.order_.push_back(std::move(key));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedRecord, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header) throw Error(Errc::MalformedRecord, path.string() + ": missing header");
  return out;
}

const EmbeddingVector* PrecomputedEmbeddings::find(std::string_view fqdn) const {
  auto it = table_.find(normalize_key(fqdn));
  return it == table_.end() ? nullptr : &it->second;
}

std::vector<EmbeddingVector> PrecomputedEmbeddings::embed(std::span<const std::string> fqdns) {
  std::vector<EmbeddingVector> out;
  out.reserve(fqdns.size());
  for (const auto& d : fqdns) {
    const EmbeddingVector* v = find(d);
    if (!v) throw Error(Errc::MissingEmbedding, "no embedding for " + d);
    out.push_back(*v);
  }
  return out;
}

void write_embedding_file(const std::filesystem::path& path, std::string_view model, std::size_t dim,
                          std::span<const std::string> domains, std::span<const EmbeddingVector> vectors) {
  if (domains.size() != vectors.size()) throw Error(Errc::InvalidArgument, "domains and vectors differ in length");
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    nlohmann::ordered_json header;
    header["dim"] = dim;
    header["model"] = std::string(model);
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < domains.size(); ++i) {
      if (vectors[i].dim() != dim) throw Error(Errc::DimensionMismatch, "vector for " + domains[i]);
      nlohmann::ordered_json rec;
      rec["domain"] = domains[i];
      rec["vec"] = std::vector<double>(vectors[i].values().begin(), vectors[i].values().end());
      out << rec.dump() << '\n';
    }
    if (!out) throw Error(Errc::Io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SidecarEmbedder::SidecarEmbedder(const std::string& command) : SidecarEmbedder(command, Options{}) {}

SidecarEmbedder::SidecarEmbedder(const std::string& command, Options opts) : command_(command), opts_(opts) {
  int sv[2];
  // A socket rather than pipes so writes to a dead child fail with EPIPE
  // (MSG_NOSIGNAL) instead of raising SIGPIPE in the host.
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(Errc::AdapterUnavailable, std::string("socketpair: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw Error(Errc::AdapterUnavailable, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  fd_ = sv[0];
  pid_ = pid;
  try {
    const auto reply = nlohmann::json::parse(roundtrip(R"({"op":"hello"})"));
    dim_ = reply.at("dim").get<std::size_t>();
    if (dim_ == 0) throw Error(Errc::AdapterUnavailable, "sidecar announced dim 0");
  } catch (const nlohmann::json::exception& e) {
    shutdown();
    throw Error(Errc::AdapterUnavailable, std::string("bad handshake: ") + e.what());
  } catch (...) {
    shutdown();
    throw;
  }
}

SidecarEmbedder::~SidecarEmbedder() { shutdown(); }

void SidecarEmbedder::shutdown() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      ::usleep(10'000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string SidecarEmbedder::roundtrip(const std::string& request) {
  if (fd_ < 0) throw Error(Errc::AdapterUnavailable, "sidecar is not running");
  const std::string msg = request + "\n";
  for (std::size_t sent = 0; sent < msg.size();) {
    const ssize_t n = ::send(fd_, msg.data() + sent, msg.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::AdapterUnavailable, std::string("sidecar write: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
  const auto deadline = std::chrono::steady_clock::now() + opts_.timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw Error(Errc::AdapterUnavailable, "sidecar timed out");
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw Error(Errc::AdapterUnavailable, "sidecar timed out");
    char chunk[65536];
    const ssize_t n = ::read(fd_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(Errc::AdapterUnavailable, "sidecar closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::vector<EmbeddingVector> SidecarEmbedder::embed(std::span<const std::string> fqdns) {
  std::lock_guard lock(mu_);
  std::vector<EmbeddingVector> out;
  out.reserve(fqdns.size());
  for (std::size_t start = 0; start < fqdns.size(); start += opts_.batch) {
    const auto batch = fqdns.subspan(start, std::min(opts_.batch, fqdns.size() - start));
    const long id = next_id_++;
    nlohmann::ordered_json req;
    req["op"] = "embed";
    req["id"] = id;
    req["texts"] = std::vector<std::string>(batch.begin(), batch.end());
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(roundtrip(req.dump()));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::AdapterUnavailable, std::string("bad sidecar reply: ") + e.what());
    }
    if (reply.value("id", -1L) != id) throw Error(Errc::AdapterUnavailable, "sidecar reply id mismatch");
    if (reply.contains("error")) throw Error(Errc::AdapterUnavailable, "sidecar: " + reply["error"].dump());
    const auto it = reply.find("vecs");
    if (it == reply.end() || !it->is_array() || it->size() != batch.size()) {
      throw Error(Errc::AdapterUnavailable, "sidecar returned the wrong number of vectors");
    }
    for (const auto& v : *it) out.push_back(vector_from_json(v, dim_));
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(std::string_view spec, ReferenceEmbedderOptions ref,
                                        const PublicSuffixSnapshot& psl) {
  if (spec == "reference") return std::make_unique<ReferenceEmbedder>(ref, TokenVocabulary::bundled(), psl);
  if (spec.starts_with("file:")) {
    return std::make_unique<PrecomputedEmbeddings>(PrecomputedEmbeddings::load(std::string(spec.substr(5))));
  }
  if (spec.starts_with("sidecar:")) return std::make_unique<SidecarEmbedder>(std::string(spec.substr(8)));
  throw Error(Errc::InvalidArgument, "unknown embedder spec: " + std::string(spec));
}

}  // namespace gsd
