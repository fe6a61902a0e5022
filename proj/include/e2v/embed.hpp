#pragma once

#include "e2v/annotate.hpp"
#include "e2v/corpus.hpp"
#include "e2v/http.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace e2v {

enum class VariantKind { Global, Local, Aggregated };
std::string_view to_string(VariantKind kind);
VariantKind parse_variant_kind(std::string_view text);

struct VariantDescriptor {
  VariantKind kind = VariantKind::Global;
  std::optional<AttributeTag> attribute;  // local only
  std::optional<double> summary_ratio;    // local; provenance for aggregated
  std::optional<Placement> placement;     // local; provenance for aggregated

  static VariantDescriptor global() { return {}; }
  static VariantDescriptor local(AttributeTag tag, double ratio, Placement placement) {
    return {VariantKind::Local, tag, ratio, placement};
  }
  static VariantDescriptor aggregated(std::optional<double> ratio = {}, std::optional<Placement> placement = {}) {
    return {VariantKind::Aggregated, std::nullopt, ratio, placement};
  }

  /// Throws ConfigError on an inconsistent descriptor.
  void validate() const;
  /// File stem, e.g. "global", "local_ARF_0.05_front", "aggregated_0.05_front".
  std::string key() const;
  static VariantDescriptor parse_key(std::string_view key);

  bool operator==(const VariantDescriptor&) const = default;
};

struct EmbeddingVector {
  std::string element_symbol;
  VariantDescriptor variant;
  Eigen::VectorXf values;
  bool empty_subset = false;

  Eigen::Index dim() const { return values.size(); }
};

/// Text → fixed-size vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Identifies the provider in cache keys.
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual Eigen::VectorXf embed(std::string_view text) = 0;
};

/// Hashed bag of unigrams and adjacent bigrams. Tokens are lowercase runs of
/// ASCII letters, digits and non-ASCII bytes. Every feature adds
/// ±1/sqrt(feature count) at bucket hash % dim with the sign taken from the
/// hash's bit parity; the sum is L2-normalized (e_0 when it vanishes).
Eigen::VectorXf hash_embed(std::string_view text, int dim, std::uint64_t seed);

/// Seeded 64-bit hash used by hash_embed: FNV-1a over the bytes starting from
/// a seed-dependent basis, then the splitmix64 finalizer.
std::uint64_t seeded_hash(std::string_view bytes, std::uint64_t seed);

/// Lowercase tokens as hash_embed sees them.
std::vector<std::string> hash_tokens(std::string_view text);

class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  HashEmbeddingProvider(int dim, std::uint64_t seed);
  std::string id() const override;
  int dim() const override { return dim_; }
  Eigen::VectorXf embed(std::string_view text) override { return hash_embed(text, dim_, seed_); }

 private:
  int dim_;
  std::uint64_t seed_;
};

/// POSTs {"text"} JSON and reads {"values": [...]} back. Returned vectors are
/// used as-is (no normalization).
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string endpoint, std::string token, int dim, HttpTransport& transport,
                          RetryPolicy retry = {});
  /// Endpoint from E2V_EMBED_URL, token from E2V_EMBED_TOKEN.
  static RemoteEmbeddingProvider from_environment(int dim, HttpTransport& transport, RetryPolicy retry = {});

  std::string id() const override { return "remote:" + endpoint_; }
  int dim() const override { return dim_; }
  Eigen::VectorXf embed(std::string_view text) override;

 private:
  std::string endpoint_;
  std::string token_;
  int dim_;
  HttpTransport* transport_;
  RetryPolicy retry_;
};

/// Content-addressed vector cache: `<dir>/<digest>.vec` plus `<dir>/index.csv`
/// (digest,provider,dim). Entries are written temp-then-rename.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  /// SHA-256 over provider id, dim and text, NUL-separated.
  static std::string digest(std::string_view provider_id, int dim, std::string_view text);

  std::optional<Eigen::VectorXf> lookup(const std::string& digest) const;
  void store(const std::string& digest, std::string_view provider_id, const Eigen::VectorXf& values);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex index_mutex_;
};

/// Provider front end: validates input and output, consults the cache first,
/// and counts how many vectors were actually computed.
class Embedder {
 public:
  explicit Embedder(EmbeddingProvider& provider, EmbeddingCache* cache = nullptr)
      : provider_(&provider), cache_(cache) {}

  Eigen::VectorXf embed_text(std::string_view text);

  int dim() const { return provider_->dim(); }
  std::size_t computed() const { return computed_; }
  std::size_t cache_hits() const { return cache_hits_; }

 private:
  EmbeddingProvider* provider_;
  EmbeddingCache* cache_;
  std::atomic<std::size_t> computed_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

Eigen::VectorXf embed_text(std::string_view text, Embedder& embedder);

struct EmbedRequest {
  bool global = true;
  bool local = false;
  std::vector<Placement> placements = {Placement::Front};
};

/// Global: the page text. Local: one vector per tag from the composed
/// attribute-plus-summary text; empty subsets are embedded anyway and flagged.
std::vector<EmbeddingVector> embed_element(const ElementRecord& record, const PerTag<std::string>* subsets,
                                           const Summary* summary, Embedder& embedder,
                                           const EmbedRequest& request);

/// Concatenates the eight local vectors of one element in canonical tag order.
EmbeddingVector aggregate_locals(std::span<const EmbeddingVector> locals);

/// Instruction prefix plus full page, separated like compose_local_input.
std::string compose_prefixed_page(std::string_view prefix, std::string_view page_text);

struct CatalogEntry {
  std::string symbol;
  VariantDescriptor variant;
  int dim = 0;
  bool empty_subset = false;
  std::string path;  // relative to the store root
};

/// `<root>/<symbol>/<variant key>.vec` plus `<root>/catalog.csv`.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::filesystem::path root) : root_(std::move(root)) {}

  static constexpr std::string_view kCatalogHeader = "symbol,kind,attribute,ratio,placement,dim,empty_subset,path";

  std::filesystem::path path_for(const std::string& symbol, const VariantDescriptor& variant) const;
  bool contains(const std::string& symbol, const VariantDescriptor& variant) const;
  /// Writes the vector file and upserts its catalog row (catalog kept sorted).
  void put(const EmbeddingVector& vector);
  void put_all(std::span<const EmbeddingVector> vectors);
  EmbeddingVector get(const std::string& symbol, const VariantDescriptor& variant) const;
  std::vector<CatalogEntry> catalog() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  void write_catalog(std::vector<CatalogEntry> entries) const;

  std::filesystem::path root_;
};

}  // namespace e2v
