#include "e2v/embed.hpp"

#include "e2v/error.hpp"
#include "e2v/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>

namespace e2v {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::string_view to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::Global:
      return "global";
    case VariantKind::Local:
      return "local";
    case VariantKind::Aggregated:
      return "aggregated";
  }
  return "global";
}

VariantKind parse_variant_kind(std::string_view text) {
  if (text == "global") return VariantKind::Global;
  if (text == "local") return VariantKind::Local;
  if (text == "aggregated") return VariantKind::Aggregated;
  throw ConfigError("unknown variant kind '" + std::string(text) + "'");
}

void VariantDescriptor::validate() const {
  switch (kind) {
    case VariantKind::Local:
      if (!attribute || !summary_ratio || !placement) {
        throw ConfigError("local variant needs attribute, summary ratio and placement");
      }
      break;
    case VariantKind::Global:
      if (attribute || summary_ratio || placement) throw ConfigError("global variant takes no local fields");
      break;
    case VariantKind::Aggregated:
      if (attribute) throw ConfigError("aggregated variant takes no attribute");
      if (summary_ratio.has_value() != placement.has_value()) {
        throw ConfigError("aggregated variant provenance needs both ratio and placement");
      }
      break;
  }
}

std::string VariantDescriptor::key() const {
  validate();
  std::string k(to_string(kind));
  if (attribute) k += "_" + std::string(abbreviation(*attribute));
  if (summary_ratio) k += "_" + io::format_double(*summary_ratio);
  if (placement) k += "_" + std::string(to_string(*placement));
  return k;
}

VariantDescriptor VariantDescriptor::parse_key(std::string_view key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = key.find('_', start);
    parts.emplace_back(key.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  VariantDescriptor v;
  v.kind = parse_variant_kind(parts[0]);
  std::size_t next = 1;
  if (v.kind == VariantKind::Local) {
    if (parts.size() != 4) throw ConfigError("malformed local variant key '" + std::string(key) + "'");
    const auto tag = parse_tag(parts[1]);
    if (!tag) throw ConfigError("unknown attribute in variant key '" + std::string(key) + "'");
    v.attribute = tag;
    next = 2;
  }
  if (parts.size() == next + 2) {
    char* end = nullptr;
    v.summary_ratio = std::strtod(parts[next].c_str(), &end);
    if (end == parts[next].c_str() || *end) throw ConfigError("bad ratio in variant key '" + std::string(key) + "'");
    v.placement = parse_placement(parts[next + 1]);
  } else if (parts.size() != next) {
    throw ConfigError("malformed variant key '" + std::string(key) + "'");
  }
  v.validate();
  return v;
}

std::uint64_t seeded_hash(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

std::vector<std::string> hash_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Eigen::VectorXf hash_embed(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 2) throw ConfigError("hash embedding dim must be at least 2");
  const auto tokens = hash_tokens(text);
  std::vector<std::string> features = tokens;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) features.push_back(tokens[i] + " " + tokens[i + 1]);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
  if (!features.empty()) {
    const double weight = 1.0 / std::sqrt(static_cast<double>(features.size()));
    for (const auto& f : features) {
      const std::uint64_t h = seeded_hash(f, seed);
      const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
      acc[bucket] += (std::popcount(h) % 2 == 0) ? weight : -weight;
    }
  }
  const double norm = acc.norm();
  if (norm == 0.0) {
    Eigen::VectorXf e0 = Eigen::VectorXf::Zero(dim);
    e0[0] = 1.0f;
    return e0;
  }
  return (acc / norm).cast<float>();
}

HashEmbeddingProvider::HashEmbeddingProvider(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 2) throw ConfigError("hash embedding dim must be at least 2");
}

std::string HashEmbeddingProvider::id() const { return "hash:" + std::to_string(seed_); }

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string endpoint, std::string token, int dim,
                                                 HttpTransport& transport, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), token_(std::move(token)), dim_(dim), transport_(&transport), retry_(retry) {}

RemoteEmbeddingProvider RemoteEmbeddingProvider::from_environment(int dim, HttpTransport& transport,
                                                                  RetryPolicy retry) {
  const char* url = std::getenv("E2V_EMBED_URL");
  const char* token = std::getenv("E2V_EMBED_TOKEN");
  if (!url || !*url) throw ConfigError("E2V_EMBED_URL is not set");
  return RemoteEmbeddingProvider(url, token ? token : "", dim, transport, retry);
}

Eigen::VectorXf RemoteEmbeddingProvider::embed(std::string_view text) {
  const std::string body = json{{"text", text}}.dump();
  HttpHeaders headers;
  if (!token_.empty()) headers.emplace_back("Authorization", "Bearer " + token_);
  const auto response = with_retries(retry_, [&] {
    auto r = transport_->post(endpoint_, body, "application/json", headers);
    if (!is_success(r.status)) throw status_error("POST " + endpoint_, r.status);
    return r;
  });
  const auto reply = json::parse(response.body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("values") || !reply["values"].is_array()) {
    throw RemoteError("malformed embedding reply from " + endpoint_, response.status, false);
  }
  const auto& values = reply["values"];
  Eigen::VectorXf out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) throw RemoteError("non-numeric embedding value", response.status, false);
    out[static_cast<Eigen::Index>(i)] = values[i].get<float>();
  }
  return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string EmbeddingCache::digest(std::string_view provider_id, int dim, std::string_view text) {
  std::string material(provider_id);
  material.push_back('\0');
  material += std::to_string(dim);
  material.push_back('\0');
  material += text;
  return io::sha256_hex(material);
}

std::optional<Eigen::VectorXf> EmbeddingCache::lookup(const std::string& digest) const {
  const auto path = dir_ / (digest + ".vec");
  if (!std::filesystem::exists(path)) return std::nullopt;
  return io::read_vec(path);
}

void EmbeddingCache::store(const std::string& digest, std::string_view provider_id, const Eigen::VectorXf& values) {
  io::write_vec(dir_ / (digest + ".vec"), values);
  std::lock_guard lock(index_mutex_);
  const auto index = dir_ / "index.csv";
  const bool fresh = !std::filesystem::exists(index);
  std::ofstream out(index, std::ios::app | std::ios::binary);
  if (fresh) out << "digest,provider,dim\n";
  out << io::format_csv_row({digest, std::string(provider_id), std::to_string(values.size())});
}

Eigen::VectorXf Embedder::embed_text(std::string_view text) {
  if (text.empty()) throw DataError("cannot embed empty text");
  const std::string digest = EmbeddingCache::digest(provider_->id(), provider_->dim(), text);
  if (cache_) {
    if (auto hit = cache_->lookup(digest); hit && hit->size() == provider_->dim()) {
      ++cache_hits_;
      return *hit;
    }
  }
  Eigen::VectorXf values;
  try {
    values = provider_->embed(text);
  } catch (const RemoteError& e) {
    throw RemoteError("embedding " + digest + " failed: " + e.what(), e.status(), false);
  }
  ++computed_;
  if (values.size() != provider_->dim()) {
    throw NumericalError("provider returned dim " + std::to_string(values.size()) + ", expected " +
                         std::to_string(provider_->dim()));
  }
  if (!values.allFinite()) throw NumericalError("provider returned non-finite values for " + digest);
  if (cache_) cache_->store(digest, provider_->id(), values);
  return values;
}

Eigen::VectorXf embed_text(std::string_view text, Embedder& embedder) { return embedder.embed_text(text); }

std::vector<EmbeddingVector> embed_element(const ElementRecord& record, const PerTag<std::string>* subsets,
                                           const Summary* summary, Embedder& embedder,
                                           const EmbedRequest& request) {
  std::vector<EmbeddingVector> out;
  if (request.global) {
    out.push_back({record.symbol, VariantDescriptor::global(), embedder.embed_text(record.page_text), false});
  }
  if (request.local) {
    if (!subsets || !summary) throw ConfigError(record.symbol + ": local variants need attribute subsets and a summary");
    if (summary->text.empty()) throw DataError(record.symbol + ": empty summary");
    for (Placement placement : request.placements) {
      for (AttributeTag tag : kAllTags) {
        const auto& subset = (*subsets)[index_of(tag)];
        const std::string input = compose_local_input(subset, summary->text, placement);
        out.push_back({record.symbol, VariantDescriptor::local(tag, summary->ratio, placement),
                       embedder.embed_text(input), subset.empty()});
      }
    }
  }
  return out;
}

EmbeddingVector aggregate_locals(std::span<const EmbeddingVector> locals) {
  if (locals.size() != kTagCount) {
    throw DataError("aggregation needs exactly 8 local vectors, got " + std::to_string(locals.size()));
  }
  PerTag<const EmbeddingVector*> by_tag{};
  for (const auto& v : locals) {
    if (v.variant.kind != VariantKind::Local || !v.variant.attribute) throw DataError("aggregation input is not local");
    auto& slot = by_tag[index_of(*v.variant.attribute)];
    if (slot) throw DataError("duplicate attribute " + std::string(abbreviation(*v.variant.attribute)));
    slot = &v;
  }
  const auto& first = locals.front();
  const Eigen::Index dim = first.dim();
  EmbeddingVector out;
  out.element_symbol = first.element_symbol;
  out.variant = VariantDescriptor::aggregated(first.variant.summary_ratio, first.variant.placement);
  out.values.resize(dim * static_cast<Eigen::Index>(kTagCount));
  for (std::size_t t = 0; t < kTagCount; ++t) {
    const auto* v = by_tag[t];
    if (!v) throw DataError("missing attribute " + std::string(abbreviation(kAllTags[t])));
    if (v->dim() != dim) throw DataError("local vectors differ in dim");
    if (v->element_symbol != first.element_symbol) throw DataError("local vectors from different elements");
    out.values.segment(static_cast<Eigen::Index>(t) * dim, dim) = v->values;
    out.empty_subset = out.empty_subset || v->empty_subset;
  }
  return out;
}

std::string compose_prefixed_page(std::string_view prefix, std::string_view page_text) {
  std::string out(prefix);
  out += "\n\n";
  out += page_text;
  return out;
}

std::filesystem::path EmbeddingStore::path_for(const std::string& symbol, const VariantDescriptor& variant) const {
  return root_ / symbol / (variant.key() + ".vec");
}

bool EmbeddingStore::contains(const std::string& symbol, const VariantDescriptor& variant) const {
  return std::filesystem::exists(path_for(symbol, variant));
}

void EmbeddingStore::put(const EmbeddingVector& vector) { put_all(std::span(&vector, 1)); }

void EmbeddingStore::put_all(std::span<const EmbeddingVector> vectors) {
  auto entries = catalog();
  std::map<std::string, CatalogEntry> by_path;
  for (auto& e : entries) by_path[e.path] = std::move(e);
  for (const auto& v : vectors) {
    io::write_vec(path_for(v.element_symbol, v.variant), v.values);
    CatalogEntry e{v.element_symbol, v.variant, static_cast<int>(v.dim()), v.empty_subset,
                   v.element_symbol + "/" + v.variant.key() + ".vec"};
    by_path[e.path] = std::move(e);
  }
  entries.clear();
  for (auto& [_, e] : by_path) entries.push_back(std::move(e));
  write_catalog(std::move(entries));
}

EmbeddingVector EmbeddingStore::get(const std::string& symbol, const VariantDescriptor& variant) const {
  const auto path = path_for(symbol, variant);
  if (!std::filesystem::exists(path)) {
    throw PrerequisiteError("no " + variant.key() + " embedding for " + symbol + "; run embed first");
  }
  EmbeddingVector v;
  v.element_symbol = symbol;
  v.variant = variant;
  v.values = io::read_vec(path);
  for (const auto& e : catalog()) {
    if (e.symbol == symbol && e.variant == variant) v.empty_subset = e.empty_subset;
  }
  return v;
}

std::vector<CatalogEntry> EmbeddingStore::catalog() const {
  const auto path = root_ / "catalog.csv";
  if (!std::filesystem::exists(path)) return {};
  const auto rows = io::parse_csv(io::read_file(path));
  std::vector<CatalogEntry> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 8) throw DataError("catalog row " + std::to_string(r + 1) + ": expected 8 fields");
    CatalogEntry e;
    e.symbol = row[0];
    e.variant.kind = parse_variant_kind(row[1]);
    if (!row[2].empty()) e.variant.attribute = parse_tag(row[2]);
    if (!row[3].empty()) e.variant.summary_ratio = std::strtod(row[3].c_str(), nullptr);
    if (!row[4].empty()) e.variant.placement = parse_placement(row[4]);
    e.dim = std::atoi(row[5].c_str());
    e.empty_subset = row[6] == "true";
    e.path = row[7];
    out.push_back(std::move(e));
  }
  return out;
}

void EmbeddingStore::write_catalog(std::vector<CatalogEntry> entries) const {
  std::string out(kCatalogHeader);
  out.push_back('\n');
  for (const auto& e : entries) {
    out += io::format_csv_row({
        e.symbol,
        std::string(to_string(e.variant.kind)),
        e.variant.attribute ? std::string(abbreviation(*e.variant.attribute)) : "",
        e.variant.summary_ratio ? io::format_double(*e.variant.summary_ratio) : "",
        e.variant.placement ? std::string(to_string(*e.variant.placement)) : "",
        std::to_string(e.dim),
        e.empty_subset ? "true" : "false",
        e.path,
    });
  }
  io::write_file_atomic(root_ / "catalog.csv", out);
}

}  // namespace e2v
