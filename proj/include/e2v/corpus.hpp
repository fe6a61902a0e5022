#pragma once

#include "e2v/http.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace e2v {

/// The ten periodic-table classes used as classification labels.
enum class Family {
  AlkaliMetal,
  AlkalineEarthMetal,
  TransitionMetal,
  Lanthanide,
  Actinide,
  PostTransitionMetal,
  Metalloid,
  ReactiveNonmetal,
  Halogen,
  NobleGas,
};

inline constexpr std::size_t kFamilyCount = 10;

inline constexpr std::array<Family, kFamilyCount> kAllFamilies = {
    Family::AlkaliMetal,       Family::AlkalineEarthMetal, Family::TransitionMetal,  Family::Lanthanide,
    Family::Actinide,          Family::PostTransitionMetal, Family::Metalloid,       Family::ReactiveNonmetal,
    Family::Halogen,           Family::NobleGas,
};

std::string_view to_string(Family family);
/// Accepts the lowercase label, e.g. "alkaline earth metal".
Family parse_family(std::string_view label);

struct Sentence {
  std::size_t index = 0;
  std::string text;
  std::size_t word_count = 0;

  bool operator==(const Sentence&) const = default;
};

struct ElementRecord {
  std::string symbol;
  int atomic_number = 0;
  std::string name;
  Family family = Family::TransitionMetal;
  std::string page_text;
  std::vector<Sentence> sentences;
};

struct SegmenterOptions {
  std::vector<std::string> abbreviations = {"e.g", "i.e", "et al", "approx", "Fig", "No"};
};

/// Number of maximal non-whitespace runs.
std::size_t count_words(std::string_view text);

/// Trims and collapses every whitespace run to one space.
std::string collapse_whitespace(std::string_view text);

/// Rule-based splitter: a terminator (. ! ?) followed by whitespace and an
/// uppercase letter or digit ends a sentence unless the word before it is a
/// listed abbreviation or a single capital letter.
std::vector<Sentence> segment_sentences(std::string_view page_text, const SegmenterOptions& options = {});

/// Joins sentence texts with single spaces.
std::string join_sentences(const std::vector<Sentence>& sentences);

struct ManifestEntry {
  std::string symbol;
  int atomic_number = 0;
  std::string name;
  Family family = Family::TransitionMetal;
};

/// Reads `manifest.csv` (header `symbol,atomic_number,name,family`).
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest_path);

/// Loads `<dir>/manifest.csv` and one `<symbol>.txt` per entry, sorted by
/// atomic number.
std::vector<ElementRecord> load_corpus(const std::filesystem::path& dir, const SegmenterOptions& options = {});

/// Best-effort plain text from an HTML body: drops script/style blocks and
/// tags, decodes the common entities. Non-HTML input is returned unchanged.
std::string html_to_text(std::string_view body);

std::string expand_url_template(std::string_view url_template, std::string_view name);

/// GETs url_template with `{name}` substituted. Non-2xx statuses surface as
/// a retriable RemoteError once the retry policy is spent.
std::string fetch_page(std::string_view name, std::string_view url_template, HttpTransport& transport,
                       const RetryPolicy& retry = {});

}  // namespace e2v
