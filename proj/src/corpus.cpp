#include "e2v/corpus.hpp"

#include "e2v/error.hpp"
#include "e2v/io.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace e2v {

namespace {

constexpr std::array<std::string_view, kFamilyCount> kFamilyLabels = {
    "alkali metal", "alkaline earth metal",   "transition metal", "lanthanide", "actinide",
    "post-transition metal", "metalloid", "reactive nonmetal", "halogen",    "noble gas",
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (is_upper(c)) c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// True when the terminator at `pos` closes an abbreviation or an initial.
bool guarded(std::string_view text, std::size_t pos, const SegmenterOptions& options) {
  const std::string_view before = text.substr(0, pos);
  const auto word_start = before.find_last_of(' ');
  const std::string_view word = word_start == std::string_view::npos ? before : before.substr(word_start + 1);
  if (word.size() == 1 && is_upper(word[0])) return true;
  for (const auto& abbr : options.abbreviations) {
    if (abbr.empty() || !before.ends_with(abbr)) continue;
    const std::size_t start = before.size() - abbr.size();
    if (start == 0 || before[start - 1] == ' ' || before[start - 1] == '(') return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(Family family) { return kFamilyLabels[static_cast<std::size_t>(family)]; }

Family parse_family(std::string_view label) {
  const std::string lowered = lower_ascii(label);
  for (std::size_t i = 0; i < kFamilyCount; ++i) {
    if (kFamilyLabels[i] == lowered) return kAllFamilies[i];
  }
  throw DataError("unknown family label '" + std::string(label) + "'");
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<Sentence> segment_sentences(std::string_view page_text, const SegmenterOptions& options) {
  const std::string text = collapse_whitespace(page_text);
  if (text.empty()) throw DataError("empty corpus");

  std::vector<Sentence> sentences;
  auto emit = [&](std::size_t begin, std::size_t end) {
    Sentence s;
    s.index = sentences.size();
    s.text = text.substr(begin, end - begin);
    s.word_count = count_words(s.text);
    sentences.push_back(std::move(s));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminator(text[i])) continue;
    std::size_t end = i + 1;
    while (end < text.size() && is_closer(text[end])) ++end;
    if (end + 1 >= text.size() || text[end] != ' ') continue;
    const char next = text[end + 1];
    if (!is_upper(next) && !is_digit(next)) continue;
    if (guarded(text, i, options)) continue;
    emit(start, end);
    start = end + 1;
    i = end;
  }
  emit(start, text.size());
  return sentences;
}

std::string join_sentences(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out.push_back(' ');
    out += s.text;
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest_path) {
  const auto rows = io::parse_csv(io::read_file(manifest_path));
  if (rows.empty()) throw DataError(manifest_path.string() + ": missing header");
  const io::CsvRow expected = {"symbol", "atomic_number", "name", "family"};
  if (rows.front() != expected) {
    throw DataError(manifest_path.string() + ": header must be symbol,atomic_number,name,family");
  }
  std::vector<ManifestEntry> entries;
  std::set<std::string> symbols;
  std::set<int> numbers;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = manifest_path.string() + " row " + std::to_string(r + 1);
    if (row.size() != 4) throw DataError(where + ": expected 4 fields");
    ManifestEntry e;
    e.symbol = row[0];
    if (e.symbol.empty() || e.symbol.size() > 2 || !is_upper(e.symbol[0])) {
      throw DataError(where + ": invalid element symbol '" + e.symbol + "'");
    }
    const auto& num = row[1];
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), e.atomic_number);
    if (ec != std::errc{} || ptr != num.data() + num.size() || e.atomic_number < 1 || e.atomic_number > 118) {
      throw DataError(where + ": atomic_number must be an integer in 1..118");
    }
    e.name = row[2];
    e.family = parse_family(row[3]);
    if (!symbols.insert(e.symbol).second) throw DataError("duplicate symbol " + e.symbol + " in manifest");
    if (!numbers.insert(e.atomic_number).second) {
      throw DataError("duplicate atomic_number " + std::to_string(e.atomic_number) + " in manifest");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ElementRecord> load_corpus(const std::filesystem::path& dir, const SegmenterOptions& options) {
  const auto manifest = load_manifest(dir / "manifest.csv");
  std::vector<ElementRecord> records;
  records.reserve(manifest.size());
  for (const auto& entry : manifest) {
    const auto path = dir / (entry.symbol + ".txt");
    if (!std::filesystem::exists(path)) throw DataError("missing corpus file for " + entry.symbol);
    ElementRecord rec;
    rec.symbol = entry.symbol;
    rec.atomic_number = entry.atomic_number;
    rec.name = entry.name;
    rec.family = entry.family;
    rec.page_text = io::read_file(path);
    if (const auto bad = io::find_invalid_utf8(rec.page_text)) {
      throw DataError(path.string() + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
    }
    try {
      rec.sentences = segment_sentences(rec.page_text, options);
    } catch (const DataError& e) {
      throw DataError(entry.symbol + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  std::sort(records.begin(), records.end(),
            [](const ElementRecord& a, const ElementRecord& b) { return a.atomic_number < b.atomic_number; });
  return records;
}

std::string html_to_text(std::string_view body) {
  const auto first = body.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos || body[first] != '<') return std::string(body);

  const std::string lowered = lower_ascii(body);
  std::string text;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] != '<') {
      text.push_back(body[i++]);
      continue;
    }
    bool skipped_block = false;
    for (std::string_view block : {"script", "style"}) {
      if (lowered.compare(i + 1, block.size(), block) == 0) {
        const auto close = lowered.find("</" + std::string(block), i);
        const auto end = close == std::string::npos ? std::string::npos : lowered.find('>', close);
        i = end == std::string::npos ? body.size() : end + 1;
        skipped_block = true;
        break;
      }
    }
    if (skipped_block) continue;
    const auto end = body.find('>', i);
    i = end == std::string_view::npos ? body.size() : end + 1;
    text.push_back(' ');
  }

  static constexpr std::pair<std::string_view, std::string_view> kEntities[] = {
      {"&nbsp;", " "}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&amp;", "&"},
  };
  for (const auto& [entity, replacement] : kEntities) {
    for (auto pos = text.find(entity); pos != std::string::npos; pos = text.find(entity, pos + replacement.size())) {
      text.replace(pos, entity.size(), replacement);
    }
  }
  return collapse_whitespace(text);
}

std::string expand_url_template(std::string_view url_template, std::string_view name) {
  const auto pos = url_template.find("{name}");
  if (pos == std::string_view::npos) throw ConfigError("URL template lacks a {name} placeholder");
  std::string url(url_template.substr(0, pos));
  for (char c : name) url.push_back(c == ' ' ? '_' : c);
  url += url_template.substr(pos + 6);
  return url;
}

std::string fetch_page(std::string_view name, std::string_view url_template, HttpTransport& transport,
                       const RetryPolicy& retry) {
  const std::string url = expand_url_template(url_template, name);
  const auto response = with_retries(retry, [&] {
    auto r = transport.get(url, {});
    if (!is_success(r.status)) throw status_error("GET " + url, r.status);
    return r;
  });
  if (response.body.empty()) throw DataError("empty page body from " + url);
  std::string text = html_to_text(response.body);
  if (collapse_whitespace(text).empty()) throw DataError("page from " + url + " has no text");
  return text;
}

}  // namespace e2v
