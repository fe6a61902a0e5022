#include "e2v/annotate.hpp"

#include "e2v/error.hpp"
#include "e2v/io.hpp"
#include "e2v/parallel.hpp"
#include "lexicon_data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace e2v {

using nlohmann::json;

namespace {

constexpr PerTag<std::string_view> kAbbreviations = {"MECH", "OPT", "EM", "THERM", "CHEM", "ARF", "APPL", "ABND"};

constexpr PerTag<std::string_view> kFullNames = {
    "Mechanical properties", "Optical properties",    "Electrical & Magnetic properties",
    "Thermal properties",    "Chemical properties",   "Atomic & radiational features",
    "Applications",          "Abundance",
};

// Names accepted in model replies besides the abbreviations.
constexpr std::pair<AttributeTag, std::string_view> kReplyNames[] = {
    {AttributeTag::MECH, "mechanical properties"},
    {AttributeTag::MECH, "mechanical (physical)"},
    {AttributeTag::MECH, "mechanical"},
    {AttributeTag::OPT, "optical properties"},
    {AttributeTag::OPT, "optical"},
    {AttributeTag::EM, "electrical & magnetic properties"},
    {AttributeTag::EM, "electrical and magnetic properties"},
    {AttributeTag::EM, "electrical & magnetic"},
    {AttributeTag::EM, "electrical and magnetic"},
    {AttributeTag::THERM, "thermal properties"},
    {AttributeTag::THERM, "thermal"},
    {AttributeTag::CHEM, "chemical properties"},
    {AttributeTag::CHEM, "chemical"},
    {AttributeTag::ARF, "atomic & radiational features"},
    {AttributeTag::ARF, "atomic and radiational features"},
    {AttributeTag::ARF, "atomic & radiational"},
    {AttributeTag::ARF, "atomic and radiational"},
    {AttributeTag::APPL, "applications"},
    {AttributeTag::ABND, "abundance"},
};

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') || u >= 0x80;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Earliest occurrence of `needle` in `hay` that starts at a word boundary
// (and ends at one when `whole_word`).
std::size_t find_bounded(std::string_view hay, std::string_view needle, bool whole_word) {
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    const bool start_ok = pos == 0 || !is_word_byte(hay[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool end_ok = !whole_word || end == hay.size() || !is_word_byte(hay[end]);
    if (start_ok && end_ok) return pos;
  }
  return std::string_view::npos;
}

std::string substitute(std::string text, std::string_view key, std::string_view value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

}  // namespace

std::string_view abbreviation(AttributeTag tag) { return kAbbreviations[index_of(tag)]; }
std::string_view full_name(AttributeTag tag) { return kFullNames[index_of(tag)]; }

std::optional<AttributeTag> parse_tag(std::string_view text) {
  std::string upper(text);
  for (char& c : upper) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  for (AttributeTag tag : kAllTags) {
    if (abbreviation(tag) == upper) return tag;
  }
  return std::nullopt;
}

std::optional<AttributeTag> parse_tag_reply(std::string_view reply) {
  const std::string hay = lower_ascii(reply);
  std::optional<AttributeTag> best;
  std::size_t best_pos = std::string::npos;
  std::size_t best_len = 0;
  auto consider = [&](AttributeTag tag, std::string_view needle) {
    const auto pos = find_bounded(hay, needle, true);
    if (pos == std::string::npos) return;
    if (pos < best_pos || (pos == best_pos && needle.size() > best_len)) {
      best = tag;
      best_pos = pos;
      best_len = needle.size();
    }
  };
  for (AttributeTag tag : kAllTags) consider(tag, lower_ascii(abbreviation(tag)));
  for (const auto& [tag, name] : kReplyNames) consider(tag, name);
  return best;
}

std::string_view to_string(TagSource source) { return source == TagSource::Llm ? "llm" : "fallback"; }

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.classify_prompt =
      "You label sentences from an encyclopedia article about a chemical element. Assign the sentence to "
      "exactly one attribute category and reply with the abbreviation only.\n"
      "MECH: Mechanical properties\n"
      "OPT: Optical properties\n"
      "EM: Electrical & Magnetic properties\n"
      "THERM: Thermal properties\n"
      "CHEM: Chemical properties\n"
      "ARF: Atomic & radiational features\n"
      "APPL: Applications\n"
      "ABND: Abundance\n";
  p.summarize_prompt =
      "Summarize the following encyclopedia article about a chemical element in about {words} words, "
      "roughly {ratio} of its original length. Keep the facts that best characterize the element.";
  return p;
}

void PromptSet::validate() const {
  for (AttributeTag tag : kAllTags) {
    if (classify_prompt.find(abbreviation(tag)) == std::string::npos) {
      throw ConfigError("classify prompt does not list tag " + std::string(abbreviation(tag)));
    }
  }
  if (summarize_prompt.find("{ratio}") == std::string::npos) {
    throw ConfigError("summarize prompt lacks a {ratio} placeholder");
  }
}

KeywordTagger KeywordTagger::from_csv(std::string_view csv) {
  const auto rows = io::parse_csv(csv);
  if (rows.empty() || rows.front() != io::CsvRow{"tag", "stem"}) throw DataError("lexicon header must be tag,stem");
  KeywordTagger tagger;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 2) throw DataError("lexicon row " + std::to_string(r + 1) + ": expected 2 fields");
    const auto tag = parse_tag(row[0]);
    if (!tag) throw DataError("lexicon row " + std::to_string(r + 1) + ": unknown tag '" + row[0] + "'");
    std::string stem = lower_ascii(row[1]);
    if (stem.empty()) throw DataError("lexicon row " + std::to_string(r + 1) + ": empty stem");
    tagger.stems_[index_of(*tag)].push_back(std::move(stem));
  }
  return tagger;
}

const KeywordTagger& KeywordTagger::builtin() {
  static const KeywordTagger tagger = from_csv(detail::kBuiltinLexicon);
  return tagger;
}

KeywordTagger::Match KeywordTagger::classify(std::string_view sentence) const {
  const std::string hay = lower_ascii(sentence);
  for (AttributeTag tag : kAllTags) {
    const std::string* best = nullptr;
    for (const auto& stem : stems_[index_of(tag)]) {
      if (find_bounded(hay, stem, false) == std::string::npos) continue;
      if (!best || stem.size() > best->size()) best = &stem;
    }
    if (best) return {tag, *best};
  }
  return {kDefaultTag, {}};
}

RemoteLlmClient::RemoteLlmClient(std::string endpoint, std::string token, HttpTransport& transport,
                                 RetryPolicy retry)
    : endpoint_(std::move(endpoint)), token_(std::move(token)), transport_(&transport), retry_(retry) {}

RemoteLlmClient RemoteLlmClient::from_environment(HttpTransport& transport, RetryPolicy retry) {
  const char* url = std::getenv("E2V_LLM_URL");
  const char* token = std::getenv("E2V_LLM_TOKEN");
  if (!url || !*url) throw ConfigError("E2V_LLM_URL is not set");
  return RemoteLlmClient(url, token ? token : "", transport, retry);
}

std::string RemoteLlmClient::complete(std::string_view prompt, std::string_view text) {
  const std::string body = json{{"prompt", prompt}, {"text", text}}.dump();
  HttpHeaders headers;
  if (!token_.empty()) headers.emplace_back("Authorization", "Bearer " + token_);
  const auto response = with_retries(retry_, [&] {
    auto r = transport_->post(endpoint_, body, "application/json", headers);
    if (!is_success(r.status)) throw status_error("POST " + endpoint_, r.status);
    return r;
  });
  const auto reply = json::parse(response.body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
    throw RemoteError("malformed reply from " + endpoint_, response.status, false);
  }
  return reply["text"].get<std::string>();
}

TaggedSentence SentenceTagger::tag(const Sentence& sentence) const {
  if (llm_) {
    try {
      for (int attempt = 0; attempt < 2; ++attempt) {
        if (const auto tag = parse_tag_reply(llm_->complete(prompts_.classify_prompt, sentence.text))) {
          return {sentence, *tag, TagSource::Llm};
        }
      }
    } catch (const RemoteError&) {
      // falls through to the lexicon
    }
  }
  return {sentence, fallback_->classify(sentence.text).tag, TagSource::Fallback};
}

TaggedSentence tag_sentence(const Sentence& sentence, const SentenceTagger& tagger) { return tagger.tag(sentence); }

std::vector<TaggedSentence> tag_sentences(const std::vector<Sentence>& sentences, const SentenceTagger& tagger,
                                          std::size_t concurrency) {
  std::vector<TaggedSentence> out(sentences.size());
  parallel_for(sentences.size(), tagger.remote() ? concurrency : 1,
               [&](std::size_t i) { out[i] = tagger.tag(sentences[i]); });
  return out;
}

PerTag<std::string> build_attribute_subsets(const std::vector<TaggedSentence>& tagged) {
  std::vector<const TaggedSentence*> ordered;
  ordered.reserve(tagged.size());
  for (const auto& t : tagged) ordered.push_back(&t);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->sentence.index < b->sentence.index; });
  PerTag<std::string> subsets;
  for (const auto* t : ordered) {
    auto& text = subsets[index_of(t->tag)];
    if (!text.empty()) text.push_back(' ');
    text += t->sentence.text;
  }
  return subsets;
}

bool Summary::within_tolerance() const {
  const double target = static_cast<double>(target_words);
  return std::abs(static_cast<double>(word_count) - target) <= 0.3 * target;
}

namespace {

void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("summary ratio must lie in (0, 1)");
}

std::size_t word_budget(std::string_view page_text, double ratio) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(count_words(page_text)) + 0.5));
}

}  // namespace

Summary extractive_summary(std::string_view symbol, std::string_view page_text, double ratio) {
  check_ratio(ratio);
  const auto sentences = segment_sentences(page_text);
  Summary s;
  s.element_symbol = std::string(symbol);
  s.ratio = ratio;
  s.target_words = word_budget(page_text, ratio);
  for (const auto& sentence : sentences) {
    if (!s.text.empty()) s.text.push_back(' ');
    s.text += sentence.text;
    s.word_count += sentence.word_count;
    if (s.word_count >= s.target_words) break;
  }
  s.source = TagSource::Fallback;
  return s;
}

Summary PageSummarizer::summarize(std::string_view symbol, std::string_view page_text, double ratio) const {
  check_ratio(ratio);
  if (llm_) {
    const std::size_t budget = word_budget(page_text, ratio);
    std::string prompt = substitute(prompts_.summarize_prompt, "{ratio}", io::format_double(ratio));
    prompt = substitute(std::move(prompt), "{words}", std::to_string(budget));
    try {
      std::string text = collapse_whitespace(llm_->complete(prompt, page_text));
      if (!text.empty()) {
        Summary s;
        s.element_symbol = std::string(symbol);
        s.ratio = ratio;
        s.word_count = count_words(text);
        s.text = std::move(text);
        s.target_words = budget;
        s.source = TagSource::Llm;
        return s;
      }
    } catch (const RemoteError&) {
      // extractive fallback below
    }
  }
  return extractive_summary(symbol, page_text, ratio);
}

Summary summarize(std::string_view symbol, std::string_view page_text, double ratio,
                  const PageSummarizer& summarizer) {
  return summarizer.summarize(symbol, page_text, ratio);
}

std::string_view to_string(Placement placement) { return placement == Placement::Front ? "front" : "end"; }

Placement parse_placement(std::string_view text) {
  if (text == "front") return Placement::Front;
  if (text == "end") return Placement::End;
  throw ConfigError("placement must be front or end, got '" + std::string(text) + "'");
}

std::string compose_local_input(std::string_view attribute_text, std::string_view summary_text, Placement placement) {
  std::string out;
  const auto& first = placement == Placement::Front ? summary_text : attribute_text;
  const auto& second = placement == Placement::Front ? attribute_text : summary_text;
  out.reserve(first.size() + second.size() + 2);
  out += first;
  out += "\n\n";
  out += second;
  return out;
}

std::string to_jsonl(const std::vector<TaggedSentence>& tagged) {
  std::string out;
  for (const auto& t : tagged) {
    out += json{{"index", t.sentence.index},
                {"text", t.sentence.text},
                {"tag", abbreviation(t.tag)},
                {"source", to_string(t.source)}}
               .dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<TaggedSentence> from_jsonl(std::string_view jsonl) {
  std::vector<TaggedSentence> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("annotation line " + std::to_string(line_no) + " is not JSON");
    try {
      TaggedSentence t;
      t.sentence.index = j.at("index").get<std::size_t>();
      t.sentence.text = j.at("text").get<std::string>();
      t.sentence.word_count = count_words(t.sentence.text);
      const auto tag = parse_tag(j.at("tag").get<std::string>());
      if (!tag) throw DataError("unknown tag");
      t.tag = *tag;
      t.source = j.at("source").get<std::string>() == "llm" ? TagSource::Llm : TagSource::Fallback;
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw DataError("annotation line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace e2v
