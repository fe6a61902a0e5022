#pragma once

#include "e2v/corpus.hpp"
#include "e2v/http.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace e2v {

/// Eight attribute categories, in their canonical order.
enum class AttributeTag { MECH, OPT, EM, THERM, CHEM, ARF, APPL, ABND };

inline constexpr std::size_t kTagCount = 8;

inline constexpr std::array<AttributeTag, kTagCount> kAllTags = {
    AttributeTag::MECH, AttributeTag::OPT, AttributeTag::EM,   AttributeTag::THERM,
    AttributeTag::CHEM, AttributeTag::ARF, AttributeTag::APPL, AttributeTag::ABND,
};

/// Fixed-size map keyed by AttributeTag.
template <typename T>
using PerTag = std::array<T, kTagCount>;

constexpr std::size_t index_of(AttributeTag tag) { return static_cast<std::size_t>(tag); }

std::string_view abbreviation(AttributeTag tag);
std::string_view full_name(AttributeTag tag);
/// Exact abbreviation, case-insensitive.
std::optional<AttributeTag> parse_tag(std::string_view text);

/// LLM reply parsing: earliest case-insensitive, word-bounded occurrence of a
/// tag abbreviation or full name; nullopt when there is none.
std::optional<AttributeTag> parse_tag_reply(std::string_view reply);

enum class TagSource { Llm, Fallback };
std::string_view to_string(TagSource source);

struct TaggedSentence {
  Sentence sentence;
  AttributeTag tag = AttributeTag::CHEM;
  TagSource source = TagSource::Fallback;
};

struct PromptSet {
  /// Sent ahead of each sentence; lists every tag.
  std::string classify_prompt;
  /// `{ratio}` and `{words}` are substituted before sending.
  std::string summarize_prompt;

  static PromptSet defaults();
  /// Throws ConfigError when a prompt misses its required content.
  void validate() const;
};

/// Deterministic stem lexicon. Tags are tried in canonical order and the first
/// tag with any matching stem wins; within a tag the longest stem is reported.
/// Stems match case-insensitively at the start of a word.
class KeywordTagger {
 public:
  struct Match {
    AttributeTag tag = AttributeTag::CHEM;
    std::string stem;  // empty when nothing matched
  };

  static constexpr AttributeTag kDefaultTag = AttributeTag::CHEM;

  /// Parses `tag,stem` CSV.
  static KeywordTagger from_csv(std::string_view csv);
  static const KeywordTagger& builtin();

  Match classify(std::string_view sentence) const;
  std::size_t stem_count(AttributeTag tag) const { return stems_[index_of(tag)].size(); }

 private:
  PerTag<std::vector<std::string>> stems_;
};

/// Text-in/text-out LLM seam.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string complete(std::string_view prompt, std::string_view text) = 0;
};

/// POSTs {"prompt","text"} JSON and reads {"text"} back, with a bearer token.
class RemoteLlmClient final : public TextGenerator {
 public:
  RemoteLlmClient(std::string endpoint, std::string token, HttpTransport& transport, RetryPolicy retry = {});
  /// Endpoint from E2V_LLM_URL, token from E2V_LLM_TOKEN.
  static RemoteLlmClient from_environment(HttpTransport& transport, RetryPolicy retry = {});

  std::string complete(std::string_view prompt, std::string_view text) override;

 private:
  std::string endpoint_;
  std::string token_;
  HttpTransport* transport_;
  RetryPolicy retry_;
};

/// Tags with the remote model when one is attached, with the lexicon
/// otherwise. A remote non-answer is retried once; a second non-answer or a
/// transport failure falls back to the lexicon.
class SentenceTagger {
 public:
  explicit SentenceTagger(const KeywordTagger& fallback) : fallback_(&fallback) {}
  SentenceTagger(const KeywordTagger& fallback, TextGenerator& llm, PromptSet prompts)
      : fallback_(&fallback), llm_(&llm), prompts_(std::move(prompts)) {}

  TaggedSentence tag(const Sentence& sentence) const;
  bool remote() const { return llm_ != nullptr; }

 private:
  const KeywordTagger* fallback_;
  TextGenerator* llm_ = nullptr;
  PromptSet prompts_;
};

TaggedSentence tag_sentence(const Sentence& sentence, const SentenceTagger& tagger);

/// Tags every sentence with at most `concurrency` requests in flight; output is
/// in sentence order.
std::vector<TaggedSentence> tag_sentences(const std::vector<Sentence>& sentences, const SentenceTagger& tagger,
                                          std::size_t concurrency = 4);

/// Per tag, the tagged sentences joined by single spaces in page order.
PerTag<std::string> build_attribute_subsets(const std::vector<TaggedSentence>& tagged);

struct Summary {
  std::string element_symbol;
  double ratio = 0.0;
  std::string text;
  std::size_t word_count = 0;
  std::size_t target_words = 0;
  TagSource source = TagSource::Fallback;

  /// |word_count - target| <= 30% of target.
  bool within_tolerance() const;
};

class PageSummarizer {
 public:
  PageSummarizer() = default;
  PageSummarizer(TextGenerator& llm, PromptSet prompts) : llm_(&llm), prompts_(std::move(prompts)) {}

  Summary summarize(std::string_view symbol, std::string_view page_text, double ratio) const;

 private:
  TextGenerator* llm_ = nullptr;
  PromptSet prompts_;
};

/// Leading sentences until round(ratio * words) is met or exceeded (at least one).
Summary extractive_summary(std::string_view symbol, std::string_view page_text, double ratio);

Summary summarize(std::string_view symbol, std::string_view page_text, double ratio,
                  const PageSummarizer& summarizer = {});

enum class Placement { Front, End };
std::string_view to_string(Placement placement);
Placement parse_placement(std::string_view text);

/// Summary and attribute text separated by one blank line, summary first for
/// Front and last for End.
std::string compose_local_input(std::string_view attribute_text, std::string_view summary_text, Placement placement);

/// One JSON object per line: {index, text, tag, source}.
std::string to_jsonl(const std::vector<TaggedSentence>& tagged);
std::vector<TaggedSentence> from_jsonl(std::string_view jsonl);

}  // namespace e2v
