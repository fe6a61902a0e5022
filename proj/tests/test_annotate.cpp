#include <doctest.h>

#include "test_support.hpp"

#include "e2v/annotate.hpp"
#include "e2v/corpus.hpp"
#include "e2v/error.hpp"

// after Eigen: <resolv.h> defines _res
#include "http_server.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <map>

using namespace e2v;

namespace {

Sentence make_sentence(std::size_t index, std::string text) {
  Sentence s;
  s.index = index;
  s.word_count = count_words(text);
  s.text = std::move(text);
  return s;
}

// Scripted generator: replies in order, then repeats the last one.
class Scripted final : public TextGenerator {
 public:
  explicit Scripted(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(std::string_view prompt, std::string_view) override {
    last_prompt = std::string(prompt);
    const auto i = std::min(calls++, replies_.size() - 1);
    if (replies_[i] == "!throw") throw RemoteError("down", 500, true);
    return replies_[i];
  }
  std::size_t calls = 0;
  std::string last_prompt;

 private:
  std::vector<std::string> replies_;
};

const ElementRecord& helium() {
  static const auto corpus = load_corpus(test::fixture_dir() / "corpus");
  return corpus.front();
}

}  // namespace

TEST_CASE("tag names") {
  for (AttributeTag t : kAllTags) {
    CHECK(parse_tag(abbreviation(t)) == t);
    CHECK(parse_tag_reply(full_name(t)) == t);
  }
  CHECK(parse_tag("therm") == AttributeTag::THERM);
  CHECK_FALSE(parse_tag("THERMAL").has_value());
  CHECK(parse_tag_reply("The answer is ABND.") == AttributeTag::ABND);
  CHECK(parse_tag_reply("thermal, maybe chemical") == AttributeTag::THERM);
  CHECK(parse_tag_reply("Electrical and magnetic properties") == AttributeTag::EM);
  CHECK_FALSE(parse_tag_reply("no idea").has_value());
  // "them" must not read as EM
  CHECK_FALSE(parse_tag_reply("them").has_value());
}

TEST_CASE("keyword tagger examples") {
  const auto tagger = KeywordTagger::builtin();
  for (AttributeTag t : kAllTags) CHECK(tagger.stem_count(t) > 0);

  CHECK(tagger.classify("Gold has a melting point of 1064 \xc2\xb0" "C.").tag == AttributeTag::THERM);
  CHECK(tagger.classify("Helium is the second most abundant element in the universe.").tag == AttributeTag::ABND);
  const auto none = tagger.classify("Zzz qqq.");
  CHECK(none.tag == AttributeTag::CHEM);
  CHECK(none.stem.empty());
  CHECK(KeywordTagger::kDefaultTag == AttributeTag::CHEM);
}

TEST_CASE("keyword tagger from csv") {
  const auto t = KeywordTagger::from_csv("tag,stem\nOPT,colo\nOPT,colour\nABND,rare\n");
  CHECK(t.stem_count(AttributeTag::OPT) == 2);
  const auto m = t.classify("A rare colourless gas.");
  CHECK(m.tag == AttributeTag::OPT);  // canonical order beats position
  CHECK(m.stem == "colour");          // longest stem within the tag
  CHECK(t.classify("Scarcely rare.").tag == AttributeTag::ABND);
  CHECK(t.classify("Unrare.").tag == AttributeTag::CHEM);  // stems start words
  CHECK_THROWS_AS(KeywordTagger::from_csv("tag,stem\nXYZ,foo\n"), DataError);
  CHECK_THROWS_AS(KeywordTagger::from_csv("a,b\n"), DataError);
}

TEST_CASE("subsets keep page order and partition the sentences") {
  std::vector<TaggedSentence> tagged = {
      {make_sentence(0, "s0"), AttributeTag::THERM, TagSource::Fallback},
      {make_sentence(1, "s1"), AttributeTag::CHEM, TagSource::Fallback},
      {make_sentence(2, "s2"), AttributeTag::THERM, TagSource::Fallback},
  };
  std::reverse(tagged.begin(), tagged.end());
  const auto subsets = build_attribute_subsets(tagged);
  CHECK(subsets[index_of(AttributeTag::THERM)] == "s0 s2");
  CHECK(subsets[index_of(AttributeTag::CHEM)] == "s1");

  for (auto& t : tagged) t.tag = AttributeTag::OPT;
  const auto one = build_attribute_subsets(tagged);
  CHECK(std::count_if(one.begin(), one.end(), [](const auto& s) { return !s.empty(); }) == 1);
}

TEST_CASE("He fixture: tag totality and word-count partition") {
  const auto& he = helium();
  const SentenceTagger tagger(KeywordTagger::builtin());
  const auto tagged = tag_sentences(he.sentences, tagger, 4);
  REQUIRE(tagged.size() == he.sentences.size());
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    CHECK(tagged[i].sentence == he.sentences[i]);
    CHECK(index_of(tagged[i].tag) < kTagCount);
    CHECK(tagged[i].source == TagSource::Fallback);
  }
  const auto subsets = build_attribute_subsets(tagged);
  std::size_t words = 0;
  for (const auto& s : subsets) {
    words += count_words(s);
    CHECK_FALSE(s.empty());  // the fixture exercises every tag
  }
  CHECK(words == count_words(he.page_text));

  // multiset partition, checked per tag against the tagged list
  for (AttributeTag t : kAllTags) {
    std::vector<Sentence> mine;
    for (const auto& ts : tagged)
      if (ts.tag == t) mine.push_back(ts.sentence);
    CHECK(join_sentences(mine) == subsets[index_of(t)]);
  }

  // pure function of the input
  CHECK(to_jsonl(tag_sentences(he.sentences, tagger, 1)) == to_jsonl(tagged));
}

TEST_CASE("jsonl round trip") {
  std::vector<TaggedSentence> tagged = {
      {make_sentence(0, "Alpha \"quoted\" text."), AttributeTag::ARF, TagSource::Llm},
      {make_sentence(1, "Beta."), AttributeTag::APPL, TagSource::Fallback},
  };
  const auto text = to_jsonl(tagged);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  const auto back = from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].sentence == tagged[0].sentence);
  CHECK(back[0].tag == AttributeTag::ARF);
  CHECK(back[0].source == TagSource::Llm);
  CHECK(back[1].tag == AttributeTag::APPL);
  CHECK_THROWS_AS(from_jsonl("{not json\n"), DataError);
}

TEST_CASE("remote tagging with retry and fallback") {
  const auto lexicon = KeywordTagger::builtin();
  const Sentence s = make_sentence(0, "Helium is the second most abundant element in the universe.");

  Scripted good({"THERM"});
  CHECK(SentenceTagger(lexicon, good, PromptSet::defaults()).tag(s).tag == AttributeTag::THERM);
  CHECK(good.last_prompt == PromptSet::defaults().classify_prompt);

  Scripted second({"hmm", "Abundance"});
  const auto r2 = SentenceTagger(lexicon, second, PromptSet::defaults()).tag(s);
  CHECK(r2.tag == AttributeTag::ABND);
  CHECK(r2.source == TagSource::Llm);
  CHECK(second.calls == 2);

  Scripted never({"hmm"});
  const auto r3 = SentenceTagger(lexicon, never, PromptSet::defaults()).tag(s);
  CHECK(r3.source == TagSource::Fallback);
  CHECK(r3.tag == AttributeTag::ABND);
  CHECK(never.calls == 2);

  Scripted down({"!throw"});
  CHECK(SentenceTagger(lexicon, down, PromptSet::defaults()).tag(s).source == TagSource::Fallback);
}

TEST_CASE("concurrent remote tagging keeps sentence order") {
  class ByText final : public TextGenerator {
   public:
    std::string complete(std::string_view, std::string_view text) override {
      return text.find("hot") != std::string_view::npos ? "THERM" : "OPT";
    }
  } llm;
  std::vector<Sentence> sentences;
  for (std::size_t i = 0; i < 40; ++i) sentences.push_back(make_sentence(i, i % 3 ? "It is shiny." : "It is hot."));
  const auto out = tag_sentences(sentences, SentenceTagger(KeywordTagger::builtin(), llm, PromptSet::defaults()), 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].sentence.index == i);
    CHECK(out[i].tag == (i % 3 ? AttributeTag::OPT : AttributeTag::THERM));
  }
}

TEST_CASE("llm client speaks json with a bearer token") {
  test::LocalServer srv;
  std::atomic<int> failures_left{1};
  std::string auth;
  nlohmann::json seen;
  srv.server().Post("/llm", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures_left-- > 0) {
      res.status = 502;
      return;
    }
    auth = req.get_header_value("Authorization");
    seen = nlohmann::json::parse(req.body);
    res.set_content(nlohmann::json{{"text", "CHEM"}}.dump(), "application/json");
  });
  srv.server().Post("/broken", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>", "text/html");
  });
  srv.start();
  auto transport = make_http_transport(std::chrono::seconds(5));
  RemoteLlmClient client(srv.base() + "/llm", "secret", *transport, {3, std::chrono::milliseconds(1)});
  CHECK(client.complete("P", "T") == "CHEM");
  CHECK(auth == "Bearer secret");
  CHECK(seen["prompt"] == "P");
  CHECK(seen["text"] == "T");

  RemoteLlmClient broken(srv.base() + "/broken", "", *transport, {1, std::chrono::milliseconds(1)});
  try {
    broken.complete("P", "T");
    FAIL("expected an error");
  } catch (const RemoteError& e) {
    CHECK_FALSE(e.retriable());
  }
}

TEST_CASE("prompts") {
  const auto p = PromptSet::defaults();
  CHECK_NOTHROW(p.validate());
  for (AttributeTag t : kAllTags) CHECK(p.classify_prompt.find(abbreviation(t)) != std::string::npos);
  PromptSet bad = p;
  bad.summarize_prompt = "Summarize.";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.classify_prompt = "MECH OPT";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("summary length targets") {
  std::string page;
  for (int i = 0; i < 100; ++i) page += "This sentence has exactly ten words in it right here. ";
  CHECK(count_words(page) == 1000);
  const auto s = summarize("Xx", page, 0.05);
  CHECK(s.target_words == 50);
  CHECK(s.word_count >= 35);
  CHECK(s.word_count <= 65);
  CHECK(s.within_tolerance());
  CHECK(s.source == TagSource::Fallback);

  const auto& he = helium();
  const auto hs = summarize(he.symbol, he.page_text, 0.2);
  CHECK(hs.word_count < count_words(he.page_text));
  CHECK(hs.word_count >= hs.target_words);
  CHECK(summarize(he.symbol, he.page_text, 0.2).text == hs.text);

  for (double bad : {0.0, 1.0, -0.1, 1.5}) CHECK_THROWS_AS(summarize("Xx", page, bad), ConfigError);

  Summary manual;
  manual.target_words = 100;
  manual.word_count = 130;
  CHECK(manual.within_tolerance());
  manual.word_count = 131;
  CHECK_FALSE(manual.within_tolerance());
}

TEST_CASE("remote summarizer substitutes the budget and falls back") {
  std::string page;
  for (int i = 0; i < 20; ++i) page += "Five words in this one. ";
  Scripted llm({"  A   short\nsummary. "});
  const PageSummarizer remote(llm, PromptSet::defaults());
  const auto s = remote.summarize("Xx", page, 0.1);
  CHECK(s.text == "A short summary.");
  CHECK(s.word_count == 3);
  CHECK(s.target_words == 10);
  CHECK(s.source == TagSource::Llm);
  CHECK(llm.last_prompt.find("about 10 words") != std::string::npos);
  CHECK(llm.last_prompt.find("0.1") != std::string::npos);

  Scripted down({"!throw"});
  const auto f = PageSummarizer(down, PromptSet::defaults()).summarize("Xx", page, 0.1);
  CHECK(f.source == TagSource::Fallback);
  CHECK(f.text == extractive_summary("Xx", page, 0.1).text);
}

TEST_CASE("local input composition") {
  CHECK(compose_local_input("A", "S", Placement::Front) == "S\n\nA");
  CHECK(compose_local_input("A", "S", Placement::End) == "A\n\nS");
  CHECK(compose_local_input("", "S", Placement::Front) == "S\n\n");
  CHECK(compose_local_input("A", "S", Placement::Front) != compose_local_input("A", "S", Placement::End));
  CHECK(compose_local_input("X", "X", Placement::Front) == compose_local_input("X", "X", Placement::End));
  CHECK(parse_placement("end") == Placement::End);
  CHECK_THROWS_AS(parse_placement("middle"), ConfigError);
}
