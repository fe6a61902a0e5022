#include <doctest.h>

#include "test_support.hpp"

#include "e2v/corpus.hpp"
#include "e2v/error.hpp"
#include "e2v/io.hpp"

// after Eigen: <resolv.h> defines _res
#include "http_server.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

using namespace e2v;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// whitespace as the C locale sees it, counted without the library
std::size_t words_oracle(const std::string& raw) {
  std::istringstream in(raw);
  std::string w;
  std::size_t n = 0;
  while (in >> w) ++n;
  return n;
}

}  // namespace

TEST_CASE("sha256 matches published digests") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("vec round trip keeps every bit") {
  Eigen::VectorXf v(5);
  v << 1.0f, -0.0f, 3.25e-7f, -1e30f, 0.1f;
  const std::string bytes = io::encode_vec(v);
  CHECK(bytes.size() == 4 + 5 * 4);
  CHECK(static_cast<unsigned char>(bytes[0]) == 5);
  const auto back = io::decode_vec(bytes);
  REQUIRE(back.size() == 5);
  CHECK(std::memcmp(back.data(), v.data(), 5 * sizeof(float)) == 0);
  CHECK_THROWS(io::decode_vec(bytes.substr(0, 10)));
}

TEST_CASE("csv quoting") {
  const auto rows = io::parse_csv("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\n,\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "x, y");
  CHECK(rows[1][1] == "say \"hi\"");
  CHECK(rows[2] == io::CsvRow{"", ""});
  CHECK(io::format_csv_row({"a,b", "c"}) == "\"a,b\",c\n");
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 2.31, 1e-300, 123456789.0}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.5) == "0.5");
}

TEST_CASE("utf8 validation points at the offending byte") {
  CHECK_FALSE(io::find_invalid_utf8("plain ascii").has_value());
  CHECK_FALSE(io::find_invalid_utf8("\xc3\xa5ngstr\xc3\xb6m").has_value());
  CHECK(io::find_invalid_utf8("ab\xff").value() == 2);
  CHECK(io::find_invalid_utf8("ab\xc3").value() == 2);
}

TEST_CASE("segmentation examples") {
  CHECK(segment_sentences("Gold is dense. It is yellow.").size() == 2);
  CHECK(segment_sentences("It melts at approx. 1064 \xc2\xb0" "C under pressure.").size() == 1);
  CHECK(segment_sentences("See e.g. Table 2 for more. Then stop.").size() == 2);
  CHECK(segment_sentences("Work by J. Smith shows it. Fine.").size() == 2);
  CHECK(segment_sentences("Is it inert? Mostly! Yes.").size() == 3);
  CHECK(segment_sentences("lower case. after a stop stays joined.").size() == 1);
  CHECK_THROWS_AS(segment_sentences("  \n\t "), DataError);

  const auto s = segment_sentences("One.  Two\nlines here.");
  REQUIRE(s.size() == 2);
  CHECK(s[0].text == "One.");
  CHECK(s[1].text == "Two lines here.");
  CHECK(s[1].index == 1);
  CHECK(s[1].word_count == 3);
}

TEST_CASE("segmentation is idempotent and covers every word") {
  const auto corpus = load_corpus(test::fixture_dir() / "corpus");
  for (const auto& rec : corpus) {
    CAPTURE(rec.symbol);
    const auto again = segment_sentences(join_sentences(rec.sentences));
    CHECK(again == rec.sentences);
    std::size_t sum = 0;
    for (const auto& s : rec.sentences) sum += s.word_count;
    CHECK(sum == words_oracle(rec.page_text));
    CHECK(sum == count_words(collapse_whitespace(rec.page_text)));
  }
}

TEST_CASE("fixture corpus loads in atomic-number order") {
  const auto corpus = load_corpus(test::fixture_dir() / "corpus");
  REQUIRE(corpus.size() == 8);
  CHECK(corpus.front().symbol == "He");
  CHECK(corpus.front().atomic_number == 2);
  CHECK(corpus.back().symbol == "Au");
  CHECK(corpus.back().atomic_number == 79);
  CHECK(std::is_sorted(corpus.begin(), corpus.end(),
                       [](const auto& a, const auto& b) { return a.atomic_number < b.atomic_number; }));
  std::vector<std::string> syms;
  for (const auto& r : corpus) syms.push_back(r.symbol);
  CHECK(syms == std::vector<std::string>{"He", "C", "Ar", "Ca", "Br", "Nb", "Sm", "Au"});
  CHECK(corpus[0].family == Family::NobleGas);
  CHECK(corpus[4].family == Family::Halogen);

  // same bytes, same records
  const auto again = load_corpus(test::fixture_dir() / "corpus");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(again[i].page_text == corpus[i].page_text);
    CHECK(again[i].sentences == corpus[i].sentences);
  }
}

TEST_CASE("corpus error cases") {
  test::TempDir dir("corpus");
  write(dir / "manifest.csv", "symbol,atomic_number,name,family\n");
  CHECK(load_corpus(dir.path()).empty());

  write(dir / "manifest.csv", "symbol,atomic_number,name,family\nXx,7,Unobtainium,halogen\n");
  try {
    load_corpus(dir.path());
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("Xx") != std::string::npos);
  }

  write(dir / "Xx.txt", "Valid start \xe2\x82 broken.");
  try {
    load_corpus(dir.path());
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("byte offset 12") != std::string::npos);
  }

  write(dir / "manifest.csv", "symbol,atomic_number,name,family\nXx,7,Unobtainium,gas giant\n");
  CHECK_THROWS_AS(load_corpus(dir.path()), DataError);
  write(dir / "manifest.csv", "sym,z\n");
  CHECK_THROWS_AS(load_corpus(dir.path()), DataError);
}

TEST_CASE("family labels round trip") {
  for (Family f : kAllFamilies) CHECK(parse_family(to_string(f)) == f);
  CHECK_THROWS_AS(parse_family("gas giant"), DataError);
}

TEST_CASE("html stripping") {
  CHECK(html_to_text("plain <b>text</b>") == "plain <b>text</b>");
  CHECK(html_to_text("<html><script>x=1</script><p>Gold &amp; silver</p></html>") == "Gold & silver");
}

TEST_CASE("fetch_page against a local server") {
  test::LocalServer srv;
  std::string last_path;
  srv.server().Get(R"(/wiki/(.*))", [&](const httplib::Request& req, httplib::Response& res) {
    last_path = req.path;
    if (req.matches[1] == "Unavailable") {
      res.status = 503;
      res.set_content("busy", "text/plain");
    } else if (req.matches[1] == "Empty") {
      res.status = 200;
    } else {
      res.set_content("<p>" + std::string(req.matches[1]) + " is a gas.</p>", "text/html");
    }
  });
  srv.start();
  auto transport = make_http_transport(std::chrono::seconds(5));
  const RetryPolicy quick{2, std::chrono::milliseconds(1)};
  const std::string tmpl = srv.base() + "/wiki/{name}";

  CHECK(expand_url_template("https://example/{name}", "Helium") == "https://example/Helium");
  CHECK_THROWS_AS(expand_url_template("https://example/", "Helium"), ConfigError);

  CHECK(fetch_page("Helium", tmpl, *transport, quick) == "Helium is a gas.");
  CHECK(last_path == "/wiki/Helium");

  try {
    fetch_page("Unavailable", tmpl, *transport, quick);
    FAIL("expected an error");
  } catch (const RemoteError& e) {
    CHECK(e.status() == 503);
    CHECK(e.retriable());
    CHECK(e.exit_code() == 4);
  }
  CHECK_THROWS_AS(fetch_page("Empty", tmpl, *transport, quick), DataError);
}

TEST_CASE("with_retries stops at the attempt budget") {
  int calls = 0;
  const RetryPolicy p{3, std::chrono::milliseconds(0)};
  CHECK_THROWS_AS(with_retries(p, [&]() -> int {
                    ++calls;
                    throw RemoteError("nope", 500, true);
                  }),
                  RemoteError);
  CHECK(calls == 3);
  calls = 0;
  CHECK_THROWS_AS(with_retries(p, [&]() -> int {
                    ++calls;
                    throw RemoteError("fatal", 400, false);
                  }),
                  RemoteError);
  CHECK(calls == 1);
  calls = 0;
  CHECK(with_retries(p, [&] {
          if (++calls < 3) throw RemoteError("flaky", 0, true);
          return 7;
        }) == 7);
}
