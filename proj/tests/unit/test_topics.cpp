#include <doctest.h>

#include <numeric>

#include "fixtures.hpp"
#include "iir/topics.hpp"

using namespace iir;
using namespace iir::test;

namespace {

Corpus five_docs() {
  return make_corpus({{"d1", "a a b c"}, {"d2", "a b b d"}, {"d3", "e f e g"}, {"d4", "f g g e a"},
                      {"d5", "c d c d h"}});
}

}  // namespace

TEST_CASE("single topic is the normalized corpus counts") {
  const auto c = five_docs();
  const auto col = build_collection(c);
  const auto m = fit_topics(c, 1, 10, 3);
  for (std::size_t t = 0; t < col.probs.size(); ++t) {
    CHECK(m.topic_word[0][t] == doctest::Approx(col.probs[t]).epsilon(1e-9));
  }
  for (const auto& row : m.doc_topic) CHECK(row[0] == doctest::Approx(1.0));
}

TEST_CASE("EM log-likelihood never decreases") {
  const auto c = five_docs();
  const auto m = fit_topics(c, 3, 60, 7);
  REQUIRE(m.log_likelihood.size() == 60);
  for (std::size_t i = 1; i < m.log_likelihood.size(); ++i) {
    CHECK(m.log_likelihood[i] >= m.log_likelihood[i - 1] - 1e-9);
  }
  CHECK(topic_log_likelihood(c, m) == doctest::Approx(m.log_likelihood.back()).epsilon(1e-6));
}

TEST_CASE("topic rows are distributions and fitting is deterministic") {
  const auto c = five_docs();
  const auto a = fit_topics(c, 2, 20, 11), b = fit_topics(c, 2, 20, 11);
  CHECK(a.topic_word == b.topic_word);
  CHECK(a.doc_topic == b.doc_topic);
  for (const auto& row : a.topic_word) {
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (const auto& row : a.doc_topic) {
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("fit_topics validates arguments") {
  const auto c = five_docs();
  CHECK_THROWS_AS(fit_topics(c, 6, 10, 1), Error);
  CHECK_THROWS_AS(fit_topics(c, 0, 10, 1), Error);
  CHECK_THROWS_AS(fit_topics(c, 2, 0, 1), Error);
}

TEST_CASE("topic model JSON round trip") {
  const auto c = five_docs();
  const auto m = fit_topics(c, 2, 15, 2);
  const auto back = topics_from_json(topics_to_json(m, c), c);
  CHECK(back.K == 2);
  for (int z = 0; z < 2; ++z) {
    for (std::size_t t = 0; t < m.topic_word[z].size(); ++t) {
      CHECK(back.topic_word[z][t] == doctest::Approx(m.topic_word[z][t]));
    }
  }
  for (std::size_t d = 0; d < c.size(); ++d) {
    CHECK(back.doc_topic[d][0] == doctest::Approx(m.doc_topic[d][0]));
  }
  const auto top = m.top_terms(0, 3);
  CHECK(top.size() == 3);
  CHECK(m.topic_word[0][top[0]] >= m.topic_word[0][top[1]]);
}
