#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "iir/retrieval.hpp"
#include "iir/topics.hpp"

using namespace iir;
using namespace iir::test;

namespace {

QueryModel qm(std::vector<TermDistribution::Entry> e) { return {TermDistribution(std::move(e)), {}}; }

DocModel dm(std::vector<double> probs) { return {"d", std::move(probs)}; }

double total(const TermDistribution& d) {
  double s = 0.0;
  for (const auto& [t, p] : d.entries()) s += p;
  return s;
}

}  // namespace

TEST_CASE("score matches hand KL values") {
  const auto q = qm({{0, 0.5}, {1, 0.5}});
  const auto d = dm({0.25, 0.75});
  const double expected = -(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0));
  CHECK(score(q, {}, d, 0.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(-0.14384).epsilon(1e-4));

  const NegativeModel neg{TermDistribution({{0, 0.25}, {1, 0.75}}), {0, 1}};
  CHECK(score(q, neg, d, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("score is zero when the query equals the document") {
  const auto q = qm({{0, 0.2}, {1, 0.3}, {2, 0.5}});
  CHECK(score(q, {}, dm({0.2, 0.3, 0.5}), 0.0) == doctest::Approx(0.0));
}

TEST_CASE("score ignores beta when the negative model is empty") {
  const auto q = qm({{0, 0.6}, {2, 0.4}});
  const auto d = dm({0.1, 0.5, 0.4});
  const double s0 = score(q, {}, d, 0.0);
  for (double beta : {0.1, 0.5, 2.0}) CHECK(score(q, {}, d, beta) == s0);
}

TEST_CASE("score is uniquely maximized at the document model") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const auto d = dm({0.1, 0.2, 0.3, 0.4});
  const double best = score(qm({{0, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.4}}), {}, d, 0.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w(4);
    double s = 0.0;
    for (auto& x : w) s += (x = u(rng));
    std::vector<TermDistribution::Entry> e;
    for (TermId t = 0; t < 4; ++t) e.emplace_back(t, w[t] / s);
    CHECK(score(qm(e), {}, d, 0.0) < best);
  }
}

TEST_CASE("score rejects zero document probability") {
  CHECK_THROWS_AS(score(qm({{0, 1.0}}), {}, dm({0.0, 1.0}), 0.0), Error);
}

TEST_CASE("rank orders by score with id tie-break") {
  SUBCASE("single document") {
    const auto c = make_corpus({{"only", "a b"}});
    const auto col = build_collection(c);
    const Retriever r(c, col, 0.5);
    CHECK(r.rank(make_query_model(std::vector<std::string>{"a"}, c.vocab()), {}, 0.3).size() == 1);
  }
  SUBCASE("identical documents") {
    const auto c = make_corpus({{"z9", "a b"}, {"a1", "a b"}, {"m5", "a b"}});
    const auto col = build_collection(c);
    const Retriever r(c, col, 0.5);
    const auto list = r.rank(make_query_model(std::vector<std::string>{"a"}, c.vocab()), {}, 0.3);
    CHECK(c.doc(list.entries[0].doc).id == "a1");
    CHECK(c.doc(list.entries[1].doc).id == "m5");
    CHECK(c.doc(list.entries[2].doc).id == "z9");
  }
  SUBCASE("hand example") {
    const auto c = make_corpus({{"d2", "b b"}, {"d1", "a a"}});
    const auto col = build_collection(c);
    const Retriever r(c, col, 0.5);
    const auto list = r.rank(qm({{term(c, "a"), 1.0}}), {}, 0.0);
    CHECK(c.doc(list.entries[0].doc).id == "d1");
    // P(a|d1) = 0.5 + 0.5 * 0.5, P(a|d2) = 0.25.
    CHECK(list.entries[0].score == doctest::Approx(std::log(0.75)));
    CHECK(list.entries[1].score == doctest::Approx(std::log(0.25)));
  }
}

TEST_CASE("rank agrees with direct scoring and is a permutation") {
  const auto c = make_corpus({{"d1", "a b c a"}, {"d2", "c c d"}, {"d3", "e a d b"}, {"d4", "b b b"},
                              {"d5", "a e e c"}});
  const auto col = build_collection(c);
  const Retriever r(c, col, 0.4);
  const auto q = qm({{term(c, "a"), 0.5}, {term(c, "c"), 0.3}, {term(c, "e"), 0.2}});
  const auto neg = update_negative(update_negative({}, term(c, "b")), term(c, "d"));
  const auto list = r.rank(q, neg, 0.7);
  std::set<DocIndex> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = list.entries[i];
    seen.insert(e.doc);
    CHECK(e.score == doctest::Approx(score(q, neg, r.doc_model(e.doc), 0.7)).epsilon(1e-12));
    if (i) CHECK(list.entries[i - 1].score >= e.score);
  }
  CHECK(seen.size() == c.size());
}

TEST_CASE("make_query_model drops unknown tokens") {
  const auto c = make_corpus({{"d1", "a b"}});
  const auto q = make_query_model(std::vector<std::string>{"a", "zzz", "a", "b"}, c.vocab());
  CHECK(q.probs.prob(term(c, "a")) == doctest::Approx(2.0 / 3.0));
  CHECK(q.key_terms == std::set<TermId>{term(c, "a"), term(c, "b")});
  CHECK_THROWS_AS(make_query_model(std::vector<std::string>{"zzz"}, c.vocab()), Error);
}

TEST_CASE("expand_query contracts") {
  const auto c = make_corpus({{"d1", "a a b"}, {"d2", "c d"}});
  const auto col = build_collection(c);
  const TermId a = term(c, "a"), b = term(c, "b"), cc = term(c, "c");
  const QueryModel q{TermDistribution({{cc, 1.0}}), {cc}};
  const Document* fb[] = {&c.doc(0)};

  SUBCASE("alpha zero is the identity") {
    const auto out = expand_query(q, fb, col, {0.0, 0.5, 0.2, 30});
    CHECK(out.probs.entries() == q.probs.entries());
  }
  SUBCASE("no feedback documents is a no-op") {
    const auto out = expand_query(q, std::span<const Document* const>{}, col, {});
    CHECK(out.probs.entries() == q.probs.entries());
  }
  SUBCASE("no background and no regularization gives the MLE") {
    const auto out = expand_query(q, fb, col, {1.0, 0.0, 0.0, 5});
    CHECK(out.probs.prob(a) == doctest::Approx(2.0 / 3.0));
    CHECK(out.probs.prob(b) == doctest::Approx(1.0 / 3.0));
    CHECK(out.key_terms == q.key_terms);
  }
  SUBCASE("results are distributions") {
    const auto out = expand_query(q, fb, col, {});
    CHECK(total(out.probs) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("expand_query EM matches a brute-force fixed point") {
  // With background mixing the EM fixed point satisfies
  // theta(t) proportional to sum_d c(t,d) * r(t), r = (1-l) theta / ((1-l) theta + l P(t|C)).
  const auto c = make_corpus({{"d1", "a a b c"}, {"d2", "a d d b"}, {"d3", "e e e e"}});
  const auto col = build_collection(c);
  const Document* fb[] = {&c.doc(0), &c.doc(1)};
  const double lf = 0.5;
  const auto out = expand_query({TermDistribution({{term(c, "e"), 1.0}}), {}}, fb, col, {1.0, lf, 0.0, 500});
  std::vector<double> counts(col.probs.size(), 0.0);
  for (const auto* d : fb)
    for (const auto& [t, n] : d->counts) counts[t] += n;
  std::vector<double> next(counts.size(), 0.0);
  double z = 0.0;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    const double th = out.probs.prob(static_cast<TermId>(t));
    if (counts[t] == 0) continue;
    const double r = (1 - lf) * th / ((1 - lf) * th + lf * col.probs[t]);
    z += (next[t] = counts[t] * r);
  }
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t] == 0) continue;
    CHECK(out.probs.prob(static_cast<TermId>(t)) == doctest::Approx(next[t] / z).epsilon(1e-6));
  }
}

TEST_CASE("add_key_term, update_negative and interpolate_topic") {
  const QueryModel q{TermDistribution({{0, 1.0}}), {0}};
  const auto added = add_key_term(q, 1, 0.5);
  CHECK(added.probs.prob(0) == doctest::Approx(0.5));
  CHECK(added.probs.prob(1) == doctest::Approx(0.5));
  CHECK(added.key_terms == std::set<TermId>{0, 1});
  CHECK(add_key_term(added, 1, 0.3).key_terms == added.key_terms);
  const auto tiny = add_key_term(q, 1, 1e-12);
  CHECK(tiny.probs.prob(0) == doctest::Approx(1.0));
  CHECK(tiny.key_terms.count(1) == 1);

  NegativeModel neg;
  CHECK(neg.empty());
  neg = update_negative(neg, 7);
  CHECK(neg.probs.prob(7) == doctest::Approx(1.0));
  neg = update_negative(neg, 8);
  CHECK(neg.probs.prob(7) == doctest::Approx(0.5));
  CHECK(neg.probs.prob(8) == doctest::Approx(0.5));
  const auto again = update_negative(neg, 7);
  CHECK(again.probs.entries() == neg.probs.entries());
  CHECK(again.terms == neg.terms);

  const auto topic = TermDistribution({{1, 1.0}});
  CHECK(interpolate_topic(q, topic, 0.0).probs.entries() == q.probs.entries());
  CHECK(interpolate_topic(q, topic, 1.0).probs.entries() == topic.entries());
  const auto mixed = interpolate_topic(q, topic, 0.3);
  CHECK(mixed.probs.prob(0) == doctest::Approx(0.7));
  CHECK(mixed.probs.prob(1) == doctest::Approx(0.3));
  CHECK(total(mixed.probs) == doctest::Approx(1.0));
}
