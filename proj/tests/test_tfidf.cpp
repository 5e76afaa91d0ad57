#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "ztc/errors.hpp"
#include "ztc/tfidf.hpp"
#include "ztc/vocab.hpp"

using namespace ztc;

namespace {

const std::vector<std::string> kFit = {
    "the nurse treats the patient",
    "the welder joins steel plates",
    "the nurse charts patient vitals",
    "steel beams and steel welds",
    "software developer writes code",
};

// Independent tf-idf cosine, computed with ordered maps and the documented
// weighting: tf = raw count, idf = ln(N/df) + 1.
double reference_score(const std::vector<std::string>& fit, const std::string& x,
                       const std::string& y) {
  std::map<std::string, size_t> df;
  for (const auto& text : fit) {
    std::map<std::string, bool> seen;
    for (const auto& tok : split_tokens(text)) seen[tok] = true;
    for (const auto& [tok, _] : seen) ++df[tok];
  }
  auto vec = [&](const std::string& text) {
    std::map<std::string, double> v;
    for (const auto& tok : split_tokens(text)) {
      auto it = df.find(tok);
      if (it == df.end()) continue;
      const double idf = std::log(static_cast<double>(fit.size()) /
                                  static_cast<double>(it->second)) +
                         1.0;
      v[tok] += idf;
    }
    return v;
  };
  const auto a = vec(x), b = vec(y);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, w] : a) na += w * w;
  for (const auto& [tok, w] : b) nb += w * w;
  for (const auto& [tok, w] : a) {
    auto it = b.find(tok);
    if (it != b.end()) dot += w * it->second;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("fit records document frequencies as idf") {
  TfidfModel m = tfidf_fit(kFit);
  CHECK(m.n_docs == 5);
  // "the" appears in 3 of 5 docs, "nurse" in 2, "code" in 1
  CHECK(m.idf.at("the") == doctest::Approx(std::log(5.0 / 3.0) + 1.0).epsilon(1e-15));
  CHECK(m.idf.at("nurse") == doctest::Approx(std::log(5.0 / 2.0) + 1.0).epsilon(1e-15));
  CHECK(m.idf.at("code") == doctest::Approx(std::log(5.0) + 1.0).epsilon(1e-15));
  // repeated within one doc still counts once for df
  CHECK(m.idf.at("steel") == doctest::Approx(std::log(5.0 / 2.0) + 1.0).epsilon(1e-15));
  CHECK(m.idf.count("missing") == 0);
}

TEST_CASE("identical texts score one, disjoint texts score zero") {
  TfidfModel m = tfidf_fit(kFit);
  CHECK(tfidf_score(m, "nurse charts patient vitals", "nurse charts patient vitals") ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tfidf_score(m, "nurse patient", "welder steel") == 0.0);
  // casing and punctuation are normalized away before comparison
  CHECK(tfidf_score(m, "Nurse, PATIENT!", "nurse patient") ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scores match an independent computation") {
  TfidfModel m = tfidf_fit(kFit);
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"the nurse treats the patient", "nurse charts patient vitals"},
      {"steel welds", "the welder joins steel plates"},
      {"software code review", "developer writes code"},
      {"the the the", "the nurse"},
      {"nurse steel code", "steel code nurse nurse"},
  };
  for (const auto& [x, y] : pairs) {
    CAPTURE(x);
    CHECK(tfidf_score(m, x, y) == doctest::Approx(reference_score(kFit, x, y)).epsilon(1e-12));
    CHECK(tfidf_score(m, x, y) == tfidf_score(m, y, x));  // symmetric
  }
}

TEST_CASE("term counts shift the weighting") {
  TfidfModel m = tfidf_fit(kFit);
  // doubling a shared term against a doc with one rare and one shared term
  const double once = tfidf_score(m, "nurse code", "nurse");
  const double twice = tfidf_score(m, "nurse nurse code", "nurse");
  CHECK(twice > once);
  CHECK(twice < 1.0);
}

TEST_CASE("out-of-vocabulary terms are ignored") {
  TfidfModel m = tfidf_fit(kFit);
  const double base = tfidf_score(m, "nurse patient", "nurse vitals");
  CHECK(tfidf_score(m, "nurse patient zzqx", "nurse qqzz vitals") ==
        doctest::Approx(base).epsilon(1e-12));
  // entirely unseen text has no in-vocabulary mass
  CHECK(tfidf_score(m, "zzqx qqzz", "nurse") == 0.0);
  CHECK(tfidf_score(m, "nurse", "zzqx") == 0.0);
  CHECK(tfidf_score(m, "", "nurse") == 0.0);
}

TEST_CASE("empty fit corpus is rejected") {
  CHECK_THROWS_AS(tfidf_fit({}), DataError);
}
