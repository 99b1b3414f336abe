#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.h"
#include "saslc/crf.h"

using namespace saslc;
using namespace saslc::crf;

namespace {

LabelScheme raw_scheme(std::size_t m) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < m; ++i) labels.push_back("L" + std::to_string(i));
  return LabelScheme(labels, SchemeKind::kRaw);
}

TokenSequence random_tokens(Rng& rng, std::size_t len) {
  static const char* vocab[] = {"the", "Paris", "bank", "42", "Smith", "said", "of", "IBM"};
  TokenSequence x;
  for (std::size_t t = 0; t < len; ++t) x.emplace_back(vocab[rng.index(8)]);
  return x;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("template names parse and print") {
  for (const char* n : {"bias", "token-identity", "token-lowercase", "prefix-3", "suffix-2", "is-capitalized",
                        "is-digit", "previous-token-1", "next-token-2", "label-bigram", "label-bigram-token"}) {
    CHECK(FeatureTemplate::parse(n).name() == n);
  }
  CHECK(FeatureTemplate::parse("prefix").name() == "prefix-3");
  CHECK_THROWS_AS(FeatureTemplate::parse("prefix-0"), std::invalid_argument);
  CHECK_THROWS_AS(FeatureTemplate::parse("bias-2"), std::invalid_argument);
  CHECK_THROWS_AS(FeatureTemplate::parse("nonsense"), std::invalid_argument);
  CHECK(parse_templates(format_templates(default_templates())) == default_templates());
}

TEST_CASE("uniform potentials give log M^L") {
  SequencePotentials one(1, 3, false);
  CHECK(log_partition(one) == doctest::Approx(std::log(3.0)));
  SequencePotentials two(2, 3, false);
  CHECK(log_partition(two) == doctest::Approx(std::log(9.0)));
  const auto mg = marginals(two);
  for (double v : mg.unary) CHECK(v == doctest::Approx(1.0 / 3.0));
  CHECK(viterbi(SequencePotentials(4, 3, false)) == LabelSequence{0, 0, 0, 0});
}

TEST_CASE("log partition, marginals and viterbi match enumeration") {
  Rng rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t len = 1 + rng.index(6), m = 2 + rng.index(3);
    const bool pd = rep % 2 == 1;
    const auto pot = oracle::random_potentials(rng, len, m, pd);
    CHECK(rel_err(log_partition(pot), oracle::log_z(pot)) < 1e-10);
    const auto mg = marginals(pot);
    const auto bm = oracle::marginals(pot);
    for (std::size_t i = 0; i < bm.node.size(); ++i) CHECK(std::abs(mg.unary[i] - bm.node[i]) < 1e-9);
    for (std::size_t i = 0; i < bm.edge.size(); ++i) CHECK(std::abs(mg.pair[i] - bm.edge[i]) < 1e-9);
    const auto v = viterbi(pot);
    CHECK(v == oracle::viterbi(pot));
    CHECK(sequence_score(pot, v) == oracle::max_score(pot));
  }
}

TEST_CASE("pairwise marginals sum to the unary marginals") {
  Rng rng(3);
  const auto pot = oracle::random_potentials(rng, 5, 4, false);
  const auto mg = marginals(pot);
  for (std::size_t t = 1; t < 5; ++t) {
    for (Label a = 0; a < 4; ++a) {
      double out = 0.0, in = 0.0;
      for (Label b = 0; b < 4; ++b) {
        out += mg.edge(t, a, b);
        in += mg.edge(t, b, a);
      }
      CHECK(out == doctest::Approx(mg.node(t - 1, a)));
      CHECK(in == doctest::Approx(mg.node(t, a)));
    }
  }
}

TEST_CASE("log partition bounds every score and survives long sequences") {
  Rng rng(9);
  const auto pot = oracle::random_potentials(rng, 4, 3, false);
  const double lz = log_partition(pot);
  oracle::for_each_sequence(4, 3, [&](const LabelSequence& z) { CHECK(sequence_score(pot, z) <= lz); });

  const auto big = oracle::random_potentials(rng, 400, 5, false, 50.0);
  CHECK(std::isfinite(log_partition(big)));
  const auto mg = marginals(big);
  for (std::size_t t = 0; t < 400; t += 37) {
    double s = 0.0;
    for (Label y = 0; y < 5; ++y) s += mg.node(t, y);
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("dominant path wins viterbi") {
  SequencePotentials pot(4, 3, true);
  const LabelSequence path = {2, 0, 1, 1};
  pot.unary(0, 2) = 100.0;
  for (std::size_t t = 1; t < 4; ++t) pot.pair(t, path[t - 1], path[t]) = 100.0;
  CHECK(viterbi(pot) == path);
}

TEST_CASE("shift_unary shifts every score by L c") {
  Rng rng(4);
  auto pot = oracle::random_potentials(rng, 3, 3, false);
  const double before = log_partition(pot);
  pot.shift_unary(0.7);
  CHECK(log_partition(pot) == doctest::Approx(before + 2.1));
}

TEST_CASE("zero weights give zero potentials; single template has one feature per label") {
  CrfModel model(raw_scheme(3), {FeatureTemplate::parse("token-identity")});
  const std::vector<TokenSequence> xs = {{"a", "b"}, {"c"}};
  model.index_features(xs);
  auto pot = extract_features(model, {"a", "b"});
  for (std::size_t t = 0; t < 2; ++t)
    for (Label y = 0; y < 3; ++y) CHECK(pot.unary(t, y) == 0.0);
  auto& w = model.mutable_weights();
  for (std::size_t d = 0; d < w.size(); ++d) w[d] = 1.0 + static_cast<double>(d);
  pot = extract_features(model, {"c"});
  for (Label y = 0; y < 3; ++y) CHECK(pot.unary(0, y) == w[*model.find_unary("w=c", y)]);
  CHECK(model.feature_name(*model.find_unary("w=c", 1)) == "U|L1|w=c");
  // Unseen tokens contribute nothing.
  pot = extract_features(model, {"zzz"});
  for (Label y = 0; y < 3; ++y) CHECK(pot.unary(0, y) == 0.0);
}

TEST_CASE("score equals a direct sum over active features") {
  CrfModel model(raw_scheme(3), default_templates());
  const TokenSequence x = {"Mr", "Smith", "42"};
  model.index_features(std::vector<TokenSequence>{x});
  Rng rng(2);
  for (double& v : model.mutable_weights()) v = rng.normal();
  const LabelSequence z = {1, 2, 0};
  const auto pot = extract_features(model, x);
  // Hand-listed observation strings for the default templates.
  const std::vector<std::vector<std::string>> obs = {
      {"bias", "w=Mr", "lw=mr", "p3=Mr", "s3=Mr", "cap", "w[-1]=<BOS>", "w[+1]=Smith"},
      {"bias", "w=Smith", "lw=smith", "p3=Smi", "s3=ith", "cap", "w[-1]=Mr", "w[+1]=42"},
      {"bias", "w=42", "lw=42", "p3=42", "s3=42", "digit", "w[-1]=Smith", "w[+1]=<EOS>"}};
  double expect = 0.0;
  const auto& layout = model.layout();
  for (std::size_t t = 0; t < 3; ++t) {
    for (const auto& o : obs[t]) expect += model.weights()[*model.find_unary(o, z[t])];
    if (t > 0) expect += model.weights()[layout.bigram_weight(z[t - 1], z[t])];
  }
  CHECK(sequence_score(pot, z) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("weighted nll special cases") {
  CrfModel model(raw_scheme(3), {FeatureTemplate::parse("token-identity"), FeatureTemplate::parse("label-bigram")});
  const TokenSequence x = {"a", "b", "c", "a"};
  model.index_features(std::vector<TokenSequence>{x});
  std::vector<WeightedSequence> data = {{&x, {0, 1, 2, 0}, 1.0}};
  auto r = weighted_nll_and_gradient(model, data, 1.0);
  CHECK(r.value == doctest::Approx(4.0 * std::log(3.0)));

  Rng rng(1);
  for (double& v : model.mutable_weights()) v = rng.normal();
  data[0].weight = 0.0;
  r = weighted_nll_and_gradient(model, data, 2.0);
  double sq = 0.0;
  for (double v : model.weights()) sq += v * v;
  CHECK(r.value == doctest::Approx(sq));
  for (std::size_t d = 0; d < r.gradient.size(); ++d) CHECK(r.gradient[d] == doctest::Approx(2.0 * model.weights()[d]));

  data[0].weight = -1.0;
  CHECK_THROWS_AS(weighted_nll_and_gradient(model, data, 1.0), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    auto templates = default_templates();
    if (rep % 3 == 2) templates.push_back(FeatureTemplate::parse("label-bigram-token"));
    CrfModel model(raw_scheme(2 + rng.index(3)), templates);
    std::vector<TokenSequence> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(random_tokens(rng, 1 + rng.index(5)));
    model.index_features(xs);
    std::vector<WeightedSequence> data;
    for (const auto& x : xs) {
      for (int c = 0; c < 2; ++c) {
        LabelSequence z(x.size());
        for (auto& l : z) l = static_cast<Label>(rng.index(model.num_labels()));
        data.push_back({&x, z, rng.uniform()});
      }
    }
    for (double& v : model.mutable_weights()) v = 0.5 * rng.normal();
    const auto r = weighted_nll_and_gradient(model, data, 0.3);
    const auto fd = oracle::numeric_gradient(
        [&](const std::vector<double>& w) {
          CrfModel m = model;
          m.mutable_weights() = w;
          return weighted_nll_and_gradient(m, data, 0.3).value;
        },
        std::vector<double>(model.weights().begin(), model.weights().end()));
    double num = 0.0, den = 0.0;
    for (std::size_t d = 0; d < fd.size(); ++d) {
      num += (fd[d] - r.gradient[d]) * (fd[d] - r.gradient[d]);
      den += fd[d] * fd[d];
    }
    CHECK(std::sqrt(num) / std::max(1e-12, std::sqrt(den)) < 1e-6);
  }
}

TEST_CASE("objective is identical across thread counts") {
  Rng rng(21);
  CrfModel model(raw_scheme(3), default_templates());
  std::vector<TokenSequence> xs;
  for (int i = 0; i < 60; ++i) xs.push_back(random_tokens(rng, 2 + rng.index(6)));
  model.index_features(xs);
  std::vector<WeightedSequence> data;
  for (const auto& x : xs) {
    LabelSequence z(x.size());
    for (auto& l : z) l = static_cast<Label>(rng.index(3));
    data.push_back({&x, z, 1.0});
  }
  for (double& v : model.mutable_weights()) v = rng.normal();
  const auto a = CrfObjective::from_weighted(model, data, 1.0, 1);
  const auto b = CrfObjective::from_weighted(model, data, 1.0, 7);
  std::vector<double> ga(a.dimension()), gb(b.dimension());
  CHECK(a.evaluate(model.weights(), ga) == b.evaluate(model.weights(), gb));
  CHECK(ga == gb);
}

TEST_CASE("separable data is fit exactly; huge lambda shrinks weights") {
  const auto scheme = raw_scheme(3);
  const std::vector<TokenSequence> xs = {{"x0", "x1", "x2"}, {"x2", "x2", "x0"}, {"x1", "x0"}};
  const std::vector<LabelSequence> zs = {{0, 1, 2}, {2, 2, 0}, {1, 0}};
  OptimizeOptions opts;
  opts.lambda = 0.1;
  OptimizeReport rep;
  const auto model = train_supervised(scheme, {FeatureTemplate::parse("token-identity")}, xs, zs, opts, &rep);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(predict(model, xs[i]) == zs[i]);
  CHECK(rep.value <= rep.initial_value);
  for (std::size_t i = 1; i < rep.values.size(); ++i) CHECK(rep.values[i] <= rep.values[i - 1]);

  opts.lambda = 1e6;
  const auto tiny = train_supervised(scheme, default_templates(), xs, zs, opts);
  double norm = 0.0;
  for (double v : tiny.weights()) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("model save/load round-trips") {
  const auto scheme = LabelScheme({"O", "B-PER", "I-PER"}, SchemeKind::kBio);
  auto templates = default_templates();
  templates.push_back(FeatureTemplate::parse("label-bigram-token"));
  const std::vector<TokenSequence> xs = {{"John", "Smith", "ran"}, {"he", "ran"}};
  const std::vector<LabelSequence> zs = {{1, 2, 0}, {0, 0}};
  OptimizeOptions opts;
  opts.max_iters = 20;
  const auto model = train_supervised(scheme, templates, xs, zs, opts);
  std::ostringstream os;
  model.save(os);
  std::istringstream is(os.str());
  const auto back = CrfModel::load(is);
  CHECK(back.scheme() == model.scheme());
  CHECK(back.templates() == model.templates());
  REQUIRE(back.num_features() == model.num_features());
  for (std::size_t d = 0; d < model.num_features(); ++d) CHECK(back.weights()[d] == model.weights()[d]);
  std::ostringstream again;
  back.save(again);
  CHECK(again.str() == os.str());

  std::istringstream bad("saslc-crf\t2\n");
  CHECK_THROWS_AS(CrfModel::load(bad), DataError);
  std::istringstream trunc(os.str().substr(0, os.str().size() / 2));
  CHECK_THROWS_AS(CrfModel::load(trunc), DataError);
}

TEST_CASE("reindexing keeps trained weights") {
  CrfModel model(raw_scheme(2), {FeatureTemplate::parse("token-identity"), FeatureTemplate::parse("label-bigram")});
  model.index_features(std::vector<TokenSequence>{{"a"}});
  model.mutable_weights()[*model.find_unary("w=a", 1)] = 3.0;
  model.mutable_weights()[model.layout().bigram_weight(1, 0)] = -2.0;
  model.index_features(std::vector<TokenSequence>{{"b", "c"}});
  CHECK(model.weights()[*model.find_unary("w=a", 1)] == 3.0);
  CHECK(model.weights()[model.layout().bigram_weight(1, 0)] == -2.0);
  CHECK(model.weights()[*model.find_unary("w=c", 0)] == 0.0);
}
