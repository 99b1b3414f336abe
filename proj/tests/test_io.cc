#include <doctest.h>

#include <functional>
#include <sstream>

#include "saslc/io.h"
#include "saslc/simulator.h"

using namespace saslc;
using namespace saslc::io;

namespace {

ConllCorpus conll(const std::string& text) {
  std::istringstream is(text);
  return read_conll(is, "mem");
}

CrowdDataset crowd(const std::string& text) {
  std::istringstream is(text);
  return read_crowd(is, "mem");
}

std::string crowd_text(const CrowdDataset& ds) {
  std::ostringstream os;
  write_crowd(os, ds);
  return os.str();
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("conll read and canonical write") {
  const auto c = conll("\n\nJohn\tB-PER\nruns\tO\n\n\n\nIBM\tB-ORG\n");
  REQUIRE(c.size() == 2);
  CHECK(c.tokens[0] == TokenSequence{"John", "runs"});
  CHECK(c.labels[1] == std::vector<std::string>{"B-ORG"});
  std::ostringstream os;
  write_conll(os, c);
  CHECK(os.str() == "John\tB-PER\nruns\tO\n\nIBM\tB-ORG\n");
  CHECK(conll(os.str()).labels == c.labels);
  CHECK(observed_labels(c) == std::vector<std::string>{"B-PER", "O", "B-ORG"});
}

TEST_CASE("conll column errors carry the line") {
  const auto msg = error_of([] { conll("a\tO\nb\tO\textra\n"); });
  CHECK(msg.find("mem:2:") == 0);
  CHECK(msg.find("'b\tO\textra'") != std::string::npos);
  CHECK_THROWS_AS(conll("only-token\n"), DataError);
  CHECK_THROWS_AS(conll("a\t\n"), DataError);
}

TEST_CASE("conll to dataset and back") {
  const auto c = conll("John\tB-PER\nSmith\tI-PER\n\nx\tO\n");
  const LabelScheme scheme({"O", "B-PER", "I-PER"}, SchemeKind::kBio);
  const auto ds = to_dataset(c, scheme);
  CHECK(ds.roster.empty());
  CHECK(*ds.instances[0].gold == LabelSequence{1, 2});
  std::vector<TokenSequence> xs;
  std::vector<LabelSequence> zs;
  for (const auto& inst : ds.instances) {
    xs.push_back(inst.x);
    zs.push_back(*inst.gold);
  }
  CHECK(from_sequences(xs, zs, scheme).labels == c.labels);
  const LabelScheme small({"O", "B-ORG", "I-ORG"}, SchemeKind::kBio);
  CHECK_THROWS_AS(to_dataset(c, small), DataError);
}

TEST_CASE("token files take the first column") {
  std::istringstream is("a\tO\tB\nb\n\nc x\n");
  const auto t = read_tokens(is, "mem");
  CHECK(t == std::vector<TokenSequence>{{"a", "b"}, {"c x"}});
}

TEST_CASE("crowd round trip") {
  const auto gold = sim::generate_gold_corpus(20, 3);
  sim::SimConfig cfg;
  cfg.annotators = 4;
  cfg.seed = 5;
  auto ds = sim::simulate(gold, cfg);
  ds.instances[3].annotations[1].reset();
  const std::string text = crowd_text(ds);
  const auto back = crowd(text);
  CHECK(back.roster == ds.roster);
  CHECK(back.scheme.labels() == ds.scheme.labels());
  CHECK(back.scheme.kind() == SchemeKind::kBio);
  CHECK(!back.instances[3].annotations[1]);
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    CHECK(back.instances[i].x == ds.instances[i].x);
    CHECK(back.instances[i].annotations == ds.instances[i].annotations);
  }
  CHECK(crowd_text(back) == text);
}

TEST_CASE("crowd headers and inference") {
  const auto ds = crowd("#annotators: a,b\nx\tB-PER\tO\ny\tI-PER\tO\n");
  CHECK(ds.scheme.kind() == SchemeKind::kBio);
  CHECK(ds.instances[0].annotations[0]->size() == 2);
  const auto raw = crowd("#labels: N,V\n#annotators: a\nx\tN\n");
  CHECK(raw.scheme.kind() == SchemeKind::kRaw);
  CHECK(crowd_text(raw).find("#labels: N,V\n") == 0);
}

TEST_CASE("crowd errors") {
  CHECK_THROWS_AS(crowd("x\tO\n"), DataError);
  CHECK(error_of([] { crowd("#annotators: a,b\nx\tO\n"); }).find("mem:2:") == 0);
  CHECK_THROWS_AS(crowd("#annotators: a\n#annotators: b\nx\tO\n"), DataError);
  CHECK_THROWS_AS(crowd("#frobnicate: 1\n#annotators: a\nx\tO\n"), DataError);
  CHECK_THROWS_AS(crowd("#labels: O,B-ORG\n#annotators: a\nx\tB-PER\n"), DataError);
  CHECK_THROWS_AS(crowd("#annotators: a,b\nx\tO\t_\ny\tO\tO\n"), DataError);
  const auto skip = crowd("#annotators: a,b\nx\tO\t_\ny\tB-PER\t_\n");
  CHECK(!skip.instances[0].annotations[1]);
  CHECK(skip.instances[0].num_present() == 1);
}

TEST_CASE("config parsing") {
  std::istringstream is("# comment\nem.max_iters = 7   # trailing\n\nvlse.t1 = 2.5\nvlse.lc_mode = normalized\n");
  const auto cfg = parse_config(is, "cfg");
  CHECK(cfg.em.max_iters == 7);
  CHECK(*cfg.em.vlse.t1 == 2.5);
  CHECK(cfg.em.vlse.mode == vlse::LcMode::kNormalized);

  const std::string canon = format_config(cfg);
  std::istringstream again(canon);
  CHECK(format_config(parse_config(again, "cfg")) == canon);
  CHECK(canon.find("em.max_iters = 7\n") == 0);
  CHECK(canon.find("seed") == std::string::npos);

  auto bad = [](const std::string& text) {
    std::istringstream s(text);
    parse_config(s, "cfg");
  };
  CHECK_THROWS_AS(bad("em.nope = 1\n"), DataError);
  CHECK_THROWS_AS(bad("em.max_iters = 1\nem.max_iters = 2\n"), DataError);
  CHECK_THROWS_AS(bad("em.max_iters\n"), DataError);
  CHECK_THROWS_AS(bad("em.max_iters = many\n"), DataError);
  CHECK_THROWS_AS(bad("sim.type_swap = 0.9\n"), DataError);
  CHECK_THROWS_AS(bad("vlse.cap = 0\n"), DataError);
  CHECK(error_of([&] { bad("\n\nem.nope = 1\n"); }).find("cfg:3:") == 0);
}
