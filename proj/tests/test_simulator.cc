#include <doctest.h>

#include <sstream>

#include "saslc/evaluation.h"
#include "saslc/io.h"
#include "saslc/simulator.h"

using namespace saslc;
using namespace saslc::sim;

namespace {

bool bio_valid(const LabelScheme& s, const LabelSequence& z) {
  for (std::size_t t = 0; t < z.size(); ++t)
    if (t == 0 ? !s.start_allowed(z[t]) : !s.transition_allowed(z[t - 1], z[t])) return false;
  return true;
}

std::string crowd_text(const CrowdDataset& ds) {
  std::ostringstream os;
  io::write_crowd(os, ds);
  return os.str();
}

}  // namespace

TEST_CASE("calibrate_q examples") {
  const GoldStats stats{100, 500};
  CorruptionMix mix;
  CHECK(calibrate_q(1.0, mix, stats) == 1.0);
  CorruptionMix swap{1.0, 0.0, 0.0, 0.0};
  CHECK(calibrate_q(0.5, swap, stats) == doctest::Approx(0.5).epsilon(1e-9));
  CorruptionMix drop{0.0, 0.0, 1.0, 0.0};
  CHECK_THROWS_AS(calibrate_q(0.9, drop, stats), std::invalid_argument);
  CHECK(calibrate_q(1.0, drop, stats) == 1.0);
  CHECK_THROWS_AS(calibrate_q(0.0, mix, stats), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_q(0.5, mix, GoldStats{0, 10}), std::invalid_argument);
  // Default mix: q / (q + 0.8 (1 - q)) = p.
  const double q = calibrate_q(0.7, mix, stats);
  CHECK(std::abs(q / (q + 0.8 * (1.0 - q)) - 0.7) < 1e-3);
  CorruptionMix bad{0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("per-annotator precisions average to the target") {
  SimConfig cfg;
  cfg.annotators = 7;
  cfg.target_p = 0.3;
  cfg.seed = 9;
  const auto p = annotator_precisions(cfg);
  double mean = 0.0;
  for (double v : p) {
    CHECK(v >= 0.05);
    CHECK(v <= 1.0);
    mean += v / 7.0;
  }
  CHECK(mean == doctest::Approx(0.3).epsilon(1e-9));
  cfg.target_p = 0.98;
  for (double v : annotator_precisions(cfg)) CHECK(v <= 1.0);
  cfg.sigma_p = 0.0;
  for (double v : annotator_precisions(cfg)) CHECK(v == 0.98);
}

TEST_CASE("perfect target leaves gold untouched") {
  const auto gold = generate_gold_corpus(50, 2);
  SimConfig cfg;
  cfg.annotators = 3;
  cfg.target_p = 1.0;
  cfg.sigma_p = 0.0;
  const auto crowd = simulate(gold, cfg);
  CHECK(crowd.roster == std::vector<std::string>{"A1", "A2", "A3"});
  for (const auto& inst : crowd.instances)
    for (const auto& a : inst.annotations) CHECK(*a == *inst.gold);
}

TEST_CASE("achieved precision tracks the target") {
  const auto gold = generate_gold_corpus(400, 3);
  CHECK(gold_stats(gold).entities >= 200);
  for (double p : {0.3, 0.5, 0.7, 0.9}) {
    SimConfig cfg;
    cfg.annotators = 5;
    cfg.target_p = p;
    cfg.seed = 4;
    SimReport rep;
    const auto crowd = simulate(gold, cfg, &rep);
    CHECK(std::abs(rep.mean_precision() - p) < 0.05);
    for (const auto& inst : crowd.instances)
      for (const auto& a : inst.annotations) CHECK(bio_valid(crowd.scheme, *a));
  }
}

TEST_CASE("same seed gives identical crowds") {
  const auto gold = generate_gold_corpus(40, 5);
  SimConfig cfg;
  cfg.seed = 77;
  CHECK(crowd_text(simulate(gold, cfg)) == crowd_text(simulate(gold, cfg)));
  auto other = cfg;
  other.seed = 78;
  CHECK(crowd_text(simulate(gold, cfg)) != crowd_text(simulate(gold, other)));
}

TEST_CASE("higher targets never corrupt more entities") {
  const auto gold = generate_gold_corpus(150, 6);
  std::vector<std::size_t> prev;
  for (double p : {0.2, 0.35, 0.5, 0.65, 0.8, 0.95, 1.0}) {
    SimConfig cfg;
    cfg.annotators = 4;
    cfg.target_p = p;
    cfg.seed = 12;
    SimReport rep;
    simulate(gold, cfg, &rep);
    std::vector<std::size_t> cur;
    for (const auto& a : rep.annotators) cur.push_back(a.corrupted);
    if (!prev.empty()) {
      for (std::size_t k = 0; k < cur.size(); ++k) CHECK(cur[k] <= prev[k]);
    }
    prev = cur;
  }
}

TEST_CASE("simulate input errors") {
  auto gold = generate_gold_corpus(5, 1);
  gold.instances[2].gold.reset();
  CHECK_THROWS_AS(simulate(gold, SimConfig{}), DataError);
  auto invalid = generate_gold_corpus(5, 1);
  (*invalid.instances[0].gold)[0] = invalid.scheme.index("I-PER");
  CHECK_THROWS_AS(simulate(invalid, SimConfig{}), DataError);
}

TEST_CASE("generated corpus has repeated mentions and valid gold") {
  const auto gold = generate_gold_corpus(200, 8);
  CHECK(gold.instances.size() == 200);
  std::size_t repeats = 0;
  for (const auto& inst : gold.instances) {
    CHECK(bio_valid(gold.scheme, *inst.gold));
    for (std::size_t j = 0; j < inst.length(); ++j)
      for (std::size_t i = 0; i < j; ++i)
        if (inst.x[i] == inst.x[j] && gold.scheme.prefix((*inst.gold)[j]) != BioPrefix::kOutside) {
          ++repeats;
          break;
        }
  }
  CHECK(repeats > 20);
}
