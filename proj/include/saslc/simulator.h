// Synthetic crowds: corrupt gold entity spans so that each simulated
// annotator hits a target exact-match entity precision.

#ifndef SASLC_SIMULATOR_H_
#define SASLC_SIMULATOR_H_

#include <cstdint>
#include <vector>

#include "saslc/types.h"

namespace saslc::sim {

// Weights of the four corruption operations applied to an entity that does
// not survive intact. Everything but a drop leaves one false positive.
struct CorruptionMix {
  double type_swap = 0.4;
  double boundary_shift = 0.3;
  double entity_drop = 0.2;
  double spurious = 0.1;  // entity removed, one-token entity placed on an O token

  void validate() const;
};

struct SimConfig {
  std::size_t annotators = 5;
  double target_p = 0.5;
  double sigma_p = 0.1;
  CorruptionMix mix;
  std::uint64_t seed = 0;
};

struct GoldStats {
  std::size_t entities = 0;
  std::size_t outside_tokens = 0;
};

GoldStats gold_stats(const CrowdDataset& gold);

// Survival probability q with q / (q + (1 - q)(1 - drop)) = target_p, found
// by bisection. Throws std::invalid_argument if the target is unreachable.
double calibrate_q(double target_p, const CorruptionMix& mix, const GoldStats& stats);

// Per-annotator precisions clamp(c + sigma * eps_k, 0.05, 1) with c chosen
// so their mean equals target_p.
std::vector<double> annotator_precisions(const SimConfig& cfg);

struct AnnotatorSummary {
  std::string id;
  double target_p = 0.0;
  double survival_q = 0.0;
  double achieved_precision = 0.0;
  std::size_t corrupted = 0;
  std::size_t predicted = 0;
};

struct SimReport {
  std::vector<AnnotatorSummary> annotators;
  double mean_precision() const;
};

// Every instance must carry BIO-valid gold. The returned dataset keeps the
// gold, uses roster A1..AK and has every annotator label every instance.
CrowdDataset simulate(const CrowdDataset& gold, const SimConfig& cfg, SimReport* report = nullptr);

// Gold-only corpus of templated news-style sentences over PER/ORG/LOC with
// repeated mentions; roster empty.
CrowdDataset generate_gold_corpus(std::size_t sentences, std::uint64_t seed);

}  // namespace saslc::sim

#endif  // SASLC_SIMULATOR_H_
