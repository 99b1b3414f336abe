// Data shared between the unit tests and the acceptance checks.

#ifndef SASLC_TESTS_FIXTURES_H_
#define SASLC_TESTS_FIXTURES_H_

#include <string>
#include <vector>

#include "saslc/types.h"
#include "saslc/util.h"

namespace fixture {

using saslc::Label;
using saslc::LabelSequence;

inline const saslc::LabelScheme& per_org() {
  static const saslc::LabelScheme s({"O", "B-PER", "I-PER", "B-ORG", "I-ORG"}, saslc::SchemeKind::kBio);
  return s;
}

inline LabelSequence seq(std::initializer_list<const char*> names) {
  LabelSequence out;
  for (const char* n : names) out.push_back(per_org().index(n));
  return out;
}

struct PrfCase {
  const char* name;
  std::vector<LabelSequence> pred, gold;
  std::size_t tp, fp, fn;
  double precision, recall, f1;
};

// Hand-counted exact-match scores over the per_org() scheme.
inline std::vector<PrfCase> prf_table() {
  using S = std::vector<LabelSequence>;
  return {
      {"identical", S{seq({"B-PER", "I-PER", "O", "B-ORG"})}, S{seq({"B-PER", "I-PER", "O", "B-ORG"})}, 2, 0, 0,
       1.0, 1.0, 1.0},
      {"one of two", S{seq({"B-PER", "O", "B-ORG", "O"})}, S{seq({"B-PER", "O", "O", "B-ORG"})}, 1, 1, 1, 0.5, 0.5,
       0.5},
      {"right boundary", S{seq({"B-PER", "I-PER", "I-PER"})}, S{seq({"B-PER", "I-PER", "O"})}, 0, 1, 1, 0.0, 0.0,
       0.0},
      {"left boundary", S{seq({"O", "B-ORG", "O"})}, S{seq({"B-ORG", "I-ORG", "O"})}, 0, 1, 1, 0.0, 0.0, 0.0},
      {"type error", S{seq({"B-ORG", "I-ORG"})}, S{seq({"B-PER", "I-PER"})}, 0, 1, 1, 0.0, 0.0, 0.0},
      {"no predictions", S{seq({"O", "O", "O"})}, S{seq({"B-PER", "O", "B-ORG"})}, 0, 0, 2, 0.0, 0.0, 0.0},
      {"spurious only", S{seq({"B-PER", "O"})}, S{seq({"O", "O"})}, 0, 1, 0, 0.0, 0.0, 0.0},
      {"empty", S{seq({"O"})}, S{seq({"O"})}, 0, 0, 0, 0.0, 0.0, 0.0},
      {"micro average", S{seq({"B-PER", "O", "B-ORG"}), seq({"B-ORG", "I-ORG", "O"})},
       S{seq({"B-PER", "O", "B-ORG"}), seq({"B-ORG", "B-ORG", "B-PER"})}, 2, 1, 3, 2.0 / 3.0, 2.0 / 5.0, 0.5},
      {"orphan repaired", S{seq({"O", "I-PER", "I-PER"})}, S{seq({"O", "B-PER", "I-PER"})}, 1, 0, 0, 1.0, 1.0,
       1.0},
  };
}

// Token-level crowd over four RAW labels. Annotator k copies the truth with
// probability acc[k] and otherwise answers uniformly; a negative accuracy
// makes the annotator adversarial (always truth + 1 mod 4).
inline saslc::CrowdDataset planted_crowd(const std::vector<double>& acc, std::size_t sentences,
                                         std::uint64_t seed, std::vector<LabelSequence>& truth) {
  saslc::Rng rng(seed);
  saslc::CrowdDataset ds;
  ds.scheme = saslc::LabelScheme({"a", "b", "c", "d"}, saslc::SchemeKind::kRaw);
  for (std::size_t k = 0; k < acc.size(); ++k) ds.roster.push_back("k" + std::to_string(k));
  const std::size_t m = 4;
  for (std::size_t i = 0; i < sentences; ++i) {
    saslc::CrowdInstance inst;
    LabelSequence z;
    for (int t = 0; t < 8; ++t) {
      inst.x.push_back("t");
      z.push_back(rng.uniform() < 0.55 ? 0 : static_cast<Label>(1 + rng.index(m - 1)));
    }
    for (double a : acc) {
      LabelSequence y;
      for (Label l : z) {
        if (a < 0.0) {
          y.push_back(static_cast<Label>((l + 1) % m));
        } else {
          y.push_back(rng.uniform() < a ? l : static_cast<Label>(rng.index(m)));
        }
      }
      inst.annotations.emplace_back(y);
    }
    truth.push_back(z);
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

inline double token_accuracy(const std::vector<LabelSequence>& pred, const std::vector<LabelSequence>& truth) {
  std::size_t same = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t t = 0; t < pred[i].size(); ++t) {
      same += pred[i][t] == truth[i][t];
      ++total;
    }
  return static_cast<double>(same) / static_cast<double>(total);
}

}  // namespace fixture

#endif  // SASLC_TESTS_FIXTURES_H_
