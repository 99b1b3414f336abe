// Valid label sequence inference: per-token candidate truth labels from
// crowd agreement, then constraint-pruned enumeration of the candidate
// ground-truth sequences.

#ifndef SASLC_VLSE_H_
#define SASLC_VLSE_H_

#include <boost/multiprecision/cpp_int.hpp>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "saslc/types.h"

namespace saslc::vlse {

using PathCount = boost::multiprecision::cpp_int;

// kVerbatim: LC = max count / number of distinct labels (can exceed 1).
// kNormalized: the verbatim value divided by the number of annotators
// present, so LC lies in (0, 1].
enum class LcMode { kVerbatim, kNormalized };

struct ConsistencyEntry {
  std::vector<Label> labels;        // distinct labels used, ascending
  std::vector<std::size_t> counts;  // parallel to labels
  std::size_t annotators = 0;
  double lc = 0.0;

  std::size_t unique() const { return labels.size(); }
  // All labels attaining the maximum count, ascending.
  std::vector<Label> argmax_labels() const;
  // Lowest-index label attaining the maximum count.
  Label majority() const;
};

// Throws DataError if no annotator labeled position j.
ConsistencyEntry label_consistency(const CrowdInstance& inst, std::size_t j,
                                   LcMode mode = LcMode::kVerbatim);

// LC >= t1: tied argmax labels; t2 < LC < t1: every label used;
// LC <= t2: every scheme label. Requires t1 > t2 >= 0.
std::vector<Label> candidate_labels(const ConsistencyEntry& entry, const LabelScheme& scheme,
                                    double t1, double t2);

using CandidateSets = std::vector<std::vector<Label>>;

struct VlseConfig {
  std::optional<double> t1;  // default: max(K/2, 1) (verbatim) or that over K (normalized)
  std::optional<double> t2;  // default: 1/2 (verbatim) or 1/(2K) (normalized)
  LcMode mode = LcMode::kVerbatim;
  std::size_t cap = 5000;
};

std::pair<double, double> resolve_thresholds(const VlseConfig& cfg, std::size_t roster_size);

CandidateSets candidate_sets(const CrowdInstance& inst, const LabelScheme& scheme,
                             std::size_t roster_size, const VlseConfig& cfg);

// Number of label sequences drawing z_j from candidates[j] that respect the
// scheme's start and transition constraints. Not widened.
PathCount count_valid(const CandidateSets& candidates, const LabelScheme& scheme);
// prod_j |candidates[j]|
PathCount count_unpruned(const CandidateSets& candidates);

struct ValidLattice {
  CandidateSets candidates;              // after any widening
  std::vector<std::size_t> widened;      // positions widened to all labels
  std::vector<std::vector<Label>> states;  // states on at least one valid path
  // Arcs (from, to) into position t that lie on a valid path; [0] empty.
  std::vector<std::vector<std::pair<Label, Label>>> transitions;
  LabelSequence majority;
  std::vector<LabelSequence> sequences;  // descending agreement score
  std::vector<std::size_t> agreement;    // positions matching `majority`
  PathCount valid_count = 0;
  bool capped = false;

  std::size_t size() const { return sequences.size(); }
};

// Enumerates every valid sequence, or the `cap` highest-agreement ones when
// there are more. A position whose candidates cannot be reached is widened
// to all labels once; throws DataError if that still leaves no path.
ValidLattice enumerate_valid(const CrowdInstance& inst, CandidateSets candidates,
                             const LabelScheme& scheme, std::size_t cap);

ValidLattice build_lattice(const CrowdInstance& inst, const LabelScheme& scheme,
                           std::size_t roster_size, const VlseConfig& cfg);

}  // namespace saslc::vlse

#endif  // SASLC_VLSE_H_
