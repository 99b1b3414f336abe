// Annotator expertise model. Each annotator k has two conditional
// categorical tables over the assigned label h given the true label j and
// a context label i:
//   alpha_k[i][j][h] = p(y_t = h | z_t = j, y_{t-1} = i)   (local context)
//   beta_k[i][j][h]  = p(y_t = h | z_t = j, y'_t = i)      (previous mention)
// where y'_t is the annotator's own label on the nearest earlier occurrence
// of the same token. A position with an earlier occurrence uses beta, all
// others use alpha; the first position uses the dedicated BOS context.

#ifndef SASLC_ANNOTATOR_H_
#define SASLC_ANNOTATOR_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "saslc/types.h"

namespace saslc::annotator {

class ConfusionTensor {
 public:
  ConfusionTensor() = default;
  // Every row starts uniform.
  ConfusionTensor(std::size_t contexts, std::size_t labels);

  std::size_t contexts() const { return contexts_; }
  std::size_t labels() const { return labels_; }

  double at(std::size_t ctx, Label truth, Label assigned) const {
    return values_[(ctx * labels_ + truth) * labels_ + assigned];
  }
  double& at(std::size_t ctx, Label truth, Label assigned) {
    return values_[(ctx * labels_ + truth) * labels_ + assigned];
  }
  std::span<const double> row(std::size_t ctx, Label truth) const {
    return {values_.data() + (ctx * labels_ + truth) * labels_, labels_};
  }
  std::span<double> row(std::size_t ctx, Label truth) {
    return {values_.data() + (ctx * labels_ + truth) * labels_, labels_};
  }
  std::span<const double> values() const { return values_; }

  // Largest |sum_h row - 1| over all rows, or +inf if any entry is negative.
  double simplex_error() const;

 private:
  std::size_t contexts_ = 0;
  std::size_t labels_ = 0;
  std::vector<double> values_;
};

struct AnnotatorParams {
  // alpha tensors have labels + 1 contexts; the last is BOS.
  std::vector<ConfusionTensor> alpha;
  std::vector<ConfusionTensor> beta;

  std::size_t num_annotators() const { return alpha.size(); }
  std::size_t num_labels() const { return beta.empty() ? 0 : beta.front().labels(); }
  std::size_t bos() const { return num_labels(); }

  static AnnotatorParams uniform(std::size_t annotators, std::size_t labels);
};

// links[j] is the nearest j' < j with x[j'] == x[j] (exact, case-sensitive).
using MentionLinks = std::vector<std::optional<std::uint32_t>>;

MentionLinks resolve_mentions(const TokenSequence& x);

// Context index used for position j of annotation y: y[link] when j has a
// mention link (beta), otherwise y[j-1] or BOS (alpha).
struct Context {
  bool use_beta;
  std::size_t index;
};

Context context_at(std::span<const Label> y, const MentionLinks& links, std::size_t j,
                   std::size_t bos);

// log p(y | z, x) for annotator k.
double annotation_loglik(std::size_t k, std::span<const Label> y, std::span<const Label> z,
                         const MentionLinks& links, const AnnotatorParams& params);

// Per-position log factor table for one annotator's labels y: entry
// [j * M + z] = log p(y_j | z_j = z, context). Summing entries along z gives
// annotation_loglik.
std::vector<double> log_factor_table(std::size_t k, std::span<const Label> y,
                                     const MentionLinks& links, const AnnotatorParams& params);

// Each row drawn from the flat Dirichlet, deterministically from `seed`.
AnnotatorParams sample_init_params(std::size_t annotators, std::size_t labels,
                                   std::uint64_t seed);

// Weighted (context, truth, assigned) counts, shaped like AnnotatorParams.
class ConfusionCounts {
 public:
  ConfusionCounts(std::size_t annotators, std::size_t labels);

  // Throws std::invalid_argument for negative or non-finite weights.
  void add(std::size_t k, bool beta, std::size_t ctx, Label truth, Label assigned, double w);
  // Adds the triples of one annotation y against candidate truth z.
  void add_sequence(std::size_t k, std::span<const Label> y, std::span<const Label> z,
                    const MentionLinks& links, double w);
  // Merges another accumulator in (fixed-order reductions).
  void merge(const ConfusionCounts& other);

  std::size_t num_annotators() const { return alpha_.size(); }
  std::size_t num_labels() const { return labels_; }
  const std::vector<std::vector<double>>& alpha() const { return alpha_; }
  const std::vector<std::vector<double>>& beta() const { return beta_; }

 private:
  std::size_t labels_;
  std::vector<std::vector<double>> alpha_;
  std::vector<std::vector<double>> beta_;
};

// values[i][j][h] = (n[i][j][h] + s) / (sum_h' n[i][j][h'] + s M). With
// s = 0 a row without observations stays uniform.
AnnotatorParams mle_update(const ConfusionCounts& counts, double smoothing);

// sum over all rows of s * sum_h log values[i][j][h]: the log-prior under
// which mle_update is the MAP estimate.
double log_prior(const AnnotatorParams& params, double smoothing);

// Occupancy-weighted mean of the correct-label probability:
// sum_{ij} n[i][j] t[i][j][j] / sum_{ij} n[i][j] for one tensor.
double correct_label_mass(const ConfusionTensor& tensor, std::span<const double> counts);

void save_params(std::ostream& os, const AnnotatorParams& params, const LabelScheme& scheme,
                 std::span<const std::string> roster);

struct LoadedParams {
  AnnotatorParams params;
  LabelScheme scheme;
  std::vector<std::string> roster;
};
LoadedParams load_params(std::istream& is);

}  // namespace saslc::annotator

#endif  // SASLC_ANNOTATOR_H_
