// Linear-chain conditional random field: feature extraction, exact
// inference and weighted maximum-likelihood training.
//
// A sequence's score decomposes as
//   score(x, z) = sum_t unary[t][z_t] + sum_{t>=1} pair[t][z_{t-1}][z_t]
// where unary entries collect the weights of (observation feature, label)
// pairs and pair entries collect label-bigram weights (shared across
// positions unless a position-dependent bigram template is present).

#ifndef SASLC_CRF_H_
#define SASLC_CRF_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "saslc/lbfgs.h"
#include "saslc/types.h"

namespace saslc::crf {

enum class TemplateKind {
  kBias,
  kTokenIdentity,
  kTokenLowercase,
  kPrefix,
  kSuffix,
  kIsCapitalized,
  kIsDigit,
  kPreviousToken,
  kNextToken,
  kLabelBigram,
  // Label bigram conjoined with the current token; makes pairwise scores
  // position dependent.
  kLabelBigramToken,
};

struct FeatureTemplate {
  TemplateKind kind = TemplateKind::kBias;
  int param = 0;  // k for prefix/suffix, offset for previous/next token

  std::string name() const;
  // Accepts names like "token-identity", "prefix-3", "previous-token-2".
  static FeatureTemplate parse(std::string_view name);

  bool operator==(const FeatureTemplate&) const = default;
};

std::vector<FeatureTemplate> default_templates();
// Comma-separated template names.
std::vector<FeatureTemplate> parse_templates(std::string_view list);
std::string format_templates(std::span<const FeatureTemplate> templates);

class FeatureIndex {
 public:
  std::uint32_t add(const std::string& name);
  const std::uint32_t* find(const std::string& name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> names_;
};

// Observation feature ids per position, resolved against a model's index.
// pair[0] is always empty.
struct SequenceFeatures {
  std::vector<std::vector<std::uint32_t>> unary;
  std::vector<std::vector<std::uint32_t>> pair;

  std::size_t length() const { return unary.size(); }
};

class SequencePotentials {
 public:
  SequencePotentials() = default;
  SequencePotentials(std::size_t length, std::size_t labels, bool position_dependent);

  std::size_t length() const { return length_; }
  std::size_t num_labels() const { return labels_; }
  bool position_dependent() const { return position_dependent_; }

  double unary(std::size_t t, Label y) const { return unary_[t * labels_ + y]; }
  double& unary(std::size_t t, Label y) { return unary_[t * labels_ + y]; }
  // Score of the arc a -> b entering position t (1 <= t < length).
  double pair(std::size_t t, Label a, Label b) const { return pair_[pair_offset(t) + a * labels_ + b]; }
  double& pair(std::size_t t, Label a, Label b) { return pair_[pair_offset(t) + a * labels_ + b]; }

  // Adds c to every unary entry; changes every score by length * c.
  void shift_unary(double c);

 private:
  std::size_t pair_offset(std::size_t t) const {
    return position_dependent_ ? (t - 1) * labels_ * labels_ : 0;
  }

  std::size_t length_ = 0;
  std::size_t labels_ = 0;
  bool position_dependent_ = false;
  std::vector<double> unary_;
  std::vector<double> pair_;
};

double sequence_score(const SequencePotentials& pot, std::span<const Label> z);
double log_partition(const SequencePotentials& pot);

struct Marginals {
  std::size_t length = 0;
  std::size_t labels = 0;
  double log_z = 0.0;
  std::vector<double> unary;  // length x labels
  std::vector<double> pair;   // (length-1) x labels x labels; slot t-1 holds arcs into t

  double node(std::size_t t, Label y) const { return unary[t * labels + y]; }
  double edge(std::size_t t, Label a, Label b) const {
    return pair[((t - 1) * labels + a) * labels + b];
  }
};

Marginals marginals(const SequencePotentials& pot);

// argmax_z score(x, z). At each step ties go to the lowest label index.
LabelSequence viterbi(const SequencePotentials& pot);

// Flat weight layout: [unary obs x labels | bigram labels x labels |
// token-bigram obs x labels x labels].
struct WeightLayout {
  std::size_t labels = 0;
  std::size_t unary_obs = 0;
  bool bigram = false;
  std::size_t pair_obs = 0;

  std::size_t unary_weight(std::uint32_t obs, Label y) const { return obs * labels + y; }
  std::size_t bigram_offset() const { return unary_obs * labels; }
  std::size_t bigram_weight(Label a, Label b) const { return bigram_offset() + a * labels + b; }
  std::size_t pair_offset() const { return bigram_offset() + (bigram ? labels * labels : 0); }
  std::size_t pair_weight(std::uint32_t obs, Label a, Label b) const {
    return pair_offset() + (obs * labels + a) * labels + b;
  }
  std::size_t dimension() const { return pair_offset() + pair_obs * labels * labels; }
  bool position_dependent() const { return pair_obs > 0; }

  SequencePotentials potentials(const SequenceFeatures& f, std::span<const double> w) const;
};

class CrfModel {
 public:
  CrfModel() = default;
  CrfModel(LabelScheme scheme, std::vector<FeatureTemplate> templates);

  const LabelScheme& scheme() const { return scheme_; }
  const std::vector<FeatureTemplate>& templates() const { return templates_; }
  std::size_t num_labels() const { return scheme_.size(); }
  std::size_t num_features() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  std::vector<double>& mutable_weights() { return weights_; }
  const WeightLayout& layout() const { return layout_; }

  // Adds every observation feature occurring in `xs` to the index. Existing
  // weights are kept; new ones start at 0.
  void index_features(std::span<const TokenSequence> xs);
  void index_features(const std::vector<const TokenSequence*>& xs);

  // Features not in the index are dropped.
  SequenceFeatures features(const TokenSequence& x) const;
  SequencePotentials potentials(const SequenceFeatures& f) const {
    return layout_.potentials(f, weights_);
  }

  std::string feature_name(std::size_t d) const;
  // Weight index of an observation-string/label pair, if indexed.
  std::optional<std::size_t> find_unary(const std::string& obs, Label y) const;

  void save(std::ostream& os) const;
  // Throws DataError on malformed input.
  static CrfModel load(std::istream& is);

 private:
  void resize_weights(const WeightLayout& old);
  std::vector<std::string> observations(const TokenSequence& x, std::size_t t) const;
  std::vector<std::string> pair_observations(const TokenSequence& x, std::size_t t) const;

  LabelScheme scheme_;
  std::vector<FeatureTemplate> templates_;
  FeatureIndex unary_index_;
  FeatureIndex pair_index_;
  WeightLayout layout_;
  std::vector<double> weights_;
};

SequencePotentials extract_features(const CrfModel& model, const TokenSequence& x);

// Weighted training data. A family of candidate label sequences for the
// same x is expressed by several entries sharing the `x` pointer.
struct WeightedSequence {
  const TokenSequence* x = nullptr;
  LabelSequence z;
  double weight = 1.0;
};

// Sufficient statistics of the weighted data for one token sequence:
// summed weight plus weighted label and label-pair occupancy counts.
struct SoftTarget {
  SequenceFeatures features;
  double total_weight = 0.0;
  std::vector<double> unary;  // length x labels
  std::vector<double> pair;   // (length-1) x labels x labels

  SoftTarget() = default;
  SoftTarget(SequenceFeatures f, std::size_t labels);
  // Throws std::invalid_argument on negative or non-finite weight.
  void add(std::span<const Label> z, double weight);
};

// Negative weighted log-likelihood plus (lambda/2)|theta|^2.
class CrfObjective {
 public:
  CrfObjective(WeightLayout layout, std::vector<SoftTarget> targets, double lambda,
               unsigned threads = 1);
  static CrfObjective from_weighted(const CrfModel& model,
                                    std::span<const WeightedSequence> data, double lambda,
                                    unsigned threads = 1);

  double evaluate(std::span<const double> w, std::span<double> grad) const;
  std::size_t dimension() const { return layout_.dimension(); }
  const std::vector<SoftTarget>& targets() const { return targets_; }

 private:
  WeightLayout layout_;
  std::vector<SoftTarget> targets_;
  double lambda_;
  unsigned threads_;
};

struct NllAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

NllAndGradient weighted_nll_and_gradient(const CrfModel& model,
                                         std::span<const WeightedSequence> data,
                                         double lambda);

struct OptimizeOptions {
  int max_iters = 200;
  double grad_tol = 1e-4;
  double lambda = 1.0;
  int history = 7;
  int max_backtracks = 40;
  unsigned threads = 1;
};

using OptimizeReport = LbfgsResult;

// Minimizes the objective starting from the model's current weights.
OptimizeReport optimize(CrfModel& model, const CrfObjective& objective,
                        const OptimizeOptions& opts);
CrfModel optimize(CrfModel model, std::span<const WeightedSequence> data,
                  const OptimizeOptions& opts, OptimizeReport* report = nullptr);

// Trains a fresh model on unit-weight labeled sequences.
CrfModel train_supervised(const LabelScheme& scheme, std::vector<FeatureTemplate> templates,
                          std::span<const TokenSequence> xs, std::span<const LabelSequence> zs,
                          const OptimizeOptions& opts, OptimizeReport* report = nullptr);

LabelSequence predict(const CrfModel& model, const TokenSequence& x);

}  // namespace saslc::crf

#endif  // SASLC_CRF_H_
