// Joint EM estimation of the CRF weights and the annotator tensors over
// frozen per-instance candidate lattices.

#ifndef SASLC_EM_H_
#define SASLC_EM_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "saslc/annotator.h"
#include "saslc/crf.h"
#include "saslc/types.h"
#include "saslc/vlse.h"

namespace saslc::em {

struct EmConfig {
  int max_iters = 20;
  double rel_tol = 1e-4;
  vlse::VlseConfig vlse;
  double smoothing = 1.0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  std::vector<crf::FeatureTemplate> templates = crf::default_templates();
  int init_crf_iters = 200;
  int mstep_crf_iters = 30;
  double grad_tol = 1e-4;
  unsigned threads = 1;
  // Forces the annotator whose labels initialize the CRF; random otherwise.
  std::optional<std::size_t> init_annotator;
};

// Per-instance data that does not change across iterations.
struct InstanceCache {
  annotator::MentionLinks links;
  crf::SequenceFeatures features;
};

struct EmState {
  crf::CrfModel crf;
  annotator::AnnotatorParams annotators;
  std::vector<vlse::ValidLattice> lattices;
  std::vector<InstanceCache> cache;
  // posteriors[i][n] is the weight of lattices[i].sequences[n].
  std::vector<std::vector<double>> posteriors;
  std::size_t init_annotator = 0;
  int iteration = 0;
  std::vector<double> loglik_history;
};

EmState initialize(const CrowdDataset& ds, const EmConfig& cfg);

// p(z | x, Y) over each instance's lattice.
std::vector<std::vector<double>> e_step(const EmState& state, const CrowdDataset& ds,
                                        unsigned threads = 1);

struct MStepResult {
  crf::CrfModel crf;
  annotator::AnnotatorParams annotators;
  crf::OptimizeReport crf_report;
};

MStepResult m_step(const EmState& state, const CrowdDataset& ds,
                   const std::vector<std::vector<double>>& posteriors, const EmConfig& cfg);

// sum_i sum_k log sum_{z in lattice_i} p(y_i^k | z) p(z | x_i): each
// annotator marginalizes the truth separately.
double observed_loglik(const EmState& state, const CrowdDataset& ds);

// sum_i log sum_{z in lattice_i} p(z | x_i) prod_k p(y_i^k | z): the
// shared-truth likelihood whose posterior the E-step computes.
double marginal_loglik(const EmState& state, const CrowdDataset& ds);

// marginal_loglik plus the log-priors implied by the L2 penalty and the
// count smoothing. EM never decreases this.
double em_objective(const EmState& state, const CrowdDataset& ds, const EmConfig& cfg);

// Expected complete-data log-posterior under fixed `posteriors`, evaluated
// at the parameters held in `state`.
double q_function(const EmState& state, const CrowdDataset& ds,
                  const std::vector<std::vector<double>>& posteriors, const EmConfig& cfg);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double delta = 0.0;
  double observed = 0.0;
  int inner_iters = 0;
  double seconds = 0.0;
};

struct FitResult {
  EmState state;
  std::vector<IterationRecord> history;
  bool converged = false;
};

// Alternates E and M steps until the relative objective change falls below
// rel_tol or max_iters is reached. One tab-separated line per iteration
// goes to `log` when given.
FitResult fit(const CrowdDataset& ds, const EmConfig& cfg, std::ostream* log = nullptr);

// Machine-readable history without timing columns.
void write_history(std::ostream& os, const std::vector<IterationRecord>& history);

// Highest-posterior lattice sequence per instance for the current state.
std::vector<LabelSequence> map_sequences(const EmState& state, const CrowdDataset& ds,
                                         unsigned threads = 1);

// Number of instances whose lattice hit the enumeration cap.
std::size_t capped_lattices(const EmState& state);

}  // namespace saslc::em

#endif  // SASLC_EM_H_
