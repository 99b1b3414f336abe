// Wrapper baselines: infer one truth sequence per instance from the crowd,
// treating tokens independently.

#ifndef SASLC_BASELINES_H_
#define SASLC_BASELINES_H_

#include <span>
#include <vector>

#include "saslc/types.h"

namespace saslc::baselines {

// Per-position vote counts over the annotators present; [j * M + label].
std::vector<std::size_t> token_votes(const CrowdInstance& inst, std::size_t labels);

// Per-position argmax vote; ties go to the lowest label index.
LabelSequence mv_token(const CrowdInstance& inst, std::size_t labels);

struct DsModel {
  std::size_t labels = 0;
  // confusion[k][j * M + h] = p(annotator k says h | truth j)
  std::vector<std::vector<double>> confusion;
  std::vector<double> prior;
};

struct DsFit {
  DsModel model;
  // posterior[i][j * M + label] for every token of every instance.
  std::vector<std::vector<double>> posterior;
  // Token log-likelihood plus smoothing log-prior after each M-step.
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
};

// Dawid-Skene EM initialized from soft majority-vote fractions.
DsFit ds_fit(const CrowdDataset& ds, int max_iters = 50, double tol = 1e-8,
             double smoothing = 1.0);

// Token posterior under a fitted model; [j * M + label].
std::vector<double> ds_posterior(const DsModel& model, const CrowdInstance& inst);

// Per-token MAP label; ties go to the lowest index. May violate BIO.
LabelSequence ds_decode(const DsModel& model, const CrowdInstance& inst);

LabelSequence argmax_rows(std::span<const double> table, std::size_t labels);

// sum over tokens of log sum_j prior_j prod_k confusion_k[j][y_k].
double ds_log_likelihood(const DsModel& model, const CrowdDataset& ds);

}  // namespace saslc::baselines

#endif  // SASLC_BASELINES_H_
