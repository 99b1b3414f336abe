#include "saslc/baselines.h"

#include <cmath>

#include "saslc/util.h"

namespace saslc::baselines {

std::vector<std::size_t> token_votes(const CrowdInstance& inst, std::size_t labels) {
  std::vector<std::size_t> votes(inst.length() * labels, 0);
  for (const auto& ann : inst.annotations) {
    if (!ann) continue;
    for (std::size_t j = 0; j < inst.length(); ++j) ++votes[j * labels + (*ann)[j]];
  }
  return votes;
}

LabelSequence argmax_rows(std::span<const double> table, std::size_t labels) {
  const std::size_t len = labels ? table.size() / labels : 0;
  LabelSequence out(len, 0);
  for (std::size_t j = 0; j < len; ++j) {
    for (Label l = 1; l < labels; ++l) {
      if (table[j * labels + l] > table[j * labels + out[j]]) out[j] = l;
    }
  }
  return out;
}

LabelSequence mv_token(const CrowdInstance& inst, std::size_t labels) {
  const auto votes = token_votes(inst, labels);
  std::vector<double> as_double(votes.begin(), votes.end());
  return argmax_rows(as_double, labels);
}

namespace {

// Log of prior_j * prod_k confusion_k[j][y_k] at token j, for every truth.
void token_log_joint(const DsModel& model, const CrowdInstance& inst, std::size_t j,
                     std::vector<double>& out) {
  const std::size_t m = model.labels;
  out.resize(m);
  for (Label z = 0; z < m; ++z) {
    double v = std::log(model.prior[z]);
    for (std::size_t k = 0; k < inst.annotations.size(); ++k) {
      if (inst.annotations[k]) v += std::log(model.confusion[k][z * m + (*inst.annotations[k])[j]]);
    }
    out[z] = v;
  }
}

DsModel m_step(const CrowdDataset& ds, const std::vector<std::vector<double>>& post, double s) {
  const std::size_t m = ds.scheme.size();
  const std::size_t k_total = ds.num_annotators();
  DsModel model;
  model.labels = m;
  model.prior.assign(m, s);
  model.confusion.assign(k_total, std::vector<double>(m * m, s));
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& inst = ds.instances[i];
    for (std::size_t j = 0; j < inst.length(); ++j) {
      for (Label z = 0; z < m; ++z) {
        const double p = post[i][j * m + z];
        if (p == 0.0) continue;
        model.prior[z] += p;
        for (std::size_t k = 0; k < k_total; ++k) {
          if (inst.annotations[k]) model.confusion[k][z * m + (*inst.annotations[k])[j]] += p;
        }
      }
    }
  }
  auto normalize = [m](std::span<double> row) {
    double t = 0.0;
    for (double v : row) t += v;
    for (double& v : row) v = t > 0.0 ? v / t : 1.0 / static_cast<double>(m);
  };
  normalize(model.prior);
  for (auto& c : model.confusion)
    for (Label z = 0; z < m; ++z) normalize(std::span<double>(c).subspan(z * m, m));
  return model;
}

double log_prior(const DsModel& model, double s) {
  if (s == 0.0) return 0.0;
  double total = 0.0;
  for (double v : model.prior) total += std::log(v);
  for (const auto& c : model.confusion)
    for (double v : c) total += std::log(v);
  return s * total;
}

}  // namespace

std::vector<double> ds_posterior(const DsModel& model, const CrowdInstance& inst) {
  const std::size_t m = model.labels;
  std::vector<double> post(inst.length() * m);
  std::vector<double> lj;
  for (std::size_t j = 0; j < inst.length(); ++j) {
    token_log_joint(model, inst, j, lj);
    const double norm = log_sum_exp(lj);
    for (Label z = 0; z < m; ++z) post[j * m + z] = std::exp(lj[z] - norm);
  }
  return post;
}

double ds_log_likelihood(const DsModel& model, const CrowdDataset& ds) {
  double total = 0.0;
  std::vector<double> lj;
  for (const auto& inst : ds.instances) {
    for (std::size_t j = 0; j < inst.length(); ++j) {
      token_log_joint(model, inst, j, lj);
      total += log_sum_exp(lj);
    }
  }
  return total;
}

DsFit ds_fit(const CrowdDataset& ds, int max_iters, double tol, double smoothing) {
  const std::size_t m = ds.scheme.size();
  DsFit fit;
  fit.posterior.resize(ds.instances.size());
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& inst = ds.instances[i];
    const auto votes = token_votes(inst, m);
    const double present = static_cast<double>(inst.num_present());
    if (present == 0.0) throw DataError("instance " + std::to_string(i) + " has no annotations");
    fit.posterior[i].resize(votes.size());
    for (std::size_t v = 0; v < votes.size(); ++v) {
      fit.posterior[i][v] = static_cast<double>(votes[v]) / present;
    }
  }
  double prev = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    fit.model = m_step(ds, fit.posterior, smoothing);
    const double obj = ds_log_likelihood(fit.model, ds) + log_prior(fit.model, smoothing);
    fit.objective_history.push_back(obj);
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
      fit.posterior[i] = ds_posterior(fit.model, ds.instances[i]);
    }
    fit.iterations = it;
    if (it > 1 && std::abs(obj - prev) <= tol * std::max(1.0, std::abs(prev))) {
      fit.converged = true;
      break;
    }
    prev = obj;
  }
  return fit;
}

LabelSequence ds_decode(const DsModel& model, const CrowdInstance& inst) {
  return argmax_rows(ds_posterior(model, inst), model.labels);
}

}  // namespace saslc::baselines
