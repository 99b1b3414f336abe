#include "saslc/em.h"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "saslc/util.h"

namespace saslc::em {
namespace {

// Log-scores of every lattice sequence of one instance.
struct InstanceScores {
  std::vector<double> crf;                 // log p(z | x; theta)
  std::vector<std::vector<double>> annot;  // per present annotator: log p(y^k | z)
};

InstanceScores score_instance(const EmState& state, const CrowdInstance& inst, std::size_t i) {
  const auto& lat = state.lattices[i];
  const auto& cache = state.cache[i];
  const std::size_t m = state.crf.num_labels();
  InstanceScores out;
  const crf::SequencePotentials pot = state.crf.potentials(cache.features);
  const double log_z = crf::log_partition(pot);
  out.crf.reserve(lat.size());
  for (const auto& z : lat.sequences) out.crf.push_back(crf::sequence_score(pot, z) - log_z);
  for (std::size_t k = 0; k < inst.annotations.size(); ++k) {
    if (!inst.annotations[k]) continue;
    const auto table = annotator::log_factor_table(k, *inst.annotations[k], cache.links, state.annotators);
    std::vector<double> ll(lat.size(), 0.0);
    for (std::size_t n = 0; n < lat.size(); ++n) {
      const auto& z = lat.sequences[n];
      double s = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) s += table[j * m + z[j]];
      ll[n] = s;
    }
    out.annot.push_back(std::move(ll));
  }
  return out;
}

std::vector<double> joint_log_weights(const InstanceScores& sc) {
  std::vector<double> w = sc.crf;
  for (const auto& a : sc.annot)
    for (std::size_t n = 0; n < w.size(); ++n) w[n] += a[n];
  return w;
}

double penalty(const EmState& state, const EmConfig& cfg) {
  double sq = 0.0;
  for (double v : state.crf.weights()) sq += v * v;
  return -0.5 * cfg.lambda * sq + annotator::log_prior(state.annotators, cfg.smoothing);
}

void throw_on_violations(const CrowdDataset& ds) {
  const auto violations = validate_dataset(ds);
  if (violations.empty()) return;
  const auto& v = violations.front();
  std::ostringstream msg;
  msg << "invalid dataset (" << violations.size() << " violations); first at instance " << v.instance;
  if (v.annotator) msg << ", annotator " << ds.roster.at(*v.annotator);
  if (v.position) msg << ", position " << *v.position;
  msg << ": " << v.message;
  throw DataError(msg.str());
}

}  // namespace

EmState initialize(const CrowdDataset& ds, const EmConfig& cfg) {
  if (cfg.max_iters < 1 || !(cfg.rel_tol > 0.0)) {
    throw std::invalid_argument("EM needs max_iters >= 1 and rel_tol > 0");
  }
  throw_on_violations(ds);
  const std::size_t k_total = ds.num_annotators();
  const std::size_t m = ds.scheme.size();
  if (k_total == 0) throw DataError("dataset has an empty annotator roster");

  EmState state;
  Rng pick(mix_seed(cfg.seed, 1));
  state.init_annotator = cfg.init_annotator.value_or(pick.index(k_total));
  if (state.init_annotator >= k_total) throw std::invalid_argument("init annotator out of range");

  state.lattices.resize(ds.instances.size());
  const ChunkPlan plan = plan_chunks(ds.instances.size());
  parallel_chunks(plan, cfg.threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        state.lattices[i] = vlse::build_lattice(ds.instances[i], ds.scheme, k_total, cfg.vlse);
      } catch (const DataError& err) {
        throw DataError("instance " + std::to_string(i) + ": " + err.what());
      }
    }
  });

  state.crf = crf::CrfModel(ds.scheme, cfg.templates);
  std::vector<const TokenSequence*> xs;
  for (const auto& inst : ds.instances) xs.push_back(&inst.x);
  state.crf.index_features(xs);

  std::vector<crf::WeightedSequence> init_data;
  for (const auto& inst : ds.instances) {
    const auto& y = inst.annotations[state.init_annotator];
    if (y) init_data.push_back({&inst.x, *y, 1.0});
  }
  if (init_data.empty()) {
    throw DataError("initial annotator " + ds.roster[state.init_annotator] + " labeled nothing");
  }
  crf::OptimizeOptions opts;
  opts.max_iters = cfg.init_crf_iters;
  opts.grad_tol = cfg.grad_tol;
  opts.lambda = cfg.lambda;
  opts.threads = cfg.threads;
  state.crf = crf::optimize(std::move(state.crf), init_data, opts);

  state.annotators = annotator::sample_init_params(k_total, m, mix_seed(cfg.seed, 2));

  state.cache.resize(ds.instances.size());
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    state.cache[i].links = annotator::resolve_mentions(ds.instances[i].x);
    state.cache[i].features = state.crf.features(ds.instances[i].x);
  }
  state.loglik_history.push_back(em_objective(state, ds, cfg));
  return state;
}

std::vector<std::vector<double>> e_step(const EmState& state, const CrowdDataset& ds,
                                        unsigned threads) {
  std::vector<std::vector<double>> post(ds.instances.size());
  const ChunkPlan plan = plan_chunks(ds.instances.size());
  parallel_chunks(plan, threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      std::vector<double> w = joint_log_weights(score_instance(state, ds.instances[i], i));
      const double norm = log_sum_exp(w);
      for (double& v : w) v = std::exp(v - norm);
      post[i] = std::move(w);
    }
  });
  return post;
}

MStepResult m_step(const EmState& state, const CrowdDataset& ds,
                   const std::vector<std::vector<double>>& posteriors, const EmConfig& cfg) {
  const std::size_t m = ds.scheme.size();
  std::vector<crf::SoftTarget> targets;
  targets.reserve(ds.instances.size());
  annotator::ConfusionCounts counts(ds.num_annotators(), m);
  std::vector<double> q;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& lat = state.lattices[i];
    const auto& inst = ds.instances[i];
    const std::size_t len = inst.length();
    targets.emplace_back(state.cache[i].features, m);
    q.assign(len * m, 0.0);
    for (std::size_t n = 0; n < lat.size(); ++n) {
      const double p = posteriors[i][n];
      if (p == 0.0) continue;
      targets.back().add(lat.sequences[n], p);
      for (std::size_t j = 0; j < len; ++j) q[j * m + lat.sequences[n][j]] += p;
    }
    // Annotator counts only need per-position truth marginals: the context
    // comes from the annotator's own labels, not from z.
    for (std::size_t k = 0; k < inst.annotations.size(); ++k) {
      if (!inst.annotations[k]) continue;
      const auto& y = *inst.annotations[k];
      for (std::size_t j = 0; j < len; ++j) {
        const auto c = annotator::context_at(y, state.cache[i].links, j, m);
        for (Label z = 0; z < m; ++z) {
          if (q[j * m + z] > 0.0) counts.add(k, c.use_beta, c.index, z, y[j], q[j * m + z]);
        }
      }
    }
  }

  MStepResult out{state.crf, annotator::mle_update(counts, cfg.smoothing), {}};
  const crf::CrfObjective objective(state.crf.layout(), std::move(targets), cfg.lambda, cfg.threads);
  crf::OptimizeOptions opts;
  opts.max_iters = cfg.mstep_crf_iters;
  opts.grad_tol = cfg.grad_tol;
  opts.lambda = cfg.lambda;
  opts.threads = cfg.threads;
  out.crf_report = crf::optimize(out.crf, objective, opts);
  return out;
}

double observed_loglik(const EmState& state, const CrowdDataset& ds) {
  double total = 0.0;
  std::vector<double> w;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const InstanceScores sc = score_instance(state, ds.instances[i], i);
    for (const auto& a : sc.annot) {
      w.assign(sc.crf.begin(), sc.crf.end());
      for (std::size_t n = 0; n < w.size(); ++n) w[n] += a[n];
      total += log_sum_exp(w);
    }
  }
  return total;
}

double marginal_loglik(const EmState& state, const CrowdDataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    total += log_sum_exp(joint_log_weights(score_instance(state, ds.instances[i], i)));
  }
  return total;
}

double em_objective(const EmState& state, const CrowdDataset& ds, const EmConfig& cfg) {
  return marginal_loglik(state, ds) + penalty(state, cfg);
}

double q_function(const EmState& state, const CrowdDataset& ds,
                  const std::vector<std::vector<double>>& posteriors, const EmConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const std::vector<double> w = joint_log_weights(score_instance(state, ds.instances[i], i));
    for (std::size_t n = 0; n < w.size(); ++n) {
      if (posteriors[i][n] > 0.0) total += posteriors[i][n] * w[n];
    }
  }
  return total + penalty(state, cfg);
}

FitResult fit(const CrowdDataset& ds, const EmConfig& cfg, std::ostream* log) {
  using Clock = std::chrono::steady_clock;
  FitResult res;
  res.state = initialize(ds, cfg);
  EmState& st = res.state;
  double prev = st.loglik_history.back();
  IterationRecord first;
  first.objective = prev;
  first.observed = observed_loglik(st, ds);
  res.history.push_back(first);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const auto t0 = Clock::now();
    auto post = e_step(st, ds, cfg.threads);
    MStepResult ms = m_step(st, ds, post, cfg);
    st.crf = std::move(ms.crf);
    st.annotators = std::move(ms.annotators);
    st.posteriors = std::move(post);
    st.iteration = it;
    const double cur = em_objective(st, ds, cfg);
    st.loglik_history.push_back(cur);

    IterationRecord rec;
    rec.iteration = it;
    rec.objective = cur;
    rec.delta = cur - prev;
    rec.observed = observed_loglik(st, ds);
    rec.inner_iters = ms.crf_report.iterations;
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    res.history.push_back(rec);
    if (log) {
      *log << rec.iteration << '\t' << format_double(rec.objective) << '\t'
           << format_double(rec.delta) << '\t' << rec.inner_iters << '\t' << rec.seconds << '\n';
    }
    const double rel = std::abs(cur - prev) / std::max(std::abs(prev), 1e-300);
    prev = cur;
    if (rel < cfg.rel_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

void write_history(std::ostream& os, const std::vector<IterationRecord>& history) {
  os << "iteration\tobjective\tdelta\tobserved_loglik\tinner_iters\n";
  for (const auto& r : history) {
    os << r.iteration << '\t' << format_double(r.objective) << '\t' << format_double(r.delta) << '\t'
       << format_double(r.observed) << '\t' << r.inner_iters << '\n';
  }
}

std::vector<LabelSequence> map_sequences(const EmState& state, const CrowdDataset& ds,
                                         unsigned threads) {
  const auto post = e_step(state, ds, threads);
  std::vector<LabelSequence> out;
  out.reserve(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < post[i].size(); ++n) {
      if (post[i][n] > post[i][best]) best = n;
    }
    out.push_back(state.lattices[i].sequences[best]);
  }
  return out;
}

std::size_t capped_lattices(const EmState& state) {
  std::size_t n = 0;
  for (const auto& l : state.lattices) n += l.capped ? 1 : 0;
  return n;
}

}  // namespace saslc::em
