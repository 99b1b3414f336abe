// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "fixtures.h"
#include "oracles.h"
#include "saslc/baselines.h"
#include "saslc/cli.h"
#include "saslc/crf.h"
#include "saslc/em.h"
#include "saslc/evaluation.h"
#include "saslc/io.h"
#include "saslc/simulator.h"
#include "saslc/vlse.h"

using namespace saslc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TokenSequence random_tokens(Rng& rng, std::size_t len) {
  static const std::vector<std::string> vocab = {"Acme", "the", "Paris", "42", "runs", "Bob", "of", "X1"};
  TokenSequence x;
  for (std::size_t t = 0; t < len; ++t) x.push_back(vocab[rng.index(vocab.size())]);
  return x;
}

LabelScheme raw_scheme(std::size_t m) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < m; ++i) names.push_back("L" + std::to_string(i));
  return LabelScheme(names, SchemeKind::kRaw);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Outcome crf_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_z = 0.0, worst_marg = 0.0;
  int viterbi_miss = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 2 + rng.index(3), len = 1 + rng.index(6);
    auto templates = crf::default_templates();
    if (rep % 2) templates.push_back(crf::FeatureTemplate::parse("label-bigram-token"));
    crf::CrfModel model(raw_scheme(m), templates);
    const auto x = random_tokens(rng, len);
    model.index_features(std::vector<TokenSequence>{x});
    for (double& w : model.mutable_weights()) w = rng.normal();
    const auto pot = crf::extract_features(model, x);
    worst_z = std::max(worst_z, rel_err(crf::log_partition(pot), oracle::log_z(pot)));
    const auto mg = crf::marginals(pot);
    const auto bm = oracle::marginals(pot);
    for (std::size_t t = 0; t < len; ++t)
      for (Label y = 0; y < m; ++y) {
        worst_marg = std::max(worst_marg, rel_err(mg.node(t, y), bm.node[t * m + y]));
        if (t > 0)
          for (Label b = 0; b < m; ++b)
            worst_marg = std::max(worst_marg, rel_err(mg.edge(t, y, b), bm.edge[((t - 1) * m + y) * m + b]));
      }
    viterbi_miss += crf::viterbi(pot) != oracle::viterbi(pot);
  }
  const double secs = seconds_since(t0);
  return {worst_z < 1e-8 && worst_marg < 1e-8 && viterbi_miss == 0 && secs < 10.0,
          "max rel err logZ " + fmt(worst_z) + ", marginals " + fmt(worst_marg) + ", viterbi mismatches " +
              std::to_string(viterbi_miss) + ", " + fmt(secs, 3) + " s"};
}

Outcome gradient_check() {
  Rng rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    auto templates = crf::default_templates();
    if (rep % 2) templates.push_back(crf::FeatureTemplate::parse("label-bigram-token"));
    crf::CrfModel model(raw_scheme(2 + rng.index(3)), templates);
    std::vector<TokenSequence> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(random_tokens(rng, 1 + rng.index(5)));
    model.index_features(xs);
    std::vector<crf::WeightedSequence> data;
    for (const auto& x : xs)
      for (int c = 0; c < 2; ++c) {
        LabelSequence z(x.size());
        for (auto& l : z) l = static_cast<Label>(rng.index(model.num_labels()));
        data.push_back({&x, z, rng.uniform()});
      }
    for (double& w : model.mutable_weights()) w = 0.5 * rng.normal();
    const double lambda = 1.0;
    const auto r = crf::weighted_nll_and_gradient(model, data, lambda);
    const auto fd = oracle::numeric_gradient(
        [&](const std::vector<double>& w) {
          crf::CrfModel mm = model;
          mm.mutable_weights() = w;
          return crf::weighted_nll_and_gradient(mm, data, lambda).value;
        },
        std::vector<double>(model.weights().begin(), model.weights().end()));
    double num = 0.0, den = 0.0;
    for (std::size_t d = 0; d < fd.size(); ++d) {
      num += (fd[d] - r.gradient[d]) * (fd[d] - r.gradient[d]);
      den += fd[d] * fd[d];
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-300));
  }
  return {worst < 1e-4, "max relative gradient error " + fmt(worst)};
}

Outcome vlse_enumeration() {
  static const LabelScheme ner({"O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC"}, SchemeKind::kBio);
  Rng rng(303);
  int compared = 0, mismatches = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const std::size_t len = 1 + rng.index(7), k = 1 + rng.index(5);
    CrowdInstance inst;
    for (std::size_t j = 0; j < len; ++j) inst.x.push_back("t");
    for (std::size_t a = 0; a < k; ++a) {
      LabelSequence y(len);
      for (auto& l : y) l = static_cast<Label>(rng.index(ner.size()));
      inst.annotations.emplace_back(y);
    }
    const auto cands = vlse::candidate_sets(inst, ner, k, {});
    if (vlse::count_unpruned(cands) > 10000) continue;
    const auto lat = vlse::enumerate_valid(inst, cands, ner, 1000000);
    if (!lat.widened.empty()) continue;
    const auto brute = oracle::valid_sequences(cands, ner);
    ++compared;
    const bool same = std::set<LabelSequence>(lat.sequences.begin(), lat.sequences.end()) == brute &&
                      lat.size() == brute.size() && vlse::count_valid(cands, ner) == brute.size();
    mismatches += !same;
  }
  // Five annotators splitting 2/2/1 at each of six positions.
  const std::vector<std::vector<std::string>> columns = {
      {"B-ORG", "B-ORG", "B-LOC", "B-LOC", "I-LOC"}, {"O", "O", "B-PER", "B-PER", "I-LOC"},
      {"O", "O", "B-PER", "B-PER", "B-ORG"},         {"O", "O", "B-PER", "B-PER", "B-ORG"},
      {"O", "O", "I-PER", "I-PER", "B-LOC"},         {"O", "O", "B-PER", "B-PER", "B-ORG"}};
  CrowdInstance worked;
  worked.annotations.assign(5, LabelSequence{});
  for (std::size_t j = 0; j < columns.size(); ++j) {
    worked.x.push_back("w");
    for (std::size_t a = 0; a < 5; ++a) worked.annotations[a]->push_back(ner.index(columns[j][a]));
  }
  const auto wc = vlse::candidate_sets(worked, ner, 5, {});
  const auto unpruned = vlse::count_unpruned(wc), pruned = vlse::count_valid(wc, ner);
  std::ostringstream d;
  d << compared << " instances compared, " << mismatches << " mismatches; worked example " << unpruned << " -> "
    << pruned;
  return {compared >= 100 && mismatches == 0 && pruned < unpruned, d.str()};
}

struct Split {
  CrowdDataset train, test;
};

Split split_gold(std::size_t train, std::size_t test, std::uint64_t seed) {
  const auto all = sim::generate_gold_corpus(train + test, seed);
  Split s{all, all};
  s.train.instances.assign(all.instances.begin(), all.instances.begin() + static_cast<std::ptrdiff_t>(train));
  s.test.instances.assign(all.instances.begin() + static_cast<std::ptrdiff_t>(train), all.instances.end());
  return s;
}

double heldout_f1(const crf::CrfModel& model, const CrowdDataset& test) {
  std::vector<LabelSequence> pred, gold;
  for (const auto& inst : test.instances) {
    pred.push_back(crf::predict(model, inst.x));
    gold.push_back(*inst.gold);
  }
  return eval::entity_prf(pred, gold, test.scheme).f1;
}

crf::CrfModel wrapper_crf(const CrowdDataset& crowd, const std::vector<LabelSequence>& labels,
                          const em::EmConfig& cfg) {
  std::vector<TokenSequence> xs;
  for (const auto& inst : crowd.instances) xs.push_back(inst.x);
  crf::OptimizeOptions opts;
  opts.max_iters = cfg.init_crf_iters;
  opts.grad_tol = cfg.grad_tol;
  opts.lambda = cfg.lambda;
  opts.threads = cfg.threads;
  return crf::train_supervised(crowd.scheme, cfg.templates, xs, labels, opts);
}

Outcome em_ascent() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto gold = sim::generate_gold_corpus(200, 404);
  sim::SimConfig sc;
  sc.annotators = 5;
  sc.target_p = 0.7;
  sc.seed = 405;
  const auto crowd = sim::simulate(gold, sc);
  em::EmConfig cfg;
  cfg.max_iters = 12;
  cfg.rel_tol = 1e-12;
  cfg.seed = 406;
  cfg.threads = default_threads();
  const auto fit = em::fit(crowd, cfg);
  const std::size_t capped = em::capped_lattices(fit.state);
  double worst_obj = 0.0, worst_observed = 0.0;
  int drops = 0;
  for (std::size_t i = 1; i < fit.history.size(); ++i) {
    const double d = fit.history[i - 1].observed - fit.history[i].observed;
    worst_obj = std::max(worst_obj, fit.history[i - 1].objective - fit.history[i].objective);
    worst_observed = std::max(worst_observed, d);
    drops += d > 1e-6;
  }
  const double secs = seconds_since(t0);
  const int iters = static_cast<int>(fit.history.size()) - 1;
  std::ostringstream d;
  d << iters << " iterations, capped lattices " << capped << "; per-annotator observed_loglik fell in " << drops
    << " iterations, largest drop " << fmt(worst_observed) << "; shared-truth EM objective largest drop "
    << fmt(worst_obj) << "; " << fmt(secs, 3) << " s";
  return {capped == 0 && iters >= 10 && worst_observed <= 1e-6 && secs < 300.0, d.str()};
}

Outcome noiseless_recovery() {
  const auto split = split_gold(2000, 300, 505);
  sim::SimConfig sc;
  sc.annotators = 3;
  sc.target_p = 1.0;
  sc.seed = 506;
  const auto crowd = sim::simulate(split.train, sc);
  em::EmConfig cfg;
  cfg.seed = 507;
  cfg.threads = default_threads();
  const auto fit = em::fit(crowd, cfg);
  std::vector<TokenSequence> xs;
  std::vector<LabelSequence> zs;
  for (const auto& inst : split.train.instances) {
    xs.push_back(inst.x);
    zs.push_back(*inst.gold);
  }
  const auto gold_crf = wrapper_crf(crowd, zs, cfg);
  const double f_em = heldout_f1(fit.state.crf, split.test), f_gold = heldout_f1(gold_crf, split.test);

  annotator::ConfusionCounts counts(crowd.num_annotators(), crowd.scheme.size());
  for (const auto& inst : crowd.instances) {
    const auto links = annotator::resolve_mentions(inst.x);
    for (std::size_t k = 0; k < crowd.num_annotators(); ++k)
      counts.add_sequence(k, *inst.annotations[k], *inst.gold, links, 1.0);
  }
  double alpha_min = 1.0, beta_min = 1.0;
  for (std::size_t k = 0; k < crowd.num_annotators(); ++k) {
    alpha_min = std::min(alpha_min, annotator::correct_label_mass(fit.state.annotators.alpha[k], counts.alpha()[k]));
    beta_min = std::min(beta_min, annotator::correct_label_mass(fit.state.annotators.beta[k], counts.beta()[k]));
  }
  std::ostringstream d;
  d << "held-out F1 SA-SLC " << fmt(f_em) << " vs gold CRF " << fmt(f_gold) << "; min correct-label mass alpha "
    << fmt(alpha_min) << ", beta " << fmt(beta_min);
  return {std::abs(f_em - f_gold) <= 0.01 && alpha_min > 0.95 && beta_min > 0.95, d.str()};
}

Outcome beats_majority_vote() {
  double sum_em = 0.0, sum_mv = 0.0;
  std::ostringstream d;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto split = split_gold(300, 200, 600 + seed);
    sim::SimConfig sc;
    sc.annotators = 5;
    sc.target_p = 0.3;
    sc.seed = 610 + seed;
    const auto crowd = sim::simulate(split.train, sc);
    em::EmConfig cfg;
    cfg.seed = 620 + seed;
    cfg.threads = default_threads();
    const auto fit = em::fit(crowd, cfg);
    std::vector<LabelSequence> mv;
    for (const auto& inst : crowd.instances) mv.push_back(baselines::mv_token(inst, crowd.scheme.size()));
    const double f_em = heldout_f1(fit.state.crf, split.test);
    const double f_mv = heldout_f1(wrapper_crf(crowd, mv, cfg), split.test);
    sum_em += f_em / 3.0;
    sum_mv += f_mv / 3.0;
    d << "seed " << seed << ": " << fmt(f_em) << " vs " << fmt(f_mv) << "; ";
  }
  d << "mean SA-SLC " << fmt(sum_em) << " vs MV " << fmt(sum_mv);
  return {sum_em >= sum_mv, d.str()};
}

Outcome simulator_calibration() {
  const auto gold = sim::generate_gold_corpus(400, 707);
  const std::size_t entities = sim::gold_stats(gold).entities;
  double worst = 0.0;
  std::ostringstream d;
  d << entities << " gold entities;";
  for (double p : {0.3, 0.5, 0.7, 0.9}) {
    sim::SimConfig sc;
    sc.annotators = 5;
    sc.target_p = p;
    sc.seed = 708;
    sim::SimReport rep;
    sim::simulate(gold, sc, &rep);
    worst = std::max(worst, std::abs(rep.mean_precision() - p));
    d << " " << p << "->" << fmt(rep.mean_precision());
  }
  return {entities >= 200 && worst <= 0.05, d.str()};
}

Outcome prf_fixtures() {
  int wrong = 0;
  const auto table = fixture::prf_table();
  for (const auto& c : table) {
    const auto r = eval::entity_prf(c.pred, c.gold, fixture::per_org());
    wrong += !(r.tp == c.tp && r.fp == c.fp && r.fn == c.fn && r.precision == c.precision &&
               r.recall == c.recall && std::abs(r.f1 - c.f1) <= 1e-15);
  }
  return {table.size() == 10 && wrong == 0, std::to_string(table.size() - wrong) + "/" +
                                                std::to_string(table.size()) + " fixture rows reproduced"};
}

Outcome dawid_skene() {
  std::vector<LabelSequence> truth;
  const auto ds = fixture::planted_crowd({0.85, 0.85, -1.0}, 100, 909, truth);
  double worst = 0.0;
  for (double s : {0.0, 1.0}) {
    const auto fit = baselines::ds_fit(ds, 100, 0.0, s);
    for (std::size_t i = 1; i < fit.objective_history.size(); ++i)
      worst = std::max(worst, fit.objective_history[i - 1] - fit.objective_history[i]);
  }
  const auto fit = baselines::ds_fit(ds);
  std::vector<LabelSequence> mv, dsp;
  for (const auto& inst : ds.instances) {
    mv.push_back(baselines::mv_token(inst, ds.scheme.size()));
    dsp.push_back(baselines::ds_decode(fit.model, inst));
  }
  const double a_ds = fixture::token_accuracy(dsp, truth), a_mv = fixture::token_accuracy(mv, truth);
  return {worst <= 1e-9 && a_ds >= a_mv, "largest likelihood drop " + fmt(worst) + "; accuracy DS " + fmt(a_ds) +
                                              " vs MV " + fmt(a_mv)};
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "saslc_acceptance_repro";
  fs::remove_all(root);
  auto gold = sim::generate_gold_corpus(80, 1001);
  std::vector<TokenSequence> xs;
  std::vector<LabelSequence> zs;
  for (const auto& inst : gold.instances) {
    xs.push_back(inst.x);
    zs.push_back(*inst.gold);
  }
  const std::vector<std::string> files = {"crowd.tsv", "mv.conll",  "ds.conll", "model.crf",
                                          "model.crf.annotators", "history.tsv", "pred.conll"};
  auto run_all = [&](const std::string& tag, const std::string& threads) {
    const fs::path dir = root / tag;
    fs::create_directories(dir);
    const auto p = [&](const std::string& f) { return (dir / f).string(); };
    io::save_conll(p("gold.conll"), io::from_sequences(xs, zs, gold.scheme));
    std::ostringstream out, err;
    bool ok = true;
    auto run = [&](std::vector<std::string> args) { ok = ok && run_cli(args, out, err) == 0; };
    run({"simulate", "--gold", p("gold.conll"), "--out", p("crowd.tsv"), "--seed", "7", "--threads", threads});
    run({"aggregate", "--method", "mv", "--crowd", p("crowd.tsv"), "--out", p("mv.conll")});
    run({"aggregate", "--method", "ds", "--crowd", p("crowd.tsv"), "--out", p("ds.conll")});
    run({"train", "--crowd", p("crowd.tsv"), "--model", p("model.crf"), "--history", p("history.tsv"), "--seed",
         "8", "--max-iters", "4", "--threads", threads});
    run({"decode", "--model", p("model.crf"), "--input", p("gold.conll"), "--out", p("pred.conll")});
    return ok;
  };
  if (!run_all("a", "1") || !run_all("b", "1") || !run_all("c", "4")) return {false, "a pipeline command failed"};
  int differ = 0;
  for (const auto& f : files) {
    const auto a = io::read_file((root / "a" / f).string());
    differ += a != io::read_file((root / "b" / f).string()) || a != io::read_file((root / "c" / f).string());
  }
  fs::remove_all(root);
  return {differ == 0, std::to_string(files.size() - differ) + "/" + std::to_string(files.size()) +
                           " output files identical across three runs (1, 1 and 4 threads)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"CRF inference matches enumeration", crf_oracle},
      {"NLL gradient matches finite differences", gradient_check},
      {"valid-sequence enumeration matches brute force", vlse_enumeration},
      {"EM observed log-likelihood never decreases", em_ascent},
      {"noiseless crowd recovers gold CRF and identity tensors", noiseless_recovery},
      {"SA-SLC beats the MV wrapper at low precision", beats_majority_vote},
      {"simulator hits target precision", simulator_calibration},
      {"entity P/R/F1 fixture table", prf_fixtures},
      {"Dawid-Skene ascent and planted accuracy", dawid_skene},
      {"same seed gives byte-identical outputs", reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << std::setw(2) << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  "
              << criteria[i].first << "  (" << o.detail << ")" << std::endl;
  }
  return failures;
}
