#include "saslc/cli.h"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "saslc/annotator.h"
#include "saslc/baselines.h"
#include "saslc/crf.h"
#include "saslc/em.h"
#include "saslc/evaluation.h"
#include "saslc/io.h"
#include "saslc/simulator.h"
#include "saslc/util.h"
#include "saslc/vlse.h"

namespace saslc {

namespace {

struct Common {
  std::string config;
  unsigned threads = default_threads();
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool with_seed) {
  sub->add_option("--config", c.config, "run configuration file (key = value)");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  if (with_seed) sub->add_option("--seed", c.seed, "random seed");
}

io::RunConfig load_run_config(const Common& c) {
  io::RunConfig cfg = c.config.empty() ? io::RunConfig{} : io::load_config(c.config);
  cfg.em.threads = c.threads;
  return cfg;
}

std::uint64_t require_seed(const Common& c, const std::string& what) {
  if (!c.seed) throw std::invalid_argument(what + " is stochastic and requires --seed");
  return *c.seed;
}

// Writes to a file, or to `out` for "-".
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path == "-") {
    out << content;
  } else {
    io::write_file(path, content);
  }
}

LabelScheme bio_scheme_from(const std::vector<std::string>& labels, const std::string& what) {
  LabelScheme scheme = LabelScheme::infer(labels);
  if (scheme.kind() != SchemeKind::kBio) throw DataError(what + " labels are not a BIO scheme");
  return scheme;
}

CrowdDataset load_checked_crowd(const std::string& path) {
  CrowdDataset ds = io::load_crowd(path);
  const auto violations = validate_dataset(ds);
  if (!violations.empty()) throw DataError(path + ": " + violations.front().message);
  return ds;
}

crf::OptimizeOptions crf_options(const em::EmConfig& cfg) {
  crf::OptimizeOptions opts;
  opts.max_iters = cfg.init_crf_iters;
  opts.grad_tol = cfg.grad_tol;
  opts.lambda = cfg.lambda;
  opts.threads = cfg.threads;
  return opts;
}

std::vector<LabelSequence> wrapper_labels(const std::string& method, const CrowdDataset& ds) {
  std::vector<LabelSequence> out;
  if (method == "mv") {
    for (const auto& inst : ds.instances) out.push_back(baselines::mv_token(inst, ds.scheme.size()));
  } else {
    const auto fit = baselines::ds_fit(ds);
    for (const auto& inst : ds.instances) out.push_back(baselines::ds_decode(fit.model, inst));
  }
  return out;
}

std::vector<TokenSequence> tokens_of(const CrowdDataset& ds) {
  std::vector<TokenSequence> xs;
  for (const auto& inst : ds.instances) xs.push_back(inst.x);
  return xs;
}

std::string conll_text(const std::vector<TokenSequence>& xs, const std::vector<LabelSequence>& ys,
                       const LabelScheme& scheme) {
  std::ostringstream os;
  io::write_conll(os, io::from_sequences(xs, ys, scheme));
  return os.str();
}

struct SimulateArgs {
  Common common;
  std::string gold, out;
  std::optional<std::size_t> annotators;
  std::optional<double> precision, sigma;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  io::RunConfig cfg = load_run_config(a.common);
  cfg.sim.seed = require_seed(a.common, "simulate");
  if (a.annotators) cfg.sim.annotators = *a.annotators;
  if (a.precision) cfg.sim.target_p = *a.precision;
  if (a.sigma) cfg.sim.sigma_p = *a.sigma;
  const auto corpus = io::load_conll(a.gold);
  const auto gold = io::to_dataset(corpus, bio_scheme_from(io::observed_labels(corpus), a.gold));
  sim::SimReport report;
  const auto crowd = sim::simulate(gold, cfg.sim, &report);
  std::ostringstream text;
  io::write_crowd(text, crowd);
  emit(a.out, text.str(), out);
  std::ostream& table = a.out == "-" ? err : out;
  table << "annotator\ttarget_p\tsurvival_q\tachieved_p\tcorrupted\tpredicted\n";
  for (const auto& s : report.annotators) {
    table << s.id << '\t' << std::fixed << std::setprecision(4) << s.target_p << '\t' << s.survival_q
          << '\t' << s.achieved_precision << '\t' << s.corrupted << '\t' << s.predicted << '\n';
  }
  table << "mean\t" << std::fixed << std::setprecision(4) << cfg.sim.target_p << "\t-\t"
        << report.mean_precision() << "\t-\t-\n";
  return 0;
}

struct AggregateArgs {
  Common common;
  std::string method = "saslc", crowd, out = "-";
};

int cmd_aggregate(const AggregateArgs& a, std::ostream& out) {
  io::RunConfig cfg = load_run_config(a.common);
  const auto ds = load_checked_crowd(a.crowd);
  std::vector<LabelSequence> ys;
  if (a.method == "saslc") {
    cfg.em.seed = require_seed(a.common, "aggregate --method saslc");
    const auto fit = em::fit(ds, cfg.em);
    ys = em::map_sequences(fit.state, ds, cfg.em.threads);
  } else {
    ys = wrapper_labels(a.method, ds);
  }
  emit(a.out, conll_text(tokens_of(ds), ys, ds.scheme), out);
  return 0;
}

struct TrainArgs {
  Common common;
  std::string method = "saslc", crowd, gold, model, annotators, history;
  std::optional<int> max_iters;
  bool verbose = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  io::RunConfig cfg = load_run_config(a.common);
  if (a.max_iters) cfg.em.max_iters = *a.max_iters;
  crf::CrfModel model;
  if (a.method == "gold") {
    if (a.gold.empty()) throw std::invalid_argument("train --method gold requires --gold");
    const auto corpus = io::load_conll(a.gold);
    const auto ds = io::to_dataset(corpus, LabelScheme::infer(io::observed_labels(corpus)));
    std::vector<LabelSequence> ys;
    for (const auto& inst : ds.instances) ys.push_back(*inst.gold);
    model = crf::train_supervised(ds.scheme, cfg.em.templates, corpus.tokens, ys, crf_options(cfg.em));
  } else {
    if (a.crowd.empty()) throw std::invalid_argument("train --method " + a.method + " requires --crowd");
    const auto ds = load_checked_crowd(a.crowd);
    if (a.method == "saslc") {
      cfg.em.seed = require_seed(a.common, "train --method saslc");
      const auto fit = em::fit(ds, cfg.em, a.verbose ? &err : nullptr);
      model = fit.state.crf;
      const std::string ann_path = a.annotators.empty() ? a.model + ".annotators" : a.annotators;
      std::ostringstream ann;
      annotator::save_params(ann, fit.state.annotators, ds.scheme, ds.roster);
      io::write_file(ann_path, ann.str());
      if (!a.history.empty()) {
        std::ostringstream h;
        em::write_history(h, fit.history);
        io::write_file(a.history, h.str());
      }
      out << "iterations\t" << fit.history.size() - 1 << "\nconverged\t" << (fit.converged ? 1 : 0)
          << "\nobjective\t" << format_double(fit.history.back().objective) << "\ncapped_lattices\t"
          << em::capped_lattices(fit.state) << '\n';
    } else {
      const auto ys = wrapper_labels(a.method, ds);
      model = crf::train_supervised(ds.scheme, cfg.em.templates, tokens_of(ds), ys, crf_options(cfg.em));
    }
  }
  std::ostringstream os;
  model.save(os);
  io::write_file(a.model, os.str());
  return 0;
}

struct DecodeArgs {
  std::string model, input, out = "-";
};

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
  std::istringstream ms(io::read_file(a.model));
  const auto model = crf::CrfModel::load(ms);
  const auto xs = io::load_tokens(a.input);
  std::vector<LabelSequence> ys;
  for (const auto& x : xs) ys.push_back(crf::predict(model, x));
  emit(a.out, conll_text(xs, ys, model.scheme()), out);
  return 0;
}

struct EvaluateArgs {
  std::string pred, gold;
  bool strict = false, by_type = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto pc = io::load_conll(a.pred);
  const auto gc = io::load_conll(a.gold);
  if (pc.size() != gc.size()) {
    throw DataError("'" + a.pred + "' has " + std::to_string(pc.size()) + " sequences, '" + a.gold +
                    "' has " + std::to_string(gc.size()));
  }
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (pc.tokens[i] != gc.tokens[i]) throw DataError("sequence " + std::to_string(i) + ": tokens differ");
  }
  auto labels = io::observed_labels(gc);
  for (const auto& l : io::observed_labels(pc)) labels.push_back(l);
  const auto scheme = bio_scheme_from(labels, "evaluated");
  const auto pd = io::to_dataset(pc, scheme);
  const auto gd = io::to_dataset(gc, scheme);
  std::vector<LabelSequence> p, g;
  for (std::size_t i = 0; i < pd.instances.size(); ++i) {
    p.push_back(*pd.instances[i].gold);
    g.push_back(*gd.instances[i].gold);
  }
  const auto r = eval::entity_prf(p, g, scheme, a.strict);
  out << std::fixed << std::setprecision(4);
  out << "precision " << std::setw(8) << r.precision << '\n';
  out << "recall    " << std::setw(8) << r.recall << '\n';
  out << "F1        " << std::setw(8) << r.f1 << '\n';
  out << "tp " << r.tp << "  fp " << r.fp << "  fn " << r.fn << '\n';
  if (a.by_type) {
    for (const auto& [type, t] : eval::entity_prf_by_type(p, g, scheme, a.strict)) {
      out << std::left << std::setw(10) << type << std::right << " P " << t.precision << "  R " << t.recall
          << "  F1 " << t.f1 << '\n';
    }
  }
  out << format_double(r.precision) << '\t' << format_double(r.recall) << '\t' << format_double(r.f1) << '\t'
      << r.tp << '\t' << r.fp << '\t' << r.fn << '\n';
  return 0;
}

struct InspectArgs {
  Common common;
  std::string crowd;
  std::size_t instance = 0;
  std::size_t sequences = 10;
};

std::string label_list(const std::vector<Label>& ls, const LabelScheme& scheme) {
  std::string s;
  for (std::size_t i = 0; i < ls.size(); ++i) s += (i ? "," : "") + scheme.name(ls[i]);
  return s;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_run_config(a.common);
  const auto ds = load_checked_crowd(a.crowd);
  if (a.instance >= ds.instances.size()) {
    throw std::invalid_argument("instance " + std::to_string(a.instance) + " out of range (" +
                                std::to_string(ds.instances.size()) + " instances)");
  }
  const auto& inst = ds.instances[a.instance];
  const auto raw = vlse::candidate_sets(inst, ds.scheme, ds.num_annotators(), cfg.em.vlse);
  const auto lat = vlse::build_lattice(inst, ds.scheme, ds.num_annotators(), cfg.em.vlse);
  const auto [t1, t2] = vlse::resolve_thresholds(cfg.em.vlse, ds.num_annotators());
  out << "t1\t" << format_double(t1) << "\nt2\t" << format_double(t2) << '\n';
  out << "position\ttoken\tlc\tcandidates\twidened\n";
  for (std::size_t j = 0; j < inst.length(); ++j) {
    const auto entry = vlse::label_consistency(inst, j, cfg.em.vlse.mode);
    const bool widened = std::find(lat.widened.begin(), lat.widened.end(), j) != lat.widened.end();
    out << j << '\t' << inst.x[j] << '\t' << format_double(entry.lc) << '\t'
        << label_list(lat.candidates[j], ds.scheme) << '\t' << (widened ? 1 : 0) << '\n';
  }
  out << "unpruned\t" << vlse::count_unpruned(lat.candidates) << '\n';
  out << "valid\t" << lat.valid_count << '\n';
  out << "enumerated\t" << lat.size() << '\n';
  out << "capped\t" << (lat.capped ? 1 : 0) << '\n';
  out << "raw_unpruned\t" << vlse::count_unpruned(raw) << '\n';
  out << "rank\tagreement\tsequence\n";
  for (std::size_t n = 0; n < std::min(a.sequences, lat.size()); ++n) {
    out << n << '\t' << lat.agreement[n] << '\t';
    for (std::size_t j = 0; j < lat.sequences[n].size(); ++j) {
      out << (j ? " " : "") << ds.scheme.name(lat.sequences[n][j]);
    }
    out << '\n';
  }
  return 0;
}

struct ReportArgs {
  std::string annotators;
  std::vector<std::string> queries;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::istringstream is(io::read_file(a.annotators));
  const auto loaded = annotator::load_params(is);
  const auto& params = loaded.params;
  const auto& scheme = loaded.scheme;
  const std::size_t m = scheme.size();
  auto mean_diag = [m](const annotator::ConfusionTensor& t) {
    const std::vector<double> flat(t.contexts() * m * m, 1.0);
    return annotator::correct_label_mass(t, flat);
  };
  if (a.queries.empty()) {
    out << "annotator\talpha_diag\tbeta_diag\n";
    for (std::size_t k = 0; k < params.num_annotators(); ++k) {
      out << loaded.roster[k] << '\t' << format_double(mean_diag(params.alpha[k])) << '\t'
          << format_double(mean_diag(params.beta[k])) << '\n';
    }
    return 0;
  }
  out << "annotator\ttensor\tcontext\ttruth";
  for (const auto& l : scheme.labels()) out << '\t' << l;
  out << '\n';
  for (const auto& q : a.queries) {
    const auto comma = q.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("query '" + q + "' is not CONTEXT,TRUTH");
    const std::string ctx = q.substr(0, comma), truth = q.substr(comma + 1);
    const Label z = scheme.index(truth);
    const bool bos = ctx == "<BOS>";
    const std::size_t ci = bos ? params.bos() : scheme.index(ctx);
    for (std::size_t k = 0; k < params.num_annotators(); ++k) {
      for (int tensor = 0; tensor < (bos ? 1 : 2); ++tensor) {
        const auto& t = tensor == 0 ? params.alpha[k] : params.beta[k];
        out << loaded.roster[k] << '\t' << (tensor == 0 ? "alpha" : "beta") << '\t' << ctx << '\t' << truth;
        for (double v : t.row(ci, z)) out << '\t' << format_double(v);
        out << '\n';
      }
    }
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sequence labeling from crowd annotations"};
  app.name("saslc");
  app.require_subcommand(1, 1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "corrupt gold CoNLL labels into a simulated crowd");
  add_common(s, sim.common, true);
  s->add_option("--gold", sim.gold, "gold CoNLL file")->required();
  s->add_option("--out", sim.out, "crowd file to write ('-' for stdout)")->required();
  s->add_option("--annotators", sim.annotators, "number of annotators");
  s->add_option("--precision", sim.precision, "target mean entity precision");
  s->add_option("--sigma", sim.sigma, "per-annotator precision spread");

  AggregateArgs agg;
  auto* g = app.add_subcommand("aggregate", "infer one label sequence per crowd instance");
  add_common(g, agg.common, true);
  g->add_option("--method", agg.method, "mv, ds or saslc")->check(CLI::IsMember({"mv", "ds", "saslc"}));
  g->add_option("--crowd", agg.crowd, "crowd file")->required();
  g->add_option("--out", agg.out, "CoNLL file to write ('-' for stdout)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a CRF from crowd or gold labels");
  add_common(t, tr.common, true);
  t->add_option("--method", tr.method, "saslc, mv, ds or gold")
      ->check(CLI::IsMember({"saslc", "mv", "ds", "gold"}));
  t->add_option("--crowd", tr.crowd, "crowd file");
  t->add_option("--gold", tr.gold, "gold CoNLL file (method gold)");
  t->add_option("--model", tr.model, "CRF model file to write")->required();
  t->add_option("--annotators-out", tr.annotators, "annotator file to write (default MODEL.annotators)");
  t->add_option("--history", tr.history, "EM history TSV to write");
  t->add_option("--max-iters", tr.max_iters, "EM iterations")->check(CLI::NonNegativeNumber);
  t->add_flag("--verbose", tr.verbose, "log EM iterations to stderr");

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Viterbi-decode a token file");
  d->add_option("--model", dec.model, "CRF model file")->required();
  d->add_option("--input", dec.input, "CoNLL or token-per-line file")->required();
  d->add_option("--out", dec.out, "CoNLL file to write ('-' for stdout)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "exact-match entity P/R/F1");
  e->add_option("pred", ev.pred, "predicted CoNLL file")->required();
  e->add_option("gold", ev.gold, "gold CoNLL file")->required();
  e->add_flag("--strict", ev.strict, "ignore orphan I- runs");
  e->add_flag("--by-type", ev.by_type, "per entity type table");

  InspectArgs ins;
  auto* il = app.add_subcommand("inspect-lattice", "show VLSE candidates and valid sequences");
  add_common(il, ins.common, false);
  il->add_option("--crowd", ins.crowd, "crowd file")->required();
  il->add_option("--instance", ins.instance, "instance index (0-based)");
  il->add_option("--sequences", ins.sequences, "number of sequences to list");

  ReportArgs rep;
  auto* ra = app.add_subcommand("report-annotators", "print learned annotator tensors");
  ra->add_option("--annotators", rep.annotators, "annotator file")->required();
  ra->add_option("--query", rep.queries, "CONTEXT,TRUTH row to print (repeatable)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out, err);
    if (g->parsed()) return cmd_aggregate(agg, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (d->parsed()) return cmd_decode(dec, out);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (il->parsed()) return cmd_inspect(ins, out);
    if (ra->parsed()) return cmd_report(rep, out);
  } catch (const DataError& de) {
    err << "error: " << de.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& ia) {
    err << "error: " << ia.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace saslc
