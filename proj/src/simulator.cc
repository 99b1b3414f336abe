#include "saslc/simulator.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "saslc/evaluation.h"
#include "saslc/util.h"

namespace saslc::sim {

void CorruptionMix::validate() const {
  const double w[] = {type_swap, boundary_shift, entity_drop, spurious};
  double s = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw std::invalid_argument("corruption mix weights must be >= 0");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("corruption mix weights must sum to 1");
}

GoldStats gold_stats(const CrowdDataset& gold) {
  GoldStats st;
  for (const auto& inst : gold.instances) {
    if (!inst.gold) continue;
    st.entities += eval::extract_entities(*inst.gold, gold.scheme).size();
    for (Label l : *inst.gold) st.outside_tokens += gold.scheme.prefix(l) == BioPrefix::kOutside;
  }
  return st;
}

namespace {

double expected_precision(double q, const CorruptionMix& mix) {
  const double still_predicted = (1.0 - q) * (1.0 - mix.entity_drop);
  const double denom = q + still_predicted;
  return denom > 0.0 ? q / denom : 1.0;
}

}  // namespace

double calibrate_q(double target_p, const CorruptionMix& mix, const GoldStats& stats) {
  mix.validate();
  if (!(target_p > 0.0 && target_p <= 1.0)) throw std::invalid_argument("target precision must be in (0, 1]");
  if (stats.entities == 0) throw std::invalid_argument("gold data has no entities to corrupt");
  if (target_p == 1.0) return 1.0;
  if (mix.entity_drop >= 1.0) {
    std::ostringstream msg;
    msg << "target precision " << target_p
        << " unreachable: a pure entity-drop mix only yields precision 1 (feasible range [1, 1])";
    throw std::invalid_argument(msg.str());
  }
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_precision(mid, mix) < target_p ? lo : hi) = mid;
  }
  const double q = 0.5 * (lo + hi);
  if (std::abs(expected_precision(q, mix) - target_p) >= 1e-3) {
    throw std::invalid_argument("calibration failed to reach target precision");
  }
  return q;
}

std::vector<double> annotator_precisions(const SimConfig& cfg) {
  if (cfg.annotators == 0) throw std::invalid_argument("need at least one annotator");
  if (!(cfg.target_p > 0.0 && cfg.target_p <= 1.0)) throw std::invalid_argument("target precision must be in (0, 1]");
  if (!(cfg.sigma_p >= 0.0)) throw std::invalid_argument("precision spread must be >= 0");
  constexpr double kLo = 0.05, kHi = 1.0;
  Rng rng(mix_seed(cfg.seed, 7));
  std::vector<double> eps(cfg.annotators);
  for (double& e : eps) e = rng.normal();
  auto at = [&](double c) {
    std::vector<double> p(eps.size());
    for (std::size_t k = 0; k < eps.size(); ++k) p[k] = std::clamp(c + cfg.sigma_p * eps[k], kLo, kHi);
    return p;
  };
  auto mean = [](const std::vector<double>& p) {
    double s = 0.0;
    for (double v : p) s += v;
    return s / static_cast<double>(p.size());
  };
  if (cfg.sigma_p == 0.0) return std::vector<double>(cfg.annotators, std::max(kLo, cfg.target_p));
  // Smallest c reaching the target mean; mean(at(c)) is non-decreasing in c,
  // so each p_k is non-decreasing in target_p.
  double lo = cfg.target_p - 20.0 * cfg.sigma_p - 1.0, hi = cfg.target_p + 20.0 * cfg.sigma_p + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean(at(mid)) < cfg.target_p ? lo : hi) = mid;
  }
  return at(hi);
}

double SimReport::mean_precision() const {
  if (annotators.empty()) return 0.0;
  double s = 0.0;
  for (const auto& a : annotators) s += a.achieved_precision;
  return s / static_cast<double>(annotators.size());
}

namespace {

enum class Op { kKeep, kSwap, kShift, kDrop, kSpurious };

struct EntityDraw {
  double survive, op, a, b;
};

Op pick_op(double u, const CorruptionMix& mix) {
  if (u < mix.type_swap) return Op::kSwap;
  if (u < mix.type_swap + mix.boundary_shift) return Op::kShift;
  if (u < mix.type_swap + mix.boundary_shift + mix.entity_drop) return Op::kDrop;
  return Op::kSpurious;
}

std::size_t pick(double u, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
}

// Applies the per-entity decisions to one sentence.
std::vector<eval::EntitySpan> corrupt_sentence(const std::vector<eval::EntitySpan>& gold_spans,
                                               const LabelSequence& gold, const LabelScheme& scheme,
                                               const std::vector<EntityDraw>& draws, double q,
                                               const CorruptionMix& mix, std::size_t& corrupted) {
  const std::size_t len = gold.size();
  const std::size_t types = scheme.entity_types().size();
  std::vector<char> claimed(len, 0);
  std::vector<eval::EntitySpan> out;
  std::vector<Op> ops(gold_spans.size());
  auto claim = [&](const eval::EntitySpan& s) {
    for (std::size_t t = s.start; t < s.end; ++t) claimed[t] = 1;
    out.push_back(s);
  };
  auto can_swap = [&](int type) {
    for (int t = 0; t < static_cast<int>(types); ++t)
      if (t != type && scheme.begin_of(t) && scheme.inside_of(t)) return true;
    return false;
  };
  for (std::size_t e = 0; e < gold_spans.size(); ++e) {
    ops[e] = draws[e].survive < q ? Op::kKeep : pick_op(draws[e].op, mix);
    if (ops[e] != Op::kKeep) ++corrupted;
    if (ops[e] == Op::kSwap && !can_swap(gold_spans[e].type)) ops[e] = Op::kShift;
  }
  // In-place spans claim their tokens first.
  for (std::size_t e = 0; e < gold_spans.size(); ++e) {
    const auto& g = gold_spans[e];
    if (ops[e] == Op::kKeep) claim(g);
    if (ops[e] == Op::kSwap) {
      std::vector<int> others;
      for (int t = 0; t < static_cast<int>(types); ++t)
        if (t != g.type && scheme.begin_of(t) && scheme.inside_of(t)) others.push_back(t);
      claim({g.start, g.end, others[pick(draws[e].a, others.size())]});
    }
  }
  auto free_outside = [&](std::size_t t) {
    return t < len && !claimed[t] && scheme.prefix(gold[t]) == BioPrefix::kOutside;
  };
  for (std::size_t e = 0; e < gold_spans.size(); ++e) {
    const auto& g = gold_spans[e];
    Op op = ops[e];
    if (op == Op::kShift) {
      std::vector<eval::EntitySpan> options;
      if (g.start > 0 && free_outside(g.start - 1)) options.push_back({g.start - 1, g.end, g.type});
      if (free_outside(g.end)) options.push_back({g.start, g.end + 1, g.type});
      if (g.end - g.start > 1) {
        options.push_back({g.start + 1, g.end, g.type});
        options.push_back({g.start, g.end - 1, g.type});
      }
      if (!options.empty()) {
        claim(options[pick(draws[e].a, options.size())]);
        continue;
      }
      op = Op::kSpurious;
    }
    if (op == Op::kSpurious) {
      std::vector<std::size_t> slots;
      for (std::size_t t = 0; t < len; ++t) {
        if (free_outside(t) && (t + 1 >= len || !claimed[t + 1] ||
                                scheme.prefix(gold[t + 1]) != BioPrefix::kInside)) {
          slots.push_back(t);
        }
      }
      if (!slots.empty()) {
        const std::size_t t = slots[pick(draws[e].a, slots.size())];
        claim({t, t + 1, static_cast<int>(pick(draws[e].b, types))});
        continue;
      }
      if (can_swap(g.type)) {
        std::vector<int> others;
        for (int t = 0; t < static_cast<int>(types); ++t)
          if (t != g.type && scheme.begin_of(t) && scheme.inside_of(t)) others.push_back(t);
        claim({g.start, g.end, others[pick(draws[e].b, others.size())]});
      }
      // Otherwise nothing fits and the entity is dropped.
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

CrowdDataset simulate(const CrowdDataset& gold, const SimConfig& cfg, SimReport* report) {
  cfg.mix.validate();
  if (gold.scheme.kind() != SchemeKind::kBio) throw DataError("simulation requires a BIO scheme");
  for (std::size_t i = 0; i < gold.instances.size(); ++i) {
    const auto& inst = gold.instances[i];
    if (!inst.gold) throw DataError("instance " + std::to_string(i) + " has no gold labels");
    if (inst.gold->size() != inst.length()) throw DataError("instance " + std::to_string(i) + ": gold length mismatch");
    for (std::size_t t = 0; t < inst.length(); ++t) {
      const Label l = (*inst.gold)[t];
      if (l >= gold.scheme.size()) throw DataError("instance " + std::to_string(i) + ": gold label out of range");
      const bool ok = t == 0 ? gold.scheme.start_allowed(l)
                             : gold.scheme.transition_allowed((*inst.gold)[t - 1], l);
      if (!ok) {
        throw DataError("instance " + std::to_string(i) + ": gold is not BIO-valid at position " +
                        std::to_string(t));
      }
    }
  }
  const GoldStats stats = gold_stats(gold);
  const std::vector<double> targets = annotator_precisions(cfg);

  CrowdDataset out;
  out.scheme = gold.scheme;
  for (std::size_t k = 0; k < cfg.annotators; ++k) out.roster.push_back("A" + std::to_string(k + 1));
  std::vector<std::vector<eval::EntitySpan>> spans(gold.instances.size());
  for (std::size_t i = 0; i < gold.instances.size(); ++i) {
    const auto& inst = gold.instances[i];
    spans[i] = eval::extract_entities(*inst.gold, gold.scheme);
    out.instances.push_back({inst.x, std::vector<std::optional<LabelSequence>>(cfg.annotators), inst.gold});
  }

  SimReport rep;
  for (std::size_t k = 0; k < cfg.annotators; ++k) {
    AnnotatorSummary summary;
    summary.id = out.roster[k];
    summary.target_p = targets[k];
    summary.survival_q = calibrate_q(targets[k], cfg.mix, stats);
    Rng rng(mix_seed(cfg.seed, 100 + k));
    std::vector<LabelSequence> preds, golds;
    for (std::size_t i = 0; i < gold.instances.size(); ++i) {
      std::vector<EntityDraw> draws(spans[i].size());
      for (auto& d : draws) d = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
      const auto& g = *gold.instances[i].gold;
      const auto corrupted =
          corrupt_sentence(spans[i], g, gold.scheme, draws, summary.survival_q, cfg.mix, summary.corrupted);
      summary.predicted += corrupted.size();
      LabelSequence y = eval::render_entities(corrupted, g.size(), gold.scheme);
      preds.push_back(y);
      golds.push_back(g);
      out.instances[i].annotations[k] = std::move(y);
    }
    summary.achieved_precision = eval::entity_prf(preds, golds, gold.scheme).precision;
    rep.annotators.push_back(summary);
  }
  if (report) *report = std::move(rep);
  return out;
}

namespace {

const std::array<const char*, 28> kPersons = {
    "John Smith",      "Maria Garcia",  "Wei Zhang",        "Dimitris Kontogiannis",
    "Anna Petrova",    "Ahmed Hassan",  "Yuki Tanaka",      "Carlos Mendes",
    "Peter Brown",     "Olga Ivanova",  "Michael Jordan",   "George Washington",
    "Hans Mueller",    "Priya Sharma",  "Kofi Mensah",      "Laura Rossi",
    "Smith",           "Garcia",        "Clinton",          "Yeltsin",
    "Kohl",            "Mandela",       "Arafat",           "Netanyahu",
    "Boris Becker",    "Steffi Graf",   "Martina Hingis",   "Pete Sampras"};

const std::array<const char*, 24> kOrgs = {
    "Reuters",        "EgyptAir",          "United Nations",     "European Union",
    "General Motors", "Acme Corp",         "Bosnian Serb Army",  "World Bank",
    "Shanghai Petrochemical", "Microsoft", "Deutsche Bank",      "Athens Newsroom",
    "NATO",           "Toyota Motor Corp", "Bank of England",    "Red Cross",
    "FIFA",           "Interfax",          "Ajax",               "Lloyd 's Shipping Intelligence",
    "Boeing",         "Siemens",           "Xinhua",             "Bundesbank"};

const std::array<const char*, 24> kLocations = {
    "Shanghai", "Athens",   "New York", "Paris",        "London",    "Jordan",
    "Washington", "Bosnia", "Cairo",    "Beijing",      "Moscow",    "Tokyo",
    "South Africa", "Hong Kong", "Germany", "Brazil",   "Sarajevo",  "Bonn",
    "Lisbon",   "Nairobi",  "Egypt",    "Los Angeles", "Madrid",    "Seoul"};

const std::array<const char*, 7> kDays = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                          "Friday", "Saturday", "Sunday"};

const std::array<const char*, 20> kTemplates = {
    "{PER} said on {DAY} that {ORG} would open an office in {LOC} .",
    "Traders in {LOC1} said on {DAY} they were unaware of movements out of the {LOC1} bonded warehouses .",
    "{ORG} shares rose {NUM} percent in {LOC} trading on {DAY} .",
    "{PER} , a spokesman for {ORG} , told reporters in {LOC} that the talks would resume .",
    "The {ORG1} board met in {LOC} and said {ORG1} expected profits to rise .",
    "{PER} beat {PER} {NUM} - {NUM} in the final in {LOC} .",
    "{PER1} arrived in {LOC} on {DAY} , and {PER1} will meet officials of the {ORG} .",
    "Police in {LOC} said {NUM} people were killed when the bus hit a truck .",
    "{ORG} said it had signed a deal with {ORG} worth {NUM} million dollars .",
    "The government of {LOC} asked the {ORG} for help , officials said .",
    "{PER} told {ORG} that the {LOC} economy grew {NUM} percent last year .",
    "Flights from {LOC1} to {LOC} were cancelled , and the {LOC1} airport was closed on {DAY} .",
    "The match between {ORG} and {ORG} ended in a draw on {DAY} .",
    "In {LOC} , {PER} of {ORG} said the market was quiet .",
    "{ORG1} flight {NUM} landed in {LOC} after {ORG1} crew reported a fault .",
    "Prices in {LOC} fell on {DAY} as demand for the new product slowed .",
    "It was the first visit by {PER} to {LOC} since {NUM} .",
    "Analysts said the outlook for the sector remained weak .",
    "{PER} and {PER} were named in the squad for the game against {LOC} .",
    "The {ORG} office in {LOC} will be closed until {DAY} ."};

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

}  // namespace

CrowdDataset generate_gold_corpus(std::size_t sentences, std::uint64_t seed) {
  CrowdDataset ds;
  ds.scheme = LabelScheme({"O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC"}, SchemeKind::kBio);
  Rng rng(seed);
  for (std::size_t s = 0; s < sentences; ++s) {
    CrowdInstance inst;
    LabelSequence gold;
    std::map<std::string, std::string> pinned;
    for (const auto& w : split_words(kTemplates[rng.index(kTemplates.size())])) {
      std::string type;
      std::string surface;
      if (w == "{DAY}") {
        inst.x.emplace_back(kDays[rng.index(kDays.size())]);
        gold.push_back(0);
        continue;
      }
      if (w == "{NUM}") {
        inst.x.push_back(std::to_string(1 + rng.index(999)));
        gold.push_back(0);
        continue;
      }
      if (w.size() > 4 && w.front() == '{') {
        type = w.substr(1, 3);
        const bool repeat = w[4] == '1';
        auto draw = [&]() -> std::string {
          if (type == "PER") return kPersons[rng.index(kPersons.size())];
          if (type == "ORG") return kOrgs[rng.index(kOrgs.size())];
          return kLocations[rng.index(kLocations.size())];
        };
        if (repeat) {
          auto it = pinned.find(w);
          surface = it != pinned.end() ? it->second : (pinned[w] = draw());
        } else {
          surface = draw();
        }
        const Label b = ds.scheme.index("B-" + type);
        const Label in = ds.scheme.index("I-" + type);
        bool first = true;
        for (const auto& tok : split_words(surface)) {
          inst.x.push_back(tok);
          gold.push_back(first ? b : in);
          first = false;
        }
        continue;
      }
      inst.x.push_back(w);
      gold.push_back(0);
    }
    inst.gold = std::move(gold);
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

}  // namespace saslc::sim
