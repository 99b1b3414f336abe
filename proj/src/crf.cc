#include "saslc/crf.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "saslc/util.h"

namespace saslc::crf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct KindName {
  TemplateKind kind;
  const char* name;
  int default_param;
};

constexpr KindName kKindNames[] = {
    {TemplateKind::kBias, "bias", 0},
    {TemplateKind::kTokenIdentity, "token-identity", 0},
    {TemplateKind::kTokenLowercase, "token-lowercase", 0},
    {TemplateKind::kPrefix, "prefix", 3},
    {TemplateKind::kSuffix, "suffix", 3},
    {TemplateKind::kIsCapitalized, "is-capitalized", 0},
    {TemplateKind::kIsDigit, "is-digit", 0},
    {TemplateKind::kPreviousToken, "previous-token", 1},
    {TemplateKind::kNextToken, "next-token", 1},
    {TemplateKind::kLabelBigram, "label-bigram", 0},
    {TemplateKind::kLabelBigramToken, "label-bigram-token", 0},
};

bool takes_param(TemplateKind k) {
  return k == TemplateKind::kPrefix || k == TemplateKind::kSuffix ||
         k == TemplateKind::kPreviousToken || k == TemplateKind::kNextToken;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string FeatureTemplate::name() const {
  for (const auto& kn : kKindNames) {
    if (kn.kind != kind) continue;
    std::string n = kn.name;
    if (takes_param(kind)) n += "-" + std::to_string(param);
    return n;
  }
  return "unknown";
}

FeatureTemplate FeatureTemplate::parse(std::string_view name) {
  for (const auto& kn : kKindNames) {
    std::string_view base = kn.name;
    if (name == base) return {kn.kind, kn.default_param};
    if (takes_param(kn.kind) && name.size() > base.size() + 1 &&
        name.substr(0, base.size()) == base && name[base.size()] == '-') {
      std::string digits(name.substr(base.size() + 1));
      if (!std::all_of(digits.begin(), digits.end(), ::isdigit)) break;
      int p = std::stoi(digits);
      if (p < 1) break;
      return {kn.kind, p};
    }
  }
  throw std::invalid_argument("unknown feature template: " + std::string(name));
}

std::vector<FeatureTemplate> default_templates() {
  return {{TemplateKind::kBias, 0},          {TemplateKind::kTokenIdentity, 0},
          {TemplateKind::kTokenLowercase, 0}, {TemplateKind::kPrefix, 3},
          {TemplateKind::kSuffix, 3},         {TemplateKind::kIsCapitalized, 0},
          {TemplateKind::kIsDigit, 0},        {TemplateKind::kPreviousToken, 1},
          {TemplateKind::kNextToken, 1},      {TemplateKind::kLabelBigram, 0}};
}

std::vector<FeatureTemplate> parse_templates(std::string_view list) {
  std::vector<FeatureTemplate> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto pos = list.find(',', start);
    auto item = list.substr(start, pos == std::string_view::npos ? list.size() - start : pos - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(FeatureTemplate::parse(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty feature template list");
  return out;
}

std::string format_templates(std::span<const FeatureTemplate> templates) {
  std::string out;
  for (const auto& t : templates) {
    if (!out.empty()) out += ',';
    out += t.name();
  }
  return out;
}

std::uint32_t FeatureIndex::add(const std::string& name) {
  auto [it, inserted] = ids_.emplace(name, static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

const std::uint32_t* FeatureIndex::find(const std::string& name) const {
  auto it = ids_.find(name);
  return it == ids_.end() ? nullptr : &it->second;
}

SequencePotentials::SequencePotentials(std::size_t length, std::size_t labels,
                                       bool position_dependent)
    : length_(length),
      labels_(labels),
      position_dependent_(position_dependent),
      unary_(length * labels, 0.0),
      pair_((position_dependent ? std::max<std::size_t>(length, 1) - 1 : 1) * labels * labels,
            0.0) {}

void SequencePotentials::shift_unary(double c) {
  for (double& u : unary_) u += c;
}

double sequence_score(const SequencePotentials& pot, std::span<const Label> z) {
  double s = 0.0;
  for (std::size_t t = 0; t < z.size(); ++t) {
    s += pot.unary(t, z[t]);
    if (t > 0) s += pot.pair(t, z[t - 1], z[t]);
  }
  return s;
}

namespace {

// alpha[t*M+y]: log-sum of scores of prefixes ending in y at t.
std::vector<double> forward(const SequencePotentials& pot) {
  const std::size_t len = pot.length(), m = pot.num_labels();
  std::vector<double> alpha(len * m);
  std::vector<double> scratch(m);
  for (Label y = 0; y < m; ++y) alpha[y] = pot.unary(0, y);
  for (std::size_t t = 1; t < len; ++t) {
    for (Label b = 0; b < m; ++b) {
      for (Label a = 0; a < m; ++a) scratch[a] = alpha[(t - 1) * m + a] + pot.pair(t, a, b);
      alpha[t * m + b] = log_sum_exp(scratch) + pot.unary(t, b);
    }
  }
  return alpha;
}

std::vector<double> backward(const SequencePotentials& pot) {
  const std::size_t len = pot.length(), m = pot.num_labels();
  std::vector<double> beta(len * m, 0.0);
  std::vector<double> scratch(m);
  for (std::size_t t = len - 1; t-- > 0;) {
    for (Label a = 0; a < m; ++a) {
      for (Label b = 0; b < m; ++b) {
        scratch[b] = pot.pair(t + 1, a, b) + pot.unary(t + 1, b) + beta[(t + 1) * m + b];
      }
      beta[t * m + a] = log_sum_exp(scratch);
    }
  }
  return beta;
}

}  // namespace

double log_partition(const SequencePotentials& pot) {
  if (pot.length() == 0) return 0.0;
  auto alpha = forward(pot);
  const std::size_t m = pot.num_labels();
  return log_sum_exp(std::span<const double>(alpha).subspan((pot.length() - 1) * m, m));
}

Marginals marginals(const SequencePotentials& pot) {
  const std::size_t len = pot.length(), m = pot.num_labels();
  Marginals out;
  out.length = len;
  out.labels = m;
  if (len == 0) return out;
  auto alpha = forward(pot);
  auto beta = backward(pot);
  out.log_z = log_sum_exp(std::span<const double>(alpha).subspan((len - 1) * m, m));
  out.unary.resize(len * m);
  for (std::size_t i = 0; i < len * m; ++i) out.unary[i] = std::exp(alpha[i] + beta[i] - out.log_z);
  out.pair.resize((len - 1) * m * m);
  for (std::size_t t = 1; t < len; ++t) {
    for (Label a = 0; a < m; ++a) {
      for (Label b = 0; b < m; ++b) {
        out.pair[((t - 1) * m + a) * m + b] =
            std::exp(alpha[(t - 1) * m + a] + pot.pair(t, a, b) + pot.unary(t, b) +
                     beta[t * m + b] - out.log_z);
      }
    }
  }
  return out;
}

LabelSequence viterbi(const SequencePotentials& pot) {
  const std::size_t len = pot.length(), m = pot.num_labels();
  if (len == 0) return {};
  std::vector<double> delta(len * m);
  std::vector<Label> back(len * m, 0);
  for (Label y = 0; y < m; ++y) delta[y] = pot.unary(0, y);
  for (std::size_t t = 1; t < len; ++t) {
    for (Label b = 0; b < m; ++b) {
      double best = kNegInf;
      Label arg = 0;
      for (Label a = 0; a < m; ++a) {
        const double v = delta[(t - 1) * m + a] + pot.pair(t, a, b);
        if (v > best) {
          best = v;
          arg = a;
        }
      }
      delta[t * m + b] = best + pot.unary(t, b);
      back[t * m + b] = arg;
    }
  }
  LabelSequence z(len);
  double best = kNegInf;
  for (Label y = 0; y < m; ++y) {
    if (delta[(len - 1) * m + y] > best) {
      best = delta[(len - 1) * m + y];
      z[len - 1] = y;
    }
  }
  for (std::size_t t = len - 1; t > 0; --t) z[t - 1] = back[t * m + z[t]];
  return z;
}

SequencePotentials WeightLayout::potentials(const SequenceFeatures& f,
                                            std::span<const double> w) const {
  const std::size_t len = f.length();
  SequencePotentials pot(len, labels, position_dependent());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::uint32_t obs : f.unary[t]) {
      const double* row = &w[unary_weight(obs, 0)];
      for (Label y = 0; y < labels; ++y) pot.unary(t, y) += row[y];
    }
  }
  if (!position_dependent()) {
    if (bigram) {
      for (Label a = 0; a < labels; ++a)
        for (Label b = 0; b < labels; ++b) pot.pair(1, a, b) = w[bigram_weight(a, b)];
    }
    return pot;
  }
  for (std::size_t t = 1; t < len; ++t) {
    for (Label a = 0; a < labels; ++a) {
      for (Label b = 0; b < labels; ++b) {
        double v = bigram ? w[bigram_weight(a, b)] : 0.0;
        for (std::uint32_t obs : f.pair[t]) v += w[pair_weight(obs, a, b)];
        pot.pair(t, a, b) = v;
      }
    }
  }
  return pot;
}

CrfModel::CrfModel(LabelScheme scheme, std::vector<FeatureTemplate> templates)
    : scheme_(std::move(scheme)), templates_(std::move(templates)) {
  layout_.labels = scheme_.size();
  layout_.bigram = std::any_of(templates_.begin(), templates_.end(), [](const auto& t) {
    return t.kind == TemplateKind::kLabelBigram;
  });
  weights_.assign(layout_.dimension(), 0.0);
}

std::vector<std::string> CrfModel::observations(const TokenSequence& x, std::size_t t) const {
  std::vector<std::string> out;
  const std::string& tok = x[t];
  for (const auto& tpl : templates_) {
    switch (tpl.kind) {
      case TemplateKind::kBias:
        out.emplace_back("bias");
        break;
      case TemplateKind::kTokenIdentity:
        out.push_back("w=" + tok);
        break;
      case TemplateKind::kTokenLowercase: {
        std::string lw = tok;
        std::transform(lw.begin(), lw.end(), lw.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        out.push_back("lw=" + lw);
        break;
      }
      case TemplateKind::kPrefix:
        out.push_back("p" + std::to_string(tpl.param) + "=" + tok.substr(0, tpl.param));
        break;
      case TemplateKind::kSuffix: {
        const std::size_t k = std::min<std::size_t>(tpl.param, tok.size());
        out.push_back("s" + std::to_string(tpl.param) + "=" + tok.substr(tok.size() - k));
        break;
      }
      case TemplateKind::kIsCapitalized:
        if (!tok.empty() && std::isupper(static_cast<unsigned char>(tok[0]))) out.emplace_back("cap");
        break;
      case TemplateKind::kIsDigit:
        if (!tok.empty() && std::all_of(tok.begin(), tok.end(), [](unsigned char c) {
              return std::isdigit(c) != 0;
            })) {
          out.emplace_back("digit");
        }
        break;
      case TemplateKind::kPreviousToken: {
        const std::size_t k = tpl.param;
        out.push_back("w[-" + std::to_string(k) + "]=" + (t >= k ? x[t - k] : "<BOS>"));
        break;
      }
      case TemplateKind::kNextToken: {
        const std::size_t k = tpl.param;
        out.push_back("w[+" + std::to_string(k) + "]=" + (t + k < x.size() ? x[t + k] : "<EOS>"));
        break;
      }
      case TemplateKind::kLabelBigram:
      case TemplateKind::kLabelBigramToken:
        break;
    }
  }
  return out;
}

std::vector<std::string> CrfModel::pair_observations(const TokenSequence& x, std::size_t t) const {
  std::vector<std::string> out;
  if (t == 0) return out;
  for (const auto& tpl : templates_) {
    if (tpl.kind == TemplateKind::kLabelBigramToken) out.push_back("bw=" + x[t]);
  }
  return out;
}

void CrfModel::resize_weights(const WeightLayout& old) {
  std::vector<double> w(layout_.dimension(), 0.0);
  for (std::uint32_t o = 0; o < old.unary_obs; ++o)
    for (Label y = 0; y < old.labels; ++y) w[layout_.unary_weight(o, y)] = weights_[old.unary_weight(o, y)];
  if (old.bigram) {
    for (Label a = 0; a < old.labels; ++a)
      for (Label b = 0; b < old.labels; ++b) w[layout_.bigram_weight(a, b)] = weights_[old.bigram_weight(a, b)];
  }
  for (std::uint32_t o = 0; o < old.pair_obs; ++o)
    for (Label a = 0; a < old.labels; ++a)
      for (Label b = 0; b < old.labels; ++b) w[layout_.pair_weight(o, a, b)] = weights_[old.pair_weight(o, a, b)];
  weights_ = std::move(w);
}

void CrfModel::index_features(const std::vector<const TokenSequence*>& xs) {
  const WeightLayout old = layout_;
  for (const TokenSequence* x : xs) {
    for (std::size_t t = 0; t < x->size(); ++t) {
      for (const auto& o : observations(*x, t)) unary_index_.add(o);
      for (const auto& o : pair_observations(*x, t)) pair_index_.add(o);
    }
  }
  layout_.unary_obs = unary_index_.size();
  layout_.pair_obs = pair_index_.size();
  if (old.dimension() != layout_.dimension()) resize_weights(old);
}

void CrfModel::index_features(std::span<const TokenSequence> xs) {
  std::vector<const TokenSequence*> ptrs;
  ptrs.reserve(xs.size());
  for (const auto& x : xs) ptrs.push_back(&x);
  index_features(ptrs);
}

SequenceFeatures CrfModel::features(const TokenSequence& x) const {
  SequenceFeatures f;
  f.unary.resize(x.size());
  f.pair.resize(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (const auto& o : observations(x, t)) {
      if (const auto* id = unary_index_.find(o)) f.unary[t].push_back(*id);
    }
    for (const auto& o : pair_observations(x, t)) {
      if (const auto* id = pair_index_.find(o)) f.pair[t].push_back(*id);
    }
  }
  return f;
}

std::string CrfModel::feature_name(std::size_t d) const {
  const std::size_t m = layout_.labels;
  if (d < layout_.bigram_offset()) {
    return "U|" + scheme_.name(static_cast<Label>(d % m)) + "|" +
           unary_index_.name(static_cast<std::uint32_t>(d / m));
  }
  if (d < layout_.pair_offset()) {
    const std::size_t r = d - layout_.bigram_offset();
    return "B|" + scheme_.name(static_cast<Label>(r / m)) + "|" + scheme_.name(static_cast<Label>(r % m));
  }
  const std::size_t r = d - layout_.pair_offset();
  const std::size_t obs = r / (m * m);
  const std::size_t ab = r % (m * m);
  return "P|" + scheme_.name(static_cast<Label>(ab / m)) + "|" +
         scheme_.name(static_cast<Label>(ab % m)) + "|" +
         pair_index_.name(static_cast<std::uint32_t>(obs));
}

std::optional<std::size_t> CrfModel::find_unary(const std::string& obs, Label y) const {
  const auto* id = unary_index_.find(obs);
  if (!id) return std::nullopt;
  return layout_.unary_weight(*id, y);
}

void CrfModel::save(std::ostream& os) const {
  os << "saslc-crf\t1\n";
  os << "scheme\t" << (scheme_.kind() == SchemeKind::kBio ? "BIO" : "RAW");
  for (const auto& l : scheme_.labels()) os << '\t' << l;
  os << "\ntemplates\t" << format_templates(templates_) << '\n';
  os << "features\t" << weights_.size() << '\n';
  const std::size_t m = layout_.labels;
  for (std::uint32_t o = 0; o < layout_.unary_obs; ++o)
    for (Label y = 0; y < m; ++y)
      os << "U\t" << scheme_.name(y) << '\t' << unary_index_.name(o) << '\t'
         << format_double(weights_[layout_.unary_weight(o, y)]) << '\n';
  if (layout_.bigram) {
    for (Label a = 0; a < m; ++a)
      for (Label b = 0; b < m; ++b)
        os << "B\t" << scheme_.name(a) << '\t' << scheme_.name(b) << '\t'
           << format_double(weights_[layout_.bigram_weight(a, b)]) << '\n';
  }
  for (std::uint32_t o = 0; o < layout_.pair_obs; ++o)
    for (Label a = 0; a < m; ++a)
      for (Label b = 0; b < m; ++b)
        os << "P\t" << scheme_.name(a) << '\t' << scheme_.name(b) << '\t' << pair_index_.name(o)
           << '\t' << format_double(weights_[layout_.pair_weight(o, a, b)]) << '\n';
}

CrfModel CrfModel::load(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) -> DataError {
    return DataError("model file line " + std::to_string(lineno) + ": " + why + ": '" + line + "'");
  };
  auto next = [&]() {
    if (!std::getline(is, line)) throw DataError("model file truncated after line " + std::to_string(lineno));
    ++lineno;
    return split_tabs(line);
  };
  auto f = next();
  if (f.size() != 2 || f[0] != "saslc-crf" || f[1] != "1") throw fail("bad header");
  f = next();
  if (f.size() < 4 || f[0] != "scheme" || (f[1] != "BIO" && f[1] != "RAW")) throw fail("bad scheme line");
  LabelScheme scheme({f.begin() + 2, f.end()}, f[1] == "BIO" ? SchemeKind::kBio : SchemeKind::kRaw);
  f = next();
  if (f.size() != 2 || f[0] != "templates") throw fail("bad templates line");
  std::vector<FeatureTemplate> templates;
  try {
    templates = parse_templates(f[1]);
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
  f = next();
  if (f.size() != 2 || f[0] != "features") throw fail("bad features line");
  const std::size_t d = std::stoull(f[1]);

  CrfModel model(scheme, templates);
  struct Entry {
    char kind;
    std::string obs;
    Label a, b;
    double w;
  };
  std::vector<Entry> entries;
  entries.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    f = next();
    try {
      if (f.size() == 4 && f[0] == "U") {
        entries.push_back({'U', f[2], scheme.index(f[1]), 0, parse_double(f[3])});
        model.unary_index_.add(f[2]);
      } else if (f.size() == 4 && f[0] == "B") {
        entries.push_back({'B', "", scheme.index(f[1]), scheme.index(f[2]), parse_double(f[3])});
      } else if (f.size() == 5 && f[0] == "P") {
        entries.push_back({'P', f[3], scheme.index(f[1]), scheme.index(f[2]), parse_double(f[4])});
        model.pair_index_.add(f[3]);
      } else {
        throw fail("bad feature line");
      }
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
  }
  model.layout_.unary_obs = model.unary_index_.size();
  model.layout_.pair_obs = model.pair_index_.size();
  if (model.layout_.dimension() != d) {
    throw DataError("model file declares " + std::to_string(d) + " features but layout needs " +
                    std::to_string(model.layout_.dimension()));
  }
  model.weights_.assign(d, 0.0);
  std::vector<char> seen(d, 0);
  for (const auto& e : entries) {
    std::size_t idx;
    if (e.kind == 'U') {
      idx = model.layout_.unary_weight(*model.unary_index_.find(e.obs), e.a);
    } else if (e.kind == 'B') {
      if (!model.layout_.bigram) throw DataError("model file has bigram weights without label-bigram template");
      idx = model.layout_.bigram_weight(e.a, e.b);
    } else {
      idx = model.layout_.pair_weight(*model.pair_index_.find(e.obs), e.a, e.b);
    }
    if (seen[idx]++) throw DataError("model file repeats feature " + model.feature_name(idx));
    model.weights_[idx] = e.w;
  }
  return model;
}

SequencePotentials extract_features(const CrfModel& model, const TokenSequence& x) {
  return model.potentials(model.features(x));
}

SoftTarget::SoftTarget(SequenceFeatures f, std::size_t labels)
    : features(std::move(f)),
      unary(features.length() * labels, 0.0),
      pair((features.length() > 0 ? features.length() - 1 : 0) * labels * labels, 0.0) {}

void SoftTarget::add(std::span<const Label> z, double weight) {
  if (!std::isfinite(weight) || weight < 0.0) {
    throw std::invalid_argument("training weight must be finite and >= 0");
  }
  const std::size_t len = features.length();
  if (z.size() != len) throw std::invalid_argument("label sequence length differs from tokens");
  if (weight == 0.0) return;
  const std::size_t m = len > 0 ? unary.size() / len : 0;
  total_weight += weight;
  for (std::size_t t = 0; t < len; ++t) {
    unary[t * m + z[t]] += weight;
    if (t > 0) pair[((t - 1) * m + z[t - 1]) * m + z[t]] += weight;
  }
}

CrfObjective::CrfObjective(WeightLayout layout, std::vector<SoftTarget> targets, double lambda,
                           unsigned threads)
    : layout_(layout), targets_(std::move(targets)), lambda_(lambda), threads_(threads) {}

CrfObjective CrfObjective::from_weighted(const CrfModel& model,
                                         std::span<const WeightedSequence> data, double lambda,
                                         unsigned threads) {
  std::vector<SoftTarget> targets;
  const TokenSequence* current = nullptr;
  for (const auto& ws : data) {
    if (ws.x == nullptr) throw std::invalid_argument("weighted sequence without tokens");
    if (ws.x != current) {
      targets.emplace_back(model.features(*ws.x), model.num_labels());
      current = ws.x;
    }
    targets.back().add(ws.z, ws.weight);
  }
  return CrfObjective(model.layout(), std::move(targets), lambda, threads);
}

double CrfObjective::evaluate(std::span<const double> w, std::span<double> grad) const {
  const std::size_t dim = layout_.dimension();
  const std::size_t m = layout_.labels;
  for (double v : w) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite CRF weight");
  }
  const ChunkPlan plan = plan_chunks(targets_.size(), 16, 8);
  std::vector<std::vector<double>> chunk_grad(plan.num_chunks);
  std::vector<double> chunk_value(plan.num_chunks, 0.0);

  parallel_chunks(plan, threads_, [&](std::size_t begin, std::size_t end, std::size_t c) {
    std::vector<double>& g = chunk_grad[c];
    g.assign(dim, 0.0);
    double value = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const SoftTarget& st = targets_[i];
      const std::size_t len = st.features.length();
      if (st.total_weight == 0.0 || len == 0) continue;
      const SequencePotentials pot = layout_.potentials(st.features, w);
      const Marginals mg = marginals(pot);
      if (!std::isfinite(mg.log_z)) throw std::invalid_argument("non-finite potentials");
      const double W = st.total_weight;
      value += W * mg.log_z;
      for (std::size_t t = 0; t < len; ++t) {
        for (Label y = 0; y < m; ++y) {
          const double target = st.unary[t * m + y];
          value -= target * pot.unary(t, y);
          const double diff = W * mg.node(t, y) - target;
          if (diff == 0.0) continue;
          for (std::uint32_t obs : st.features.unary[t]) g[layout_.unary_weight(obs, y)] += diff;
        }
      }
      for (std::size_t t = 1; t < len; ++t) {
        for (Label a = 0; a < m; ++a) {
          for (Label b = 0; b < m; ++b) {
            const double target = st.pair[((t - 1) * m + a) * m + b];
            value -= target * pot.pair(t, a, b);
            const double diff = W * mg.edge(t, a, b) - target;
            if (diff == 0.0) continue;
            if (layout_.bigram) g[layout_.bigram_weight(a, b)] += diff;
            for (std::uint32_t obs : st.features.pair[t]) g[layout_.pair_weight(obs, a, b)] += diff;
          }
        }
      }
    }
    chunk_value[c] = value;
  });

  double value = 0.0;
  for (std::size_t d = 0; d < dim; ++d) grad[d] = lambda_ * w[d];
  for (std::size_t c = 0; c < plan.num_chunks; ++c) {
    value += chunk_value[c];
    for (std::size_t d = 0; d < dim; ++d) grad[d] += chunk_grad[c][d];
  }
  double sq = 0.0;
  for (double v : w) sq += v * v;
  return value + 0.5 * lambda_ * sq;
}

NllAndGradient weighted_nll_and_gradient(const CrfModel& model,
                                         std::span<const WeightedSequence> data, double lambda) {
  const CrfObjective obj = CrfObjective::from_weighted(model, data, lambda);
  NllAndGradient out;
  out.gradient.assign(obj.dimension(), 0.0);
  out.value = obj.evaluate(model.weights(), out.gradient);
  return out;
}

OptimizeReport optimize(CrfModel& model, const CrfObjective& objective,
                        const OptimizeOptions& opts) {
  if (objective.dimension() != model.num_features()) {
    throw std::invalid_argument("objective dimension does not match model");
  }
  LbfgsOptions lo;
  lo.max_iters = opts.max_iters;
  lo.grad_tol = opts.grad_tol;
  lo.history = opts.history;
  lo.max_backtracks = opts.max_backtracks;
  auto fn = [&](std::span<const double> w, std::span<double> g) { return objective.evaluate(w, g); };
  return minimize_lbfgs(fn, model.mutable_weights(), lo);
}

CrfModel optimize(CrfModel model, std::span<const WeightedSequence> data,
                  const OptimizeOptions& opts, OptimizeReport* report) {
  const CrfObjective obj = CrfObjective::from_weighted(model, data, opts.lambda, opts.threads);
  OptimizeReport r = optimize(model, obj, opts);
  if (report) *report = std::move(r);
  return model;
}

CrfModel train_supervised(const LabelScheme& scheme, std::vector<FeatureTemplate> templates,
                          std::span<const TokenSequence> xs, std::span<const LabelSequence> zs,
                          const OptimizeOptions& opts, OptimizeReport* report) {
  if (xs.size() != zs.size()) throw std::invalid_argument("token and label sequence counts differ");
  CrfModel model(scheme, std::move(templates));
  model.index_features(xs);
  std::vector<WeightedSequence> data;
  data.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) data.push_back({&xs[i], zs[i], 1.0});
  return optimize(std::move(model), data, opts, report);
}

LabelSequence predict(const CrfModel& model, const TokenSequence& x) {
  return viterbi(extract_features(model, x));
}

}  // namespace saslc::crf
