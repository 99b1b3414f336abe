#include "saslc/annotator.h"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "saslc/util.h"

namespace saslc::annotator {

ConfusionTensor::ConfusionTensor(std::size_t contexts, std::size_t labels)
    : contexts_(contexts),
      labels_(labels),
      values_(contexts * labels * labels, labels > 0 ? 1.0 / static_cast<double>(labels) : 0.0) {}

double ConfusionTensor::simplex_error() const {
  double worst = 0.0;
  for (std::size_t c = 0; c < contexts_; ++c) {
    for (Label j = 0; j < labels_; ++j) {
      double s = 0.0;
      for (double v : row(c, j)) {
        if (!(v >= 0.0)) return std::numeric_limits<double>::infinity();
        s += v;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return worst;
}

AnnotatorParams AnnotatorParams::uniform(std::size_t annotators, std::size_t labels) {
  AnnotatorParams p;
  p.alpha.assign(annotators, ConfusionTensor(labels + 1, labels));
  p.beta.assign(annotators, ConfusionTensor(labels, labels));
  return p;
}

MentionLinks resolve_mentions(const TokenSequence& x) {
  MentionLinks links(x.size());
  std::unordered_map<std::string_view, std::uint32_t> last;
  for (std::uint32_t j = 0; j < x.size(); ++j) {
    auto [it, inserted] = last.try_emplace(x[j], j);
    if (!inserted) {
      links[j] = it->second;
      it->second = j;
    }
  }
  return links;
}

Context context_at(std::span<const Label> y, const MentionLinks& links, std::size_t j,
                   std::size_t bos) {
  if (links[j]) return {true, y[*links[j]]};
  return {false, j == 0 ? bos : y[j - 1]};
}

double annotation_loglik(std::size_t k, std::span<const Label> y, std::span<const Label> z,
                         const MentionLinks& links, const AnnotatorParams& params) {
  if (y.size() != z.size() || y.size() != links.size()) {
    throw std::invalid_argument("annotation, truth and links must have equal length");
  }
  const std::size_t bos = params.bos();
  double ll = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const Context c = context_at(y, links, j, bos);
    const ConfusionTensor& t = c.use_beta ? params.beta[k] : params.alpha[k];
    ll += std::log(t.at(c.index, z[j], y[j]));
  }
  return ll;
}

std::vector<double> log_factor_table(std::size_t k, std::span<const Label> y,
                                     const MentionLinks& links, const AnnotatorParams& params) {
  const std::size_t m = params.num_labels();
  std::vector<double> table(y.size() * m);
  for (std::size_t j = 0; j < y.size(); ++j) {
    const Context c = context_at(y, links, j, params.bos());
    const ConfusionTensor& t = c.use_beta ? params.beta[k] : params.alpha[k];
    for (Label z = 0; z < m; ++z) table[j * m + z] = std::log(t.at(c.index, z, y[j]));
  }
  return table;
}

AnnotatorParams sample_init_params(std::size_t annotators, std::size_t labels,
                                   std::uint64_t seed) {
  AnnotatorParams p = AnnotatorParams::uniform(annotators, labels);
  Rng rng(seed);
  auto draw = [&](ConfusionTensor& t) {
    for (std::size_t c = 0; c < t.contexts(); ++c) {
      for (Label j = 0; j < labels; ++j) {
        auto row = t.row(c, j);
        double s = 0.0;
        for (double& v : row) {
          v = rng.exponential();
          s += v;
        }
        for (double& v : row) v /= s;
      }
    }
  };
  for (std::size_t k = 0; k < annotators; ++k) {
    draw(p.alpha[k]);
    draw(p.beta[k]);
  }
  return p;
}

ConfusionCounts::ConfusionCounts(std::size_t annotators, std::size_t labels)
    : labels_(labels),
      alpha_(annotators, std::vector<double>((labels + 1) * labels * labels, 0.0)),
      beta_(annotators, std::vector<double>(labels * labels * labels, 0.0)) {}

void ConfusionCounts::add(std::size_t k, bool beta, std::size_t ctx, Label truth, Label assigned,
                          double w) {
  if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("count weight must be finite and >= 0");
  auto& v = beta ? beta_[k] : alpha_[k];
  v[(ctx * labels_ + truth) * labels_ + assigned] += w;
}

void ConfusionCounts::add_sequence(std::size_t k, std::span<const Label> y,
                                   std::span<const Label> z, const MentionLinks& links, double w) {
  if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("count weight must be finite and >= 0");
  for (std::size_t j = 0; j < y.size(); ++j) {
    const Context c = context_at(y, links, j, labels_);
    auto& v = c.use_beta ? beta_[k] : alpha_[k];
    v[(c.index * labels_ + z[j]) * labels_ + y[j]] += w;
  }
}

void ConfusionCounts::merge(const ConfusionCounts& other) {
  for (std::size_t k = 0; k < alpha_.size(); ++k) {
    for (std::size_t i = 0; i < alpha_[k].size(); ++i) alpha_[k][i] += other.alpha_[k][i];
    for (std::size_t i = 0; i < beta_[k].size(); ++i) beta_[k][i] += other.beta_[k][i];
  }
}

namespace {

ConfusionTensor normalize(const std::vector<double>& counts, std::size_t contexts,
                          std::size_t m, double s) {
  ConfusionTensor t(contexts, m);
  for (std::size_t c = 0; c < contexts; ++c) {
    for (Label j = 0; j < m; ++j) {
      const double* n = &counts[(c * m + j) * m];
      double total = 0.0;
      for (Label h = 0; h < m; ++h) total += n[h];
      auto row = t.row(c, j);
      const double denom = total + s * static_cast<double>(m);
      if (denom <= 0.0) continue;  // no data, no prior: leave uniform
      for (Label h = 0; h < m; ++h) row[h] = (n[h] + s) / denom;
    }
  }
  return t;
}

}  // namespace

AnnotatorParams mle_update(const ConfusionCounts& counts, double smoothing) {
  if (!(smoothing >= 0.0)) throw std::invalid_argument("smoothing must be >= 0");
  const std::size_t m = counts.num_labels();
  AnnotatorParams p;
  for (std::size_t k = 0; k < counts.num_annotators(); ++k) {
    p.alpha.push_back(normalize(counts.alpha()[k], m + 1, m, smoothing));
    p.beta.push_back(normalize(counts.beta()[k], m, m, smoothing));
  }
  return p;
}

double log_prior(const AnnotatorParams& params, double smoothing) {
  if (smoothing == 0.0) return 0.0;
  double s = 0.0;
  auto add = [&](const ConfusionTensor& t) {
    for (double v : t.values()) s += std::log(v);
  };
  for (const auto& t : params.alpha) add(t);
  for (const auto& t : params.beta) add(t);
  return smoothing * s;
}

double correct_label_mass(const ConfusionTensor& tensor, std::span<const double> counts) {
  const std::size_t m = tensor.labels();
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < tensor.contexts(); ++c) {
    for (Label j = 0; j < m; ++j) {
      double n = 0.0;
      for (Label h = 0; h < m; ++h) n += counts[(c * m + j) * m + h];
      num += n * tensor.at(c, j, j);
      den += n;
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

void save_params(std::ostream& os, const AnnotatorParams& params, const LabelScheme& scheme,
                 std::span<const std::string> roster) {
  const std::size_t m = scheme.size();
  if (params.num_labels() != m || params.num_annotators() != roster.size()) {
    throw std::invalid_argument("annotator params do not match scheme or roster");
  }
  os << "saslc-annotators\t1\n";
  os << "scheme\t" << (scheme.kind() == SchemeKind::kBio ? "BIO" : "RAW");
  for (const auto& l : scheme.labels()) os << '\t' << l;
  os << "\nannotators";
  for (const auto& a : roster) os << '\t' << a;
  os << '\n';
  auto dump = [&](const char* tag, const std::string& who, const ConfusionTensor& t) {
    for (std::size_t c = 0; c < t.contexts(); ++c) {
      for (Label j = 0; j < m; ++j) {
        os << tag << '\t' << who << '\t' << (c == m ? std::string("<BOS>") : scheme.name(static_cast<Label>(c)))
           << '\t' << scheme.name(j);
        for (double v : t.row(c, j)) os << '\t' << format_double(v);
        os << '\n';
      }
    }
  };
  for (std::size_t k = 0; k < roster.size(); ++k) {
    dump("alpha", roster[k], params.alpha[k]);
    dump("beta", roster[k], params.beta[k]);
  }
}

LoadedParams load_params(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto fields = [&]() {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) out.push_back(f);
    return out;
  };
  auto fail = [&](const std::string& why) {
    return DataError("annotator file line " + std::to_string(lineno) + ": " + why + ": '" + line + "'");
  };
  auto next = [&]() {
    if (!std::getline(is, line)) throw DataError("annotator file truncated after line " + std::to_string(lineno));
    ++lineno;
    return fields();
  };
  auto f = next();
  if (f.size() != 2 || f[0] != "saslc-annotators" || f[1] != "1") throw fail("bad header");
  f = next();
  if (f.size() < 4 || f[0] != "scheme" || (f[1] != "BIO" && f[1] != "RAW")) throw fail("bad scheme line");
  LoadedParams out;
  out.scheme = LabelScheme({f.begin() + 2, f.end()}, f[1] == "BIO" ? SchemeKind::kBio : SchemeKind::kRaw);
  f = next();
  if (f.size() < 2 || f[0] != "annotators") throw fail("bad annotators line");
  out.roster.assign(f.begin() + 1, f.end());
  const std::size_t m = out.scheme.size();
  out.params = AnnotatorParams::uniform(out.roster.size(), m);
  std::unordered_map<std::string, std::size_t> who;
  for (std::size_t k = 0; k < out.roster.size(); ++k) who[out.roster[k]] = k;
  const std::size_t rows = out.roster.size() * ((m + 1) * m + m * m);
  for (std::size_t r = 0; r < rows; ++r) {
    f = next();
    if (f.size() != 4 + m || (f[0] != "alpha" && f[0] != "beta")) throw fail("bad tensor row");
    auto it = who.find(f[1]);
    if (it == who.end()) throw fail("unknown annotator");
    const bool beta = f[0] == "beta";
    std::size_t ctx;
    try {
      ctx = (!beta && f[2] == "<BOS>") ? m : out.scheme.index(f[2]);
      const Label truth = out.scheme.index(f[3]);
      auto& t = beta ? out.params.beta[it->second] : out.params.alpha[it->second];
      auto row = t.row(ctx, truth);
      for (std::size_t h = 0; h < m; ++h) row[h] = parse_double(f[4 + h]);
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
  }
  return out;
}

}  // namespace saslc::annotator
