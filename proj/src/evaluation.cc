#include "saslc/evaluation.h"

#include <algorithm>
#include <set>

namespace saslc::eval {

std::vector<EntitySpan> extract_entities(std::span<const Label> seq, const LabelScheme& scheme,
                                         bool strict) {
  if (scheme.kind() != SchemeKind::kBio) {
    throw std::invalid_argument("entity extraction requires a BIO scheme");
  }
  std::vector<EntitySpan> out;
  bool open = false;
  EntitySpan cur;
  auto close = [&](std::size_t at) {
    if (open) {
      cur.end = at;
      out.push_back(cur);
      open = false;
    }
  };
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const Label l = seq[t];
    switch (scheme.prefix(l)) {
      case BioPrefix::kBegin:
        close(t);
        cur = {t, t, scheme.type_of(l)};
        open = true;
        break;
      case BioPrefix::kInside:
        if (open && cur.type == scheme.type_of(l)) break;
        close(t);
        if (!strict) {
          cur = {t, t, scheme.type_of(l)};
          open = true;
        } else {
          // Skip the rest of the orphan run.
          while (t + 1 < seq.size() && scheme.prefix(seq[t + 1]) == BioPrefix::kInside &&
                 scheme.type_of(seq[t + 1]) == scheme.type_of(l)) {
            ++t;
          }
        }
        break;
      default:
        close(t);
        break;
    }
  }
  close(seq.size());
  return out;
}

LabelSequence render_entities(std::span<const EntitySpan> spans, std::size_t length,
                              const LabelScheme& scheme) {
  const auto o = scheme.outside();
  if (!o) throw std::invalid_argument("scheme has no O label");
  LabelSequence out(length, *o);
  for (const auto& s : spans) {
    const auto b = scheme.begin_of(s.type);
    const auto in = scheme.inside_of(s.type);
    if (!b || (s.end - s.start > 1 && !in) || s.end > length || s.start >= s.end) {
      throw std::invalid_argument("span cannot be rendered in this scheme");
    }
    out[s.start] = *b;
    for (std::size_t t = s.start + 1; t < s.end; ++t) out[t] = *in;
  }
  return out;
}

PrfReport PrfReport::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {

struct TypeCounts {
  std::size_t tp = 0, pred = 0, gold = 0;
};

std::vector<TypeCounts> count_by_type(std::span<const LabelSequence> pred,
                                      std::span<const LabelSequence> gold,
                                      const LabelScheme& scheme, bool strict) {
  if (pred.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
  std::vector<TypeCounts> counts(scheme.entity_types().size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gold[i].size()) {
      throw std::invalid_argument("sequence " + std::to_string(i) + " differs in length from gold");
    }
    const auto p = extract_entities(pred[i], scheme, strict);
    const auto g = extract_entities(gold[i], scheme, strict);
    const std::set<EntitySpan> gs(g.begin(), g.end());
    for (const auto& s : p) {
      ++counts[s.type].pred;
      if (gs.count(s)) ++counts[s.type].tp;
    }
    for (const auto& s : g) ++counts[s.type].gold;
  }
  return counts;
}

}  // namespace

PrfReport entity_prf(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold,
                     const LabelScheme& scheme, bool strict) {
  std::size_t tp = 0, np = 0, ng = 0;
  for (const auto& c : count_by_type(pred, gold, scheme, strict)) {
    tp += c.tp;
    np += c.pred;
    ng += c.gold;
  }
  return PrfReport::from_counts(tp, np - tp, ng - tp);
}

std::map<std::string, PrfReport> entity_prf_by_type(std::span<const LabelSequence> pred,
                                                    std::span<const LabelSequence> gold,
                                                    const LabelScheme& scheme, bool strict) {
  std::map<std::string, PrfReport> out;
  const auto counts = count_by_type(pred, gold, scheme, strict);
  for (std::size_t t = 0; t < counts.size(); ++t) {
    const auto& c = counts[t];
    out[scheme.entity_types()[t]] = PrfReport::from_counts(c.tp, c.pred - c.tp, c.gold - c.tp);
  }
  return out;
}

double token_accuracy(std::span<const Label> pred, std::span<const Label> gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("sequence lengths differ");
  if (pred.empty()) return 0.0;
  std::size_t same = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) same += pred[t] == gold[t];
  return static_cast<double>(same) / static_cast<double>(pred.size());
}

double token_accuracy(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
  std::size_t same = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gold[i].size()) throw std::invalid_argument("sequence lengths differ");
    for (std::size_t t = 0; t < pred[i].size(); ++t) same += pred[i][t] == gold[i][t];
    total += pred[i].size();
  }
  return total ? static_cast<double>(same) / static_cast<double>(total) : 0.0;
}

}  // namespace saslc::eval
