#include "saslc/types.h"

#include <algorithm>
#include <set>
#include <sstream>

namespace saslc {
namespace {

struct ParsedBio {
  BioPrefix prefix;
  std::string type;
};

std::optional<ParsedBio> parse_bio(std::string_view label) {
  if (label == "O") return ParsedBio{BioPrefix::kOutside, ""};
  if (label.size() > 2 && label[1] == '-') {
    if (label[0] == 'B') return ParsedBio{BioPrefix::kBegin, std::string(label.substr(2))};
    if (label[0] == 'I') return ParsedBio{BioPrefix::kInside, std::string(label.substr(2))};
  }
  return std::nullopt;
}

}  // namespace

LabelScheme::LabelScheme(std::vector<std::string> labels, SchemeKind kind)
    : labels_(std::move(labels)), kind_(kind) {
  if (labels_.size() < 2) {
    throw DataError("label scheme needs at least 2 labels, got " +
                    std::to_string(labels_.size()));
  }
  for (Label l = 0; l < labels_.size(); ++l) {
    if (labels_[l].empty()) throw DataError("empty label in scheme");
    if (!lookup_.emplace(labels_[l], l).second) {
      throw DataError("duplicate label in scheme: " + labels_[l]);
    }
  }
  prefix_.assign(labels_.size(), BioPrefix::kNone);
  type_.assign(labels_.size(), -1);
  if (kind_ == SchemeKind::kRaw) return;

  std::unordered_map<std::string, int> type_ids;
  for (Label l = 0; l < labels_.size(); ++l) {
    auto parsed = parse_bio(labels_[l]);
    if (!parsed) throw DataError("label is not O, B-T or I-T: " + labels_[l]);
    prefix_[l] = parsed->prefix;
    if (parsed->prefix == BioPrefix::kOutside) {
      outside_ = l;
      continue;
    }
    auto [it, inserted] =
        type_ids.emplace(parsed->type, static_cast<int>(entity_types_.size()));
    if (inserted) entity_types_.push_back(parsed->type);
    type_[l] = it->second;
  }
  constexpr Label kMissing = ~Label{0};
  begin_.assign(entity_types_.size(), kMissing);
  inside_.assign(entity_types_.size(), kMissing);
  for (Label l = 0; l < labels_.size(); ++l) {
    if (prefix_[l] == BioPrefix::kBegin) begin_[type_[l]] = l;
    if (prefix_[l] == BioPrefix::kInside) inside_[type_[l]] = l;
  }
  for (std::size_t t = 0; t < entity_types_.size(); ++t) {
    if (inside_[t] != kMissing && begin_[t] == kMissing) {
      throw DataError("label I-" + entity_types_[t] + " has no matching B-" +
                      entity_types_[t]);
    }
  }
}

LabelScheme LabelScheme::infer(const std::vector<std::string>& observed) {
  std::vector<std::string> types;
  bool bio = true;
  for (const auto& l : observed) {
    auto parsed = parse_bio(l);
    if (!parsed) {
      bio = false;
      break;
    }
    if (parsed->prefix != BioPrefix::kOutside &&
        std::find(types.begin(), types.end(), parsed->type) == types.end()) {
      types.push_back(parsed->type);
    }
  }
  if (!bio) {
    std::set<std::string> unique(observed.begin(), observed.end());
    return LabelScheme({unique.begin(), unique.end()}, SchemeKind::kRaw);
  }
  std::vector<std::string> labels{"O"};
  for (const auto& t : types) {
    labels.push_back("B-" + t);
    labels.push_back("I-" + t);
  }
  return LabelScheme(std::move(labels), SchemeKind::kBio);
}

std::optional<Label> LabelScheme::find(std::string_view name) const {
  auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

Label LabelScheme::index(std::string_view name) const {
  auto l = find(name);
  if (!l) throw std::invalid_argument("unknown label: " + std::string(name));
  return *l;
}

std::optional<Label> LabelScheme::begin_of(int type) const {
  if (type < 0 || static_cast<std::size_t>(type) >= begin_.size()) return std::nullopt;
  if (begin_[type] == ~Label{0}) return std::nullopt;
  return begin_[type];
}

std::optional<Label> LabelScheme::inside_of(int type) const {
  if (type < 0 || static_cast<std::size_t>(type) >= inside_.size()) return std::nullopt;
  if (inside_[type] == ~Label{0}) return std::nullopt;
  return inside_[type];
}

bool LabelScheme::transition_allowed(Label from, Label to) const {
  if (kind_ == SchemeKind::kRaw) return true;
  if (prefix_.at(to) != BioPrefix::kInside) return true;
  const BioPrefix p = prefix_.at(from);
  return (p == BioPrefix::kBegin || p == BioPrefix::kInside) && type_[from] == type_[to];
}

bool LabelScheme::start_allowed(Label l) const {
  return kind_ == SchemeKind::kRaw || prefix_.at(l) != BioPrefix::kInside;
}

bool bio_transition_allowed(const LabelScheme& scheme, std::string_view from,
                            std::string_view to) {
  if (scheme.kind() != SchemeKind::kBio) {
    throw std::invalid_argument("bio_transition_allowed requires a BIO scheme");
  }
  return scheme.transition_allowed(scheme.index(from), scheme.index(to));
}

std::size_t CrowdInstance::num_present() const {
  return static_cast<std::size_t>(
      std::count_if(annotations.begin(), annotations.end(),
                    [](const auto& a) { return a.has_value(); }));
}

std::vector<Violation> validate_dataset(const CrowdDataset& ds) {
  std::vector<Violation> out;
  if (ds.instances.empty()) {
    out.push_back({ViolationKind::kEmptyDataset, 0, {}, {}, "dataset has no instances"});
    return out;
  }
  const std::size_t m = ds.scheme.size();
  const std::size_t k = ds.roster.size();
  auto check_labels = [&](std::size_t i, std::optional<std::size_t> a,
                          const LabelSequence& seq, std::size_t len, ViolationKind len_kind) {
    if (seq.size() != len) {
      std::ostringstream msg;
      msg << "sequence of length " << seq.size() << " annotates " << len << " tokens";
      out.push_back({len_kind, i, a, std::min(seq.size(), len), msg.str()});
    }
    for (std::size_t j = 0; j < seq.size(); ++j) {
      if (seq[j] >= m) {
        std::ostringstream msg;
        msg << "label index " << seq[j] << " out of range for M=" << m;
        out.push_back({ViolationKind::kLabelOutOfRange, i, a, j, msg.str()});
      }
    }
  };
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& inst = ds.instances[i];
    const std::size_t len = inst.x.size();
    if (len == 0) {
      out.push_back({ViolationKind::kEmptySequence, i, {}, {}, "empty token sequence"});
    }
    for (std::size_t j = 0; j < len; ++j) {
      if (inst.x[j].empty()) {
        out.push_back({ViolationKind::kEmptyToken, i, {}, j, "empty token"});
      }
    }
    if (inst.annotations.size() != k) {
      std::ostringstream msg;
      msg << inst.annotations.size() << " annotation slots for roster of " << k;
      out.push_back({ViolationKind::kRosterMismatch, i, {}, {}, msg.str()});
    }
    for (std::size_t a = 0; a < inst.annotations.size(); ++a) {
      if (inst.annotations[a]) {
        check_labels(i, a, *inst.annotations[a], len, ViolationKind::kLengthMismatch);
      }
    }
    if (inst.gold) check_labels(i, {}, *inst.gold, len, ViolationKind::kGoldLengthMismatch);
  }
  return out;
}

}  // namespace saslc
