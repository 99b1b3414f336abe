// Shared domain types: label schemes, token/label sequences, crowd datasets.

#ifndef SASLC_TYPES_H_
#define SASLC_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace saslc {

using Label = std::uint32_t;
using LabelSequence = std::vector<Label>;
using TokenSequence = std::vector<std::string>;

// Malformed or inconsistent input data. Distinct from std::invalid_argument,
// which signals a caller bug.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SchemeKind { kBio, kRaw };

enum class BioPrefix { kOutside, kBegin, kInside, kNone };

class LabelScheme {
 public:
  LabelScheme() = default;

  // Throws DataError when the label list breaks the scheme invariants.
  LabelScheme(std::vector<std::string> labels, SchemeKind kind);

  // Builds a BIO scheme from observed label strings: "O" first, then
  // B-T/I-T pairs per entity type in first-seen order. Missing halves of a
  // B/I pair are added. Falls back to RAW (sorted) if any label is not BIO.
  static LabelScheme infer(const std::vector<std::string>& observed);

  std::size_t size() const { return labels_.size(); }
  SchemeKind kind() const { return kind_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& entity_types() const { return entity_types_; }

  const std::string& name(Label l) const { return labels_.at(l); }
  std::optional<Label> find(std::string_view name) const;
  // Throws std::invalid_argument for unknown labels.
  Label index(std::string_view name) const;

  BioPrefix prefix(Label l) const { return prefix_.at(l); }
  // Entity-type index for B-/I- labels, -1 otherwise.
  int type_of(Label l) const { return type_.at(l); }
  std::optional<Label> outside() const { return outside_; }
  std::optional<Label> begin_of(int type) const;
  std::optional<Label> inside_of(int type) const;

  // BIO: false iff `to` is I-T and `from` is neither B-T nor I-T.
  // RAW: always true.
  bool transition_allowed(Label from, Label to) const;
  // BIO: I-T may not start a sequence. RAW: always true.
  bool start_allowed(Label l) const;

  bool operator==(const LabelScheme& other) const {
    return kind_ == other.kind_ && labels_ == other.labels_;
  }

 private:
  std::vector<std::string> labels_;
  SchemeKind kind_ = SchemeKind::kRaw;
  std::vector<std::string> entity_types_;
  std::vector<BioPrefix> prefix_;
  std::vector<int> type_;
  std::vector<Label> begin_;
  std::vector<Label> inside_;
  std::optional<Label> outside_;
  std::unordered_map<std::string, Label> lookup_;
};

// String-level form of LabelScheme::transition_allowed. Requires a BIO
// scheme; unknown labels throw std::invalid_argument.
bool bio_transition_allowed(const LabelScheme& scheme, std::string_view from,
                            std::string_view to);

struct CrowdInstance {
  TokenSequence x;
  // Indexed by roster position; nullopt marks an annotator who did not label
  // this sequence.
  std::vector<std::optional<LabelSequence>> annotations;
  std::optional<LabelSequence> gold;

  std::size_t length() const { return x.size(); }
  std::size_t num_present() const;
};

struct CrowdDataset {
  LabelScheme scheme;
  std::vector<std::string> roster;
  std::vector<CrowdInstance> instances;

  std::size_t num_annotators() const { return roster.size(); }
};

enum class ViolationKind {
  kEmptyDataset,
  kEmptySequence,
  kEmptyToken,
  kRosterMismatch,
  kLengthMismatch,
  kLabelOutOfRange,
  kGoldLengthMismatch,
};

struct Violation {
  ViolationKind kind;
  std::size_t instance = 0;
  std::optional<std::size_t> annotator;
  std::optional<std::size_t> position;
  std::string message;
};

std::vector<Violation> validate_dataset(const CrowdDataset& ds);

}  // namespace saslc

#endif  // SASLC_TYPES_H_
