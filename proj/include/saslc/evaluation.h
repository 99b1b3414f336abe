// Entity extraction from BIO sequences and exact-match scoring.

#ifndef SASLC_EVALUATION_H_
#define SASLC_EVALUATION_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "saslc/types.h"

namespace saslc::eval {

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  int type = 0;

  auto operator<=>(const EntitySpan&) const = default;
};

// Lenient mode turns an I-T that does not continue a T entity into the head
// of a new entity; strict mode drops such orphan runs.
std::vector<EntitySpan> extract_entities(std::span<const Label> seq, const LabelScheme& scheme,
                                         bool strict = false);

// Renders spans into a BIO sequence of the given length (inverse of
// extract_entities for disjoint spans).
LabelSequence render_entities(std::span<const EntitySpan> spans, std::size_t length,
                              const LabelScheme& scheme);

struct PrfReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PrfReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

// Micro-averaged exact-match P/R/F1. Throws std::invalid_argument when the
// lists or any paired sequences differ in length.
PrfReport entity_prf(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold,
                     const LabelScheme& scheme, bool strict = false);

// Same counts broken down by entity type name.
std::map<std::string, PrfReport> entity_prf_by_type(std::span<const LabelSequence> pred,
                                                    std::span<const LabelSequence> gold,
                                                    const LabelScheme& scheme, bool strict = false);

// Fraction of equal positions (pooled over sequences).
double token_accuracy(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold);
double token_accuracy(std::span<const Label> pred, std::span<const Label> gold);

}  // namespace saslc::eval

#endif  // SASLC_EVALUATION_H_
