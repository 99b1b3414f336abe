// Tab-separated corpus files and "key = value" run configuration.
//
// CoNLL:  token<TAB>label per line, one blank line between sequences.
// Crowd:  "#labels: l1,...,lM" (optional on input, always written),
//         "#annotators: id1,...,idK", then token<TAB>y1<TAB>...<TAB>yK.
//         "_" marks an annotator who skipped the whole sequence.
// Malformed input throws DataError as "source:line: what: 'content'".

#ifndef SASLC_IO_H_
#define SASLC_IO_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "saslc/em.h"
#include "saslc/simulator.h"
#include "saslc/types.h"

namespace saslc::io {

struct ConllCorpus {
  std::vector<TokenSequence> tokens;
  std::vector<std::vector<std::string>> labels;

  std::size_t size() const { return tokens.size(); }
};

ConllCorpus read_conll(std::istream& is, const std::string& source);
void write_conll(std::ostream& os, const ConllCorpus& corpus);
ConllCorpus load_conll(const std::string& path);
void save_conll(const std::string& path, const ConllCorpus& corpus);

// First column only; any further columns are ignored.
std::vector<TokenSequence> read_tokens(std::istream& is, const std::string& source);
std::vector<TokenSequence> load_tokens(const std::string& path);

// Distinct label strings in first-seen order.
std::vector<std::string> observed_labels(const ConllCorpus& corpus);

// Gold-only dataset (empty roster). Labels outside the scheme throw DataError.
CrowdDataset to_dataset(const ConllCorpus& corpus, const LabelScheme& scheme);
ConllCorpus from_sequences(const std::vector<TokenSequence>& tokens,
                           const std::vector<LabelSequence>& labels, const LabelScheme& scheme);

CrowdDataset read_crowd(std::istream& is, const std::string& source);
void write_crowd(std::ostream& os, const CrowdDataset& ds);
CrowdDataset load_crowd(const std::string& path);
void save_crowd(const std::string& path, const CrowdDataset& ds);

struct RunConfig {
  em::EmConfig em;
  sim::SimConfig sim;
};

// Unknown keys, repeated keys and bad values throw DataError. Seeds and
// thread counts are not configuration; they come from the command line.
RunConfig parse_config(std::istream& is, const std::string& source);
RunConfig load_config(const std::string& path);
// Every key in a fixed order.
std::string format_config(const RunConfig& cfg);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace saslc::io

#endif  // SASLC_IO_H_
