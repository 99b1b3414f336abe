#include "saslc/io.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "saslc/util.h"

namespace saslc::io {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what,
                       const std::string& content) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what + ": '" + content + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "' for reading");
  return is;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  return os;
}

// Groups non-blank lines into blocks; blank lines separate them.
struct Block {
  std::vector<std::string> lines;
  std::vector<std::size_t> numbers;
};

std::vector<Block> read_blocks(std::istream& is, std::size_t& line_no,
                               std::vector<std::pair<std::size_t, std::string>>* headers) {
  std::vector<Block> blocks;
  Block cur;
  std::string line;
  bool in_header = headers != nullptr;
  while (std::getline(is, line)) {
    ++line_no;
    if (in_header && !line.empty() && line[0] == '#') {
      headers->emplace_back(line_no, line);
      continue;
    }
    in_header = false;
    if (line.empty()) {
      if (!cur.lines.empty()) blocks.push_back(std::move(cur));
      cur = {};
      continue;
    }
    cur.lines.push_back(line);
    cur.numbers.push_back(line_no);
  }
  if (!cur.lines.empty()) blocks.push_back(std::move(cur));
  return blocks;
}

LabelScheme scheme_from_list(const std::vector<std::string>& labels) {
  try {
    return LabelScheme(labels, SchemeKind::kBio);
  } catch (const DataError&) {
    return LabelScheme(labels, SchemeKind::kRaw);
  }
}

}  // namespace

ConllCorpus read_conll(std::istream& is, const std::string& source) {
  ConllCorpus corpus;
  std::size_t line_no = 0;
  for (const auto& block : read_blocks(is, line_no, nullptr)) {
    TokenSequence x;
    std::vector<std::string> y;
    for (std::size_t i = 0; i < block.lines.size(); ++i) {
      const auto cols = split(block.lines[i], '\t');
      if (cols.size() != 2) fail(source, block.numbers[i], "expected token<TAB>label", block.lines[i]);
      if (cols[0].empty()) fail(source, block.numbers[i], "empty token", block.lines[i]);
      if (cols[1].empty()) fail(source, block.numbers[i], "empty label", block.lines[i]);
      x.push_back(cols[0]);
      y.push_back(cols[1]);
    }
    corpus.tokens.push_back(std::move(x));
    corpus.labels.push_back(std::move(y));
  }
  return corpus;
}

void write_conll(std::ostream& os, const ConllCorpus& corpus) {
  if (corpus.tokens.size() != corpus.labels.size()) {
    throw std::invalid_argument("token and label sequence counts differ");
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.tokens[i].size() != corpus.labels[i].size()) {
      throw std::invalid_argument("sequence " + std::to_string(i) + ": token and label lengths differ");
    }
    if (i) os << '\n';
    for (std::size_t t = 0; t < corpus.tokens[i].size(); ++t) {
      os << corpus.tokens[i][t] << '\t' << corpus.labels[i][t] << '\n';
    }
  }
}

ConllCorpus load_conll(const std::string& path) {
  auto is = open_in(path);
  return read_conll(is, path);
}

void save_conll(const std::string& path, const ConllCorpus& corpus) {
  auto os = open_out(path);
  write_conll(os, corpus);
}

std::vector<TokenSequence> read_tokens(std::istream& is, const std::string& source) {
  std::vector<TokenSequence> out;
  std::size_t line_no = 0;
  for (const auto& block : read_blocks(is, line_no, nullptr)) {
    TokenSequence x;
    for (std::size_t i = 0; i < block.lines.size(); ++i) {
      std::string tok = block.lines[i].substr(0, block.lines[i].find('\t'));
      if (tok.empty()) fail(source, block.numbers[i], "empty token", block.lines[i]);
      x.push_back(std::move(tok));
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<TokenSequence> load_tokens(const std::string& path) {
  auto is = open_in(path);
  return read_tokens(is, path);
}

std::vector<std::string> observed_labels(const ConllCorpus& corpus) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& y : corpus.labels)
    for (const auto& l : y)
      if (seen.insert(l).second) out.push_back(l);
  return out;
}

CrowdDataset to_dataset(const ConllCorpus& corpus, const LabelScheme& scheme) {
  CrowdDataset ds;
  ds.scheme = scheme;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CrowdInstance inst;
    inst.x = corpus.tokens[i];
    LabelSequence y;
    for (const auto& l : corpus.labels[i]) {
      const auto idx = scheme.find(l);
      if (!idx) throw DataError("sequence " + std::to_string(i) + ": label '" + l + "' not in scheme");
      y.push_back(*idx);
    }
    inst.gold = std::move(y);
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

ConllCorpus from_sequences(const std::vector<TokenSequence>& tokens,
                           const std::vector<LabelSequence>& labels, const LabelScheme& scheme) {
  if (tokens.size() != labels.size()) throw std::invalid_argument("token and label sequence counts differ");
  ConllCorpus out;
  out.tokens = tokens;
  for (const auto& y : labels) {
    std::vector<std::string> names;
    for (Label l : y) names.push_back(scheme.name(l));
    out.labels.push_back(std::move(names));
  }
  return out;
}

CrowdDataset read_crowd(std::istream& is, const std::string& source) {
  std::vector<std::pair<std::size_t, std::string>> headers;
  std::size_t line_no = 0;
  const auto blocks = read_blocks(is, line_no, &headers);

  std::optional<std::vector<std::string>> label_list;
  std::optional<std::vector<std::string>> roster;
  auto header_value = [&](const std::pair<std::size_t, std::string>& h, const std::string& key)
      -> std::optional<std::vector<std::string>> {
    if (h.second.rfind(key, 0) != 0) return std::nullopt;
    std::string rest = h.second.substr(key.size());
    while (!rest.empty() && rest.front() == ' ') rest.erase(rest.begin());
    if (rest.empty()) fail(source, h.first, "empty header list", h.second);
    auto items = split(rest, ',');
    std::set<std::string> uniq;
    for (const auto& it : items) {
      if (it.empty() || !uniq.insert(it).second) fail(source, h.first, "empty or repeated entry", h.second);
    }
    return items;
  };
  for (const auto& h : headers) {
    if (auto v = header_value(h, "#labels:")) {
      if (label_list) fail(source, h.first, "repeated header", h.second);
      label_list = std::move(v);
    } else if (auto r = header_value(h, "#annotators:")) {
      if (roster) fail(source, h.first, "repeated header", h.second);
      roster = std::move(r);
    } else {
      fail(source, h.first, "unknown header", h.second);
    }
  }
  if (!roster) throw DataError(source + ": missing '#annotators:' header");

  CrowdDataset ds;
  ds.roster = *roster;
  const std::size_t k_total = roster->size();
  std::vector<std::vector<std::vector<std::string>>> raw;  // [instance][annotator][position]
  std::vector<std::string> seen_labels;
  std::unordered_set<std::string> seen_set;
  for (const auto& block : blocks) {
    CrowdInstance inst;
    std::vector<std::vector<std::string>> cols(k_total);
    std::vector<std::size_t> absent(k_total, 0);
    for (std::size_t i = 0; i < block.lines.size(); ++i) {
      const auto parts = split(block.lines[i], '\t');
      if (parts.size() != k_total + 1) {
        fail(source, block.numbers[i],
             "expected " + std::to_string(k_total + 1) + " columns, found " + std::to_string(parts.size()),
             block.lines[i]);
      }
      if (parts[0].empty()) fail(source, block.numbers[i], "empty token", block.lines[i]);
      inst.x.push_back(parts[0]);
      for (std::size_t k = 0; k < k_total; ++k) {
        const auto& v = parts[k + 1];
        if (v.empty()) fail(source, block.numbers[i], "empty label", block.lines[i]);
        if (v == "_") {
          ++absent[k];
        } else if (label_list) {
          if (std::find(label_list->begin(), label_list->end(), v) == label_list->end()) {
            fail(source, block.numbers[i], "label '" + v + "' not declared in #labels", block.lines[i]);
          }
        } else if (seen_set.insert(v).second) {
          seen_labels.push_back(v);
        }
        cols[k].push_back(v);
      }
    }
    for (std::size_t k = 0; k < k_total; ++k) {
      if (absent[k] != 0 && absent[k] != block.lines.size()) {
        fail(source, block.numbers.front(),
             "annotator '" + (*roster)[k] + "' is absent on only part of the sequence", block.lines.front());
      }
    }
    raw.push_back(std::move(cols));
    ds.instances.push_back(std::move(inst));
  }
  ds.scheme = label_list ? scheme_from_list(*label_list) : LabelScheme::infer(seen_labels);
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    auto& inst = ds.instances[i];
    inst.annotations.resize(k_total);
    for (std::size_t k = 0; k < k_total; ++k) {
      if (raw[i][k].front() == "_") continue;
      LabelSequence y;
      for (const auto& l : raw[i][k]) y.push_back(ds.scheme.index(l));
      inst.annotations[k] = std::move(y);
    }
  }
  return ds;
}

void write_crowd(std::ostream& os, const CrowdDataset& ds) {
  os << "#labels: " << join(ds.scheme.labels(), ",") << '\n';
  os << "#annotators: " << join(ds.roster, ",") << '\n';
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& inst = ds.instances[i];
    if (inst.annotations.size() != ds.roster.size()) {
      throw std::invalid_argument("instance " + std::to_string(i) + ": annotation count differs from roster");
    }
    if (i) os << '\n';
    for (std::size_t t = 0; t < inst.length(); ++t) {
      os << inst.x[t];
      for (const auto& a : inst.annotations) {
        os << '\t' << (a ? ds.scheme.name((*a).at(t)) : std::string("_"));
      }
      os << '\n';
    }
  }
}

CrowdDataset load_crowd(const std::string& path) {
  auto is = open_in(path);
  return read_crowd(is, path);
}

void save_crowd(const std::string& path, const CrowdDataset& ds) {
  auto os = open_out(path);
  write_crowd(os, ds);
}

namespace {

struct ConfigKey {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
T parse_integer(const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("not an integer");
  return out;
}

double parse_real(const std::string& v) { return parse_double(v); }

double parse_probability(const std::string& v) {
  const double d = parse_real(v);
  if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("must lie in [0, 1]");
  return d;
}

double parse_nonneg(const std::string& v) {
  const double d = parse_real(v);
  if (!(d >= 0.0)) throw std::invalid_argument("must be >= 0");
  return d;
}

int parse_positive_int(const std::string& v) {
  const int i = parse_integer<int>(v);
  if (i < 0) throw std::invalid_argument("must be >= 0");
  return i;
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"em.max_iters", [](const RunConfig& c) { return std::to_string(c.em.max_iters); },
       [](RunConfig& c, const std::string& v) { c.em.max_iters = parse_positive_int(v); }},
      {"em.rel_tol", [](const RunConfig& c) { return format_double(c.em.rel_tol); },
       [](RunConfig& c, const std::string& v) { c.em.rel_tol = parse_nonneg(v); }},
      {"em.smoothing", [](const RunConfig& c) { return format_double(c.em.smoothing); },
       [](RunConfig& c, const std::string& v) { c.em.smoothing = parse_nonneg(v); }},
      {"em.lambda", [](const RunConfig& c) { return format_double(c.em.lambda); },
       [](RunConfig& c, const std::string& v) { c.em.lambda = parse_nonneg(v); }},
      {"em.templates", [](const RunConfig& c) { return crf::format_templates(c.em.templates); },
       [](RunConfig& c, const std::string& v) { c.em.templates = crf::parse_templates(v); }},
      {"em.init_crf_iters", [](const RunConfig& c) { return std::to_string(c.em.init_crf_iters); },
       [](RunConfig& c, const std::string& v) { c.em.init_crf_iters = parse_positive_int(v); }},
      {"em.mstep_crf_iters", [](const RunConfig& c) { return std::to_string(c.em.mstep_crf_iters); },
       [](RunConfig& c, const std::string& v) { c.em.mstep_crf_iters = parse_positive_int(v); }},
      {"em.grad_tol", [](const RunConfig& c) { return format_double(c.em.grad_tol); },
       [](RunConfig& c, const std::string& v) { c.em.grad_tol = parse_nonneg(v); }},
      {"em.init_annotator",
       [](const RunConfig& c) {
         return c.em.init_annotator ? std::to_string(*c.em.init_annotator) : std::string("auto");
       },
       [](RunConfig& c, const std::string& v) {
         if (v == "auto") {
           c.em.init_annotator.reset();
         } else {
           c.em.init_annotator = parse_integer<std::size_t>(v);
         }
       }},
      {"vlse.t1", [](const RunConfig& c) { return opt_double(c.em.vlse.t1); },
       [](RunConfig& c, const std::string& v) {
         c.em.vlse.t1 = v == "auto" ? std::nullopt : std::optional<double>(parse_nonneg(v));
       }},
      {"vlse.t2", [](const RunConfig& c) { return opt_double(c.em.vlse.t2); },
       [](RunConfig& c, const std::string& v) {
         c.em.vlse.t2 = v == "auto" ? std::nullopt : std::optional<double>(parse_nonneg(v));
       }},
      {"vlse.lc_mode",
       [](const RunConfig& c) {
         return std::string(c.em.vlse.mode == vlse::LcMode::kVerbatim ? "verbatim" : "normalized");
       },
       [](RunConfig& c, const std::string& v) {
         if (v == "verbatim") {
           c.em.vlse.mode = vlse::LcMode::kVerbatim;
         } else if (v == "normalized") {
           c.em.vlse.mode = vlse::LcMode::kNormalized;
         } else {
           throw std::invalid_argument("expected verbatim or normalized");
         }
       }},
      {"vlse.cap", [](const RunConfig& c) { return std::to_string(c.em.vlse.cap); },
       [](RunConfig& c, const std::string& v) {
         c.em.vlse.cap = parse_integer<std::size_t>(v);
         if (c.em.vlse.cap == 0) throw std::invalid_argument("must be >= 1");
       }},
      {"sim.annotators", [](const RunConfig& c) { return std::to_string(c.sim.annotators); },
       [](RunConfig& c, const std::string& v) {
         c.sim.annotators = parse_integer<std::size_t>(v);
         if (c.sim.annotators == 0) throw std::invalid_argument("must be >= 1");
       }},
      {"sim.target_p", [](const RunConfig& c) { return format_double(c.sim.target_p); },
       [](RunConfig& c, const std::string& v) {
         c.sim.target_p = parse_probability(v);
         if (c.sim.target_p == 0.0) throw std::invalid_argument("must lie in (0, 1]");
       }},
      {"sim.sigma_p", [](const RunConfig& c) { return format_double(c.sim.sigma_p); },
       [](RunConfig& c, const std::string& v) { c.sim.sigma_p = parse_nonneg(v); }},
      {"sim.type_swap", [](const RunConfig& c) { return format_double(c.sim.mix.type_swap); },
       [](RunConfig& c, const std::string& v) { c.sim.mix.type_swap = parse_probability(v); }},
      {"sim.boundary_shift", [](const RunConfig& c) { return format_double(c.sim.mix.boundary_shift); },
       [](RunConfig& c, const std::string& v) { c.sim.mix.boundary_shift = parse_probability(v); }},
      {"sim.entity_drop", [](const RunConfig& c) { return format_double(c.sim.mix.entity_drop); },
       [](RunConfig& c, const std::string& v) { c.sim.mix.entity_drop = parse_probability(v); }},
      {"sim.spurious", [](const RunConfig& c) { return format_double(c.sim.mix.spurious); },
       [](RunConfig& c, const std::string& v) { c.sim.mix.spurious = parse_probability(v); }},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_config(std::istream& is, const std::string& source) {
  RunConfig cfg;
  std::map<std::string, const ConfigKey*> by_name;
  for (const auto& k : config_keys()) by_name[k.name] = &k;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(source, line_no, "expected key = value", line);
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = by_name.find(key);
    if (it == by_name.end()) fail(source, line_no, "unknown key '" + key + "'", line);
    if (!seen.insert(key).second) fail(source, line_no, "repeated key '" + key + "'", line);
    try {
      it->second->set(cfg, value);
    } catch (const std::exception& e) {
      fail(source, line_no, std::string("bad value for '") + key + "' (" + e.what() + ")", line);
    }
  }
  try {
    cfg.sim.mix.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  auto is = open_in(path);
  return parse_config(is, path);
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  return out;
}

std::string read_file(const std::string& path) {
  auto is = open_in(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  auto os = open_out(path);
  os << content;
}

}  // namespace saslc::io
