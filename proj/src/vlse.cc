#include "saslc/vlse.h"

#include <algorithm>
#include <queue>
#include <sstream>
#include <tuple>

namespace saslc::vlse {

std::vector<Label> ConsistencyEntry::argmax_labels() const {
  std::vector<Label> out;
  const std::size_t best = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (counts[r] == best) out.push_back(labels[r]);
  }
  return out;
}

Label ConsistencyEntry::majority() const { return argmax_labels().front(); }

ConsistencyEntry label_consistency(const CrowdInstance& inst, std::size_t j, LcMode mode) {
  ConsistencyEntry e;
  std::vector<std::pair<Label, std::size_t>> tally;
  for (const auto& ann : inst.annotations) {
    if (!ann) continue;
    const Label l = ann->at(j);
    auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& p) { return p.first == l; });
    if (it == tally.end()) {
      tally.emplace_back(l, 1);
    } else {
      ++it->second;
    }
    ++e.annotators;
  }
  if (e.annotators == 0) {
    throw DataError("no annotator labeled position " + std::to_string(j));
  }
  std::sort(tally.begin(), tally.end());
  std::size_t best = 0;
  for (const auto& [l, n] : tally) {
    e.labels.push_back(l);
    e.counts.push_back(n);
    best = std::max(best, n);
  }
  e.lc = static_cast<double>(best) / static_cast<double>(e.unique());
  if (mode == LcMode::kNormalized) e.lc /= static_cast<double>(e.annotators);
  return e;
}

std::vector<Label> candidate_labels(const ConsistencyEntry& entry, const LabelScheme& scheme,
                                    double t1, double t2) {
  if (!(t1 > t2) || t2 < 0.0) {
    throw std::invalid_argument("candidate_labels needs t1 > t2 >= 0");
  }
  if (entry.lc >= t1) return entry.argmax_labels();
  if (entry.lc > t2) return entry.labels;
  std::vector<Label> all(scheme.size());
  for (Label l = 0; l < all.size(); ++l) all[l] = l;
  return all;
}

std::pair<double, double> resolve_thresholds(const VlseConfig& cfg, std::size_t roster_size) {
  const double k = static_cast<double>(std::max<std::size_t>(roster_size, 1));
  double t1 = std::max(k / 2.0, 1.0);
  double t2 = 0.5;
  if (cfg.mode == LcMode::kNormalized) {
    t1 /= k;
    t2 /= k;
  }
  return {cfg.t1.value_or(t1), cfg.t2.value_or(t2)};
}

CandidateSets candidate_sets(const CrowdInstance& inst, const LabelScheme& scheme,
                             std::size_t roster_size, const VlseConfig& cfg) {
  const auto [t1, t2] = resolve_thresholds(cfg, roster_size);
  CandidateSets out(inst.length());
  for (std::size_t j = 0; j < inst.length(); ++j) {
    out[j] = candidate_labels(label_consistency(inst, j, cfg.mode), scheme, t1, t2);
  }
  return out;
}

PathCount count_valid(const CandidateSets& candidates, const LabelScheme& scheme) {
  if (candidates.empty()) return 0;
  const std::size_t m = scheme.size();
  std::vector<PathCount> prev(m, 0), cur(m, 0);
  for (Label s : candidates[0]) {
    if (scheme.start_allowed(s)) prev[s] = 1;
  }
  for (std::size_t t = 1; t < candidates.size(); ++t) {
    std::fill(cur.begin(), cur.end(), PathCount(0));
    for (Label s : candidates[t]) {
      for (Label r : candidates[t - 1]) {
        if (prev[r] != 0 && scheme.transition_allowed(r, s)) cur[s] += prev[r];
      }
    }
    std::swap(prev, cur);
  }
  PathCount total = 0;
  for (Label s : candidates.back()) total += prev[s];
  return total;
}

PathCount count_unpruned(const CandidateSets& candidates) {
  PathCount total = candidates.empty() ? 0 : 1;
  for (const auto& c : candidates) total *= c.size();
  return total;
}

namespace {

std::vector<Label> all_labels(std::size_t m) {
  std::vector<Label> out(m);
  for (Label l = 0; l < m; ++l) out[l] = l;
  return out;
}

// Partial path in the k-best table: best-first within each (t, state) cell.
struct Partial {
  std::uint32_t score;
  std::uint32_t prev_slot;  // index into candidates[t-1]
  std::uint32_t prev_rank;
};

}  // namespace

ValidLattice enumerate_valid(const CrowdInstance& inst, CandidateSets candidates,
                             const LabelScheme& scheme, std::size_t cap) {
  if (cap == 0) throw std::invalid_argument("lattice cap must be >= 1");
  const std::size_t len = inst.length();
  if (candidates.size() != len) throw std::invalid_argument("candidate sets do not match length");
  const std::size_t m = scheme.size();
  ValidLattice lat;
  lat.majority.resize(len);
  for (std::size_t j = 0; j < len; ++j) lat.majority[j] = label_consistency(inst, j).majority();
  if (len == 0) throw DataError("cannot build a lattice for an empty sequence");

  // Forward reachability, widening a dead position once.
  std::vector<std::vector<char>> fwd(len, std::vector<char>(m, 0));
  auto reach = [&](std::size_t t) {
    bool any = false;
    std::fill(fwd[t].begin(), fwd[t].end(), 0);
    for (Label s : candidates[t]) {
      bool ok = false;
      if (t == 0) {
        ok = scheme.start_allowed(s);
      } else {
        for (Label r = 0; r < m && !ok; ++r) ok = fwd[t - 1][r] && scheme.transition_allowed(r, s);
      }
      fwd[t][s] = ok;
      any = any || ok;
    }
    return any;
  };
  for (std::size_t t = 0; t < len; ++t) {
    if (reach(t)) continue;
    candidates[t] = all_labels(m);
    lat.widened.push_back(t);
    if (!reach(t)) {
      std::ostringstream msg;
      msg << "no label at position " << t << " is consistent with the transition constraints";
      throw DataError(msg.str());
    }
  }
  // Backward co-reachability.
  std::vector<std::vector<char>> bwd(len, std::vector<char>(m, 0));
  for (Label s : candidates[len - 1]) bwd[len - 1][s] = fwd[len - 1][s];
  for (std::size_t t = len - 1; t-- > 0;) {
    for (Label r : candidates[t]) {
      if (!fwd[t][r]) continue;
      for (Label s : candidates[t + 1]) {
        if (bwd[t + 1][s] && scheme.transition_allowed(r, s)) {
          bwd[t][r] = 1;
          break;
        }
      }
    }
  }
  lat.states.resize(len);
  lat.transitions.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    for (Label s : candidates[t]) {
      if (bwd[t][s]) lat.states[t].push_back(s);
    }
    if (t == 0) continue;
    for (Label r : lat.states[t - 1]) {
      for (Label s : lat.states[t]) {
        if (scheme.transition_allowed(r, s)) lat.transitions[t].emplace_back(r, s);
      }
    }
  }
  lat.candidates = candidates;
  lat.valid_count = count_valid(candidates, scheme);
  lat.capped = lat.valid_count > cap;

  // k-best over live states. table[t][slot] lists partial paths ending in
  // lat.states[t][slot], best first; ties ordered by (prev_slot, prev_rank).
  std::vector<std::vector<std::vector<Partial>>> table(len);
  table[0].resize(lat.states[0].size());
  for (std::size_t slot = 0; slot < lat.states[0].size(); ++slot) {
    const std::uint32_t gain = lat.states[0][slot] == lat.majority[0] ? 1 : 0;
    table[0][slot].push_back({gain, 0, 0});
  }
  using HeapItem = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>;  // score, slot, rank
  auto worse = [](const HeapItem& a, const HeapItem& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
    return std::get<2>(a) > std::get<2>(b);
  };
  auto merge = [&](const std::vector<std::vector<Partial>>& prev_cells,
                   const std::vector<std::uint32_t>& pred_slots, std::uint32_t gain) {
    std::priority_queue<HeapItem, std::vector<HeapItem>, decltype(worse)> heap(worse);
    for (std::uint32_t ps : pred_slots) {
      if (!prev_cells[ps].empty()) heap.emplace(prev_cells[ps][0].score, ps, 0);
    }
    std::vector<Partial> out;
    while (!heap.empty() && out.size() < cap) {
      auto [score, ps, rank] = heap.top();
      heap.pop();
      out.push_back({score + gain, ps, rank});
      if (rank + 1 < prev_cells[ps].size()) heap.emplace(prev_cells[ps][rank + 1].score, ps, rank + 1);
    }
    return out;
  };
  for (std::size_t t = 1; t < len; ++t) {
    table[t].resize(lat.states[t].size());
    for (std::size_t slot = 0; slot < lat.states[t].size(); ++slot) {
      const Label s = lat.states[t][slot];
      std::vector<std::uint32_t> preds;
      for (std::size_t ps = 0; ps < lat.states[t - 1].size(); ++ps) {
        if (scheme.transition_allowed(lat.states[t - 1][ps], s)) preds.push_back(static_cast<std::uint32_t>(ps));
      }
      table[t][slot] = merge(table[t - 1], preds, s == lat.majority[t] ? 1 : 0);
    }
  }
  std::vector<std::uint32_t> finals(lat.states[len - 1].size());
  for (std::uint32_t i = 0; i < finals.size(); ++i) finals[i] = i;
  const std::vector<Partial> best = merge(table[len - 1], finals, 0);

  lat.sequences.reserve(best.size());
  lat.agreement.reserve(best.size());
  for (const Partial& p : best) {
    LabelSequence z(len);
    std::uint32_t slot = p.prev_slot, rank = p.prev_rank;
    for (std::size_t t = len; t-- > 0;) {
      z[t] = lat.states[t][slot];
      const Partial& cell = table[t][slot][rank];
      slot = cell.prev_slot;
      rank = cell.prev_rank;
    }
    lat.sequences.push_back(std::move(z));
    lat.agreement.push_back(p.score);
  }
  return lat;
}

ValidLattice build_lattice(const CrowdInstance& inst, const LabelScheme& scheme,
                           std::size_t roster_size, const VlseConfig& cfg) {
  return enumerate_valid(inst, candidate_sets(inst, scheme, roster_size, cfg), scheme, cfg.cap);
}

}  // namespace saslc::vlse
