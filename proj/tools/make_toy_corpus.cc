// Writes a templated gold CoNLL corpus: make_toy_corpus SENTENCES SEED OUT
#include <cstdint>
#include <iostream>
#include <string>

#include "saslc/io.h"
#include "saslc/simulator.h"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: make_toy_corpus SENTENCES SEED OUT\n";
    return 1;
  }
  try {
    const auto ds = saslc::sim::generate_gold_corpus(std::stoul(argv[1]), std::stoull(argv[2]));
    std::vector<saslc::TokenSequence> xs;
    std::vector<saslc::LabelSequence> ys;
    for (const auto& inst : ds.instances) {
      xs.push_back(inst.x);
      ys.push_back(*inst.gold);
    }
    saslc::io::save_conll(argv[3], saslc::io::from_sequences(xs, ys, ds.scheme));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
