#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the planted three-family fixture corpus"};
  std::string dir;
  tlsmap::corpus::PlantedSpec spec;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--family-size", spec.family_size, "Members per family")->check(CLI::Range(1, 250));
  app.add_option("--seed", spec.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);
  try {
    tlsmap::corpus::write_corpus(tlsmap::corpus::planted_families(spec), dir);
  } catch (const std::exception& e) {
    std::cerr << "tlsmap_gen_corpus: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
