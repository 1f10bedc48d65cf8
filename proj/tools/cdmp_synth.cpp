// Writes a synthetic stand-in dataset in the on-disk layout of a real one.
#include <iostream>

#include "CLI11.hpp"
#include "cdmp/synthetic.h"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic accelerometer datasets for smoke runs", "cdmp-synth"};
  std::string dataset;
  std::string root;
  cdmp::SyntheticOptions opts;
  app.add_option("--dataset", dataset, "ucihar, motionsense or hapt")->required();
  app.add_option("--root", root, "Output directory")->required();
  app.add_option("--seed", opts.seed, "Generator seed");
  app.add_option("--subjects", opts.subjects, "Subject count (0 keeps the real roster)");
  app.add_option("--noise", opts.noise, "Sensor noise level");
  CLI11_PARSE(app, argc, argv);
  try {
    cdmp::write_synthetic_dataset(cdmp::dataset_from_name(dataset), root, opts);
  } catch (const std::exception& e) {
    std::cerr << "cdmp-synth: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
