// Writes a synthetic flow CSV in the 5G-NIDD column layout.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "moeids/data/synthetic.hpp"

int main(int argc, char** argv) {
  moeids::data::SyntheticFlowOptions options;
  std::size_t rows = 200;
  std::string out;
  CLI::App app{"Synthetic 5G-NIDD-style flow generator", "moeids_synth"};
  app.add_option("--rows-per-class", rows, "Rows generated for each of the nine classes")->capture_default_str();
  app.add_option("--seed", options.seed, "Random seed")->capture_default_str();
  app.add_option("--missing-rate", options.missing_rate, "Probability that a feature cell is empty")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--spread", options.spread, "Numeric noise around each class centroid")->capture_default_str();
  app.add_option("--label-column", options.label_column, "Label column header")->capture_default_str();
  app.add_option("--out", out, "Output CSV path")->required();
  CLI11_PARSE(app, argc, argv);

  options.rows_per_class.assign(moeids::data::kNumClasses, rows);
  std::ofstream file(out);
  if (!file) {
    std::cerr << "cannot write " << out << '\n';
    return 4;
  }
  moeids::data::write_synthetic_flows(file, moeids::data::FlowSchema::nidd(), options);
  return file ? 0 : 4;
}
