#include "moeids/data/synthetic.hpp"

#include <ostream>

#include <fmt/format.h>

#include "moeids/errors.hpp"
#include "moeids/rng.hpp"

namespace moeids::data {

const std::vector<std::vector<std::string>>& synthetic_vocabularies() {
  static const std::vector<std::vector<std::string>> vocab = {
      {"tcp", "udp", "icmp", "arp", "ipv6-icmp", "llc", "lldp", "sctp"},
      {"cs0", "ef", "af41", "cs4", "af11", "cs6", "af21", "cs1", "cs7", "af31", "cs2", "af22"},
      {"cs0", "ef", "af41", "cs6", "cs4", "cs1"},
      {"Start", "Status", "Shutdown"},
      {"REQ", "CON", "RST", "INT", "FIN", "ECO", "URP", "ACC", "NRS", "TST", "RSP"},
  };
  return vocab;
}

const std::vector<std::string>& dataset_label_names() {
  static const std::vector<std::string> names = {"Benign",    "SYNScan",  "TCPConnectScan", "UDPScan",    "ICMPFlood",
                                                 "UDPFlood",  "SYNFlood", "HTTPFlood",      "SlowrateDoS"};
  return names;
}

void write_synthetic_flows(std::ostream& out, const FlowSchema& schema, const SyntheticFlowOptions& options) {
  if (options.rows_per_class.size() != kNumClasses) throw ConfigError("rows_per_class needs one entry per class");
  const auto& vocab = synthetic_vocabularies();
  if (vocab.size() != schema.categorical_count()) throw SchemaError("synthetic vocabularies do not fit the schema");

  Rng rng(options.seed);
  Rng centroid_rng = rng.fork(1);
  std::vector<std::vector<double>> centroid(kNumClasses, std::vector<double>(schema.numeric_count()));
  for (auto& row : centroid) {
    for (auto& v : row) v = centroid_rng.uniform(0.0, 100.0);
  }

  out << "Id";
  for (const auto& spec : schema.features()) out << ',' << spec.name;
  out << ',' << options.label_column << ",Label\n";

  std::vector<std::size_t> emitted(kNumClasses, 0);
  std::size_t id = 0;
  for (bool more = true; more;) {
    more = false;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (emitted[c] >= options.rows_per_class[c]) continue;
      more = true;
      const std::size_t j = emitted[c]++;
      out << id++;
      for (const auto& spec : schema.features()) {
        out << ',';
        if (options.missing_rate > 0.0 && rng.uniform() < options.missing_rate) continue;
        if (spec.kind == FeatureKind::kNumeric) {
          out << fmt::format("{:.6f}", centroid[c][spec.slot] + options.spread * rng.normal());
        } else {
          const auto& levels = vocab[spec.slot];
          // Cycle through every level now and then so all of them are observed.
          const std::size_t level = rng.uniform() < 0.3 ? (j + c) % levels.size() : c % levels.size();
          out << levels[level];
        }
      }
      out << ',' << dataset_label_names()[c] << ',' << (c == 0 ? "Benign" : "Malicious") << '\n';
    }
  }
}

}  // namespace moeids::data
