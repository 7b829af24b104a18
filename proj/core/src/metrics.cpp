#include "feddist/metrics.hpp"

#include <fstream>
#include <sstream>

#include "feddist/defences.hpp"
#include <json.hpp>

namespace feddist {

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string metrics_to_jsonl(const ExperimentConfig& config,
                             const std::vector<RoundRecord>& rounds) {
  std::ostringstream out;
  for (const RoundRecord& r : rounds) {
    nlohmann::json line{
        {"round", r.round},
        {"test_accuracy", r.test_accuracy},
        {"validation_accuracy", r.validation_accuracy},
        {"weights", r.weights},
        {"honest_label_distance", r.honest_label_distance},
        {"wall_ms", r.wall_ms},
    };
    out << line.dump() << '\n';
  }
  nlohmann::json summary{
      {"summary", true},
      {"branch", branch_name(config.branch)},
      {"attack", attack_kind_name(config.attack.kind)},
      {"defence", defence_label(config.defence)},
      {"alpha", config.alpha},
      {"clients", config.clients},
      {"rounds", config.rounds},
      {"seed", config.seed},
      {"config_hash", hash_hex(config.config_hash())},
      {"final_test_accuracy",
       rounds.empty() ? 0.0 : rounds.back().test_accuracy},
  };
  out << summary.dump() << '\n';
  return out.str();
}

void write_metrics_file(const std::string& path,
                        const ExperimentConfig& config,
                        const std::vector<RoundRecord>& rounds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics file " + path);
  out << metrics_to_jsonl(config, rounds);
}

double read_final_accuracy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path);
  std::string line;
  double result = -1.0;
  bool found = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parsed = nlohmann::json::parse(line);
    if (parsed.contains("summary") && parsed["summary"].get<bool>()) {
      result = parsed["final_test_accuracy"].get<double>();
      found = true;
    }
  }
  if (!found) throw std::runtime_error(path + ": no summary line");
  return result;
}

}  // namespace feddist
