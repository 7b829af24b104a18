#pragma once

#include <string>
#include <vector>

#include "feddist/config.hpp"
#include "feddist/federation.hpp"

namespace feddist {

// JSON-lines metrics stream: one object per round followed by one summary
// object. Deterministic byte-for-byte apart from the wall_ms fields.
std::string metrics_to_jsonl(const ExperimentConfig& config,
                             const std::vector<RoundRecord>& rounds);

void write_metrics_file(const std::string& path,
                        const ExperimentConfig& config,
                        const std::vector<RoundRecord>& rounds);

// Final test accuracy parsed back out of a metrics file (summary line).
double read_final_accuracy(const std::string& path);

}  // namespace feddist
