#pragma once

#include "json.hpp"
#include "trust/synth.hpp"
#include "trust/trainer.hpp"
#include "trust/uncertainty.hpp"

namespace trust {

// JSON views of configs and reports. Wall-clock time is left out of
// to_json(TrainReport) so that reports are byte-stable across runs.

nlohmann::json to_json(const AugmentationConfig& c);
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const TrainReport& r);
nlohmann::json to_json(const AblationTable& t);
nlohmann::json to_json(const WeightHistogram& h);

}  // namespace trust
