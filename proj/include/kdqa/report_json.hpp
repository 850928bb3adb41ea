#pragma once

#include <json.hpp>

#include "kdqa/distill.hpp"
#include "kdqa/eval.hpp"
#include "kdqa/model.hpp"
#include "kdqa/noise.hpp"

namespace kdqa {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& cfg);
Json to_json(const TrainConfig& cfg);
Json to_json(const DistillConfig& cfg);
Json to_json(const NoiseChannelConfig& cfg);
/// Wall-clock time is left out so reports compare byte-for-byte across reruns.
Json to_json(const TrainReport& report);
Json to_json(const EvalReport& report);
Json to_json(const GridReport& report);
Json to_json(const SweepReport& report);
Json to_json(const CompressionReport& report);

}  // namespace kdqa
