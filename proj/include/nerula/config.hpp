#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "nerula/probe.hpp"
#include "nerula/signals.hpp"
#include "nerula/training.hpp"

namespace nerula {

using json = nlohmann::json;

// JSON mapping of every configuration struct. Readers reject unknown keys and
// keep defaults for absent ones.

json to_json(const EncoderConfig& c);
json to_json(const LossWeights& w);
json to_json(const PairStrategy& s);
json to_json(const TrainConfig& c);
json to_json(const CorpusConfig& c);
json to_json(const ProbeConfig& c);

EncoderConfig encoder_config_from_json(const json& j);
LossWeights loss_weights_from_json(const json& j);
PairStrategy pair_strategy_from_json(const json& j);
TrainConfig train_config_from_json(const json& j);
CorpusConfig corpus_config_from_json(const json& j);
ProbeConfig probe_config_from_json(const json& j);

/// Experiment bundle: {"corpus": ..., "train": ..., "probe": ...}.
struct RunConfig {
    CorpusConfig corpus;
    TrainConfig train;
    ProbeConfig probe;
};

json to_json(const RunConfig& c);
RunConfig run_config_from_json(const json& j);

/// Applies `dotted.key=value` to j; the value is parsed as JSON when possible,
/// otherwise taken as a string. The key path must already exist.
void apply_override(json& j, std::string_view assignment);

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace nerula
