#pragma once

#include <gsopt/train/trainer.hpp>

#include <json.hpp>

#include <string>
#include <vector>

namespace gsopt {

/// CSV with header "iter,loss,psnr_probe,count,pruned,split"; doubles in shortest round-trip form.
void save_trace_csv(const std::vector<TraceRow> &trace, const std::string &path);
std::vector<TraceRow> load_trace_csv(const std::string &path);

nlohmann::json eval_to_json(const EvalResult &result);

/// Every field of the config, defaults resolved.
nlohmann::json train_config_to_json(const TrainConfig &config);

/// Overrides fields of `config` present in `doc`; unknown keys raise ConfigError.
void apply_train_config_json(const nlohmann::json &doc, TrainConfig &config);

void write_json(const nlohmann::json &doc, const std::string &path);
nlohmann::json read_json(const std::string &path);

} // namespace gsopt
