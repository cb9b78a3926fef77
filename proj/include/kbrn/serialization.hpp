#pragma once

#include <string>

#include <json.hpp>

#include "kbrn/model.hpp"

namespace kbrn {

// Model persistence as a single JSON document: shapes, flat parameter
// arrays, dictionary centers/bandwidth and a config echo. Doubles are
// emitted with shortest round-trip decimal encoding, so
// serialize -> parse -> serialize is byte-identical and every parameter
// survives bit-exactly.
nlohmann::json model_to_json(const RecurrentModel& model);
std::string model_to_json_text(const RecurrentModel& model,
                               const nlohmann::json* config_echo = nullptr);

RecurrentModel model_from_json(const nlohmann::json& doc);
RecurrentModel model_from_json_text(const std::string& text);

void write_model(const RecurrentModel& model, const std::string& path,
                 const nlohmann::json* config_echo = nullptr);
RecurrentModel read_model(const std::string& path);

}  // namespace kbrn
