#pragma once

#include <string>

#include "pbmt/model.hpp"

namespace pbmt {

// Line-oriented textual model format (".dfm"). Grammar in docs/model-format.md.
// Throws ParseError with 1-based line/column on malformed input.
Model parse_model(const std::string& source);
Model parse_model_file(const std::string& path);

// Canonical text; parse_model(serialize_model(m)) is structurally equal to m.
std::string serialize_model(const Model& model);

void write_model_file(const Model& model, const std::string& path);

}  // namespace pbmt
