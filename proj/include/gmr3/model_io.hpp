#pragma once

// Versioned JSON model files. Doubles are written in shortest round-trip form,
// so reading a file restores every stored real exactly.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmr3/dataset.hpp"
#include "gmr3/mm_solver.hpp"

namespace gmr3 {

inline constexpr const char* kModelFormat = "gmr3-model";
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

struct ModelFile {
  VariableSchema schema;
  ModelParams params;
  double nll = 0.0;
  int n_parameters = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> nll_trace;
  std::vector<std::string> warnings;
};

std::string to_string(Family f);
Family parse_family(const std::string& text);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const VariableSchema& schema, const FitResult& fit);
ModelFile model_from_json(const nlohmann::json& j);

void write_model(const std::filesystem::path& path, const VariableSchema& schema, const FitResult& fit);
ModelFile read_model(const std::filesystem::path& path);

}  // namespace gmr3
