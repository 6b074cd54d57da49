#include "gmr3/model_io.hpp"

#include <fstream>

#include "gmr3/error.hpp"

namespace gmr3 {

using nlohmann::json;

std::string to_string(Family f) {
  switch (f) {
    case Family::Numeric: return "numeric";
    case Family::Binary: return "binary";
    case Family::Ordinal: return "ordinal";
  }
  return "unknown";
}

Family parse_family(const std::string& text) {
  if (text == "numeric") return Family::Numeric;
  if (text == "binary") return Family::Binary;
  if (text == "ordinal") return Family::Ordinal;
  throw DataError("unknown response family '" + text + "'");
}

namespace {

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j) {
  auto x = j.get<std::vector<double>>();
  return Eigen::Map<Vector>(x.data(), static_cast<Index>(x.size()));
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

Matrix matrix_from(const json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    Vector row = vector_from(j[i]);
    if (row.size() != cols) throw DataError("model file: ragged matrix");
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  return m;
}

}  // namespace

json params_to_json(const ModelParams& p) {
  json j;
  j["S"] = p.rank;
  j["responses"] = json::array();
  for (std::size_t r = 0; r < p.response_names.size(); ++r)
    j["responses"].push_back({{"variable", p.response_names[r]}, {"family", to_string(p.families[r])}});
  j["m"] = vector_json(p.m);
  j["B"] = matrix_json(p.b);
  j["V"] = matrix_json(p.v);
  j["t"] = json::array();
  for (const auto& t : p.thresholds) j["t"].push_back(vector_json(t));
  j["sigma2"] = p.sigma2;
  j["predictors"] = json::array();
  j["quantifications"] = json::array();
  j["numeric_stats"] = json::array();
  for (const auto& t : p.transforms) {
    j["predictors"].push_back(t.name);
    if (t.is_numeric()) {
      j["numeric_stats"].push_back({{"variable", t.name}, {"mean", t.mean}, {"sd", t.sd}});
    } else {
      j["quantifications"].push_back({{"variable", t.name},
                                      {"level", to_string(t.level)},
                                      {"categories", t.categories},
                                      {"scores", vector_json(t.quantification.scores)},
                                      {"direction", to_string(t.quantification.direction)}});
    }
  }
  return j;
}

ModelParams params_from_json(const json& j) {
  try {
    ModelParams p;
    p.rank = j.at("S").get<int>();
    for (const auto& r : j.at("responses")) {
      p.response_names.push_back(r.at("variable").get<std::string>());
      p.families.push_back(parse_family(r.at("family").get<std::string>()));
    }
    p.m = vector_from(j.at("m"));
    p.b = matrix_from(j.at("B"), p.rank);
    p.v = matrix_from(j.at("V"), p.rank);
    for (const auto& t : j.at("t")) p.thresholds.push_back(vector_from(t));
    p.sigma2 = j.at("sigma2").get<double>();
    std::map<std::string, json> quant, stats;
    for (const auto& q : j.at("quantifications")) quant[q.at("variable").get<std::string>()] = q;
    for (const auto& s : j.at("numeric_stats")) stats[s.at("variable").get<std::string>()] = s;
    for (const auto& name_j : j.at("predictors")) {
      const std::string name = name_j.get<std::string>();
      PredictorTransform t;
      t.name = name;
      if (auto it = stats.find(name); it != stats.end()) {
        t.level = Level::Numeric;
        t.mean = it->second.at("mean").get<double>();
        t.sd = it->second.at("sd").get<double>();
      } else if (auto q = quant.find(name); q != quant.end()) {
        t.level = parse_level(q->second.at("level").get<std::string>());
        t.categories = q->second.at("categories").get<std::vector<std::string>>();
        t.quantification.level = t.level;
        t.quantification.scores = vector_from(q->second.at("scores"));
        t.quantification.direction = parse_direction(q->second.at("direction").get<std::string>());
      } else {
        throw DataError("model file: no scaling stored for predictor '" + name + "'");
      }
      p.transforms.push_back(std::move(t));
    }
    const std::size_t R = p.response_names.size();
    if (static_cast<std::size_t>(p.m.size()) != R || static_cast<std::size_t>(p.v.rows()) != R ||
        p.thresholds.size() != R || static_cast<std::size_t>(p.b.rows()) != p.transforms.size())
      throw DataError("model file: parameter shapes are inconsistent");
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

json model_to_json(const VariableSchema& schema, const FitResult& fit) {
  json j;
  j["format"] = kModelFormat;
  j["format_version"] = kModelFormatVersion;
  j["version"] = kVersion;
  j["schema_digest"] = schema.digest();
  j["schema"] = schema.to_json();
  j["params"] = params_to_json(fit.params);
  j["nll"] = fit.nll();
  j["K"] = fit.n_parameters;
  j["convergence"] = {{"converged", fit.converged}, {"iterations", fit.iterations}, {"nll_trace", fit.nll_trace},
                      {"warnings", fit.warnings}};
  return j;
}

ModelFile model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw DataError("not a model file");
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format version " + j.at("format_version").dump());
    ModelFile m;
    m.schema = VariableSchema::from_json(j.at("schema"));
    if (m.schema.digest() != j.at("schema_digest").get<std::string>())
      throw DataError("model file: schema digest does not match the embedded schema");
    m.params = params_from_json(j.at("params"));
    m.nll = j.at("nll").get<double>();
    m.n_parameters = j.at("K").get<int>();
    const auto& c = j.at("convergence");
    m.converged = c.at("converged").get<bool>();
    m.iterations = c.at("iterations").get<int>();
    m.nll_trace = c.at("nll_trace").get<std::vector<double>>();
    m.warnings = c.at("warnings").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void write_model(const std::filesystem::path& path, const VariableSchema& schema, const FitResult& fit) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path.string());
  out << model_to_json(schema, fit).dump(2) << '\n';
}

ModelFile read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace gmr3
