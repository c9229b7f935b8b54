#include "pathagg/model_io.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "pathagg/error.hpp"

namespace pathagg {

namespace {

using nlohmann::json;

std::string_view role_name(StateRole role) {
  switch (role) {
    case StateRole::kBackground: return "background";
    case StateRole::kMotif: return "motif";
    case StateRole::kMarker: return "marker";
  }
  return "background";
}

StateRole role_from_name(const std::string& name) {
  if (name == "background") return StateRole::kBackground;
  if (name == "motif") return StateRole::kMotif;
  if (name == "marker") return StateRole::kMarker;
  throw InvalidConfiguration("unknown state role '" + name + "'");
}

json topology_json(const HmmTopology& t) {
  json labels = json::array();
  for (const auto& l : t.labels()) {
    labels.push_back({{"role", role_name(l.role)},
                      {"motif", l.motif},
                      {"position", l.position},
                      {"branch", l.branch}});
  }
  return {{"template", to_string(t.info().kind)},
          {"motif_count", t.info().motif_count},
          {"motif_width", t.info().motif_width},
          {"start", t.start_distribution()},
          {"successors", t.all_successors()},
          {"counted", t.counted_states()},
          {"labels", labels},
          {"emission_groups", t.emission_groups()}};
}

HmmTopology topology_from_json(const json& j) {
  TopologySpec spec;
  spec.info.kind = template_kind_from_string(j.at("template").get<std::string>());
  spec.info.motif_count = j.at("motif_count").get<int>();
  spec.info.motif_width = j.at("motif_width").get<int>();
  spec.start = j.at("start").get<std::vector<double>>();
  spec.successors = j.at("successors").get<std::vector<std::vector<StateIndex>>>();
  spec.counted = j.at("counted").get<std::vector<StateIndex>>();
  for (const auto& l : j.at("labels")) {
    spec.labels.push_back({role_from_name(l.at("role").get<std::string>()),
                           l.at("motif").get<int>(), l.at("position").get<int>(),
                           l.at("branch").get<int>()});
  }
  spec.emission_groups = j.at("emission_groups").get<std::vector<int>>();
  return HmmTopology(std::move(spec));
}

// nlohmann writes non-finite doubles as null; keep them distinguishable.
json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

double number_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw InvalidConfiguration("bad number '" + s + "'");
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  const auto& p = model.params;
  json trace = json::array();
  for (double v : model.training_trace) trace.push_back(number_or_string(v));
  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["alphabet"] = p.alphabet().symbols();
  doc["topology"] = topology_json(p.topology());
  doc["params"] = {
      {"start", p.start()}, {"transition", p.transition()}, {"emission", p.emission()}};
  doc["caps"] = model.caps.caps();
  doc["regression"] = {
      {"coefficients", model.regression.coefficients},
      {"intercept", model.regression.intercept ? json(*model.regression.intercept) : json(nullptr)},
      {"sigma", model.regression.sigma}};
  const auto& m = model.meta;
  doc["meta"] = {{"learner", to_string(m.learner)},
                 {"seed", m.seed},
                 {"restart", m.restart},
                 {"iterations", m.iterations},
                 {"converged", m.converged},
                 {"expected_visits_fallback", m.expected_visits_fallback},
                 {"tuning_mae", m.tuning_mae ? json(*m.tuning_mae) : json(nullptr)}};
  doc["trace"] = trace;
  return doc.dump(1) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("malformed model file: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", std::string()) != kModelFormat) {
      throw Error(ErrorKind::kParse, "not a pathagg model file");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelVersion) {
      throw IncompatibleVersion("model file version " + std::to_string(version) +
                                ", this build reads version " + std::to_string(kModelVersion));
    }
    Alphabet alphabet(doc.at("alphabet").get<std::string>());
    HmmTopology topology = topology_from_json(doc.at("topology"));
    const auto& pj = doc.at("params");
    HmmParams params(std::move(topology), std::move(alphabet),
                     pj.at("start").get<std::vector<double>>(),
                     pj.at("transition").get<std::vector<std::vector<double>>>(),
                     pj.at("emission").get<std::vector<std::vector<double>>>());
    VisitCaps caps(doc.at("caps").get<std::vector<int>>());
    if (caps.dimension() != params.topology().counted_count()) {
      throw InvalidConfiguration("caps do not match the counted states");
    }
    RegressionParams reg;
    const auto& rj = doc.at("regression");
    reg.coefficients = rj.at("coefficients").get<std::vector<double>>();
    if (!rj.at("intercept").is_null()) reg.intercept = rj.at("intercept").get<double>();
    reg.sigma = rj.at("sigma").get<double>();
    reg.validate();
    if (reg.dimension() != caps.dimension()) {
      throw InvalidConfiguration("regression dimension does not match the counted states");
    }
    TrainingMeta meta;
    const auto& mj = doc.at("meta");
    meta.learner = learner_from_string(mj.at("learner").get<std::string>());
    meta.seed = mj.at("seed").get<std::uint64_t>();
    meta.restart = mj.at("restart").get<int>();
    meta.iterations = mj.at("iterations").get<int>();
    meta.converged = mj.at("converged").get<bool>();
    meta.expected_visits_fallback = mj.at("expected_visits_fallback").get<bool>();
    if (!mj.at("tuning_mae").is_null()) meta.tuning_mae = mj.at("tuning_mae").get<double>();
    std::vector<double> trace;
    for (const auto& v : doc.at("trace")) trace.push_back(number_from(v));
    return TrainedModel{std::move(params), std::move(caps), std::move(reg), std::move(trace), meta};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("model file: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::string& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return model_from_json(buf.str());
  } catch (const Error& e) {
    rethrow_with_context(e, path);
  }
}

}  // namespace pathagg
