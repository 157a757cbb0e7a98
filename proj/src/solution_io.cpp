#include "sipred/solution_io.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace sipred {

using detail::ordered_json;

namespace {

ordered_json scenario_json(const Scenario& s) {
  ordered_json j;
  j["id"] = s.id;
  j["w"] = detail::numbers(s.w);
  j["origin"] = origin_label(s);
  j["violation"] = detail::number(s.violation_at_creation);
  return j;
}

ordered_json scenario_list(const std::vector<Scenario>& ss) {
  ordered_json a = ordered_json::array();
  for (const Scenario& s : ss) a.push_back(scenario_json(s));
  return a;
}

void parse_origin(const std::string& label, Scenario& s) {
  if (label == "initial") {
    s.origin = Scenario::Origin::Initial;
    s.g_index = -1;
  } else if (label == "f") {
    s.origin = Scenario::Origin::FObjective;
    s.g_index = -1;
  } else if (label.size() > 3 && label.rfind("g[", 0) == 0 && label.back() == ']') {
    s.origin = Scenario::Origin::GConstraint;
    try {
      std::size_t used = 0;
      const std::string digits = label.substr(2, label.size() - 3);
      s.g_index = std::stoi(digits, &used);
      if (used != digits.size() || s.g_index < 0) throw std::invalid_argument("index");
    } catch (const std::exception&) {
      throw LoadError("BAD_TYPE", "scenario origin '" + label + "' has a bad index");
    }
  } else {
    throw LoadError("BAD_TYPE", "unknown scenario origin '" + label + "'");
  }
}

const ordered_json& require(const ordered_json& j, const char* key) {
  if (!j.contains(key)) throw LoadError("MISSING_KEY", std::string("solution has no \"") + key + "\" key");
  return j.at(key);
}

template <class F>
auto typed(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& err) {
    throw LoadError("BAD_TYPE", where + ": " + err.what());
  }
}

}  // namespace

SolutionFile solution_of(const ReductionReport& r) {
  SolutionFile s;
  s.theta = r.theta;
  s.gamma = r.gamma;
  s.scenarios = r.scenario_set.scenarios;
  s.witnesses = r.bundle.witnesses;
  s.status = std::string(to_string(r.status));
  s.iterations = static_cast<int>(r.iterations.size());
  return s;
}

std::string solution_to_json(const SolutionFile& s) {
  ordered_json j;
  j["theta"] = detail::numbers(s.theta);
  j["gamma"] = detail::number(s.gamma);
  j["scenarios"] = scenario_list(s.scenarios);
  ordered_json ws = ordered_json::array();
  for (const Witness& w : s.witnesses) {
    ordered_json o;
    o["zp"] = detail::numbers(w.zp);
    o["zm"] = detail::numbers(w.zm);
    o["s"] = detail::numbers(w.s);
    ws.push_back(o);
  }
  j["witnesses"] = ws;
  j["status"] = s.status;
  j["iterations"] = s.iterations;
  return detail::dump(j);
}

SolutionFile solution_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& err) {
    throw LoadError("PARSE_ERROR", err.what());
  }
  if (!j.is_object()) throw LoadError("PARSE_ERROR", "top level must be an object");

  SolutionFile s;
  s.theta = typed("theta", [&] { return detail::read_numbers(require(j, "theta")); });
  s.gamma = typed("gamma", [&] { return detail::read_number(require(j, "gamma")); });
  const auto& scen = require(j, "scenarios");
  if (!scen.is_array()) throw LoadError("BAD_TYPE", "scenarios: expected an array");
  for (std::size_t i = 0; i < scen.size(); ++i) {
    const std::string where = "scenarios[" + std::to_string(i) + "]";
    const auto& o = scen[i];
    if (!o.is_object()) throw LoadError("BAD_TYPE", where + ": expected an object");
    Scenario sc;
    sc.id = typed(where + ".id", [&] { return require(o, "id").get<int>(); });
    sc.w = typed(where + ".w", [&] { return detail::read_numbers(require(o, "w")); });
    parse_origin(typed(where + ".origin", [&] { return require(o, "origin").get<std::string>(); }), sc);
    sc.violation_at_creation = typed(where + ".violation", [&] { return detail::read_number(require(o, "violation")); });
    s.scenarios.push_back(std::move(sc));
  }
  const auto& wit = require(j, "witnesses");
  if (!wit.is_array()) throw LoadError("BAD_TYPE", "witnesses: expected an array");
  for (std::size_t i = 0; i < wit.size(); ++i) {
    const std::string where = "witnesses[" + std::to_string(i) + "]";
    const auto& o = wit[i];
    if (!o.is_object()) throw LoadError("BAD_TYPE", where + ": expected an object");
    Witness w;
    w.zp = typed(where + ".zp", [&] { return detail::read_numbers(require(o, "zp")); });
    w.zm = typed(where + ".zm", [&] { return detail::read_numbers(require(o, "zm")); });
    w.s = typed(where + ".s", [&] { return detail::read_numbers(require(o, "s")); });
    s.witnesses.push_back(std::move(w));
  }
  s.status = typed("status", [&] { return require(j, "status").get<std::string>(); });
  s.iterations = typed("iterations", [&] { return require(j, "iterations").get<int>(); });
  return s;
}

SolutionFile load_solution(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("MISSING_FILE", "cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return solution_from_json(ss.str());
}

std::vector<Diagnostic> check_solution(const SipProblem& p, const SolutionFile& s) {
  std::vector<Diagnostic> out;
  const auto bad = [&](const std::string& m) { out.push_back({"BAD_SOLUTION", m}); };
  if (s.theta.size() != p.dims.theta) {
    bad("theta has " + std::to_string(s.theta.size()) + " entries, problem needs " +
        std::to_string(p.dims.theta));
  }
  for (std::size_t i = 0; i < s.scenarios.size(); ++i) {
    if (s.scenarios[i].w.size() != p.dims.w) bad("scenario " + std::to_string(i) + " has the wrong w length");
  }
  for (std::size_t i = 0; i < s.witnesses.size(); ++i) {
    const Witness& w = s.witnesses[i];
    if (w.zp.size() != p.dims.zp || w.zm.size() != p.dims.zm || w.s.size() != p.dims.s) {
      bad("witness " + std::to_string(i) + " does not match the problem dims");
    }
  }
  return out;
}

std::string iteration_log_jsonl(const ReductionReport& r) {
  std::string out;
  for (const IterationRecord& rec : r.iterations) {
    ordered_json j;
    j["iter"] = rec.iteration;
    j["gamma"] = detail::number(rec.gamma);
    j["n_scenarios"] = rec.n_scenarios;
    j["worst_violation"] = detail::number(rec.worst_violation);
    j["wall_ms"] = rec.wall_ms;
    j["scenarios_added"] = rec.scenarios_added;
    j["master_status"] = std::string(to_string(rec.master_status));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string scenarios_to_json(const ScenarioSet& set) {
  ordered_json j;
  j["dedup_radius"] = set.dedup_radius;
  j["scenarios"] = scenario_list(set.scenarios);
  return detail::dump(j);
}

}  // namespace sipred
