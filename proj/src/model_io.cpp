#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "sipred/model.hpp"

namespace sipred {

using detail::ordered_json;

namespace {

ordered_json expr_list(const std::vector<Expr>& es) {
  ordered_json a = ordered_json::array();
  for (const Expr& e : es) a.push_back(to_string(e));
  return a;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

Expr read_expr(const ordered_json& j, const std::string& key) {
  if (!j.is_string()) throw LoadError("BAD_TYPE", key + ": expected an expression string");
  const auto text = j.get<std::string>();
  try {
    return parse(text);
  } catch (const ParseError& err) {
    throw LoadError("BAD_EXPR", key + ": " + err.what() + " at offset " + std::to_string(err.offset()));
  }
}

std::vector<Expr> read_exprs(const ordered_json& root, const char* key) {
  std::vector<Expr> out;
  if (!root.contains(key)) return out;
  const auto& a = root.at(key);
  if (!a.is_array()) throw LoadError("BAD_TYPE", std::string(key) + ": expected an array");
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.push_back(read_expr(a[i], std::string(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::size_t read_dim(const ordered_json& dims, const char* key) {
  if (!dims.contains(key)) return 0;
  const auto& v = dims.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw LoadError("BAD_TYPE", std::string("dims.") + key + ": expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<double> read_bound(const ordered_json& bounds, const char* key) {
  if (!bounds.contains(key)) return {};
  try {
    return detail::read_numbers(bounds.at(key));
  } catch (const std::invalid_argument& err) {
    throw LoadError("BAD_TYPE", std::string("bounds.") + key + ": " + err.what());
  }
}

}  // namespace

std::string problem_to_json(const SipProblem& p) {
  ordered_json j;
  j["name"] = p.name;
  j["dims"] = {{"theta", p.dims.theta}, {"w", p.dims.w}, {"zp", p.dims.zp},
               {"zm", p.dims.zm},       {"s", p.dims.s}};
  ordered_json b;
  b["theta_lo"] = detail::numbers(p.theta_lo);
  b["theta_hi"] = detail::numbers(p.theta_hi);
  b["w_lo"] = detail::numbers(p.w_lo);
  b["w_hi"] = detail::numbers(p.w_hi);
  b["s_lo"] = detail::numbers(p.s_lo);
  b["s_hi"] = detail::numbers(p.s_hi);
  b["gamma"] = detail::numbers({p.gamma_lo, p.gamma_hi});
  j["bounds"] = b;
  j["f"] = to_string(p.f);
  j["g"] = expr_list(p.g);
  j["d"] = expr_list(p.d);
  j["e"] = expr_list(p.e);
  j["q"] = expr_list(p.q);
  j["r"] = expr_list(p.r);
  if (p.example) {
    ordered_json params = ordered_json::object();
    for (const auto& [k, v] : p.example->params) {
      params[k] = v.size() == 1 ? detail::number(v[0]) : detail::numbers(v);
    }
    j["example"] = {{"kind", p.example->kind}, {"params", params}};
  }
  return detail::dump(j);
}

SipProblem problem_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw LoadError("PARSE_ERROR", "line " + std::to_string(line_of(text, err.byte)) + ": " + err.what());
  }
  if (!j.is_object()) throw LoadError("PARSE_ERROR", "top level must be an object");
  if (!j.contains("dims")) throw LoadError("MISSING_DIMS", "problem has no \"dims\" key");
  if (!j.at("dims").is_object()) throw LoadError("BAD_TYPE", "dims: expected an object");

  SipProblem p;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw LoadError("BAD_TYPE", "name: expected a string");
    p.name = j.at("name").get<std::string>();
  }
  const auto& dims = j.at("dims");
  p.dims = {read_dim(dims, "theta"), read_dim(dims, "w"), read_dim(dims, "zp"),
            read_dim(dims, "zm"), read_dim(dims, "s")};

  const ordered_json bounds = j.contains("bounds") ? j.at("bounds") : ordered_json::object();
  if (!bounds.is_object()) throw LoadError("BAD_TYPE", "bounds: expected an object");
  p.theta_lo = read_bound(bounds, "theta_lo");
  p.theta_hi = read_bound(bounds, "theta_hi");
  p.w_lo = read_bound(bounds, "w_lo");
  p.w_hi = read_bound(bounds, "w_hi");
  p.s_lo = read_bound(bounds, "s_lo");
  p.s_hi = read_bound(bounds, "s_hi");
  if (bounds.contains("gamma")) {
    const auto gamma = read_bound(bounds, "gamma");
    if (gamma.size() != 2) throw LoadError("BAD_TYPE", "bounds.gamma: expected [lo, hi]");
    p.gamma_lo = gamma[0];
    p.gamma_hi = gamma[1];
  }

  if (!j.contains("f")) throw LoadError("MISSING_KEY", "problem has no objective \"f\"");
  p.f = read_expr(j.at("f"), "f");
  p.g = read_exprs(j, "g");
  p.d = read_exprs(j, "d");
  p.e = read_exprs(j, "e");
  p.q = read_exprs(j, "q");
  p.r = read_exprs(j, "r");

  if (j.contains("example")) {
    const auto& ex = j.at("example");
    if (!ex.is_object() || !ex.contains("kind") || !ex.at("kind").is_string()) {
      throw LoadError("BAD_TYPE", "example: expected {kind, params}");
    }
    ExampleMeta meta;
    meta.kind = ex.at("kind").get<std::string>();
    if (ex.contains("params")) {
      for (const auto& [k, v] : ex.at("params").items()) {
        try {
          meta.params[k] = v.is_array() ? detail::read_numbers(v) : std::vector<double>{detail::read_number(v)};
        } catch (const std::invalid_argument& err) {
          throw LoadError("BAD_TYPE", "example.params." + k + ": " + err.what());
        }
      }
    }
    p.example = std::move(meta);
  }

  auto diags = validate(p);
  if (!diags.empty()) {
    const std::string code = diags.front().code;
    const std::string message = diags.front().message;
    throw LoadError(code, message, std::move(diags));
  }
  return p;
}

SipProblem load_problem(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("MISSING_FILE", "cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return problem_from_json(ss.str());
}

void save_problem(const SipProblem& p, const std::filesystem::path& path) {
  detail::write_text(path.string(), problem_to_json(p));
}

}  // namespace sipred
