#include "bbsox/report.hpp"

namespace bbsox {

using nlohmann::json;

namespace {

const char* verdict_name(CheckVerdict v) {
  switch (v) {
    case CheckVerdict::Pass:
      return "pass";
    case CheckVerdict::Fail:
      return "fail";
    default:
      return "skipped";
  }
}

}  // namespace

json verdict_json(const PipelineResult& res) {
  json v;
  v["problem"] = res.config.name;
  v["config_echo"] = serialize_problem_config(res.config);

  json stages;
  {
    const BBSExtremal& ext = res.shooting.extremal;
    json s;
    s["status"] = "pass";
    s["tau1"] = ext.tau1;
    s["tau2"] = ext.tau2;
    s["T"] = ext.T;
    s["residual"] = res.shooting.residual_norm;
    s["iterations"] = res.shooting.iterations;
    s["x_final"] = std::vector<double>(ext.lT.x.data(), ext.lT.x.data() + ext.lT.x.size());
    s["warnings"] = ext.warnings;
    stages["shooting"] = s;
  }
  {
    json s;
    s["status"] = res.conditions.all_passed() ? "pass" : "fail";
    json checks = json::array();
    for (const auto& c : res.conditions.checks) {
      json cj;
      cj["name"] = c.name;
      cj["verdict"] = verdict_name(c.verdict);
      cj["margin"] = c.margin;
      cj["worst_time"] = c.worst_time;
      if (!c.diagnostics.empty()) cj["diagnostics"] = c.diagnostics;
      checks.push_back(cj);
    }
    s["checks"] = checks;
    stages["conditions"] = s;
  }
  if (res.has_coercivity) {
    json s;
    s["status"] = res.coercivity.pass ? "pass" : "fail";
    s["cost_case"] =
        res.cost_case == CostCase::F1Invariant ? "edge-invariant" : "edge-transverse";
    s["min_zeta_singular_value"] = res.coercivity.min_zeta_sv;
    s["worst_time"] = res.coercivity.worst_time;
    s["determinant_sign_flips"] = res.coercivity.det_sign_flips;
    if (res.coercivity.boundary_checked) {
      s["boundary_value"] = res.coercivity.boundary_value;
      s["boundary_pass"] = res.coercivity.boundary_pass;
    } else {
      s["boundary"] = "skipped: k = 0";
    }
    if (!res.coercivity.notes.empty()) s["notes"] = res.coercivity.notes;
    if (res.has_oracle) {
      json o;
      o["min_eigenvalue"] = res.oracle.min_eigenvalue;
      o["coercive"] = res.oracle.coercive;
      o["variables"] = res.oracle.nvars;
      o["agrees"] = res.oracle.coercive == res.coercivity.pass;
      s["oracle"] = o;
    }
    stages["coercivity"] = s;
  }
  if (res.has_probe) {
    json s;
    s["status"] = res.probe.flagged ? "advisory-flagged" : "advisory-pass";
    s["min_singular_value"] = res.probe.min_sv;
    s["junction_min_singular_value"] = res.probe.junction_min_sv;
    s["injectivity_min_ratio"] = res.probe.injectivity_min_ratio;
    s["radius"] = res.probe.radius;
    s["disclaimer"] = res.probe.disclaimer;
    stages["probe"] = s;
  }
  if (res.has_iota) {
    json s;
    s["max_residual"] = res.iota.max_residual;
    s["worst_time"] = res.iota.worst_time;
    s["flipped_sign"] = res.iota.flipped_sign;
    stages["conjugacy"] = s;
  }
  if (res.has_perturb) {
    json s;
    s["status"] = res.perturb.min_gap >= -1e-9 ? "advisory-pass" : "advisory-flagged";
    s["min_gap"] = res.perturb.min_gap;
    s["trials"] = res.perturb.trials.size();
    s["discarded"] = res.perturb.discarded;
    if (res.perturb.has_exponent) s["dither_exponent"] = res.perturb.dither_exponent;
    stages["perturbation"] = s;
  }
  v["stages"] = stages;

  json margins;
  for (const auto& c : res.conditions.checks)
    if (c.verdict != CheckVerdict::Skipped) margins[c.name] = c.margin;
  if (res.has_coercivity) {
    margins["conjugate-point"] = res.coercivity.min_zeta_sv;
    if (res.coercivity.boundary_checked) margins["boundary"] = res.coercivity.boundary_value;
  }
  v["margins"] = margins;

  v["certificate"] = res.certified
                         ? "certified strict strong local minimizer"
                         : ("not certified: " +
                            (res.failed_stage.empty() ? std::string("incomplete pipeline")
                                                      : res.failed_stage));

  json timing;
  for (const auto& [k, sec] : res.runtimes) timing[k] = sec;
  v["timing"] = timing;
  return v;
}

bool matches_schema(const json& doc, const json& schema, std::string* error) {
  auto fail = [&](const std::string& msg) {
    if (error) *error = msg;
    return false;
  };
  if (schema.contains("enum")) {
    for (const auto& e : schema["enum"])
      if (doc == e) return true;
    return fail("value not in enum: " + doc.dump());
  }
  if (schema.contains("type")) {
    const std::string ty = schema["type"].get<std::string>();
    const bool ok = (ty == "object" && doc.is_object()) || (ty == "array" && doc.is_array()) ||
                    (ty == "string" && doc.is_string()) ||
                    (ty == "number" && doc.is_number()) ||
                    (ty == "integer" && doc.is_number_integer()) ||
                    (ty == "boolean" && doc.is_boolean()) || (ty == "null" && doc.is_null());
    if (!ok) return fail("expected type " + ty + ", got " + doc.dump().substr(0, 80));
  }
  if (doc.is_object()) {
    if (schema.contains("required")) {
      for (const auto& r : schema["required"])
        if (!doc.contains(r.get<std::string>()))
          return fail("missing required property " + r.get<std::string>());
    }
    if (schema.contains("properties")) {
      for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
        if (!doc.contains(it.key())) continue;
        std::string sub;
        if (!matches_schema(doc[it.key()], it.value(), &sub))
          return fail(it.key() + ": " + sub);
      }
      if (schema.contains("additionalProperties") &&
          schema["additionalProperties"].is_boolean() &&
          !schema["additionalProperties"].get<bool>()) {
        for (auto it = doc.begin(); it != doc.end(); ++it)
          if (!schema["properties"].contains(it.key()))
            return fail("unexpected property " + it.key());
      }
    }
  }
  if (doc.is_array() && schema.contains("items")) {
    for (size_t i = 0; i < doc.size(); ++i) {
      std::string sub;
      if (!matches_schema(doc[i], schema["items"], &sub))
        return fail("item " + std::to_string(i) + ": " + sub);
    }
  }
  return true;
}

}  // namespace bbsox
