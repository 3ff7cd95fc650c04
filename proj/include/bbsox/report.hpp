#pragma once

#include <json.hpp>

#include "bbsox/overmax.hpp"
#include "bbsox/problems.hpp"

namespace bbsox {

// Full pipeline result; optional stages are empty when not run.
struct PipelineResult {
  ProblemConfig config;
  ShootingResult shooting;
  ConditionReport conditions;
  bool has_coercivity = false;
  CostCase cost_case = CostCase::F1Invariant;
  CoercivityReport coercivity;
  bool has_oracle = false;
  OracleResult oracle;
  bool has_probe = false;
  ProbeReport probe;
  bool has_perturb = false;
  PerturbReport perturb;
  bool has_iota = false;
  IotaReport iota;
  std::map<std::string, double> runtimes;  // seconds per stage
  std::string failed_stage;                // first failing required stage, if any
  bool certified = false;
};

nlohmann::json verdict_json(const PipelineResult& res);

// Minimal JSON-schema walker supporting the subset used by the shipped
// verdict schema: type, properties, required, items, enum, additionalProperties.
bool matches_schema(const nlohmann::json& doc, const nlohmann::json& schema,
                    std::string* error = nullptr);

}  // namespace bbsox
