/*
 * Copyright 2026 The oodkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// JSON forms of the result types (nlohmann/json).

#ifndef OODKIT_SERIALIZE_HPP_
#define OODKIT_SERIALIZE_HPP_

#include <cmath>
#include <string>

#include "json.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/scoring.hpp"
#include "oodkit/selection.hpp"
#include "oodkit/theorylab.hpp"

namespace oodkit {

// JSON has no infinities; they are written as null.
inline nlohmann::json JsonNumber(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::json ToJson(const ScorerConfig& cfg) {
  nlohmann::json j;
  j["method"] = MethodName(cfg.method);
  j["tau"] = cfg.tau;
  j["top_n"] = cfg.top_n.has_value() ? nlohmann::json(*cfg.top_n) : nullptr;
  j["gamma"] = cfg.gamma;
  j["gen_m"] = cfg.gen_m.has_value() ? nlohmann::json(*cfg.gen_m) : nullptr;
  j["energy_t"] = cfg.energy_t;
  j["transform"] = TransformName(cfg.transform);
  j["normalization"] = NormalizationName(cfg.normalization);
  return j;
}

inline nlohmann::json ToJson(const EvalResult& r) {
  return {{"fpr95", r.fpr95}, {"auroc", r.auroc},   {"aupr_in", r.aupr},
          {"lambda95", r.lambda95}, {"n_id", r.n_id}, {"n_ood", r.n_ood}};
}

inline nlohmann::json ToJson(const NSelection& s) {
  return {{"n_star", s.n_star},
          {"n_min", s.n_min},
          {"n_max", s.n_max},
          {"gap_curve", s.gap_curve}};
}

inline nlohmann::json ToJson(const TheoremReport& r) {
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [key, value] : r.statistics) stats[key] = JsonNumber(value);
  return {{"name", r.name},
          {"samples", r.samples},
          {"statistics", stats},
          {"passed", r.passed},
          {"margin", JsonNumber(r.margin)}};
}

}  // namespace oodkit

#endif  // OODKIT_SERIALIZE_HPP_
