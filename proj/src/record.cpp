// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/error.hpp"
#include "wbr/trainer.hpp"

namespace wbr {

nlohmann::json to_json(const RunRecord& record) {
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t b = 0; b < record.metrics.num_stages(); ++b) {
    nlohmann::json stage = {{"stage", b + 1},
                            {"A_b", record.metrics.stage_accuracy[b]},
                            {"new_task_acc", record.metrics.new_task_accuracy[b]},
                            {"seen_classes", record.seen_classes.at(b)},
                            {"wall_ms", b < record.wall_ms.size() ? record.wall_ms[b] : 0.0}};
    if (b < record.balance.size()) {
      const auto& bal = record.balance[b];
      stage["row_delta_new"] = bal.new_mean;
      stage["row_delta_old"] = bal.old_mean ? nlohmann::json(*bal.old_mean) : nlohmann::json(nullptr);
    }
    stages.push_back(std::move(stage));
  }
  nlohmann::json j = {
      {"method", record.method},
      {"scenario",
       {{"class_order", record.scenario.class_order},
        {"base", record.scenario.base_size},
        {"increment", record.scenario.increment},
        {"num_tasks", record.scenario.num_tasks}}},
      {"stages", std::move(stages)},
      {"per_task_matrix", record.metrics.per_task},
      {"model", {{"layer_dims", record.layer_dims}, {"num_parameters", record.num_parameters}}},
      {"memory_vectors", record.memory_vectors},
      {"config", record.config},
  };
  if (record.metrics.num_stages() > 0) {
    j["final_accuracy"] = record.metrics.final_accuracy();
    j["average_accuracy"] = record.metrics.average();
  }
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  try {
    RunRecord r;
    r.method = j.at("method").get<std::string>();
    const auto& s = j.at("scenario");
    r.scenario.class_order = s.at("class_order").get<std::vector<ClassId>>();
    r.scenario.base_size = s.at("base").get<std::size_t>();
    r.scenario.increment = s.at("increment").get<std::size_t>();
    r.scenario.num_tasks = s.at("num_tasks").get<std::size_t>();
    const auto matrix = j.at("per_task_matrix").get<std::vector<std::vector<double>>>();
    const auto& stages = j.at("stages");
    if (matrix.size() != stages.size()) {
      throw FormatError("per_task_matrix and stages disagree on the number of stages");
    }
    for (std::size_t b = 0; b < stages.size(); ++b) {
      const auto& st = stages[b];
      r.metrics.add_stage(st.at("A_b").get<double>(), st.at("new_task_acc").get<double>(),
                          matrix[b]);
      r.seen_classes.push_back(st.at("seen_classes").get<std::size_t>());
      r.wall_ms.push_back(st.at("wall_ms").get<double>());
      if (st.contains("row_delta_new")) {
        RowDeltaBalance bal;
        bal.new_mean = st.at("row_delta_new").get<double>();
        if (!st.at("row_delta_old").is_null()) bal.old_mean = st.at("row_delta_old").get<double>();
        r.balance.push_back(bal);
      }
    }
    r.layer_dims = j.at("model").at("layer_dims").get<std::vector<std::size_t>>();
    r.num_parameters = j.at("model").at("num_parameters").get<std::size_t>();
    r.memory_vectors = j.at("memory_vectors").get<std::size_t>();
    r.config = j.at("config");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed run record: ") + e.what());
  }
}

}  // namespace wbr
