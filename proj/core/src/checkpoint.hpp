/*
 * Copyright 2026 The inversedmix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Internal: JSON (de)serialisation of parameter sets for checkpoints.

#include "invmix/autograd.hpp"
#include "invmix/errors.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace invmix::detail {

inline nlohmann::json params_to_json(std::span<ag::Parameter* const> params) {
  nlohmann::json out = nlohmann::json::object();
  for (const ag::Parameter* p : params) {
    std::vector<double> data(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index r = 0, i = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c, ++i) data[static_cast<std::size_t>(i)] = p->value(r, c);
    out[p->name] = {{"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", std::move(data)}};
  }
  return out;
}

inline void params_from_json(const nlohmann::json& j, std::span<ag::Parameter* const> params) {
  for (ag::Parameter* p : params) {
    if (!j.contains(p->name)) throw ParseError("checkpoint is missing parameter '" + p->name + "'", 0);
    const auto& e = j.at(p->name);
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw ShapeError("checkpoint parameter '" + p->name + "' has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
    const auto data = e.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("truncated parameter '" + p->name + "'", 0);
    for (Eigen::Index r = 0, i = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c, ++i) p->value(r, c) = data[static_cast<std::size_t>(i)];
    p->zero_grad();
  }
}

inline void require_format(const nlohmann::json& j, const std::string& format, int version) {
  if (!j.contains("format") || j["format"] != format) throw ParseError("not a " + format + " checkpoint", 0);
  if (j.value("version", -1) != version) {
    throw ParseError(format + " checkpoint version " + std::to_string(j.value("version", -1)) + " unsupported", 0);
  }
}

}  // namespace invmix::detail
