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

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace invmix {

/// Literal template text. Inversion templates carry exactly one `{EMB}` slot
/// and optionally a `{TARGET}` marker for the sentence to reconstruct; text
/// prompts use named `{field}` placeholders.
struct PromptTemplate {
  std::string name;
  std::string text;

  bool has_embedding_slot() const;
  /// Text before `{EMB}`.
  std::string prefix() const;
  /// Text between `{EMB}` and `{TARGET}` (or the end).
  std::string suffix() const;
  /// Text after `{TARGET}`; empty when there is no target marker.
  std::string closing() const;
  /// Replaces every `{key}` with its value; throws DomainError when a
  /// placeholder in the template has no value.
  std::string render(const std::map<std::string, std::string>& fields) const;
};

/// Named templates stored verbatim.
class PromptCatalog {
 public:
  static constexpr const char* kInversion = "inversion";
  static constexpr const char* kLabeling = "labeling";
  static constexpr const char* kIntrusionValidity = "intrusion_validity";
  static constexpr const char* kIntrusionChoice = "intrusion_choice";

  /// The built-in catalog.
  static PromptCatalog defaults();
  /// JSON object of {name: template}; entries override the built-ins.
  static PromptCatalog load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void add(PromptTemplate t);
  bool contains(std::string_view name) const;
  const PromptTemplate& get(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace invmix
