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
#include "invmix/prompts.hpp"

#include "invmix/errors.hpp"
#include "invmix/io.hpp"

#include <json.hpp>

namespace invmix {

namespace {

constexpr std::string_view kEmb = "{EMB}";
constexpr std::string_view kTarget = "{TARGET}";

std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

void check_inversion(const PromptTemplate& t) {
  if (count(t.text, kEmb) != 1) throw DomainError("template '" + t.name + "' must contain exactly one {EMB} slot");
  if (count(t.text, kTarget) > 1) throw DomainError("template '" + t.name + "' has more than one {TARGET} marker");
  if (count(t.text, kTarget) == 1 && t.text.find(kTarget) < t.text.find(kEmb)) {
    throw DomainError("template '" + t.name + "' puts {TARGET} before {EMB}");
  }
}

}  // namespace

bool PromptTemplate::has_embedding_slot() const { return text.find(kEmb) != std::string::npos; }

std::string PromptTemplate::prefix() const {
  const auto p = text.find(kEmb);
  if (p == std::string::npos) throw DomainError("template '" + name + "' has no {EMB} slot");
  return text.substr(0, p);
}

std::string PromptTemplate::suffix() const {
  const auto p = text.find(kEmb);
  if (p == std::string::npos) throw DomainError("template '" + name + "' has no {EMB} slot");
  const auto start = p + kEmb.size();
  const auto t = text.find(kTarget, start);
  return t == std::string::npos ? text.substr(start) : text.substr(start, t - start);
}

std::string PromptTemplate::closing() const {
  const auto t = text.find(kTarget);
  return t == std::string::npos ? std::string{} : text.substr(t + kTarget.size());
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& fields) const {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i);
      if (close != std::string::npos) {
        const std::string key = text.substr(i + 1, close - i - 1);
        const bool ident = !key.empty() && key.find_first_not_of(
                                               "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") ==
                                               std::string::npos;
        if (ident) {
          auto it = fields.find(key);
          if (it == fields.end()) throw DomainError("template '" + name + "' needs a value for {" + key + "}");
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

PromptCatalog PromptCatalog::defaults() {
  PromptCatalog c;
  c.add({kInversion, "Given the embedding {EMB}, generate the original sentence: {TARGET} ."});
  c.add({kLabeling,
         "Classify the following sentence into one of the labels below.\n"
         "Sentence: \"{text}\"\n"
         "\n"
         "Labels:\n"
         "{label_list}\n"
         "\n"
         "Respond with only the label name exactly as given above.\n"
         "Answer:"});
  c.add({kIntrusionValidity,
         "You are a text classification model.\n"
         "\n"
         "Determine if the sentence \"{text}\" can be labeled as \n"
         "\n"
         "\"{label_text}\".\n"
         "\n"
         "If it matches, output \"Yes\"; otherwise, output \"No\"."});
  c.add({kIntrusionChoice,
         "You are a text classification model.\n"
         "\n"
         "Choose one label for the sentence \"{text}\" in \"{label_map}\"."});
  return c;
}

void PromptCatalog::add(PromptTemplate t) {
  if (t.name.empty()) throw DomainError("template needs a name");
  if (t.has_embedding_slot() || t.name == kInversion) check_inversion(t);
  templates_.insert_or_assign(t.name, std::move(t));
}

bool PromptCatalog::contains(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const PromptTemplate& PromptCatalog::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw DomainError("prompt template '" + std::string(name) + "' is not registered");
  return it->second;
}

std::vector<std::string> PromptCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : templates_) out.push_back(k);
  return out;
}

PromptCatalog PromptCatalog::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError(path.string() + ": prompt catalog must be a JSON object", 0);
  PromptCatalog c = defaults();
  for (const auto& [name, text] : j.items()) {
    if (!text.is_string()) throw ParseError("template '" + name + "' must be a string", 0);
    c.add({name, text.get<std::string>()});
  }
  return c;
}

void PromptCatalog::save(const std::filesystem::path& path) const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, t] : templates_) j[name] = t.text;
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace invmix
