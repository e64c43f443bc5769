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
#include "invmix/tokenizer.hpp"

#include "invmix/errors.hpp"

#include <cctype>

namespace invmix {

namespace {

bool is_punct(char c) {
  switch (c) {
    case ',': case '.': case ':': case ';': case '?': case '!': case '(': case ')': case '"':
      return true;
    default:
      return false;
  }
}

bool attaches_left(const std::string& t) {
  return t == "," || t == "." || t == ":" || t == ";" || t == "?" || t == "!" || t == ")";
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool glue_next = false;
  for (const std::string& t : tokens) {
    if (!out.empty() && !attaches_left(t) && !glue_next) out.push_back(' ');
    out += t;
    glue_next = (t == "(");
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* s : {"<pad>", "<unk>", "<bos>", "<eos>", "<cls>"}) add(s);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  Vocabulary v;
  for (const std::string& t : texts)
    for (const std::string& tok : tokenize(t)) v.add(tok);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  if (tokens.size() < static_cast<std::size_t>(kNumSpecial)) {
    throw ParseError("vocabulary is missing its special tokens", 0);
  }
  for (int i = 0; i < kNumSpecial; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != v.tokens_[static_cast<std::size_t>(i)]) {
      throw ParseError("vocabulary special token mismatch at id " + std::to_string(i), 0);
    }
  }
  for (std::size_t i = kNumSpecial; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw ParseError("duplicate vocabulary token '" + tokens[i] + "'", 0);
    v.add(tokens[i]);
  }
  return v;
}

int Vocabulary::add(std::string_view token) {
  const std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const int id = size();
  tokens_.push_back(key);
  index_.emplace(key, id);
  return id;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DomainError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& t : tokenize(text)) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> toks;
  for (int i : ids) {
    if (i >= kNumSpecial) toks.push_back(token(i));
  }
  return detokenize(toks);
}

}  // namespace invmix
