/*
 * Copyright 2026 The det Authors.
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

#include "det/vocabulary.hpp"

#include <cctype>
#include <fstream>

#include "det/error.hpp"

namespace det {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
      return "parse error";
    case ErrorKind::kVocabulary:
      return "vocabulary error";
    case ErrorKind::kIo:
      return "I/O error";
    case ErrorKind::kConfig:
      return "config error";
    case ErrorKind::kNumeric:
      return "numeric error";
    case ErrorKind::kShape:
      return "shape error";
    case ErrorKind::kState:
      return "state error";
  }
  return "error";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

TypeVocabulary::TypeVocabulary(std::vector<std::string> phrases)
    : phrases_(std::move(phrases)) {
  tokens_.reserve(phrases_.size());
  for (size_t i = 0; i < phrases_.size(); ++i) {
    auto toks = tokenize(phrases_[i]);
    if (toks.empty()) {
      fail(ErrorKind::kVocabulary,
           "type phrase " + std::to_string(i) + " is empty");
    }
    if (!index_.emplace(phrases_[i], static_cast<TypeId>(i)).second) {
      fail(ErrorKind::kVocabulary, "duplicate type phrase '" + phrases_[i] + "'");
    }
    tokens_.push_back(std::move(toks));
  }
}

TypeVocabulary TypeVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open vocabulary file " + path.string());
  std::vector<std::string> phrases;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    phrases.push_back(line);
  }
  // A trailing empty line is the file terminator, not a phrase.
  while (!phrases.empty() && phrases.back().empty()) phrases.pop_back();
  if (phrases.empty()) {
    fail(ErrorKind::kVocabulary, "vocabulary file " + path.string() + " is empty");
  }
  return TypeVocabulary(std::move(phrases));
}

void TypeVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write vocabulary file " + path.string());
  for (const auto& p : phrases_) out << p << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

TypeId TypeVocabulary::id_of(std::string_view phrase) const {
  auto it = index_.find(std::string(phrase));
  if (it == index_.end()) {
    fail(ErrorKind::kVocabulary,
         "type phrase '" + std::string(phrase) + "' is not in the vocabulary");
  }
  return it->second;
}

bool TypeVocabulary::contains(std::string_view phrase) const {
  return index_.count(std::string(phrase)) > 0;
}

TokenVocabulary::TokenVocabulary() {
  for (auto w : {kPad, kUnk, kCls, kSep, kMentionOpen, kMentionClose}) add(w);
}

TokenVocabulary::TokenVocabulary(std::span<const std::string> words) {
  for (const auto& w : words) {
    if (!index_.emplace(w, static_cast<TokenId>(words_.size())).second) {
      fail(ErrorKind::kVocabulary, "duplicate token '" + w + "'");
    }
    words_.push_back(w);
  }
  const std::string_view expected[] = {kPad, kUnk, kCls, kSep, kMentionOpen,
                                       kMentionClose};
  for (size_t i = 0; i < std::size(expected); ++i) {
    if (words_.size() <= i || words_[i] != expected[i]) {
      fail(ErrorKind::kVocabulary,
           "token inventory must start with the special tokens");
    }
  }
}

TokenId TokenVocabulary::add(std::string_view word) {
  std::string key(word);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(words_.size());
  index_.emplace(key, id);
  words_.push_back(std::move(key));
  return id;
}

TokenId TokenVocabulary::id_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkId : it->second;
}

}  // namespace det
