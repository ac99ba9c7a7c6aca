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

#ifndef DET_VOCABULARY_HPP_
#define DET_VOCABULARY_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace det {

using TypeId = int32_t;
using TokenId = int32_t;

// Lowercased, whitespace-split tokens.
std::vector<std::string> tokenize(std::string_view text);

// The closed set of type phrases. Ids are line order and never change once
// the vocabulary is built.
class TypeVocabulary {
 public:
  TypeVocabulary() = default;
  explicit TypeVocabulary(std::vector<std::string> phrases);

  static TypeVocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(phrases_.size()); }
  const std::string& phrase(TypeId id) const { return phrases_.at(id); }
  const std::vector<std::string>& phrase_tokens(TypeId id) const {
    return tokens_.at(id);
  }
  const std::vector<std::string>& phrases() const { return phrases_; }

  // Throws ErrorKind::kVocabulary naming the phrase when absent.
  TypeId id_of(std::string_view phrase) const;
  bool contains(std::string_view phrase) const;

  bool operator==(const TypeVocabulary& other) const {
    return phrases_ == other.phrases_;
  }

 private:
  std::vector<std::string> phrases_;
  std::vector<std::vector<std::string>> tokens_;
  std::unordered_map<std::string, TypeId> index_;
};

inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kMentionOpen = "[E0]";
inline constexpr std::string_view kMentionClose = "[/E0]";
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";

// Word-level token inventory for the encoders. The six special tokens always
// occupy ids 0..5 in the order [PAD] [UNK] [CLS] [SEP] [E0] [/E0].
class TokenVocabulary {
 public:
  TokenVocabulary();
  explicit TokenVocabulary(std::span<const std::string> words);

  static constexpr TokenId kPadId = 0;
  static constexpr TokenId kUnkId = 1;
  static constexpr TokenId kClsId = 2;
  static constexpr TokenId kSepId = 3;
  static constexpr TokenId kMentionOpenId = 4;
  static constexpr TokenId kMentionCloseId = 5;

  // Appends the word if new; returns its id.
  TokenId add(std::string_view word);
  // Unknown words map to [UNK].
  TokenId id_of(std::string_view word) const;
  const std::string& word(TokenId id) const { return words_.at(id); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const TokenVocabulary& other) const {
    return words_ == other.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace det

#endif  // DET_VOCABULARY_HPP_
