#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace navstack {

enum class SizeCategory { kSmall, kMedium, kLarge };

std::string_view to_string(SizeCategory c);

/// Canonical class -> synonyms. Every class lists itself first; no synonym
/// belongs to two classes.
class SynonymTable {
 public:
  /// Adds `synonym` to `canonical`. Returns false (and leaves the table
  /// unchanged) when the synonym already belongs to another class.
  bool add(const std::string& canonical, const std::string& synonym);

  const std::vector<std::string>& synonyms(const std::string& canonical) const;
  std::optional<std::string> owner(const std::string& synonym) const;
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
  std::unordered_map<std::string, std::string> owner_;
};

/// The ordered class set C the detector can recognize, plus synonym lookup.
class ClassLexicon {
 public:
  /// 80 everyday-object classes with the shipped synonym table.
  static const ClassLexicon& standard();

  ClassLexicon(std::vector<std::string> classes, std::vector<SizeCategory> sizes,
               SynonymTable synonyms);

  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  bool contains(const std::string& cls) const { return index_.count(cls) > 0; }
  std::size_t index_of(const std::string& cls) const;
  SizeCategory size_category(const std::string& cls) const;
  const SynonymTable& synonyms() const { return synonyms_; }

  /// Maps a surface phrase (class name or synonym) to its canonical class.
  std::optional<std::string> resolve(const std::string& phrase) const;

  /// Longest surface phrase, in words.
  std::size_t max_phrase_words() const { return max_phrase_words_; }

 private:
  std::vector<std::string> classes_;
  std::vector<SizeCategory> sizes_;
  SynonymTable synonyms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t max_phrase_words_ = 1;
};

/// The static synonym table shipped with the lexicon (>= 3 synonyms per class).
SynonymTable static_synonym_table();

/// Lowercases and splits on whitespace, dropping trailing , . ; ! ?
std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end);

}  // namespace navstack
