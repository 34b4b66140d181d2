#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace discourse::lexical {

enum class ProfileKind { words, adjectives };

const char* profile_kind_name(ProfileKind kind) noexcept;

// Ranked term frequencies for one story group (a skin tone or a cluster).
struct LexicalProfile {
  std::string group_key;
  std::vector<std::pair<std::string, long long>> counts;  // sorted: count desc, term asc
  long long total_tokens = 0;                             // raw token count before filtering
  ProfileKind kind = ProfileKind::words;
};

struct Lexicons {
  std::set<std::string> stopwords;
  std::set<std::string> adjectives;
};

// Lowercased word tokens. Splits on anything that is not a letter, a
// combining mark, or an intra-word hyphen/apostrophe; diacritics preserved.
std::vector<std::string> tokenize(std::string_view text);

// One lowercase term per line, UTF-8, '#' starts a comment.
std::set<std::string> load_lexicon_file(const std::filesystem::path& path);
Lexicons load_lexicons(const std::filesystem::path& stopwords_path,
                       const std::filesystem::path& adjectives_path);

LexicalProfile frequency_profile(const std::vector<std::string>& texts, const Lexicons& lex,
                                 ProfileKind kind, const std::string& group_key);

// Log-odds-ratio of add-one smoothed term probabilities over the union
// vocabulary; positive = distinctive of `a`. Keeps top_n per direction,
// final list sorted score desc (ties term asc).
std::vector<std::pair<std::string, double>> contrast_terms(const LexicalProfile& a,
                                                           const LexicalProfile& b, size_t top_n);

}  // namespace discourse::lexical
