#include "discourse/lexical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>

#include "discourse/errors.hpp"

namespace discourse::lexical {

namespace {

// Decodes one UTF-8 codepoint starting at i; advances i. Malformed bytes
// decode as U+FFFD and consume one byte, so they act as separators.
uint32_t decode_utf8(std::string_view s, size_t& i) {
  const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  auto cont = [&](size_t k) { return k < s.size() && (byte(k) & 0xC0) == 0x80; };
  if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
    uint32_t cp = (uint32_t(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    i += 2;
    return cp >= 0x80 ? cp : 0xFFFD;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
    uint32_t cp = (uint32_t(b0 & 0x0F) << 12) | (uint32_t(byte(i + 1) & 0x3F) << 6) |
                  (byte(i + 2) & 0x3F);
    i += 3;
    return cp >= 0x800 ? cp : 0xFFFD;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    uint32_t cp = (uint32_t(b0 & 0x07) << 18) | (uint32_t(byte(i + 1) & 0x3F) << 12) |
                  (uint32_t(byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
    i += 4;
    return cp >= 0x10000 && cp <= 0x10FFFF ? cp : 0xFFFD;
  }
  i += 1;
  return 0xFFFD;
}

void encode_utf8(uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_combining_mark(uint32_t cp) {
  return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x1AB0 && cp <= 0x1AFF) ||
         (cp >= 0x20D0 && cp <= 0x20FF);
}

// Letter ranges this corpus can plausibly contain (Latin incl. extensions,
// Greek, Cyrillic); everything outside is a separator.
bool is_letter(uint32_t cp) {
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  if (cp >= 0xC0 && cp <= 0xFF) return cp != 0xD7 && cp != 0xF7;  // Latin-1, minus × ÷
  if (cp >= 0x100 && cp <= 0x24F) return true;                    // Latin Extended-A/B
  if (cp >= 0x370 && cp <= 0x3FF) return cp != 0x374 && cp != 0x375 && cp != 0x37E && cp != 0x384 &&
                                         cp != 0x385 && cp != 0x387;  // Greek
  if (cp >= 0x400 && cp <= 0x4FF) return true;                        // Cyrillic
  if (cp >= 0x1E00 && cp <= 0x1FFF) return true;  // Latin Extended Additional, Greek Extended
  return false;
}

uint32_t to_lower(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1 uppercase
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;  // Ÿ → ÿ
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;                 // Cyrillic А-Я
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;                 // Ѐ-Џ
  return cp;
}

bool is_joiner(uint32_t cp) {
  return cp == '-' || cp == 0x2010 || cp == '\'' || cp == 0x2019;
}

}  // namespace

const char* profile_kind_name(ProfileKind kind) noexcept {
  return kind == ProfileKind::words ? "words" : "adjectives";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  size_t i = 0;
  // Joiners are buffered and only committed when a letter follows, which
  // keeps "guarda-chuva" whole but drops leading/trailing punctuation.
  std::string pending_joiner;
  while (i < text.size()) {
    uint32_t cp = decode_utf8(text, i);
    if (is_letter(cp) || is_combining_mark(cp)) {
      if (!pending_joiner.empty()) {
        current += pending_joiner;
        pending_joiner.clear();
      }
      encode_utf8(is_combining_mark(cp) ? cp : to_lower(cp), current);
    } else if (is_joiner(cp) && !current.empty() && pending_joiner.empty()) {
      encode_utf8(cp, pending_joiner);
    } else {
      pending_joiner.clear();
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::set<std::string> load_lexicon_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::MissingLexicon, "cannot open lexicon file: " + path.string());
  std::set<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    terms.insert(line.substr(start));
  }
  return terms;
}

Lexicons load_lexicons(const std::filesystem::path& stopwords_path,
                       const std::filesystem::path& adjectives_path) {
  return Lexicons{load_lexicon_file(stopwords_path), load_lexicon_file(adjectives_path)};
}

LexicalProfile frequency_profile(const std::vector<std::string>& texts, const Lexicons& lex,
                                 ProfileKind kind, const std::string& group_key) {
  if (kind == ProfileKind::words && lex.stopwords.empty())
    raise(Errc::MissingLexicon, "stopword list is empty; load it before profiling words");
  if (kind == ProfileKind::adjectives && lex.adjectives.empty())
    raise(Errc::MissingLexicon, "adjective lexicon is empty; load it before profiling adjectives");

  LexicalProfile profile;
  profile.group_key = group_key;
  profile.kind = kind;

  std::map<std::string, long long> counts;
  for (const auto& text : texts) {
    for (auto& token : tokenize(text)) {
      ++profile.total_tokens;
      if (kind == ProfileKind::words) {
        if (!lex.stopwords.count(token)) ++counts[token];
      } else {
        if (lex.adjectives.count(token)) ++counts[token];
      }
    }
  }

  profile.counts.assign(counts.begin(), counts.end());
  std::sort(profile.counts.begin(), profile.counts.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return profile;
}

std::vector<std::pair<std::string, double>> contrast_terms(const LexicalProfile& a,
                                                           const LexicalProfile& b, size_t top_n) {
  if (a.kind != b.kind)
    raise(Errc::KindMismatch, "cannot contrast a words profile against an adjectives profile");

  std::map<std::string, std::pair<long long, long long>> vocab;
  long long total_a = 0;
  long long total_b = 0;
  for (const auto& [term, c] : a.counts) {
    vocab[term].first = c;
    total_a += c;
  }
  for (const auto& [term, c] : b.counts) {
    vocab[term].second = c;
    total_b += c;
  }

  const double v = static_cast<double>(vocab.size());
  auto logit = [](double count, double total, double vocab_size) {
    double p = (count + 1.0) / (total + vocab_size);
    return std::log(p / (1.0 - p));
  };

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(vocab.size());
  for (const auto& [term, c] : vocab) {
    double score = logit(static_cast<double>(c.first), static_cast<double>(total_a), v) -
                   logit(static_cast<double>(c.second), static_cast<double>(total_b), v);
    scored.emplace_back(term, score);
  }

  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });

  std::vector<std::pair<std::string, double>> out;
  size_t pos_kept = 0;
  for (const auto& entry : scored) {
    if (entry.second <= 0.0 || pos_kept >= top_n) break;
    out.push_back(entry);
    ++pos_kept;
  }
  std::vector<std::pair<std::string, double>> neg;
  for (auto it = scored.rbegin(); it != scored.rend() && neg.size() < top_n; ++it) {
    if (it->second >= 0.0) break;
    neg.push_back(*it);
  }
  // Most-negative last, so the whole list stays sorted by score descending.
  std::sort(neg.begin(), neg.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  out.insert(out.end(), neg.begin(), neg.end());
  return out;
}

}  // namespace discourse::lexical
