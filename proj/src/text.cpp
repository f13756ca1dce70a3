#include "mocoll/text.hpp"

#include <algorithm>
#include <cctype>

namespace mocoll {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string strip_punct(std::string_view tok) {
  size_t b = 0, e = tok.size();
  while (b < e && is_punct(tok[b])) ++b;
  while (e > b && is_punct(tok[e - 1])) --e;
  return std::string(tok.substr(b, e - b));
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    size_t start = i;
    while (i < n && !is_space(text[i])) ++i;
    if (i > start) {
      std::string tok = strip_punct(text.substr(start, i - start));
      if (!tok.empty()) tokens.push_back(to_lower(tok));
    }
  }
  return tokens;
}

std::string normalize_text(std::string_view text) { return join(tokenize(text), " "); }

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  std::string h = to_lower(haystack), n = to_lower(needle);
  return h.find(n) != std::string::npos;
}

// ---------------------------------------------------------------------------
// Porter stemmer. Straight transcription of the 1980 algorithm: steps 1a-5b,
// longest matching suffix per step, condition checked on the residual stem.
// ---------------------------------------------------------------------------

namespace {

struct Stemmer {
  std::string w;

  bool is_consonant(size_t i) const {
    char c = w[i];
    switch (c) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !is_consonant(i - 1);
      default:
        return true;
    }
  }

  // measure of w[0..len): number of VC sequences in [C](VC)^m[V]
  int measure(size_t len) const {
    size_t i = 0;
    int m = 0;
    while (i < len && is_consonant(i)) ++i;
    while (true) {
      while (i < len && !is_consonant(i)) ++i;
      if (i >= len) break;
      while (i < len && is_consonant(i)) ++i;
      ++m;
    }
    return m;
  }

  bool has_vowel(size_t len) const {
    for (size_t i = 0; i < len; ++i)
      if (!is_consonant(i)) return true;
    return false;
  }

  bool ends_double_consonant() const {
    size_t n = w.size();
    return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(n - 1);
  }

  // *o: stem ends cvc where the final consonant is not w, x or y
  bool ends_cvc(size_t len) const {
    if (len < 3) return false;
    if (!is_consonant(len - 3) || is_consonant(len - 2) || !is_consonant(len - 1)) return false;
    char c = w[len - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view suffix) const {
    return w.size() >= suffix.size() &&
           std::equal(suffix.rbegin(), suffix.rend(), w.rbegin());
  }

  void set_suffix(size_t suffix_len, std::string_view repl) {
    w.resize(w.size() - suffix_len);
    w += repl;
  }

  void step1a() {
    if (ends("sses")) set_suffix(4, "ss");
    else if (ends("ies")) set_suffix(3, "i");
    else if (ends("ss")) { /* unchanged */ }
    else if (ends("s")) set_suffix(1, "");
  }

  void step1b() {
    if (ends("eed")) {
      if (measure(w.size() - 3) > 0) set_suffix(3, "ee");
      return;
    }
    bool stripped = false;
    if (ends("ed") && has_vowel(w.size() - 2)) {
      set_suffix(2, "");
      stripped = true;
    } else if (ends("ing") && has_vowel(w.size() - 3)) {
      set_suffix(3, "");
      stripped = true;
    }
    if (!stripped) return;
    if (ends("at") || ends("bl") || ends("iz")) {
      w += 'e';
    } else if (ends_double_consonant()) {
      char c = w.back();
      if (c != 'l' && c != 's' && c != 'z') w.pop_back();
    } else if (measure(w.size()) == 1 && ends_cvc(w.size())) {
      w += 'e';
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(w.size() - 1)) w.back() = 'i';
  }

  struct Rule {
    std::string_view from, to;
  };

  // Apply the longest matching rule whose residual-stem measure is > min_m.
  // Per the algorithm, once a suffix matches the step ends even if the
  // measure condition fails.
  void apply_table(const Rule* rules, size_t n_rules, int min_m) {
    const Rule* best = nullptr;
    for (size_t i = 0; i < n_rules; ++i) {
      if (ends(rules[i].from) && (!best || rules[i].from.size() > best->from.size()))
        best = &rules[i];
    }
    if (!best) return;
    size_t stem_len = w.size() - best->from.size();
    if (measure(stem_len) > min_m) set_suffix(best->from.size(), best->to);
  }

  void step2() {
    static const Rule rules[] = {
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
    };
    apply_table(rules, std::size(rules), 0);
  }

  void step3() {
    static const Rule rules[] = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    };
    apply_table(rules, std::size(rules), 0);
  }

  void step4() {
    static const Rule rules[] = {
        {"al", ""},    {"ance", ""}, {"ence", ""}, {"er", ""},  {"ic", ""},
        {"able", ""},  {"ible", ""}, {"ant", ""},  {"ement", ""}, {"ment", ""},
        {"ent", ""},   {"ion", ""},  {"ou", ""},   {"ism", ""}, {"ate", ""},
        {"iti", ""},   {"ous", ""},  {"ive", ""},  {"ize", ""},
    };
    const Rule* best = nullptr;
    for (const Rule& r : rules) {
      if (ends(r.from) && (!best || r.from.size() > best->from.size())) best = &r;
    }
    if (!best) return;
    size_t stem_len = w.size() - best->from.size();
    if (measure(stem_len) <= 1) return;
    if (best->from == "ion" && stem_len > 0) {
      char c = w[stem_len - 1];
      if (c != 's' && c != 't') return;
    }
    set_suffix(best->from.size(), best->to);
  }

  void step5a() {
    if (!ends("e")) return;
    int m = measure(w.size() - 1);
    if (m > 1 || (m == 1 && !ends_cvc(w.size() - 1))) w.pop_back();
  }

  void step5b() {
    if (w.size() >= 2 && w.back() == 'l' && ends_double_consonant() &&
        measure(w.size()) > 1)
      w.pop_back();
  }
};

}  // namespace

std::string porter_stem(std::string_view word) {
  if (word.size() <= 2) return std::string(word);
  Stemmer s{std::string(word)};
  s.step1a();
  s.step1b();
  s.step1c();
  s.step2();
  s.step3();
  s.step4();
  s.step5a();
  s.step5b();
  return s.w;
}

}  // namespace mocoll
