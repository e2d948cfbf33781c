#include "casebench/textprep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>

#include "casebench/errors.hpp"
#include "casebench/stopwords_data.hpp"

namespace casebench {

namespace {

void validate_utf8(std::string_view text) {
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      throw DecodeError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > n) throw DecodeError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) throw DecodeError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw DecodeError("invalid UTF-8 code point at offset " + std::to_string(i));
    }
    i += len;
  }
}

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

const std::unordered_map<std::string, std::string>& stem_exceptions() {
  static const std::unordered_map<std::string, std::string> table = {
      {"children", "child"}, {"men", "man"},       {"women", "woman"},   {"people", "person"},
      {"feet", "foot"},      {"teeth", "tooth"},   {"mice", "mouse"},    {"geese", "goose"},
      {"ran", "run"},        {"went", "go"},       {"gone", "go"},       {"said", "say"},
      {"made", "make"},      {"saw", "see"},       {"seen", "see"},      {"gave", "give"},
      {"given", "give"},     {"took", "take"},     {"taken", "take"},    {"came", "come"},
      {"spoke", "speak"},    {"spoken", "speak"},  {"knew", "know"},     {"known", "know"},
      {"thought", "think"},  {"told", "tell"},     {"felt", "feel"},     {"became", "become"},
      {"began", "begin"},    {"begun", "begin"},   {"wrote", "write"},   {"written", "write"},
      {"ate", "eat"},        {"eaten", "eat"},     {"got", "get"},       {"gotten", "get"},
      {"found", "find"},     {"left", "leave"},    {"kept", "keep"},     {"brought", "bring"},
      {"bought", "buy"},     {"taught", "teach"},  {"sat", "sit"},       {"stood", "stand"},
      {"understood", "understand"},                {"heard", "hear"},    {"held", "hold"},
      {"met", "meet"},       {"paid", "pay"},      {"sent", "send"},     {"spent", "spend"},
      {"built", "build"},    {"lost", "lose"},     {"fell", "fall"},     {"led", "lead"},
      {"worse", "bad"},      {"worst", "bad"},     {"better", "good"},   {"best", "good"},
  };
  return table;
}

bool has_vowel(std::string_view s) {
  return s.find_first_of("aeiouy") != std::string_view::npos;
}

bool is_consonant(char c) {
  return c >= 'a' && c <= 'z' && std::string_view("aeiou").find(c) == std::string_view::npos;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string undouble(std::string s) {
  const auto n = s.size();
  if (n >= 2 && s[n - 1] == s[n - 2] && is_consonant(s[n - 1]) && s[n - 1] != 'l' && s[n - 1] != 's' &&
      s[n - 1] != 'z') {
    s.pop_back();
  }
  return s;
}

// One pass of the rule list; returns the input when no rule fires.
std::string stem_once(const std::string& w) {
  if (auto it = stem_exceptions().find(w); it != stem_exceptions().end()) return it->second;
  if (ends_with(w, "ies") && w.size() >= 5) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
  if (ends_with(w, "eed")) return w;
  for (std::string_view suffix : {std::string_view("ing"), std::string_view("ed")}) {
    if (ends_with(w, suffix)) {
      const std::string base = w.substr(0, w.size() - suffix.size());
      if (base.size() >= 3 && has_vowel(base)) return undouble(base);
      return w;
    }
  }
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is") && w.size() >= 4) {
    return w.substr(0, w.size() - 1);
  }
  return w;
}

void split_lowercase(std::string_view text, TokenList& out) {
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (c == '\'') {
      continue;
    } else {
      flush();
    }
  }
  flush();
}

}  // namespace

const StopwordSet& default_stopwords() {
  static const StopwordSet words = [] {
    StopwordSet out;
    std::istringstream in(detail::kStopwordData);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) out.insert(line);
    }
    return out;
  }();
  return words;
}

std::string stem(std::string_view word) {
  std::string w(word);
  if (std::any_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; })) return w;
  for (;;) {
    std::string next = stem_once(w);
    if (next == w) return w;
    w = std::move(next);
  }
}

TokenList split_words(std::string_view text) {
  validate_utf8(text);
  TokenList words;
  split_lowercase(text, words);
  return words;
}

TokenList preprocess(std::string_view text, const StopwordSet& stopwords) {
  TokenList out;
  for (auto& word : split_words(text)) {
    if (stopwords.contains(word)) continue;
    std::string stemmed = stem(word);
    if (stopwords.contains(stemmed)) continue;
    out.push_back(std::move(stemmed));
  }
  return out;
}

namespace {

// Calls emit(term) for every n-gram occurrence, unigrams first; `scratch`
// holds bigram keys.
template <typename Emit>
void for_each_ngram(const TokenList& tokens, int n_max, std::string& scratch, Emit emit) {
  for (const auto& t : tokens) emit(t);
  if (n_max < 2) return;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    scratch.assign(tokens[i - 1]);
    scratch.push_back(' ');
    scratch.append(tokens[i]);
    emit(scratch);
  }
}

void check_order(int n_max, const char* where) {
  if (n_max != 1 && n_max != 2) throw std::invalid_argument(std::string(where) + ": n_max must be 1 or 2");
}

// Token strings interned to dense ids; a bigram is keyed by its id pair.
class NgramInterner {
 public:
  std::uint32_t id(const std::string& token) {
    auto [it, inserted] = ids_.try_emplace(token, static_cast<std::uint32_t>(tokens_.size()));
    if (inserted) tokens_.push_back(&it->first);
    return it->second;
  }

  // Unigram keys are the token id; bigram keys are offset past all of them.
  static std::uint64_t unigram_key(std::uint32_t a) { return a; }
  static std::uint64_t bigram_key(std::uint32_t a, std::uint32_t b) {
    return (std::uint64_t{1} << 63) | (std::uint64_t{a} << 31) | b;
  }

  std::string term(std::uint64_t key) const {
    if (!(key >> 63)) return *tokens_[key];
    const auto a = static_cast<std::uint32_t>((key >> 31) & 0xffffffffULL);
    const auto b = static_cast<std::uint32_t>(key & 0x7fffffffULL);
    return *tokens_[a] + " " + *tokens_[b];
  }

  // Calls emit(key) for every n-gram occurrence, unigrams first.
  template <typename Emit>
  void scan(const TokenList& tokens, int n_max, std::vector<std::uint32_t>& ids, Emit emit) {
    ids.clear();
    for (const auto& t : tokens) {
      ids.push_back(id(t));
      emit(unigram_key(ids.back()));
    }
    if (n_max < 2) return;
    for (std::size_t i = 1; i < ids.size(); ++i) emit(bigram_key(ids[i - 1], ids[i]));
  }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<const std::string*> tokens_;
};

}  // namespace

std::map<std::string, int> extract_ngrams(const TokenList& tokens, int n_max) {
  check_order(n_max, "extract_ngrams");
  std::map<std::string, int> counts;
  std::string scratch;
  for_each_ngram(tokens, n_max, scratch, [&](const std::string& term) { ++counts[term]; });
  return counts;
}

std::optional<Index> Vocabulary::find(const std::string& term) const {
  if (auto it = index_.find(term); it != index_.end()) return it->second;
  return std::nullopt;
}

void Vocabulary::rebuild_index() {
  index_.clear();
  index_.reserve(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) index_.emplace(terms[i], static_cast<Index>(i));
}

std::vector<TokenList> tokenize_corpus(const Corpus& corpus, const StopwordSet& stopwords) {
  std::vector<TokenList> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus) out.push_back(preprocess(doc.text, stopwords));
  return out;
}

Vocabulary build_vocabulary(const std::vector<TokenList>& documents, int n_max, std::size_t min_df) {
  if (documents.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
  check_order(n_max, "build_vocabulary");
  struct Seen {
    std::size_t df = 0;
    std::size_t last_doc = 0;
  };
  NgramInterner interner;
  std::unordered_map<std::uint64_t, Seen> seen;
  std::vector<std::uint32_t> ids;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    interner.scan(documents[d], n_max, ids, [&](std::uint64_t key) {
      auto& entry = seen[key];
      if (entry.df == 0 || entry.last_doc != d) {
        ++entry.df;
        entry.last_doc = d;
      }
    });
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [key, entry] : seen)
    if (entry.df >= std::max<std::size_t>(min_df, 1)) kept.emplace_back(interner.term(key), entry.df);
  std::sort(kept.begin(), kept.end());
  Vocabulary vocab;
  vocab.n_max = n_max;
  vocab.terms.reserve(kept.size());
  vocab.doc_frequency.reserve(kept.size());
  for (auto& [term, df] : kept) {
    vocab.terms.push_back(std::move(term));
    vocab.doc_frequency.push_back(df);
  }
  vocab.rebuild_index();
  return vocab;
}

Vocabulary build_vocabulary(const Corpus& corpus, int n_max, std::size_t min_df, const StopwordSet& stopwords) {
  return build_vocabulary(tokenize_corpus(corpus, stopwords), n_max, min_df);
}

std::string to_string(Weighting w) {
  switch (w) {
    case Weighting::count:
      return "count";
    case Weighting::binary:
      return "binary";
    case Weighting::tfidf:
      return "tfidf";
  }
  return "count";
}

Weighting parse_weighting(const std::string& name) {
  if (name == "count") return Weighting::count;
  if (name == "binary") return Weighting::binary;
  if (name == "tfidf") return Weighting::tfidf;
  throw std::invalid_argument("unknown weighting '" + name + "'");
}

DocTermMatrix build_matrix(const std::vector<TokenList>& documents, const Vocabulary& vocab) {
  // Each distinct n-gram is resolved against the vocabulary once; -1 marks
  // out-of-vocabulary terms.
  NgramInterner interner;
  std::unordered_map<std::uint64_t, Index> column;
  std::vector<std::uint32_t> ids;
  std::vector<Index> cols;
  std::vector<std::vector<std::pair<Index, double>>> rows(documents.size());
  std::size_t nnz = 0;
  for (std::size_t row = 0; row < documents.size(); ++row) {
    cols.clear();
    interner.scan(documents[row], vocab.n_max, ids, [&](std::uint64_t key) {
      auto [it, inserted] = column.try_emplace(key, -1);
      if (inserted) it->second = vocab.find(interner.term(key)).value_or(-1);
      if (it->second >= 0) cols.push_back(it->second);
    });
    std::sort(cols.begin(), cols.end());
    auto& entries = rows[row];
    for (std::size_t k = 0; k < cols.size();) {
      std::size_t next = k;
      while (next < cols.size() && cols[next] == cols[k]) ++next;
      entries.emplace_back(cols[k], static_cast<double>(next - k));
      k = next;
    }
    nnz += entries.size();
  }
  DocTermMatrix out;
  out.values.resize(static_cast<Index>(documents.size()), static_cast<Index>(vocab.size()));
  out.values.reserve(static_cast<Index>(nnz));
  for (std::size_t row = 0; row < rows.size(); ++row) {
    out.values.startVec(static_cast<Index>(row));
    for (const auto& [col, count] : rows[row]) out.values.insertBack(static_cast<Index>(row), col) = count;
  }
  out.values.finalize();
  out.weighting = Weighting::count;
  return out;
}

DocTermMatrix build_matrix(const Corpus& corpus, const Vocabulary& vocab, const StopwordSet& stopwords) {
  return build_matrix(tokenize_corpus(corpus, stopwords), vocab);
}

SpMat binarize(const SpMat& m) {
  SpMat out = m;
  for (Index k = 0; k < out.nonZeros(); ++k) out.valuePtr()[k] = 1.0;
  return out;
}

DocTermMatrix binarize(const DocTermMatrix& m) {
  if (m.weighting == Weighting::tfidf) throw std::invalid_argument("binarize: expects count or binary weighting");
  return {binarize(m.values), Weighting::binary};
}

Eigen::VectorXd fit_idf(const SpMat& counts) {
  Eigen::VectorXd df = Eigen::VectorXd::Zero(counts.cols());
  for (Index r = 0; r < counts.outerSize(); ++r)
    for (SpMat::InnerIterator it(counts, r); it; ++it) df[it.col()] += 1.0;
  const double n = static_cast<double>(counts.rows());
  Eigen::VectorXd idf(counts.cols());
  for (Index j = 0; j < idf.size(); ++j) idf[j] = std::log((1.0 + n) / (1.0 + df[j])) + 1.0;
  return idf;
}

SpMat apply_tfidf(const SpMat& counts, const Eigen::VectorXd& idf) {
  if (idf.size() != counts.cols()) throw std::invalid_argument("apply_tfidf: idf length mismatch");
  SpMat out = counts;
  for (Index r = 0; r < out.outerSize(); ++r) {
    double sq = 0;
    for (SpMat::InnerIterator it(out, r); it; ++it) {
      it.valueRef() *= idf[it.col()];
      sq += it.value() * it.value();
    }
    if (sq > 0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (SpMat::InnerIterator it(out, r); it; ++it) it.valueRef() *= inv;
    }
  }
  return out;
}

DocTermMatrix tfidf(const DocTermMatrix& m) {
  if (m.weighting != Weighting::count) throw std::invalid_argument("tfidf: expects count weighting");
  return {apply_tfidf(m.values, fit_idf(m.values)), Weighting::tfidf};
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

FiveNumberSummary five_number_summary(const std::vector<double>& values) {
  return {quantile(values, 0.0), quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75),
          quantile(values, 1.0)};
}

CorpusStats word_count_stats(const std::vector<TokenList>& documents) {
  if (documents.empty()) throw std::invalid_argument("word_count_stats: empty corpus");
  CorpusStats stats;
  std::vector<double> totals, uniques;
  for (const auto& tokens : documents) {
    const std::set<std::string> distinct(tokens.begin(), tokens.end());
    stats.total_words.push_back(tokens.size());
    stats.unique_words.push_back(distinct.size());
    totals.push_back(static_cast<double>(tokens.size()));
    uniques.push_back(static_cast<double>(distinct.size()));
  }
  stats.total = five_number_summary(totals);
  stats.unique = five_number_summary(uniques);
  return stats;
}

CorpusStats word_count_stats(const Corpus& corpus) {
  std::vector<TokenList> words;
  words.reserve(corpus.size());
  for (const auto& doc : corpus) words.push_back(split_words(doc.text));
  return word_count_stats(words);
}

}  // namespace casebench
