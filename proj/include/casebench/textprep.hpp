#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "casebench/linalg.hpp"

namespace casebench {

struct Document {
  std::string id;
  std::string text;
  std::optional<int> label;  // 1 = meets the case definition
};

using Corpus = std::vector<Document>;
using TokenList = std::vector<std::string>;
using StopwordSet = std::unordered_set<std::string>;

/// The stopword list shipped in data/stopwords.txt.
const StopwordSet& default_stopwords();

/// Reduces an inflected lowercase word to its base form.
///
/// Rules, applied repeatedly until the word stops changing:
///   * exceptions table of irregular forms (children -> child, ran -> run, ...)
///   * -ies -> -y, -sses -> -ss
///   * -ing and -ed are dropped when at least three letters containing a vowel
///     remain; a doubled final consonant other than l, s, z is then undoubled
///     (running -> run); words ending in -eed keep it
///   * a final -s is dropped unless the word ends in -ss, -us or -is, or fewer
///     than three letters would remain
/// Tokens containing digits are returned unchanged.
std::string stem(std::string_view word);

/// Lowercases, splits on anything that is not an ASCII letter or digit
/// (apostrophes are deleted rather than split on), drops stopwords before
/// and after stemming, and stems. Throws DecodeError on invalid UTF-8.
TokenList preprocess(std::string_view text, const StopwordSet& stopwords = default_stopwords());

/// Lowercased words only: no stopword removal, no stemming.
TokenList split_words(std::string_view text);

/// Unigram counts plus, for n_max = 2, counts of adjacent pairs keyed "w1 w2".
std::map<std::string, int> extract_ngrams(const TokenList& tokens, int n_max);

struct Vocabulary {
  std::vector<std::string> terms;         // column index -> term
  std::vector<std::size_t> doc_frequency; // column index -> documents containing the term
  int n_max = 1;

  std::size_t size() const { return terms.size(); }
  std::optional<Index> find(const std::string& term) const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, Index> index_;
};

std::vector<TokenList> tokenize_corpus(const Corpus& corpus,
                                       const StopwordSet& stopwords = default_stopwords());

/// Terms with document frequency >= min_df, indexed in lexicographic order.
Vocabulary build_vocabulary(const std::vector<TokenList>& documents, int n_max, std::size_t min_df = 1);
Vocabulary build_vocabulary(const Corpus& corpus, int n_max, std::size_t min_df = 1,
                            const StopwordSet& stopwords = default_stopwords());

enum class Weighting { count, binary, tfidf };

std::string to_string(Weighting w);
Weighting parse_weighting(const std::string& name);

struct DocTermMatrix {
  SpMat values;
  Weighting weighting = Weighting::count;

  Index n_docs() const { return values.rows(); }
  Index n_features() const { return values.cols(); }
  Index nnz() const { return values.nonZeros(); }
};

/// Count matrix over a fixed vocabulary; out-of-vocabulary terms are dropped.
DocTermMatrix build_matrix(const std::vector<TokenList>& documents, const Vocabulary& vocab);
DocTermMatrix build_matrix(const Corpus& corpus, const Vocabulary& vocab,
                           const StopwordSet& stopwords = default_stopwords());

SpMat binarize(const SpMat& m);
DocTermMatrix binarize(const DocTermMatrix& m);

/// idf(j) = ln((1 + n_docs) / (1 + df_j)) + 1, with df counted on the fitting rows.
Eigen::VectorXd fit_idf(const SpMat& counts);
/// count * idf, then each row scaled to unit Euclidean norm (zero rows stay zero).
SpMat apply_tfidf(const SpMat& counts, const Eigen::VectorXd& idf);
DocTermMatrix tfidf(const DocTermMatrix& m);

struct FiveNumberSummary {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Type-7 sample quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double p);
FiveNumberSummary five_number_summary(const std::vector<double>& values);

struct CorpusStats {
  std::vector<std::size_t> total_words;
  std::vector<std::size_t> unique_words;
  FiveNumberSummary total;
  FiveNumberSummary unique;
};

CorpusStats word_count_stats(const std::vector<TokenList>& documents);
/// Counts raw words (split_words), before stopword removal and stemming.
CorpusStats word_count_stats(const Corpus& corpus);

}  // namespace casebench
