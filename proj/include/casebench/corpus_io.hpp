#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "casebench/textprep.hpp"

namespace casebench {

/// JSON Lines: {"id": string, "text": string, "label": 0|1|null} per line.
Corpus read_corpus_jsonl(std::istream& in);
void write_corpus_jsonl(std::ostream& out, const Corpus& corpus);

Corpus load_corpus(const std::string& path);
void save_corpus(const std::string& path, const Corpus& corpus);

/// Header "n_docs n_features nnz weighting", then "row col value" triplets
/// in row-major order. Values are written with enough digits to round-trip.
void write_dtm(std::ostream& out, const DocTermMatrix& m);
DocTermMatrix read_dtm(std::istream& in);

void save_dtm(const std::string& path, const DocTermMatrix& m);
DocTermMatrix load_dtm(const std::string& path);

/// Companion label file: one "row label" line per labeled row.
void write_labels(std::ostream& out, const std::vector<int>& labels);
/// Every row in [0, n_docs) must be labeled exactly once.
std::vector<int> read_labels(std::istream& in, Index n_docs);
std::vector<int> load_labels(const std::string& path, Index n_docs);

/// "index term df" per line.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
/// Inverse of write_vocabulary; the n-gram order is 2 if any term is a bigram.
Vocabulary read_vocabulary(std::istream& in);
Vocabulary load_vocabulary(const std::string& path);

StopwordSet read_stopwords(std::istream& in);
StopwordSet load_stopwords(const std::string& path);

/// Labels of a fully labeled corpus; throws DataError naming the first unlabeled id.
std::vector<int> corpus_labels(const Corpus& corpus);

}  // namespace casebench
