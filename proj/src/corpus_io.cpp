#include "casebench/corpus_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "casebench/errors.hpp"

namespace casebench {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

}  // namespace

Corpus read_corpus_jsonl(std::istream& in) {
  Corpus corpus;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
        !j["text"].is_string()) {
      throw DataError("corpus line " + std::to_string(line_no) + ": expected string fields \"id\" and \"text\"");
    }
    Document doc;
    doc.id = j["id"].get<std::string>();
    doc.text = j["text"].get<std::string>();
    if (j.contains("label") && !j["label"].is_null()) {
      const auto& l = j["label"];
      if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1)) {
        throw DataError("corpus line " + std::to_string(line_no) + ": label must be 0, 1 or null");
      }
      doc.label = l.get<int>();
    }
    if (!seen.insert(doc.id).second) throw DataError("duplicate document id: " + doc.id);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus) {
    nlohmann::ordered_json j;
    j["id"] = doc.id;
    j["text"] = doc.text;
    j["label"] = doc.label ? nlohmann::ordered_json(*doc.label) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
}

Corpus load_corpus(const std::string& path) {
  auto in = open_in(path);
  return read_corpus_jsonl(in);
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  auto out = open_out(path);
  write_corpus_jsonl(out, corpus);
}

void write_dtm(std::ostream& out, const DocTermMatrix& m) {
  out << m.n_docs() << ' ' << m.n_features() << ' ' << m.nnz() << ' ' << to_string(m.weighting) << '\n';
  char buf[64];
  for (Index r = 0; r < m.values.outerSize(); ++r) {
    for (SpMat::InnerIterator it(m.values, r); it; ++it) {
      auto res = std::to_chars(buf, buf + sizeof(buf), it.value());
      out << r << ' ' << it.col() << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
    }
  }
}

DocTermMatrix read_dtm(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("DTM file: missing header");
  std::istringstream hs(header);
  long long n_docs = -1, n_features = -1, nnz = -1;
  std::string weighting;
  if (!(hs >> n_docs >> n_features >> nnz >> weighting) || n_docs < 0 || n_features < 0 || nnz < 0) {
    throw DataError("DTM file: header must be 'n_docs n_features nnz weighting'");
  }
  DocTermMatrix m;
  try {
    m.weighting = parse_weighting(weighting);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("DTM file: ") + e.what());
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  long long prev_row = -1, prev_col = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long r = 0, c = 0;
    double v = 0;
    if (!(ls >> r >> c >> v)) throw DataError("DTM file: malformed triplet '" + line + "'");
    if (r < 0 || r >= n_docs || c < 0 || c >= n_features) throw DataError("DTM file: index out of range in '" + line + "'");
    if (!(v > 0) || !std::isfinite(v)) throw DataError("DTM file: values must be positive and finite");
    if (r < prev_row || (r == prev_row && c <= prev_col)) {
      throw DataError("DTM file: triplets must be row-major sorted without duplicates");
    }
    if (m.weighting == Weighting::binary && v != 1.0) throw DataError("DTM file: binary weighting with value != 1");
    prev_row = r;
    prev_col = c;
    triplets.emplace_back(static_cast<Index>(r), static_cast<Index>(c), v);
  }
  if (static_cast<long long>(triplets.size()) != nnz) {
    throw DataError("DTM file: header declares " + std::to_string(nnz) + " entries, found " +
                    std::to_string(triplets.size()));
  }
  m.values.resize(static_cast<Index>(n_docs), static_cast<Index>(n_features));
  m.values.setFromTriplets(triplets.begin(), triplets.end());
  m.values.makeCompressed();
  return m;
}

void save_dtm(const std::string& path, const DocTermMatrix& m) {
  auto out = open_out(path);
  write_dtm(out, m);
}

DocTermMatrix load_dtm(const std::string& path) {
  auto in = open_in(path);
  return read_dtm(in);
}

void write_labels(std::ostream& out, const std::vector<int>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ' ' << labels[i] << '\n';
}

std::vector<int> read_labels(std::istream& in, Index n_docs) {
  std::vector<int> labels(static_cast<std::size_t>(n_docs), -1);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long r = 0;
    int label = 0;
    if (!(ls >> r >> label)) throw DataError("label file: malformed line '" + line + "'");
    if (r < 0 || r >= n_docs) throw DataError("label file: row out of range in '" + line + "'");
    if (label != 0 && label != 1) throw DataError("label file: label must be 0 or 1 in '" + line + "'");
    if (labels[static_cast<std::size_t>(r)] != -1) throw DataError("label file: duplicate row " + std::to_string(r));
    labels[static_cast<std::size_t>(r)] = label;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == -1) throw DataError("label file: row " + std::to_string(i) + " has no label");
  }
  return labels;
}

std::vector<int> load_labels(const std::string& path, Index n_docs) {
  auto in = open_in(path);
  return read_labels(in, n_docs);
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i) out << i << ' ' << vocab.terms[i] << ' ' << vocab.doc_frequency[i] << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto first = line.find(' '), last = line.rfind(' ');
    if (first == std::string::npos || first == last) throw DataError("vocabulary file: malformed line '" + line + "'");
    std::size_t index = 0, df = 0;
    try {
      index = std::stoull(line.substr(0, first));
      df = std::stoull(line.substr(last + 1));
    } catch (const std::exception&) {
      throw DataError("vocabulary file: malformed line '" + line + "'");
    }
    if (index != vocab.terms.size()) throw DataError("vocabulary file: indices must be 0, 1, 2, ...");
    std::string term = line.substr(first + 1, last - first - 1);
    if (term.find(' ') != std::string::npos) vocab.n_max = 2;
    vocab.terms.push_back(std::move(term));
    vocab.doc_frequency.push_back(df);
  }
  vocab.rebuild_index();
  for (std::size_t i = 0; i < vocab.terms.size(); ++i) {
    if (*vocab.find(vocab.terms[i]) != static_cast<Index>(i)) throw DataError("vocabulary file: duplicate term '" + vocab.terms[i] + "'");
  }
  return vocab;
}

Vocabulary load_vocabulary(const std::string& path) {
  auto in = open_in(path);
  return read_vocabulary(in);
}

StopwordSet read_stopwords(std::istream& in) {
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

StopwordSet load_stopwords(const std::string& path) {
  auto in = open_in(path);
  return read_stopwords(in);
}

std::vector<int> corpus_labels(const Corpus& corpus) {
  std::vector<int> labels;
  labels.reserve(corpus.size());
  for (const auto& doc : corpus) {
    if (!doc.label) throw DataError("document '" + doc.id + "' has no label");
    labels.push_back(*doc.label);
  }
  return labels;
}

}  // namespace casebench
