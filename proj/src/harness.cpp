#include "casebench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "casebench/corpus_io.hpp"
#include "casebench/errors.hpp"
#include "casebench/forest.hpp"
#include "casebench/rng.hpp"

namespace casebench {

namespace {

std::string format_number(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

std::vector<int> pick(const std::vector<int>& labels, const std::vector<Index>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

double accuracy_of(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.empty()) throw DataError("validation set is empty");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw DataError(what + ": not a number: '" + text + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& what) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw DataError(what + ": not a nonnegative integer: '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw DataError(what + ": out of range: '" + text + "'");
  }
}

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw DataError(what + ": expected true or false, got '" + text + "'");
}

// CSV fields here never need quoting except free-text errors.
std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

}  // namespace

void validate_plan(const SplitPlan& plan) {
  const auto& f = plan.fractions;
  if (!(f.train > 0 && f.val >= 0 && f.test > 0)) throw std::invalid_argument("split fractions must be positive");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  if (plan.seeds.empty()) throw std::invalid_argument("split plan needs at least one seed");
  const std::set<std::uint64_t> unique(plan.seeds.begin(), plan.seeds.end());
  if (unique.size() != plan.seeds.size()) throw std::invalid_argument("split seeds must be distinct");
}

Split split_indices(const std::vector<int>& labels, std::uint64_t seed, const SplitFractions& fractions,
                    bool stratify) {
  if (labels.size() < 3) throw DataError("cannot split fewer than 3 documents");
  validate_plan({{seed}, fractions, stratify});
  Rng rng(seed);
  Split split;
  auto assign = [&](std::vector<Index> members) {
    rng.shuffle(members);
    const double n = static_cast<double>(members.size());
    const auto n_train = std::min(members.size(), static_cast<std::size_t>(std::lround(n * fractions.train)));
    const auto n_val = std::min(members.size() - n_train, static_cast<std::size_t>(std::lround(n * fractions.val)));
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.insert(split.val.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                     members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), members.end());
  };
  if (stratify) {
    std::map<int, std::vector<Index>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Index>(i));
    for (auto& [label, members] : by_class) assign(std::move(members));
  } else {
    std::vector<Index> all(labels.size());
    std::iota(all.begin(), all.end(), Index{0});
    assign(std::move(all));
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

const SpMat& ExperimentData::matrix(int order) const {
  const auto it = counts.find(order);
  if (it == counts.end()) throw std::invalid_argument("no document-term matrix for n-gram order " + std::to_string(order));
  return it->second;
}

ExperimentData prepare_data(const Corpus& corpus, const std::vector<int>& orders, const StopwordSet& stopwords) {
  ExperimentData data;
  data.labels = corpus_labels(corpus);
  const auto tokens = tokenize_corpus(corpus, stopwords);
  for (const int order : orders) {
    if (data.counts.count(order)) continue;
    data.counts[order] = build_matrix(tokens, build_vocabulary(tokens, order)).values;
  }
  return data;
}

std::vector<ModelSpec> default_models(std::uint64_t seed) {
  std::vector<ModelSpec> models;
  for (const auto& kind : model_kinds()) models.push_back({display_name(kind), {kind, {}, seed}});
  return models;
}

MetricMeans mean_metrics(const std::vector<CellResult>& cells) {
  MetricMeans m;
  auto mean_of = [&](auto field) -> std::optional<double> {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& c : cells) {
      if (const auto& v = c.metrics.*field) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  m.sens = mean_of(&MetricRow::sens);
  m.spec = mean_of(&MetricRow::spec);
  m.ppv = mean_of(&MetricRow::ppv);
  m.npv = mean_of(&MetricRow::npv);
  m.f1 = mean_of(&MetricRow::f1);
  m.acc = mean_of(&MetricRow::acc);
  if (cells.empty()) return m;
  for (const auto& c : cells) {
    m.fp += static_cast<double>(c.confusion.fp);
    m.fn += static_cast<double>(c.confusion.fn);
    m.n_pos += static_cast<double>(c.metrics.n_pos);
    m.diff_pos += static_cast<double>(c.metrics.diff_pos);
  }
  const double n = static_cast<double>(cells.size());
  m.fp /= n;
  m.fn /= n;
  m.n_pos /= n;
  m.diff_pos /= n;
  return m;
}

namespace {

void finish_model(ModelResult& model) {
  model.ok = true;
  model.error.clear();
  for (const auto& cell : model.cells) {
    if (!cell.ok) {
      model.ok = false;
      model.error = cell.error;
      break;
    }
  }
  model.means = model.ok ? mean_metrics(model.cells) : MetricMeans{};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentData& data, const std::vector<ModelSpec>& models,
                                const SplitPlan& plan, const RunOptions& options) {
  validate_plan(plan);
  std::set<std::string> names;
  for (const auto& m : models) {
    if (!names.insert(m.name).second) throw std::invalid_argument("duplicate model name '" + m.name + "'");
    make_classifier(m.config);  // rejects unknown kinds and parameters up front
  }

  std::vector<Split> splits;
  for (const auto seed : plan.seeds) splits.push_back(split_indices(data.labels, seed, plan.fractions, plan.stratify));

  ExperimentResult result;
  result.seeds = plan.seeds;
  for (const auto& m : models) {
    ModelResult r;
    r.name = m.name;
    r.kind = m.config.kind;
    r.cells.resize(plan.seeds.size());
    result.models.push_back(std::move(r));
  }

  const std::size_t n_seeds = plan.seeds.size();
  const std::size_t n_cells = models.size() * n_seeds;
  std::mutex log_mutex;
  auto run_cell = [&](std::size_t k) {
    const std::size_t mi = k / n_seeds, si = k % n_seeds;
    const auto& spec = models[mi];
    const Split& split = splits[si];
    CellResult& cell = result.models[mi].cells[si];
    cell.seed = plan.seeds[si];
    const auto start = std::chrono::steady_clock::now();
    try {
      ModelConfig config = spec.config;
      config.seed = derive_seed(spec.config.seed, plan.seeds[si]);
      auto model = make_classifier(config);
      const SpMat& x = data.matrix(model->ngrams());
      const auto y_train = pick(data.labels, split.train);
      const auto y_val = pick(data.labels, split.val);
      const auto y_test = pick(data.labels, split.test);
      model->fit(select_rows(x, split.train), y_train, select_rows(x, split.val), y_val);
      const auto predicted = model->predict(select_rows(x, split.test));
      cell.confusion = confusion(y_test, predicted);
      cell.metrics = metrics(cell.confusion);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      *options.log << spec.name << " split " << cell.seed << ": ";
      if (cell.ok) {
        *options.log << "acc " << format_rate(cell.metrics.acc);
      } else {
        *options.log << "failed: " << cell.error;
      }
      *options.log << " (" << format_number(cell.seconds, "%.1f") << " s)\n";
    }
  };

  std::size_t n_threads = options.n_threads > 0 ? static_cast<std::size_t>(options.n_threads)
                                                : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, std::max<std::size_t>(n_cells, 1));
  if (n_threads <= 1) {
    for (std::size_t k = 0; k < n_cells; ++k) run_cell(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < n_threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t k = next++; k < n_cells; k = next++) run_cell(k);
      });
    }
    for (auto& w : workers) w.join();
  }

  for (auto& m : result.models) finish_model(m);
  return result;
}

std::string to_string(CompareMetric metric) { return metric == CompareMetric::accuracy ? "accuracy" : "diff_pos"; }

ComparisonTable compare_models(const ExperimentResult& result, CompareMetric metric) {
  if (result.seeds.size() < 2) throw std::invalid_argument("compare_models: need at least 2 splits");
  std::vector<const ModelResult*> usable;
  for (const auto& m : result.models) {
    if (m.ok) usable.push_back(&m);
  }
  if (usable.size() < 2) throw std::invalid_argument("compare_models: need at least 2 successful models");

  auto values = [&](const ModelResult& m) {
    std::vector<double> v;
    for (const auto& c : m.cells) {
      if (metric == CompareMetric::accuracy) {
        if (!c.metrics.acc) throw std::invalid_argument("compare_models: accuracy undefined on an empty test set");
        v.push_back(*c.metrics.acc);
      } else {
        v.push_back(static_cast<double>(c.metrics.diff_pos));
      }
    }
    return v;
  };
  auto mean_of = [&](const ModelResult& m) {
    return metric == CompareMetric::accuracy ? m.means.acc.value_or(0.0) : m.means.diff_pos;
  };

  std::size_t ref = 0;
  for (std::size_t i = 1; i < usable.size(); ++i) {
    const double a = mean_of(*usable[i]), b = mean_of(*usable[ref]);
    const bool better = metric == CompareMetric::accuracy ? a > b : std::abs(a) < std::abs(b);
    if (better) ref = i;
  }

  ComparisonTable table;
  table.metric = metric;
  table.referent = usable[ref]->name;
  const auto ref_values = values(*usable[ref]);
  std::vector<double> raw;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    ComparisonRow row;
    row.name = usable[i]->name;
    row.mean = mean_of(*usable[i]);
    row.referent = i == ref;
    const auto v = values(*usable[i]);
    if (!row.referent) {
      row.paired = wilcoxon_signed_rank(std::span<const double>(ref_values), std::span<const double>(v));
      raw.push_back(row.paired->p_value);
    }
    if (metric == CompareMetric::diff_pos) row.one_sample = wilcoxon_signed_rank(std::span<const double>(v), 0.0);
    table.rows.push_back(std::move(row));
  }
  const auto adjusted = benjamini_yekutieli(raw);
  std::size_t k = 0;
  for (auto& row : table.rows) {
    if (!row.referent) row.adjusted_p = adjusted[k++];
  }
  return table;
}

namespace {

const ComparisonRow* find_row(const ComparisonTable* table, const std::string& name) {
  if (!table) return nullptr;
  for (const auto& row : table->rows) {
    if (row.name == name) return &row;
  }
  return nullptr;
}

std::string format_p(double p) { return format_number(p, "%.3f"); }

void write_aligned(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const std::string pad(width[j] - row[j].size(), ' ');
      if (j == 0) {
        line += row[j] + pad;
      } else {
        line += "  " + pad + row[j];
      }
    }
    out << line << '\n';
  }
}

}  // namespace

void write_performance_table(std::ostream& out, const ExperimentResult& result, const ComparisonTable* accuracy) {
  std::vector<std::vector<std::string>> rows{{"Model", "Sens", "Spec", "PPV", "NPV", "F1", "Acc", "Acc p (adj)"}};
  for (const auto& m : result.models) {
    if (!m.ok) {
      rows.push_back({m.name, "failed", "", "", "", "", "", ""});
      continue;
    }
    const auto& s = m.means;
    std::string p = "NA";
    if (const auto* row = find_row(accuracy, m.name)) p = row->referent ? "*" : format_p(*row->adjusted_p);
    rows.push_back({m.name, format_rate(s.sens), format_rate(s.spec), format_rate(s.ppv), format_rate(s.npv),
                    format_rate(s.f1), format_rate(s.acc), p});
  }
  write_aligned(out, rows);
}

void write_prevalence_table(std::ostream& out, const ExperimentResult& result, const ComparisonTable* diff_pos) {
  std::vector<std::vector<std::string>> rows{{"Model", "FP", "FN", "n pos", "Diff pos", "p", "Pair. p (adjusted)"}};
  for (const auto& m : result.models) {
    if (!m.ok) {
      rows.push_back({m.name, "failed", "", "", "", "", ""});
      continue;
    }
    const auto& s = m.means;
    std::string p = "NA", pair = "NA";
    if (const auto* row = find_row(diff_pos, m.name)) {
      if (row->one_sample) p = format_p(row->one_sample->p_value);
      pair = row->referent ? "*" : format_p(*row->adjusted_p);
    }
    auto whole = [](double v) { return format_number(v == 0 ? 0.0 : v, "%.0f"); };
    rows.push_back({m.name, whole(s.fp), whole(s.fn), whole(s.n_pos), whole(s.diff_pos), p, pair});
  }
  write_aligned(out, rows);
}

void write_results_csv(std::ostream& out, const ExperimentResult& result) {
  out << "model,kind,split,seed,status,tp,fp,tn,fn,sens,spec,ppv,npv,f1,acc,n_pos,diff_pos,error\n";
  for (const auto& m : result.models) {
    for (std::size_t s = 0; s < m.cells.size(); ++s) {
      const auto& c = m.cells[s];
      out << m.name << ',' << m.kind << ',' << s + 1 << ',' << c.seed << ',' << (c.ok ? "ok" : "failed");
      if (c.ok) {
        const auto& r = c.metrics;
        out << ',' << c.confusion.tp << ',' << c.confusion.fp << ',' << c.confusion.tn << ',' << c.confusion.fn << ','
            << format_optional(r.sens) << ',' << format_optional(r.spec) << ',' << format_optional(r.ppv) << ','
            << format_optional(r.npv) << ',' << format_optional(r.f1) << ',' << format_optional(r.acc) << ','
            << r.n_pos << ',' << r.diff_pos << ",\n";
      } else {
        out << ",,,,,,,,,,,,," << csv_safe(c.error) << '\n';
      }
    }
  }
}

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  out << "model,kind,status,n_splits,sens,spec,ppv,npv,f1,acc,fp,fn,n_pos,diff_pos,error\n";
  for (const auto& m : result.models) {
    out << m.name << ',' << m.kind << ',' << (m.ok ? "ok" : "failed") << ',' << m.cells.size();
    if (m.ok) {
      const auto& s = m.means;
      out << ',' << format_optional(s.sens) << ',' << format_optional(s.spec) << ',' << format_optional(s.ppv) << ','
          << format_optional(s.npv) << ',' << format_optional(s.f1) << ',' << format_optional(s.acc) << ','
          << format_number(s.fp) << ',' << format_number(s.fn) << ',' << format_number(s.n_pos) << ','
          << format_number(s.diff_pos) << ",\n";
    } else {
      out << ",,,,,,,,,,," << csv_safe(m.error) << '\n';
    }
  }
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonTable>& tables) {
  out << "metric,model,mean,referent,statistic,p_raw,p_adjusted,one_sample_statistic,one_sample_p,alpha\n";
  for (const auto& t : tables) {
    for (const auto& row : t.rows) {
      out << to_string(t.metric) << ',' << row.name << ',' << format_number(row.mean) << ','
          << (row.referent ? "yes" : "no") << ',';
      if (row.paired) {
        out << format_number(row.paired->statistic) << ',' << format_number(row.paired->p_value) << ','
            << format_number(*row.adjusted_p);
      } else {
        out << ",,";
      }
      out << ',';
      if (row.one_sample) {
        out << format_number(row.one_sample->statistic) << ',' << format_number(row.one_sample->p_value);
      } else {
        out << ',';
      }
      out << ',' << format_number(t.alpha, "%g") << '\n';
    }
  }
}

void write_timing_csv(std::ostream& out, const ExperimentResult& result) {
  out << "model,split,seed,seconds\n";
  for (const auto& m : result.models) {
    for (std::size_t s = 0; s < m.cells.size(); ++s) {
      out << m.name << ',' << s + 1 << ',' << m.cells[s].seed << ',' << format_number(m.cells[s].seconds, "%.3f")
          << '\n';
    }
  }
}

ExperimentResult read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line).rfind("model,kind,split,seed,status", 0) != 0) {
    throw DataError("results file: missing header");
  }
  ExperimentResult result;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_on(line, ',');
    const std::string where = "results file line " + std::to_string(line_no);
    if (f.size() != 18) throw DataError(where + ": expected 18 fields");
    auto [it, inserted] = index.emplace(f[0], result.models.size());
    if (inserted) {
      ModelResult m;
      m.name = f[0];
      m.kind = f[1];
      result.models.push_back(std::move(m));
    }
    ModelResult& m = result.models[it->second];
    CellResult c;
    c.seed = parse_unsigned(f[3], where);
    if (f[4] == "ok") {
      c.ok = true;
      c.confusion.tp = static_cast<std::int64_t>(parse_unsigned(f[5], where));
      c.confusion.fp = static_cast<std::int64_t>(parse_unsigned(f[6], where));
      c.confusion.tn = static_cast<std::int64_t>(parse_unsigned(f[7], where));
      c.confusion.fn = static_cast<std::int64_t>(parse_unsigned(f[8], where));
      c.metrics = metrics(c.confusion);
    } else if (f[4] == "failed") {
      c.error = f[17];
    } else {
      throw DataError(where + ": unknown status '" + f[4] + "'");
    }
    m.cells.push_back(std::move(c));
  }
  for (const auto& m : result.models) {
    std::vector<std::uint64_t> seeds;
    for (const auto& c : m.cells) seeds.push_back(c.seed);
    if (&m == &result.models.front()) {
      result.seeds = seeds;
    } else if (seeds != result.seeds) {
      throw DataError("results file: model '" + m.name + "' has a different split list");
    }
  }
  for (auto& m : result.models) finish_model(m);
  return result;
}

void write_report(const std::string& dir, const ExperimentResult& result, bool timing) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    const auto path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    return out;
  };
  std::size_t n_ok = 0;
  for (const auto& m : result.models) n_ok += m.ok;
  std::optional<ComparisonTable> accuracy, diff_pos;
  if (result.seeds.size() >= 2 && n_ok >= 2) {
    accuracy = compare_models(result, CompareMetric::accuracy);
    diff_pos = compare_models(result, CompareMetric::diff_pos);
  }
  {
    auto out = open("results.csv");
    write_results_csv(out, result);
  }
  {
    auto out = open("summary.csv");
    write_summary_csv(out, result);
  }
  {
    auto out = open("comparison.csv");
    std::vector<ComparisonTable> tables;
    if (accuracy) tables = {*accuracy, *diff_pos};
    write_comparison_csv(out, tables);
  }
  if (timing) {
    auto out = open("timing.csv");
    write_timing_csv(out, result);
  }
  {
    auto out = open("table2.txt");
    write_performance_table(out, result, accuracy ? &*accuracy : nullptr);
  }
  {
    auto out = open("table3.txt");
    write_prevalence_table(out, result, diff_pos ? &*diff_pos : nullptr);
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::uint64_t model_seed = 0;
  std::vector<std::vector<std::string>> model_lines;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  auto synth = [&]() -> SynthSpec& {
    if (!config.synth) config.synth = SynthSpec{};
    return *config.synth;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key != "model" && !seen.insert(key).second) throw DataError(where + ": duplicate key '" + key + "'");
    const std::string what = where + " (" + key + ")";
    if (key == "corpus") {
      config.corpus_path = value;
    } else if (key == "seeds") {
      config.plan.seeds.clear();
      for (const auto& s : split_on(value, ',')) config.plan.seeds.push_back(parse_unsigned(s, what));
    } else if (key == "fractions") {
      const auto parts = split_on(value, ',');
      if (parts.size() != 3) throw DataError(what + ": expected train,val,test");
      config.plan.fractions = {parse_double(parts[0], what), parse_double(parts[1], what), parse_double(parts[2], what)};
    } else if (key == "stratify") {
      config.plan.stratify = parse_bool(value, what);
    } else if (key == "output_dir") {
      config.output_dir = value;
    } else if (key == "threads") {
      config.n_threads = static_cast<int>(parse_unsigned(value, what));
    } else if (key == "model_seed") {
      model_seed = parse_unsigned(value, what);
    } else if (key == "tune") {
      config.tune = parse_bool(value, what);
    } else if (key == "tuning_seed") {
      config.tuning_seed = parse_unsigned(value, what);
    } else if (key == "model") {
      auto tokens = words(value);
      if (tokens.empty()) throw DataError(what + ": missing model kind");
      tokens.push_back(where);
      model_lines.push_back(std::move(tokens));
    } else if (key.rfind("synth.", 0) == 0) {
      const std::string field = key.substr(6);
      if (field == "n_docs") {
        synth().n_docs = static_cast<Index>(parse_unsigned(value, what));
      } else if (field == "prevalence") {
        synth().prevalence = parse_double(value, what);
      } else if (field == "vocab_size") {
        synth().vocab_size = static_cast<Index>(parse_unsigned(value, what));
      } else if (field == "zipf_exponent") {
        synth().zipf_exponent = parse_double(value, what);
      } else if (field == "n_uninformative") {
        synth().n_uninformative = static_cast<Index>(parse_unsigned(value, what));
      } else if (field == "separation") {
        synth().separation = parse_double(value, what);
      } else if (field == "target_accuracy") {
        synth();
        config.target_accuracy = parse_double(value, what);
      } else if (field == "label_noise") {
        synth().label_noise = parse_double(value, what);
      } else if (field == "length_log_mean") {
        synth().length_log_mean = parse_double(value, what);
      } else if (field == "length_log_sd") {
        synth().length_log_sd = parse_double(value, what);
      } else if (field == "seed") {
        synth().seed = parse_unsigned(value, what);
      } else {
        throw DataError(where + ": unknown synth field '" + field + "'");
      }
    } else {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }

  if (config.corpus_path && config.synth) throw DataError("config: give either corpus or synth.*, not both");
  if (!config.corpus_path && !config.synth) throw DataError("config: no corpus or synth.* settings");
  if (model_lines.empty()) {
    config.models = default_models(model_seed);
  }
  std::set<std::string> names;
  for (const auto& tokens : model_lines) {
    const std::string& where = tokens.back();
    ModelSpec spec;
    spec.config.kind = tokens[0];
    spec.config.seed = model_seed;
    spec.name = display_name(tokens[0]);
    for (std::size_t t = 1; t + 1 < tokens.size(); ++t) {
      const auto eq = tokens[t].find('=');
      if (eq == std::string::npos) throw DataError(where + ": expected name=value, got '" + tokens[t] + "'");
      const std::string name = tokens[t].substr(0, eq), value = tokens[t].substr(eq + 1);
      if (name == "name") {
        spec.name = value;
      } else if (name == "seed") {
        spec.config.seed = parse_unsigned(value, where);
      } else {
        spec.config.params[name] = parse_double(value, where + " (" + name + ")");
      }
    }
    try {
      make_classifier(spec.config);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!names.insert(spec.name).second) throw DataError(where + ": duplicate model name '" + spec.name + "'");
    config.models.push_back(std::move(spec));
  }
  try {
    validate_plan(config.plan);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (config.tune && std::find(config.plan.seeds.begin(), config.plan.seeds.end(), config.tuning_seed) !=
                         config.plan.seeds.end()) {
    throw DataError("config: tuning_seed must not be one of the split seeds");
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return parse_config(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Corpus config_corpus(const ExperimentConfig& config) {
  if (config.corpus_path) return load_corpus(*config.corpus_path);
  if (!config.synth) throw DataError("config: no corpus or synth.* settings");
  SynthSpec spec = *config.synth;
  if (config.target_accuracy) spec.separation = separation_for_accuracy(spec, *config.target_accuracy);
  return synth_corpus(spec);
}

SearchSpace tuning_space(const std::string& kind) {
  const std::vector<double> svm_c{0.001, 0.01, 0.1, 1, 2, 8, 16};
  if (kind == "lda_svm") return {Domain::set("n_topics", {5, 10, 15, 20, 30}), Domain::set("C", svm_c)};
  if (kind == "lsa_svm") return {Domain::set("rank", {10, 25, 50, 100, 200}), Domain::set("C", svm_c)};
  if (kind == "mnb") return {Domain::interval("alpha", 0.0001, 1.0, true)};
  if (kind == "svm") return {Domain::set("C", {0.0001, 0.001, 0.01, 0.1, 1, 2, 5})};
  if (kind == "nbsvm") return {Domain::interval("beta", 1e-6, 1 - 1e-6), Domain::set("C", {0.001, 0.01, 1.0, 2, 4})};
  if (kind == "nn_avg") {
    return {Domain::interval("dropout", 0.0, 0.9), Domain::set("patience", {5, 10, 15, 20, 25}),
            Domain::set("embedding_size", {64, 128, 256, 512}), Domain::set("batch_size", {32, 64, 128, 256}),
            Domain::set("learning_rate", {0.0001, 0.001, 0.01, 0.1})};
  }
  if (kind == "nn_sum") {
    return {Domain::interval("dropout", 0.0, 0.9), Domain::set("patience", {2, 5, 10}),
            Domain::set("embedding_size", {64, 128, 256, 512}), Domain::set("batch_size", {32, 64, 128, 256}),
            Domain::set("learning_rate", {0.00001, 0.0001, 0.001})};
  }
  if (kind == "rf") {
    std::vector<double> cutoffs, sizes;
    for (int k = 1; k <= 99; ++k) cutoffs.push_back(k / 100.0);
    for (int s = 10; s <= 200; s += 10) sizes.push_back(s);
    return {Domain::set("threshold", cutoffs), Domain::set("n_top", sizes)};
  }
  throw std::invalid_argument("unknown model kind '" + kind + "'");
}

namespace {

int guided_iterations(const std::string& kind) {
  if (kind == "mnb" || kind == "svm") return 50;
  if (kind == "nbsvm") return 30;
  return 20;
}

TuneOutcome tune_forest(const SpMat& counts, const std::vector<int>& labels, const Split& split,
                        const ModelConfig& config, const TuneOptions& options) {
  TuneOutcome outcome;
  outcome.space = tuning_space("rf");
  ParamMap params = model_defaults("rf");
  for (const auto& [k, v] : config.params) params[k] = v;

  const SpMat train_counts = select_rows(counts, split.train);
  const Eigen::VectorXd idf = fit_idf(train_counts);
  const SpMat x = apply_tfidf(train_counts, idf);
  const SpMat x_val = apply_tfidf(select_rows(counts, split.val), idf);
  const auto y = pick(labels, split.train);
  const auto y_val = pick(labels, split.val);

  ForestOptions forest;
  forest.n_trees = static_cast<int>(params.at("n_trees"));
  forest.seed = derive_seed(config.seed, options.seed);

  const RandomForestModel full = rf_fit(x, y, forest);
  const Eigen::VectorXd scores = rf_score(full, x_val);
  const ThresholdChoice cutoff = threshold_sweep(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), y_val);
  if (options.log) *options.log << "rf: threshold " << format_number(cutoff.cutoff, "%.2f") << '\n';

  const ForestTrainer trainer = [&](const SpMat& xs, std::span<const int> ys) {
    RandomForestModel model = rf_fit(xs, ys, forest);
    model.threshold = cutoff.cutoff;
    return model;
  };
  EliminationOptions elimination;
  elimination.start = std::min<Index>(250, x.cols());
  elimination.max_size = std::min<Index>(200, elimination.start);
  elimination.min_size = std::min<Index>(10, elimination.max_size);
  const EliminationResult chosen =
      feature_eliminate(trainer, x, y, x_val, y_val, EliminationMode::nonrecursive, elimination);
  if (options.log) *options.log << "rf: n_top " << chosen.n_top << '\n';

  for (const auto& step : chosen.steps) {
    outcome.search.log.push_back({{{"threshold", cutoff.cutoff}, {"n_top", static_cast<double>(step.size)}},
                                  1.0 - step.accuracy,
                                  false});
  }
  outcome.search.best = {{"threshold", cutoff.cutoff}, {"n_top", static_cast<double>(chosen.n_top)}};
  for (const auto& step : chosen.steps) {
    if (step.size == chosen.n_top) outcome.search.best_error = 1.0 - step.accuracy;
  }
  outcome.threshold = cutoff;
  outcome.elimination = chosen;
  outcome.config = config;
  outcome.config.params["threshold"] = cutoff.cutoff;
  outcome.config.params["n_top"] = static_cast<double>(chosen.n_top);
  return outcome;
}

}  // namespace

TuneOutcome tune_model(const ExperimentData& data, const ModelConfig& config, const TuneOptions& options) {
  make_classifier(config);
  const Split split = split_indices(data.labels, options.seed, options.fractions);
  const auto probe = make_classifier(config);
  const SpMat& counts = data.matrix(probe->ngrams());
  if (config.kind == "rf") return tune_forest(counts, data.labels, split, config, options);

  const SpMat x = select_rows(counts, split.train);
  const SpMat x_val = select_rows(counts, split.val);
  const auto y = pick(data.labels, split.train);
  const auto y_val = pick(data.labels, split.val);

  std::size_t n_evaluations = 0;
  const Objective objective = [&](const ParamMap& point) {
    ModelConfig trial = config;
    for (const auto& [k, v] : point) trial.params[k] = v;
    trial.seed = derive_seed(config.seed, options.seed);
    auto model = make_classifier(trial);
    model->fit(x, y, x_val, y_val);
    const double error = 1.0 - accuracy_of(y_val, model->predict(x_val));
    if (options.log) {
      *options.log << config.kind << " #" << ++n_evaluations << ':';
      for (const auto& [k, v] : point) *options.log << ' ' << k << '=' << format_number(v, "%.6g");
      *options.log << " error " << format_number(error, "%.4f") << '\n';
    }
    return error;
  };

  TuneOutcome outcome;
  outcome.space = tuning_space(config.kind);
  if (config.kind == "lda_svm" || config.kind == "lsa_svm") {
    outcome.search = grid_search(objective, outcome.space);
  } else {
    BayesOptions bayes;
    bayes.n_iter = options.n_iter > 0 ? options.n_iter : guided_iterations(config.kind);
    bayes.seed = derive_seed(options.seed, 1);
    outcome.search = bayes_opt(objective, outcome.space, bayes);
  }
  outcome.config = config;
  for (const auto& [k, v] : outcome.search.best) outcome.config.params[k] = v;
  return outcome;
}

}  // namespace casebench
