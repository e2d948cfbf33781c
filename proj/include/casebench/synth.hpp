#pragma once

#include <cstdint>
#include <string>

#include "casebench/linalg.hpp"
#include "casebench/textprep.hpp"

namespace casebench {

/// Two-class bag-of-words generator standing in for a restricted corpus.
///
/// Word j has Zipf base rate b_j and a sign z_j (zero for the `n_uninformative`
/// most frequent words, otherwise +-1 drawn from the seed). The class word
/// distributions are p_pos ~ b * exp(s z) and p_neg ~ b * exp(-s z) for the
/// separation s. Each document draws its label with probability `prevalence`,
/// then takes its words from the opposite class with probability
/// `label_noise`. Lengths are log-normal.
struct SynthSpec {
  Index n_docs = 2000;
  double prevalence = 0.489;
  Index vocab_size = 400;
  double zipf_exponent = 1.1;
  Index n_uninformative = 40;
  double separation = 0.0;
  double label_noise = 0.09;
  double length_log_mean = 7.331715;   // log of the median length, 1528
  double length_log_sd = 0.899855;     // quartile spread 813 to 2737
  std::uint64_t seed = 20190101;
};

/// Log-normal (location, scale) whose quartiles are (q1, q3).
std::pair<double, double> lognormal_from_quartiles(double q1, double q3);

/// Synthetic word for index j: three consonant-vowel syllables ending in a vowel.
std::string synth_word(Index j);

struct SynthDistributions {
  Eigen::VectorXd positive;
  Eigen::VectorXd negative;
};

SynthDistributions synth_distributions(const SynthSpec& spec);

/// Expected word frequencies over the whole corpus (the label/noise mixture).
Eigen::VectorXd expected_word_distribution(const SynthSpec& spec);

/// Accuracy of the Bayes-optimal rule on a fresh document, using a normal
/// approximation to the log-likelihood ratio integrated over lengths.
double bayes_optimal_accuracy(const SynthSpec& spec);

/// Separation at which bayes_optimal_accuracy reaches `target_accuracy`.
double separation_for_accuracy(SynthSpec spec, double target_accuracy);

Corpus synth_corpus(const SynthSpec& spec);

}  // namespace casebench
