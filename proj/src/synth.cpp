#include "casebench/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "casebench/rng.hpp"
#include "casebench/stats.hpp"

namespace casebench {

namespace {

constexpr double kQuartileZ = 0.6744897501960817;

void validate(const SynthSpec& spec) {
  if (spec.n_docs < 1) throw std::invalid_argument("synth: n_docs must be positive");
  if (!(spec.prevalence > 0 && spec.prevalence < 1)) throw std::invalid_argument("synth: prevalence must lie in (0, 1)");
  if (spec.vocab_size < 2) throw std::invalid_argument("synth: vocabulary needs at least two words");
  if (spec.n_uninformative < 0 || spec.n_uninformative >= spec.vocab_size) {
    throw std::invalid_argument("synth: every word is uninformative");
  }
  if (!(spec.separation >= 0 && std::isfinite(spec.separation))) {
    throw std::invalid_argument("synth: separation must be finite and non-negative");
  }
  if (!(spec.label_noise >= 0 && spec.label_noise < 0.5)) throw std::invalid_argument("synth: label noise must lie in [0, 0.5)");
  if (!(spec.zipf_exponent >= 0) || !(spec.length_log_sd >= 0) || !std::isfinite(spec.length_log_mean)) {
    throw std::invalid_argument("synth: invalid length or frequency parameters");
  }
}

Eigen::VectorXd word_signs(const SynthSpec& spec) {
  Rng rng(derive_seed(spec.seed, 1));
  Eigen::VectorXd z = Eigen::VectorXd::Zero(spec.vocab_size);
  for (Index j = spec.n_uninformative; j < spec.vocab_size; ++j) z[j] = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return z;
}

}  // namespace

std::pair<double, double> lognormal_from_quartiles(double q1, double q3) {
  if (!(q1 > 0 && q3 > q1)) throw std::invalid_argument("lognormal_from_quartiles: need 0 < q1 < q3");
  return {0.5 * (std::log(q1) + std::log(q3)), (std::log(q3) - std::log(q1)) / (2 * kQuartileZ)};
}

std::string synth_word(Index j) {
  static constexpr char kConsonants[] = "bdfgklmnprtvz";
  static constexpr char kVowels[] = "aiou";
  constexpr Index nc = sizeof(kConsonants) - 1, nv = sizeof(kVowels) - 1, syllables = nc * nv;
  if (j < 0 || j >= syllables * syllables * syllables) throw std::out_of_range("synth_word: index too large");
  std::string word;
  for (Index place = syllables * syllables; place >= 1; place /= syllables) {
    const Index s = (j / place) % syllables;
    word += kConsonants[s / nv];
    word += kVowels[s % nv];
  }
  return word;
}

SynthDistributions synth_distributions(const SynthSpec& spec) {
  validate(spec);
  const Eigen::VectorXd z = word_signs(spec);
  Eigen::VectorXd base(spec.vocab_size);
  for (Index j = 0; j < spec.vocab_size; ++j) base[j] = std::pow(static_cast<double>(j + 1), -spec.zipf_exponent);
  SynthDistributions d;
  d.positive = base.cwiseProduct((spec.separation * z).array().exp().matrix());
  d.negative = base.cwiseProduct((-spec.separation * z).array().exp().matrix());
  d.positive /= d.positive.sum();
  d.negative /= d.negative.sum();
  return d;
}

Eigen::VectorXd expected_word_distribution(const SynthSpec& spec) {
  const auto d = synth_distributions(spec);
  const double pi = spec.prevalence, eps = spec.label_noise;
  const double from_positive = pi * (1 - eps) + (1 - pi) * eps;
  return from_positive * d.positive + (1 - from_positive) * d.negative;
}

double bayes_optimal_accuracy(const SynthSpec& spec) {
  const auto d = synth_distributions(spec);
  const double pi = spec.prevalence, eps = spec.label_noise;
  // Decide positive when the word log-likelihood ratio exceeds this cutoff.
  const double num = (1 - pi) * (1 - eps) - pi * eps, den = pi * (1 - eps) - (1 - pi) * eps;
  if (!(num > 0 && den > 0)) return std::max(pi, 1 - pi);
  const double cutoff = std::log(num / den);

  const Eigen::ArrayXd llr = (d.positive.array() / d.negative.array()).log();
  const double m1 = (d.positive.array() * llr).sum(), m0 = (d.negative.array() * llr).sum();
  const double v1 = (d.positive.array() * llr.square()).sum() - m1 * m1;
  const double v0 = (d.negative.array() * llr.square()).sum() - m0 * m0;

  // P(ratio > cutoff | words drawn from a class with per-word mean m, variance v).
  auto exceed = [cutoff](double m, double v, double len) {
    if (v <= 0) return m * len > cutoff ? 1.0 : 0.0;
    return 1.0 - normal_cdf((cutoff - m * len) / std::sqrt(v * len));
  };
  constexpr int kNodes = 201;
  double total = 0, weight_sum = 0;
  for (int k = 0; k < kNodes; ++k) {
    const double g = -4.0 + 8.0 * k / (kNodes - 1);
    const double w = std::exp(-0.5 * g * g);
    const double len = std::exp(spec.length_log_mean + spec.length_log_sd * g);
    const double p1 = exceed(m1, v1, len), p0 = exceed(m0, v0, len);
    const double acc = pi * ((1 - eps) * p1 + eps * p0) + (1 - pi) * ((1 - eps) * (1 - p0) + eps * (1 - p1));
    total += w * acc;
    weight_sum += w;
  }
  return total / weight_sum;
}

double separation_for_accuracy(SynthSpec spec, double target_accuracy) {
  spec.separation = 0;
  if (target_accuracy <= bayes_optimal_accuracy(spec)) return 0.0;
  double lo = 0, hi = 1;
  for (spec.separation = hi; bayes_optimal_accuracy(spec) < target_accuracy; spec.separation = hi) {
    lo = hi;
    hi *= 2;
    if (hi > 64) throw std::invalid_argument("separation_for_accuracy: target accuracy is unreachable");
  }
  for (int iter = 0; iter < 100; ++iter) {
    spec.separation = 0.5 * (lo + hi);
    (bayes_optimal_accuracy(spec) < target_accuracy ? lo : hi) = spec.separation;
  }
  return hi;
}

Corpus synth_corpus(const SynthSpec& spec) {
  const auto dist = synth_distributions(spec);
  const AliasTable positive(std::vector<double>(dist.positive.data(), dist.positive.data() + dist.positive.size()));
  const AliasTable negative(std::vector<double>(dist.negative.data(), dist.negative.data() + dist.negative.size()));
  std::vector<std::string> words(static_cast<std::size_t>(spec.vocab_size));
  for (Index j = 0; j < spec.vocab_size; ++j) words[static_cast<std::size_t>(j)] = synth_word(j);

  Rng rng(derive_seed(spec.seed, 2));
  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(spec.n_docs));
  for (Index i = 0; i < spec.n_docs; ++i) {
    const int label = rng.bernoulli(spec.prevalence) ? 1 : 0;
    const bool from_positive = rng.bernoulli(spec.label_noise) ? label == 0 : label == 1;
    const double length = std::exp(spec.length_log_mean + spec.length_log_sd * rng.normal());
    const auto n_words = static_cast<std::size_t>(std::max(1.0, std::round(std::min(length, 1e7))));
    const AliasTable& table = from_positive ? positive : negative;

    std::string text;
    text.reserve(n_words * 7);
    std::size_t sentence_left = 0;
    for (std::size_t w = 0; w < n_words; ++w) {
      const std::string& word = words[table.sample(rng)];
      if (sentence_left == 0) {
        if (w > 0) text += ". ";
        sentence_left = 6 + rng.index(12);
        text += static_cast<char>(word[0] - 'a' + 'A');
        text.append(word, 1);
      } else {
        text += ' ';
        text += word;
      }
      --sentence_left;
    }
    text += '.';
    corpus.push_back({"doc" + std::to_string(i), std::move(text), label});
  }
  return corpus;
}

}  // namespace casebench
