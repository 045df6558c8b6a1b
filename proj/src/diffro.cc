// Copyright 2026 The TokenForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tokenforge/diffro.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "tokenforge/error.h"

namespace tokenforge::diffro {
namespace {

double LogSumExp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - m);
  return m + std::log(acc);
}

std::size_t ArgMax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void CheckSameShape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    Fail(ErrorKind::kDimensionMismatch,
         std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
             std::to_string(b.cols()) + " differ");
  }
}

}  // namespace

void RewardConfig::Validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    Fail(ErrorKind::kConfig, "temperature must be positive");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    Fail(ErrorKind::kConfig, "beta must be non-negative");
  }
  if (noise_draws < 1) Fail(ErrorKind::kConfig, "noise_draws must be >= 1");
  for (const auto& [task, w] : task_weights) {
    if (!(w >= 0.0)) Fail(ErrorKind::kConfig, "weight of task " + task + " is negative");
  }
}

double RewardConfig::WeightFor(const std::string& task) const {
  const auto it = task_weights.find(task);
  return it == task_weights.end() ? 1.0 : it->second;
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> LogSoftmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double lse = LogSumExp(logits);
  for (double& v : out) v -= lse;
  return out;
}

Matrix DrawGumbelNoise(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix noise(rows, cols);
  for (double& g : noise.data()) g = -std::log(-std::log(rng.UniformOpen()));
  return noise;
}

GumbelSample GumbelSoftmax(const Matrix& logits, const Matrix& noise,
                           double temperature) {
  if (!(temperature > 0.0)) Fail(ErrorKind::kInvalidInput, "temperature must be positive");
  CheckSameShape(logits, noise, "gumbel noise");
  GumbelSample sample{Matrix(logits.rows(), logits.cols()), {}};
  sample.hard.reserve(logits.rows());
  std::vector<double> perturbed(logits.cols());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    for (std::size_t k = 0; k < logits.cols(); ++k) {
      perturbed[k] = logits(t, k) + noise(t, k);
    }
    sample.hard.push_back(ArgMax(perturbed));
    for (double& v : perturbed) v /= temperature;
    const auto soft = Softmax(perturbed);
    std::copy(soft.begin(), soft.end(), sample.soft.row(t).begin());
  }
  return sample;
}

GumbelDraw SampleGumbelSoftmax(std::span<const double> logits, double temperature,
                               Rng& rng) {
  if (!(temperature > 0.0)) Fail(ErrorKind::kInvalidInput, "temperature must be positive");
  if (logits.empty()) Fail(ErrorKind::kInvalidInput, "empty logits");
  for (double v : logits) {
    if (!std::isfinite(v)) Fail(ErrorKind::kInvalidInput, "non-finite logit");
  }
  const Matrix row(1, logits.size(), std::vector<double>(logits.begin(), logits.end()));
  const GumbelSample s = GumbelSoftmax(row, DrawGumbelNoise(1, logits.size(), rng),
                                       temperature);
  return {std::vector<double>(s.soft.row(0).begin(), s.soft.row(0).end()), s.hard[0]};
}

Matrix ReaderInput(const GumbelSample& sample, SampleMode mode) {
  if (mode == SampleMode::kSoft) return sample.soft;
  Matrix one_hot(sample.soft.rows(), sample.soft.cols());
  for (std::size_t t = 0; t < sample.hard.size(); ++t) one_hot(t, sample.hard[t]) = 1.0;
  return one_hot;
}

ReaderModel::ReaderModel(std::vector<std::string> vocab, Matrix emission)
    : vocab_(std::move(vocab)), emission_(std::move(emission)) {
  if (vocab_.empty()) Fail(ErrorKind::kConfig, "reader vocabulary is empty");
  if (emission_.cols() != vocab_.size() || emission_.rows() == 0) {
    Fail(ErrorKind::kConfig, "reader emission must be Q x V with V = vocabulary size");
  }
  if (!emission_.AllFinite()) Fail(ErrorKind::kConfig, "reader emission is not finite");
}

std::size_t ReaderModel::IndexOf(const std::string& symbol) const {
  const auto it = std::find(vocab_.begin(), vocab_.end(), symbol);
  if (it == vocab_.end()) {
    Fail(ErrorKind::kInvalidInput, "symbol \"" + symbol + "\" is not in the reader vocabulary");
  }
  return static_cast<std::size_t>(it - vocab_.begin());
}

std::vector<std::size_t> ReaderModel::Encode(const std::vector<std::string>& symbols) const {
  std::vector<std::size_t> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) ids.push_back(IndexOf(s));
  return ids;
}

std::vector<double> ReaderModel::TextLogits(std::span<const double> token_row) const {
  std::vector<double> z(emission_.cols(), 0.0);
  for (std::size_t k = 0; k < emission_.rows(); ++k) {
    const double w = token_row[k];
    if (w == 0.0) continue;
    for (std::size_t v = 0; v < emission_.cols(); ++v) z[v] += w * emission_(k, v);
  }
  return z;
}

void ReaderModel::CheckTokens(const Matrix& tokens) const {
  if (tokens.cols() != emission_.rows()) {
    Fail(ErrorKind::kDimensionMismatch,
         "token rows have " + std::to_string(tokens.cols()) +
             " entries but the reader codebook has " + std::to_string(emission_.rows()));
  }
  if (tokens.rows() == 0) Fail(ErrorKind::kInvalidInput, "empty token sequence");
}

double LinearReader::LogProb(const Matrix& tokens,
                             std::span<const std::size_t> target) const {
  CheckTokens(tokens);
  if (target.size() != tokens.rows()) {
    Fail(ErrorKind::kInvalidInput, "target length " + std::to_string(target.size()) +
                                       " differs from token length " +
                                       std::to_string(tokens.rows()));
  }
  double total = 0.0;
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    if (target[t] >= vocab().size()) Fail(ErrorKind::kInvalidInput, "target id out of range");
    const auto z = TextLogits(tokens.row(t));
    total += z[target[t]] - LogSumExp(z);
  }
  return total;
}

Matrix LinearReader::LogProbGrad(const Matrix& tokens,
                                 std::span<const std::size_t> target) const {
  LogProb(tokens, target);  // argument validation
  const Matrix& e = emission();
  Matrix grad(tokens.rows(), tokens.cols());
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    const auto p = Softmax(TextLogits(tokens.row(t)));
    for (std::size_t k = 0; k < e.rows(); ++k) {
      double expect = 0.0;
      for (std::size_t v = 0; v < e.cols(); ++v) expect += e(k, v) * p[v];
      grad(t, k) = e(k, target[t]) - expect;
    }
  }
  return grad;
}

namespace {

std::vector<double> MeanRow(const Matrix& tokens) {
  std::vector<double> mean(tokens.cols(), 0.0);
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    for (std::size_t k = 0; k < tokens.cols(); ++k) mean[k] += tokens(t, k);
  }
  for (double& v : mean) v /= static_cast<double>(tokens.rows());
  return mean;
}

}  // namespace

double PooledReader::LogProb(const Matrix& tokens,
                             std::span<const std::size_t> target) const {
  CheckTokens(tokens);
  if (target.size() != 1 || target[0] >= vocab().size()) {
    Fail(ErrorKind::kInvalidInput, "attribute readers take exactly one valid label");
  }
  const auto z = TextLogits(MeanRow(tokens));
  return z[target[0]] - LogSumExp(z);
}

Matrix PooledReader::LogProbGrad(const Matrix& tokens,
                                 std::span<const std::size_t> target) const {
  LogProb(tokens, target);
  const Matrix& e = emission();
  const auto p = Softmax(TextLogits(MeanRow(tokens)));
  const double scale = 1.0 / static_cast<double>(tokens.rows());
  Matrix grad(tokens.rows(), tokens.cols());
  for (std::size_t k = 0; k < e.rows(); ++k) {
    double expect = 0.0;
    for (std::size_t v = 0; v < e.cols(); ++v) expect += e(k, v) * p[v];
    const double g = scale * (e(k, target[0]) - expect);
    for (std::size_t t = 0; t < tokens.rows(); ++t) grad(t, k) = g;
  }
  return grad;
}

double AsrReward(const GumbelSample& sample, const std::vector<std::string>& target,
                 const ReaderModel& reader, SampleMode mode) {
  const auto ids = reader.Encode(target);
  return reader.LogProb(ReaderInput(sample, mode), ids);
}

double MtrReward(const GumbelSample& sample,
                 const std::map<std::string, std::string>& attributes,
                 const std::map<std::string, const ReaderModel*>& readers,
                 const std::map<std::string, double>& weights, SampleMode mode) {
  const Matrix input = ReaderInput(sample, mode);
  double total = 0.0;
  for (const auto& [task, label] : attributes) {
    const auto it = readers.find(task);
    if (it == readers.end() || it->second == nullptr) {
      Fail(ErrorKind::kInvalidInput, "no reader for attribute task \"" + task + "\"");
    }
    const auto w = weights.find(task);
    const double weight = w == weights.end() ? 1.0 : w->second;
    if (weight == 0.0) continue;
    const std::size_t id = it->second->IndexOf(label);
    total += weight * it->second->LogProb(input, std::span<const std::size_t>(&id, 1));
  }
  return total;
}

double TokenLevelKl(const PolicyLogits& policy, const PolicyLogits& reference) {
  CheckSameShape(policy.logits, reference.logits, "token-level KL");
  double kl = 0.0;
  for (std::size_t t = 0; t < policy.steps(); ++t) {
    const auto lp = LogSoftmax(policy.logits.row(t));
    const auto lq = LogSoftmax(reference.logits.row(t));
    for (std::size_t k = 0; k < lp.size(); ++k) {
      const double p = std::exp(lp[k]);
      if (p > 0.0) kl += p * (lp[k] - lq[k]);
    }
  }
  return kl;
}

Matrix TokenLevelKlGrad(const PolicyLogits& policy, const PolicyLogits& reference) {
  CheckSameShape(policy.logits, reference.logits, "token-level KL");
  Matrix grad(policy.steps(), policy.codebook_size());
  for (std::size_t t = 0; t < policy.steps(); ++t) {
    const auto lp = LogSoftmax(policy.logits.row(t));
    const auto lq = LogSoftmax(reference.logits.row(t));
    double row_kl = 0.0;
    for (std::size_t k = 0; k < lp.size(); ++k) row_kl += std::exp(lp[k]) * (lp[k] - lq[k]);
    // d/dl_j sum_k p_k (log p_k - log q_k) = p_j (log p_j - log q_j - KL_t)
    for (std::size_t k = 0; k < lp.size(); ++k) {
      grad(t, k) = std::exp(lp[k]) * (lp[k] - lq[k] - row_kl);
    }
  }
  return grad;
}

ObjectiveValue EvaluateObjective(const PolicyLogits& policy,
                                 const PolicyLogits& reference,
                                 const RewardSpec& reward, const RewardConfig& cfg,
                                 std::span<const Matrix> noise, Matrix* grad) {
  if (noise.empty()) Fail(ErrorKind::kInvalidInput, "at least one noise draw is required");
  const std::size_t rows = policy.steps();
  const std::size_t cols = policy.codebook_size();
  ObjectiveValue value;
  value.kl = TokenLevelKl(policy, reference);
  if (grad != nullptr) *grad = Matrix(rows, cols);

  for (const Matrix& g : noise) {
    const GumbelSample sample = GumbelSoftmax(policy.logits, g, cfg.temperature);
    const Matrix input = ReaderInput(sample, cfg.mode);
    double r = 0.0;
    Matrix reader_grad(rows, cols);
    auto accumulate = [&](const ReaderModel& reader, std::span<const std::size_t> target,
                          double weight) {
      r += weight * reader.LogProb(input, target);
      if (grad == nullptr) return;
      const Matrix gi = reader.LogProbGrad(input, target);
      for (std::size_t i = 0; i < gi.data().size(); ++i) {
        reader_grad.data()[i] += weight * gi.data()[i];
      }
    };
    if (reward.asr != nullptr) accumulate(*reward.asr, reward.target, 1.0);
    for (const auto& task : reward.attributes) {
      if (task.reader == nullptr) {
        Fail(ErrorKind::kInvalidInput, "no reader for attribute task \"" + task.name + "\"");
      }
      const double w = cfg.WeightFor(task.name);
      if (w != 0.0) accumulate(*task.reader, std::span<const std::size_t>(&task.label, 1), w);
    }
    value.reward += r;

    if (grad != nullptr) {
      // Back through softmax((logits + g) / tau): ds_k/dl_j = s_k (d_kj - s_j) / tau.
      for (std::size_t t = 0; t < rows; ++t) {
        const auto s = sample.soft.row(t);
        const auto gr = reader_grad.row(t);
        double dot = 0.0;
        for (std::size_t k = 0; k < cols; ++k) dot += s[k] * gr[k];
        for (std::size_t k = 0; k < cols; ++k) {
          (*grad)(t, k) += s[k] * (gr[k] - dot) / cfg.temperature;
        }
      }
    }
  }

  const double draws = static_cast<double>(noise.size());
  value.reward /= draws;
  value.objective = DiffroObjective(value.reward, value.kl, cfg.beta);
  if (grad != nullptr) {
    for (double& v : grad->data()) v /= draws;
    if (cfg.beta != 0.0) {
      const Matrix kl_grad = TokenLevelKlGrad(policy, reference);
      for (std::size_t i = 0; i < kl_grad.data().size(); ++i) {
        grad->data()[i] -= cfg.beta * kl_grad.data()[i];
      }
    }
  }
  return value;
}

OptimizeResult Optimize(PolicyLogits policy, const PolicyLogits& reference,
                        const RewardSpec& reward, const RewardConfig& cfg, int steps,
                        double lr, Rng& rng, const StepObserver& observer) {
  cfg.Validate();
  if (steps < 1) Fail(ErrorKind::kInvalidInput, "steps must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) Fail(ErrorKind::kInvalidInput, "lr must be positive");
  CheckSameShape(policy.logits, reference.logits, "policy and reference");
  if (!policy.logits.AllFinite() || !reference.logits.AllFinite()) {
    Fail(ErrorKind::kInvalidInput, "policy logits must be finite");
  }

  // The KL term has curvature up to ~beta in logit space, so an undamped
  // explicit step oscillates once lr * beta exceeds 2.
  const double step_size = lr / (1.0 + cfg.beta);

  OptimizeResult result;
  result.trace.reserve(static_cast<std::size_t>(steps));
  std::vector<Matrix> noise(static_cast<std::size_t>(cfg.noise_draws));
  Matrix grad;
  for (int step = 0; step < steps; ++step) {
    for (auto& n : noise) n = DrawGumbelNoise(policy.steps(), policy.codebook_size(), rng);
    if (observer) observer(step, policy);
    const ObjectiveValue v = EvaluateObjective(policy, reference, reward, cfg, noise, &grad);
    if (!std::isfinite(v.objective) || !grad.AllFinite()) {
      std::ostringstream msg;
      msg << "objective diverged at step " << step << " (reward=" << v.reward
          << ", kl=" << v.kl << ", objective=" << v.objective << ")";
      Fail(ErrorKind::kDivergence, msg.str());
    }
    result.trace.push_back({step, v.reward, v.kl, v.objective});
    auto& logits = policy.logits.data();
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += step_size * grad.data()[i];
    if (!policy.logits.AllFinite()) {
      Fail(ErrorKind::kDivergence,
           "policy logits became non-finite after step " + std::to_string(step));
    }
  }
  result.policy = std::move(policy);
  return result;
}

double GradCheck(const DifferentiableObjective& objective, const Matrix& point,
                 double eps) {
  if (!(eps > 0.0) || eps > 1e-2) {
    Fail(ErrorKind::kInvalidInput, "finite-difference step must be in (0, 1e-2]");
  }
  Matrix analytic;
  objective(point, &analytic);
  CheckSameShape(point, analytic, "analytic gradient");
  Matrix probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.data().size(); ++i) {
    const double x = probe.data()[i];
    probe.data()[i] = x + eps;
    const double up = objective(probe, nullptr);
    probe.data()[i] = x - eps;
    const double down = objective(probe, nullptr);
    probe.data()[i] = x;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

std::unique_ptr<ReaderModel> ReaderFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("vocab") || !j["vocab"].is_array() ||
      !j.contains("emission") || !j["emission"].is_array()) {
    Fail(ErrorKind::kConfig, "reader needs \"vocab\" and \"emission\" arrays");
  }
  std::vector<std::string> vocab;
  for (const auto& v : j["vocab"]) {
    if (!v.is_string()) Fail(ErrorKind::kConfig, "reader vocabulary entries must be strings");
    vocab.push_back(v.get<std::string>());
  }
  std::vector<double> data;
  for (const auto& v : j["emission"]) {
    if (!v.is_number()) Fail(ErrorKind::kConfig, "reader emission holds a non-number");
    data.push_back(v.get<double>());
  }
  if (vocab.empty() || data.empty() || data.size() % vocab.size() != 0) {
    Fail(ErrorKind::kConfig, "emission size must be a positive multiple of the vocabulary size");
  }
  const std::size_t q = data.size() / vocab.size();
  Matrix emission(q, vocab.size(), std::move(data));
  const std::string kind = j.value("kind", std::string("linear"));
  if (kind == "linear") return std::make_unique<LinearReader>(std::move(vocab), std::move(emission));
  if (kind == "pooled") return std::make_unique<PooledReader>(std::move(vocab), std::move(emission));
  Fail(ErrorKind::kConfig, "unknown reader kind \"" + kind + "\"");
}

std::unique_ptr<ReaderModel> LoadReader(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open reader " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, "invalid JSON in " + path + ": " + e.what());
  }
  return ReaderFromJson(j);
}

}  // namespace tokenforge::diffro
