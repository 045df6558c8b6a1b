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

#ifndef TOKENFORGE_DIFFRO_H_
#define TOKENFORGE_DIFFRO_H_

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokenforge/matrix.h"
#include "tokenforge/random.h"

// Differentiable reward optimization over a toy token policy.
//
// A policy emits per-timestep logits over the speech-token codebook. Tokens
// are drawn with Gumbel-Softmax, scored by a differentiable reader (an
// ASR-like token-to-text model, or attribute classifiers for the multi-task
// reward), and the policy is pushed up the reward by gradient ascent while a
// token-level KL term keeps it close to a reference policy:
//
//   J(theta) = E[R] - beta * sum_t KL(pi_theta(. | t) || pi_ref(. | t))
//
// Every gradient here is derived by hand; GradCheck compares them against
// central finite differences.
namespace tokenforge::diffro {

struct PolicyLogits {
  Matrix logits;  // T x Q

  std::size_t steps() const { return logits.rows(); }
  std::size_t codebook_size() const { return logits.cols(); }
};

struct GumbelSample {
  Matrix soft;                    // T x Q, rows on the probability simplex
  std::vector<std::size_t> hard;  // argmax of each perturbed row
};

// kStraightThrough feeds one-hot hard tokens to the reader and routes the
// reader gradient back through the soft sample. kSoft feeds the soft sample
// itself, which makes the objective differentiable end to end.
enum class SampleMode { kStraightThrough, kSoft };

struct RewardConfig {
  double beta = 0.0;
  double temperature = 1.0;
  // Weight per attribute task of the multi-task reward; absent tasks weigh 1.
  std::map<std::string, double> task_weights;
  int noise_draws = 1;
  SampleMode mode = SampleMode::kStraightThrough;

  // Throws kConfig on tau <= 0, beta < 0 or noise_draws < 1.
  void Validate() const;
  double WeightFor(const std::string& task) const;
};

std::vector<double> Softmax(std::span<const double> logits);
std::vector<double> LogSoftmax(std::span<const double> logits);

// Standard Gumbel noise g = -ln(-ln u), u ~ U(0, 1).
Matrix DrawGumbelNoise(std::size_t rows, std::size_t cols, Rng& rng);

// Row-wise Gumbel-Softmax with caller-supplied noise (same shape as logits).
GumbelSample GumbelSoftmax(const Matrix& logits, const Matrix& noise,
                           double temperature);

struct GumbelDraw {
  std::vector<double> soft;
  std::size_t hard = 0;
};

// Single-row sample. Throws kInvalidInput on tau <= 0 or non-finite logits.
GumbelDraw SampleGumbelSoftmax(std::span<const double> logits, double temperature,
                               Rng& rng);

// The reader's token input for a sample: one-hot hard rows, or the soft rows.
Matrix ReaderInput(const GumbelSample& sample, SampleMode mode);

// A differentiable model scoring a target symbol sequence given token rows
// (T x Q, each row a distribution over the codebook).
class ReaderModel {
 public:
  ReaderModel(std::vector<std::string> vocab, Matrix emission);
  virtual ~ReaderModel() = default;

  const std::vector<std::string>& vocab() const { return vocab_; }
  const Matrix& emission() const { return emission_; }  // Q x V
  std::size_t codebook_size() const { return emission_.rows(); }

  // Throws kInvalidInput for symbols outside the vocabulary.
  std::size_t IndexOf(const std::string& symbol) const;
  std::vector<std::size_t> Encode(const std::vector<std::string>& symbols) const;

  // Sum of per-position target log-probabilities.
  virtual double LogProb(const Matrix& tokens,
                         std::span<const std::size_t> target) const = 0;
  // d LogProb / d tokens, T x Q.
  virtual Matrix LogProbGrad(const Matrix& tokens,
                             std::span<const std::size_t> target) const = 0;

 protected:
  // Text posterior logits for one token row: emission^T * row.
  std::vector<double> TextLogits(std::span<const double> token_row) const;
  void CheckTokens(const Matrix& tokens) const;

 private:
  std::vector<std::string> vocab_;
  Matrix emission_;
};

// Per-position reader: P(Y_t | tokens) = softmax(emission^T * token_t).
// Targets are teacher-forced and must have one symbol per timestep.
class LinearReader final : public ReaderModel {
 public:
  using ReaderModel::ReaderModel;
  double LogProb(const Matrix& tokens, std::span<const std::size_t> target) const override;
  Matrix LogProbGrad(const Matrix& tokens,
                     std::span<const std::size_t> target) const override;
};

// Utterance-level attribute classifier: softmax(emission^T * mean_t token_t)
// over class labels. Targets hold exactly one label.
class PooledReader final : public ReaderModel {
 public:
  using ReaderModel::ReaderModel;
  double LogProb(const Matrix& tokens, std::span<const std::size_t> target) const override;
  Matrix LogProbGrad(const Matrix& tokens,
                     std::span<const std::size_t> target) const override;
};

// R_ASR: teacher-forced log-likelihood of the target text under the reader.
double AsrReward(const GumbelSample& sample, const std::vector<std::string>& target,
                 const ReaderModel& reader,
                 SampleMode mode = SampleMode::kStraightThrough);

// R_MTR = sum_i w_i * log P_task_i(A_i | tokens). Throws kInvalidInput when a
// task has no reader.
double MtrReward(const GumbelSample& sample,
                 const std::map<std::string, std::string>& attributes,
                 const std::map<std::string, const ReaderModel*>& readers,
                 const std::map<std::string, double>& weights,
                 SampleMode mode = SampleMode::kStraightThrough);

// sum_t sum_k P(k) ln(P(k) / P_ref(k)) with row-softmax probabilities.
double TokenLevelKl(const PolicyLogits& policy, const PolicyLogits& reference);

// Gradient of TokenLevelKl with respect to the policy logits.
Matrix TokenLevelKlGrad(const PolicyLogits& policy, const PolicyLogits& reference);

inline double DiffroObjective(double reward, double kl, double beta) {
  return reward - beta * kl;
}

struct AttributeTask {
  std::string name;
  const ReaderModel* reader = nullptr;
  std::size_t label = 0;
};

// What the policy is rewarded for: the ASR reader's target text plus
// optional attribute tasks (weights come from RewardConfig::task_weights).
struct RewardSpec {
  const ReaderModel* asr = nullptr;
  std::vector<std::size_t> target;
  std::vector<AttributeTask> attributes;
};

struct ObjectiveValue {
  double reward = 0.0;  // averaged over noise draws
  double kl = 0.0;
  double objective = 0.0;
};

// Objective for a fixed bank of Gumbel noise matrices. When grad is non-null
// it receives dJ/dlogits (exact in kSoft mode, the straight-through estimate
// otherwise).
ObjectiveValue EvaluateObjective(const PolicyLogits& policy,
                                 const PolicyLogits& reference,
                                 const RewardSpec& reward, const RewardConfig& cfg,
                                 std::span<const Matrix> noise, Matrix* grad);

struct TraceEntry {
  int step = 0;
  double reward = 0.0;
  double kl = 0.0;
  double objective = 0.0;
};

struct OptimizeResult {
  PolicyLogits policy;
  std::vector<TraceEntry> trace;
};

using StepObserver = std::function<void(int step, const PolicyLogits& policy)>;

// Gradient ascent on the objective, starting from `policy`. Each step draws
// cfg.noise_draws fresh noise matrices from rng, records the pre-update
// objective, and moves the logits by lr / (1 + beta) times the gradient.
// Throws kInvalidInput on bad arguments and kDivergence when the objective or
// logits stop being finite.
OptimizeResult Optimize(PolicyLogits policy, const PolicyLogits& reference,
                        const RewardSpec& reward, const RewardConfig& cfg, int steps,
                        double lr, Rng& rng, const StepObserver& observer = {});

// Objective paired with its analytic gradient.
using DifferentiableObjective = std::function<double(const Matrix& point, Matrix* grad)>;

// Max entry-wise relative error between the analytic gradient and central
// finite differences, |a - n| / max(|a|, |n|, 1e-4). eps must be in (0, 1e-2].
double GradCheck(const DifferentiableObjective& objective, const Matrix& point,
                 double eps);

// Reader files: {"vocab": [...], "emission": Q x V row-major, "kind":
// "linear" | "pooled"}. Throws kConfig / kIo.
std::unique_ptr<ReaderModel> ReaderFromJson(const nlohmann::json& j);
std::unique_ptr<ReaderModel> LoadReader(const std::string& path);

}  // namespace tokenforge::diffro

#endif  // TOKENFORGE_DIFFRO_H_
