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

#include "tokenforge/cli.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tokenforge/diffro.h"
#include "tokenforge/eval.h"
#include "tokenforge/fsq_codec.h"
#include "tokenforge/fsq_io.h"
#include "tokenforge/pipeline_run.h"
#include "tokenforge/random.h"
#include "tokenforge/text.h"
#include "tokenforge/textproc.h"

namespace tokenforge::cli {
namespace fs = std::filesystem;
namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool verbose = false;
};

std::uint64_t ResolveSeed(const GlobalOptions& g) {
  if (g.seed) return *g.seed;
  if (const char* env = std::getenv("TOKENFORGE_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') {
      Fail(ErrorKind::kConfig, std::string("TOKENFORGE_SEED is not an unsigned integer: ") + env);
    }
    return v;
  }
  return kDefaultSeed;
}

nlohmann::json LoadJsonConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kConfig, "cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, "invalid JSON in " + path + ": " + e.what());
  }
}

std::ifstream OpenIn(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  return in;
}

std::ofstream OpenOut(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  return out;
}

void WriteJsonFile(const std::string& path, const nlohmann::json& j) {
  auto out = OpenOut(path);
  out << j.dump(2) << '\n';
  if (!out) Fail(ErrorKind::kIo, "short write to " + path);
}

std::string Fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ParentDir(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

// ---- tokenize ----

struct TokenizeOptions {
  std::string input;
  std::string output;
  std::string format = "text";
  std::string quantized_out;
  bool decode = false;
};

int CmdTokenize(const GlobalOptions& g, const TokenizeOptions& o, std::ostream& out,
                std::ostream& err) {
  if (g.config.empty()) Fail(ErrorKind::kConfig, "tokenize needs --config with an FSQ config");
  const auto cfg = fsq::FsqConfigFromJson(LoadJsonConfig(g.config));
  if (o.format != "text" && o.format != "binary") {
    Fail(ErrorKind::kConfig, "--format must be text or binary");
  }

  if (o.decode) {
    auto in = OpenIn(o.input, true);
    const auto stream = fsq::ReadTokens(in);
    if (stream.low_rank_dim != 0 &&
        (stream.low_rank_dim != cfg.low_rank_dim || static_cast<int>(stream.bound) != cfg.bound)) {
      Fail(ErrorKind::kConfig, "token stream was written for D=" +
                                   std::to_string(stream.low_rank_dim) + ", K=" +
                                   std::to_string(stream.bound));
    }
    std::vector<fsq::QuantizedVector> rows;
    for (const auto& t : stream.tokens) rows.push_back(fsq::DecodeIndex(t, cfg.low_rank_dim, cfg.bound));
    auto file = OpenOut(o.output);
    fsq::WriteQuantizedRows(file, rows);
    out << rows.size() << " tokens decoded\n";
    return kExitOk;
  }

  auto in = OpenIn(o.input);
  const auto features = fsq::ReadFeatureRows(in, cfg.input_dim);
  std::vector<fsq::QuantizedVector> quantized;
  std::vector<fsq::TokenId> tokens;
  for (const auto& h : features) {
    quantized.push_back(fsq::Quantize(h, cfg));
    tokens.push_back(fsq::EncodeIndex(quantized.back(), cfg.bound));
  }
  const bool binary = o.format == "binary";
  auto file = OpenOut(o.output, binary);
  if (binary) {
    fsq::WriteTokensBinary(file, tokens, static_cast<std::uint32_t>(cfg.low_rank_dim),
                           static_cast<std::uint32_t>(cfg.bound));
  } else {
    fsq::WriteTokensText(file, tokens);
  }
  if (!o.quantized_out.empty()) {
    auto q = OpenOut(o.quantized_out);
    fsq::WriteQuantizedRows(q, quantized);
  }
  if (g.verbose) err << "codebook size " << cfg.codebook_size() << '\n';
  out << tokens.size() << " tokens\n";
  return kExitOk;
}

// ---- pipeline ----

struct PipelineOptions {
  std::string input;
  std::string output;
  std::string stats_out;
  std::string denoise_cmd;
  std::string asr_cmd;
  std::string align_cmd;
};

int CmdPipeline(const GlobalOptions& g, const PipelineOptions& o, std::ostream& out,
                std::ostream& err) {
  pipeline::RunOptions run;
  if (!g.config.empty()) {
    auto j = LoadJsonConfig(g.config);
    if (!j.is_object()) Fail(ErrorKind::kConfig, "pipeline config must be a JSON object");
    if (j.contains("adapters")) {
      const auto a = j["adapters"];
      j.erase("adapters");
      if (!a.is_object()) Fail(ErrorKind::kConfig, "adapters must be an object");
      for (const auto& [key, value] : a.items()) {
        if (!value.is_string()) Fail(ErrorKind::kConfig, "adapter " + key + " must be a string");
        if (key == "denoise") {
          run.adapters.denoise = value;
        } else if (key == "asr") {
          run.adapters.asr = value;
        } else if (key == "align") {
          run.adapters.align = value;
        } else {
          Fail(ErrorKind::kConfig, "unknown adapter " + key);
        }
      }
    }
    run.config = pipeline::PipelineConfigFromJson(j);
  }
  if (!o.denoise_cmd.empty()) run.adapters.denoise = o.denoise_cmd;
  if (!o.asr_cmd.empty()) run.adapters.asr = o.asr_cmd;
  if (!o.align_cmd.empty()) run.adapters.align = o.align_cmd;

  const auto rows = pipeline::ReadManifest(o.input);
  run.base_dir = ParentDir(o.input);
  run.output_dir = ParentDir(o.output);
  run.audio_subdir = fs::path(o.output).stem().string() + "_audio";
  run.seed = ResolveSeed(g);
  run.jobs = g.jobs;
  const auto result = pipeline::RunPipeline(rows, run);
  pipeline::WriteManifest(o.output, result.records);
  const std::string stats_path = o.stats_out.empty() ? o.output + ".stats.json" : o.stats_out;
  WriteJsonFile(stats_path, result.stats);
  if (g.verbose) err << result.stats["dropped_by_stage"].dump() << '\n';
  out << result.stats["input_records"] << " in, " << result.stats["output_records"] << " out, "
      << result.stats["dropped_total"] << " dropped\n";
  return kExitOk;
}

// ---- diffro ----

struct DiffroOptions {
  std::string trace_out;
  std::string policy_out;
};

std::unique_ptr<diffro::ReaderModel> ReaderFrom(const nlohmann::json& spec,
                                                const std::string& base_dir) {
  if (spec.is_string()) {
    fs::path p = spec.get<std::string>();
    if (p.is_relative()) p = fs::path(base_dir) / p;
    return diffro::LoadReader(p.string());
  }
  if (spec.is_object()) return diffro::ReaderFromJson(spec);
  Fail(ErrorKind::kConfig, "reader must be a path or an object");
}

std::vector<std::string> Symbols(const nlohmann::json& j) {
  if (j.is_string()) return text::SplitWhitespace(j.get<std::string>());
  if (j.is_array()) return j.get<std::vector<std::string>>();
  Fail(ErrorKind::kConfig, "target must be a string or an array of symbols");
}

double StandardNormal(Rng& rng) {
  // Box-Muller on raw engine bits keeps draws identical across platforms.
  const double u1 = rng.UniformOpen();
  const double u2 = rng.UniformOpen();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix MatrixFromJson(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                      const char* what) {
  if (!j.is_array() || j.size() != rows) {
    Fail(ErrorKind::kConfig, std::string(what) + " must have " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      Fail(ErrorKind::kConfig, std::string(what) + " rows must have " + std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json MatrixToJson(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

std::vector<std::size_t> RowArgMax(const Matrix& m) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < m.cols(); ++c) {
      if (m(r, c) > m(r, best)) best = c;
    }
    out.push_back(best);
  }
  return out;
}

// For a linear reader every position is scored independently, so the best
// hard sequence is a per-position argmax of log P(y_t | k).
std::vector<std::size_t> ReaderOptimal(const diffro::ReaderModel& reader,
                                       const std::vector<std::size_t>& target) {
  const Matrix& e = reader.emission();
  std::vector<std::size_t> out;
  for (std::size_t y : target) {
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t k = 0; k < e.rows(); ++k) {
      const auto lp = diffro::LogSoftmax(e.row(k));
      if (lp[y] > best_score) {
        best_score = lp[y];
        best = k;
      }
    }
    out.push_back(best);
  }
  return out;
}

int CmdDiffro(const GlobalOptions& g, const DiffroOptions& o, std::ostream& out,
              std::ostream& err) {
  if (g.config.empty()) Fail(ErrorKind::kConfig, "diffro needs --config with a run config");
  const auto j = LoadJsonConfig(g.config);
  if (!j.is_object()) Fail(ErrorKind::kConfig, "diffro config must be a JSON object");
  const std::string base = ParentDir(g.config);
  const std::uint64_t seed = ResolveSeed(g);

  diffro::RewardConfig cfg;
  int steps = 200;
  double lr = 0.5;
  double reference_scale = 1.0;
  std::string init = "reference";
  std::unique_ptr<diffro::ReaderModel> asr;
  std::vector<std::unique_ptr<diffro::ReaderModel>> attribute_readers;
  diffro::RewardSpec reward;
  std::optional<Matrix> reference_logits;
  try {
    if (!j.contains("reader")) Fail(ErrorKind::kConfig, "diffro config needs a reader");
    if (!j.contains("target")) Fail(ErrorKind::kConfig, "diffro config needs a target");
    asr = ReaderFrom(j["reader"], base);
    reward.asr = asr.get();
    reward.target = asr->Encode(Symbols(j["target"]));
    cfg.beta = j.value("beta", 0.0);
    cfg.temperature = j.value("temperature", 1.0);
    cfg.noise_draws = j.value("noise_draws", 1);
    const std::string mode = j.value("mode", std::string("straight_through"));
    if (mode == "straight_through") {
      cfg.mode = diffro::SampleMode::kStraightThrough;
    } else if (mode == "soft") {
      cfg.mode = diffro::SampleMode::kSoft;
    } else {
      Fail(ErrorKind::kConfig, "mode must be straight_through or soft");
    }
    steps = j.value("steps", steps);
    lr = j.value("lr", lr);
    reference_scale = j.value("reference_scale", reference_scale);
    init = j.value("init", init);
    if (init != "reference" && init != "zeros") Fail(ErrorKind::kConfig, "init must be reference or zeros");
    for (const auto& a : j.value("attributes", nlohmann::json::array())) {
      attribute_readers.push_back(ReaderFrom(a.at("reader"), base));
      const std::string name = a.at("name");
      reward.attributes.push_back(
          {name, attribute_readers.back().get(), attribute_readers.back()->IndexOf(a.at("label"))});
      if (a.contains("weight")) cfg.task_weights[name] = a["weight"].get<double>();
    }
    if (j.contains("reference")) {
      reference_logits = MatrixFromJson(j["reference"], reward.target.size(), asr->codebook_size(),
                                        "reference");
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("diffro config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    Fail(ErrorKind::kConfig, e.what());
  }
  cfg.Validate();
  if (steps < 1 || !(lr > 0.0)) Fail(ErrorKind::kConfig, "steps must be >= 1 and lr > 0");

  const std::size_t t_len = reward.target.size();
  const std::size_t q = asr->codebook_size();
  diffro::PolicyLogits reference{Matrix(t_len, q)};
  if (reference_logits) {
    reference.logits = *reference_logits;
  } else {
    Rng ref_rng(DeriveSeed(seed, 0));
    for (auto& v : reference.logits.data()) v = reference_scale * StandardNormal(ref_rng);
  }
  diffro::PolicyLogits start = init == "zeros" ? diffro::PolicyLogits{Matrix(t_len, q)} : reference;

  Rng rng(DeriveSeed(seed, 1));
  const auto result = diffro::Optimize(start, reference, reward, cfg, steps, lr, rng);

  std::vector<Matrix> noise;
  for (int d = 0; d < cfg.noise_draws; ++d) noise.push_back(diffro::DrawGumbelNoise(t_len, q, rng));
  const auto final_value =
      diffro::EvaluateObjective(result.policy, reference, reward, cfg, noise, nullptr);

  if (!o.trace_out.empty()) {
    auto trace = OpenOut(o.trace_out);
    trace << "step,reward,kl,objective\n";
    for (const auto& e : result.trace) {
      trace << e.step << ',' << Fmt(e.reward) << ',' << Fmt(e.kl) << ',' << Fmt(e.objective) << '\n';
    }
  }
  const auto argmax = RowArgMax(result.policy.logits);
  nlohmann::json policy = {{"seed", seed},
                           {"steps", steps},
                           {"beta", cfg.beta},
                           {"logits", MatrixToJson(result.policy.logits)},
                           {"argmax", argmax},
                           {"final",
                            {{"reward", final_value.reward},
                             {"kl", final_value.kl},
                             {"objective", final_value.objective}}}};
  if (dynamic_cast<const diffro::LinearReader*>(asr.get()) != nullptr) {
    const auto best = ReaderOptimal(*asr, reward.target);
    std::size_t agree = 0;
    for (std::size_t t = 0; t < t_len; ++t) agree += argmax[t] == best[t];
    policy["reader_optimal"] = best;
    policy["agreement"] = t_len == 0 ? 1.0 : static_cast<double>(agree) / t_len;
  }
  if (!o.policy_out.empty()) WriteJsonFile(o.policy_out, policy);
  if (g.verbose) err << "seed " << seed << ", " << result.trace.size() << " steps\n";
  out << "final reward=" << Fmt(final_value.reward) << " kl=" << Fmt(final_value.kl)
      << " objective=" << Fmt(final_value.objective);
  if (policy.contains("agreement")) out << " agreement=" << Fmt(policy["agreement"].get<double>());
  out << '\n';
  return kExitOk;
}

// ---- augment ----

struct AugmentOptions {
  std::string input;
  std::string output;
  std::string dict;
  std::string scope;
  std::string mode;
  std::optional<double> replace_prob;
  std::optional<double> corruption_prob;
};

textproc::Scope ParseScope(const std::string& s) {
  const auto l = text::ToLowerAscii(s);
  if (l == "repmono") return textproc::Scope::kRepMono;
  if (l == "repall") return textproc::Scope::kRepAll;
  Fail(ErrorKind::kConfig, "scope must be RepMono or RepAll");
}

textproc::Mode ParseMode(const std::string& s) {
  const auto l = text::ToLowerAscii(s);
  if (l == "mixphn") return textproc::Mode::kMixPhn;
  if (l == "catphn") return textproc::Mode::kCatPhn;
  Fail(ErrorKind::kConfig, "mode must be MixPhn or CatPhn");
}

int CmdAugment(const GlobalOptions& g, const AugmentOptions& o, std::ostream& out,
               std::ostream& err) {
  textproc::AugmentPolicy policy;
  std::string dict_path = o.dict;
  if (!g.config.empty()) {
    const auto j = LoadJsonConfig(g.config);
    try {
      if (j.contains("scope")) policy.scope = ParseScope(j["scope"]);
      if (j.contains("mode")) policy.mode = ParseMode(j["mode"]);
      policy.replace_prob = j.value("replace_prob", policy.replace_prob);
      policy.corruption_prob = j.value("corruption_prob", policy.corruption_prob);
      if (dict_path.empty() && j.contains("dict")) {
        fs::path p = j["dict"].get<std::string>();
        if (p.is_relative()) p = fs::path(ParentDir(g.config)) / p;
        dict_path = p.string();
      }
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kConfig, std::string("augment config: ") + e.what());
    }
  }
  if (!o.scope.empty()) policy.scope = ParseScope(o.scope);
  if (!o.mode.empty()) policy.mode = ParseMode(o.mode);
  if (o.replace_prob) policy.replace_prob = *o.replace_prob;
  if (o.corruption_prob) policy.corruption_prob = *o.corruption_prob;
  policy.Validate();
  if (dict_path.empty()) Fail(ErrorKind::kConfig, "augment needs a dictionary (--dict)");

  const auto parsed = textproc::LoadPronDict(dict_path);
  if (g.verbose) {
    for (const auto& w : parsed.warnings) err << dict_path << ": " << w << '\n';
  }
  const textproc::Augmenter augmenter(parsed.dict, policy);
  const std::uint64_t seed = ResolveSeed(g);
  const auto rows = pipeline::ReadManifest(o.input);
  std::vector<nlohmann::json> outputs;
  textproc::AugmentStats stats;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto row = rows[i];
    if (!row.contains("text") || !row["text"].is_string()) {
      Fail(ErrorKind::kInvalidInput, o.input + ": row " + std::to_string(i + 1) + " has no text");
    }
    Rng rng(DeriveSeed(seed, i));
    const std::string augmented = augmenter.AugmentText(row["text"].get<std::string>(), rng, &stats);
    row["augmented_text"] = augmented;
    if (row.contains("instruction") && row["instruction"].is_string()) {
      row["instructed_text"] = textproc::BuildInstructedText(row["instruction"].get<std::string>(), augmented);
    }
    outputs.push_back(std::move(row));
  }
  pipeline::WriteManifest(o.output, outputs);
  out << rows.size() << " lines, " << stats.eligible << " eligible words, " << stats.replaced
      << " replaced\n";
  return kExitOk;
}

// ---- eval ----

struct EvalOptions {
  std::string input;
  std::string output;
  std::string table_out;
  bool raw = false;
};

int CmdEval(const GlobalOptions& g, const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const auto rows = pipeline::ReadManifest(o.input);
  const std::string base = ParentDir(o.input);
  std::vector<eval::EvalItem> items;
  for (const auto& row : rows) items.push_back(eval::EvalItemFromJson(row, base));
  eval::ScoringOptions scoring;
  scoring.normalize = !o.raw;
  const auto report = eval::Aggregate(items, scoring);
  auto j = eval::ReportToJson(report);
  j["normalized"] = scoring.normalize;
  WriteJsonFile(o.output, j);
  const std::string table = eval::ReportToTable(report);
  if (!o.table_out.empty()) {
    auto file = OpenOut(o.table_out);
    file << table;
  } else {
    out << table;
  }
  if (g.verbose) err << items.size() << " items scored\n";
  return kExitOk;
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitConfig;
    case ErrorKind::kMissingAdapter:
      return kExitMissingAdapter;
    case ErrorKind::kDivergence:
      return kExitDivergence;
    default:
      return kExitIo;
  }
}

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"TokenForge speech-token toolkit", "tokenforge"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "JSON config file for the subcommand");
  auto* seed_opt = app.add_option("--seed", seed_value, "random seed (overrides TOKENFORGE_SEED)");
  app.add_option("--jobs", g.jobs, "worker threads for per-utterance work")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "extra diagnostics on stderr");

  TokenizeOptions tok;
  auto* tokenize = app.add_subcommand("tokenize", "quantize feature rows into FSQ tokens");
  tokenize->add_option("--input", tok.input, "feature rows, or tokens with --decode")->required();
  tokenize->add_option("--output", tok.output, "token file, or quantized rows with --decode")->required();
  tokenize->add_option("--format", tok.format, "token file format: text or binary");
  tokenize->add_option("--quantized-out", tok.quantized_out, "also write the quantized vectors");
  tokenize->add_flag("--decode", tok.decode, "decode a token file back to quantized vectors");

  PipelineOptions pipe;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run the corpus pipeline over a manifest");
  pipeline_cmd->add_option("--input", pipe.input, "input JSONL manifest")->required();
  pipeline_cmd->add_option("--output", pipe.output, "output JSONL manifest")->required();
  pipeline_cmd->add_option("--stats-out", pipe.stats_out, "stage statistics (default <output>.stats.json)");
  pipeline_cmd->add_option("--denoise-cmd", pipe.denoise_cmd, "denoising adapter command");
  pipeline_cmd->add_option("--asr-cmd", pipe.asr_cmd, "ASR adapter command");
  pipeline_cmd->add_option("--align-cmd", pipe.align_cmd, "alignment adapter command");

  DiffroOptions dro;
  auto* diffro_cmd = app.add_subcommand("diffro", "toy differentiable reward optimization");
  diffro_cmd->add_option("--trace-out", dro.trace_out, "per-step CSV trace");
  diffro_cmd->add_option("--policy-out", dro.policy_out, "final policy JSON");

  AugmentOptions aug;
  auto* augment = app.add_subcommand("augment", "pronunciation-inpainting augmentation");
  augment->add_option("--input", aug.input, "JSONL corpus with a text field")->required();
  augment->add_option("--output", aug.output, "JSONL corpus with augmented_text added")->required();
  augment->add_option("--dict", aug.dict, "CMU-format pronunciation dictionary");
  augment->add_option("--scope", aug.scope, "RepMono or RepAll");
  augment->add_option("--mode", aug.mode, "MixPhn or CatPhn");
  augment->add_option("--replace-prob", aug.replace_prob, "replacement probability");
  augment->add_option("--corruption-prob", aug.corruption_prob, "CatPhn corruption probability");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "score hypotheses and aggregate a report");
  eval_cmd->add_option("--input", ev.input, "JSONL evaluation items")->required();
  eval_cmd->add_option("--output", ev.output, "report JSON")->required();
  eval_cmd->add_option("--table-out", ev.table_out, "write the text table here instead of stdout");
  eval_cmd->add_flag("--raw", ev.raw, "score without text normalization");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "tokenforge: " << e.what() << '\n';
    return kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (*tokenize) return CmdTokenize(g, tok, out, err);
    if (*pipeline_cmd) return CmdPipeline(g, pipe, out, err);
    if (*diffro_cmd) return CmdDiffro(g, dro, out, err);
    if (*augment) return CmdAugment(g, aug, out, err);
    if (*eval_cmd) return CmdEval(g, ev, out, err);
  } catch (const Error& e) {
    err << "tokenforge: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "tokenforge: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace tokenforge::cli
