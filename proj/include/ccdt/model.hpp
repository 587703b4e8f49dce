#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccdt/encoding.hpp"
#include "ccdt/json.hpp"
#include "ccdt/network.hpp"
#include "ccdt/result_code.hpp"
#include "ccdt/rules.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

/// Adam hyperparameters and the training schedule.
struct TrainingConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  // Held-out share for early stopping; 0 disables it.
  double validation_fraction = 0.1;
  std::size_t patience = 5;
  // Worker threads for training modules in parallel; 0 means hardware concurrency.
  std::size_t threads = 1;

  void validate() const;
};

Json training_to_json(const TrainingConfig& cfg);
/// Keys missing from `doc` keep their value in `defaults`.
TrainingConfig training_from_json(const Json& doc, const TrainingConfig& defaults = {});

/// Fine-tuning defaults: learning rate 3e-4, 40 epochs, early stopping on a 10% split.
TrainingConfig fine_tune_defaults();

/// Per-rule probability vectors, aligned with the model's rule ids.
using Prediction = std::vector<std::array<double, 4>>;

/// Argmax index mapped to a code; ties go to the lowest index.
ResultCode predicted_code(const std::array<double, 4>& pv);

/// The surrogate of one rule-engine version: one independent module per rule.
struct CCDT {
  EncoderConfig encoder;
  ArchConfig arch;
  std::string version;
  std::uint64_t seed = 0;
  std::vector<std::string> rule_ids;
  std::vector<Module<float>> modules;             // aligned with rule_ids
  std::vector<std::vector<double>> loss_curves;  // mean training loss per epoch, per module
  Json metadata = Json::object();

  std::size_t size() const noexcept { return rule_ids.size(); }
  std::optional<std::size_t> index_of(std::string_view rule_id) const;
  const Module<float>& module(std::string_view rule_id) const;
};

/// Fresh model with one randomly initialised module per rule. Module seeds
/// are derived from `seed` and the rule id.
CCDT make_ccdt(EncoderConfig encoder, std::vector<std::string> rule_ids, std::string version, std::uint64_t seed,
               const ArchConfig& arch = {});

/// Seed used for the module of `rule_id` in a model seeded with `seed`.
std::uint64_t module_seed(std::uint64_t seed, std::string_view rule_id);

struct TrainingSummary {
  std::vector<std::string> rule_ids;
  std::vector<std::size_t> epochs_run;
  std::vector<double> final_loss;
};

/// Trains, independently, the module of every rule labelled in `data` with
/// categorical cross-entropy. Throws ConfigError if a labelled rule has no
/// module, TrainingError on a non-finite loss.
TrainingSummary train(CCDT& model, const LabelledDataset& data, const TrainingConfig& cfg);

struct FineTuneOptions {
  TrainingConfig training = fine_tune_defaults();
  // Re-initialise modified rules instead of warm-starting them.
  bool modified_from_scratch = false;
};

/// Builds the target model: retained (and, by default, modified) modules are
/// copied from `source`, new ones initialised from scratch, removed ones
/// dropped; then every module is trained on `evolution_data`.
CCDT fine_tune(const CCDT& source, const RuleSet& target_rules, const RuleSetDiff& diff,
               const LabelledDataset& evolution_data, const FineTuneOptions& options);

/// Target-version model with source modules where ids match and untrained
/// random modules elsewhere. Used by the off-the-shelf baseline.
CCDT extend_untrained(const CCDT& source, const RuleSet& target_rules);

std::array<double, 4> predict_module(const Module<float>& module, const FeatureVector& fv, Workspace<float>& ws);
Prediction predict(const CCDT& model, const CancerMessage& message);
Prediction predict(const CCDT& model, const FeatureVector& fv);
std::vector<Prediction> predict_batch(const CCDT& model, const Dataset& data);

/// [message][rule] argmax codes.
std::vector<std::vector<ResultCode>> predicted_codes(const std::vector<Prediction>& predictions);

struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a ReLU or pooling kink
};

/// Central differences against backprop for every parameter, in extended
/// precision. Relative error is |ga - gn| / max(|ga|, |gn|, 1e-8).
GradientCheckResult gradient_check(const Module<float>& module, const FeatureVector& fv, std::size_t target,
                                   double epsilon = 1e-5);

// ---- artifacts ---------------------------------------------------------------

/// Directory with manifest.json and one little-endian float32 file per module.
void save_model(const CCDT& model, const std::filesystem::path& dir);

/// Throws FormatError on a missing or truncated file or a format-version
/// mismatch, SchemaError if `schema` is given and the encoder does not match.
CCDT load_model(const std::filesystem::path& dir, const MessageSchema* schema = nullptr);

}  // namespace ccdt
