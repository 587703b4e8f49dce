#include "ccdt/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "ccdt/error.hpp"
#include "ccdt/random.hpp"

namespace ccdt {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0,1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must be in [0,1)");
}

Json training_to_json(const TrainingConfig& cfg) {
  Json j;
  j["learning_rate"] = cfg.learning_rate;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["adam_epsilon"] = cfg.adam_epsilon;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["validation_fraction"] = cfg.validation_fraction;
  j["patience"] = cfg.patience;
  return j;
}

TrainingConfig training_from_json(const Json& doc, const TrainingConfig& defaults) {
  TrainingConfig c = defaults;
  reject_unknown_keys(doc, training_to_json(c), "training");
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.beta1 = doc.value("beta1", c.beta1);
  c.beta2 = doc.value("beta2", c.beta2);
  c.adam_epsilon = doc.value("adam_epsilon", c.adam_epsilon);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.epochs = doc.value("epochs", c.epochs);
  c.seed = doc.value("seed", c.seed);
  c.validation_fraction = doc.value("validation_fraction", c.validation_fraction);
  c.patience = doc.value("patience", c.patience);
  c.threads = doc.value("threads", c.threads);
  c.validate();
  return c;
}

TrainingConfig fine_tune_defaults() {
  TrainingConfig c;
  c.learning_rate = 3e-4;
  c.epochs = 40;
  return c;
}

ResultCode predicted_code(const std::array<double, 4>& pv) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (pv[i] > pv[best]) best = i;
  return code_at(best);
}

std::optional<std::size_t> CCDT::index_of(std::string_view rule_id) const {
  for (std::size_t i = 0; i < rule_ids.size(); ++i)
    if (rule_ids[i] == rule_id) return i;
  return std::nullopt;
}

const Module<float>& CCDT::module(std::string_view rule_id) const {
  auto i = index_of(rule_id);
  if (!i) throw ConfigError("model has no module for rule " + std::string(rule_id));
  return modules[*i];
}

std::uint64_t module_seed(std::uint64_t seed, std::string_view rule_id) {
  return derive_seed(seed, "module:" + std::string(rule_id));
}

CCDT make_ccdt(EncoderConfig encoder, std::vector<std::string> rule_ids, std::string version, std::uint64_t seed,
               const ArchConfig& arch) {
  CCDT m;
  m.encoder = std::move(encoder);
  m.arch = arch;
  m.version = std::move(version);
  m.seed = seed;
  m.rule_ids = std::move(rule_ids);
  for (const auto& id : m.rule_ids) {
    m.modules.push_back(init_module(module_seed(seed, id), m.encoder.branch1_length, m.encoder.branch2_length, arch));
  }
  m.loss_curves.assign(m.rule_ids.size(), {});
  return m;
}

namespace {

struct Split {
  std::vector<std::size_t> train, validation;
};

Split split_indices(std::size_t n, const TrainingConfig& cfg) {
  Split s;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
  if (cfg.validation_fraction <= 0.0 || n_val == 0 || n_val >= n) {
    s.train = std::move(idx);
    return s;
  }
  Rng rng(derive_seed(cfg.seed, "validation-split"));
  shuffle(idx.begin(), idx.end(), rng);
  s.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

double sample_loss(const std::array<double, 4>& probs, std::size_t target) {
  return -std::log(std::max(probs[target], 1e-300));
}

struct ModuleResult {
  std::vector<double> curve;
  std::size_t epochs_run = 0;
};

ModuleResult train_module(Module<float>& module, const std::vector<FeatureVector>& features,
                          const std::vector<std::size_t>& targets, const Split& split, const TrainingConfig& cfg,
                          const std::string& rule_id) {
  ModuleResult out;
  if (cfg.epochs == 0 || split.train.empty()) return out;
  const std::size_t np = module.params.size();
  std::vector<float> grad(np), m(np, 0.0f), v(np, 0.0f);
  Workspace<float> ws;
  std::vector<float> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::uint64_t step = 0;
  const bool early_stop = !split.validation.empty();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = split.train;
    Rng rng(derive_seed(cfg.seed, "epoch:" + std::to_string(epoch)));
    shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const float scale = 1.0f / static_cast<float>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0f);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& fv = features[order[k]];
        auto probs = forward(module, fv.branch1, fv.branch2, ws);
        batch_loss += sample_loss(probs, targets[order[k]]);
        backward(module, ws, targets[order[k]], scale, grad);
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss for rule " << rule_id << " (lr=" << cfg.learning_rate << ", epoch " << epoch
            << ", batch " << batch_index << ")";
        throw TrainingError(msg.str());
      }
      epoch_loss += batch_loss;
      ++step;
      const double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      const auto lr_t = static_cast<float>(cfg.learning_rate * std::sqrt(b2t) / b1t);
      const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
      const auto eps = static_cast<float>(cfg.adam_epsilon);
      float* p = module.params.data();
      for (std::size_t i = 0; i < np; ++i) {
        const float g = grad[i];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
      }
    }
    out.curve.push_back(epoch_loss / static_cast<double>(order.size()));
    out.epochs_run = epoch + 1;

    if (early_stop) {
      double val = 0.0;
      for (auto i : split.validation) {
        val += sample_loss(forward(module, features[i].branch1, features[i].branch2, ws), targets[i]);
      }
      val /= static_cast<double>(split.validation.size());
      if (val < best_val) {
        best_val = val;
        best_params = module.params;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (early_stop && !best_params.empty()) module.params = std::move(best_params);
  return out;
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

TrainingSummary train(CCDT& model, const LabelledDataset& data, const TrainingConfig& cfg) {
  cfg.validate();
  check_encoder_schema(model.encoder, *data.data.schema);
  std::vector<std::size_t> module_of(data.rule_ids.size());
  for (std::size_t r = 0; r < data.rule_ids.size(); ++r) {
    auto idx = model.index_of(data.rule_ids[r]);
    if (!idx) throw ConfigError("labelled rule " + data.rule_ids[r] + " has no module in the model");
    module_of[r] = *idx;
  }
  TrainingSummary summary;
  summary.rule_ids = data.rule_ids;
  summary.epochs_run.assign(data.rule_ids.size(), 0);
  summary.final_loss.assign(data.rule_ids.size(), std::numeric_limits<double>::quiet_NaN());
  if (cfg.epochs == 0 || data.size() == 0) return summary;

  const auto features = encode_dataset(data.data, model.encoder);
  const Split split = split_indices(data.size(), cfg);

  parallel_for(data.rule_ids.size(), cfg.threads, [&](std::size_t r) {
    std::vector<std::size_t> targets(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) targets[i] = index_of(data.labels[i][r]);
    auto result = train_module(model.modules[module_of[r]], features, targets, split, cfg, data.rule_ids[r]);
    summary.epochs_run[r] = result.epochs_run;
    if (!result.curve.empty()) summary.final_loss[r] = result.curve.back();
    model.loss_curves[module_of[r]] = std::move(result.curve);
  });
  model.metadata["training"] = training_to_json(cfg);
  return summary;
}

CCDT fine_tune(const CCDT& source, const RuleSet& target_rules, const RuleSetDiff& diff,
               const LabelledDataset& evolution_data, const FineTuneOptions& options) {
  for (const auto& id : target_rules.ids()) {
    if (!evolution_data.rule_index(id)) throw ConfigError("evolution data has no labels for target rule " + id);
  }
  auto listed = [](const std::vector<std::string>& ids, const std::string& id) {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
  };
  CCDT out;
  out.encoder = source.encoder;
  out.arch = source.arch;
  out.version = target_rules.version();
  out.seed = options.training.seed;
  out.metadata = Json::object();
  out.metadata["source_version"] = source.version;
  Json init = Json::object();
  for (const auto& id : target_rules.ids()) {
    const bool warm = listed(diff.retained_ids, id) || (listed(diff.modified_ids, id) && !options.modified_from_scratch);
    auto src = source.index_of(id);
    out.rule_ids.push_back(id);
    if (warm && src) {
      out.modules.push_back(source.modules[*src]);
      init[id] = "warm";
    } else {
      out.modules.push_back(init_module(module_seed(out.seed, id), out.encoder.branch1_length,
                                        out.encoder.branch2_length, out.arch));
      init[id] = "scratch";
    }
  }
  out.loss_curves.assign(out.rule_ids.size(), {});
  out.metadata["initialisation"] = std::move(init);

  // Only the target's rules are trained, in target order.
  std::vector<std::size_t> cols;
  for (const auto& id : out.rule_ids) cols.push_back(*evolution_data.rule_index(id));
  LabelledDataset data{evolution_data.data, out.rule_ids, {}};
  data.labels.reserve(evolution_data.size());
  for (const auto& row : evolution_data.labels) {
    std::vector<ResultCode> r;
    for (auto c : cols) r.push_back(row[c]);
    data.labels.push_back(std::move(r));
  }
  train(out, data, options.training);
  out.metadata["fine_tune"] = training_to_json(options.training);
  out.metadata["modified_from_scratch"] = options.modified_from_scratch;
  return out;
}

CCDT extend_untrained(const CCDT& source, const RuleSet& target_rules) {
  CCDT out;
  out.encoder = source.encoder;
  out.arch = source.arch;
  out.version = target_rules.version();
  out.seed = source.seed;
  out.metadata = Json::object();
  out.metadata["source_version"] = source.version;
  for (const auto& id : target_rules.ids()) {
    out.rule_ids.push_back(id);
    if (auto src = source.index_of(id)) {
      out.modules.push_back(source.modules[*src]);
    } else {
      out.modules.push_back(init_module(module_seed(derive_seed(source.seed, "untrained"), id),
                                        out.encoder.branch1_length, out.encoder.branch2_length, out.arch));
    }
  }
  out.loss_curves.assign(out.rule_ids.size(), {});
  return out;
}

std::array<double, 4> predict_module(const Module<float>& module, const FeatureVector& fv, Workspace<float>& ws) {
  return forward(module, fv.branch1, fv.branch2, ws);
}

Prediction predict(const CCDT& model, const FeatureVector& fv) {
  Workspace<float> ws;
  Prediction out;
  out.reserve(model.size());
  for (const auto& m : model.modules) out.push_back(forward(m, fv.branch1, fv.branch2, ws));
  return out;
}

Prediction predict(const CCDT& model, const CancerMessage& message) {
  return predict(model, encode_message(message, model.encoder));
}

std::vector<Prediction> predict_batch(const CCDT& model, const Dataset& data) {
  check_encoder_schema(model.encoder, *data.schema);
  const auto features = encode_dataset(data, model.encoder);
  std::vector<Prediction> out(data.size());
  Workspace<float> ws;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i].reserve(model.size());
    for (const auto& m : model.modules) out[i].push_back(forward(m, features[i].branch1, features[i].branch2, ws));
  }
  return out;
}

std::vector<std::vector<ResultCode>> predicted_codes(const std::vector<Prediction>& predictions) {
  std::vector<std::vector<ResultCode>> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    std::vector<ResultCode> row;
    row.reserve(p.size());
    for (const auto& pv : p) row.push_back(predicted_code(pv));
    out.push_back(std::move(row));
  }
  return out;
}

GradientCheckResult gradient_check(const Module<float>& module, const FeatureVector& fv, std::size_t target,
                                   double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) throw ConfigError("gradient check epsilon must be in [1e-6, 1e-3]");
  using T = long double;
  auto m = convert_module<T>(module);
  Workspace<T> ws;
  forward(m, fv.branch1, fv.branch2, ws);
  const auto pattern = ws.activation_pattern();
  std::vector<T> analytic(m.params.size(), T(0));
  backward(m, ws, target, T(1), analytic);

  GradientCheckResult res;
  const T eps = epsilon;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const T saved = m.params[i];
    m.params[i] = saved + eps;
    forward(m, fv.branch1, fv.branch2, ws);
    bool kink = ws.activation_pattern() != pattern;
    const T plus = cross_entropy(ws.logits, target);
    m.params[i] = saved - eps;
    forward(m, fv.branch1, fv.branch2, ws);
    kink = kink || ws.activation_pattern() != pattern;
    const T minus = cross_entropy(ws.logits, target);
    m.params[i] = saved;
    if (kink) {
      ++res.skipped;
      continue;
    }
    const T numeric = (plus - minus) / (2 * eps);
    const T ga = analytic[i];
    const T denom = std::max({std::fabs(ga), std::fabs(numeric), T(1e-8)});
    res.max_rel_error = std::max(res.max_rel_error, static_cast<double>(std::fabs(ga - numeric) / denom));
    ++res.checked;
  }
  return res;
}

}  // namespace ccdt
