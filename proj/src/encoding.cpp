#include "ccdt/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "ccdt/error.hpp"

namespace ccdt {

EncoderConfig make_encoder(const MessageSchema& schema, std::size_t d_text) {
  if (d_text < 8) throw ConfigError("d_text must be >= 8");
  EncoderConfig cfg;
  cfg.d_text = d_text;
  for (const auto& f : schema.fields()) {
    EncoderConfig::FieldEncoder fe;
    fe.name = f.name;
    fe.kind = f.kind;
    switch (f.kind) {
      case FieldKind::categorical:
        fe.vocab = f.domain;
        cfg.branch1_length += f.domain.size();
        break;
      case FieldKind::numerical:
        fe.min = f.min;
        fe.max = f.max;
        cfg.branch1_length += 1;
        break;
      case FieldKind::textual: cfg.branch2_length += d_text; break;
    }
    cfg.fields.push_back(std::move(fe));
  }
  return cfg;
}

EncoderConfig fit_encoder(const MessageSchema& schema, const Dataset& dataset, std::size_t d_text) {
  if (dataset.messages.empty()) throw ConfigError("fit_encoder: dataset is empty");
  return make_encoder(schema, d_text);
}

std::vector<float> encode_onehot(std::string_view value, const std::vector<std::string>& vocab, std::string_view field) {
  std::vector<float> out(vocab.size(), 0.0f);
  auto it = std::find(vocab.begin(), vocab.end(), value);
  if (it == vocab.end())
    throw SchemaError("field '" + std::string(field) + "': value '" + std::string(value) + "' not in vocabulary");
  out[static_cast<std::size_t>(it - vocab.begin())] = 1.0f;
  return out;
}

double normalize_numeric(double v, double min, double max) {
  double x = (v - min) / (max - min);
  return std::clamp(x, 0.0, 1.0);
}

std::vector<float> encode_text(std::string_view s, std::size_t d_text) {
  if (d_text < 8) throw ConfigError("d_text must be >= 8");
  std::vector<double> acc(d_text, 0.0);
  if (!s.empty()) {
    std::string framed;
    framed.reserve(s.size() + 2);
    framed += '\x02';
    framed += s;
    framed += '\x03';
    for (std::size_t i = 0; i + 3 <= framed.size(); ++i) {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (std::size_t k = i; k < i + 3; ++k) {
        h ^= static_cast<unsigned char>(framed[k]);
        h *= 0x100000001b3ULL;
      }
      double sign = (h >> 63) ? -1.0 : 1.0;
      acc[(h & 0x7fffffffffffffffULL) % d_text] += sign;
    }
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(d_text, 0.0f);
  if (norm > 0.0)
    for (std::size_t i = 0; i < d_text; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

FeatureVector encode_message(const CancerMessage& message, const EncoderConfig& config) {
  if (message.values.size() != config.fields.size())
    throw ShapeError("message has " + std::to_string(message.values.size()) + " values, encoder expects " +
                     std::to_string(config.fields.size()));
  FeatureVector fv;
  fv.branch1.reserve(config.branch1_length);
  fv.branch2.reserve(config.branch2_length);
  for (std::size_t i = 0; i < config.fields.size(); ++i) {
    const auto& fe = config.fields[i];
    const auto& v = message.values[i];
    switch (fe.kind) {
      case FieldKind::categorical: {
        const auto* s = std::get_if<std::string>(&v);
        if (!s) throw SchemaError("field '" + fe.name + "': expected a categorical string");
        auto oh = encode_onehot(*s, fe.vocab, fe.name);
        fv.branch1.insert(fv.branch1.end(), oh.begin(), oh.end());
        break;
      }
      case FieldKind::numerical: {
        const auto* d = std::get_if<double>(&v);
        if (!d) throw SchemaError("field '" + fe.name + "': expected a number");
        fv.branch1.push_back(static_cast<float>(normalize_numeric(*d, fe.min, fe.max)));
        break;
      }
      case FieldKind::textual: {
        const auto* s = std::get_if<std::string>(&v);
        if (!s) throw SchemaError("field '" + fe.name + "': expected a string");
        auto e = encode_text(*s, config.d_text);
        fv.branch2.insert(fv.branch2.end(), e.begin(), e.end());
        break;
      }
    }
  }
  return fv;
}

std::vector<FeatureVector> encode_dataset(const Dataset& dataset, const EncoderConfig& config) {
  std::vector<FeatureVector> out;
  out.reserve(dataset.size());
  for (const auto& m : dataset.messages) out.push_back(encode_message(m, config));
  return out;
}

void check_encoder_schema(const EncoderConfig& config, const MessageSchema& schema) {
  if (config.fields.size() != schema.nv())
    throw SchemaError("model expects " + std::to_string(config.fields.size()) + " fields, schema has " +
                      std::to_string(schema.nv()));
  for (std::size_t i = 0; i < schema.nv(); ++i) {
    const auto& fe = config.fields[i];
    const auto& f = schema.field(i);
    if (fe.name != f.name || fe.kind != f.kind) throw SchemaError("model field " + std::to_string(i) + " ('" + fe.name + "') does not match schema field '" + f.name + "'");
    if (f.kind == FieldKind::categorical && fe.vocab != f.domain)
      throw SchemaError("field '" + f.name + "': vocabulary differs from schema domain");
    if (f.kind == FieldKind::numerical && (fe.min != f.min || fe.max != f.max))
      throw SchemaError("field '" + f.name + "': numeric range differs from schema");
  }
}

Json encoder_to_json(const EncoderConfig& config) {
  Json fields = Json::array();
  for (const auto& fe : config.fields) {
    Json jf;
    jf["name"] = fe.name;
    jf["kind"] = to_string(fe.kind);
    if (fe.kind == FieldKind::categorical) jf["vocab"] = fe.vocab;
    if (fe.kind == FieldKind::numerical) {
      jf["min"] = fe.min;
      jf["max"] = fe.max;
    }
    fields.push_back(std::move(jf));
  }
  Json doc;
  doc["d_text"] = config.d_text;
  doc["branch1_length"] = config.branch1_length;
  doc["branch2_length"] = config.branch2_length;
  doc["fields"] = std::move(fields);
  return doc;
}

EncoderConfig encoder_from_json(const Json& doc) {
  try {
    EncoderConfig cfg;
    cfg.d_text = doc.at("d_text").get<std::size_t>();
    cfg.branch1_length = doc.at("branch1_length").get<std::size_t>();
    cfg.branch2_length = doc.at("branch2_length").get<std::size_t>();
    std::size_t l1 = 0, l2 = 0;
    for (const auto& jf : doc.at("fields")) {
      EncoderConfig::FieldEncoder fe;
      fe.name = jf.at("name").get<std::string>();
      auto kind = jf.at("kind").get<std::string>();
      if (kind == "categorical") {
        fe.kind = FieldKind::categorical;
        fe.vocab = jf.at("vocab").get<std::vector<std::string>>();
        l1 += fe.vocab.size();
      } else if (kind == "numerical") {
        fe.kind = FieldKind::numerical;
        fe.min = jf.at("min").get<double>();
        fe.max = jf.at("max").get<double>();
        l1 += 1;
      } else if (kind == "textual") {
        fe.kind = FieldKind::textual;
        l2 += cfg.d_text;
      } else {
        throw FormatError("encoder: unknown field kind '" + kind + "'");
      }
      cfg.fields.push_back(std::move(fe));
    }
    if (l1 != cfg.branch1_length || l2 != cfg.branch2_length) throw FormatError("encoder: branch lengths inconsistent with fields");
    return cfg;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("encoder config: ") + e.what());
  }
}

}  // namespace ccdt
