#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ccdt/json.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

/// How each schema field is turned into numbers. Vocabularies and ranges are
/// taken from the schema so configs are stable across data sets and versions.
struct EncoderConfig {
  struct FieldEncoder {
    std::string name;
    FieldKind kind = FieldKind::categorical;
    std::vector<std::string> vocab;  // categorical, in index order
    double min = 0.0, max = 1.0;     // numerical
    bool operator==(const FieldEncoder&) const = default;
  };

  std::vector<FieldEncoder> fields;  // schema order
  std::size_t d_text = 64;
  std::size_t branch1_length = 0;  // one-hot widths + numeric count
  std::size_t branch2_length = 0;  // d_text * textual count

  bool operator==(const EncoderConfig&) const = default;
};

/// Inputs of the two CNN branches.
struct FeatureVector {
  std::vector<float> branch1;  // categorical one-hots and scaled numerics, all in [0, 1]
  std::vector<float> branch2;  // text embeddings
};

inline constexpr std::size_t kDefaultTextDim = 64;

/// `dataset` must be non-empty; only its schema is consulted.
EncoderConfig fit_encoder(const MessageSchema& schema, const Dataset& dataset, std::size_t d_text = kDefaultTextDim);
EncoderConfig make_encoder(const MessageSchema& schema, std::size_t d_text = kDefaultTextDim);

/// Throws SchemaError naming the field/value when `value` is outside `vocab`.
std::vector<float> encode_onehot(std::string_view value, const std::vector<std::string>& vocab,
                                 std::string_view field = {});

/// (v - min) / (max - min), clamped to [0, 1].
double normalize_numeric(double v, double min, double max);

/// Signed character-trigram feature hashing into `d_text` buckets followed by
/// L2 normalisation. The string is framed with start/end markers, so only
/// the empty string maps to the zero vector. Requires d_text >= 8.
std::vector<float> encode_text(std::string_view s, std::size_t d_text);

FeatureVector encode_message(const CancerMessage& message, const EncoderConfig& config);
std::vector<FeatureVector> encode_dataset(const Dataset& dataset, const EncoderConfig& config);

/// Throws SchemaError unless the config was built for `schema`.
void check_encoder_schema(const EncoderConfig& config, const MessageSchema& schema);

Json encoder_to_json(const EncoderConfig& config);
EncoderConfig encoder_from_json(const Json& doc);

}  // namespace ccdt
