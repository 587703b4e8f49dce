#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ccdt/json.hpp"

namespace ccdt {

/// Two-branch 1-D CNN module shape. Each branch: conv(f0) -> conv(f1) ->
/// maxpool(2) -> conv(f2) -> conv(f3) -> flatten -> dense; the two dense
/// outputs are concatenated -> dense(head) -> dense(4) -> softmax. Convs use
/// `kernel`-wide "same" padding, stride 1; hidden layers use ReLU.
struct ArchConfig {
  std::array<std::size_t, 4> filters{16, 32, 64, 64};
  std::size_t kernel = 3;
  std::size_t dense = 200;
  std::size_t head = 64;

  bool operator==(const ArchConfig&) const = default;
};

Json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const Json& doc);

/// Where each layer's weights and biases live in the flat parameter vector.
struct ParamLayout {
  struct Layer {
    std::size_t weight_offset = 0, weight_size = 0;
    std::size_t bias_offset = 0, bias_size = 0;
    std::size_t fan_in = 0;
    bool operator==(const Layer&) const = default;
  };
  // branch layers: 4 convs then the dense layer
  std::array<std::array<Layer, 5>, 2> branch{};
  Layer head_hidden;
  Layer head_out;
  std::array<std::size_t, 2> length{};         // input length per branch
  std::array<std::size_t, 2> pooled_length{};  // length after pooling
  std::size_t total = 0;

  static ParamLayout build(const ArchConfig& arch, std::size_t l1, std::size_t l2);
  std::vector<Layer> layers() const;
  bool operator==(const ParamLayout&) const = default;
};

/// Minimum branch input length the architecture accepts.
std::size_t min_input_length(const ArchConfig& arch);

/// Parameters of one per-rule prediction module, stored flat.
template <class T>
struct Module {
  ArchConfig arch;
  ParamLayout layout;
  std::vector<T> params;

  std::size_t length1() const { return layout.length[0]; }
  std::size_t length2() const { return layout.length[1]; }
  bool operator==(const Module&) const = default;
};

/// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases. Throws
/// ShapeError when an input is shorter than min_input_length(arch).
Module<float> init_module(std::uint64_t seed, std::size_t l1, std::size_t l2, const ArchConfig& arch = {});

template <class To, class From>
Module<To> convert_module(const Module<From>& m) {
  Module<To> out{m.arch, m.layout, std::vector<To>(m.params.begin(), m.params.end())};
  return out;
}

/// Activations kept from the forward pass for backpropagation.
template <class T>
struct Workspace {
  struct Branch {
    std::vector<T> input, a1, a2, pooled, a3, a4, dense;
    std::vector<std::uint32_t> pool_index;
  };
  std::array<Branch, 2> branch;
  std::vector<T> concat, hidden;
  std::array<T, 4> logits{};  // kept in T so finite differences see full precision
  std::array<double, 4> probs{};

  // backward scratch
  std::vector<T> g_concat, g_hidden, g_dense, g_a4, g_a3, g_pooled, g_a2, g_a1;

  /// ReLU on/off bits and pooling choices; used to detect kinks.
  std::vector<std::uint8_t> activation_pattern() const;
};

/// Softmax probabilities (computed in double) for one input pair.
template <class T>
std::array<double, 4> forward(const Module<T>& m, std::span<const float> branch1, std::span<const float> branch2,
                              Workspace<T>& ws);

/// Adds scale * d(-log p[target])/d(params) into `grad` (same size as params).
/// Requires `ws` to hold the forward pass of the same input.
template <class T>
void backward(const Module<T>& m, Workspace<T>& ws, std::size_t target, T scale, std::vector<T>& grad);

/// Softmax of arbitrary logits, stabilised by the maximum.
std::array<double, 4> softmax(const std::array<double, 4>& logits);

/// -log softmax(logits)[target], computed in T.
template <class T>
T cross_entropy(const std::array<T, 4>& logits, std::size_t target);

}  // namespace ccdt
