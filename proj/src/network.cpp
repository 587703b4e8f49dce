#include "ccdt/network.hpp"

#include <algorithm>
#include <cmath>

#include "ccdt/error.hpp"
#include "ccdt/random.hpp"

namespace ccdt {

Json arch_to_json(const ArchConfig& arch) {
  Json j;
  j["filters"] = arch.filters;
  j["kernel"] = arch.kernel;
  j["dense"] = arch.dense;
  j["head"] = arch.head;
  return j;
}

ArchConfig arch_from_json(const Json& doc) {
  ArchConfig a;
  reject_unknown_keys(doc, arch_to_json(a), "arch");
  try {
    a.filters = doc.at("filters").get<std::array<std::size_t, 4>>();
    a.kernel = doc.at("kernel").get<std::size_t>();
    a.dense = doc.at("dense").get<std::size_t>();
    a.head = doc.at("head").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("architecture: ") + e.what());
  }
  return a;
}

std::size_t min_input_length(const ArchConfig& arch) { return std::max<std::size_t>(arch.kernel, 2); }

ParamLayout ParamLayout::build(const ArchConfig& arch, std::size_t l1, std::size_t l2) {
  if (arch.kernel == 0 || arch.kernel % 2 == 0) throw ConfigError("kernel width must be odd");
  for (auto f : arch.filters)
    if (f == 0) throw ConfigError("filter counts must be positive");
  if (arch.dense == 0 || arch.head == 0) throw ConfigError("dense and head widths must be positive");
  ParamLayout p;
  p.length = {l1, l2};
  std::size_t need = min_input_length(arch);
  for (std::size_t b = 0; b < 2; ++b) {
    if (p.length[b] < need)
      throw ShapeError("branch " + std::to_string(b + 1) + " input length " + std::to_string(p.length[b]) +
                       " is shorter than the minimum " + std::to_string(need));
  }
  std::size_t off = 0;
  auto add = [&](std::size_t w, std::size_t bsz, std::size_t fan_in) {
    Layer l{off, w, off + w, bsz, fan_in};
    off += w + bsz;
    return l;
  };
  for (std::size_t b = 0; b < 2; ++b) {
    p.pooled_length[b] = p.length[b] / 2;
    std::size_t cin = 1;
    for (std::size_t i = 0; i < 4; ++i) {
      std::size_t cout = arch.filters[i];
      p.branch[b][i] = add(cout * cin * arch.kernel, cout, cin * arch.kernel);
      cin = cout;
    }
    std::size_t flat = arch.filters[3] * p.pooled_length[b];
    p.branch[b][4] = add(arch.dense * flat, arch.dense, flat);
  }
  p.head_hidden = add(arch.head * 2 * arch.dense, arch.head, 2 * arch.dense);
  p.head_out = add(4 * arch.head, 4, arch.head);
  p.total = off;
  return p;
}

std::vector<ParamLayout::Layer> ParamLayout::layers() const {
  std::vector<Layer> out;
  for (const auto& br : branch) out.insert(out.end(), br.begin(), br.end());
  out.push_back(head_hidden);
  out.push_back(head_out);
  return out;
}

Module<float> init_module(std::uint64_t seed, std::size_t l1, std::size_t l2, const ArchConfig& arch) {
  Module<float> m{arch, ParamLayout::build(arch, l1, l2), {}};
  m.params.assign(m.layout.total, 0.0f);
  Rng rng(seed);
  for (const auto& layer : m.layout.layers()) {
    double bound = std::sqrt(6.0 / static_cast<double>(layer.fan_in));
    for (std::size_t i = 0; i < layer.weight_size; ++i)
      m.params[layer.weight_offset + i] = static_cast<float>(uniform_real(rng, -bound, bound));
  }
  return m;
}

std::array<double, 4> softmax(const std::array<double, 4>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::array<double, 4> p{};
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <class T>
T cross_entropy(const std::array<T, 4>& logits, std::size_t target) {
  T mx = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (auto z : logits) sum += std::exp(z - mx);
  return mx + std::log(sum) - logits[target];
}

namespace {

// ---- kernels -----------------------------------------------------------------
// Tensors are channel-major: x[c * L + t].

template <class T>
void conv_forward(const T* __restrict x, std::size_t cin, std::size_t len, const T* __restrict w, const T* __restrict bias,
                  std::size_t cout, std::size_t k, T* __restrict y) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto L = static_cast<std::ptrdiff_t>(len);
  for (std::size_t o = 0; o < cout; ++o) {
    T* yo = y + o * len;
    std::fill(yo, yo + len, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const T* xc = x + c * len;
      const T* wk = w + (o * cin + c) * k;
      for (std::size_t j = 0; j < k; ++j) {
        const T wv = wk[j];
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(L, L - shift);
        const T* xs = xc + shift;
        for (std::ptrdiff_t t = t0; t < t1; ++t) yo[t] += wv * xs[t];
      }
    }
    for (std::size_t t = 0; t < len; ++t) yo[t] = yo[t] > T(0) ? yo[t] : T(0);
  }
}

// dy must already be masked by the ReLU derivative. gx may be null.
template <class T>
void conv_backward(const T* __restrict x, std::size_t cin, std::size_t len, const T* __restrict w, std::size_t cout,
                   std::size_t k, const T* __restrict dy, T* __restrict gw, T* __restrict gb, T* __restrict gx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto L = static_cast<std::ptrdiff_t>(len);
  if (gx) std::fill(gx, gx + cin * len, T(0));
  for (std::size_t o = 0; o < cout; ++o) {
    const T* dyo = dy + o * len;
    T s = 0;
    for (std::size_t t = 0; t < len; ++t) s += dyo[t];
    gb[o] += s;
    for (std::size_t c = 0; c < cin; ++c) {
      const T* xc = x + c * len;
      const T* wk = w + (o * cin + c) * k;
      T* gwk = gw + (o * cin + c) * k;
      T* gxc = gx ? gx + c * len : nullptr;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(L, L - shift);
        const T* xs = xc + shift;
        T acc = 0;
        for (std::ptrdiff_t t = t0; t < t1; ++t) acc += dyo[t] * xs[t];
        gwk[j] += acc;
        if (gxc) {
          const T wv = wk[j];
          T* gxs = gxc + shift;
          for (std::ptrdiff_t t = t0; t < t1; ++t) gxs[t] += wv * dyo[t];
        }
      }
    }
  }
}

template <class T>
void dense_forward(const T* __restrict x, std::size_t in, const T* __restrict w, const T* __restrict bias, std::size_t out,
                   T* __restrict y, bool relu) {
  for (std::size_t j = 0; j < out; ++j) {
    const T* wj = w + j * in;
    T acc = 0;
    for (std::size_t i = 0; i < in; ++i) acc += wj[i] * x[i];
    acc += bias[j];
    y[j] = (relu && acc < T(0)) ? T(0) : acc;
  }
}

template <class T>
void dense_backward(const T* __restrict x, std::size_t in, const T* __restrict w, std::size_t out, const T* __restrict dy,
                    T* __restrict gw, T* __restrict gb, T* __restrict gx) {
  if (gx) std::fill(gx, gx + in, T(0));
  for (std::size_t j = 0; j < out; ++j) {
    const T d = dy[j];
    if (d == T(0)) continue;
    gb[j] += d;
    T* gwj = gw + j * in;
    for (std::size_t i = 0; i < in; ++i) gwj[i] += d * x[i];
    if (gx) {
      const T* wj = w + j * in;
      for (std::size_t i = 0; i < in; ++i) gx[i] += d * wj[i];
    }
  }
}

template <class T>
void relu_mask(const T* y, T* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(y[i] > T(0))) g[i] = T(0);
}

template <class T>
void branch_forward(const Module<T>& m, std::size_t b, std::span<const float> input, typename Workspace<T>::Branch& ws) {
  const auto& a = m.arch;
  const auto& lay = m.layout.branch[b];
  const std::size_t L = m.layout.length[b];
  const std::size_t P = m.layout.pooled_length[b];
  const T* p = m.params.data();
  if (input.size() != L)
    throw ShapeError("branch " + std::to_string(b + 1) + " expects length " + std::to_string(L) + ", got " +
                     std::to_string(input.size()));
  ws.input.assign(input.begin(), input.end());
  ws.a1.resize(a.filters[0] * L);
  ws.a2.resize(a.filters[1] * L);
  ws.pooled.resize(a.filters[1] * P);
  ws.pool_index.resize(a.filters[1] * P);
  ws.a3.resize(a.filters[2] * P);
  ws.a4.resize(a.filters[3] * P);
  ws.dense.resize(a.dense);

  conv_forward(ws.input.data(), 1, L, p + lay[0].weight_offset, p + lay[0].bias_offset, a.filters[0], a.kernel, ws.a1.data());
  conv_forward(ws.a1.data(), a.filters[0], L, p + lay[1].weight_offset, p + lay[1].bias_offset, a.filters[1], a.kernel,
               ws.a2.data());
  for (std::size_t c = 0; c < a.filters[1]; ++c) {
    for (std::size_t t = 0; t < P; ++t) {
      std::size_t i0 = c * L + 2 * t;
      bool second = ws.a2[i0 + 1] > ws.a2[i0];
      ws.pooled[c * P + t] = second ? ws.a2[i0 + 1] : ws.a2[i0];
      ws.pool_index[c * P + t] = static_cast<std::uint32_t>(i0 + (second ? 1 : 0));
    }
  }
  conv_forward(ws.pooled.data(), a.filters[1], P, p + lay[2].weight_offset, p + lay[2].bias_offset, a.filters[2], a.kernel,
               ws.a3.data());
  conv_forward(ws.a3.data(), a.filters[2], P, p + lay[3].weight_offset, p + lay[3].bias_offset, a.filters[3], a.kernel,
               ws.a4.data());
  dense_forward(ws.a4.data(), a.filters[3] * P, p + lay[4].weight_offset, p + lay[4].bias_offset, a.dense, ws.dense.data(),
                true);
}

template <class T>
void branch_backward(const Module<T>& m, std::size_t b, Workspace<T>& ws, const T* g_dense_in, std::vector<T>& grad) {
  const auto& a = m.arch;
  const auto& lay = m.layout.branch[b];
  const std::size_t L = m.layout.length[b];
  const std::size_t P = m.layout.pooled_length[b];
  const T* p = m.params.data();
  T* g = grad.data();
  auto& br = ws.branch[b];

  ws.g_dense.assign(g_dense_in, g_dense_in + a.dense);
  relu_mask(br.dense.data(), ws.g_dense.data(), a.dense);
  ws.g_a4.resize(a.filters[3] * P);
  dense_backward(br.a4.data(), a.filters[3] * P, p + lay[4].weight_offset, a.dense, ws.g_dense.data(),
                 g + lay[4].weight_offset, g + lay[4].bias_offset, ws.g_a4.data());

  relu_mask(br.a4.data(), ws.g_a4.data(), ws.g_a4.size());
  ws.g_a3.resize(a.filters[2] * P);
  conv_backward(br.a3.data(), a.filters[2], P, p + lay[3].weight_offset, a.filters[3], a.kernel, ws.g_a4.data(),
                g + lay[3].weight_offset, g + lay[3].bias_offset, ws.g_a3.data());

  relu_mask(br.a3.data(), ws.g_a3.data(), ws.g_a3.size());
  ws.g_pooled.resize(a.filters[1] * P);
  conv_backward(br.pooled.data(), a.filters[1], P, p + lay[2].weight_offset, a.filters[2], a.kernel, ws.g_a3.data(),
                g + lay[2].weight_offset, g + lay[2].bias_offset, ws.g_pooled.data());

  ws.g_a2.assign(a.filters[1] * L, T(0));
  for (std::size_t i = 0; i < ws.g_pooled.size(); ++i) ws.g_a2[br.pool_index[i]] += ws.g_pooled[i];
  relu_mask(br.a2.data(), ws.g_a2.data(), ws.g_a2.size());
  ws.g_a1.resize(a.filters[0] * L);
  conv_backward(br.a1.data(), a.filters[0], L, p + lay[1].weight_offset, a.filters[1], a.kernel, ws.g_a2.data(),
                g + lay[1].weight_offset, g + lay[1].bias_offset, ws.g_a1.data());

  relu_mask(br.a1.data(), ws.g_a1.data(), ws.g_a1.size());
  conv_backward<T>(br.input.data(), 1, L, p + lay[0].weight_offset, a.filters[0], a.kernel, ws.g_a1.data(),
                   g + lay[0].weight_offset, g + lay[0].bias_offset, nullptr);
}

}  // namespace

template <class T>
std::vector<std::uint8_t> Workspace<T>::activation_pattern() const {
  std::vector<std::uint8_t> out;
  auto bits = [&](const std::vector<T>& v) {
    for (const auto& x : v) out.push_back(x > T(0) ? 1 : 0);
  };
  for (const auto& br : branch) {
    bits(br.a1);
    bits(br.a2);
    for (auto i : br.pool_index) out.push_back(static_cast<std::uint8_t>(i & 1));
    bits(br.a3);
    bits(br.a4);
    bits(br.dense);
  }
  bits(hidden);
  return out;
}

template <class T>
std::array<double, 4> forward(const Module<T>& m, std::span<const float> branch1, std::span<const float> branch2,
                              Workspace<T>& ws) {
  branch_forward(m, 0, branch1, ws.branch[0]);
  branch_forward(m, 1, branch2, ws.branch[1]);
  const auto& a = m.arch;
  const T* p = m.params.data();
  ws.concat.resize(2 * a.dense);
  std::copy(ws.branch[0].dense.begin(), ws.branch[0].dense.end(), ws.concat.begin());
  std::copy(ws.branch[1].dense.begin(), ws.branch[1].dense.end(), ws.concat.begin() + static_cast<std::ptrdiff_t>(a.dense));
  ws.hidden.resize(a.head);
  dense_forward(ws.concat.data(), 2 * a.dense, p + m.layout.head_hidden.weight_offset, p + m.layout.head_hidden.bias_offset,
                a.head, ws.hidden.data(), true);
  dense_forward(ws.hidden.data(), a.head, p + m.layout.head_out.weight_offset, p + m.layout.head_out.bias_offset, 4,
                ws.logits.data(), false);
  std::array<double, 4> z{};
  for (std::size_t i = 0; i < 4; ++i) z[i] = static_cast<double>(ws.logits[i]);
  ws.probs = softmax(z);
  return ws.probs;
}

template <class T>
void backward(const Module<T>& m, Workspace<T>& ws, std::size_t target, T scale, std::vector<T>& grad) {
  if (grad.size() != m.params.size()) throw ShapeError("gradient buffer size mismatch");
  if (target >= 4) throw ShapeError("target code out of range");
  const auto& a = m.arch;
  const T* p = m.params.data();
  T* g = grad.data();
  T g_logits[4];
  const T mx = *std::max_element(ws.logits.begin(), ws.logits.end());
  T sum = 0;
  for (std::size_t i = 0; i < 4; ++i) sum += (g_logits[i] = std::exp(ws.logits[i] - mx));
  for (std::size_t i = 0; i < 4; ++i) g_logits[i] = (g_logits[i] / sum - (i == target ? T(1) : T(0))) * scale;

  ws.g_hidden.resize(a.head);
  dense_backward(ws.hidden.data(), a.head, p + m.layout.head_out.weight_offset, 4, g_logits,
                 g + m.layout.head_out.weight_offset, g + m.layout.head_out.bias_offset, ws.g_hidden.data());
  relu_mask(ws.hidden.data(), ws.g_hidden.data(), a.head);
  ws.g_concat.resize(2 * a.dense);
  dense_backward(ws.concat.data(), 2 * a.dense, p + m.layout.head_hidden.weight_offset, a.head, ws.g_hidden.data(),
                 g + m.layout.head_hidden.weight_offset, g + m.layout.head_hidden.bias_offset, ws.g_concat.data());
  // g_concat is reused by the branches through g_dense copies, so copy halves first.
  std::vector<T> upper(ws.g_concat.begin() + static_cast<std::ptrdiff_t>(a.dense), ws.g_concat.end());
  branch_backward(m, 0, ws, ws.g_concat.data(), grad);
  branch_backward(m, 1, ws, upper.data(), grad);
}

#define CCDT_INSTANTIATE(T)                                                                                   \
  template struct Workspace<T>;                                                                               \
  template std::array<double, 4> forward(const Module<T>&, std::span<const float>, std::span<const float>,     \
                                         Workspace<T>&);                                                      \
  template void backward(const Module<T>&, Workspace<T>&, std::size_t, T, std::vector<T>&);                   \
  template T cross_entropy(const std::array<T, 4>&, std::size_t);

CCDT_INSTANTIATE(float)
CCDT_INSTANTIATE(double)
CCDT_INSTANTIATE(long double)
#undef CCDT_INSTANTIATE

}  // namespace ccdt
