#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hybridmap/encoding.hpp"
#include "hybridmap/prng.hpp"
#include "hybridmap/serde.hpp"

namespace hybridmap {

// ---- key featurization -------------------------------------------------------
//
// A key index is presented to the net as digit-wise one-hots of its mixed-radix
// components: each component value is split into base-`radix` digits and every
// digit contributes one active input. Input width stays bounded (sum of digit
// widths) instead of the full key-domain cardinality.

struct FeatureGroup {
    uint64_t weight = 1; // mixed-radix weight of the component in the key index
    uint64_t span = 1;   // component domain span
    uint32_t radix = 256;
    uint32_t digits = 1;
};

struct FeatureCodec {
    std::vector<FeatureGroup> groups;
    uint32_t input_dim = 0;   // sum of digit one-hot widths
    uint32_t active_count = 0; // digits per key (active inputs per row)
    uint64_t domain_size = 1;

    static FeatureCodec make(const KeyCodec& kc, uint32_t radix = 256);

    // Writes `active_count` active input indices for `key` into `out`.
    void active_features(uint64_t key, uint32_t* out) const {
        uint32_t offset = 0;
        uint32_t slot = 0;
        for (const auto& g : groups) {
            uint64_t v = (key / g.weight) % g.span;
            for (uint32_t d = 0; d < g.digits; ++d) {
                uint32_t width = digit_width(g, d);
                out[slot++] = offset + static_cast<uint32_t>(v % g.radix);
                v /= g.radix;
                offset += width;
            }
        }
    }

    static uint32_t digit_width(const FeatureGroup& g, uint32_t d) {
        if (d + 1 < g.digits) return g.radix;
        // top digit: just wide enough for the residual range
        uint64_t scale = 1;
        for (uint32_t i = 0; i + 1 < g.digits; ++i) scale *= g.radix;
        return static_cast<uint32_t>((g.span + scale - 1) / scale);
    }
};

// ---- multi-task net -----------------------------------------------------------

enum class Act : uint8_t { linear = 0, relu = 1 };

// Weight storage is shared_ptr so architecture-search nets can alias a weight
// bank: training through one net persists in the bank.
template <typename T>
struct Layer {
    uint32_t in_dim = 0;
    uint32_t out_dim = 0;
    Act act = Act::linear;
    std::shared_ptr<std::vector<T>> W; // out_dim x in_dim, row-major
    std::shared_ptr<std::vector<T>> b; // out_dim

    size_t param_count() const { return static_cast<size_t>(in_dim) * out_dim + out_dim; }
};

template <typename T>
Layer<T> make_layer(uint32_t in_dim, uint32_t out_dim, Act act, Rng& rng, double init_stddev) {
    Layer<T> l;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.act = act;
    l.W = std::make_shared<std::vector<T>>(static_cast<size_t>(in_dim) * out_dim);
    l.b = std::make_shared<std::vector<T>>(out_dim, T(0));
    for (auto& w : *l.W) w = static_cast<T>(rng.normal(0.0, init_stddev));
    return l;
}

// Shared trunk + one private head per value column; every head ends in a
// linear logits layer of that column's cardinality (softmax applied at use).
template <typename T>
struct BasicNet {
    FeatureCodec features;
    std::vector<Layer<T>> shared;
    std::vector<std::vector<Layer<T>>> heads;

    size_t head_count() const { return heads.size(); }
    uint32_t head_cardinality(size_t h) const { return heads[h].back().out_dim; }
    uint32_t shared_out_dim() const {
        return shared.empty() ? features.input_dim : shared.back().out_dim;
    }

    size_t layer_count() const {
        size_t n = shared.size();
        for (const auto& head : heads) n += head.size();
        return n;
    }
    Layer<T>& layer_at(size_t i) {
        if (i < shared.size()) return shared[i];
        i -= shared.size();
        for (auto& head : heads) {
            if (i < head.size()) return head[i];
            i -= head.size();
        }
        throw DimensionMismatch("layer index out of range");
    }
    const Layer<T>& layer_at(size_t i) const { return const_cast<BasicNet*>(this)->layer_at(i); }

    size_t param_count() const {
        size_t n = 0;
        for (size_t i = 0; i < layer_count(); ++i) n += layer_at(i).param_count();
        return n;
    }

    void validate() const {
        if (heads.empty()) throw DimensionMismatch("net has no heads");
        uint32_t trunk_in = features.input_dim;
        uint32_t prev = trunk_in;
        for (const auto& l : shared) {
            if (l.in_dim != prev) throw DimensionMismatch("shared layer input mismatch");
            prev = l.out_dim;
        }
        for (const auto& head : heads) {
            if (head.empty()) throw DimensionMismatch("empty head");
            uint32_t hp = prev;
            for (const auto& l : head) {
                if (l.in_dim != hp) throw DimensionMismatch("head layer input mismatch");
                hp = l.out_dim;
            }
            if (head.back().act != Act::linear)
                throw DimensionMismatch("head output layer must be linear");
        }
    }
};

using MultiTaskNet = BasicNet<float>;

// Scale-preserving stddev for a layer: sqrt(2 / fan_in). The first layer sees
// one-hot digit inputs, so its effective fan-in is the count of active inputs,
// not the input width.
inline double auto_stddev(uint32_t fan_in) { return std::sqrt(2.0 / std::max(1u, fan_in)); }

// Builds a freshly initialized net: trunk `shared_sizes`, per-head hidden
// sizes, head output cardinalities. Weights ~ N(0, stddev^2) with biases 0;
// init_stddev 0 picks the fan-in-scaled default per layer.
template <typename T>
BasicNet<T> make_net(const FeatureCodec& fc, const std::vector<uint32_t>& shared_sizes,
                     const std::vector<std::vector<uint32_t>>& head_hidden,
                     const std::vector<uint32_t>& head_cards, Rng& rng,
                     double init_stddev = 0.0) {
    if (head_hidden.size() != head_cards.size())
        throw DimensionMismatch("head spec count mismatch");
    auto stddev_for = [&](uint32_t fan_in, bool sparse_input) {
        if (init_stddev > 0) return init_stddev;
        return auto_stddev(sparse_input ? fc.active_count : fan_in);
    };
    BasicNet<T> net;
    net.features = fc;
    uint32_t prev = fc.input_dim;
    bool first = true;
    for (uint32_t size : shared_sizes) {
        net.shared.push_back(make_layer<T>(prev, size, Act::relu, rng, stddev_for(prev, first)));
        prev = size;
        first = false;
    }
    for (size_t h = 0; h < head_cards.size(); ++h) {
        std::vector<Layer<T>> head;
        uint32_t hp = prev;
        bool hfirst = first; // heads read the raw features only when the trunk is empty
        for (uint32_t size : head_hidden[h]) {
            head.push_back(make_layer<T>(hp, size, Act::relu, rng, stddev_for(hp, hfirst)));
            hp = size;
            hfirst = false;
        }
        head.push_back(
            make_layer<T>(hp, head_cards[h], Act::linear, rng, stddev_for(hp, hfirst)));
        net.heads.push_back(std::move(head));
    }
    net.validate();
    return net;
}

namespace detail {

constexpr size_t kChunkRows = 2048;

// Dense layer forward: Y = act(X W^T + b). X is rows x in, Y rows x out.
template <typename T>
void layer_forward(const Layer<T>& l, const T* X, size_t rows, T* Y) {
    const T* W = l.W->data();
    const T* b = l.b->data();
    for (size_t r = 0; r < rows; ++r) {
        const T* x = X + r * l.in_dim;
        T* y = Y + r * l.out_dim;
        for (uint32_t o = 0; o < l.out_dim; ++o) {
            const T* w = W + static_cast<size_t>(o) * l.in_dim;
            T acc = b[o];
            for (uint32_t i = 0; i < l.in_dim; ++i) acc += w[i] * x[i];
            y[o] = l.act == Act::relu ? (acc > T(0) ? acc : T(0)) : acc;
        }
    }
}

// Sparse-input forward: each row activates `active` inputs with value 1.
template <typename T>
void layer_forward_sparse(const Layer<T>& l, const uint32_t* feats, size_t rows, uint32_t active,
                          T* Y) {
    const T* W = l.W->data();
    const T* b = l.b->data();
    for (size_t r = 0; r < rows; ++r) {
        const uint32_t* f = feats + r * active;
        T* y = Y + r * l.out_dim;
        for (uint32_t o = 0; o < l.out_dim; ++o) {
            const T* w = W + static_cast<size_t>(o) * l.in_dim;
            T acc = b[o];
            for (uint32_t a = 0; a < active; ++a) acc += w[f[a]];
            y[o] = l.act == Act::relu ? (acc > T(0) ? acc : T(0)) : acc;
        }
    }
}

template <typename T>
void softmax_rows(T* logits, size_t rows, uint32_t card) {
    for (size_t r = 0; r < rows; ++r) {
        T* z = logits + r * card;
        T m = z[0];
        for (uint32_t c = 1; c < card; ++c) m = std::max(m, z[c]);
        T sum = T(0);
        for (uint32_t c = 0; c < card; ++c) {
            z[c] = std::exp(z[c] - m);
            sum += z[c];
        }
        for (uint32_t c = 0; c < card; ++c) z[c] /= sum;
    }
}

// Lowest code wins on exact ties.
template <typename T>
uint32_t argmax_row(const T* v, uint32_t card) {
    uint32_t best = 0;
    for (uint32_t c = 1; c < card; ++c)
        if (v[c] > v[best]) best = c;
    return best;
}

} // namespace detail

// ---- inference -----------------------------------------------------------------

// Per-head row-stochastic probability matrices (rows x cardinality, row-major).
template <typename T>
std::vector<std::vector<T>> forward(const BasicNet<T>& net, std::span<const uint64_t> keys) {
    net.validate();
    size_t n = keys.size();
    std::vector<std::vector<T>> out(net.head_count());
    for (size_t h = 0; h < net.head_count(); ++h)
        out[h].resize(n * net.head_cardinality(h));

    uint32_t active = net.features.active_count;
    std::vector<uint32_t> feats(detail::kChunkRows * active);
    std::vector<T> bufA, bufB;
    for (size_t start = 0; start < n; start += detail::kChunkRows) {
        size_t rows = std::min(detail::kChunkRows, n - start);
        for (size_t r = 0; r < rows; ++r) {
            if (keys[start + r] >= net.features.domain_size)
                throw KeyOutOfDomain("key index " + std::to_string(keys[start + r]));
            net.features.active_features(keys[start + r], feats.data() + r * active);
        }
        // trunk
        const T* cur = nullptr;
        for (size_t li = 0; li < net.shared.size(); ++li) {
            const auto& l = net.shared[li];
            auto& dst = (li % 2 == 0) ? bufA : bufB;
            dst.resize(rows * l.out_dim);
            if (li == 0)
                detail::layer_forward_sparse(l, feats.data(), rows, active, dst.data());
            else
                detail::layer_forward(l, cur, rows, dst.data());
            cur = dst.data();
        }
        // heads
        std::vector<T> hbufA, hbufB;
        for (size_t h = 0; h < net.head_count(); ++h) {
            const T* hcur = cur;
            for (size_t li = 0; li < net.heads[h].size(); ++li) {
                const auto& l = net.heads[h][li];
                bool last = li + 1 == net.heads[h].size();
                T* dst;
                if (last) {
                    dst = out[h].data() + start * l.out_dim;
                } else {
                    auto& buf = (li % 2 == 0) ? hbufA : hbufB;
                    buf.resize(rows * l.out_dim);
                    dst = buf.data();
                }
                if (li == 0 && net.shared.empty())
                    detail::layer_forward_sparse(l, feats.data(), rows, active, dst);
                else
                    detail::layer_forward(l, hcur, rows, dst);
                hcur = dst;
            }
            detail::softmax_rows(out[h].data() + start * net.head_cardinality(h), rows,
                                 net.head_cardinality(h));
        }
    }
    return out;
}

// Argmax codes per head for a key batch.
template <typename T>
std::vector<std::vector<uint32_t>> predict_codes(const BasicNet<T>& net,
                                                 std::span<const uint64_t> keys) {
    auto probs = forward(net, keys);
    std::vector<std::vector<uint32_t>> codes(net.head_count());
    for (size_t h = 0; h < net.head_count(); ++h) {
        uint32_t card = net.head_cardinality(h);
        codes[h].resize(keys.size());
        for (size_t r = 0; r < keys.size(); ++r)
            codes[h][r] = detail::argmax_row(probs[h].data() + r * card, card);
    }
    return codes;
}

// Mean of -ln p[r, target_r]; probabilities clamped below at 1e-12.
template <typename T>
double cross_entropy(const std::vector<T>& probs, size_t rows, uint32_t card,
                     const uint32_t* targets) {
    if (rows == 0) return 0.0;
    double total = 0.0;
    for (size_t r = 0; r < rows; ++r) {
        if (targets[r] >= card) throw CodeOutOfRange("cross_entropy target " + std::to_string(targets[r]));
        double p = static_cast<double>(probs[r * card + targets[r]]);
        total += -std::log(std::max(p, 1e-12));
    }
    return total / static_cast<double>(rows);
}

// ---- training ------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.001;
    double lr_decay = 0.999; // multiplicative, applied after every update
    uint32_t epochs = 5;
    uint32_t batch_size = 16384;
    uint64_t seed = 0;
    double stop_delta = 0.0001; // early stop when |epoch loss delta| < this
};

struct TrainResult {
    uint32_t epochs_run = 0;
    double final_loss = 0.0;
    std::vector<double> epoch_losses;
    std::vector<double> head_accuracy;
    double memorization = 0.0; // fraction of rows with every head correct
};

struct EvalResult {
    std::vector<double> head_accuracy;
    double memorization = 0.0;
    std::vector<uint8_t> row_correct; // 1 = all heads exact
};

template <typename T>
struct Grads {
    std::vector<std::vector<T>> w; // per layer, same order as layer_at
    std::vector<std::vector<T>> b;
    double loss = 0.0;
};

// Analytic gradients of summed per-head mean cross-entropy over the batch.
template <typename T>
Grads<T> gradients(const BasicNet<T>& net, const uint64_t* keys, size_t rows,
                   const std::vector<const uint32_t*>& targets) {
    if (rows == 0) throw EmptyDataset("gradients over empty batch");
    if (targets.size() != net.head_count()) throw DimensionMismatch("target head count");

    Grads<T> g;
    size_t layers = net.layer_count();
    g.w.resize(layers);
    g.b.resize(layers);
    for (size_t i = 0; i < layers; ++i) {
        const auto& l = net.layer_at(i);
        g.w[i].assign(l.W->size(), T(0));
        g.b[i].assign(l.b->size(), T(0));
    }

    uint32_t active = net.features.active_count;
    T scale = T(1) / static_cast<T>(rows);
    std::vector<uint32_t> feats(detail::kChunkRows * active);
    // Activations for one chunk: trunk levels then per-head levels.
    std::vector<std::vector<T>> acts(net.shared.size());
    std::vector<std::vector<std::vector<T>>> head_acts(net.head_count());
    for (size_t h = 0; h < net.head_count(); ++h) head_acts[h].resize(net.heads[h].size());

    double loss = 0.0;
    for (size_t start = 0; start < rows; start += detail::kChunkRows) {
        size_t chunk = std::min(detail::kChunkRows, rows - start);
        for (size_t r = 0; r < chunk; ++r) {
            if (keys[start + r] >= net.features.domain_size)
                throw KeyOutOfDomain("key index " + std::to_string(keys[start + r]));
            net.features.active_features(keys[start + r], feats.data() + r * active);
        }
        // forward, keeping activations
        const T* cur = nullptr;
        for (size_t li = 0; li < net.shared.size(); ++li) {
            const auto& l = net.shared[li];
            acts[li].resize(chunk * l.out_dim);
            if (li == 0)
                detail::layer_forward_sparse(l, feats.data(), chunk, active, acts[li].data());
            else
                detail::layer_forward(l, cur, chunk, acts[li].data());
            cur = acts[li].data();
        }
        for (size_t h = 0; h < net.head_count(); ++h) {
            const T* hcur = cur;
            for (size_t li = 0; li < net.heads[h].size(); ++li) {
                const auto& l = net.heads[h][li];
                auto& dst = head_acts[h][li];
                dst.resize(chunk * l.out_dim);
                if (li == 0 && net.shared.empty())
                    detail::layer_forward_sparse(l, feats.data(), chunk, active, dst.data());
                else
                    detail::layer_forward(l, hcur, chunk, dst.data());
                hcur = dst.data();
            }
        }

        // backward
        std::vector<T> trunk_delta; // accumulated dL/d(shared output)
        if (!net.shared.empty()) trunk_delta.assign(chunk * net.shared_out_dim(), T(0));

        for (size_t h = 0; h < net.head_count(); ++h) {
            uint32_t card = net.head_cardinality(h);
            auto& logits = head_acts[h].back();
            detail::softmax_rows(logits.data(), chunk, card); // logits -> probs in place
            const uint32_t* tgt = targets[h] + start;
            for (size_t r = 0; r < chunk; ++r) {
                double p = static_cast<double>(logits[r * card + tgt[r]]);
                loss += -std::log(std::max(p, 1e-12));
            }
            // delta at logits
            std::vector<T> delta = logits;
            for (size_t r = 0; r < chunk; ++r) {
                T* d = delta.data() + r * card;
                d[tgt[r]] -= T(1);
                for (uint32_t c = 0; c < card; ++c) d[c] *= scale;
            }
            // walk head layers backward
            size_t gbase = net.shared.size();
            for (size_t hh = 0; hh < h; ++hh) gbase += net.heads[hh].size();
            for (size_t li = net.heads[h].size(); li-- > 0;) {
                const auto& l = net.heads[h][li];
                bool sparse_in = (li == 0 && net.shared.empty());
                const T* in_act = nullptr;
                if (li > 0)
                    in_act = head_acts[h][li - 1].data();
                else if (!net.shared.empty())
                    in_act = acts[net.shared.size() - 1].data();
                T* gw = g.w[gbase + li].data();
                T* gb = g.b[gbase + li].data();
                std::vector<T> prev_delta;
                bool need_prev = li > 0 || !net.shared.empty();
                if (need_prev && !sparse_in) prev_delta.assign(chunk * l.in_dim, T(0));
                for (size_t r = 0; r < chunk; ++r) {
                    const T* d = delta.data() + r * l.out_dim;
                    if (sparse_in) {
                        const uint32_t* f = feats.data() + r * active;
                        for (uint32_t o = 0; o < l.out_dim; ++o) {
                            T dv = d[o];
                            gb[o] += dv;
                            T* gwrow = gw + static_cast<size_t>(o) * l.in_dim;
                            for (uint32_t a = 0; a < active; ++a) gwrow[f[a]] += dv;
                        }
                    } else {
                        const T* x = in_act + r * l.in_dim;
                        T* pd = need_prev ? prev_delta.data() + r * l.in_dim : nullptr;
                        for (uint32_t o = 0; o < l.out_dim; ++o) {
                            T dv = d[o];
                            gb[o] += dv;
                            const T* w = l.W->data() + static_cast<size_t>(o) * l.in_dim;
                            T* gwrow = gw + static_cast<size_t>(o) * l.in_dim;
                            for (uint32_t i = 0; i < l.in_dim; ++i) {
                                gwrow[i] += dv * x[i];
                                if (pd) pd[i] += dv * w[i];
                            }
                        }
                    }
                }
                if (!need_prev || sparse_in) {
                    delta.clear();
                    break;
                }
                // relu mask of the producing layer (input activation > 0)
                if (li > 0) {
                    const auto& prod = net.heads[h][li - 1];
                    if (prod.act == Act::relu) {
                        const T* a = head_acts[h][li - 1].data();
                        for (size_t i = 0; i < prev_delta.size(); ++i)
                            if (a[i] <= T(0)) prev_delta[i] = T(0);
                    }
                    delta = std::move(prev_delta);
                } else {
                    // flowing into the shared trunk output
                    for (size_t i = 0; i < prev_delta.size(); ++i) trunk_delta[i] += prev_delta[i];
                    delta.clear();
                }
            }
        }

        if (!net.shared.empty()) {
            // relu mask at trunk output
            const auto& top = net.shared.back();
            if (top.act == Act::relu) {
                const T* a = acts[net.shared.size() - 1].data();
                for (size_t i = 0; i < trunk_delta.size(); ++i)
                    if (a[i] <= T(0)) trunk_delta[i] = T(0);
            }
            std::vector<T> delta = std::move(trunk_delta);
            for (size_t li = net.shared.size(); li-- > 0;) {
                const auto& l = net.shared[li];
                bool sparse_in = li == 0;
                const T* in_act = sparse_in ? nullptr : acts[li - 1].data();
                T* gw = g.w[li].data();
                T* gb = g.b[li].data();
                std::vector<T> prev_delta;
                if (!sparse_in) prev_delta.assign(chunk * l.in_dim, T(0));
                for (size_t r = 0; r < chunk; ++r) {
                    const T* d = delta.data() + r * l.out_dim;
                    if (sparse_in) {
                        const uint32_t* f = feats.data() + r * active;
                        for (uint32_t o = 0; o < l.out_dim; ++o) {
                            T dv = d[o];
                            gb[o] += dv;
                            T* gwrow = gw + static_cast<size_t>(o) * l.in_dim;
                            for (uint32_t a = 0; a < active; ++a) gwrow[f[a]] += dv;
                        }
                    } else {
                        const T* x = in_act + r * l.in_dim;
                        T* pd = prev_delta.data() + r * l.in_dim;
                        for (uint32_t o = 0; o < l.out_dim; ++o) {
                            T dv = d[o];
                            gb[o] += dv;
                            const T* w = l.W->data() + static_cast<size_t>(o) * l.in_dim;
                            T* gwrow = gw + static_cast<size_t>(o) * l.in_dim;
                            for (uint32_t i = 0; i < l.in_dim; ++i) {
                                gwrow[i] += dv * x[i];
                                pd[i] += dv * w[i];
                            }
                        }
                    }
                }
                if (sparse_in) break;
                const auto& prod = net.shared[li - 1];
                if (prod.act == Act::relu) {
                    const T* a = acts[li - 1].data();
                    for (size_t i = 0; i < prev_delta.size(); ++i)
                        if (a[i] <= T(0)) prev_delta[i] = T(0);
                }
                delta = std::move(prev_delta);
            }
        }
    }
    g.loss = loss / static_cast<double>(rows);
    return g;
}

template <typename T>
void sgd_step(BasicNet<T>& net, const Grads<T>& g, double lr) {
    for (size_t i = 0; i < net.layer_count(); ++i) {
        auto& l = net.layer_at(i);
        T* W = l.W->data();
        T* b = l.b->data();
        const auto& gw = g.w[i];
        const auto& gb = g.b[i];
        for (size_t j = 0; j < gw.size(); ++j) W[j] -= static_cast<T>(lr) * gw[j];
        for (size_t j = 0; j < gb.size(); ++j) b[j] -= static_cast<T>(lr) * gb[j];
    }
}

// Full-dataset evaluation: per-head argmax accuracy and exact-row fraction.
template <typename T>
EvalResult evaluate(const BasicNet<T>& net, const EncodedRelation& rel) {
    size_t n = rel.row_count();
    EvalResult res;
    res.head_accuracy.assign(net.head_count(), 0.0);
    res.row_correct.assign(n, 1);
    std::vector<uint64_t> correct(net.head_count(), 0);
    for (size_t start = 0; start < n; start += 65536) {
        size_t rows = std::min<size_t>(65536, n - start);
        auto codes = predict_codes(net, std::span<const uint64_t>(rel.keys.data() + start, rows));
        for (size_t h = 0; h < net.head_count(); ++h) {
            const auto& truth = rel.columns[h];
            for (size_t r = 0; r < rows; ++r) {
                if (codes[h][r] == truth[start + r])
                    ++correct[h];
                else
                    res.row_correct[start + r] = 0;
            }
        }
    }
    uint64_t all = 0;
    for (uint8_t c : res.row_correct) all += c;
    for (size_t h = 0; h < net.head_count(); ++h)
        res.head_accuracy[h] = n ? static_cast<double>(correct[h]) / static_cast<double>(n) : 0.0;
    res.memorization = n ? static_cast<double>(all) / static_cast<double>(n) : 0.0;
    return res;
}

// Mini-batch SGD on summed per-head cross-entropy. Deterministic given seed.
// lr_state, when given, carries the decayed learning rate across calls.
template <typename T>
TrainResult train(BasicNet<T>& net, const EncodedRelation& rel, const TrainConfig& cfg,
                  double* lr_state = nullptr) {
    if (rel.row_count() == 0) throw EmptyDataset("train on empty relation");
    if (net.head_count() != rel.column_count())
        throw DimensionMismatch("net heads vs relation columns");
    net.validate();

    size_t n = rel.row_count();
    Rng rng(cfg.seed);
    double lr = lr_state && *lr_state > 0 ? *lr_state : cfg.learning_rate;

    TrainResult res;
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);

    size_t batch = std::max<uint32_t>(1, cfg.batch_size);
    std::vector<uint64_t> bkeys(batch);
    std::vector<std::vector<uint32_t>> btargets(rel.column_count(), std::vector<uint32_t>(batch));

    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < n; start += batch) {
            size_t rows = std::min(batch, n - start);
            for (size_t r = 0; r < rows; ++r) {
                uint32_t idx = order[start + r];
                bkeys[r] = rel.keys[idx];
                for (size_t h = 0; h < rel.column_count(); ++h)
                    btargets[h][r] = rel.columns[h][idx];
            }
            std::vector<const uint32_t*> tptrs;
            for (auto& t : btargets) tptrs.push_back(t.data());
            auto g = gradients(net, bkeys.data(), rows, tptrs);
            sgd_step(net, g, lr);
            lr *= cfg.lr_decay;
            epoch_loss += g.loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        res.epoch_losses.push_back(epoch_loss);
        res.epochs_run = epoch + 1;
        if (epoch > 0 &&
            std::abs(res.epoch_losses[epoch] - res.epoch_losses[epoch - 1]) < cfg.stop_delta)
            break;
    }
    res.final_loss = res.epoch_losses.empty() ? 0.0 : res.epoch_losses.back();
    if (lr_state) *lr_state = lr;

    auto eval = evaluate(net, rel);
    res.head_accuracy = eval.head_accuracy;
    res.memorization = eval.memorization;
    return res;
}

// ---- serialization ---------------------------------------------------------------
//
// Blob: magic "DMNN", u16 version, u8 hidden activation, u8 reserved,
// feature groups, layer topology table, then all weights as f32 LE
// (per layer: W row-major, then b), shared layers first, heads in order.

Bytes serialize(const MultiTaskNet& net);
MultiTaskNet deserialize_net(const Bytes& blob);
size_t serialized_size(const MultiTaskNet& net);

} // namespace hybridmap
