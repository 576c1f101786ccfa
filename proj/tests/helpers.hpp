#pragma once

// Shared fixtures for the test binaries: hand-built tiny relations and nets
// with fully known contents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hybridmap/encoding.hpp"
#include "hybridmap/net.hpp"

namespace testutil {

using namespace hybridmap;

inline std::vector<std::string> label_dictionary(uint32_t cardinality, const std::string& prefix) {
    std::vector<std::string> dict;
    dict.reserve(cardinality);
    for (uint32_t i = 0; i < cardinality; ++i) dict.push_back(prefix + std::to_string(i));
    return dict;
}

// Keys 0..n-1 over a domain of `span` (default n); one value column per entry
// of `columns`, codes taken verbatim. Every code must be < its cardinality.
inline EncodedRelation make_relation(size_t n,
                                     const std::vector<std::pair<uint32_t, std::vector<uint32_t>>>&
                                         columns,
                                     uint64_t span = 0) {
    EncodedRelation rel;
    rel.key_codec = KeyCodec({{"k", 0, span ? span : n}});
    rel.keys.resize(n);
    for (size_t i = 0; i < n; ++i) rel.keys[i] = i;
    for (size_t c = 0; c < columns.size(); ++c) {
        ColumnSchema schema;
        schema.name = "v" + std::to_string(c);
        schema.kind = ColumnKind::value;
        schema.dictionary = label_dictionary(columns[c].first, schema.name + "_");
        rel.value_columns.push_back(std::move(schema));
        rel.columns.push_back(columns[c].second);
    }
    return rel;
}

// Single column where value = key mod cardinality.
inline EncodedRelation mod_relation(size_t n, uint32_t cardinality, uint64_t span = 0) {
    std::vector<uint32_t> codes(n);
    for (size_t i = 0; i < n; ++i) codes[i] = static_cast<uint32_t>(i % cardinality);
    return make_relation(n, {{cardinality, codes}}, span);
}

// All-zero weights: every head emits a uniform softmax, argmax decodes to 0.
template <typename T = float>
inline BasicNet<T> zero_net(const EncodedRelation& rel, uint32_t radix = 256) {
    FeatureCodec fc = FeatureCodec::make(rel.key_codec, radix);
    BasicNet<T> net;
    net.features = fc;
    Rng rng(0);
    for (const auto& col : rel.value_columns) {
        std::vector<Layer<T>> head;
        head.push_back(make_layer<T>(fc.input_dim, col.cardinality(), Act::linear, rng, 0.0));
        net.heads.push_back(std::move(head));
    }
    net.validate();
    return net;
}

// Randomly initialized net over the relation's key domain.
template <typename T = float>
inline BasicNet<T> random_net(const EncodedRelation& rel, const std::vector<uint32_t>& shared,
                              const std::vector<uint32_t>& head_hidden, uint64_t seed,
                              uint32_t radix = 256) {
    FeatureCodec fc = FeatureCodec::make(rel.key_codec, radix);
    std::vector<uint32_t> cards;
    std::vector<std::vector<uint32_t>> hidden;
    for (const auto& col : rel.value_columns) {
        cards.push_back(col.cardinality());
        hidden.push_back(head_hidden);
    }
    Rng rng(seed);
    return make_net<T>(fc, shared, hidden, cards, rng);
}

// Smallest |preactivation| over every relu unit and key. Finite differences
// straddle the relu kink, so FD trials require a margin well above the step.
template <typename T>
inline double min_relu_margin(const BasicNet<T>& net, const std::vector<uint64_t>& keys) {
    double margin = 1e300;
    std::vector<uint32_t> feats(net.features.active_count);
    auto run = [&](const Layer<T>& l, std::vector<double>& in) {
        std::vector<double> y(l.out_dim);
        for (uint32_t o = 0; o < l.out_dim; ++o) {
            double acc = static_cast<double>((*l.b)[o]);
            for (uint32_t i = 0; i < l.in_dim; ++i)
                acc += static_cast<double>((*l.W)[o * l.in_dim + i]) * in[i];
            if (l.act == Act::relu) {
                margin = std::min(margin, std::abs(acc));
                y[o] = acc > 0 ? acc : 0.0;
            } else {
                y[o] = acc;
            }
        }
        in = std::move(y);
    };
    for (uint64_t k : keys) {
        std::vector<double> x(net.features.input_dim, 0.0);
        net.features.active_features(k, feats.data());
        for (uint32_t f : feats) x[f] = 1.0;
        for (const auto& l : net.shared) run(l, x);
        for (const auto& head : net.heads) {
            std::vector<double> cur = x;
            for (const auto& l : head) run(l, cur);
        }
    }
    return margin;
}

template <typename T>
inline std::vector<T> flatten_weights(const BasicNet<T>& net) {
    std::vector<T> out;
    for (size_t i = 0; i < net.layer_count(); ++i) {
        const auto& l = net.layer_at(i);
        out.insert(out.end(), l.W->begin(), l.W->end());
        out.insert(out.end(), l.b->begin(), l.b->end());
    }
    return out;
}

} // namespace testutil
