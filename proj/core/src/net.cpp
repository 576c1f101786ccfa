#include "hybridmap/net.hpp"

namespace hybridmap {

FeatureCodec FeatureCodec::make(const KeyCodec& kc, uint32_t radix) {
    if (radix < 2) throw Error("feature radix must be >= 2");
    FeatureCodec fc;
    fc.domain_size = kc.domain_size();
    const auto& comps = kc.components();
    const auto& weights = kc.weights();
    for (size_t i = 0; i < comps.size(); ++i) {
        FeatureGroup g;
        g.weight = weights[i];
        g.span = comps[i].domain_span;
        g.radix = radix;
        g.digits = 1;
        uint64_t cap = radix;
        while (cap < g.span) {
            if (cap > UINT64_MAX / radix) break;
            cap *= radix;
            ++g.digits;
        }
        fc.groups.push_back(g);
        fc.active_count += g.digits;
        for (uint32_t d = 0; d < g.digits; ++d) fc.input_dim += digit_width(g, d);
    }
    return fc;
}

namespace {

void put_layer_spec(Bytes& out, const Layer<float>& l) {
    put_le<uint32_t>(out, l.in_dim);
    put_le<uint32_t>(out, l.out_dim);
    put_le<uint8_t>(out, static_cast<uint8_t>(l.act));
}

Layer<float> read_layer_spec(ByteReader& r) {
    Layer<float> l;
    l.in_dim = r.le<uint32_t>();
    l.out_dim = r.le<uint32_t>();
    uint8_t act = r.le<uint8_t>();
    if (act > 1) throw CorruptBlob("model: bad activation id");
    l.act = static_cast<Act>(act);
    if (l.in_dim == 0 || l.out_dim == 0) throw CorruptBlob("model: zero layer dim");
    l.W = std::make_shared<std::vector<float>>(static_cast<size_t>(l.in_dim) * l.out_dim);
    l.b = std::make_shared<std::vector<float>>(l.out_dim);
    return l;
}

} // namespace

Bytes serialize(const MultiTaskNet& net) {
    net.validate();
    Bytes out;
    put_bytes(out, "DMNN", 4);
    put_le<uint16_t>(out, 1);
    put_le<uint8_t>(out, 1); // hidden activation: relu
    put_le<uint8_t>(out, 0); // reserved
    put_le<uint32_t>(out, static_cast<uint32_t>(net.features.groups.size()));
    for (const auto& g : net.features.groups) {
        put_le<uint64_t>(out, g.weight);
        put_le<uint64_t>(out, g.span);
        put_le<uint32_t>(out, g.radix);
        put_le<uint32_t>(out, g.digits);
    }
    put_le<uint32_t>(out, static_cast<uint32_t>(net.shared.size()));
    for (const auto& l : net.shared) put_layer_spec(out, l);
    put_le<uint32_t>(out, static_cast<uint32_t>(net.heads.size()));
    for (const auto& head : net.heads) {
        put_le<uint32_t>(out, static_cast<uint32_t>(head.size()));
        for (const auto& l : head) put_layer_spec(out, l);
    }
    for (size_t i = 0; i < net.layer_count(); ++i) {
        const auto& l = net.layer_at(i);
        for (float w : *l.W) put_f32(out, w);
        for (float b : *l.b) put_f32(out, b);
    }
    return out;
}

size_t serialized_size(const MultiTaskNet& net) {
    size_t header = 4 + 2 + 1 + 1 + 4 + net.features.groups.size() * 24;
    header += 4 + net.shared.size() * 9;
    header += 4;
    for (const auto& head : net.heads) header += 4 + head.size() * 9;
    return header + 4 * net.param_count();
}

MultiTaskNet deserialize_net(const Bytes& blob) {
    ByteReader r(blob);
    char magic[4];
    r.raw(magic, 4);
    if (std::string_view(magic, 4) != "DMNN") throw CorruptBlob("model: bad magic");
    if (r.le<uint16_t>() != 1) throw CorruptBlob("model: unsupported version");
    r.le<uint8_t>(); // hidden activation
    r.le<uint8_t>(); // reserved

    MultiTaskNet net;
    uint32_t ngroups = r.le<uint32_t>();
    for (uint32_t i = 0; i < ngroups; ++i) {
        FeatureGroup g;
        g.weight = r.le<uint64_t>();
        g.span = r.le<uint64_t>();
        g.radix = r.le<uint32_t>();
        g.digits = r.le<uint32_t>();
        if (g.weight == 0 || g.span == 0 || g.radix < 2 || g.digits == 0 || g.digits > 64)
            throw CorruptBlob("model: bad feature group");
        net.features.groups.push_back(g);
        net.features.active_count += g.digits;
        for (uint32_t d = 0; d < g.digits; ++d)
            net.features.input_dim += FeatureCodec::digit_width(g, d);
    }
    // Domain size is the product of component spans.
    net.features.domain_size = 1;
    for (const auto& g : net.features.groups) {
        if (g.span > 0 && net.features.domain_size > UINT64_MAX / g.span)
            throw CorruptBlob("model: feature domain overflow");
        net.features.domain_size *= g.span;
    }

    uint32_t nshared = r.le<uint32_t>();
    for (uint32_t i = 0; i < nshared; ++i) net.shared.push_back(read_layer_spec(r));
    uint32_t nheads = r.le<uint32_t>();
    for (uint32_t h = 0; h < nheads; ++h) {
        uint32_t nlayers = r.le<uint32_t>();
        std::vector<Layer<float>> head;
        for (uint32_t i = 0; i < nlayers; ++i) head.push_back(read_layer_spec(r));
        net.heads.push_back(std::move(head));
    }
    for (size_t i = 0; i < net.layer_count(); ++i) {
        auto& l = net.layer_at(i);
        for (auto& w : *l.W) w = r.f32();
        for (auto& b : *l.b) b = r.f32();
    }
    if (!r.done()) throw CorruptBlob("model: trailing bytes");
    try {
        net.validate();
    } catch (const Error& e) {
        throw CorruptBlob(std::string("model: inconsistent topology: ") + e.what());
    }
    return net;
}

} // namespace hybridmap
