#include "hybridmap/mhas.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hybridmap/auxtable.hpp"
#include "hybridmap/bitvector.hpp"
#include "hybridmap/errors.hpp"
#include "hybridmap/serde.hpp"

namespace hybridmap {

// ---- scalar ops ---------------------------------------------------------------

double compression_loss(uint64_t model_bytes, uint64_t aux_bytes, uint64_t exist_bytes,
                        uint64_t decode_bytes, uint64_t data_bytes) {
    if (data_bytes == 0) throw ZeroData("compression loss over zero data bytes");
    double total = static_cast<double>(model_bytes) + static_cast<double>(aux_bytes) +
                   static_cast<double>(exist_bytes) + static_cast<double>(decode_bytes);
    return total / static_cast<double>(data_bytes);
}

uint64_t search_space_size(uint64_t size_choices, uint64_t max_layers) {
    if (size_choices == 0 || max_layers == 0)
        throw Error("search_space_size requires N >= 1 and M >= 1");
    uint64_t out = 1;
    auto mul = [&out](uint64_t f) {
        if (__builtin_mul_overflow(out, f, &out))
            throw DomainOverflow("search space size exceeds u64");
    };
    for (uint64_t i = 0; i < 2 * max_layers; ++i) mul(size_choices); // sizes for all 2M nodes
    for (uint64_t i = 2; i <= max_layers; ++i) mul(i);               // shared parents: M!
    for (uint64_t i = 3; i <= 2 * max_layers - 1; i += 2) mul(i);    // private parents: (2M-1)!!
    return out;
}

void SearchSpace::validate() const {
    if (max_shared_layers == 0) throw Error("max_shared_layers must be >= 1");
    if (max_private_layers == 0) throw Error("max_private_layers must be >= 1");
    if (heads == 0) throw Error("search space needs at least one head");
    if (layer_sizes.empty()) throw Error("layer_sizes must be nonempty");
    for (size_t i = 0; i < layer_sizes.size(); ++i) {
        if (layer_sizes[i] == 0) throw Error("layer size 0");
        if (i > 0 && layer_sizes[i] <= layer_sizes[i - 1])
            throw Error("layer_sizes must be strictly increasing");
    }
}

// ---- architecture points --------------------------------------------------------

void ArchSpec::realize() {
    realized_shared.clear();
    realized_private.clear();
    if (!shared_parent.empty()) {
        // ancestor walk from the last shared node; 0 terminates at the input
        uint32_t cur = static_cast<uint32_t>(shared_parent.size());
        while (cur != 0) {
            realized_shared.push_back(cur);
            cur = shared_parent[cur - 1];
        }
        std::reverse(realized_shared.begin(), realized_shared.end());
    }
    if (!private_parent.empty()) {
        // resolve(j) = stack ending at node j. Decision d of node j: 0 = head
        // input; 2k-1 = stack of node k; 2k = stack feeding node k (its input).
        auto resolve = [&](auto&& self, uint32_t j) -> std::vector<uint32_t> {
            uint32_t d = private_parent[j - 1];
            if (d == 0) return {j};
            uint32_t k = (d + 1) / 2;
            auto chain = self(self, k);
            if (d % 2 == 0) chain.pop_back(); // attach to k's input tensor
            chain.push_back(j);
            return chain;
        };
        realized_private = resolve(resolve, static_cast<uint32_t>(private_parent.size()));
    }
}

void ArchSpec::validate(const SearchSpace& space) const {
    space.validate();
    size_t ms = space.max_shared_layers, mp = space.max_private_layers;
    if (shared_parent.size() != ms || shared_size.size() != ms)
        throw DimensionMismatch("shared decision count != max_shared_layers");
    if (private_parent.size() != mp || private_size.size() != mp)
        throw DimensionMismatch("private decision count != max_private_layers");
    uint32_t n = static_cast<uint32_t>(space.layer_sizes.size());
    for (size_t i = 0; i < ms; ++i) {
        if (shared_parent[i] > i) throw Error("shared parent out of range");
        if (shared_size[i] >= n) throw Error("shared size index out of range");
    }
    for (size_t j = 0; j < mp; ++j) {
        if (private_parent[j] > 2 * j) throw Error("private parent out of range");
        if (private_size[j] >= n) throw Error("private size index out of range");
    }
    ArchSpec fresh = *this;
    fresh.realize();
    if (fresh.realized_shared != realized_shared || fresh.realized_private != realized_private)
        throw Error("realized stacks inconsistent with decisions");
    if (realized_shared.empty() || realized_private.empty())
        throw Error("realized stack empty");
}

std::string ArchSpec::serialize() const {
    std::string s = "s";
    for (size_t i = 0; i < shared_parent.size(); ++i) {
        s += i ? ',' : ' ';
        s += std::to_string(shared_parent[i]);
        s += ':';
        s += std::to_string(shared_size[i]);
    }
    s += " p";
    for (size_t j = 0; j < private_parent.size(); ++j) {
        s += j ? ',' : ' ';
        s += std::to_string(private_parent[j]);
        s += ':';
        s += std::to_string(private_size[j]);
    }
    return s;
}

uint64_t ArchSpec::id() const {
    std::string s = serialize();
    return fnv1a(s.data(), s.size());
}

// ---- weight bank -----------------------------------------------------------------

size_t WeightBank::KeyHash::operator()(const Key& k) const {
    uint64_t h = fnv1a_value(k.tree_node);
    h = fnv1a_value(k.from, h);
    h = fnv1a_value(k.to, h);
    h = fnv1a_value(k.in_dim, h);
    h = fnv1a_value(k.out_dim, h);
    return static_cast<size_t>(h);
}

WeightBank::Entry& WeightBank::get(const Key& key, double stddev) {
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
    double sd = stddev > 0 ? stddev : (stddev_ > 0 ? stddev_ : auto_stddev(key.in_dim));
    Entry e;
    e.W = std::make_shared<std::vector<float>>(static_cast<size_t>(key.in_dim) * key.out_dim);
    e.b = std::make_shared<std::vector<float>>(key.out_dim, 0.0f);
    // seed from the key alone so first-touch order never matters
    Rng rng(derive_seed(seed_, KeyHash{}(key)));
    for (auto& w : *e.W) w = static_cast<float>(rng.normal(0.0, sd));
    return map_.emplace(key, std::move(e)).first->second;
}

MultiTaskNet materialize(const ArchSpec& arch, const SearchSpace& space, WeightBank& bank,
                         const FeatureCodec& features, const std::vector<uint32_t>& head_cards) {
    arch.validate(space);
    if (head_cards.size() != space.heads)
        throw DimensionMismatch("head cardinality count != search space heads");

    constexpr uint32_t kOutput = UINT32_MAX; // classifier edge target sentinel
    MultiTaskNet net;
    net.features = features;

    uint32_t prev_dim = features.input_dim;
    uint32_t prev_node = 0;
    bool first = true;
    for (uint32_t node : arch.realized_shared) {
        uint32_t out = space.layer_sizes[arch.shared_size[node - 1]];
        // sparse one-hot input: effective fan-in is the active feature count
        double sd = first ? auto_stddev(features.active_count) : 0.0;
        auto& e = bank.get({0, prev_node, node, prev_dim, out}, sd);
        net.shared.push_back(Layer<float>{prev_dim, out, Act::relu, e.W, e.b});
        prev_dim = out;
        prev_node = node;
        first = false;
    }
    uint32_t trunk_out = prev_dim;

    for (size_t h = 0; h < head_cards.size(); ++h) {
        uint32_t tree = static_cast<uint32_t>(1 + h);
        std::vector<Layer<float>> head;
        prev_dim = trunk_out;
        prev_node = 0;
        for (uint32_t node : arch.realized_private) {
            uint32_t out = space.layer_sizes[arch.private_size[node - 1]];
            auto& e = bank.get({tree, prev_node, node, prev_dim, out});
            head.push_back(Layer<float>{prev_dim, out, Act::relu, e.W, e.b});
            prev_dim = out;
            prev_node = node;
        }
        auto& e = bank.get({tree, prev_node, kOutput, prev_dim, head_cards[h]});
        head.push_back(Layer<float>{prev_dim, head_cards[h], Act::linear, e.W, e.b});
        net.heads.push_back(std::move(head));
    }
    net.validate();
    return net;
}

// ---- controller --------------------------------------------------------------------

namespace {

std::vector<std::vector<double>*> tensor_list(Controller::Tensors& t) {
    std::vector<std::vector<double>*> out{&t.Wf, &t.bf, &t.Wh, &t.bh, &t.start};
    for (auto& s : t.steps) {
        out.push_back(&s.embed);
        out.push_back(&s.Wo);
        out.push_back(&s.bo);
    }
    return out;
}

Controller::Tensors zeros_like(const Controller::Tensors& src) {
    Controller::Tensors z;
    z.Wf.assign(src.Wf.size(), 0.0);
    z.bf.assign(src.bf.size(), 0.0);
    z.Wh.assign(src.Wh.size(), 0.0);
    z.bh.assign(src.bh.size(), 0.0);
    z.start.assign(src.start.size(), 0.0);
    z.steps.resize(src.steps.size());
    for (size_t i = 0; i < src.steps.size(); ++i) {
        z.steps[i].embed.assign(src.steps[i].embed.size(), 0.0);
        z.steps[i].Wo.assign(src.steps[i].Wo.size(), 0.0);
        z.steps[i].bo.assign(src.steps[i].bo.size(), 0.0);
    }
    return z;
}

std::vector<uint32_t> step_arity_of(const SearchSpace& space) {
    std::vector<uint32_t> arity;
    uint32_t n = static_cast<uint32_t>(space.layer_sizes.size());
    for (uint32_t i = 1; i <= space.max_shared_layers; ++i) {
        arity.push_back(i); // parent of shared node i
        arity.push_back(n); // its size
    }
    for (uint32_t j = 1; j <= space.max_private_layers; ++j) {
        arity.push_back(2 * j - 1); // parent of private node j
        arity.push_back(n);
    }
    return arity;
}

} // namespace

Controller Controller::make(const SearchSpace& space, uint64_t seed) {
    space.validate();
    Controller c;
    c.max_shared_ = space.max_shared_layers;
    c.max_private_ = space.max_private_layers;
    c.size_choices_ = static_cast<uint32_t>(space.layer_sizes.size());
    c.arity_ = step_arity_of(space);

    uint32_t H = c.hidden_, E = c.embed_;
    Rng rng(seed);
    auto fill = [&rng](std::vector<double>& v, size_t n) {
        v.resize(n);
        for (auto& x : v) x = rng.normal(0.0, 0.05);
    };
    // weights ~ N(0, 0.05^2), biases 0 so an untrained policy stays near uniform
    fill(c.params.Wf, static_cast<size_t>(H) * (H + E));
    c.params.bf.assign(H, 0.0);
    fill(c.params.Wh, static_cast<size_t>(H) * (H + E));
    c.params.bh.assign(H, 0.0);
    fill(c.params.start, E);
    c.params.steps.resize(c.arity_.size());
    for (size_t t = 0; t < c.arity_.size(); ++t) {
        auto& s = c.params.steps[t];
        fill(s.embed, static_cast<size_t>(c.arity_[t]) * E);
        fill(s.Wo, static_cast<size_t>(c.arity_[t]) * H);
        s.bo.assign(c.arity_[t], 0.0);
    }
    c.adam_m = zeros_like(c.params);
    c.adam_v = zeros_like(c.params);
    return c;
}

std::vector<uint32_t> Controller::decisions_of(const ArchSpec& arch) const {
    if (arch.shared_parent.size() != max_shared_ || arch.private_parent.size() != max_private_ ||
        arch.shared_size.size() != max_shared_ || arch.private_size.size() != max_private_)
        throw DimensionMismatch("arch decision counts vs controller");
    std::vector<uint32_t> d;
    d.reserve(arity_.size());
    for (size_t i = 0; i < max_shared_; ++i) {
        d.push_back(arch.shared_parent[i]);
        d.push_back(arch.shared_size[i]);
    }
    for (size_t j = 0; j < max_private_; ++j) {
        d.push_back(arch.private_parent[j]);
        d.push_back(arch.private_size[j]);
    }
    return d;
}

ArchSpec Controller::arch_of(const std::vector<uint32_t>& decisions,
                             const SearchSpace& space) const {
    if (decisions.size() != arity_.size()) throw DimensionMismatch("decision count");
    ArchSpec a;
    size_t t = 0;
    for (size_t i = 0; i < max_shared_; ++i) {
        a.shared_parent.push_back(decisions[t++]);
        a.shared_size.push_back(decisions[t++]);
    }
    for (size_t j = 0; j < max_private_; ++j) {
        a.private_parent.push_back(decisions[t++]);
        a.private_size.push_back(decisions[t++]);
    }
    a.realize();
    a.validate(space);
    return a;
}

// Recurrent cell and teacher-forced passes. Kept out of the header; tests use
// the public log_prob/gradient entry points.
struct ControllerOps {
    struct Fwd {
        std::vector<std::vector<double>> x, hprev, f, hcand, h, probs;
        double logp = 0.0;
    };

    // f = sigmoid(Wf [h;x] + bf); hc = tanh(Wh [f.*h;x] + bh); h' = (1-f).*h + f.*hc
    static void cell(const Controller& c, const std::vector<double>& hprev,
                     const std::vector<double>& x, std::vector<double>& f,
                     std::vector<double>& hcand, std::vector<double>& hnew) {
        const uint32_t H = c.hidden_, E = c.embed_;
        f.resize(H);
        hcand.resize(H);
        hnew.resize(H);
        for (uint32_t o = 0; o < H; ++o) {
            const double* row = c.params.Wf.data() + static_cast<size_t>(o) * (H + E);
            double acc = c.params.bf[o];
            for (uint32_t k = 0; k < H; ++k) acc += row[k] * hprev[k];
            for (uint32_t e = 0; e < E; ++e) acc += row[H + e] * x[e];
            f[o] = 1.0 / (1.0 + std::exp(-acc));
        }
        for (uint32_t o = 0; o < H; ++o) {
            const double* row = c.params.Wh.data() + static_cast<size_t>(o) * (H + E);
            double acc = c.params.bh[o];
            for (uint32_t k = 0; k < H; ++k) acc += row[k] * (f[k] * hprev[k]);
            for (uint32_t e = 0; e < E; ++e) acc += row[H + e] * x[e];
            hcand[o] = std::tanh(acc);
        }
        for (uint32_t o = 0; o < H; ++o) hnew[o] = (1.0 - f[o]) * hprev[o] + f[o] * hcand[o];
    }

    static std::vector<double> step_input(const Controller& c, size_t t,
                                          const std::vector<uint32_t>& decisions) {
        const uint32_t E = c.embed_;
        if (t == 0) return c.params.start;
        const auto& emb = c.params.steps[t - 1].embed;
        uint32_t prev = decisions[t - 1];
        std::vector<double> x(E);
        for (uint32_t e = 0; e < E; ++e) x[e] = emb[static_cast<size_t>(prev) * E + e];
        return x;
    }

    static std::vector<double> probs_at(const Controller& c, size_t t,
                                        const std::vector<double>& h, double temperature) {
        const uint32_t H = c.hidden_;
        uint32_t a = c.arity_[t];
        const auto& st = c.params.steps[t];
        std::vector<double> z(a);
        for (uint32_t o = 0; o < a; ++o) {
            const double* row = st.Wo.data() + static_cast<size_t>(o) * H;
            double acc = st.bo[o];
            for (uint32_t k = 0; k < H; ++k) acc += row[k] * h[k];
            z[o] = temperature > 0 ? acc / temperature : acc;
        }
        double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (auto& v : z) {
            v = std::exp(v - m);
            sum += v;
        }
        for (auto& v : z) v /= sum;
        return z;
    }

    static Fwd forward(const Controller& c, const std::vector<uint32_t>& decisions) {
        if (decisions.size() != c.arity_.size()) throw DimensionMismatch("decision count");
        size_t S = c.arity_.size();
        Fwd fw;
        fw.x.resize(S);
        fw.hprev.resize(S);
        fw.f.resize(S);
        fw.hcand.resize(S);
        fw.h.resize(S);
        fw.probs.resize(S);
        std::vector<double> h(c.hidden_, 0.0);
        for (size_t t = 0; t < S; ++t) {
            if (decisions[t] >= c.arity_[t]) throw Error("decision out of range");
            fw.x[t] = step_input(c, t, decisions);
            fw.hprev[t] = h;
            cell(c, fw.hprev[t], fw.x[t], fw.f[t], fw.hcand[t], fw.h[t]);
            h = fw.h[t];
            fw.probs[t] = probs_at(c, t, h, 1.0);
            fw.logp += std::log(std::max(fw.probs[t][decisions[t]], 1e-300));
        }
        return fw;
    }

    // accumulates d(coeff * -log p(decisions)) / d theta into g
    static void backward(const Controller& c, const Fwd& fw, const std::vector<uint32_t>& decisions,
                         double coeff, Controller::Tensors& g) {
        const uint32_t H = c.hidden_, E = c.embed_;
        size_t S = c.arity_.size();
        std::vector<double> dh_carry(H, 0.0);
        for (size_t t = S; t-- > 0;) {
            uint32_t a = c.arity_[t];
            const auto& p = fw.probs[t];
            std::vector<double> dlogits(a);
            for (uint32_t o = 0; o < a; ++o)
                dlogits[o] = coeff * (p[o] - (o == decisions[t] ? 1.0 : 0.0));

            auto& gs = g.steps[t];
            const auto& st = c.params.steps[t];
            std::vector<double> dh = dh_carry;
            for (uint32_t o = 0; o < a; ++o) {
                gs.bo[o] += dlogits[o];
                double* grow = gs.Wo.data() + static_cast<size_t>(o) * H;
                const double* wrow = st.Wo.data() + static_cast<size_t>(o) * H;
                for (uint32_t k = 0; k < H; ++k) {
                    grow[k] += dlogits[o] * fw.h[t][k];
                    dh[k] += wrow[k] * dlogits[o];
                }
            }

            const auto& hprev = fw.hprev[t];
            const auto& f = fw.f[t];
            const auto& hc = fw.hcand[t];
            const auto& x = fw.x[t];
            std::vector<double> df(H), dhp(H), dah(H), dx(E, 0.0);
            for (uint32_t k = 0; k < H; ++k) {
                double dhc = dh[k] * f[k];
                df[k] = dh[k] * (hc[k] - hprev[k]);
                dhp[k] = dh[k] * (1.0 - f[k]);
                dah[k] = dhc * (1.0 - hc[k] * hc[k]);
            }
            std::vector<double> dfh(H, 0.0);
            for (uint32_t o = 0; o < H; ++o) {
                const double* wrow = c.params.Wh.data() + static_cast<size_t>(o) * (H + E);
                double* grow = g.Wh.data() + static_cast<size_t>(o) * (H + E);
                g.bh[o] += dah[o];
                for (uint32_t k = 0; k < H; ++k) {
                    grow[k] += dah[o] * (f[k] * hprev[k]);
                    dfh[k] += wrow[k] * dah[o];
                }
                for (uint32_t e = 0; e < E; ++e) {
                    grow[H + e] += dah[o] * x[e];
                    dx[e] += wrow[H + e] * dah[o];
                }
            }
            std::vector<double> daf(H);
            for (uint32_t k = 0; k < H; ++k) {
                df[k] += dfh[k] * hprev[k];
                dhp[k] += dfh[k] * f[k];
                daf[k] = df[k] * f[k] * (1.0 - f[k]);
            }
            for (uint32_t o = 0; o < H; ++o) {
                const double* wrow = c.params.Wf.data() + static_cast<size_t>(o) * (H + E);
                double* grow = g.Wf.data() + static_cast<size_t>(o) * (H + E);
                g.bf[o] += daf[o];
                for (uint32_t k = 0; k < H; ++k) {
                    grow[k] += daf[o] * hprev[k];
                    dhp[k] += wrow[k] * daf[o];
                }
                for (uint32_t e = 0; e < E; ++e) {
                    grow[H + e] += daf[o] * x[e];
                    dx[e] += wrow[H + e] * daf[o];
                }
            }
            if (t == 0) {
                for (uint32_t e = 0; e < E; ++e) g.start[e] += dx[e];
            } else {
                double* emb = g.steps[t - 1].embed.data() +
                              static_cast<size_t>(decisions[t - 1]) * E;
                for (uint32_t e = 0; e < E; ++e) emb[e] += dx[e];
            }
            dh_carry = std::move(dhp);
        }
    }
};

double Controller::log_prob_of(const ArchSpec& arch) const {
    return ControllerOps::forward(*this, decisions_of(arch)).logp;
}

SampledArch sample_architecture(const Controller& c, const SearchSpace& space, Rng& rng,
                                double temperature) {
    space.validate();
    if (c.step_arity() != step_arity_of(space))
        throw DimensionMismatch("controller step layout vs search space");
    if (temperature < 0) throw Error("temperature must be >= 0");

    size_t S = c.step_arity().size();
    std::vector<uint32_t> decisions;
    decisions.reserve(S);
    std::vector<double> h(c.hidden(), 0.0), f, hc, hn;
    SampledArch out;
    for (size_t t = 0; t < S; ++t) {
        auto x = ControllerOps::step_input(c, t, decisions);
        ControllerOps::cell(c, h, x, f, hc, hn);
        h = hn;
        if (temperature == 0.0) {
            auto p = ControllerOps::probs_at(c, t, h, 1.0);
            uint32_t pick = 0;
            for (uint32_t o = 1; o < p.size(); ++o)
                if (p[o] > p[pick]) pick = o;
            decisions.push_back(pick); // degenerate policy: log-prob 0
        } else {
            auto p = ControllerOps::probs_at(c, t, h, temperature);
            double u = rng.unit(); // in (0,1], so cdf walk always terminates
            double acc = 0.0;
            uint32_t pick = static_cast<uint32_t>(p.size()) - 1;
            for (uint32_t o = 0; o < p.size(); ++o) {
                acc += p[o];
                if (u <= acc) {
                    pick = o;
                    break;
                }
            }
            decisions.push_back(pick);
            out.log_prob += std::log(std::max(p[pick], 1e-300));
        }
    }
    out.arch = c.arch_of(decisions, space);
    return out;
}

Controller::Tensors controller_gradients(const Controller& c, const std::vector<Episode>& episodes,
                                         const std::vector<double>& advantages) {
    if (episodes.size() != advantages.size())
        throw DimensionMismatch("episode count vs advantage count");
    Controller::Tensors g = zeros_like(c.params);
    for (size_t i = 0; i < episodes.size(); ++i) {
        auto d = c.decisions_of(episodes[i].arch);
        auto fw = ControllerOps::forward(c, d);
        ControllerOps::backward(c, fw, d, advantages[i], g);
    }
    return g;
}

void controller_update(Controller& c, const std::vector<Episode>& episodes) {
    if (episodes.empty()) throw EmptyDataset("controller update without episodes");
    double mean = 0.0;
    for (const auto& e : episodes) mean += e.reward;
    mean /= static_cast<double>(episodes.size());
    if (!c.baseline_init) {
        c.baseline = mean;
        c.baseline_init = true;
    }
    std::vector<double> adv;
    adv.reserve(episodes.size());
    for (const auto& e : episodes) adv.push_back(e.reward - c.baseline);

    Controller::Tensors g = controller_gradients(c, episodes, adv);

    ++c.adam_step_count;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(c.adam_step_count));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(c.adam_step_count));
    auto ps = tensor_list(c.params);
    auto ms = tensor_list(c.adam_m);
    auto vs = tensor_list(c.adam_v);
    auto gs = tensor_list(g);
    for (size_t i = 0; i < ps.size(); ++i) {
        auto& P = *ps[i];
        auto& M = *ms[i];
        auto& V = *vs[i];
        const auto& G = *gs[i];
        for (size_t j = 0; j < P.size(); ++j) {
            M[j] = b1 * M[j] + (1.0 - b1) * G[j];
            V[j] = b2 * V[j] + (1.0 - b2) * G[j] * G[j];
            P[j] -= c.learning_rate * (M[j] / bc1) / (std::sqrt(V[j] / bc2) + eps);
        }
    }
    c.baseline = c.baseline_decay * c.baseline + (1.0 - c.baseline_decay) * mean;
}

// ---- search ---------------------------------------------------------------------------

void SearchConfig::validate() const {
    if (total_iterations == 0) throw Error("total_iterations must be >= 1");
    if (model_iterations == 0) throw Error("model_iterations must be >= 1");
    if (model_iterations < controller_iterations)
        throw Error("model_iterations must be >= controller_iterations");
    if (controller_batch == 0) throw Error("controller_batch must be >= 1");
    if (model_batch == 0) throw Error("model_batch must be >= 1");
    if (m_epochs == 0) throw Error("m_epochs must be >= 1");
    if (radix < 2) throw Error("radix must be >= 2");
    if (stop_delta < 0) throw Error("stop_delta must be >= 0");
    if (aux_partition_bytes == 0) throw Error("aux_partition_bytes must be >= 1");
}

SearchResult mhas_search(const EncodedRelation& data, const SearchSpace& space,
                         const SearchConfig& cfg) {
    space.validate();
    cfg.validate();
    if (data.row_count() == 0) throw EmptyDataset("search over empty relation");
    if (space.heads != data.column_count())
        throw DimensionMismatch("search space heads != value column count");

    FeatureCodec fc = FeatureCodec::make(data.key_codec, cfg.radix);
    std::vector<uint32_t> cards;
    for (const auto& col : data.value_columns) cards.push_back(col.cardinality());

    ExistenceBitVector exist(0, data.key_codec.domain_size());
    for (uint64_t k : data.keys) exist.set(k, true);
    const uint64_t exist_bytes = exist.serialized_size();
    const uint64_t decode_bytes = DecodeMap::from_relation(data).serialized_size();
    const uint64_t data_bytes = static_cast<uint64_t>(data.row_count()) * data.row_width();
    const size_t m = data.column_count();

    WeightBank bank(derive_seed(cfg.seed, 1));
    Controller controller = Controller::make(space, derive_seed(cfg.seed, 2));
    Rng sample_rng(derive_seed(cfg.seed, 3));

    // full hybrid size with the net's current weights: aux holds exactly the
    // rows the net still misclassifies
    auto loss_of = [&](const MultiTaskNet& net) {
        auto ev = evaluate(net, data);
        RowBlock mis;
        mis.columns = m;
        std::vector<uint32_t> codes(m);
        for (size_t r = 0; r < data.row_count(); ++r) {
            if (ev.row_correct[r]) continue;
            for (size_t c = 0; c < m; ++c) codes[c] = data.columns[c][r];
            mis.push(data.keys[r], codes);
        }
        mis.sort_by_key();
        AuxTable aux = AuxTable::build(std::move(mis), cfg.aux_partition_bytes, cfg.aux_codec,
                                       cfg.aux_codec_level);
        return compression_loss(serialized_size(net), aux.serialized_size(), exist_bytes,
                                decode_bytes, data_bytes);
    };

    SearchResult res;
    double best = std::numeric_limits<double>::infinity();
    ArchSpec best_arch;
    bool have_best = false;
    uint32_t no_improve = 0;
    bool stopped = false;

    auto note = [&](uint32_t iter, const ArchSpec& a, double loss, const char* phase) {
        if (loss <= best - cfg.stop_delta)
            no_improve = 0;
        else
            ++no_improve;
        if (loss < best) {
            best = loss;
            best_arch = a;
            have_best = true;
        }
        res.trace.push_back(TraceRow{iter, a.id(), loss, best, phase});
        if (cfg.patience && no_improve >= cfg.patience) stopped = true;
    };

    uint32_t ctrl_every = cfg.controller_period;
    if (ctrl_every == 0 && cfg.controller_iterations > 0)
        ctrl_every = std::max<uint32_t>(1, cfg.total_iterations / cfg.controller_iterations);
    const uint32_t model_every =
        std::max<uint32_t>(1, cfg.total_iterations / cfg.model_iterations);
    const size_t episodes_per_ctrl =
        (data.row_count() + cfg.controller_batch - 1) / cfg.controller_batch;

    uint32_t model_done = 0, ctrl_done = 0;
    for (uint32_t iter = 1; iter <= cfg.total_iterations && !stopped; ++iter) {
        bool ctrl_turn = ctrl_every > 0 && iter % ctrl_every == 0 &&
                         ctrl_done < cfg.controller_iterations;
        if (ctrl_turn) {
            // one epoch: a policy-gradient step per data batch, single episode each
            ++ctrl_done;
            for (size_t e = 0; e < episodes_per_ctrl && !stopped; ++e) {
                auto s = sample_architecture(controller, space, sample_rng);
                MultiTaskNet net = materialize(s.arch, space, bank, fc, cards);
                double loss = loss_of(net);
                std::vector<Episode> batch;
                batch.push_back(Episode{s.arch, -loss});
                controller_update(controller, batch);
                note(iter, s.arch, loss, "controller");
            }
        } else if (iter % model_every == 0 && model_done < cfg.model_iterations) {
            ++model_done;
            auto s = sample_architecture(controller, space, sample_rng);
            MultiTaskNet net = materialize(s.arch, space, bank, fc, cards);
            TrainConfig tc;
            tc.learning_rate = 0.001; // fresh each iteration, decayed within
            tc.lr_decay = 0.999;
            tc.epochs = cfg.m_epochs;
            tc.batch_size = cfg.model_batch;
            tc.seed = derive_seed(cfg.seed, 1000 + iter);
            tc.stop_delta = cfg.stop_delta;
            train(net, data, tc);
            note(iter, s.arch, loss_of(net), "model");
        }
    }

    if (!have_best) {
        auto s = sample_architecture(controller, space, sample_rng);
        best_arch = s.arch;
        best = loss_of(materialize(s.arch, space, bank, fc, cards));
    }
    res.best_arch = best_arch;
    res.net = materialize(best_arch, space, bank, fc, cards);
    if (cfg.finetune_epochs > 0) {
        TrainConfig ft;
        ft.learning_rate = 0.001;
        ft.lr_decay = 0.999;
        ft.epochs = cfg.finetune_epochs;
        ft.batch_size = cfg.model_batch;
        ft.seed = derive_seed(cfg.seed, 4);
        ft.stop_delta = cfg.stop_delta;
        res.finetune = train(res.net, data, ft);
    }
    res.best_loss = loss_of(res.net);
    res.controller = std::move(controller);
    return res;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::string out = "iteration,arch,loss,best_loss,phase\n";
    char buf[128];
    for (const auto& r : trace) {
        snprintf(buf, sizeof buf, "%u,%" PRIu64 ",%.17g,%.17g,%s\n", r.iteration, r.arch_id,
                 r.loss, r.best_loss, r.phase);
        out += buf;
    }
    return out;
}

} // namespace hybridmap
