#include <cmath>
#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "hybridmap/errors.hpp"
#include "hybridmap/net.hpp"
#include "hybridmap/prng.hpp"

using namespace hybridmap;
using testutil::flatten_weights;

namespace {

// Central finite difference of the batch loss wrt every parameter.
template <typename T>
double max_gradient_error(BasicNet<T>& net, const std::vector<uint64_t>& keys,
                          const std::vector<std::vector<uint32_t>>& targets, double h) {
    std::vector<const uint32_t*> tptrs;
    for (const auto& t : targets) tptrs.push_back(t.data());
    auto analytic = gradients(net, keys.data(), keys.size(), tptrs);

    auto loss_at = [&]() {
        auto probs = forward(net, std::span<const uint64_t>(keys.data(), keys.size()));
        double total = 0;
        for (size_t hd = 0; hd < net.head_count(); ++hd)
            total += cross_entropy(probs[hd], keys.size(), net.head_cardinality(hd),
                                   targets[hd].data());
        return total;
    };

    double worst = 0;
    for (size_t li = 0; li < net.layer_count(); ++li) {
        auto& l = net.layer_at(li);
        auto check = [&](std::vector<T>& params, const std::vector<T>& grad) {
            for (size_t i = 0; i < params.size(); ++i) {
                T saved = params[i];
                params[i] = saved + static_cast<T>(h);
                double up = loss_at();
                params[i] = saved - static_cast<T>(h);
                double down = loss_at();
                params[i] = saved;
                double fd = (up - down) / (2 * h);
                double a = static_cast<double>(grad[i]);
                double denom = std::max(1e-8, std::abs(a) + std::abs(fd));
                double rel = std::abs(a - fd) / denom;
                if (std::abs(a) + std::abs(fd) > 1e-6)
                    worst = std::max(worst, rel);
                else
                    worst = std::max(worst, std::abs(a - fd));
            }
        };
        check(*l.W, analytic.w[li]);
        check(*l.b, analytic.b[li]);
    }
    return worst;
}

} // namespace

TEST_SUITE_BEGIN("neural");

TEST_CASE("all-zero weights produce a uniform softmax") {
    EncodedRelation rel = testutil::mod_relation(32, 4);
    auto net = testutil::zero_net(rel);
    std::vector<uint64_t> keys = {0, 7, 31};
    auto probs = forward(net, std::span<const uint64_t>(keys));
    REQUIRE(probs.size() == 1);
    for (size_t r = 0; r < keys.size(); ++r)
        for (uint32_t c = 0; c < 4; ++c)
            CHECK(probs[0][r * 4 + c] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("bias steering a logit wins the argmax") {
    EncodedRelation rel = testutil::mod_relation(16, 5);
    auto net = testutil::zero_net(rel);
    (*net.heads[0][0].b)[3] = 10.0f;
    std::vector<uint64_t> keys = {9};
    auto codes = predict_codes(net, std::span<const uint64_t>(keys));
    CHECK(codes[0][0] == 3);
}

TEST_CASE("argmax ties break to the lowest code") {
    EncodedRelation rel = testutil::mod_relation(8, 6);
    auto net = testutil::zero_net(rel);
    std::vector<uint64_t> keys = {0, 5};
    auto codes = predict_codes(net, std::span<const uint64_t>(keys));
    CHECK(codes[0][0] == 0);
    CHECK(codes[0][1] == 0);
}

TEST_CASE("batched forward equals per-key forwards") {
    EncodedRelation rel = testutil::mod_relation(5000, 7, 6000);
    auto net = testutil::random_net(rel, {24}, {8}, 3);
    std::vector<uint64_t> keys(1000);
    Rng rng(5);
    for (auto& k : keys) k = rng.bounded(6000);

    auto batched = forward(net, std::span<const uint64_t>(keys));
    for (size_t r = 0; r < keys.size(); ++r) {
        std::vector<uint64_t> one = {keys[r]};
        auto single = forward(net, std::span<const uint64_t>(one));
        for (uint32_t c = 0; c < 7; ++c)
            CHECK(std::abs(static_cast<double>(batched[0][r * 7 + c]) -
                           static_cast<double>(single[0][c])) <= 1e-12);
    }
}

TEST_CASE("softmax rows sum to one on random nets") {
    EncodedRelation rel = testutil::mod_relation(512, 9);
    for (uint64_t seed = 0; seed < 4; ++seed) {
        auto net = testutil::random_net(rel, {16, 12}, {10}, seed);
        std::vector<uint64_t> keys(256);
        Rng rng(seed + 100);
        for (auto& k : keys) k = rng.bounded(512);
        auto probs = forward(net, std::span<const uint64_t>(keys));
        for (size_t r = 0; r < keys.size(); ++r) {
            double sum = 0;
            for (uint32_t c = 0; c < 9; ++c) sum += probs[0][r * 9 + c];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("cross_entropy analytic values") {
    std::vector<float> certain = {1.0f, 0.0f};
    std::vector<uint32_t> target0 = {0};
    CHECK(cross_entropy(certain, 1, 2, target0.data()) == doctest::Approx(0.0).epsilon(1e-9));

    std::vector<float> uniform = {0.5f, 0.5f};
    CHECK(cross_entropy(uniform, 1, 2, target0.data()) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-6));

    std::vector<uint32_t> bad = {2};
    CHECK_THROWS_AS(cross_entropy(uniform, 1, 2, bad.data()), CodeOutOfRange);
}

TEST_CASE("cross_entropy matches a naive per-row loop") {
    Rng rng(77);
    size_t rows = 5;
    uint32_t card = 7;
    std::vector<double> probs(rows * card);
    std::vector<uint32_t> targets(rows);
    for (size_t r = 0; r < rows; ++r) {
        double sum = 0;
        for (uint32_t c = 0; c < card; ++c) {
            probs[r * card + c] = rng.unit();
            sum += probs[r * card + c];
        }
        for (uint32_t c = 0; c < card; ++c) probs[r * card + c] /= sum;
        targets[r] = static_cast<uint32_t>(rng.bounded(card));
    }
    double naive = 0;
    for (size_t r = 0; r < rows; ++r) naive += -std::log(probs[r * card + targets[r]]);
    naive /= static_cast<double>(rows);
    CHECK(cross_entropy(probs, rows, card, targets.data()) ==
          doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("finite differences confirm gradients over 10 random double nets") {
    Rng meta(2024);
    int checked = 0;
    for (int trial = 0; checked < 10; ++trial) {
        REQUIRE(trial < 100); // margin rejections must stay rare
        size_t n = 24 + meta.bounded(16);
        uint32_t card1 = 2 + static_cast<uint32_t>(meta.bounded(4));
        uint32_t card2 = 2 + static_cast<uint32_t>(meta.bounded(4));
        std::vector<uint32_t> c1(n), c2(n);
        for (size_t i = 0; i < n; ++i) {
            c1[i] = static_cast<uint32_t>(meta.bounded(card1));
            c2[i] = static_cast<uint32_t>(meta.bounded(card2));
        }
        EncodedRelation rel = testutil::make_relation(n, {{card1, c1}, {card2, c2}});
        auto net = testutil::random_net<double>(rel, {6}, {5}, 1000 + trial, 16);

        std::vector<uint64_t> keys(8);
        for (auto& k : keys) k = meta.bounded(n);
        // relu kinks within reach of the FD step make the comparison undefined
        if (testutil::min_relu_margin(net, keys) < 5e-3) continue;
        ++checked;

        std::vector<std::vector<uint32_t>> targets = {{}, {}};
        for (uint64_t k : keys) {
            targets[0].push_back(c1[k]);
            targets[1].push_back(c2[k]);
        }
        double err = max_gradient_error(net, keys, targets, 1e-4);
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("gradient is near zero at a one-hot-perfect net") {
    EncodedRelation rel = testutil::make_relation(4, {{3, {1, 1, 1, 1}}});
    auto net = testutil::zero_net<double>(rel);
    (*net.heads[0][0].b)[1] = 60.0; // p(target) ~= 1 for every row
    std::vector<uint64_t> keys = {0, 1, 2, 3};
    std::vector<uint32_t> targets = {1, 1, 1, 1};
    std::vector<const uint32_t*> tptrs = {targets.data()};
    auto g = gradients(net, keys.data(), keys.size(), tptrs);
    double norm = 0;
    for (size_t li = 0; li < net.layer_count(); ++li) {
        for (double v : g.w[li]) norm = std::max(norm, std::abs(v));
        for (double v : g.b[li]) norm = std::max(norm, std::abs(v));
    }
    CHECK(norm <= 1e-6);
}

TEST_CASE("batch gradient is the mean of per-row gradients") {
    EncodedRelation rel = testutil::mod_relation(64, 3);
    auto net = testutil::random_net<double>(rel, {8}, {}, 9);

    auto grad_of = [&](const std::vector<uint64_t>& keys) {
        std::vector<uint32_t> targets;
        for (uint64_t k : keys) targets.push_back(static_cast<uint32_t>(k % 3));
        std::vector<const uint32_t*> tptrs = {targets.data()};
        return gradients(net, keys.data(), keys.size(), tptrs);
    };

    auto g1 = grad_of({5});
    auto g2 = grad_of({41});
    auto both = grad_of({5, 41});
    auto dup = grad_of({5, 5, 41, 41});

    auto close = [](double a, double b) {
        return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    };
    for (size_t li = 0; li < net.layer_count(); ++li) {
        for (size_t i = 0; i < both.w[li].size(); ++i) {
            CHECK(close(both.w[li][i], (g1.w[li][i] + g2.w[li][i]) / 2));
            CHECK(close(dup.w[li][i], both.w[li][i]));
        }
        for (size_t i = 0; i < both.b[li].size(); ++i)
            CHECK(close(both.b[li][i], (g1.b[li][i] + g2.b[li][i]) / 2));
    }
}

TEST_CASE("a tiny net learns value = key mod 2") {
    EncodedRelation rel = testutil::mod_relation(16, 2);
    auto net = testutil::random_net(rel, {8}, {}, 4, 16);
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.lr_decay = 1.0;
    cfg.epochs = 500;
    cfg.batch_size = 16;
    cfg.stop_delta = 0.0;
    auto result = train(net, rel, cfg);
    CHECK(result.memorization == 1.0);
    CHECK(result.head_accuracy[0] == 1.0);
    CHECK(result.epochs_run <= 500);
}

TEST_CASE("zero epochs leave weights untouched") {
    EncodedRelation rel = testutil::mod_relation(64, 4);
    auto net = testutil::random_net(rel, {12}, {}, 8);
    auto before = flatten_weights(net);
    auto initial = evaluate(net, rel);

    TrainConfig cfg;
    cfg.epochs = 0;
    auto result = train(net, rel, cfg);
    CHECK(flatten_weights(net) == before);
    CHECK(result.epochs_run == 0);
    CHECK(result.memorization == doctest::Approx(initial.memorization));
}

TEST_CASE("training is bit-identical under the same seed") {
    EncodedRelation rel = testutil::mod_relation(500, 5, 700);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 64;
    cfg.seed = 31;

    auto net1 = testutil::random_net(rel, {16}, {8}, 12);
    auto net2 = testutil::random_net(rel, {16}, {8}, 12);
    auto r1 = train(net1, rel, cfg);
    auto r2 = train(net2, rel, cfg);
    CHECK(flatten_weights(net1) == flatten_weights(net2));
    CHECK(r1.final_loss == r2.final_loss);
    CHECK(r1.epoch_losses == r2.epoch_losses);
}

TEST_CASE("full-batch loss is nonincreasing for a convex head-only net") {
    EncodedRelation rel = testutil::mod_relation(256, 4);
    auto net = testutil::random_net(rel, {}, {}, 21); // single linear layer per head
    REQUIRE(net.shared.empty());
    REQUIRE(net.heads[0].size() == 1);

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.lr_decay = 1.0;
    cfg.epochs = 30;
    cfg.batch_size = 256;
    cfg.stop_delta = 0.0;
    auto result = train(net, rel, cfg);
    for (size_t e = 1; e < result.epoch_losses.size(); ++e)
        CHECK(result.epoch_losses[e] <= result.epoch_losses[e - 1] + 1e-12);
}

TEST_CASE("train validates inputs") {
    EncodedRelation empty = testutil::mod_relation(0, 2, 8);
    auto net = testutil::zero_net(empty);
    TrainConfig cfg;
    CHECK_THROWS_AS(train(net, empty, cfg), EmptyDataset);

    EncodedRelation two = testutil::make_relation(4, {{2, {0, 1, 0, 1}}, {2, {1, 0, 1, 0}}});
    auto one_head = testutil::zero_net(testutil::mod_relation(4, 2));
    CHECK_THROWS_AS(train(one_head, two, cfg), DimensionMismatch);
}

TEST_CASE("serialization round-trips and sizes match the layout arithmetic") {
    EncodedRelation rel = testutil::mod_relation(300, 6, 400);
    auto net = testutil::random_net(rel, {10, 7}, {5}, 17);
    Bytes blob = serialize(net);
    CHECK(blob.size() == serialized_size(net));

    size_t header = 4 + 2 + 1 + 1 + 4 + net.features.groups.size() * 24;
    header += 4 + net.shared.size() * 9;
    header += 4;
    for (const auto& head : net.heads) header += 4 + head.size() * 9;
    CHECK(blob.size() == header + 4 * net.param_count());

    MultiTaskNet back = deserialize_net(blob);
    std::vector<uint64_t> keys = {0, 1, 399};
    auto p1 = forward(net, std::span<const uint64_t>(keys));
    auto p2 = forward(back, std::span<const uint64_t>(keys));
    CHECK(p1 == p2);
    CHECK(serialize(back) == blob);
}

TEST_CASE("corrupt model blobs are rejected") {
    EncodedRelation rel = testutil::mod_relation(32, 3);
    auto net = testutil::random_net(rel, {6}, {}, 2);
    Bytes blob = serialize(net);

    Bytes truncated(blob.begin(), blob.end() - 5);
    CHECK_THROWS_AS(deserialize_net(truncated), CorruptBlob);

    Bytes bad_magic = blob;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_net(bad_magic), CorruptBlob);

    Bytes bad_version = blob;
    bad_version[4] = 9;
    CHECK_THROWS_AS(deserialize_net(bad_version), CorruptBlob);

    Bytes trailing = blob;
    trailing.push_back(0);
    CHECK_THROWS_AS(deserialize_net(trailing), CorruptBlob);
}

TEST_CASE("evaluate reports per-head and row-exact accuracy") {
    // Column 0 is always code 0 (zero net predicts it), column 1 never is.
    EncodedRelation rel =
        testutil::make_relation(8, {{2, {0, 0, 0, 0, 0, 0, 0, 0}}, {2, {1, 1, 1, 1, 0, 0, 0, 0}}});
    auto net = testutil::zero_net(rel);
    auto eval = evaluate(net, rel);
    CHECK(eval.head_accuracy[0] == 1.0);
    CHECK(eval.head_accuracy[1] == 0.5);
    CHECK(eval.memorization == 0.5);
    REQUIRE(eval.row_correct.size() == 8);
    for (size_t i = 0; i < 8; ++i) CHECK(eval.row_correct[i] == (i < 4 ? 0 : 1));
}

TEST_SUITE_END();
