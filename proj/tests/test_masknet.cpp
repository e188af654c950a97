#include <cmath>
#include <vector>

#include "doctest.h"
#include "mcse/masknet.hpp"
#include "test_util.hpp"

using mcse::forward;
using mcse::init_masknet;
using mcse::make_masknet;
using mcse::MaskNet;
using mcse::MaskPair;
using mcse::TrainBatch;
using mcse::TrainExample;
using mcse::train_step;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop reference for the whole network in inference mode. Works
// element by element with std::vector state, independent of the Eigen path.
std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>> oracle_forward(
    const MaskNet& net, const Eigen::MatrixXd& features) {
    const int D = net.input_dim;
    const int H = net.hidden;
    const int T = static_cast<int>(features.rows());

    // one LSTM direction as a plain recurrence over (possibly reversed) time
    auto run_dir = [&](const mcse::LstmParams& p, bool reverse) {
        std::vector<std::vector<double>> hs(static_cast<std::size_t>(T),
                                            std::vector<double>(static_cast<std::size_t>(H)));
        std::vector<double> h(static_cast<std::size_t>(H), 0.0);
        std::vector<double> c(static_cast<std::size_t>(H), 0.0);
        for (int k = 0; k < T; ++k) {
            const int t = reverse ? T - 1 - k : k;
            std::vector<double> hn(static_cast<std::size_t>(H));
            std::vector<double> cn(static_cast<std::size_t>(H));
            for (int j = 0; j < H; ++j) {
                double zi = p.b(j), zf = p.b(H + j), zg = p.b(2 * H + j), zo = p.b(3 * H + j);
                for (int d = 0; d < D; ++d) {
                    const double x = features(t, d);
                    zi += p.w_ih(j, d) * x;
                    zf += p.w_ih(H + j, d) * x;
                    zg += p.w_ih(2 * H + j, d) * x;
                    zo += p.w_ih(3 * H + j, d) * x;
                }
                for (int q = 0; q < H; ++q) {
                    const double hp = h[static_cast<std::size_t>(q)];
                    zi += p.w_hh(j, q) * hp;
                    zf += p.w_hh(H + j, q) * hp;
                    zg += p.w_hh(2 * H + j, q) * hp;
                    zo += p.w_hh(3 * H + j, q) * hp;
                }
                const double gi = sig(zi), gf = sig(zf), gg = std::tanh(zg), go = sig(zo);
                cn[static_cast<std::size_t>(j)] = gf * c[static_cast<std::size_t>(j)] + gi * gg;
                hn[static_cast<std::size_t>(j)] =
                    go * std::tanh(cn[static_cast<std::size_t>(j)]);
            }
            h = hn;
            c = cn;
            hs[static_cast<std::size_t>(t)] = h;
        }
        return hs;
    };

    const auto hf = run_dir(net.fwd, false);
    const auto hb = run_dir(net.bwd, true);

    std::vector<std::vector<double>> speech(static_cast<std::size_t>(T),
                                            std::vector<double>(static_cast<std::size_t>(D)));
    auto noise = speech;
    for (int t = 0; t < T; ++t) {
        std::vector<double> h1(static_cast<std::size_t>(2 * H));
        for (int j = 0; j < H; ++j) {
            h1[static_cast<std::size_t>(j)] = hf[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
            h1[static_cast<std::size_t>(H + j)] =
                hb[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
        }
        std::vector<double> a2(static_cast<std::size_t>(D));
        for (int r = 0; r < D; ++r) {
            double z = net.l2_b(r);
            for (int q = 0; q < 2 * H; ++q) z += net.l2_w(r, q) * h1[static_cast<std::size_t>(q)];
            a2[static_cast<std::size_t>(r)] = std::max(0.0, z);
        }
        std::vector<double> a3(static_cast<std::size_t>(D));
        for (int r = 0; r < D; ++r) {
            double z = net.l3_b(r);
            for (int q = 0; q < D; ++q) z += net.l3_w(r, q) * a2[static_cast<std::size_t>(q)];
            a3[static_cast<std::size_t>(r)] = std::min(1.0, std::max(0.0, z));
        }
        for (int r = 0; r < 2 * D; ++r) {
            double z = net.l4_b(r);
            for (int q = 0; q < D; ++q) z += net.l4_w(r, q) * a3[static_cast<std::size_t>(q)];
            const double v = sig(z);
            if (r < D)
                speech[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)] = v;
            else
                noise[static_cast<std::size_t>(t)][static_cast<std::size_t>(r - D)] = v;
        }
    }
    return {speech, noise};
}

Eigen::MatrixXd random_features(int frames, int dim, std::uint64_t seed) {
    mcse::Rng rng(seed);
    Eigen::MatrixXd f(frames, dim);
    for (int t = 0; t < frames; ++t)
        for (int d = 0; d < dim; ++d) f(t, d) = rng.uniform(-1.5, 1.5);
    return f;
}

MaskPair random_targets(int frames, int dim, std::uint64_t seed) {
    mcse::Rng rng(seed);
    MaskPair m;
    m.speech.resize(frames, dim);
    for (int t = 0; t < frames; ++t)
        for (int d = 0; d < dim; ++d) m.speech(t, d) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    m.noise = Eigen::MatrixXd::Ones(frames, dim) - m.speech;
    return m;
}

// All parameter tensors of a net, for generic sweeps.
std::vector<std::pair<double*, Eigen::Index>> param_spans(MaskNet& net) {
    return {
        {net.fwd.w_ih.data(), net.fwd.w_ih.size()}, {net.fwd.w_hh.data(), net.fwd.w_hh.size()},
        {net.fwd.b.data(), net.fwd.b.size()},       {net.bwd.w_ih.data(), net.bwd.w_ih.size()},
        {net.bwd.w_hh.data(), net.bwd.w_hh.size()}, {net.bwd.b.data(), net.bwd.b.size()},
        {net.l2_w.data(), net.l2_w.size()},         {net.l2_b.data(), net.l2_b.size()},
        {net.l3_w.data(), net.l3_w.size()},         {net.l3_b.data(), net.l3_b.size()},
        {net.l4_w.data(), net.l4_w.size()},         {net.l4_b.data(), net.l4_b.size()},
    };
}

bool nets_identical(const MaskNet& a, const MaskNet& b) {
    MaskNet& am = const_cast<MaskNet&>(a);
    MaskNet& bm = const_cast<MaskNet&>(b);
    auto sa = param_spans(am), sb = param_spans(bm);
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (sa[i].second != sb[i].second) return false;
        for (Eigen::Index j = 0; j < sa[i].second; ++j)
            if (sa[i].first[j] != sb[i].first[j]) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("masknet") {

TEST_CASE("a zero network outputs 0.5 everywhere") {
    const MaskNet net = make_masknet(6, 4);
    const MaskPair m = forward(net, random_features(5, 6, 1), false, 0);
    CHECK(m.speech.isApproxToConstant(0.5, 0.0));
    CHECK(m.noise.isApproxToConstant(0.5, 0.0));
}

TEST_CASE("standard architecture produces 513-wide masks for a single frame") {
    const MaskNet net = init_masknet(513, 256, 2);
    const MaskPair m = forward(net, random_features(1, 513, 3), false, 0);
    CHECK(m.speech.rows() == 1);
    CHECK(m.speech.cols() == 513);
    CHECK(m.noise.rows() == 1);
    CHECK(m.noise.cols() == 513);
    CHECK(m.speech.minCoeff() > 0.0);
    CHECK(m.speech.maxCoeff() < 1.0);
}

TEST_CASE("forward matches the scalar recurrence oracle") {
    for (auto [dim, hidden, frames, seed] :
         {std::tuple{6, 4, 3, 10}, std::tuple{5, 3, 7, 11}}) {
        const MaskNet net = init_masknet(dim, hidden, static_cast<std::uint64_t>(seed));
        const Eigen::MatrixXd feats =
            random_features(frames, dim, static_cast<std::uint64_t>(seed) + 100);
        const MaskPair got = forward(net, feats, false, 0);
        const auto [speech, noise] = oracle_forward(net, feats);
        for (int t = 0; t < frames; ++t)
            for (int d = 0; d < dim; ++d) {
                CHECK(std::abs(got.speech(t, d) -
                               speech[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)]) <
                      1e-10);
                CHECK(std::abs(got.noise(t, d) -
                               noise[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)]) <
                      1e-10);
            }
    }
}

TEST_CASE("inference is deterministic and ignores the seed") {
    const MaskNet net = init_masknet(6, 4, 20);
    const Eigen::MatrixXd feats = random_features(4, 6, 21);
    const MaskPair a = forward(net, feats, false, 1);
    const MaskPair b = forward(net, feats, false, 999);
    CHECK(a.speech == b.speech);
    CHECK(a.noise == b.noise);
}

TEST_CASE("training mode is seeded and reproducible") {
    const MaskNet net = init_masknet(6, 4, 22);
    const Eigen::MatrixXd feats = random_features(8, 6, 23);
    const MaskPair a = forward(net, feats, true, 7);
    const MaskPair b = forward(net, feats, true, 7);
    const MaskPair c = forward(net, feats, true, 8);
    CHECK(a.speech == b.speech);
    CHECK((a.speech - c.speech).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("every gradient matches central finite differences") {
    const int dim = 6, hidden = 4;
    MaskNet net = init_masknet(dim, hidden, 30);
    TrainBatch batch;
    batch.push_back({random_features(3, dim, 31), random_targets(3, dim, 32)});
    batch.push_back({random_features(2, dim, 33), random_targets(2, dim, 34)});
    const std::uint64_t seed = 5;

    auto [grads, loss] = mcse::masknet_gradients(net, batch, seed);
    CHECK(loss > 0.0);

    auto net_spans = param_spans(net);
    MaskNet grads_as_net = make_masknet(dim, hidden);
    grads_as_net.fwd = grads.fwd;
    grads_as_net.bwd = grads.bwd;
    grads_as_net.l2_w = grads.l2_w;
    grads_as_net.l2_b = grads.l2_b;
    grads_as_net.l3_w = grads.l3_w;
    grads_as_net.l3_b = grads.l3_b;
    grads_as_net.l4_w = grads.l4_w;
    grads_as_net.l4_b = grads.l4_b;
    auto grad_spans = param_spans(grads_as_net);

    const double eps = 1e-4;
    double worst = 0.0;
    for (std::size_t s = 0; s < net_spans.size(); ++s) {
        for (Eigen::Index j = 0; j < net_spans[s].second; ++j) {
            double* theta = net_spans[s].first + j;
            const double saved = *theta;
            *theta = saved + eps;
            const double up = mcse::training_loss(net, batch, seed);
            *theta = saved - eps;
            const double down = mcse::training_loss(net, batch, seed);
            *theta = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double an = grad_spans[s].first[j];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("a zero learning rate is an exact no-op") {
    const MaskNet net = init_masknet(6, 4, 40);
    TrainBatch batch;
    batch.push_back({random_features(4, 6, 41), random_targets(4, 6, 42)});
    auto [updated, loss] = train_step(net, batch, 0.0, 3);
    CHECK(loss > 0.0);
    CHECK(nets_identical(net, updated));
}

TEST_CASE("training on a learnable rule reduces the loss") {
    const int dim = 8, hidden = 6;
    MaskNet net = init_masknet(dim, hidden, 50);
    TrainBatch batch;
    for (int i = 0; i < 4; ++i) {
        TrainExample ex;
        ex.features = random_features(12, dim, 51 + static_cast<std::uint64_t>(i));
        ex.target.speech = (ex.features.array() > 0.0).cast<double>();
        ex.target.noise = Eigen::MatrixXd::Ones(12, dim) - ex.target.speech;
        batch.push_back(std::move(ex));
    }
    double initial = 0.0;
    double final_loss = 0.0;
    for (int step = 0; step < 150; ++step) {
        auto [updated, loss] = train_step(net, batch, 5.0, 7);
        net = std::move(updated);
        if (step == 0) initial = loss;
        final_loss = loss;
    }
    CHECK(final_loss < 0.8 * initial);
}

TEST_CASE("empty batches are rejected") {
    const MaskNet net = init_masknet(6, 4, 60);
    CHECK_THROWS_AS(train_step(net, {}, 0.1, 0), mcse::Error);
}

TEST_CASE("save/load round trip is exact on a fresh net") {
    testutil::TempDir tmp("net_io");
    const MaskNet net = init_masknet(513, 256, 70);
    mcse::save_net(tmp.str("weights"), net);
    const MaskNet loaded = mcse::load_net(tmp.str("weights"));
    CHECK(nets_identical(net, loaded));

    mcse::save_net(tmp.str("weights2"), loaded);
    CHECK(testutil::read_file(tmp.str("weights.bin")) ==
          testutil::read_file(tmp.str("weights2.bin")));
    CHECK(testutil::read_file(tmp.str("weights.json")) ==
          testutil::read_file(tmp.str("weights2.json")));
}

TEST_CASE("a truncated blob names the offending tensor") {
    testutil::TempDir tmp("net_trunc");
    mcse::save_net(tmp.str("w"), init_masknet(513, 256, 71));
    std::string blob = testutil::read_file(tmp.str("w.bin"));
    blob.resize(blob.size() - 100);
    std::ofstream f(tmp.str("w.bin"), std::ios::binary | std::ios::trunc);
    f << blob;
    f.close();
    try {
        mcse::load_net(tmp.str("w"));
        FAIL("expected an error");
    } catch (const mcse::Error& e) {
        CHECK(e.code() == "net-format");
        CHECK(std::string(e.what()).find("l4.b") != std::string::npos);
    }
}

TEST_CASE("a manifest with off-architecture shapes is rejected") {
    testutil::TempDir tmp("net_shape");
    mcse::save_net(tmp.str("w"), init_masknet(513, 256, 72));
    std::string manifest = testutil::read_file(tmp.str("w.json"));
    const std::string needle = "[\n        513,\n        1026\n      ]";
    // row-major l2.w shape is [513, 512]
    const auto pos = manifest.find("\"l2.w\"");
    REQUIRE(pos != std::string::npos);
    const auto shape_pos = manifest.find("512", pos);
    REQUIRE(shape_pos != std::string::npos);
    manifest.replace(shape_pos, 3, "100");
    std::ofstream f(tmp.str("w.json"), std::ios::trunc);
    f << manifest;
    f.close();
    try {
        mcse::load_net(tmp.str("w"));
        FAIL("expected an error");
    } catch (const mcse::Error& e) {
        CHECK(e.code() == "net-format");
    }
    (void)needle;
}

TEST_CASE("unknown tensor names are rejected") {
    testutil::TempDir tmp("net_name");
    mcse::save_net(tmp.str("w"), init_masknet(513, 256, 73));
    std::string manifest = testutil::read_file(tmp.str("w.json"));
    const auto pos = manifest.find("l3.w");
    REQUIRE(pos != std::string::npos);
    std::string patched = manifest;
    patched.replace(pos, 4, "l9.w");
    std::ofstream f(tmp.str("w.json"), std::ios::trunc);
    f << patched;
    f.close();
    try {
        mcse::load_net(tmp.str("w"));
        FAIL("expected an error");
    } catch (const mcse::Error& e) {
        CHECK(e.code() == "net-format");
        CHECK(std::string(e.what()).find("l9.w") != std::string::npos);
    }
}

}  // TEST_SUITE
