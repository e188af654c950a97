#include "mcse/masknet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "nlohmann/json.hpp"

namespace mcse {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kBceEps = 1e-7;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Activations of one direction, columns indexed by actual frame t.
struct LstmTrace {
    MatrixXd i, f, g, o, c, tanh_c, h;  // hidden x T each
};

struct ForwardTrace {
    MatrixXd x;  // input_dim x T
    LstmTrace fwd, bwd;
    MatrixXd h1, m1, h1d;       // 2*hidden x T
    MatrixXd z2, a2, m2, a2d;   // input_dim x T
    MatrixXd z3, a3, m3, a3d;   // input_dim x T
    MatrixXd z4, p;             // 2*input_dim x T
    bool train_mode = false;
};

void run_lstm(const LstmParams& params, const MatrixXd& x, bool reverse, int hidden,
              LstmTrace& trace) {
    const Index T = x.cols();
    trace.i.resize(hidden, T);
    trace.f.resize(hidden, T);
    trace.g.resize(hidden, T);
    trace.o.resize(hidden, T);
    trace.c.resize(hidden, T);
    trace.tanh_c.resize(hidden, T);
    trace.h.resize(hidden, T);

    // Input projection for all frames at once; the recurrence stays sequential.
    MatrixXd zx = params.w_ih * x;
    zx.colwise() += params.b;

    VectorXd h = VectorXd::Zero(hidden);
    VectorXd c = VectorXd::Zero(hidden);
    VectorXd z(4 * hidden);
    for (Index k = 0; k < T; ++k) {
        const Index t = reverse ? T - 1 - k : k;
        z = zx.col(t);
        z.noalias() += params.w_hh * h;
        for (int j = 0; j < hidden; ++j) {
            const double gi = sigmoid(z(j));
            const double gf = sigmoid(z(hidden + j));
            const double gg = std::tanh(z(2 * hidden + j));
            const double go = sigmoid(z(3 * hidden + j));
            const double cc = gf * c(j) + gi * gg;
            const double tc = std::tanh(cc);
            trace.i(j, t) = gi;
            trace.f(j, t) = gf;
            trace.g(j, t) = gg;
            trace.o(j, t) = go;
            trace.c(j, t) = cc;
            trace.tanh_c(j, t) = tc;
            c(j) = cc;
            h(j) = go * tc;
        }
        trace.h.col(t) = h;
    }
}

// Dropout masks are drawn in a fixed order (L1 columns first, then L2,
// then L3; within a matrix column-major) so a seed pins the whole pattern
// independent of anything else.
MatrixXd draw_dropout(Rng& rng, Index rows, Index cols, double drop_prob) {
    const double keep = 1.0 - drop_prob;
    const double scale = 1.0 / keep;
    MatrixXd m(rows, cols);
    for (Index t = 0; t < cols; ++t)
        for (Index j = 0; j < rows; ++j) m(j, t) = rng.uniform() < keep ? scale : 0.0;
    return m;
}

void forward_trace(const MaskNet& net, const Eigen::MatrixXd& features, bool train_mode,
                   std::uint64_t rng_seed, ForwardTrace& tr) {
    require(features.cols() == net.input_dim, "shape",
            "feature width " + std::to_string(features.cols()) + " does not match input dim " +
                std::to_string(net.input_dim));
    require(features.rows() >= 1, "shape", "feature matrix must contain frames");

    const int D = net.input_dim;
    const int H = net.hidden;
    const Index T = features.rows();

    tr.train_mode = train_mode;
    tr.x = features.transpose();
    run_lstm(net.fwd, tr.x, /*reverse=*/false, H, tr.fwd);
    run_lstm(net.bwd, tr.x, /*reverse=*/true, H, tr.bwd);

    tr.h1.resize(2 * H, T);
    tr.h1.topRows(H) = tr.fwd.h;
    tr.h1.bottomRows(H) = tr.bwd.h;

    Rng rng(rng_seed);
    if (train_mode) {
        tr.m1 = draw_dropout(rng, 2 * H, T, net.dropout_prob);
        tr.h1d = tr.h1.cwiseProduct(tr.m1);
    } else {
        tr.h1d = tr.h1;
    }

    tr.z2.noalias() = net.l2_w * tr.h1d;
    tr.z2.colwise() += net.l2_b;
    tr.a2 = tr.z2.cwiseMax(0.0);
    if (train_mode) {
        tr.m2 = draw_dropout(rng, D, T, net.dropout_prob);
        tr.a2d = tr.a2.cwiseProduct(tr.m2);
    } else {
        tr.a2d = tr.a2;
    }

    tr.z3.noalias() = net.l3_w * tr.a2d;
    tr.z3.colwise() += net.l3_b;
    tr.a3 = tr.z3.cwiseMax(0.0).cwiseMin(1.0);
    if (train_mode) {
        tr.m3 = draw_dropout(rng, D, T, net.dropout_prob);
        tr.a3d = tr.a3.cwiseProduct(tr.m3);
    } else {
        tr.a3d = tr.a3;
    }

    tr.z4.noalias() = net.l4_w * tr.a3d;
    tr.z4.colwise() += net.l4_b;
    tr.p = tr.z4.unaryExpr([](double v) { return sigmoid(v); });
}

MaskPair trace_to_masks(const ForwardTrace& tr, int input_dim) {
    MaskPair out;
    out.speech = tr.p.topRows(input_dim).transpose();
    out.noise = tr.p.bottomRows(input_dim).transpose();
    return out;
}

double example_bce(const ForwardTrace& tr, const TrainExample& ex, int input_dim) {
    MaskPair pred = trace_to_masks(tr, input_dim);
    return bce_loss(pred, ex.target);
}

MaskNetGrads make_grads(const MaskNet& net) {
    MaskNetGrads g;
    auto zero_like = [](const LstmParams& p) {
        LstmParams z;
        z.w_ih = MatrixXd::Zero(p.w_ih.rows(), p.w_ih.cols());
        z.w_hh = MatrixXd::Zero(p.w_hh.rows(), p.w_hh.cols());
        z.b = VectorXd::Zero(p.b.size());
        return z;
    };
    g.fwd = zero_like(net.fwd);
    g.bwd = zero_like(net.bwd);
    g.l2_w = MatrixXd::Zero(net.l2_w.rows(), net.l2_w.cols());
    g.l2_b = VectorXd::Zero(net.l2_b.size());
    g.l3_w = MatrixXd::Zero(net.l3_w.rows(), net.l3_w.cols());
    g.l3_b = VectorXd::Zero(net.l3_b.size());
    g.l4_w = MatrixXd::Zero(net.l4_w.rows(), net.l4_w.cols());
    g.l4_b = VectorXd::Zero(net.l4_b.size());
    return g;
}

void backprop_lstm(const LstmParams& params, const LstmTrace& trace, const MatrixXd& x,
                   const MatrixXd& dh_layer, bool reverse, int hidden, LstmParams& grads) {
    const Index T = x.cols();
    MatrixXd dz_all = MatrixXd::Zero(4 * hidden, T);
    VectorXd dh_carry = VectorXd::Zero(hidden);
    VectorXd dc_carry = VectorXd::Zero(hidden);
    VectorXd dz(4 * hidden);

    for (Index k = T - 1; k >= 0; --k) {
        const Index t = reverse ? T - 1 - k : k;
        const Index t_prev = reverse ? t + 1 : t - 1;  // valid only when k > 0
        for (int j = 0; j < hidden; ++j) {
            const double gi = trace.i(j, t);
            const double gf = trace.f(j, t);
            const double gg = trace.g(j, t);
            const double go = trace.o(j, t);
            const double tc = trace.tanh_c(j, t);
            const double c_prev = k > 0 ? trace.c(j, t_prev) : 0.0;

            const double dh = dh_layer(j, t) + dh_carry(j);
            const double dgo = dh * tc;
            const double dc = dh * go * (1.0 - tc * tc) + dc_carry(j);
            const double dgi = dc * gg;
            const double dgg = dc * gi;
            const double dgf = dc * c_prev;

            dz(j) = dgi * gi * (1.0 - gi);
            dz(hidden + j) = dgf * gf * (1.0 - gf);
            dz(2 * hidden + j) = dgg * (1.0 - gg * gg);
            dz(3 * hidden + j) = dgo * go * (1.0 - go);
            dc_carry(j) = dc * gf;
        }
        dz_all.col(t) = dz;
        if (k > 0) grads.w_hh.noalias() += dz * trace.h.col(t_prev).transpose();
        dh_carry.noalias() = params.w_hh.transpose() * dz;
    }
    grads.w_ih.noalias() += dz_all * x.transpose();
    grads.b += dz_all.rowwise().sum();
}

void accumulate_example(const MaskNet& net, const TrainExample& ex, std::uint64_t seed,
                        double inv_batch, MaskNetGrads& grads, double& loss_sum) {
    const int D = net.input_dim;
    const int H = net.hidden;
    require(ex.target.frames() == ex.features.rows() && ex.target.bins() == D, "shape",
            "target mask shape does not match features");

    ForwardTrace tr;
    forward_trace(net, ex.features, /*train_mode=*/true, seed, tr);
    loss_sum += example_bce(tr, ex, D) * inv_batch;

    const Index T = ex.features.rows();
    const double count = 2.0 * static_cast<double>(T) * static_cast<double>(D);

    // d(loss)/d(z4); entries pushed outside the BCE clamp carry no gradient.
    MatrixXd dz4(2 * D, T);
    for (Index t = 0; t < T; ++t) {
        for (int j = 0; j < 2 * D; ++j) {
            const double p = tr.p(j, t);
            const double y = j < D ? ex.target.speech(t, j) : ex.target.noise(t, j - D);
            const bool clamped = p < kBceEps || p > 1.0 - kBceEps;
            dz4(j, t) = clamped ? 0.0 : (p - y) * inv_batch / count;
        }
    }

    grads.l4_w.noalias() += dz4 * tr.a3d.transpose();
    grads.l4_b += dz4.rowwise().sum();

    // the trace is always a training pass here, so the dropout masks exist
    MatrixXd da3 = net.l4_w.transpose() * dz4;
    da3 = da3.cwiseProduct(tr.m3);
    MatrixXd dz3 =
        da3.binaryExpr(tr.z3, [](double d, double z) { return (z > 0.0 && z < 1.0) ? d : 0.0; });

    grads.l3_w.noalias() += dz3 * tr.a2d.transpose();
    grads.l3_b += dz3.rowwise().sum();

    MatrixXd da2 = net.l3_w.transpose() * dz3;
    da2 = da2.cwiseProduct(tr.m2);
    MatrixXd dz2 = da2.binaryExpr(tr.z2, [](double d, double z) { return z > 0.0 ? d : 0.0; });

    grads.l2_w.noalias() += dz2 * tr.h1d.transpose();
    grads.l2_b += dz2.rowwise().sum();

    MatrixXd dh1 = net.l2_w.transpose() * dz2;
    dh1 = dh1.cwiseProduct(tr.m1);

    backprop_lstm(net.fwd, tr.fwd, tr.x, dh1.topRows(H), /*reverse=*/false, H, grads.fwd);
    backprop_lstm(net.bwd, tr.bwd, tr.x, dh1.bottomRows(H), /*reverse=*/true, H, grads.bwd);
}

std::uint64_t example_seed(std::uint64_t base, std::size_t index) {
    return base * 1000003ULL + static_cast<std::uint64_t>(index);
}

struct TensorRef {
    std::string name;
    const double* data;
    std::vector<Index> shape;  // row-major on disk
};

std::vector<TensorRef> tensor_table(const MaskNet& net) {
    auto mat = [](const char* name, const MatrixXd& m) {
        return TensorRef{name, m.data(), {m.rows(), m.cols()}};
    };
    auto vec = [](const char* name, const VectorXd& v) {
        return TensorRef{name, v.data(), {v.size()}};
    };
    return {
        mat("l1.fwd.w_ih", net.fwd.w_ih), mat("l1.fwd.w_hh", net.fwd.w_hh),
        vec("l1.fwd.b", net.fwd.b),       mat("l1.bwd.w_ih", net.bwd.w_ih),
        mat("l1.bwd.w_hh", net.bwd.w_hh), vec("l1.bwd.b", net.bwd.b),
        mat("l2.w", net.l2_w),            vec("l2.b", net.l2_b),
        mat("l3.w", net.l3_w),            vec("l3.b", net.l3_b),
        mat("l4.w", net.l4_w),            vec("l4.b", net.l4_b),
    };
}

}  // namespace

MaskNet make_masknet(int input_dim, int hidden) {
    require(input_dim >= 1 && hidden >= 1, "config", "network dimensions must be positive");
    MaskNet net;
    net.input_dim = input_dim;
    net.hidden = hidden;
    auto zeros_lstm = [&] {
        LstmParams p;
        p.w_ih = MatrixXd::Zero(4 * hidden, input_dim);
        p.w_hh = MatrixXd::Zero(4 * hidden, hidden);
        p.b = VectorXd::Zero(4 * hidden);
        return p;
    };
    net.fwd = zeros_lstm();
    net.bwd = zeros_lstm();
    net.l2_w = MatrixXd::Zero(input_dim, 2 * hidden);
    net.l2_b = VectorXd::Zero(input_dim);
    net.l3_w = MatrixXd::Zero(input_dim, input_dim);
    net.l3_b = VectorXd::Zero(input_dim);
    net.l4_w = MatrixXd::Zero(2 * input_dim, input_dim);
    net.l4_b = VectorXd::Zero(2 * input_dim);
    return net;
}

MaskNet init_masknet(int input_dim, int hidden, std::uint64_t seed) {
    MaskNet net = make_masknet(input_dim, hidden);
    Rng rng(seed);
    // uniform +-1/sqrt(fan_in) for weights and biases; nonzero biases keep
    // pre-activations off the exact ReLU/clip kinks
    auto fill = [&rng](MatrixXd& m, double scale) {
        for (Index c = 0; c < m.cols(); ++c)
            for (Index r = 0; r < m.rows(); ++r)
                m(r, c) = static_cast<double>(static_cast<float>(rng.uniform(-scale, scale)));
    };
    auto fill_vec = [&rng](VectorXd& v, double scale) {
        for (Index i = 0; i < v.size(); ++i)
            v(i) = static_cast<double>(static_cast<float>(rng.uniform(-scale, scale)));
    };
    const double lstm_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (LstmParams* p : {&net.fwd, &net.bwd}) {
        fill(p->w_ih, 1.0 / std::sqrt(static_cast<double>(input_dim)));
        fill(p->w_hh, lstm_scale);
        fill_vec(p->b, lstm_scale);
        // open forget gates early; add in float so values stay f32-exact
        for (Index j = hidden; j < 2 * hidden; ++j)
            p->b(j) = static_cast<double>(static_cast<float>(p->b(j)) + 1.0f);
    }
    fill(net.l2_w, 1.0 / std::sqrt(static_cast<double>(2 * hidden)));
    fill_vec(net.l2_b, 1.0 / std::sqrt(static_cast<double>(2 * hidden)));
    fill(net.l3_w, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    fill_vec(net.l3_b, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    fill(net.l4_w, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    fill_vec(net.l4_b, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    return net;
}

MaskPair forward(const MaskNet& net, const Eigen::MatrixXd& features, bool train_mode,
                 std::uint64_t rng_seed) {
    ForwardTrace tr;
    forward_trace(net, features, train_mode, rng_seed, tr);
    return trace_to_masks(tr, net.input_dim);
}

double training_loss(const MaskNet& net, const TrainBatch& batch, std::uint64_t rng_seed) {
    require(!batch.empty(), "validation", "batch must not be empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        ForwardTrace tr;
        forward_trace(net, batch[i].features, /*train_mode=*/true, example_seed(rng_seed, i), tr);
        sum += example_bce(tr, batch[i], net.input_dim);
    }
    return sum / static_cast<double>(batch.size());
}

std::pair<MaskNetGrads, double> masknet_gradients(const MaskNet& net, const TrainBatch& batch,
                                                  std::uint64_t rng_seed) {
    require(!batch.empty(), "validation", "batch must not be empty");
    MaskNetGrads grads = make_grads(net);
    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        accumulate_example(net, batch[i], example_seed(rng_seed, i), inv_batch, grads, loss);
    return {std::move(grads), loss};
}

std::pair<MaskNet, double> train_step(const MaskNet& net, const TrainBatch& batch,
                                      double learning_rate, std::uint64_t rng_seed) {
    require(learning_rate >= 0.0, "validation", "learning rate must be nonnegative");
    auto [grads, loss] = masknet_gradients(net, batch, rng_seed);

    double sq = grads.l2_w.squaredNorm() + grads.l2_b.squaredNorm() + grads.l3_w.squaredNorm() +
                grads.l3_b.squaredNorm() + grads.l4_w.squaredNorm() + grads.l4_b.squaredNorm();
    for (const LstmParams* p : {&grads.fwd, &grads.bwd})
        sq += p->w_ih.squaredNorm() + p->w_hh.squaredNorm() + p->b.squaredNorm();
    const double norm = std::sqrt(sq);
    constexpr double kClip = 5.0;
    const double scale = norm > kClip ? kClip / norm : 1.0;

    MaskNet out = net;
    const double step = learning_rate * scale;
    if (step != 0.0) {
        out.fwd.w_ih -= step * grads.fwd.w_ih;
        out.fwd.w_hh -= step * grads.fwd.w_hh;
        out.fwd.b -= step * grads.fwd.b;
        out.bwd.w_ih -= step * grads.bwd.w_ih;
        out.bwd.w_hh -= step * grads.bwd.w_hh;
        out.bwd.b -= step * grads.bwd.b;
        out.l2_w -= step * grads.l2_w;
        out.l2_b -= step * grads.l2_b;
        out.l3_w -= step * grads.l3_w;
        out.l3_b -= step * grads.l3_b;
        out.l4_w -= step * grads.l4_w;
        out.l4_b -= step * grads.l4_b;
    }
    return {std::move(out), loss};
}

void save_net(const std::string& base_path, const MaskNet& net) {
    const auto tensors = tensor_table(net);

    nlohmann::json manifest;
    manifest["format"] = "masknet-f32-v1";
    manifest["tensors"] = nlohmann::json::array();
    std::ofstream blob(base_path + ".bin", std::ios::binary | std::ios::trunc);
    if (!blob) fail("io", "cannot open for writing: " + base_path + ".bin");

    std::size_t offset = 0;
    for (const auto& t : tensors) {
        std::size_t count = 1;
        nlohmann::json shape = nlohmann::json::array();
        for (Index d : t.shape) {
            shape.push_back(d);
            count *= static_cast<std::size_t>(d);
        }
        manifest["tensors"].push_back(
            {{"name", t.name}, {"shape", shape}, {"dtype", "f32"}, {"byte_offset", offset}});

        // Eigen stores column-major; the blob is row-major.
        std::vector<float> buf(count);
        if (t.shape.size() == 2) {
            const Index rows = t.shape[0], cols = t.shape[1];
            for (Index r = 0; r < rows; ++r)
                for (Index c = 0; c < cols; ++c)
                    buf[static_cast<std::size_t>(r * cols + c)] =
                        static_cast<float>(t.data[c * rows + r]);
        } else {
            for (std::size_t i = 0; i < count; ++i) buf[i] = static_cast<float>(t.data[i]);
        }
        blob.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(count * sizeof(float)));
        offset += count * sizeof(float);
    }
    if (!blob) fail("io", "write failed: " + base_path + ".bin");
    blob.close();

    std::ofstream mf(base_path + ".json", std::ios::trunc);
    if (!mf) fail("io", "cannot open for writing: " + base_path + ".json");
    mf << manifest.dump(2) << "\n";
    if (!mf) fail("io", "write failed: " + base_path + ".json");
}

MaskNet load_net(const std::string& base_path) {
    std::ifstream mf(base_path + ".json");
    if (!mf) fail("io", "cannot open manifest: " + base_path + ".json");
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        fail("net-format", std::string("manifest parse error: ") + e.what());
    }

    std::ifstream blob(base_path + ".bin", std::ios::binary);
    if (!blob) fail("io", "cannot open blob: " + base_path + ".bin");
    std::vector<char> bytes((std::istreambuf_iterator<char>(blob)),
                            std::istreambuf_iterator<char>());

    constexpr int D = 513, H = 256;
    MaskNet net = make_masknet(D, H);

    // expected row-major shapes of the standard architecture
    const std::map<std::string, std::vector<Index>> expected = {
        {"l1.fwd.w_ih", {4 * H, D}}, {"l1.fwd.w_hh", {4 * H, H}}, {"l1.fwd.b", {4 * H}},
        {"l1.bwd.w_ih", {4 * H, D}}, {"l1.bwd.w_hh", {4 * H, H}}, {"l1.bwd.b", {4 * H}},
        {"l2.w", {D, 2 * H}},        {"l2.b", {D}},
        {"l3.w", {D, D}},            {"l3.b", {D}},
        {"l4.w", {2 * D, D}},        {"l4.b", {2 * D}},
    };
    const std::map<std::string, double*> destinations = {
        {"l1.fwd.w_ih", net.fwd.w_ih.data()}, {"l1.fwd.w_hh", net.fwd.w_hh.data()},
        {"l1.fwd.b", net.fwd.b.data()},       {"l1.bwd.w_ih", net.bwd.w_ih.data()},
        {"l1.bwd.w_hh", net.bwd.w_hh.data()}, {"l1.bwd.b", net.bwd.b.data()},
        {"l2.w", net.l2_w.data()},            {"l2.b", net.l2_b.data()},
        {"l3.w", net.l3_w.data()},            {"l3.b", net.l3_b.data()},
        {"l4.w", net.l4_w.data()},            {"l4.b", net.l4_b.data()},
    };

    if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
        fail("net-format", "manifest has no tensor list");

    std::set<std::string> seen;
    for (const auto& entry : manifest["tensors"]) {
        const std::string name = entry.at("name").get<std::string>();
        auto exp = expected.find(name);
        if (exp == expected.end()) fail("net-format", "unknown tensor name: " + name);
        if (!seen.insert(name).second) fail("net-format", "duplicate tensor: " + name);
        if (entry.at("dtype").get<std::string>() != "f32")
            fail("net-format", "unsupported dtype for " + name);

        std::vector<Index> shape;
        for (const auto& d : entry.at("shape")) shape.push_back(d.get<Index>());
        if (shape != exp->second)
            fail("net-format", "tensor " + name + " has a shape not matching the 513/256 "
                                                  "architecture");

        std::size_t count = 1;
        for (Index d : shape) count *= static_cast<std::size_t>(d);
        const std::size_t offset = entry.at("byte_offset").get<std::size_t>();
        if (offset + count * sizeof(float) > bytes.size())
            fail("net-format", "blob too short for tensor " + name);

        std::vector<float> buf(count);
        std::memcpy(buf.data(), bytes.data() + offset, count * sizeof(float));
        double* dst = destinations.at(name);
        if (shape.size() == 2) {
            const Index rows = shape[0], cols = shape[1];
            for (Index r = 0; r < rows; ++r)
                for (Index c = 0; c < cols; ++c)
                    dst[c * rows + r] =
                        static_cast<double>(buf[static_cast<std::size_t>(r * cols + c)]);
        } else {
            for (std::size_t i = 0; i < count; ++i) dst[i] = static_cast<double>(buf[i]);
        }
    }
    if (seen.size() != expected.size()) fail("net-format", "manifest is missing tensors");
    return net;
}

}  // namespace mcse
