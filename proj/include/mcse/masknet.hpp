#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcse/mask.hpp"

namespace mcse {

// One LSTM direction. Gate order inside the stacked 4H rows is
// input, forget, cell candidate, output.
struct LstmParams {
    Eigen::MatrixXd w_ih;  // 4H x D
    Eigen::MatrixXd w_hh;  // 4H x H
    Eigen::VectorXd b;     // 4H
};

// BLSTM mask estimator:
//   L1  bidirectional LSTM, input_dim -> hidden per direction
//   L2  feed-forward 2*hidden -> input_dim, ReLU
//   L3  feed-forward input_dim -> input_dim, clipped ReLU (min(max(x,0),1))
//   L4  feed-forward input_dim -> 2*input_dim, sigmoid
// The sigmoid output splits into a speech mask (first input_dim columns)
// and a noise mask (last input_dim columns). Dropout 0.5 applies to the
// outputs of L1-L3 during training, with inverted scaling.
struct MaskNet {
    int input_dim = 513;
    int hidden = 256;
    LstmParams fwd, bwd;
    Eigen::MatrixXd l2_w;  // input_dim x 2*hidden
    Eigen::VectorXd l2_b;
    Eigen::MatrixXd l3_w;  // input_dim x input_dim
    Eigen::VectorXd l3_b;
    Eigen::MatrixXd l4_w;  // 2*input_dim x input_dim
    Eigen::VectorXd l4_b;
    double dropout_prob = 0.5;
};

// Zero-initialized network of the given dimensions.
MaskNet make_masknet(int input_dim = 513, int hidden = 256);

// Seeded uniform init, +-1/sqrt(fan_in) per tensor, forget-gate bias 1.
// Values are exactly float-representable so a save/load round trip is
// the identity on a fresh net.
MaskNet init_masknet(int input_dim = 513, int hidden = 256, std::uint64_t seed = 0);

// Runs the network on features (frames x input_dim). train_mode engages
// seeded dropout; inference ignores rng_seed entirely.
MaskPair forward(const MaskNet& net, const Eigen::MatrixXd& features, bool train_mode,
                 std::uint64_t rng_seed);

struct TrainExample {
    Eigen::MatrixXd features;  // frames x input_dim
    MaskPair target;
};

using TrainBatch = std::vector<TrainExample>;

// Parameter gradients, same shapes as MaskNet.
struct MaskNetGrads {
    LstmParams fwd, bwd;
    Eigen::MatrixXd l2_w;
    Eigen::VectorXd l2_b;
    Eigen::MatrixXd l3_w;
    Eigen::VectorXd l3_b;
    Eigen::MatrixXd l4_w;
    Eigen::VectorXd l4_b;
};

// Mean BCE of the batch under the training forward pass (dropout active,
// seeded per example). This is the exact objective train_step descends.
double training_loss(const MaskNet& net, const TrainBatch& batch, std::uint64_t rng_seed);

// Full backpropagation through time. Returns unclipped gradients of
// training_loss plus the loss value itself.
std::pair<MaskNetGrads, double> masknet_gradients(const MaskNet& net, const TrainBatch& batch,
                                                  std::uint64_t rng_seed);

// One SGD step with global-norm gradient clipping at 5.0. Returns the
// updated net and the pre-update loss. learning_rate 0 is an exact no-op.
std::pair<MaskNet, double> train_step(const MaskNet& net, const TrainBatch& batch,
                                      double learning_rate, std::uint64_t rng_seed);

// Weight files: <base>.json manifest + <base>.bin blob of row-major
// little-endian float32 tensors. load_net validates the full dimension
// set of the standard 513/256 architecture.
void save_net(const std::string& base_path, const MaskNet& net);
MaskNet load_net(const std::string& base_path);

}  // namespace mcse
