#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "steerid/features.hpp"
#include "steerid/kernels.hpp"
#include "steerid/rng.hpp"

namespace steerid {

// Candidate-state activation. The gate equations use the logistic sigmoid for
// the candidate as well; tanh is the conventional variant, selectable.
enum class Activation : std::uint8_t { Sigmoid = 0, Tanh = 1 };

struct GruCellParams {
    Matrix w_z, u_z;  // update gate: input-to-hidden, hidden-to-hidden
    Matrix w_r, u_r;  // reset gate
    Matrix w_c, u_c;  // candidate state

    std::size_t hidden() const { return w_z.rows; }
    std::size_t input_dim() const { return w_z.cols; }
};

struct Hyper {
    std::size_t hidden = 512;
    double keep_prob = 0.7;
    double l2_lambda = 1e-3;
    double learning_rate = 1e-4;
    Activation candidate = Activation::Sigmoid;
};

// Two-layer bidirectional encoder plus the vote head. Each direction is an
// independent stack: the 512 outputs of a first-layer direction feed the
// second layer of the same direction; the vote head sees both directions'
// second-layer states concatenated.
struct ModelParams {
    std::size_t n_classes = 0;
    std::size_t input_dim = 0;
    Hyper hyper;
    GruCellParams l1_fwd, l1_bwd, l2_fwd, l2_bwd;
    Matrix vote_w;               // n_classes x 2*hidden
    std::vector<double> vote_b;  // n_classes
    // per-dimension standardization frozen from training data; empty until set
    std::vector<double> feat_mean, feat_scale;

    bool standardized() const { return !feat_mean.empty(); }
};

using VoteVector = std::vector<double>;  // softmax over classes

struct Gradients {
    GruCellParams l1_fwd, l1_bwd, l2_fwd, l2_bwd;
    Matrix vote_w;
    std::vector<double> vote_b;
};

Gradients make_gradients_like(const ModelParams& params);

struct OptimizerState {
    Gradients acc;  // running mean of squared gradients
    double decay = 0.9;
    double epsilon = 1e-10;
    long step = 0;
};

OptimizerState make_optimizer_state(const ModelParams& params);

enum class Mode { Train, Eval };

// One cell update: z = s(Wz x + Uz h), r = s(Wr x + Ur h),
// h' = z*h + (1-z)*g(Wc x + Uc (r*h)). No bias terms.
std::vector<double> gru_cell_step(const GruCellParams& params, std::span<const double> x,
                                  std::span<const double> h_prev, Activation activation);

// Runs the full encoder over one segment and emits a vote after every 6
// windows. Train mode applies inverted dropout (one mask per layer-direction,
// shared across time); eval mode is deterministic.
std::vector<VoteVector> encode_segment(const ModelParams& params, const SegmentMatrix& segment,
                                       Mode mode, Rng& rng);

// Mean cross entropy over the votes plus the L2 penalty on every weight
// matrix (gates and vote head).
double loss(const std::vector<VoteVector>& votes, std::size_t label, const ModelParams& params);

double l2_penalty(const ModelParams& params);

struct BackwardResult {
    Gradients grads;
    double loss = 0.0;
};

// Exact gradients of the batch-mean loss via backpropagation through time,
// through both layers, both directions and all vote emissions. Throws
// divergence_error if the loss is not finite.
BackwardResult backward(const Batch& batch, const ModelParams& params, const Rng& rng, long step = 0);

// acc <- 0.9 acc + 0.1 g^2; theta <- theta - lr * g / sqrt(acc + 1e-10)
void rmsprop_step(OptimizerState& state, ModelParams& params, const Gradients& grads);

// Glorot-uniform init, snapped to float32 so a fresh model round-trips the
// checkpoint format bit-exactly.
ModelParams init_params(Rng& rng, std::size_t n_classes, std::size_t input_dim, const Hyper& hyper);

// Freezes per-dimension mean/scale from every window of the training pool.
void set_feature_stats(ModelParams& params, const SegmentPool& train_pool);

void save_checkpoint(const ModelParams& params, const OptimizerState* state,
                     const std::filesystem::path& path);

struct Checkpoint {
    ModelParams params;
    OptimizerState state;
    bool has_optimizer = false;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---- training loop ----

struct TrainOptions {
    std::size_t steps = 2000;
    std::size_t batch_size = kBatchSize;
    std::size_t eval_every = 50;
    std::size_t patience = 20;  // evaluations without improvement before stopping
    bool early_stop = true;
    std::uint64_t seed = 1;
    Hyper hyper;
};

struct TrainMetrics {
    std::vector<std::pair<long, double>> loss_curve;
    std::vector<std::pair<long, double>> eval_curve;  // final-vote accuracy on eval pool
    double best_eval_acc = 0.0;
    long best_step = 0;
    long steps_run = 0;
};

struct TrainedModel {
    ModelParams params;
    TrainMetrics metrics;
};

// Final-vote accuracy: argmax of the summed votes vs the true class.
double final_vote_accuracy(const ModelParams& params, const SegmentPool& pool);

TrainedModel train_model(const SegmentPool& train_pool, const SegmentPool& eval_pool,
                         const TrainOptions& opts);

// Visits tensors in checkpoint order. fn(span, is_weight_matrix); the vote
// bias is the only non-matrix tensor.
template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& fn) {
    auto cell = [&fn](auto& c) {
        fn(std::span(c.w_z.data), true);
        fn(std::span(c.u_z.data), true);
        fn(std::span(c.w_r.data), true);
        fn(std::span(c.u_r.data), true);
        fn(std::span(c.w_c.data), true);
        fn(std::span(c.u_c.data), true);
    };
    cell(p.l1_fwd);
    cell(p.l1_bwd);
    cell(p.l2_fwd);
    cell(p.l2_bwd);
    fn(std::span(p.vote_w.data), true);
    fn(std::span(p.vote_b), false);
}

}  // namespace steerid
