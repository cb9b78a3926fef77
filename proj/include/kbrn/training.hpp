#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kbrn/benchmarks.hpp"
#include "kbrn/model.hpp"

namespace kbrn {

// Numerically stabilized cross entropy; grad_logits = softmax(logits) - onehot.
struct SoftmaxLoss {
    double loss;
    Vector grad_logits;
};

SoftmaxLoss softmax_cross_entropy(const Vector& logits, int label);

// One gradient buffer per parameter tensor, mirroring the model's layout.
struct GradientSet {
    std::variant<KbrnGradients, TanhGradients, LstmGradients> cell;
    ReadoutGradients readout;
};

GradientSet zeros_like(const RecurrentModel& model);

// Flat views aligned one-to-one (same order, same names) with
// param_views(model).
std::vector<ParamView> param_views(GradientSet& grads);

void scale(GradientSet& grads, double factor);
void accumulate(GradientSet& into, const GradientSet& other);
double global_norm(GradientSet& grads);
bool has_non_finite(GradientSet& grads);

// Full unroll, loss from the final hidden state, backward through every
// timestep into every parameter (weights, biases, kernel coefficients and,
// when enabled, centers). Loss includes lambda_smooth * sum of per-unit
// smoothness penalties and lambda_weight * squared Frobenius norm of the
// weight matrices (biases excluded). A non-finite backward gradient raises
// NumericalError naming the timestep.
struct BpttResult {
    double loss = 0.0;
    GradientSet grads;
    Vector logits;
};

BpttResult bptt(const RecurrentModel& model, std::span<const Vector> inputs, int label,
                double lambda_smooth, double lambda_weight);

// Central differences (f(x+eps) - f(x-eps)) / (2 eps) for every scalar
// reachable through the views. Plain buffer variant for ad-hoc oracles.
Vector finite_diff(const std::function<double()>& f, double* data, std::size_t n, double eps);

// Model-level central differences; loss_fn is re-evaluated after each
// perturbation (dictionary state is re-committed so center perturbations
// take effect).
GradientSet finite_diff_grad(RecurrentModel& model, const std::function<double()>& loss_fn,
                             double eps);

// theta <- theta - lr * g
void sgd_step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
              double lr);

struct AdamState {
    std::size_t t = 0;
    std::vector<Vector> m;
    std::vector<Vector> v;
};

AdamState init_adam_state(const std::vector<ParamView>& params);

// Bias-corrected Adam.
void adam_step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
               AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

enum class Optimizer { sgd, adam };

Optimizer optimizer_from_string(const std::string& name);
std::string to_string(Optimizer opt);

struct TrainConfig {
    double lr = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    double lambda_smooth = 1e-4;
    double lambda_weight = 0.0;
    double clip_norm = 0.0;  // global-norm clip; 0 disables
    std::uint64_t seed = 1;
    // Internal knob (not part of the config file schema): stop once the
    // validation accuracy reaches this level. 0 disables.
    double stop_at_val_acc = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double seconds = 0.0;  // measured wall clock; reported via summary JSON only
};

struct TrainHistory {
    std::vector<EpochRecord> records;
};

// CSV body for the history. The seconds column is written as 0 so reruns of
// the same config produce byte-identical files; measured timings live in the
// run's summary JSON instead.
std::string history_to_csv(const TrainHistory& history);

struct TrainResult {
    RecurrentModel model;
    TrainHistory history;
    bool diverged = false;
};

// Mean loss/gradients over the given dataset indices plus the fraction
// predicted correctly. Reduction runs in index order.
struct BatchResult {
    double loss = 0.0;
    GradientSet grads;
    std::size_t correct = 0;
};

BatchResult batch_gradients(const RecurrentModel& model,
                            const std::vector<std::vector<Vector>>& inputs,
                            const std::vector<int>& labels,
                            std::span<const std::size_t> indices, double lambda_smooth,
                            double lambda_weight);

double dataset_accuracy(const RecurrentModel& model,
                        const std::vector<std::vector<Vector>>& inputs,
                        const std::vector<int>& labels);

// Full training pipeline: init from spec (input width and class count are
// taken from the dataset), one warm-up pass building the kernel dictionary
// for KBRN models, then mini-batch epochs with averaged gradients. Fully
// deterministic given cfg.seed. On numerical divergence the history is
// truncated to the last completed epoch and `diverged` is set.
TrainResult train(ModelSpec spec, const SequenceDataset& train_ds,
                  const SequenceDataset& val_ds, const TrainConfig& cfg);

}  // namespace kbrn
