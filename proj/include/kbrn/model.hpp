#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kbrn/cells.hpp"

namespace kbrn {

enum class CellKind { kbrn, tanh_rnn, lstm };

std::string to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& name);

struct ModelSpec {
    CellKind kind = CellKind::kbrn;
    std::size_t hidden = 10;
    std::size_t input = 0;
    std::size_t num_classes = 2;
    std::size_t dict_size = 12;      // K, kernel cells only
    double bandwidth_factor = 1.0;   // scales the mean adjacent-center spacing
    bool learn_centers = false;
};

// One recurrent cell plus a linear readout over the final hidden state.
struct RecurrentModel {
    ModelSpec spec;
    std::variant<KbrnCell, TanhCell, LstmCell> cell;
    Readout readout;

    CellKind kind() const { return spec.kind; }
    std::size_t hidden_dim() const { return spec.hidden; }
    std::size_t input_dim() const { return spec.input; }
    std::size_t num_classes() const { return spec.num_classes; }

    bool is_kbrn() const { return std::holds_alternative<KbrnCell>(cell); }
    KbrnCell& kbrn() { return std::get<KbrnCell>(cell); }
    const KbrnCell& kbrn() const { return std::get<KbrnCell>(cell); }

    // Re-derives internal state (the kernel dictionary) after in-place
    // parameter edits through param_views. No-op for fixed-center models.
    void commit_params();
};

// Fresh model: Gaussian weights (std 1/sqrt(fan-in)), zero biases, LSTM
// forget bias +1. Kernel cells start from a provisional uniform dictionary
// on [-3, 3] with tanh-mimicking coefficients.
RecurrentModel init_model(const ModelSpec& spec, Rng& rng);

// Mutable flat view of one parameter tensor. The order of views is fixed per
// cell kind and shared with GradientSet so optimizers and the finite
// difference oracle can walk parameters generically.
struct ParamView {
    std::string name;
    double* data;
    std::size_t size;
};

std::vector<ParamView> param_views(RecurrentModel& model);

// Per-step forward caches for a whole sequence, starting from zero state.
using ForwardTrace =
    std::variant<std::vector<KbrnCell::Step>, std::vector<TanhCell::Step>,
                 std::vector<LstmCell::Step>>;

ForwardTrace unroll(const RecurrentModel& model, std::span<const Vector> inputs);

const Vector& final_hidden(const ForwardTrace& trace);

Vector model_logits(const RecurrentModel& model, std::span<const Vector> inputs);

int predict_class(const RecurrentModel& model, std::span<const Vector> inputs);

}  // namespace kbrn
