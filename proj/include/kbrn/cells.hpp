#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "kbrn/kernel_activation.hpp"
#include "kbrn/linalg.hpp"
#include "kbrn/rng.hpp"

namespace kbrn {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Linear classification head: logits = w h + b. At least two classes.
struct Readout {
    Matrix w;  // C x h
    Vector b;  // C
};

Vector readout_logits(const Readout& r, const Vector& h);

struct ReadoutGradients {
    Matrix w;
    Vector b;
};

// ---------------------------------------------------------------------------
// Feedforward layer with one kernel activation per output unit, all units
// sharing the layer dictionary: h_i = sigma_i(w_i . x + b_i).
// ---------------------------------------------------------------------------
struct FeedforwardLayer {
    Matrix w;  // out x in
    Vector b;  // out
    std::vector<KernelActivation> units;

    struct Step {
        Vector a;                   // pre-activations
        Vector h;                   // outputs
        std::vector<Vector> kappa;  // kappa[i][k] = kernel(a_i, c_k), reused by backward
    };

    struct Gradients {
        Matrix w;
        Vector b;
        std::vector<Vector> alphas;  // one per unit
        Vector x;                    // gradient w.r.t. the input
    };

    Step forward(const Vector& x) const;
    Gradients backward(const Step& step, const Vector& x, const Vector& grad_h) const;

    std::size_t out_dim() const { return b.size(); }
    std::size_t in_dim() const { return w.cols; }
};

FeedforwardLayer init_feedforward_layer(std::size_t out, std::size_t in,
                                        std::shared_ptr<const KernelDictionary> dict,
                                        const Vector& coeffs, Rng& rng);

// ---------------------------------------------------------------------------
// Recurrent cells. Hidden state starts at zero (and zero cell state for the
// LSTM). Each cell's Step caches what its backward needs.
// ---------------------------------------------------------------------------

// Kernel-based recurrent cell: a_t = W_in x_t + W_rec h_{t-1} + b,
// h_{t,i} = sigma_i(a_{t,i}) with learnable kernel-expansion activations.
struct KbrnCell {
    Matrix w_in;   // h x d
    Matrix w_rec;  // h x h
    Vector b;      // h
    std::vector<KernelActivation> units;
    bool learn_centers = false;
    Vector centers_param;  // staging copy exposed to the optimizer when learning centers

    struct Step {
        Vector a;
        Vector h;
        std::vector<Vector> kappa;
    };

    Step step(const Vector& x, const Vector& h_prev) const;

    const KernelDictionary& dict() const { return units.front().dict(); }
    const std::shared_ptr<const KernelDictionary>& dict_ptr() const {
        return units.front().dict_ptr();
    }
    const GramMatrix& gram() const { return gram_; }
    std::size_t hidden_dim() const { return b.size(); }
    std::size_t input_dim() const { return w_in.cols; }

    // Swap in a new dictionary (with matching per-unit coefficients) and
    // refresh the Gram cache.
    void set_dictionary(std::shared_ptr<const KernelDictionary> dict,
                        std::vector<Vector> coeffs);

    // Rebuild the dictionary from centers_param after an optimizer step.
    // Centers are re-sorted if updates made them cross, permuting every
    // unit's coefficients consistently.
    void sync_dictionary();

private:
    GramMatrix gram_;
};

struct KbrnGradients {
    Matrix w_in;
    Matrix w_rec;
    Vector b;
    std::vector<Vector> alphas;
    Vector centers;  // populated only when the cell learns centers
    bool has_centers = false;
};

// Accumulates parameter gradients for one unrolled step and writes the
// gradient w.r.t. h_{t-1} into grad_h_prev.
void kbrn_backward_step(const KbrnCell& cell, const KbrnCell::Step& step, const Vector& x,
                        const Vector& h_prev, const Vector& grad_h, KbrnGradients& grads,
                        Vector& grad_h_prev);

KbrnCell init_kbrn_cell(std::size_t hidden, std::size_t input,
                        std::shared_ptr<const KernelDictionary> dict, const Vector& coeffs,
                        Rng& rng, bool learn_centers = false);

// Classic recurrent baseline: h_t = tanh(W_in x_t + W_rec h_{t-1} + b).
struct TanhCell {
    Matrix w_in;
    Matrix w_rec;
    Vector b;

    struct Step {
        Vector a;
        Vector h;
    };

    Step step(const Vector& x, const Vector& h_prev) const;

    std::size_t hidden_dim() const { return b.size(); }
    std::size_t input_dim() const { return w_in.cols; }
};

struct TanhGradients {
    Matrix w_in;
    Matrix w_rec;
    Vector b;
};

void tanh_backward_step(const TanhCell& cell, const TanhCell::Step& step, const Vector& x,
                        const Vector& h_prev, const Vector& grad_h, TanhGradients& grads,
                        Vector& grad_h_prev);

TanhCell init_tanh_cell(std::size_t hidden, std::size_t input, Rng& rng);

// Standard LSTM; every gate weight acts on the concatenation [x; h_prev].
// The forget-gate bias is initialized to +1.
struct LstmCell {
    Matrix w_i, w_f, w_o, w_g;  // each h x (d + h)
    Vector b_i, b_f, b_o, b_g;  // each h

    struct Step {
        Vector i, f, o, g;  // gate values / candidate
        Vector c;           // cell state after the step
        Vector tanh_c;
        Vector h;
    };

    Step step(const Vector& x, const Vector& h_prev, const Vector& c_prev) const;

    std::size_t hidden_dim() const { return b_i.size(); }
    std::size_t input_dim() const { return w_i.cols - b_i.size(); }
};

struct LstmGradients {
    Matrix w_i, w_f, w_o, w_g;
    Vector b_i, b_f, b_o, b_g;
};

// grad_c carries dL/dc_t accumulated from the future; outputs go to
// grad_h_prev / grad_c_prev.
void lstm_backward_step(const LstmCell& cell, const LstmCell::Step& step, const Vector& x,
                        const Vector& h_prev, const Vector& c_prev, const Vector& grad_h,
                        const Vector& grad_c, LstmGradients& grads, Vector& grad_h_prev,
                        Vector& grad_c_prev);

LstmCell init_lstm_cell(std::size_t hidden, std::size_t input, Rng& rng);

Readout init_readout(std::size_t num_classes, std::size_t hidden, Rng& rng);

}  // namespace kbrn
