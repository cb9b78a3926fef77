#pragma once

#include <span>
#include <string>
#include <vector>

#include "kbrn/model.hpp"
#include "kbrn/rng.hpp"

namespace kbrn {

// Exact analytic Jacobian d h_t / d h_{t-1} at the given state. For the LSTM
// the previous cell state (required) is held fixed, so this is the
// instantaneous h-to-h sensitivity. Computed from the step formulas directly,
// independent of the backward-pass code.
Matrix recurrent_jacobian(const RecurrentModel& model, const Vector& h_prev, const Vector& x,
                          const Vector* c_prev = nullptr);

// Largest singular value via power iteration on M^T M with an rng-seeded
// start vector. Returns 0 for the zero matrix.
double spectral_norm(const Matrix& m, std::size_t iters, double tol, Rng& rng);

// Per-timestep backward bookkeeping for one labeled sequence:
//  grad_norm  = ||dL/dh_t||_2 of the cross-entropy loss at the last step,
//  jac_norm   = spectral norm of d h_{t+1} / d h_t (0 at t = T, no successor),
//  max_slope  = max_i |sigma'_i(a_{t,i})| (for the LSTM, the slope of h
//               w.r.t. the cell state, max_i |o_i (1 - tanh^2 c_i)|).
struct TraceRecord {
    std::size_t t = 0;  // 1-based timestep
    double grad_norm = 0.0;
    double jac_norm = 0.0;
    double max_slope = 0.0;
};

std::vector<TraceRecord> gradient_norm_trace(const RecurrentModel& model,
                                             std::span<const Vector> inputs, int label);

// Element-wise mean of the traces over a whole labeled dataset.
std::vector<TraceRecord> mean_gradient_norm_trace(
    const RecurrentModel& model, const std::vector<std::vector<Vector>>& inputs,
    const std::vector<int>& labels);

// Activation shape sampling on a uniform grid: (unit, input, output,
// derivative) per row, n rows per unit. Kernel cells report their learned
// expansions; tanh and LSTM cells report the fixed tanh nonlinearity.
struct ShapeRow {
    std::size_t unit = 0;
    double input = 0.0;
    double output = 0.0;
    double deriv = 0.0;
};

std::vector<ShapeRow> activation_shapes(const RecurrentModel& model, double lo, double hi,
                                        std::size_t n);

std::string trace_to_csv(const std::vector<TraceRecord>& trace);
std::string shapes_to_csv(const std::vector<ShapeRow>& rows);

}  // namespace kbrn
