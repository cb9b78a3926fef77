#pragma once

#include <cstdint>

#include "kbrn/training.hpp"

namespace kbrn {

// |a - b| / max(1, |a|, |b|), maximized over every scalar of both sets.
// Unit-scale relative error: plain relative above magnitude 1, absolute below.
double max_rel_error(GradientSet& analytic, GradientSet& numeric);

// Draws random instances (T <= 6, h <= 4, K <= 5, parameters and inputs in
// [-1, 1]) and compares the analytic BPTT gradient against central finite
// differences on every parameter. Half of the KBRN instances learn centers;
// smoothness and weight penalties are switched on for alternating instances.
struct GradCheckReport {
    CellKind kind;
    std::size_t instances = 0;
    double max_error = 0.0;
    bool passed = false;  // max_error <= 1e-4
};

GradCheckReport run_gradcheck(CellKind kind, std::uint64_t seed, std::size_t instances = 20);

}  // namespace kbrn
