#pragma once

#include <cstddef>
#include <functional>
#include <memory>

#include "kbrn/linalg.hpp"
#include "kbrn/rng.hpp"

namespace kbrn {

// Gaussian kernel exp(-(a-c)^2 / (2 gamma^2)); value in (0, 1].
double gaussian_kernel(double a, double c, double gamma);

// d/dc of gaussian_kernel. d/da is the negative of this.
double gaussian_kernel_dc(double a, double c, double gamma);

// Shared 1-D center set plus bandwidth. One dictionary per layer; every unit
// of the layer expands its activation over the same centers.
class KernelDictionary {
public:
    // centers must be strictly increasing and finite, bandwidth > 0.
    KernelDictionary(Vector centers, double bandwidth);

    const Vector& centers() const { return centers_; }
    double bandwidth() const { return bandwidth_; }
    std::size_t size() const { return centers_.size(); }

private:
    Vector centers_;
    double bandwidth_;
};

// K x K matrix of pairwise kernel values over the dictionary centers.
// Symmetric with unit diagonal and positive semidefinite.
struct GramMatrix {
    Matrix entries;
};

GramMatrix gram_matrix(const KernelDictionary& dict);

// A single unit's activation sigma(a) = sum_k alpha_k kappa(a, c_k).
// The coefficient vector is the learnable part; the dictionary is shared.
class KernelActivation {
public:
    KernelActivation(std::shared_ptr<const KernelDictionary> dict, Vector coeffs);

    double operator()(double a) const;

    // Analytic d sigma / d a.
    double grad_input(double a) const;

    // d sigma / d alpha_k = kappa(a, c_k), entries in (0, 1].
    Vector grad_coeffs(double a) const;

    const Vector& coeffs() const { return coeffs_; }
    Vector& coeffs() { return coeffs_; }
    const KernelDictionary& dict() const { return *dict_; }
    const std::shared_ptr<const KernelDictionary>& dict_ptr() const { return dict_; }

private:
    std::shared_ptr<const KernelDictionary> dict_;
    Vector coeffs_;
};

// K equally spaced centers with c_1 = lo and c_K = hi. Requires lo < hi, K >= 2.
KernelDictionary build_dictionary_uniform(double lo, double hi, std::size_t k, double gamma);

// Lloyd's algorithm in one dimension with kmeans++ seeding. Returns sorted
// centers. The within-run objective (sum of squared distances to the nearest
// center) is non-increasing; an emptied cluster is re-seeded at the sample
// farthest from its assigned center, which also cannot increase the
// objective. Several seeded restarts are run and the best result returned.
// Requires K <= number of distinct sample values.
Vector fit_centers_kmeans_1d(const Vector& samples, std::size_t k, std::size_t max_iter,
                             double tol, Rng& rng);

// Mean adjacent-center spacing times spread_factor; spread_factor alone when
// there are fewer than two centers.
double bandwidth_from_centers(const Vector& centers, double spread_factor);

// Cluster pooled pre-activation samples into a dictionary. Falls back to a
// uniform dictionary over [min, max] (or [-1, 1] when all samples coincide)
// if the samples have fewer distinct values than K.
KernelDictionary build_dictionary_from_samples(const Vector& samples, std::size_t k,
                                               double spread_factor, Rng& rng);

// Ridge fit of coefficients so sigma_alpha approximates `target` on a uniform
// grid of grid_n points spanning [c_1 - 2 gamma, c_K + 2 gamma], solved by
// normal equations. Requires grid_n >= K and ridge >= 0. A singular normal
// matrix is reported with instructions to raise the ridge, never patched
// silently.
Vector init_coeffs_mimic(const KernelDictionary& dict,
                         const std::function<double(double)>& target, std::size_t grid_n,
                         double ridge);

// RKHS roughness penalty alpha^T G alpha (nonnegative up to -1e-10 numerics).
double smoothness_penalty(const KernelActivation& act, const GramMatrix& gram);

// Gradient 2 G alpha of the penalty.
Vector smoothness_penalty_grad(const KernelActivation& act, const GramMatrix& gram);

}  // namespace kbrn
