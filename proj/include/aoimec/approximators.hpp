#pragma once

// Small differentiable building blocks with hand-written backward passes: a
// one-hidden-layer tanh network and a gated recurrent cell. Loops are plain
// and ordered so that results are bit-identical from run to run.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aoimec/event_engine.hpp"

namespace aoimec::nn {

struct Slice {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 1;
    std::size_t fan_in = 1;
    std::size_t size() const { return rows * cols; }
};

class ParamVector {
public:
    std::vector<double> values;
    std::vector<Slice> slices;

    /// Appends a zero-filled rows × cols block.
    const Slice& add(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in);
    const Slice& find(const std::string& name) const;
    std::span<double> view(const std::string& name);
    std::span<const double> view(const std::string& name) const;

    std::size_t size() const { return values.size(); }
    ParamVector zeros_like() const;
    bool all_finite() const;
    void fill(double v);

    /// Uniform in ±1/√fan_in per slice.
    void init_uniform(RngStream& rng);
};

void sgd_update(ParamVector& params, const ParamVector& grad, double lr);

/// Versioned flat binary with a named-slice header.
void save_params(std::ostream& out, const ParamVector& params);
ParamVector load_params(std::istream& in);

// ---- one hidden layer, tanh, linear head ----

struct MlpShape {
    std::size_t input = 0;
    std::size_t hidden = 0;
    std::size_t output = 0;
};

ParamVector make_mlp_params(const MlpShape& shape);

struct MlpCache {
    std::vector<double> x;
    std::vector<double> hidden;  // post-tanh
    std::vector<double> out;
};

std::vector<double> mlp_forward(const MlpShape& shape, const ParamVector& params,
                                std::span<const double> x, MlpCache* cache = nullptr);

/// Accumulates dL/dθ into `grad`; returns dL/dx.
std::vector<double> mlp_backward(const MlpShape& shape, const ParamVector& params,
                                 const MlpCache& cache, std::span<const double> d_out,
                                 ParamVector& grad);

// ---- gated recurrent cell ----
// r = σ(W_r x + U_r h + b_r), z = σ(W_z x + U_z h + b_z),
// n = tanh(W_n x + U_n (r ⊙ h) + b_n), h' = z ⊙ h + (1 − z) ⊙ n.

struct GruShape {
    std::size_t input = 0;
    std::size_t hidden = 0;
};

ParamVector make_gru_params(const GruShape& shape);

struct GruCache {
    std::vector<double> x;
    std::vector<double> h;
    std::vector<double> r;
    std::vector<double> z;
    std::vector<double> n;
};

std::vector<double> gru_step(const GruShape& shape, const ParamVector& params,
                             std::span<const double> x, std::span<const double> h,
                             GruCache* cache = nullptr);

struct GruInputGrads {
    std::vector<double> dx;
    std::vector<double> dh;
};

/// Accumulates dL/dθ into `grad` given dL/dh'.
GruInputGrads gru_backward(const GruShape& shape, const ParamVector& params, const GruCache& cache,
                           std::span<const double> d_hnext, ParamVector& grad);

// ---- checking ----

/// Central differences of `loss` with respect to every parameter.
std::vector<double> finite_difference_gradient(const std::function<double(const ParamVector&)>& loss,
                                               ParamVector params, double step = 1e-5);

/// max_i |a_i − b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

}  // namespace aoimec::nn
