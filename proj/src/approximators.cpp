#include "aoimec/approximators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

#include "aoimec/errors.hpp"

namespace aoimec::nn {

namespace {

constexpr char kMagic[8] = {'A', 'O', 'I', 'P', 'A', 'R', 'M', 'S'};
constexpr std::uint32_t kVersion = 1;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw InvalidArgument(std::string(what) + ": expected dimension " + std::to_string(want) +
                              ", got " + std::to_string(got));
    }
}

// out += W v for a rows × cols block stored row-major.
void matvec_add(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::vector<double>& out) {
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += w[i * cols + j] * v[j];
        out[i] += acc;
    }
}

// out += Wᵀ g.
void matvec_t_add(std::span<const double> w, std::size_t rows, std::size_t cols,
                  std::span<const double> g, std::vector<double>& out) {
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out[j] += w[i * cols + j] * g[i];
    }
}

// dW += g vᵀ.
void outer_add(std::span<double> dw, std::size_t rows, std::size_t cols, std::span<const double> g,
               std::span<const double> v) {
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) dw[i * cols + j] += g[i] * v[j];
    }
}

template <class T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw InvalidArgument("parameter file truncated");
    return v;
}

}  // namespace

const Slice& ParamVector::add(const std::string& name, std::size_t rows, std::size_t cols,
                              std::size_t fan_in) {
    for (const auto& s : slices) {
        if (s.name == name) throw InvalidArgument("duplicate parameter slice " + name);
    }
    slices.push_back({name, values.size(), rows, cols, fan_in});
    values.resize(values.size() + rows * cols, 0.0);
    return slices.back();
}

const Slice& ParamVector::find(const std::string& name) const {
    for (const auto& s : slices) {
        if (s.name == name) return s;
    }
    throw InvalidArgument("no parameter slice named " + name);
}

std::span<double> ParamVector::view(const std::string& name) {
    const auto& s = find(name);
    return {values.data() + s.offset, s.size()};
}

std::span<const double> ParamVector::view(const std::string& name) const {
    const auto& s = find(name);
    return {values.data() + s.offset, s.size()};
}

ParamVector ParamVector::zeros_like() const {
    ParamVector out = *this;
    out.fill(0.0);
    return out;
}

bool ParamVector::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void ParamVector::fill(double v) { std::fill(values.begin(), values.end(), v); }

void ParamVector::init_uniform(RngStream& rng) {
    for (const auto& s : slices) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, s.fan_in)));
        for (std::size_t i = 0; i < s.size(); ++i) values[s.offset + i] = bound * (2.0 * rng.uniform() - 1.0);
    }
}

void sgd_update(ParamVector& params, const ParamVector& grad, double lr) {
    if (!(lr > 0.0)) throw InvalidArgument("sgd_update: learning rate must be positive");
    check_dim(grad.size(), params.size(), "sgd_update");
    for (double g : grad.values) {
        if (std::isnan(g)) throw InvalidArgument("sgd_update: NaN gradient");
    }
    for (std::size_t i = 0; i < params.size(); ++i) params.values[i] -= lr * grad.values[i];
    if (!params.all_finite()) throw DivergenceError("sgd_update: parameters became non-finite");
}

void save_params(std::ostream& out, const ParamVector& params) {
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint32_t>(params.slices.size()));
    for (const auto& s : params.slices) {
        write_raw(out, static_cast<std::uint32_t>(s.name.size()));
        out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
        write_raw(out, static_cast<std::uint64_t>(s.rows));
        write_raw(out, static_cast<std::uint64_t>(s.cols));
        write_raw(out, static_cast<std::uint64_t>(s.fan_in));
    }
    write_raw(out, static_cast<std::uint64_t>(params.values.size()));
    out.write(reinterpret_cast<const char*>(params.values.data()),
              static_cast<std::streamsize>(params.values.size() * sizeof(double)));
}

ParamVector load_params(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + sizeof(magic), kMagic)) throw InvalidArgument("not a parameter file");
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kVersion) throw InvalidArgument("unsupported parameter file version " + std::to_string(version));
    const auto count = read_raw<std::uint32_t>(in);
    ParamVector p;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = read_raw<std::uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto rows = read_raw<std::uint64_t>(in);
        const auto cols = read_raw<std::uint64_t>(in);
        const auto fan_in = read_raw<std::uint64_t>(in);
        p.add(name, rows, cols, fan_in);
    }
    const auto total = read_raw<std::uint64_t>(in);
    check_dim(total, p.values.size(), "load_params");
    in.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw InvalidArgument("parameter file truncated");
    if (!p.all_finite()) throw InvalidArgument("parameter file holds non-finite values");
    return p;
}

ParamVector make_mlp_params(const MlpShape& shape) {
    ParamVector p;
    p.add("w1", shape.hidden, shape.input, shape.input);
    p.add("b1", shape.hidden, 1, shape.input);
    p.add("w2", shape.output, shape.hidden, shape.hidden);
    p.add("b2", shape.output, 1, shape.hidden);
    return p;
}

std::vector<double> mlp_forward(const MlpShape& shape, const ParamVector& params,
                                std::span<const double> x, MlpCache* cache) {
    check_dim(x.size(), shape.input, "mlp_forward input");
    check_dim(params.size(), shape.hidden * (shape.input + 1) + shape.output * (shape.hidden + 1),
              "mlp_forward params");
    const auto b1 = params.view("b1");
    std::vector<double> hidden(b1.begin(), b1.end());
    matvec_add(params.view("w1"), shape.hidden, shape.input, x, hidden);
    for (auto& v : hidden) v = std::tanh(v);
    const auto b2 = params.view("b2");
    std::vector<double> out(b2.begin(), b2.end());
    matvec_add(params.view("w2"), shape.output, shape.hidden, hidden, out);
    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->hidden = hidden;
        cache->out = out;
    }
    return out;
}

std::vector<double> mlp_backward(const MlpShape& shape, const ParamVector& params,
                                 const MlpCache& cache, std::span<const double> d_out,
                                 ParamVector& grad) {
    check_dim(d_out.size(), shape.output, "mlp_backward");
    outer_add(grad.view("w2"), shape.output, shape.hidden, d_out, cache.hidden);
    auto gb2 = grad.view("b2");
    for (std::size_t i = 0; i < shape.output; ++i) gb2[i] += d_out[i];

    std::vector<double> d_hidden(shape.hidden, 0.0);
    matvec_t_add(params.view("w2"), shape.output, shape.hidden, d_out, d_hidden);
    for (std::size_t i = 0; i < shape.hidden; ++i) {
        d_hidden[i] *= 1.0 - cache.hidden[i] * cache.hidden[i];
    }
    outer_add(grad.view("w1"), shape.hidden, shape.input, d_hidden, cache.x);
    auto gb1 = grad.view("b1");
    for (std::size_t i = 0; i < shape.hidden; ++i) gb1[i] += d_hidden[i];

    std::vector<double> dx(shape.input, 0.0);
    matvec_t_add(params.view("w1"), shape.hidden, shape.input, d_hidden, dx);
    return dx;
}

ParamVector make_gru_params(const GruShape& shape) {
    ParamVector p;
    const auto fan = shape.hidden;
    for (const char* gate : {"r", "z", "n"}) {
        const std::string g(gate);
        p.add("w_" + g, shape.hidden, shape.input, fan);
        p.add("u_" + g, shape.hidden, shape.hidden, fan);
        p.add("b_" + g, shape.hidden, 1, fan);
    }
    return p;
}

std::vector<double> gru_step(const GruShape& shape, const ParamVector& params,
                             std::span<const double> x, std::span<const double> h, GruCache* cache) {
    check_dim(x.size(), shape.input, "gru_step input");
    check_dim(h.size(), shape.hidden, "gru_step state");
    check_dim(params.size(), 3 * shape.hidden * (shape.input + shape.hidden + 1), "gru_step params");
    const std::size_t H = shape.hidden;

    auto gate = [&](const std::string& g, std::span<const double> rec) {
        const auto b = params.view("b_" + g);
        std::vector<double> a(b.begin(), b.end());
        matvec_add(params.view("w_" + g), H, shape.input, x, a);
        matvec_add(params.view("u_" + g), H, H, rec, a);
        return a;
    };
    auto r = gate("r", h);
    for (auto& v : r) v = sigmoid(v);
    auto z = gate("z", h);
    for (auto& v : z) v = sigmoid(v);
    std::vector<double> rh(H);
    for (std::size_t i = 0; i < H; ++i) rh[i] = r[i] * h[i];
    auto n = gate("n", rh);
    for (auto& v : n) v = std::tanh(v);

    std::vector<double> out(H);
    for (std::size_t i = 0; i < H; ++i) out[i] = z[i] * h[i] + (1.0 - z[i]) * n[i];
    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->h.assign(h.begin(), h.end());
        cache->r = std::move(r);
        cache->z = std::move(z);
        cache->n = std::move(n);
    }
    return out;
}

GruInputGrads gru_backward(const GruShape& shape, const ParamVector& params, const GruCache& c,
                           std::span<const double> d_hnext, ParamVector& grad) {
    check_dim(d_hnext.size(), shape.hidden, "gru_backward");
    const std::size_t H = shape.hidden;
    const std::size_t X = shape.input;
    GruInputGrads out{std::vector<double>(X, 0.0), std::vector<double>(H, 0.0)};

    std::vector<double> da_z(H), da_n(H), rh(H);
    for (std::size_t i = 0; i < H; ++i) {
        const double g = d_hnext[i];
        out.dh[i] += g * c.z[i];
        da_z[i] = g * (c.h[i] - c.n[i]) * c.z[i] * (1.0 - c.z[i]);
        da_n[i] = g * (1.0 - c.z[i]) * (1.0 - c.n[i] * c.n[i]);
        rh[i] = c.r[i] * c.h[i];
    }

    // Candidate.
    outer_add(grad.view("w_n"), H, X, da_n, c.x);
    outer_add(grad.view("u_n"), H, H, da_n, rh);
    auto gbn = grad.view("b_n");
    for (std::size_t i = 0; i < H; ++i) gbn[i] += da_n[i];
    matvec_t_add(params.view("w_n"), H, X, da_n, out.dx);
    std::vector<double> d_rh(H, 0.0);
    matvec_t_add(params.view("u_n"), H, H, da_n, d_rh);

    std::vector<double> da_r(H);
    for (std::size_t i = 0; i < H; ++i) {
        out.dh[i] += d_rh[i] * c.r[i];
        da_r[i] = d_rh[i] * c.h[i] * c.r[i] * (1.0 - c.r[i]);
    }

    for (const auto& [g, da] : {std::pair<std::string, const std::vector<double>*>{"z", &da_z},
                                std::pair<std::string, const std::vector<double>*>{"r", &da_r}}) {
        outer_add(grad.view("w_" + g), H, X, *da, c.x);
        outer_add(grad.view("u_" + g), H, H, *da, c.h);
        auto gb = grad.view("b_" + g);
        for (std::size_t i = 0; i < H; ++i) gb[i] += (*da)[i];
        matvec_t_add(params.view("w_" + g), H, X, *da, out.dx);
        matvec_t_add(params.view("u_" + g), H, H, *da, out.dh);
    }
    return out;
}

std::vector<double> finite_difference_gradient(const std::function<double(const ParamVector&)>& loss,
                                               ParamVector params, double step) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params.values[i];
        params.values[i] = keep + step;
        const double up = loss(params);
        params.values[i] = keep - step;
        const double down = loss(params);
        params.values[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    check_dim(b.size(), a.size(), "max_relative_error");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double den = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / den);
    }
    return worst;
}

}  // namespace aoimec::nn
