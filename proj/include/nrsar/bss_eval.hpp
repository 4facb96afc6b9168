#pragma once

// Reference-based energy ratios. An estimate is split into the part explained
// by L-tap filtered versions of the target reference (s_target), the extra
// part explained by filtered versions of all references (e_interf), and the
// residual (e_artif). Both projections are computed on the zero-padded
// support of length n + L - 1, where the shifted-reference Gram matrix is
// exactly block-Toeplitz.

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "nrsar/audio_io.hpp"
#include "nrsar/error.hpp"
#include "nrsar/fft.hpp"

namespace nrsar {

struct ProjectionConfig {
    std::size_t filter_len = 512;
    double ridge = 1e-10;  // relative to the mean Gram diagonal
    double clamp_lo = -30.0;
    double clamp_hi = 30.0;
    double silence_threshold = 1e-8;  // per-sample energy of the target reference

    void validate() const {
        if (filter_len < 1) throw UsageError("filter length must be >= 1");
        if (!(ridge >= 0)) throw UsageError("ridge must be >= 0");
        if (!(clamp_lo < clamp_hi)) throw UsageError("clamp_lo must be below clamp_hi");
        if (!(silence_threshold >= 0)) throw UsageError("silence threshold must be >= 0");
    }
};

struct Decomposition {
    std::vector<double> s_target;
    std::vector<double> e_interf;
    std::vector<double> e_artif;
};

inline double energy(std::span<const double> x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
}

/// 10 log10(num/den) clamped to [lo, hi]; a zero denominator maps to hi.
inline double clamped_ratio_db(double num, double den, double lo, double hi) {
    if (!(den > 0)) return hi;
    if (!(num > 0)) return lo;
    return std::clamp(10.0 * std::log10(num / den), lo, hi);
}

inline double sar(const Decomposition& d, const ProjectionConfig& cfg = {}) {
    double num = 0.0;
    for (std::size_t i = 0; i < d.s_target.size(); ++i) {
        const double v = d.s_target[i] + d.e_interf[i];
        num += v * v;
    }
    return clamped_ratio_db(num, energy(d.e_artif), cfg.clamp_lo, cfg.clamp_hi);
}

inline double sir(const Decomposition& d, const ProjectionConfig& cfg = {}) {
    return clamped_ratio_db(energy(d.s_target), energy(d.e_interf), cfg.clamp_lo, cfg.clamp_hi);
}

inline double sdr(const Decomposition& d, const ProjectionConfig& cfg = {}) {
    double den = 0.0;
    for (std::size_t i = 0; i < d.e_interf.size(); ++i) {
        const double v = d.e_interf[i] + d.e_artif[i];
        den += v * v;
    }
    return clamped_ratio_db(energy(d.s_target), den, cfg.clamp_lo, cfg.clamp_hi);
}

/// Holds the factorized Gram systems for one set of reference windows so
/// that any number of estimates can be decomposed against them.
class ReferenceProjector {
public:
    ReferenceProjector(const std::vector<std::span<const double>>& refs, std::size_t target_index,
                       const ProjectionConfig& cfg)
        : cfg_(cfg), target_(target_index), plan_(1) {
        cfg_.validate();
        if (refs.empty()) throw UsageError("at least one reference is required");
        if (target_index >= refs.size()) throw UsageError("target index out of range");
        n_ = refs.front().size();
        L_ = cfg.filter_len;
        J_ = refs.size();
        for (const auto& r : refs)
            if (r.size() != n_) throw DimensionError("reference windows differ in length");
        if (n_ < L_)
            throw DimensionError("window of " + std::to_string(n_) + " samples is shorter than the filter length " +
                                 std::to_string(L_));
        if (energy(refs[target_index]) < cfg.silence_threshold * static_cast<double>(n_))
            throw SilentReferenceError("target reference is silent in this window");

        plan_ = FftPlan(next_pow2(n_ + L_ - 1));
        spectra_.reserve(J_);
        for (const auto& r : refs) spectra_.push_back(plan_.forward_real(r));

        // corr[i][j][k + L - 1] = sum_u r_i(u) r_j(u + k), |k| < L
        const std::size_t N = plan_.size();
        std::vector<std::vector<std::vector<double>>> corr(J_, std::vector<std::vector<double>>(J_));
        for (std::size_t i = 0; i < J_; ++i)
            for (std::size_t j = i; j < J_; ++j) {
                std::vector<std::complex<double>> prod(N);
                for (std::size_t f = 0; f < N; ++f) prod[f] = std::conj(spectra_[i][f]) * spectra_[j][f];
                plan_.transform(prod, true);
                auto& c = corr[i][j];
                c.resize(2 * L_ - 1);
                for (std::size_t k = 0; k < L_; ++k) {
                    c[L_ - 1 + k] = prod[k].real();
                    if (k > 0) c[L_ - 1 - k] = prod[N - k].real();
                }
            }

        const auto block = [&](std::size_t i, std::size_t j, std::ptrdiff_t lag) {
            // sum_t r_i(t - tau) r_j(t - tau') with lag = tau - tau'
            if (i <= j) return corr[i][j][static_cast<std::size_t>(lag + static_cast<std::ptrdiff_t>(L_) - 1)];
            return corr[j][i][static_cast<std::size_t>(-lag + static_cast<std::ptrdiff_t>(L_) - 1)];
        };

        const auto dim = static_cast<Eigen::Index>(J_ * L_);
        Eigen::MatrixXd gram(dim, dim);
        for (std::size_t i = 0; i < J_; ++i)
            for (std::size_t j = 0; j < J_; ++j)
                for (std::size_t a = 0; a < L_; ++a)
                    for (std::size_t b = 0; b < L_; ++b)
                        gram(static_cast<Eigen::Index>(i * L_ + a), static_cast<Eigen::Index>(j * L_ + b)) =
                            block(i, j, static_cast<std::ptrdiff_t>(a) - static_cast<std::ptrdiff_t>(b));

        const auto tl = static_cast<Eigen::Index>(target_ * L_);
        const auto Ll = static_cast<Eigen::Index>(L_);
        target_llt_ = factorize(gram.block(tl, tl, Ll, Ll));
        if (J_ > 1) all_llt_ = factorize(gram);
    }

    std::size_t window_length() const { return n_; }
    std::size_t num_references() const { return J_; }

    Decomposition decompose(std::span<const double> estimate) const {
        if (estimate.size() != n_) throw DimensionError("estimate window length differs from references");
        const std::size_t m = n_ + L_ - 1;
        const auto est_spec = plan_.forward_real(estimate);

        Decomposition d;
        d.s_target = project(est_spec, {target_}, target_llt_, m);
        if (J_ > 1) {
            std::vector<std::size_t> all(J_);
            for (std::size_t j = 0; j < J_; ++j) all[j] = j;
            const auto p_all = project(est_spec, all, all_llt_, m);
            d.e_interf.resize(m);
            for (std::size_t t = 0; t < m; ++t) d.e_interf[t] = p_all[t] - d.s_target[t];
            d.e_artif.resize(m);
            for (std::size_t t = 0; t < m; ++t) d.e_artif[t] = (t < n_ ? estimate[t] : 0.0) - p_all[t];
        } else {
            d.e_interf.assign(m, 0.0);
            d.e_artif.resize(m);
            for (std::size_t t = 0; t < m; ++t) d.e_artif[t] = (t < n_ ? estimate[t] : 0.0) - d.s_target[t];
        }
        return d;
    }

private:
    Eigen::LLT<Eigen::MatrixXd> factorize(Eigen::MatrixXd g) const {
        const double lambda = cfg_.ridge * g.trace() / static_cast<double>(g.rows());
        g.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success) throw NumericalError("reference Gram matrix is not positive definite");
        return llt;
    }

    std::vector<double> project(const std::vector<std::complex<double>>& est_spec,
                                const std::vector<std::size_t>& which, const Eigen::LLT<Eigen::MatrixXd>& llt,
                                std::size_t m) const {
        const std::size_t N = plan_.size();
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(which.size() * L_));
        std::vector<std::complex<double>> buf(N);
        for (std::size_t w = 0; w < which.size(); ++w) {
            const auto& R = spectra_[which[w]];
            for (std::size_t f = 0; f < N; ++f) buf[f] = std::conj(R[f]) * est_spec[f];
            plan_.transform(buf, true);
            for (std::size_t k = 0; k < L_; ++k) rhs(static_cast<Eigen::Index>(w * L_ + k)) = buf[k].real();
        }
        const Eigen::VectorXd coef = llt.solve(rhs);

        std::vector<std::complex<double>> acc(N, 0.0);
        std::vector<std::complex<double>> taps(N);
        for (std::size_t w = 0; w < which.size(); ++w) {
            std::fill(taps.begin(), taps.end(), std::complex<double>{});
            for (std::size_t k = 0; k < L_; ++k) taps[k] = coef(static_cast<Eigen::Index>(w * L_ + k));
            plan_.transform(taps);
            const auto& R = spectra_[which[w]];
            for (std::size_t f = 0; f < N; ++f) acc[f] += taps[f] * R[f];
        }
        return plan_.inverse_real(std::move(acc), m);
    }

    ProjectionConfig cfg_;
    std::size_t target_;
    std::size_t n_ = 0, L_ = 0, J_ = 0;
    FftPlan plan_;
    std::vector<std::vector<std::complex<double>>> spectra_;
    Eigen::LLT<Eigen::MatrixXd> target_llt_;
    Eigen::LLT<Eigen::MatrixXd> all_llt_;
};

inline Decomposition decompose(std::span<const double> estimate, const std::vector<std::span<const double>>& refs,
                               std::size_t target_index, const ProjectionConfig& cfg = {}) {
    return ReferenceProjector(refs, target_index, cfg).decompose(estimate);
}

// ---------------------------------------------------------------------------
// Framewise evaluation

struct FramewiseConfig {
    double window_s = 0.464;
    double hop_s = 0.117;
    ProjectionConfig projection;
};

/// Time-indexed SAR. Frames whose target reference is silent are masked and
/// carry NaN.
struct SarSeries {
    std::vector<double> values;
    std::vector<bool> valid;
    std::vector<double> times;  // window centres, seconds
    double hop_s = 0.0;
    double window_s = 0.0;

    std::size_t size() const { return values.size(); }
    std::size_t valid_count() const { return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true)); }
};

struct FrameGrid {
    std::size_t window = 0;  // samples
    std::size_t hop = 0;
    std::size_t frames = 0;
    int sample_rate = 0;

    std::size_t start(std::size_t k) const { return k * hop; }
    double centre_time(std::size_t k) const {
        return (static_cast<double>(k * hop) + static_cast<double>(window) / 2.0) / sample_rate;
    }
};

inline FrameGrid label_grid(std::size_t length, int sample_rate, double window_s, double hop_s) {
    if (!(window_s > 0 && hop_s > 0)) throw UsageError("label window and hop must be positive");
    FrameGrid g;
    g.sample_rate = sample_rate;
    g.window = static_cast<std::size_t>(std::llround(window_s * sample_rate));
    g.hop = static_cast<std::size_t>(std::llround(hop_s * sample_rate));
    if (g.window == 0 || g.hop == 0) throw UsageError("label window or hop rounds to zero samples");
    g.frames = length < g.window ? 0 : (length - g.window) / g.hop + 1;
    return g;
}

/// SAR series for several estimates sharing one reference set. Each window's
/// Gram systems are factorized once and reused across the estimates.
inline std::vector<SarSeries> framewise_sar(const std::vector<const AudioClip*>& estimates,
                                            const std::vector<AudioClip>& refs, std::size_t target_index,
                                            const FramewiseConfig& cfg = {}) {
    if (refs.empty()) throw UsageError("at least one reference is required");
    if (target_index >= refs.size()) throw UsageError("target index out of range");
    const AudioClip& first = refs.front();
    const auto check = [&](const AudioClip& c, const char* what) {
        if (c.num_channels() != 1) throw DimensionError(std::string(what) + " must be mono");
        if (c.sample_rate != first.sample_rate) throw DimensionError(std::string(what) + " sample rate mismatch");
        if (c.length() != first.length()) throw DimensionError(std::string(what) + " length mismatch");
    };
    for (const auto& r : refs) check(r, "reference");
    for (const auto* e : estimates) check(*e, "estimate");

    const FrameGrid grid = label_grid(first.length(), first.sample_rate, cfg.window_s, cfg.hop_s);
    std::vector<SarSeries> out(estimates.size());
    for (auto& s : out) {
        s.values.assign(grid.frames, std::numeric_limits<double>::quiet_NaN());
        s.valid.assign(grid.frames, false);
        s.times.resize(grid.frames);
        for (std::size_t k = 0; k < grid.frames; ++k) s.times[k] = grid.centre_time(k);
        s.hop_s = cfg.hop_s;
        s.window_s = cfg.window_s;
    }

    for (std::size_t k = 0; k < grid.frames; ++k) {
        std::vector<std::span<const double>> windows;
        for (const auto& r : refs) windows.push_back(r.channel(0).subspan(grid.start(k), grid.window));
        std::optional<ReferenceProjector> projector;
        try {
            projector.emplace(windows, target_index, cfg.projection);
        } catch (const SilentReferenceError&) {
            continue;
        }
        for (std::size_t e = 0; e < estimates.size(); ++e) {
            const auto d = projector->decompose(estimates[e]->channel(0).subspan(grid.start(k), grid.window));
            out[e].values[k] = sar(d, cfg.projection);
            out[e].valid[k] = true;
        }
    }
    return out;
}

inline SarSeries framewise_sar(const AudioClip& estimate, const std::vector<AudioClip>& refs, std::size_t target_index,
                               const FramewiseConfig& cfg = {}) {
    return framewise_sar(std::vector<const AudioClip*>{&estimate}, refs, target_index, cfg).front();
}

/// Columns: frame_index,time_s,sar_db,valid
inline void write_sar_csv(std::ostream& os, const SarSeries& s) {
    os << "frame_index,time_s,sar_db,valid\n";
    os << std::fixed;
    for (std::size_t k = 0; k < s.size(); ++k) {
        os << k << ',' << std::setprecision(6) << s.times[k] << ',';
        if (s.valid[k]) os << std::setprecision(6) << s.values[k];
        else os << "nan";
        os << ',' << (s.valid[k] ? 1 : 0) << '\n';
    }
    os.unsetf(std::ios::floatfield);
}

} // namespace nrsar
