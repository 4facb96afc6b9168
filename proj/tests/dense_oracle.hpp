#pragma once

// Test-only reference decomposition: materializes every shifted reference as
// an explicit column and solves the least-squares problems with a
// column-pivoting QR. Shares nothing with the FFT/Gram path under test.

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nrsar::testing {

/// Columns are r_j delayed by 0..L-1 samples on the padded support n + L - 1.
inline Eigen::MatrixXd shift_matrix(const std::vector<std::vector<double>>& refs, std::size_t L,
                                    std::size_t rows) {
    const std::size_t n = refs.front().size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                              static_cast<Eigen::Index>(refs.size() * L));
    for (std::size_t j = 0; j < refs.size(); ++j)
        for (std::size_t tau = 0; tau < L; ++tau)
            for (std::size_t t = 0; t < n && t + tau < rows; ++t)
                A(static_cast<Eigen::Index>(t + tau), static_cast<Eigen::Index>(j * L + tau)) = refs[j][t];
    return A;
}

inline Eigen::VectorXd project_onto(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    return A * qr.solve(y);
}

struct DenseDecomposition {
    Eigen::VectorXd s_target, e_interf, e_artif;
};

inline DenseDecomposition dense_decompose(const std::vector<double>& estimate,
                                          const std::vector<std::vector<double>>& refs, std::size_t target,
                                          std::size_t L) {
    const std::size_t m = estimate.size() + L - 1;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t t = 0; t < estimate.size(); ++t) y(static_cast<Eigen::Index>(t)) = estimate[t];
    const Eigen::VectorXd p_t = project_onto(shift_matrix({refs[target]}, L, m), y);
    const Eigen::VectorXd p_all = project_onto(shift_matrix(refs, L, m), y);
    return {p_t, p_all - p_t, y - p_all};
}

/// Removes from w its component in the span of `basis` columns, restricted
/// to the first w.size() rows. The result has the same support as w.
inline std::vector<double> orthogonalize(const std::vector<double>& w, const Eigen::MatrixXd& basis) {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::MatrixXd B = basis.topRows(static_cast<Eigen::Index>(w.size()));
    v -= project_onto(B, v);
    return {v.data(), v.data() + v.size()};
}

/// Basis of r delayed by -(L-1)..(L-1), truncated to r's support.
inline Eigen::MatrixXd two_sided_shifts(const std::vector<double>& r, std::size_t L) {
    const std::size_t n = r.size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * L - 1));
    for (std::size_t c = 0; c < 2 * L - 1; ++c) {
        const auto shift = static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(L - 1);
        for (std::size_t t = 0; t < n; ++t) {
            const auto src = static_cast<std::ptrdiff_t>(t) - shift;
            if (src >= 0 && src < static_cast<std::ptrdiff_t>(n))
                A(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = r[static_cast<std::size_t>(src)];
        }
    }
    return A;
}

inline std::vector<double> white_noise(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> x(n);
    for (double& v : x) v = dist(rng);
    return x;
}

inline double sq_norm(std::span<const double> x) {
    double e = 0;
    for (double v : x) e += v * v;
    return e;
}

inline double ratio_db(double num, double den) { return 10.0 * std::log10(num / den); }

/// estimate = refs[target] + noise, where noise is orthogonal to every shift
/// of every reference and scaled so ||ref||^2 / ||noise||^2 hits `snr_db`.
inline std::vector<double> with_orthogonal_artifact(const std::vector<std::vector<double>>& refs, std::size_t target,
                                                    std::size_t L, double snr_db, std::mt19937_64& rng,
                                                    std::vector<double>* noise_out = nullptr) {
    const std::size_t n = refs.front().size();
    auto noise = orthogonalize(white_noise(n, rng), shift_matrix(refs, L, n + L - 1));
    const double scale = std::sqrt(sq_norm(refs[target]) / sq_norm(noise) / std::pow(10.0, snr_db / 10.0));
    for (double& v : noise) v *= scale;
    std::vector<double> est(n);
    for (std::size_t t = 0; t < n; ++t) est[t] = refs[target][t] + noise[t];
    if (noise_out) *noise_out = noise;
    return est;
}

} // namespace nrsar::testing
