// Independent reference computations used by the tests. Everything here is
// deliberately written from the model definition (pdfs, enumerations, dense
// linear algebra), not by calling the implementation under test.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

/// log N_C(y; mu, C) for a circularly symmetric complex Gaussian.
inline double log_cgauss(const Eigen::VectorXcd& y, const Eigen::VectorXcd& mu,
                         const Eigen::MatrixXcd& c) {
    const Eigen::Index m = y.size();
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(c);
    double logdet = 0;
    for (Eigen::Index i = 0; i < m; ++i) logdet += std::log(ldlt.vectorD()[i].real());
    const Eigen::VectorXcd d = y - mu;
    const double q = d.dot(ldlt.solve(d)).real();
    return -q - logdet - m * std::log(M_PI);
}

/// Exact activity posteriors for the narrow-band phase by enumerating every
/// activity pattern with at most max_active devices. Channels are CN(0, I)
/// and integrate out in closed form: columns of y are i.i.d.
/// CN(0, sum_{k in S} a_k a_k^H + sigma2 I).
/// Returns P(phi_k = 1 | y) for every candidate k.
inline Eigen::VectorXd exhaustive_activity_posterior(const Eigen::MatrixXcd& sensing,
                                                     const Eigen::MatrixXcd& y, double sigma2,
                                                     double pa, int max_active) {
    const int k = static_cast<int>(sensing.cols());
    const Eigen::Index lp = sensing.rows();
    const Eigen::Index m = y.cols();

    std::vector<std::vector<int>> patterns;
    patterns.push_back({});
    for (int a = 0; a < k && max_active >= 1; ++a) patterns.push_back({a});
    if (max_active >= 2)
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b) patterns.push_back({a, b});

    const double lpa = std::log(pa), lqa = std::log(1.0 - pa);
    std::vector<double> logw;
    logw.reserve(patterns.size());
    double best = -1e300;
    for (const auto& s : patterns) {
        Eigen::MatrixXcd c = sigma2 * Eigen::MatrixXcd::Identity(lp, lp);
        for (int a : s) c += sensing.col(a) * sensing.col(a).adjoint();
        Eigen::LDLT<Eigen::MatrixXcd> ldlt(c);
        double logdet = 0;
        for (Eigen::Index i = 0; i < lp; ++i) logdet += std::log(ldlt.vectorD()[i].real());
        double ll = 0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::VectorXcd col = y.col(j);
            ll += -col.dot(ldlt.solve(col)).real() - logdet;
        }
        ll += static_cast<double>(s.size()) * (lpa - lqa); // constant lqa*k dropped
        logw.push_back(ll);
        best = std::max(best, ll);
    }

    double z = 0;
    std::vector<double> w(patterns.size());
    for (size_t i = 0; i < patterns.size(); ++i) {
        w[i] = std::exp(logw[i] - best);
        z += w[i];
    }
    Eigen::VectorXd post = Eigen::VectorXd::Zero(k);
    for (size_t i = 0; i < patterns.size(); ++i)
        for (int a : patterns[i]) post[a] += w[i];
    return post / z;
}

} // namespace oracle
