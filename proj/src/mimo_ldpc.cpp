#include "ura/mimo_ldpc.hpp"

#include <cmath>

#include "ura/errors.hpp"

namespace ura {

namespace {

constexpr double kTanhClamp = 19.0;
constexpr double kProdGuard = 1.0 - 1e-15;
constexpr double kLogisticClamp = 50.0;

double logistic_clamped(double x) {
    if (x > kLogisticClamp) x = kLogisticClamp;
    if (x < -kLogisticClamp) x = -kLogisticClamp;
    return 1.0 / (1.0 + std::exp(-x));
}

double tanh_half(double q) {
    if (q > 2 * kTanhClamp) q = 2 * kTanhClamp;
    if (q < -2 * kTanhClamp) q = -2 * kTanhClamp;
    return std::tanh(0.5 * q);
}

} // namespace

MimoLdpcDecoder::MimoLdpcDecoder(const ValidatedConfig& cfg, const LdpcCode& code,
                                 Eigen::MatrixXcd y_c, std::vector<MimoDevice> devices)
    : cfg_(cfg), code_(code), y_(std::move(y_c)), devices_(std::move(devices)) {
    if (y_.rows() != cfg.lc)
        throw DimensionMismatch("data block must have lc rows");
    if (y_.cols() != cfg.raw.m)
        throw DimensionMismatch("data block must have m columns");
    for (const auto& d : devices_) {
        if (d.h_eff.size() != cfg.raw.m)
            throw DimensionMismatch("device channel length must equal m");
        if (static_cast<int>(d.il.perm.size()) != cfg.lc)
            throw DimensionMismatch("device interleaver must cover lc positions");
    }
    sigma2_ = cfg.raw.sigma2;
    qpsk_ = cfg.raw.modulation == Modulation::qpsk;
    n_sym_ = cfg.n_sym;

    for (int n = 0; n < code_.nchk; ++n)
        for (int b : code_.rows[static_cast<size_t>(n)]) edges_.emplace_back(n, b);
    cn_edges_.resize(static_cast<size_t>(code_.nchk));
    vn_edges_.resize(static_cast<size_t>(code_.n));
    for (size_t e = 0; e < edges_.size(); ++e) {
        cn_edges_[static_cast<size_t>(edges_[e].first)].push_back(static_cast<int>(e));
        vn_edges_[static_cast<size_t>(edges_[e].second)].push_back(static_cast<int>(e));
    }

    decoded_.assign(devices_.size(), 0);
    frozen_sym_.assign(devices_.size(), {});
    restart_round(y_);
}

void MimoLdpcDecoder::restart_round(const Eigen::MatrixXcd& residual) {
    y_ = residual;
    const int nd = n_devices(), m = cfg_.raw.m;

    // decoded devices were cancelled from the residual, so only the
    // remaining ones occupy channel uses from here on
    occupants_.assign(static_cast<size_t>(cfg_.lc), {});
    for (int d = 0; d < nd; ++d) {
        if (decoded_[static_cast<size_t>(d)]) continue;
        for (int p = 0; p < n_sym_; ++p)
            occupants_[static_cast<size_t>(devices_[static_cast<size_t>(d)].il.position_of(p))]
                .emplace_back(d, p);
    }

    r_.assign(static_cast<size_t>(nd), std::vector<double>(edges_.size(), 0.0));
    q_.assign(static_cast<size_t>(nd), std::vector<double>(edges_.size(), 0.0));
    lambda_.assign(static_cast<size_t>(nd),
                   std::vector<std::complex<double>>(static_cast<size_t>(n_sym_ * m), {0, 0}));
    p_re_.assign(static_cast<size_t>(nd),
                 std::vector<double>(static_cast<size_t>(n_sym_ * m), 0.5));
    p_im_.assign(static_cast<size_t>(nd),
                 std::vector<double>(static_cast<size_t>(n_sym_ * m), 0.5));
    llr_.assign(static_cast<size_t>(nd), std::vector<double>(static_cast<size_t>(code_.n), 0.0));
    hard_.assign(static_cast<size_t>(nd), BitVec(static_cast<size_t>(code_.n), 0));
}

void MimoLdpcDecoder::lambda_update() {
    const int m = cfg_.raw.m;
    const double scale = qpsk_ ? 2.0 * std::sqrt(2.0) : 2.0;
    for (int l2 = 0; l2 < cfg_.lc; ++l2) {
        const auto& occ = occupants_[static_cast<size_t>(l2)];
        if (occ.empty()) continue;
        for (int j = 0; j < m; ++j) {
            // totals over every occupant of this channel use, then exclude own
            std::complex<double> mean_tot(0, 0);
            double var_tot = 0;
            // per-occupant symbol stats seen from antenna j
            thread_local std::vector<std::complex<double>> es;
            thread_local std::vector<double> vs;
            es.assign(occ.size(), {0, 0});
            vs.assign(occ.size(), 0.0);
            for (size_t t = 0; t < occ.size(); ++t) {
                const auto [d, p] = occ[t];
                const size_t pm = static_cast<size_t>(p) * static_cast<size_t>(m) +
                                  static_cast<size_t>(j);
                std::complex<double> e;
                double v;
                if (decoded_[static_cast<size_t>(d)]) {
                    e = frozen_sym_[static_cast<size_t>(d)][static_cast<size_t>(p)];
                    v = 0.0;
                } else if (qpsk_) {
                    const double pr = p_re_[static_cast<size_t>(d)][pm];
                    const double pi = p_im_[static_cast<size_t>(d)][pm];
                    e = std::complex<double>(2 * pr - 1, 2 * pi - 1) / std::sqrt(2.0);
                    v = 2.0 * (pr - pr * pr + pi - pi * pi);
                } else {
                    const double pr = p_re_[static_cast<size_t>(d)][pm];
                    e = std::complex<double>(2 * pr - 1, 0);
                    v = 4.0 * pr * (1 - pr);
                }
                es[t] = e;
                vs[t] = v;
                const std::complex<double> h = devices_[static_cast<size_t>(d)].h_eff[j];
                mean_tot += h * e;
                var_tot += std::norm(h) * v;
            }
            for (size_t t = 0; t < occ.size(); ++t) {
                const auto [d, p] = occ[t];
                if (decoded_[static_cast<size_t>(d)]) continue;
                const std::complex<double> h = devices_[static_cast<size_t>(d)].h_eff[j];
                const std::complex<double> mu_z = mean_tot - h * es[t];
                double var_z = var_tot - std::norm(h) * vs[t];
                if (var_z < 0) var_z = 0;
                var_z += sigma2_;
                const std::complex<double> r = std::conj(h) * (y_(l2, j) - mu_z);
                const size_t pm = static_cast<size_t>(p) * static_cast<size_t>(m) +
                                  static_cast<size_t>(j);
                if (qpsk_)
                    lambda_[static_cast<size_t>(d)][pm] = scale / var_z * r;
                else
                    lambda_[static_cast<size_t>(d)][pm] = {scale / var_z * r.real(), 0.0};
            }
        }
    }
}

void MimoLdpcDecoder::q_update() {
    const int m = cfg_.raw.m;
    for (int d = 0; d < n_devices(); ++d) {
        if (decoded_[static_cast<size_t>(d)]) continue;
        auto& lam = lambda_[static_cast<size_t>(d)];
        lamsum_re_.assign(static_cast<size_t>(n_sym_), 0.0);
        lamsum_im_.assign(static_cast<size_t>(n_sym_), 0.0);
        for (int p = 0; p < n_sym_; ++p)
            for (int j = 0; j < m; ++j) {
                const auto v = lam[static_cast<size_t>(p) * m + static_cast<size_t>(j)];
                lamsum_re_[static_cast<size_t>(p)] += v.real();
                lamsum_im_[static_cast<size_t>(p)] += v.imag();
            }
        auto& q = q_[static_cast<size_t>(d)];
        auto& r = r_[static_cast<size_t>(d)];
        for (int b = 0; b < code_.n; ++b) {
            double lam_b;
            if (qpsk_)
                lam_b = b % 2 == 0 ? lamsum_re_[static_cast<size_t>(b / 2)]
                                   : lamsum_im_[static_cast<size_t>(b / 2)];
            else
                lam_b = lamsum_re_[static_cast<size_t>(b)];
            double rsum = 0;
            for (int e : vn_edges_[static_cast<size_t>(b)]) rsum += r[static_cast<size_t>(e)];
            for (int e : vn_edges_[static_cast<size_t>(b)])
                q[static_cast<size_t>(e)] = lam_b + rsum - r[static_cast<size_t>(e)];
        }
    }
}

void MimoLdpcDecoder::r_update() {
    for (int d = 0; d < n_devices(); ++d) {
        if (decoded_[static_cast<size_t>(d)]) continue;
        auto& q = q_[static_cast<size_t>(d)];
        auto& r = r_[static_cast<size_t>(d)];
        for (int n = 0; n < code_.nchk; ++n) {
            const auto& es = cn_edges_[static_cast<size_t>(n)];
            for (size_t i = 0; i < es.size(); ++i) {
                double prod = 1.0;
                for (size_t k = 0; k < es.size(); ++k) {
                    if (k == i) continue;
                    prod *= tanh_half(q[static_cast<size_t>(es[k])]);
                }
                if (prod > kProdGuard) prod = kProdGuard;
                if (prod < -kProdGuard) prod = -kProdGuard;
                r[static_cast<size_t>(es[i])] = 2.0 * std::atanh(prod);
            }
        }
    }
}

void MimoLdpcDecoder::p_update() {
    const int m = cfg_.raw.m;
    for (int d = 0; d < n_devices(); ++d) {
        if (decoded_[static_cast<size_t>(d)]) continue;
        auto& lam = lambda_[static_cast<size_t>(d)];
        auto& r = r_[static_cast<size_t>(d)];
        rsum_.assign(static_cast<size_t>(code_.n), 0.0);
        for (size_t e = 0; e < edges_.size(); ++e)
            rsum_[static_cast<size_t>(edges_[e].second)] += r[e];
        lamsum_re_.assign(static_cast<size_t>(n_sym_), 0.0);
        lamsum_im_.assign(static_cast<size_t>(n_sym_), 0.0);
        for (int p = 0; p < n_sym_; ++p)
            for (int j = 0; j < m; ++j) {
                const auto v = lam[static_cast<size_t>(p) * m + static_cast<size_t>(j)];
                lamsum_re_[static_cast<size_t>(p)] += v.real();
                lamsum_im_[static_cast<size_t>(p)] += v.imag();
            }
        auto& pr = p_re_[static_cast<size_t>(d)];
        auto& pi = p_im_[static_cast<size_t>(d)];
        for (int p = 0; p < n_sym_; ++p)
            for (int j = 0; j < m; ++j) {
                const size_t pm = static_cast<size_t>(p) * m + static_cast<size_t>(j);
                if (qpsk_) {
                    const double ar = lamsum_re_[static_cast<size_t>(p)] - lam[pm].real() +
                                      rsum_[static_cast<size_t>(2 * p)];
                    const double ai = lamsum_im_[static_cast<size_t>(p)] - lam[pm].imag() +
                                      rsum_[static_cast<size_t>(2 * p + 1)];
                    pr[pm] = logistic_clamped(ar);
                    pi[pm] = logistic_clamped(ai);
                } else {
                    const double a = lamsum_re_[static_cast<size_t>(p)] - lam[pm].real() +
                                     rsum_[static_cast<size_t>(p)];
                    pr[pm] = logistic_clamped(a);
                }
            }
    }
}

std::vector<int> MimoLdpcDecoder::decide_all() {
    const int m = cfg_.raw.m;
    std::vector<int> fresh;
    for (int d = 0; d < n_devices(); ++d) {
        if (decoded_[static_cast<size_t>(d)]) continue;
        auto& lam = lambda_[static_cast<size_t>(d)];
        auto& r = r_[static_cast<size_t>(d)];
        rsum_.assign(static_cast<size_t>(code_.n), 0.0);
        for (size_t e = 0; e < edges_.size(); ++e)
            rsum_[static_cast<size_t>(edges_[e].second)] += r[e];
        auto& llr = llr_[static_cast<size_t>(d)];
        auto& hard = hard_[static_cast<size_t>(d)];
        for (int b = 0; b < code_.n; ++b) {
            double lam_b = 0;
            const int p = qpsk_ ? b / 2 : b;
            for (int j = 0; j < m; ++j) {
                const auto v = lam[static_cast<size_t>(p) * m + static_cast<size_t>(j)];
                lam_b += (!qpsk_ || b % 2 == 0) ? v.real() : v.imag();
            }
            llr[static_cast<size_t>(b)] = lam_b + rsum_[static_cast<size_t>(b)];
            hard[static_cast<size_t>(b)] = llr[static_cast<size_t>(b)] > 0 ? 1 : 0;
        }
        if (parity_check(code_, hard)) {
            decoded_[static_cast<size_t>(d)] = 1;
            frozen_sym_[static_cast<size_t>(d)].resize(static_cast<size_t>(n_sym_));
            const auto sym = modulate(hard, cfg_.raw.modulation);
            for (int p = 0; p < n_sym_; ++p)
                frozen_sym_[static_cast<size_t>(d)][static_cast<size_t>(p)] = sym[static_cast<size_t>(p)];
            fresh.push_back(d);
        }
    }
    return fresh;
}

void MimoLdpcDecoder::iterate_once() {
    lambda_update();
    q_update();
    r_update();
    p_update();
}

Eigen::MatrixXcd sic_subtract(const ValidatedConfig& cfg, const Eigen::MatrixXcd& y_c,
                              const std::vector<MimoDevice>& devices,
                              const std::vector<LdpcSicResult::Entry>& decoded) {
    if (y_c.rows() != cfg.lc || y_c.cols() != cfg.raw.m)
        throw DimensionMismatch("sic_subtract: data block shape mismatch");
    Eigen::MatrixXcd residual = y_c;
    for (const auto& e : decoded) {
        const auto& dev = devices.at(static_cast<size_t>(e.device));
        const Eigen::VectorXcd placed = placed_symbols(cfg, dev.il, e.codeword);
        residual.noalias() -= placed * dev.h_eff.transpose();
    }
    return residual;
}

LdpcSicResult MimoLdpcDecoder::run() {
    LdpcSicResult result;
    if (devices_.empty()) return result;
    const Eigen::MatrixXcd y0 = y_;

    while (true) {
        ++result.rounds;
        int new_this_round = 0;
        for (int it = 0; it < cfg_.raw.n_iter_ldpc; ++it) {
            iterate_once();
            for (int d : decide_all()) {
                result.decoded.push_back({d,
                                          BitVec(hard_[static_cast<size_t>(d)].begin(),
                                                 hard_[static_cast<size_t>(d)].begin() + code_.bc),
                                          hard_[static_cast<size_t>(d)], result.rounds});
                ++new_this_round;
            }
            bool all = true;
            for (int d = 0; d < n_devices(); ++d)
                if (!decoded_[static_cast<size_t>(d)]) all = false;
            if (all) break;
        }
        result.decoded_per_round.push_back(new_this_round);

        bool all = true;
        for (int d = 0; d < n_devices(); ++d)
            if (!decoded_[static_cast<size_t>(d)]) all = false;
        if (!cfg_.raw.sic || all || new_this_round == 0) break;

        // next cancellation round against the original block
        restart_round(sic_subtract(cfg_, y0, devices_, result.decoded));
    }
    return result;
}

LdpcSicResult run_ldpc_sic(const ValidatedConfig& cfg, const LdpcCode& code,
                           const Eigen::MatrixXcd& y_c, std::vector<MimoDevice> devices) {
    if (devices.empty()) return {};
    MimoLdpcDecoder dec(cfg, code, y_c, std::move(devices));
    return dec.run();
}

} // namespace ura
