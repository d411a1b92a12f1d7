#include "ura/dad_ce.hpp"

#include <cmath>

#include "ura/errors.hpp"

namespace ura {

namespace {

constexpr double kCoefFloor = 1e-12; // edges below this are skipped
constexpr double kReg = 1e-12;       // ridge added before every inversion

double clamp_llr(double x, double c) { return x > c ? c : (x < -c ? -c : x); }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXcd inv_hermitian(const Eigen::MatrixXcd& x) {
    const Eigen::Index m = x.rows();
    Eigen::MatrixXcd reg = x;
    reg.diagonal().array() += kReg;
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(reg);
    if (ldlt.info() != Eigen::Success)
        throw SingularCovariance("covariance inversion failed");
    Eigen::MatrixXcd inv = ldlt.solve(Eigen::MatrixXcd::Identity(m, m));
    if (!inv.allFinite()) throw SingularCovariance("covariance inverse not finite");
    return inv;
}

double logdet_hermitian(const Eigen::MatrixXcd& x) {
    Eigen::MatrixXcd reg = x;
    reg.diagonal().array() += kReg;
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(reg);
    if (ldlt.info() != Eigen::Success)
        throw SingularCovariance("covariance factorization failed");
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double d = ldlt.vectorD()[i].real();
        s += std::log(d > 1e-300 ? d : 1e-300);
    }
    return s;
}

double quad_form(const Eigen::MatrixXcd& cov, const Eigen::VectorXcd& d) {
    Eigen::MatrixXcd reg = cov;
    reg.diagonal().array() += kReg;
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(reg);
    if (ldlt.info() != Eigen::Success)
        throw SingularCovariance("covariance solve failed");
    return d.dot(ldlt.solve(d)).real();
}

void hermitianize(Eigen::MatrixXcd& x) { x = 0.5 * (x + x.adjoint()).eval(); }

} // namespace

DadCeDecoder::DadCeDecoder(Eigen::MatrixXcd sensing, Eigen::MatrixXcd y,
                           Eigen::MatrixXd noise_diag, double l0, DadCeOptions opt)
    : sensing_(std::move(sensing)), y_(std::move(y)), noise_diag_(std::move(noise_diag)),
      opt_(opt), l0_(l0) {
    if (y_.rows() != sensing_.rows())
        throw DimensionMismatch("observations and sensing matrix disagree on rows");
    if (noise_diag_.rows() != y_.rows() || noise_diag_.cols() != y_.cols())
        throw DimensionMismatch("noise matrix must match the observations");

    const int nr = rows(), nd = ndev(), m = antennas();
    row_adj_.resize(static_cast<size_t>(nr));
    col_adj_.resize(static_cast<size_t>(nd));
    for (int l = 0; l < nr; ++l)
        for (int k = 0; k < nd; ++k)
            if (std::abs(sensing_(l, k)) > kCoefFloor) {
                row_adj_[static_cast<size_t>(l)].push_back(k);
                col_adj_[static_cast<size_t>(k)].push_back(l);
            }

    const size_t nedge = static_cast<size_t>(nr) * static_cast<size_t>(nd);
    mu_sn_.assign(nedge * static_cast<size_t>(m), {0.0, 0.0});
    llr_sn_.assign(nedge, 0.0);
    if (opt_.diag_approx) {
        var_sn_.assign(nedge * static_cast<size_t>(m), 0.0);
    } else {
        cov_sn_.assign(nedge, Eigen::MatrixXcd());
        prec_sn_.assign(nedge, Eigen::MatrixXcd());
    }

    prior_mean_ = Eigen::MatrixXcd::Zero(nd, m);
    prior_var_ = Eigen::MatrixXd::Ones(nd, m);
    if (!opt_.diag_approx) {
        prior_cov_.assign(static_cast<size_t>(nd), Eigen::MatrixXcd::Identity(m, m));
        prior_prec_.assign(static_cast<size_t>(nd), Eigen::MatrixXcd::Identity(m, m));
    }
    refresh_totals();
}

void DadCeDecoder::set_prior(const Eigen::MatrixXcd& mean, const Eigen::MatrixXd& var) {
    if (mean.rows() != ndev() || mean.cols() != antennas() || var.rows() != ndev() ||
        var.cols() != antennas())
        throw DimensionMismatch("prior must be ndev x m");
    prior_mean_ = mean;
    prior_var_ = var.cwiseMax(kReg);
    if (!opt_.diag_approx) {
        for (int k = 0; k < ndev(); ++k) {
            prior_cov_[static_cast<size_t>(k)] = var.row(k).asDiagonal();
            prior_prec_[static_cast<size_t>(k)] =
                prior_var_.row(k).cwiseInverse().matrix().asDiagonal();
        }
    }
    refresh_totals();
}

void DadCeDecoder::set_prior_full(const Eigen::MatrixXcd& mean,
                                  std::vector<Eigen::MatrixXcd> cov) {
    if (opt_.diag_approx) {
        // collapse to diagonals in the simplified mode
        Eigen::MatrixXd var(ndev(), antennas());
        for (int k = 0; k < ndev(); ++k)
            var.row(k) = cov[static_cast<size_t>(k)].diagonal().real();
        set_prior(mean, var);
        return;
    }
    prior_mean_ = mean;
    prior_cov_ = std::move(cov);
    prior_prec_.resize(prior_cov_.size());
    for (size_t k = 0; k < prior_cov_.size(); ++k) prior_prec_[k] = inv_hermitian(prior_cov_[k]);
    for (int k = 0; k < ndev(); ++k)
        prior_var_.row(k) = prior_cov_[static_cast<size_t>(k)].diagonal().real().cwiseMax(kReg);
    refresh_totals();
}

void DadCeDecoder::refresh_totals() {
    const int nd = ndev(), m = antennas();
    llr_tot_ = Eigen::VectorXd::Constant(nd, l0_);
    if (opt_.diag_approx) {
        prec_tot_.resize(nd, m);
        wmean_tot_.resize(nd, m);
        for (int k = 0; k < nd; ++k)
            for (int j = 0; j < m; ++j) {
                const double pp = 1.0 / prior_var_(k, j);
                prec_tot_(k, j) = pp;
                wmean_tot_(k, j) = pp * prior_mean_(k, j);
            }
    } else {
        prec_tot_full_.assign(static_cast<size_t>(nd), Eigen::MatrixXcd());
        wmean_tot_full_.assign(static_cast<size_t>(nd), Eigen::VectorXcd());
        for (int k = 0; k < nd; ++k) {
            prec_tot_full_[static_cast<size_t>(k)] = prior_prec_[static_cast<size_t>(k)];
            wmean_tot_full_[static_cast<size_t>(k)] =
                prior_prec_[static_cast<size_t>(k)] * prior_mean_.row(k).transpose();
        }
    }
    if (iter_ == 0) return; // no observation messages yet

    for (int k = 0; k < nd; ++k) {
        for (int l : col_adj_[static_cast<size_t>(k)]) {
            const size_t e = static_cast<size_t>(l) * static_cast<size_t>(nd) + static_cast<size_t>(k);
            llr_tot_[k] += llr_sn_[e];
            if (opt_.diag_approx) {
                const size_t base = e * static_cast<size_t>(m);
                for (int j = 0; j < m; ++j) {
                    const double pp = 1.0 / var_sn_[base + static_cast<size_t>(j)];
                    prec_tot_(k, j) += pp;
                    wmean_tot_(k, j) += pp * mu_sn_[base + static_cast<size_t>(j)];
                }
            } else {
                const size_t base = e * static_cast<size_t>(m);
                Eigen::VectorXcd mu(m);
                for (int j = 0; j < m; ++j) mu[j] = mu_sn_[base + static_cast<size_t>(j)];
                prec_tot_full_[static_cast<size_t>(k)] += prec_sn_[e];
                wmean_tot_full_[static_cast<size_t>(k)] += prec_sn_[e] * mu;
            }
        }
    }
}

void DadCeDecoder::vn_message(int k, int l, Eigen::VectorXcd& mu, Eigen::VectorXd& var_diag,
                              Eigen::MatrixXcd* cov_full, double& llr) const {
    const int m = antennas(), nd = ndev();
    const size_t e = static_cast<size_t>(l) * static_cast<size_t>(nd) + static_cast<size_t>(k);
    const bool has_sn = iter_ > 0;
    llr = has_sn ? llr_tot_[k] - llr_sn_[e] : l0_;
    llr = clamp_llr(llr, opt_.llr_clamp);
    mu.resize(m);
    if (opt_.diag_approx) {
        var_diag.resize(m);
        const size_t base = e * static_cast<size_t>(m);
        for (int j = 0; j < m; ++j) {
            double prec = prec_tot_(k, j);
            std::complex<double> w = wmean_tot_(k, j);
            if (has_sn) {
                const double pe = 1.0 / var_sn_[base + static_cast<size_t>(j)];
                prec -= pe;
                w -= pe * mu_sn_[base + static_cast<size_t>(j)];
            }
            prec = prec > kReg ? prec : kReg;
            var_diag[j] = 1.0 / prec;
            mu[j] = w / prec;
        }
    } else {
        Eigen::MatrixXcd prec = prec_tot_full_[static_cast<size_t>(k)];
        Eigen::VectorXcd w = wmean_tot_full_[static_cast<size_t>(k)];
        if (has_sn) {
            const size_t base = e * static_cast<size_t>(m);
            Eigen::VectorXcd mu_e(m);
            for (int j = 0; j < m; ++j) mu_e[j] = mu_sn_[base + static_cast<size_t>(j)];
            prec -= prec_sn_[e];
            w -= prec_sn_[e] * mu_e;
        }
        hermitianize(prec);
        Eigen::MatrixXcd cov = inv_hermitian(prec);
        mu = cov * w;
        var_diag = cov.diagonal().real();
        if (cov_full) *cov_full = std::move(cov);
    }
}

void DadCeDecoder::interference_stats(int l, int k, Eigen::VectorXcd& mu_z,
                                      Eigen::VectorXd& var_z, Eigen::MatrixXcd* cov_z) const {
    const int m = antennas();
    mu_z = Eigen::VectorXcd::Zero(m);
    Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(m, m);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(m);
    Eigen::VectorXcd mu_i;
    Eigen::VectorXd var_i;
    Eigen::MatrixXcd cov_i;
    for (int i : row_adj_[static_cast<size_t>(l)]) {
        if (i == k) continue;
        double llr_i;
        vn_message(i, l, mu_i, var_i, opt_.diag_approx ? nullptr : &cov_i, llr_i);
        const double p = opt_.activity_fixed ? 1.0 : logistic(llr_i);
        const double q = 1.0 - p;
        const std::complex<double> a = sensing_(l, i);
        const double a2 = std::norm(a);
        mu_z += a * p * mu_i;
        if (opt_.diag_approx) {
            for (int j = 0; j < m; ++j)
                var[j] += a2 * p * (var_i[j] + q * std::norm(mu_i[j]));
        } else {
            cov += a2 * p * (cov_i + q * (mu_i * mu_i.adjoint()));
        }
    }
    if (opt_.diag_approx) {
        var_z = var + noise_diag_.row(l).transpose();
    } else {
        cov.diagonal() += noise_diag_.row(l).transpose().cast<std::complex<double>>();
        var_z = cov.diagonal().real();
        if (cov_z) *cov_z = std::move(cov);
    }
}

void DadCeDecoder::sn_pass() {
    const int nd = ndev(), m = antennas();
    // no message history to damp against on the first pass
    const double theta = iter_ > 0 ? opt_.damping : 0.0;
    const double theta_l = iter_ > 0 ? opt_.llr_damping() : 0.0;

    // row-local staging of the variable-side messages (previous iteration)
    std::vector<std::complex<double>> mu_buf;
    std::vector<double> var_buf;
    std::vector<Eigen::MatrixXcd> cov_buf;
    std::vector<double> p_buf;

    Eigen::VectorXcd mu_i(m);
    Eigen::VectorXd var_i(m);
    Eigen::MatrixXcd cov_i;

    for (int l = 0; l < rows(); ++l) {
        const auto& adj = row_adj_[static_cast<size_t>(l)];
        const size_t na = adj.size();
        mu_buf.assign(na * static_cast<size_t>(m), {0.0, 0.0});
        p_buf.assign(na, 1.0);
        if (opt_.diag_approx)
            var_buf.assign(na * static_cast<size_t>(m), 0.0);
        else
            cov_buf.assign(na, Eigen::MatrixXcd());

        // stage VN -> SN messages for this row
        for (size_t t = 0; t < na; ++t) {
            double llr_i;
            vn_message(adj[t], l, mu_i, var_i, opt_.diag_approx ? nullptr : &cov_i, llr_i);
            for (int j = 0; j < m; ++j) mu_buf[t * static_cast<size_t>(m) + static_cast<size_t>(j)] = mu_i[j];
            if (opt_.diag_approx)
                for (int j = 0; j < m; ++j)
                    var_buf[t * static_cast<size_t>(m) + static_cast<size_t>(j)] = var_i[j];
            else
                cov_buf[t] = cov_i;
            p_buf[t] = opt_.activity_fixed ? 1.0 : logistic(llr_i);
        }

        // totals over the row, then per-edge exclusion
        Eigen::VectorXcd smean = Eigen::VectorXcd::Zero(m);
        Eigen::VectorXd svar = Eigen::VectorXd::Zero(m);
        Eigen::MatrixXcd scov;
        if (!opt_.diag_approx) scov = Eigen::MatrixXcd::Zero(m, m);
        for (size_t t = 0; t < na; ++t) {
            const std::complex<double> a = sensing_(l, adj[t]);
            const double a2 = std::norm(a);
            const double p = p_buf[t], q = 1.0 - p;
            for (int j = 0; j < m; ++j) {
                const auto mu = mu_buf[t * static_cast<size_t>(m) + static_cast<size_t>(j)];
                smean[j] += a * p * mu;
                if (opt_.diag_approx)
                    svar[j] += a2 * p * (var_buf[t * static_cast<size_t>(m) + static_cast<size_t>(j)] +
                                         q * std::norm(mu));
            }
            if (!opt_.diag_approx) {
                Eigen::Map<const Eigen::VectorXcd> muv(&mu_buf[t * static_cast<size_t>(m)], m);
                scov += a2 * p * (cov_buf[t] + q * (muv * muv.adjoint()));
            }
        }

        for (size_t t = 0; t < na; ++t) {
            const int k = adj[t];
            const size_t e = static_cast<size_t>(l) * static_cast<size_t>(nd) + static_cast<size_t>(k);
            const size_t base = e * static_cast<size_t>(m);
            const std::complex<double> a = sensing_(l, k);
            const double a2 = std::norm(a);
            const double p = p_buf[t], q = 1.0 - p;
            Eigen::Map<const Eigen::VectorXcd> mu_own(&mu_buf[t * static_cast<size_t>(m)], m);

            Eigen::VectorXcd mu_z(m);
            for (int j = 0; j < m; ++j) mu_z[j] = smean[j] - a * p * mu_own[j];

            if (opt_.diag_approx) {
                for (int j = 0; j < m; ++j) {
                    const double own =
                        a2 * p * (var_buf[t * static_cast<size_t>(m) + static_cast<size_t>(j)] +
                                  q * std::norm(mu_own[j]));
                    double vz = svar[j] - own;
                    if (vz < 0.0) vz = 0.0; // cancellation guard
                    vz += noise_diag_(l, j);

                    const std::complex<double> mu_new = (y_(l, j) - mu_z[j]) / a;
                    const double var_new = vz / a2;
                    mu_sn_[base + static_cast<size_t>(j)] =
                        theta == 0.0 ? mu_new
                                     : (1.0 - theta) * mu_new + theta * mu_sn_[base + static_cast<size_t>(j)];
                    var_sn_[base + static_cast<size_t>(j)] =
                        theta == 0.0 ? var_new
                                     : (1.0 - theta) * var_new + theta * var_sn_[base + static_cast<size_t>(j)];
                }
                if (!opt_.activity_fixed) {
                    double llr = 0.0;
                    for (int j = 0; j < m; ++j) {
                        const double own =
                            a2 * p * (var_buf[t * static_cast<size_t>(m) + static_cast<size_t>(j)] +
                                      q * std::norm(mu_own[j]));
                        double vz = svar[j] - own;
                        if (vz < 0.0) vz = 0.0;
                        vz += noise_diag_(l, j);
                        const double v2 =
                            a2 * var_buf[t * static_cast<size_t>(m) + static_cast<size_t>(j)] + vz;
                        const std::complex<double> d1 = y_(l, j) - mu_z[j];
                        const std::complex<double> d2 = d1 - a * mu_own[j];
                        llr += std::log(vz) - std::log(v2) + std::norm(d1) / vz - std::norm(d2) / v2;
                    }
                    llr_sn_[e] = theta_l == 0.0 ? llr : (1.0 - theta_l) * llr + theta_l * llr_sn_[e];
                }
            } else {
                Eigen::MatrixXcd cov_z = scov - a2 * p * (cov_buf[t] + q * (mu_own * mu_own.adjoint()));
                hermitianize(cov_z);
                cov_z.diagonal() += noise_diag_.row(l).transpose().cast<std::complex<double>>();

                Eigen::VectorXcd mu_new(m);
                for (int j = 0; j < m; ++j) mu_new[j] = (y_(l, j) - mu_z[j]) / a;
                Eigen::MatrixXcd cov_new = cov_z / a2;

                if (!opt_.activity_fixed) {
                    const Eigen::MatrixXcd cov2 = a2 * cov_buf[t] + cov_z;
                    const Eigen::VectorXcd d1 = y_.row(l).transpose() - mu_z;
                    const Eigen::VectorXcd d2 = d1 - a * mu_own;
                    const double llr = logdet_hermitian(cov_z) - logdet_hermitian(cov2) +
                                       quad_form(cov_z, d1) - quad_form(cov2, d2);
                    llr_sn_[e] = theta_l == 0.0 ? llr : (1.0 - theta_l) * llr + theta_l * llr_sn_[e];
                }

                if (theta != 0.0) {
                    for (int j = 0; j < m; ++j)
                        mu_new[j] = (1.0 - theta) * mu_new[j] + theta * mu_sn_[base + static_cast<size_t>(j)];
                    cov_new = (1.0 - theta) * cov_new + theta * cov_sn_[e];
                }
                for (int j = 0; j < m; ++j) mu_sn_[base + static_cast<size_t>(j)] = mu_new[j];
                cov_sn_[e] = cov_new;
                prec_sn_[e] = inv_hermitian(cov_new);
            }
        }
    }
}

void DadCeDecoder::iterate() {
    sn_pass();
    ++iter_;
    refresh_totals();
}

void DadCeDecoder::run() {
    for (int t = 0; t < opt_.n_iter; ++t) iterate();
}

DadCeResult DadCeDecoder::finalize() const {
    const int nd = ndev(), m = antennas();
    DadCeResult r;
    r.mu_dec.resize(nd, m);
    r.var_dec.resize(nd, m);
    r.l_act = llr_tot_;
    r.l_ce = Eigen::VectorXd::Zero(nd);
    r.l_dec = Eigen::VectorXd::Zero(nd);
    r.active.assign(static_cast<size_t>(nd), 0);
    if (!opt_.diag_approx) r.cov_dec.resize(static_cast<size_t>(nd));

    for (int k = 0; k < nd; ++k) {
        if (opt_.diag_approx) {
            for (int j = 0; j < m; ++j) {
                r.var_dec(k, j) = 1.0 / prec_tot_(k, j);
                r.mu_dec(k, j) = wmean_tot_(k, j) * r.var_dec(k, j);
            }
        } else {
            Eigen::MatrixXcd cov = inv_hermitian(prec_tot_full_[static_cast<size_t>(k)]);
            r.mu_dec.row(k) = (cov * wmean_tot_full_[static_cast<size_t>(k)]).transpose();
            r.var_dec.row(k) = cov.diagonal().real();
            r.cov_dec[static_cast<size_t>(k)] = std::move(cov);
        }
    }

    if (opt_.activity_fixed) {
        std::fill(r.active.begin(), r.active.end(), uint8_t(1));
        r.h_hat = r.mu_dec;
        return r;
    }

    for (int k = 0; k < nd; ++k) {
        double lce;
        const Eigen::VectorXcd mu = r.mu_dec.row(k).transpose();
        const Eigen::VectorXcd dmu = mu - prior_mean_.row(k).transpose();
        if (opt_.diag_approx) {
            lce = 0.0;
            for (int j = 0; j < m; ++j) {
                const double vd = r.var_dec(k, j);
                const double vs = vd + prior_var_(k, j);
                lce += std::log(vd) - std::log(vs) + std::norm(mu[j]) / vd - std::norm(dmu[j]) / vs;
            }
        } else {
            const Eigen::MatrixXcd& cov = r.cov_dec[static_cast<size_t>(k)];
            const Eigen::MatrixXcd sum = cov + prior_cov_[static_cast<size_t>(k)];
            lce = logdet_hermitian(cov) - logdet_hermitian(sum) + quad_form(cov, mu) -
                  quad_form(sum, dmu);
        }
        r.l_ce[k] = lce;
        r.l_dec[k] = r.l_act[k] + lce;
        r.active[static_cast<size_t>(k)] = r.l_dec[k] > 0.0 ? 1 : 0;
    }

    r.h_hat = r.mu_dec;
    for (int k = 0; k < nd; ++k)
        if (!r.active[static_cast<size_t>(k)]) r.h_hat.row(k).setZero();
    return r;
}

DadCeDecoder make_cs_decoder(const ValidatedConfig& cfg, const Codebook& cb,
                             const Eigen::MatrixXcd& y_p) {
    if (y_p.rows() != cb.lp)
        throw DimensionMismatch("first-phase observations must have lp rows");
    DadCeOptions opt;
    opt.diag_approx = cfg.raw.diag_approx;
    opt.n_iter = cfg.raw.n_iter_dadce;
    opt.damping = cfg.raw.dadce_damping;
    opt.damping_llr = cfg.raw.dadce_damping_llr;
    const double l0 = std::log(cfg.pa_eff / (1.0 - cfg.pa_eff));
    Eigen::MatrixXcd sensing = std::sqrt(cfg.power) * cb.a;
    Eigen::MatrixXd noise =
        Eigen::MatrixXd::Constant(y_p.rows(), y_p.cols(), cfg.raw.sigma2);
    return DadCeDecoder(std::move(sensing), y_p, std::move(noise), l0, opt);
}

DadCeResult run_dad_ce(const ValidatedConfig& cfg, const Codebook& cb,
                       const Eigen::MatrixXcd& y_p) {
    DadCeDecoder dec = make_cs_decoder(cfg, cb, y_p);
    dec.run();
    return dec.finalize();
}

} // namespace ura
