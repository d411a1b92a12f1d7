#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ura/codebook.hpp"
#include "ura/config.hpp"

namespace ura {

// Plain flooding (no damping) oscillates between all-active and all-idle
// states on dense graphs at desk scale; relaxing the Gaussian messages while
// leaving the activity messages undamped keeps the schedule stable without
// slowing the hard decisions.
struct DadCeOptions {
    bool diag_approx = true;
    bool activity_fixed = false; // pure CE: activity probability pinned to one
    int n_iter = 20;
    double damping = 0.5;      // Gaussian messages; 0 = plain flooding
    double damping_llr = 0.0;  // Bernoulli messages
    double llr_clamp = 50.0;

    double llr_damping() const { return damping_llr < 0.0 ? damping : damping_llr; }
};

struct DadCeResult {
    Eigen::MatrixXcd mu_dec; // ndev x m channel estimates
    Eigen::MatrixXd var_dec; // ndev x m estimate variance (diagonal of the deviation)
    std::vector<Eigen::MatrixXcd> cov_dec; // full-covariance mode only
    Eigen::VectorXd l_act;   // activity LLR from the observations alone
    Eigen::VectorXd l_ce;    // extra belief from the estimate itself
    Eigen::VectorXd l_dec;   // l_act + l_ce; device declared active iff > 0
    std::vector<uint8_t> active;
    Eigen::MatrixXcd h_hat;  // mu_dec gated by the activity decision

    std::vector<int> active_indices() const {
        std::vector<int> out;
        for (size_t k = 0; k < active.size(); ++k)
            if (active[k]) out.push_back(static_cast<int>(k));
        return out;
    }
};

/// Gaussian/Bernoulli message passing on the bipartite observation graph.
/// Rows of `sensing` are channel uses, columns are candidate devices; the
/// channel of each candidate is an m-vector with CN prior. Messages flood:
/// every iteration reads only the previous iteration's state.
///
/// State arrays are public so tests can inject values and inspect messages.
class DadCeDecoder {
  public:
    DadCeDecoder(Eigen::MatrixXcd sensing, Eigen::MatrixXcd y, Eigen::MatrixXd noise_diag,
                 double l0, DadCeOptions opt);

    /// Replaces the zero-mean unit-variance prior (diagonal form).
    void set_prior(const Eigen::MatrixXcd& mean, const Eigen::MatrixXd& var);
    /// Full-covariance prior, one m x m matrix per device.
    void set_prior_full(const Eigen::MatrixXcd& mean, std::vector<Eigen::MatrixXcd> cov);

    void iterate();            // one flooding iteration
    void run();                // opt.n_iter iterations
    DadCeResult finalize() const;

    /// Variable-to-observation message on edge (k -> l), excluding what row l
    /// itself reported. Exposed for the exclusion and oracle tests.
    void vn_message(int k, int l, Eigen::VectorXcd& mu, Eigen::VectorXd& var_diag,
                    Eigen::MatrixXcd* cov_full, double& llr) const;

    /// Mean and covariance of the interference seen on edge (l, k).
    void interference_stats(int l, int k, Eigen::VectorXcd& mu_z, Eigen::VectorXd& var_z,
                            Eigen::MatrixXcd* cov_z) const;

    /// Recomputes the per-device totals from the observation messages.
    void refresh_totals();

    int rows() const { return static_cast<int>(sensing_.rows()); }
    int ndev() const { return static_cast<int>(sensing_.cols()); }
    int antennas() const { return static_cast<int>(y_.cols()); }
    int iterations_done() const { return iter_; }

    // --- message state, indexed edge = l * ndev + k ---
    Eigen::MatrixXcd sensing_;
    Eigen::MatrixXcd y_;
    Eigen::MatrixXd noise_diag_; // rows x m
    DadCeOptions opt_;
    double l0_ = 0.0;

    std::vector<std::vector<int>> row_adj_; // row -> device indices with usable coefficient
    std::vector<std::vector<int>> col_adj_; // device -> rows

    std::vector<std::complex<double>> mu_sn_; // edge-major, m entries per edge
    std::vector<double> var_sn_;              // diag mode, m entries per edge
    std::vector<Eigen::MatrixXcd> cov_sn_;    // full mode
    std::vector<Eigen::MatrixXcd> prec_sn_;   // full mode, cached inverses
    std::vector<double> llr_sn_;              // one per edge

    // per-device totals over incoming observation messages plus the prior
    Eigen::MatrixXd prec_tot_;                 // diag mode, ndev x m
    Eigen::MatrixXcd wmean_tot_;               // ndev x m
    std::vector<Eigen::MatrixXcd> prec_tot_full_;
    std::vector<Eigen::VectorXcd> wmean_tot_full_;
    Eigen::VectorXd llr_tot_;

    Eigen::MatrixXcd prior_mean_; // ndev x m
    Eigen::MatrixXd prior_var_;   // ndev x m
    std::vector<Eigen::MatrixXcd> prior_cov_;  // full mode
    std::vector<Eigen::MatrixXcd> prior_prec_; // full mode

    int iter_ = 0; // completed iterations; 0 means only the prior is known

  private:
    void sn_pass();
};

/// Algorithm wrapper for the first phase: sensing = sqrt(P) * codebook,
/// uniform noise, prior activity from the config.
DadCeDecoder make_cs_decoder(const ValidatedConfig& cfg, const Codebook& cb,
                             const Eigen::MatrixXcd& y_p);

DadCeResult run_dad_ce(const ValidatedConfig& cfg, const Codebook& cb,
                       const Eigen::MatrixXcd& y_p);

} // namespace ura
