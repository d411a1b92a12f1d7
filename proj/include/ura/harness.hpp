#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ura/codebook.hpp"
#include "ura/config.hpp"
#include "ura/ldpc.hpp"
#include "ura/pipeline.hpp"

namespace ura {

/// p_md: transmitted messages missing from the list.
/// p_fa: listed messages nobody transmitted (0 for an empty list).
/// Membership is on full b-bit strings.
std::pair<double, double> compute_pmd_pfa(const std::vector<BitVec>& truth,
                                          const std::vector<BitVec>& decoded);

/// 10 log10( sum |h_hat - h|^2 / sum |h|^2 ) over true devices; a device
/// without an associated estimate counts with h_hat = 0. Exact estimates
/// report the -100 dB floor.
double compute_nmse(const Eigen::MatrixXcd& h_true,
                    const std::vector<std::optional<Eigen::VectorXcd>>& h_assoc);

struct TrialMetrics {
    double p_md = 0.0;
    double p_fa = 0.0;
    double nmse_db = 0.0;
    int protocol_rounds = 0;
    int joint_rounds = 0;
    long channel_uses_total = 0;
    uint64_t seed = 0;
};

struct TrialResult {
    std::vector<BitVec> truth;
    Eigen::MatrixXcd h_true;
    PipelineResult pipeline;
    TrialMetrics metrics;
};

/// One full experiment: draw messages and channels, transmit, run the
/// receiver (including collision retransmission rounds), score.
TrialResult run_trial(const ValidatedConfig& cfg, const Codebook& cb, const LdpcCode& code,
                      uint64_t trial_index);

enum class SweepAxis { ebn0_db, m, ka, l, rc };

SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepPoint {
    SweepAxis axis;
    double value = 0.0;
    int trials = 0;
    double p_md = 0.0;
    double p_fa = 0.0;
    double p_e = 0.0;
    double nmse_db = 0.0; // median over trials
    double avg_rounds = 0.0;
    double avg_channel_uses = 0.0;
    uint64_t seed = 0;
    std::string error; // config rejection for this point, if any
};

/// Applies an axis value to a base config (rc adjusts l = round(b/rc)).
SystemConfig apply_axis(SystemConfig base, SweepAxis axis, double value);

/// Runs `trials` independent seeds per value; per-point config errors are
/// reported in the row and do not abort the sweep. Deterministic in
/// (config, seed) regardless of thread count.
std::vector<SweepPoint> run_sweep(const SystemConfig& base, SweepAxis axis,
                                  const std::vector<double>& values, int trials,
                                  int threads = 1);

SweepPoint run_point(const SystemConfig& cfg, SweepAxis axis, double value, int trials,
                     int threads = 1);

std::string csv_header();
std::string to_csv_row(const SweepPoint& p);
std::string to_csv(const std::vector<SweepPoint>& points);

} // namespace ura
