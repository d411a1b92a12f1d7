#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ura/bits.hpp"
#include "ura/codebook.hpp"
#include "ura/config.hpp"
#include "ura/dad_ce.hpp"

namespace ura {

/// Per-antenna average energy of an estimated channel row; superposed rows
/// concentrate near (number of devices) + estimation noise.
double energy_detect(const Eigen::VectorXcd& h_hat_row);

/// Window of bp bits starting at t*b0. Throws WindowOutOfRange when the
/// window would run past the end of the message.
BitVec slide_window(const BitVec& v, int t, int bp, int b0);

/// Splices consecutive windows (each advanced by b0 bits) back into one
/// sequence. Throws OverlapMismatch when the shared parts disagree.
BitVec stitch(const std::vector<BitVec>& windows, int b0);

/// Closed forms from the per-round collision analysis.
struct CollisionAnalytics {
    double p_no_colli = 1.0;           // all ka picks distinct among mp entries
    double expected_collided_round0 = 0.0; // exact mean number of collided devices
    std::vector<double> k_recursion;   // analysis chain, pairwise-collision regime
    std::vector<double> k_upper_bound; // ka * (1 - p_no_colli)^(l+1)
    double p_splice_ok = 1.0;          // distinct common parts among collided groups
};

CollisionAnalytics collision_analytics(int ka, int mp, int b0_bits, int bp, int rounds);

/// Pure bit-level Monte Carlo of the sliding-window rounds (no channels):
/// round r counts devices whose current window collides inside the
/// retransmitting set.
struct CollisionMc {
    double no_colli_freq = 0.0;           // fraction of trials with no round-0 collision
    std::vector<double> mean_collided;    // per round, devices still in collision
    std::vector<double> se_collided;      // standard errors of the above
    int trials = 0;
};

CollisionMc simulate_collision_rounds(int ka, int bp, int b0, int b, int rounds, int trials,
                                      uint64_t seed);

/// One accepted first-phase row entering data decoding.
struct DetectedRow {
    uint32_t i_k = 0;      // original index representation (drives the interleaver)
    BitVec preamble;       // first bp bits
    BitVec stitched;       // every bit pinned by window splicing (offset 0 onward)
    Eigen::VectorXcd h_hat;
    Eigen::VectorXd var_hat; // estimate deviation at acceptance time
    int resolved_round = 0;
    bool unresolved = false; // still flagged collided when the protocol ended
    uint32_t final_ik = 0;   // window index at the resolving round
};

struct ProtocolResult {
    std::vector<DetectedRow> rows;
    int rounds = 0;
    long extra_channel_uses = 0;
    std::vector<int> collided_per_round;
    int ambiguous = 0; // candidate windows matching several chains
    int orphans = 0;   // candidate windows matching no chain
};

/// Fresh observation block for retransmission round t, given the broadcast
/// collided index list. Provided by the channel side of the experiment.
using RetransmitFn =
    std::function<Eigen::MatrixXcd(const std::vector<uint32_t>& collided_iks, int round)>;

/// Energy detection, feedback, window sliding and re-estimation rounds
/// (skipped entirely when the config disables collision avoidance).
/// Chains that never resolve are still emitted with their latest estimate,
/// flagged unresolved: the parity gate downstream makes acceptance free and
/// it rescues singles mis-flagged by the energy test.
ProtocolResult run_protocol(const ValidatedConfig& cfg, const Codebook& cb,
                            const DadCeResult& round0, const RetransmitFn& retransmit);

} // namespace ura
