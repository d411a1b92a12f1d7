#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "ura/config.hpp"
#include "ura/framing.hpp"
#include "ura/ldpc.hpp"

namespace ura {

/// One detected transmission entering the data-phase decoder.
struct MimoDevice {
    uint32_t i_k = 0;        // index representation; fixes the interleaver
    Eigen::VectorXcd h_eff;  // sqrt(P) times the channel estimate, length m
    Interleaver il;
};

struct LdpcSicResult {
    struct Entry {
        int device = 0; // position in the input device list
        BitVec message; // systematic bits
        BitVec codeword;
        int round = 0;  // cancellation round that produced it
    };
    std::vector<Entry> decoded;
    int rounds = 0;
    std::vector<int> decoded_per_round;

    std::vector<int> decoded_devices() const {
        std::vector<int> out;
        for (const auto& e : decoded) out.push_back(e.device);
        return out;
    }
};

/// Joint MIMO detection and code decoding by message passing, one Tanner
/// graph per device coupled through the received data block. Message
/// stages follow the schedule lambda -> q -> r -> p -> llr; a device whose
/// hard decision satisfies every parity check freezes: its symbols turn
/// into exact interference terms until the next cancellation round.
///
/// State is public for tests; indices: device d, symbol slot p, antenna m,
/// Tanner edge e, codeword bit b.
class MimoLdpcDecoder {
  public:
    MimoLdpcDecoder(const ValidatedConfig& cfg, const LdpcCode& code, Eigen::MatrixXcd y_c,
                    std::vector<MimoDevice> devices);

    /// Full decode: repeated message-passing rounds with interference
    /// cancellation between them (single pass when sic is off).
    LdpcSicResult run();

    // --- one message-passing iteration, split into its stages ---
    void lambda_update();
    void q_update();
    void r_update();
    void p_update();
    /// Updates final bit llrs and hard decisions; returns devices newly
    /// satisfying all checks this iteration.
    std::vector<int> decide_all();

    void iterate_once();

    /// Rebuilds the graph for the undecoded set against the residual.
    void restart_round(const Eigen::MatrixXcd& residual);

    int n_devices() const { return static_cast<int>(devices_.size()); }

    const ValidatedConfig& cfg_;
    const LdpcCode& code_;
    Eigen::MatrixXcd y_;
    std::vector<MimoDevice> devices_;
    double sigma2_ = 1.0;
    bool qpsk_ = false;
    int n_sym_ = 0;

    // Tanner graph layout shared by every device
    std::vector<std::pair<int, int>> edges_; // (check, bit)
    std::vector<std::vector<int>> cn_edges_; // check -> edge ids
    std::vector<std::vector<int>> vn_edges_; // bit -> edge ids

    // per (l2) occupancy: which (device, symbol slot) lands on that channel use
    std::vector<std::vector<std::pair<int, int>>> occupants_;

    // messages, flattened [device][...]
    std::vector<std::vector<double>> r_, q_;                 // Tanner edges
    std::vector<std::vector<std::complex<double>>> lambda_;  // [d][p * m + j]
    std::vector<std::vector<double>> p_re_, p_im_;           // bit-1 probabilities
    std::vector<std::vector<double>> llr_;                   // final bit llrs
    std::vector<BitVec> hard_;
    std::vector<uint8_t> decoded_;
    std::vector<std::vector<std::complex<double>>> frozen_sym_; // unit symbols once decoded

  private:
    std::vector<double> rsum_, lamsum_re_, lamsum_im_; // scratch per device
};

/// Residual after removing re-modulated decoded words from the original
/// data block: y_c - sum placed(word_k) * h_eff_k^T.
Eigen::MatrixXcd sic_subtract(const ValidatedConfig& cfg, const Eigen::MatrixXcd& y_c,
                              const std::vector<MimoDevice>& devices,
                              const std::vector<LdpcSicResult::Entry>& decoded);

LdpcSicResult run_ldpc_sic(const ValidatedConfig& cfg, const LdpcCode& code,
                           const Eigen::MatrixXcd& y_c, std::vector<MimoDevice> devices);

} // namespace ura
