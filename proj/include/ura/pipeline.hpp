#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ura/codebook.hpp"
#include "ura/collision.hpp"
#include "ura/config.hpp"
#include "ura/ldpc.hpp"
#include "ura/mimo_ldpc.hpp"

namespace ura {

struct PipelineDiagnostics {
    int protocol_rounds = 0;
    long extra_channel_uses = 0;
    int joint_rounds = 0;               // data-aided re-estimation passes
    std::vector<int> decoded_per_round; // decoder output per outer round
    int ambiguous = 0;
    int orphans = 0;
    int detected = 0;                   // rows entering the data decoder
    int overlap_mismatches = 0;         // stitched window bits vs decoded bits
};

struct PipelineResult {
    std::vector<BitVec> messages;           // recovered b-bit messages, parity-backed
    std::vector<DetectedRow> detected_rows;
    std::vector<int> decoded_rows;          // indices into detected_rows, decode order
    Eigen::MatrixXcd h_final;               // one row per detected row
    PipelineDiagnostics diag;
};

/// Fresh data-phase block for devices that resolved a collision, when the
/// config asks them to retransmit: input pairs (final-window index, row id).
using DataRetransmitFn =
    std::function<Eigen::MatrixXcd(const std::vector<std::pair<uint32_t, int>>& devices)>;

/// Full receiver: first-phase detection and estimation with collision
/// resolution, data decoding with cancellation, then the data-aided
/// re-estimation loop, and message stitching.
PipelineResult run_joint(const ValidatedConfig& cfg, const Codebook& cb, const LdpcCode& code,
                         const Eigen::MatrixXcd& y, const RetransmitFn& retransmit = nullptr,
                         const DataRetransmitFn& data_retransmit = nullptr);

/// Preamble bits followed by the decoded systematic bits.
BitVec stitch_message(const DetectedRow& row, const BitVec& v_c_hat);

} // namespace ura
