#include "ura/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "ura/dad_ce.hpp"
#include "ura/errors.hpp"

namespace ura {

BitVec stitch_message(const DetectedRow& row, const BitVec& v_c_hat) {
    BitVec out = row.preamble;
    out.insert(out.end(), v_c_hat.begin(), v_c_hat.end());
    return out;
}

namespace {

struct RowCtx {
    DetectedRow row;
    Interleaver il;       // driven by the index the data phase actually used
    Eigen::VectorXcd h;   // current channel estimate (unit-power scale)
    Eigen::VectorXd var;  // current deviation
    bool decoded = false;
    BitVec word;          // codeword once decoded
    bool separate_block = false; // data arrives in a retransmitted block
};

std::vector<DetectedRow> gate_without_protocol(const ValidatedConfig& cfg,
                                               const DadCeResult& r0) {
    // no energy classification beyond the noise-floor gate
    std::vector<DetectedRow> rows;
    for (int k : r0.active_indices()) {
        DetectedRow row;
        row.i_k = static_cast<uint32_t>(k) + 1;
        row.final_ik = row.i_k;
        row.preamble = cs_decode_index(row.i_k, cfg.raw.bp);
        row.stitched = row.preamble;
        row.h_hat = r0.mu_dec.row(k).transpose();
        row.var_hat = r0.var_dec.row(k).transpose();
        if (energy_detect(row.h_hat) <= cfg.raw.gamma) continue;
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Re-estimates every detected channel with activity pinned, using the
/// first-phase block plus the data block in which decoded words act as
/// known pilots. Undecoded devices' data-phase energy is absorbed into the
/// per-row noise model.
void data_aided_ce(const ValidatedConfig& cfg, const Codebook& cb, const Eigen::MatrixXcd& y,
                   std::vector<RowCtx>& rows) {
    const int m = cfg.raw.m, lp = cfg.raw.lp, lc = cfg.lc;
    const int nd = static_cast<int>(rows.size());
    const double amp = std::sqrt(cfg.power);

    Eigen::MatrixXcd sensing = Eigen::MatrixXcd::Zero(lp + lc, nd);
    std::vector<Eigen::VectorXcd> placed(rows.size());
    for (int j = 0; j < nd; ++j) {
        const auto& rc = rows[static_cast<size_t>(j)];
        sensing.col(j).head(lp) = amp * cb.a.col(static_cast<Eigen::Index>(rc.row.i_k) - 1);
        if (rc.decoded && !rc.separate_block) {
            placed[static_cast<size_t>(j)] = placed_symbols(cfg, rc.il, rc.word);
            sensing.col(j).tail(lc) = amp * placed[static_cast<size_t>(j)];
        }
    }

    Eigen::MatrixXd noise = Eigen::MatrixXd::Constant(lp + lc, m, cfg.raw.sigma2);
    for (int j = 0; j < nd; ++j) {
        const auto& rc = rows[static_cast<size_t>(j)];
        if (rc.decoded || rc.separate_block) continue;
        // unknown symbols of row j raise the data-phase noise floor
        for (int p = 0; p < cfg.n_sym; ++p) {
            const int l2 = rc.il.position_of(p);
            for (int jm = 0; jm < m; ++jm)
                noise(lp + l2, jm) +=
                    cfg.power * (rc.var[jm] + std::norm(rc.h[jm]));
        }
    }

    DadCeOptions opt;
    opt.diag_approx = true;
    opt.activity_fixed = true;
    opt.n_iter = cfg.raw.n_iter_dadce;
    opt.damping = cfg.raw.dadce_damping;
    opt.damping_llr = cfg.raw.dadce_damping_llr;
    DadCeDecoder dec(std::move(sensing), y, std::move(noise), 0.0, opt);

    Eigen::MatrixXcd prior_mean(nd, m);
    Eigen::MatrixXd prior_var(nd, m);
    for (int j = 0; j < nd; ++j) {
        prior_mean.row(j) = rows[static_cast<size_t>(j)].h.transpose();
        prior_var.row(j) = rows[static_cast<size_t>(j)].var.transpose();
    }
    dec.set_prior(prior_mean, prior_var);
    dec.run();
    const DadCeResult r = dec.finalize();
    for (int j = 0; j < nd; ++j) {
        rows[static_cast<size_t>(j)].h = r.mu_dec.row(j).transpose();
        rows[static_cast<size_t>(j)].var = r.var_dec.row(j).transpose();
    }
}

Eigen::MatrixXcd residual_from(const ValidatedConfig& cfg, const Eigen::MatrixXcd& y_c,
                               const std::vector<RowCtx>& rows) {
    const double amp = std::sqrt(cfg.power);
    Eigen::MatrixXcd res = y_c;
    for (const auto& rc : rows) {
        if (!rc.decoded || rc.separate_block) continue;
        res.noalias() -= amp * placed_symbols(cfg, rc.il, rc.word) * rc.h.transpose();
    }
    return res;
}

} // namespace

PipelineResult run_joint(const ValidatedConfig& cfg, const Codebook& cb, const LdpcCode& code,
                         const Eigen::MatrixXcd& y, const RetransmitFn& retransmit,
                         const DataRetransmitFn& data_retransmit) {
    if (y.rows() != cfg.raw.l || y.cols() != cfg.raw.m)
        throw DimensionMismatch("received frame must be l x m");
    const Eigen::MatrixXcd y_p = y.topRows(cfg.raw.lp);
    const Eigen::MatrixXcd y_c = y.bottomRows(cfg.lc);

    PipelineResult out;
    const DadCeResult r0 = run_dad_ce(cfg, cb, y_p);

    if (cfg.raw.colli_avoid && retransmit) {
        ProtocolResult pr = run_protocol(cfg, cb, r0, retransmit);
        out.detected_rows = std::move(pr.rows);
        out.diag.protocol_rounds = pr.rounds;
        out.diag.extra_channel_uses = pr.extra_channel_uses;
        out.diag.ambiguous = pr.ambiguous;
        out.diag.orphans = pr.orphans;
    } else {
        out.detected_rows = gate_without_protocol(cfg, r0);
    }
    out.diag.detected = static_cast<int>(out.detected_rows.size());

    // decode contexts; collided devices keep the interleaver they actually
    // used unless the config makes them resend the data phase
    std::vector<RowCtx> rows;
    std::vector<std::pair<uint32_t, int>> resend;
    for (size_t i = 0; i < out.detected_rows.size(); ++i) {
        const DetectedRow& dr = out.detected_rows[i];
        RowCtx rc;
        rc.row = dr;
        rc.h = dr.h_hat;
        rc.var = dr.var_hat.size() == cfg.raw.m ? dr.var_hat
                                                : Eigen::VectorXd::Constant(cfg.raw.m, 0.1);
        const bool resent = cfg.raw.colli_ldpc_retransmit && dr.resolved_round > 0 &&
                            data_retransmit != nullptr;
        const uint32_t data_ik = resent ? dr.final_ik : dr.i_k;
        rc.il = build_interleaver(data_ik, cfg.lc, cfg.interleaver_seed());
        rc.separate_block = resent;
        if (resent) resend.emplace_back(dr.final_ik, static_cast<int>(i));
        rows.push_back(std::move(rc));
    }

    const double amp = std::sqrt(cfg.power);
    auto devices_of = [&](const std::vector<int>& subset) {
        std::vector<MimoDevice> devs;
        for (int j : subset)
            devs.push_back({rows[static_cast<size_t>(j)].row.i_k,
                            amp * rows[static_cast<size_t>(j)].h,
                            rows[static_cast<size_t>(j)].il});
        return devs;
    };

    // devices whose data phase was retransmitted decode from their own block
    if (!resend.empty()) {
        const Eigen::MatrixXcd y_extra = data_retransmit(resend);
        out.diag.extra_channel_uses += cfg.lc;
        std::vector<int> subset;
        for (const auto& [ik, j] : resend) subset.push_back(j);
        auto res = run_ldpc_sic(cfg, code, y_extra, devices_of(subset));
        for (const auto& e : res.decoded) {
            const int j = subset[static_cast<size_t>(e.device)];
            rows[static_cast<size_t>(j)].decoded = true;
            rows[static_cast<size_t>(j)].word = e.codeword;
            out.decoded_rows.push_back(j);
        }
    }

    auto undecoded_main = [&able = rows]() {
        std::vector<int> subset;
        for (size_t j = 0; j < able.size(); ++j)
            if (!able[j].decoded && !able[j].separate_block) subset.push_back(static_cast<int>(j));
        return subset;
    };

    // outer loop: decode, re-estimate with decoded words as pilots, repeat
    Eigen::MatrixXcd residual = y_c;
    for (int round = 0; round < cfg.raw.n_iter_joint; ++round) {
        const std::vector<int> subset = undecoded_main();
        if (subset.empty()) break;
        auto res = run_ldpc_sic(cfg, code, residual, devices_of(subset));
        out.diag.decoded_per_round.push_back(static_cast<int>(res.decoded.size()));
        for (const auto& e : res.decoded) {
            const int j = subset[static_cast<size_t>(e.device)];
            rows[static_cast<size_t>(j)].decoded = true;
            rows[static_cast<size_t>(j)].word = e.codeword;
            out.decoded_rows.push_back(j);
        }
        if (res.decoded.empty()) break;
        if (!cfg.raw.joint) break;
        if (undecoded_main().empty()) break;

        ++out.diag.joint_rounds;
        data_aided_ce(cfg, cb, y, rows);
        residual = residual_from(cfg, y_c, rows);
    }

    // final estimates and stitched messages
    out.h_final.resize(static_cast<Eigen::Index>(rows.size()), cfg.raw.m);
    for (size_t j = 0; j < rows.size(); ++j) out.h_final.row(static_cast<Eigen::Index>(j)) = rows[j].h.transpose();

    for (int j : out.decoded_rows) {
        const auto& rc = rows[static_cast<size_t>(j)];
        const BitVec msg(rc.word.begin(), rc.word.begin() + cfg.raw.bc);
        const BitVec full = stitch_message(rc.row, msg);
        // window bits beyond the preamble double-check the decoded data
        for (size_t i = static_cast<size_t>(cfg.raw.bp); i < rc.row.stitched.size(); ++i)
            if (rc.row.stitched[i] != full[i]) {
                ++out.diag.overlap_mismatches;
                break;
            }
        if (std::find(out.messages.begin(), out.messages.end(), full) == out.messages.end())
            out.messages.push_back(full);
    }
    return out;
}

} // namespace ura
