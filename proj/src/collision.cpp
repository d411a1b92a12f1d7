#include "ura/collision.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ura/errors.hpp"
#include "ura/rng.hpp"

namespace ura {

double energy_detect(const Eigen::VectorXcd& h_hat_row) {
    return h_hat_row.squaredNorm() / static_cast<double>(h_hat_row.size());
}

BitVec slide_window(const BitVec& v, int t, int bp, int b0) {
    const size_t off = static_cast<size_t>(t) * static_cast<size_t>(b0);
    if (off + static_cast<size_t>(bp) > v.size())
        throw WindowOutOfRange("window " + std::to_string(t) + " runs past " +
                               std::to_string(v.size()) + " bits");
    return subrange(v, off, static_cast<size_t>(bp));
}

BitVec stitch(const std::vector<BitVec>& windows, int b0) {
    if (windows.empty()) return {};
    BitVec out = windows.front();
    for (size_t w = 1; w < windows.size(); ++w) {
        const BitVec& win = windows[w];
        const size_t overlap = win.size() - static_cast<size_t>(b0);
        if (windows[w - 1].size() != win.size())
            throw OverlapMismatch("window lengths differ");
        for (size_t i = 0; i < overlap; ++i)
            if (windows[w - 1][static_cast<size_t>(b0) + i] != win[i])
                throw OverlapMismatch("windows " + std::to_string(w - 1) + " and " +
                                      std::to_string(w) + " disagree on the shared part");
        out.insert(out.end(), win.end() - b0, win.end());
    }
    return out;
}

namespace {

double p_no_collision(int mp, int k) {
    if (k > mp) return 0.0;
    double p = 1.0;
    for (int i = 0; i < k; ++i) p *= static_cast<double>(mp - i) / mp;
    return p;
}

} // namespace

CollisionAnalytics collision_analytics(int ka, int mp, int b0_bits, int bp, int rounds) {
    CollisionAnalytics a;
    a.p_no_colli = p_no_collision(mp, ka);
    // exact expectation: each device collides unless the other ka-1 avoid its pick
    a.expected_collided_round0 =
        ka * (1.0 - std::pow(1.0 - 1.0 / mp, std::max(0, ka - 1)));

    const double mp1 = std::ldexp(1.0, b0_bits);
    double k = ka * (1.0 - a.p_no_colli);
    for (int l = 0; l <= rounds; ++l) {
        a.k_recursion.push_back(k);
        a.k_upper_bound.push_back(ka * std::pow(1.0 - a.p_no_colli, l + 1));
        // pairwise-collision regime: a group of two separates unless the
        // fresh b0 bits coincide
        k *= 1.0 / mp1;
    }

    const double groups = std::max(1.0, a.expected_collided_round0 / 2.0);
    a.p_splice_ok = p_no_collision(static_cast<int>(std::ldexp(1.0, bp - b0_bits)),
                                   static_cast<int>(std::lround(groups)));
    return a;
}

CollisionMc simulate_collision_rounds(int ka, int bp, int b0, int b, int rounds, int trials,
                                      uint64_t seed) {
    CollisionMc mc;
    mc.trials = trials;
    mc.mean_collided.assign(static_cast<size_t>(rounds) + 1, 0.0);
    mc.se_collided.assign(static_cast<size_t>(rounds) + 1, 0.0);
    std::vector<double> sq(static_cast<size_t>(rounds) + 1, 0.0);
    int clean = 0;

    for (int t = 0; t < trials; ++t) {
        Rng rng = Rng::fork(seed, static_cast<uint64_t>(t));
        std::vector<BitVec> msgs;
        for (int d = 0; d < ka; ++d) msgs.push_back(rng.bits(static_cast<size_t>(b)));

        std::vector<int> in_play(static_cast<size_t>(ka), 1);
        bool any_round0 = false;
        for (int r = 0; r <= rounds; ++r) {
            // windows of the devices still retransmitting
            std::map<uint64_t, int> counts;
            for (int d = 0; d < ka; ++d) {
                if (!in_play[static_cast<size_t>(d)]) continue;
                if (static_cast<size_t>(r) * b0 + bp > static_cast<size_t>(b)) {
                    in_play[static_cast<size_t>(d)] = 0; // cannot slide further
                    continue;
                }
                counts[bits_to_value(slide_window(msgs[static_cast<size_t>(d)], r, bp, b0))]++;
            }
            int collided = 0;
            for (int d = 0; d < ka; ++d) {
                if (!in_play[static_cast<size_t>(d)]) continue;
                const uint64_t w =
                    bits_to_value(slide_window(msgs[static_cast<size_t>(d)], r, bp, b0));
                if (counts[w] >= 2)
                    ++collided;
                else
                    in_play[static_cast<size_t>(d)] = 0; // resolved, stops transmitting
            }
            if (r == 0 && collided > 0) any_round0 = true;
            mc.mean_collided[static_cast<size_t>(r)] += collided;
            sq[static_cast<size_t>(r)] += static_cast<double>(collided) * collided;
        }
        if (!any_round0) ++clean;
    }

    mc.no_colli_freq = static_cast<double>(clean) / trials;
    for (size_t r = 0; r < mc.mean_collided.size(); ++r) {
        mc.mean_collided[r] /= trials;
        const double var = sq[r] / trials - mc.mean_collided[r] * mc.mean_collided[r];
        mc.se_collided[r] = std::sqrt(std::max(0.0, var) / trials);
    }
    return mc;
}

namespace {

struct Estimate {
    uint32_t i_k = 0;
    Eigen::VectorXcd h;
    Eigen::VectorXd var;
};

struct Chain {
    std::vector<uint32_t> windows; // index representation per round, starting at 0
    Estimate latest;
};

struct Classified {
    std::vector<Estimate> accepted;
    std::vector<Estimate> collided;
};

Classified classify(const ValidatedConfig& cfg, const DadCeResult& r) {
    Classified c;
    for (int k : r.active_indices()) {
        Estimate e{static_cast<uint32_t>(k) + 1, r.mu_dec.row(k).transpose(),
                   r.var_dec.row(k).transpose()};
        const double eps = energy_detect(e.h);
        if (eps <= cfg.raw.gamma) continue; // noise-level row
        if (eps < cfg.raw.eta)
            c.accepted.push_back(std::move(e));
        else
            c.collided.push_back(std::move(e));
    }
    return c;
}

DetectedRow make_row(const ValidatedConfig& cfg, const Chain& chain,
                     const Estimate& est, int round, bool unresolved) {
    DetectedRow row;
    row.i_k = chain.windows.front();
    row.preamble = cs_decode_index(chain.windows.front(), cfg.raw.bp);
    std::vector<BitVec> wins;
    for (uint32_t w : chain.windows) wins.push_back(cs_decode_index(w, cfg.raw.bp));
    row.stitched = stitch(wins, cfg.b0_eff); // chain construction guarantees the overlap
    row.h_hat = est.h;
    row.var_hat = est.var;
    row.resolved_round = round;
    row.unresolved = unresolved;
    row.final_ik = chain.windows.back();
    return row;
}

} // namespace

ProtocolResult run_protocol(const ValidatedConfig& cfg, const Codebook& cb,
                            const DadCeResult& round0, const RetransmitFn& retransmit) {
    ProtocolResult out;
    const int bp = cfg.raw.bp, b0 = cfg.b0_eff;

    const Classified c0 = classify(cfg, round0);
    for (const auto& est : c0.accepted) {
        Chain single{{est.i_k}, est};
        out.rows.push_back(make_row(cfg, single, est, 0, false));
    }
    std::vector<Chain> open;
    for (const auto& est : c0.collided) open.push_back({{est.i_k}, est});
    out.collided_per_round.push_back(static_cast<int>(open.size()));

    for (int t = 1; t <= cfg.raw.t_max && !open.empty(); ++t) {
        // devices that slid out of the message stop; the BS knows the geometry
        if (static_cast<size_t>(t) * b0 + bp > static_cast<size_t>(cfg.raw.b)) break;

        std::vector<uint32_t> broadcast;
        for (const auto& ch : open) broadcast.push_back(ch.windows.back());
        std::sort(broadcast.begin(), broadcast.end());
        broadcast.erase(std::unique(broadcast.begin(), broadcast.end()), broadcast.end());

        const Eigen::MatrixXcd y_t = retransmit(broadcast, t);
        ++out.rounds;
        out.extra_channel_uses += cfg.raw.lp;

        const DadCeResult rt = run_dad_ce(cfg, cb, y_t);
        const Classified ct = classify(cfg, rt);

        // match candidates to chains through the shared window part
        auto chain_matches = [&](uint32_t cand) {
            std::vector<size_t> hit;
            const BitVec cb_bits = cs_decode_index(cand, bp);
            for (size_t i = 0; i < open.size(); ++i) {
                const BitVec prev = cs_decode_index(open[i].windows.back(), bp);
                bool ok = true;
                for (int j = 0; j < bp - b0; ++j)
                    if (prev[static_cast<size_t>(j + b0)] != cb_bits[static_cast<size_t>(j)]) {
                        ok = false;
                        break;
                    }
                if (ok) hit.push_back(i);
            }
            return hit;
        };

        std::vector<Chain> next_open;
        for (const auto& est : ct.accepted) {
            const auto hits = chain_matches(est.i_k);
            if (hits.empty()) {
                ++out.orphans;
            } else if (hits.size() > 1) {
                ++out.ambiguous; // cannot tell whose message this window extends
            } else {
                Chain resolved = open[hits[0]];
                resolved.windows.push_back(est.i_k);
                out.rows.push_back(make_row(cfg, resolved, est, t, false));
            }
        }
        for (const auto& est : ct.collided) {
            const auto hits = chain_matches(est.i_k);
            if (hits.empty()) {
                ++out.orphans;
                continue;
            }
            // a still-collided window extends every matching chain; they are
            // jointly entangled until the windows split
            for (size_t i : hits) {
                Chain c = open[i];
                c.windows.push_back(est.i_k);
                c.latest = est;
                next_open.push_back(std::move(c));
            }
        }
        // chains with no continuation die here (undetected or out of range)
        open = std::move(next_open);
        out.collided_per_round.push_back(static_cast<int>(open.size()));
    }

    // protocol ended with chains still flagged: emit their latest estimates
    for (const auto& ch : open)
        out.rows.push_back(
            make_row(cfg, ch, ch.latest, static_cast<int>(ch.windows.size()) - 1, true));
    return out;
}

} // namespace ura
