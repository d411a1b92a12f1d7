#include <cmath>

#include "doctest.h"
#include "ura/channel.hpp"
#include "ura/mimo_ldpc.hpp"
#include "ura/rng.hpp"

using namespace ura;
using cplx = std::complex<double>;

namespace {

ValidatedConfig data_cfg(Modulation mod, int bc, int lp, int lc, int m, double sigma2,
                         double ebn0 = 10.0, bool sic = true) {
    SystemConfig c;
    c.bp = 8;
    c.bc = bc;
    c.b = c.bp + bc;
    c.lp = lp;
    c.l = lp + lc;
    c.m = m;
    c.ka = 2;
    c.modulation = mod;
    c.sigma2 = sigma2;
    c.ebn0_db = ebn0;
    c.sic = sic;
    c.joint = sic;
    return validate(c);
}

Interleaver identity_interleaver(int lc) {
    Interleaver il;
    il.i_k = 1;
    il.perm.resize(static_cast<size_t>(lc));
    il.inv_.resize(static_cast<size_t>(lc));
    for (int i = 0; i < lc; ++i) {
        il.perm[static_cast<size_t>(i)] = i;
        il.inv_[static_cast<size_t>(i)] = i;
    }
    return il;
}

// degree-3 toy parity matrix used to probe single check-node updates
LdpcCode toy_code() {
    return from_alist("4 2\n2 3\n1 2 2 1\n3 3\n1 0\n1 2\n1 2\n2 0\n1 2 3\n2 3 4\n");
}

} // namespace

TEST_CASE("lambda: single device bpsk matches the closed form") {
    auto cfg = data_cfg(Modulation::bpsk, 24, 16, 48, 1, 2.0);
    auto code = build_ldpc(1, 24);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(48, 1);
    y(0, 0) = cplx(1.0, 0.0);
    MimoDevice dev{1, Eigen::VectorXcd::Constant(1, cplx(1, 0)), identity_interleaver(48)};
    MimoLdpcDecoder dec(cfg, code, y, {dev});
    dec.lambda_update();
    // h = 1, mu_z = 0, sigma_z^2 = 2, y = 1  ->  1.0
    CHECK(dec.lambda_[0][0].real() == doctest::Approx(1.0));
    CHECK(dec.lambda_[0][0].imag() == 0.0);
}

TEST_CASE("lambda: undecided interferer adds |h|^2 to the noise") {
    auto cfg = data_cfg(Modulation::bpsk, 24, 16, 48, 1, 0.3);
    auto code = build_ldpc(1, 24);
    Rng rng(5);
    Eigen::MatrixXcd y(48, 1);
    for (int i = 0; i < 48; ++i) y(i, 0) = rng.cnormal(1.0);
    const cplx h0(0.8, -0.4), h1(-1.1, 0.2);
    MimoDevice d0{1, Eigen::VectorXcd::Constant(1, h0), identity_interleaver(48)};
    MimoDevice d1{2, Eigen::VectorXcd::Constant(1, h1), identity_interleaver(48)};
    MimoLdpcDecoder dec(cfg, code, y, {d0, d1});
    dec.lambda_update();
    // both priors sit at P = 0.5: zero mean, unit symbol variance
    const double want_var = std::norm(h1) * 1.0 + 0.3;
    const double want = 2.0 / want_var * (std::conj(h0) * y(0, 0)).real();
    CHECK(dec.lambda_[0][0].real() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("lambda: qpsk closed form") {
    auto cfg = data_cfg(Modulation::qpsk, 24, 16, 48, 1, 2.0);
    auto code = build_ldpc(1, 24);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(48, 1);
    const double a = 1.0 / std::sqrt(2.0);
    y(0, 0) = cplx(a, a);
    MimoDevice dev{1, Eigen::VectorXcd::Constant(1, cplx(1, 0)), identity_interleaver(48)};
    MimoLdpcDecoder dec(cfg, code, y, {dev});
    dec.lambda_update();
    // (2 sqrt 2 / 2) * (1+i)/sqrt 2 = 1 + i
    CHECK(dec.lambda_[0][0].real() == doctest::Approx(1.0));
    CHECK(dec.lambda_[0][0].imag() == doctest::Approx(1.0));
}

TEST_CASE("check node update") {
    auto cfg = data_cfg(Modulation::bpsk, 2, 8, 4, 1, 1.0);
    auto code = toy_code();
    REQUIRE(code.n == 4);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(4, 1);
    MimoDevice dev{1, Eigen::VectorXcd::Constant(1, cplx(1, 0)), identity_interleaver(4)};
    MimoLdpcDecoder dec(cfg, code, y, {dev});

    SUBCASE("zero inputs give zero outputs") {
        dec.r_update();
        for (double r : dec.r_[0]) CHECK(r == 0.0);
    }
    SUBCASE("two inputs of 2 against the scalar formula") {
        // edges of check 0: (0,b0)=id0, (0,b1)=id1, (0,b2)=id2
        dec.q_[0][1] = 2.0;
        dec.q_[0][2] = 2.0;
        dec.r_update();
        CHECK(dec.r_[0][0] ==
              doctest::Approx(2.0 * std::atanh(std::tanh(1.0) * std::tanh(1.0))).epsilon(1e-12));
    }
    SUBCASE("output magnitude bounded by the smallest input") {
        Rng rng(3);
        for (auto& q : dec.q_[0]) q = 4.0 * (rng.uniform() - 0.5);
        dec.r_update();
        for (int n = 0; n < code.nchk; ++n) {
            const auto& es = dec.cn_edges_[static_cast<size_t>(n)];
            for (size_t i = 0; i < es.size(); ++i) {
                double minq = 1e9;
                for (size_t k = 0; k < es.size(); ++k)
                    if (k != i) minq = std::min(minq, std::abs(dec.q_[0][static_cast<size_t>(es[k])]));
                CHECK(std::abs(dec.r_[0][static_cast<size_t>(es[i])]) <= minq + 1e-12);
            }
        }
    }
}

TEST_CASE("probability update") {
    auto cfg = data_cfg(Modulation::bpsk, 24, 16, 48, 2, 1.0);
    auto code = build_ldpc(1, 24);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(48, 2);
    MimoDevice dev{1, Eigen::VectorXcd::Constant(2, cplx(1, 0)), identity_interleaver(48)};
    MimoLdpcDecoder dec(cfg, code, y, {dev});

    SUBCASE("neutral inputs stay at one half") {
        dec.p_update();
        for (double p : dec.p_re_[0]) CHECK(p == doctest::Approx(0.5));
    }
    SUBCASE("logistic identity at ln 3") {
        // P at antenna 1 sums the llr seen by antenna 0 only
        dec.lambda_[0][0 * 2 + 0] = cplx(std::log(3.0), 0);
        dec.p_update();
        CHECK(dec.p_re_[0][0 * 2 + 1] == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("saturation at the clamp") {
        dec.lambda_[0][0 * 2 + 0] = cplx(75.0, 0); // clamped to 50 inside
        dec.p_update();
        CHECK(dec.p_re_[0][0 * 2 + 1] == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("noiseless single device decodes to the exact word") {
    auto cfg = data_cfg(Modulation::bpsk, 24, 16, 64, 2, 1e-6);
    auto code = build_ldpc(2, 24);
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(100 + static_cast<uint64_t>(trial));
        const BitVec msg = rng.bits(24);
        const BitVec word = ldpc_encode(code, msg);
        const Interleaver il = build_interleaver(7, cfg.lc, cfg.interleaver_seed());
        Eigen::MatrixXcd h = sample_channels(rng, 1, 2);
        const Eigen::VectorXcd placed = placed_symbols(cfg, il, word);
        Eigen::MatrixXcd y = std::sqrt(cfg.power) * placed * h.row(0);
        for (int i = 0; i < cfg.lc; ++i)
            for (int j = 0; j < 2; ++j) y(i, j) += rng.cnormal(cfg.raw.sigma2);

        MimoDevice dev{7, std::sqrt(cfg.power) * h.row(0).transpose(), il};
        auto res = run_ldpc_sic(cfg, code, y, {dev});
        REQUIRE(res.decoded.size() == 1);
        CHECK(res.decoded[0].message == msg);
        CHECK(parity_check(code, res.decoded[0].codeword));
    }
}

TEST_CASE("sic residual") {
    auto cfg = data_cfg(Modulation::bpsk, 24, 16, 64, 3, 1.0);
    auto code = build_ldpc(3, 24);
    Rng rng(31);
    const BitVec m0 = rng.bits(24), m1 = rng.bits(24);
    const BitVec w0 = ldpc_encode(code, m0), w1 = ldpc_encode(code, m1);
    const Interleaver il0 = build_interleaver(3, cfg.lc, cfg.interleaver_seed());
    const Interleaver il1 = build_interleaver(9, cfg.lc, cfg.interleaver_seed());
    Eigen::MatrixXcd h = sample_channels(rng, 2, 3);
    const double amp = std::sqrt(cfg.power);
    Eigen::MatrixXcd clean0 = amp * placed_symbols(cfg, il0, w0) * h.row(0);
    Eigen::MatrixXcd clean1 = amp * placed_symbols(cfg, il1, w1) * h.row(1);
    Eigen::MatrixXcd y = clean0 + clean1;

    std::vector<MimoDevice> devs = {{3, amp * h.row(0).transpose(), il0},
                                    {9, amp * h.row(1).transpose(), il1}};

    SUBCASE("empty decoded set returns the block unchanged") {
        CHECK(sic_subtract(cfg, y, devs, {}) == y);
    }
    SUBCASE("perfect single-device cancellation") {
        LdpcSicResult::Entry e{0, m0, w0, 1};
        auto res = sic_subtract(cfg, clean0, devs, {e});
        CHECK(res.norm() < 1e-9 * clean0.norm());
    }
    SUBCASE("subtracting one device leaves the other") {
        LdpcSicResult::Entry e{0, m0, w0, 1};
        auto res = sic_subtract(cfg, y, devs, {e});
        CHECK((res - clean1).norm() < 1e-9 * clean1.norm());
    }
}

TEST_CASE("two devices at high snr both decode") {
    auto cfg = data_cfg(Modulation::bpsk, 24, 16, 64, 4, 1.0, 20.0);
    auto code = build_ldpc(4, 24);
    int both = 0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(500 + static_cast<uint64_t>(trial));
        const BitVec m0 = rng.bits(24), m1 = rng.bits(24);
        const Interleaver il0 = build_interleaver(3, cfg.lc, cfg.interleaver_seed());
        const Interleaver il1 = build_interleaver(200, cfg.lc, cfg.interleaver_seed());
        Eigen::MatrixXcd h = sample_channels(rng, 2, 4);
        const double amp = std::sqrt(cfg.power);
        Eigen::MatrixXcd y = amp * placed_symbols(cfg, il0, ldpc_encode(code, m0)) * h.row(0) +
                             amp * placed_symbols(cfg, il1, ldpc_encode(code, m1)) * h.row(1);
        for (int i = 0; i < cfg.lc; ++i)
            for (int j = 0; j < 4; ++j) y(i, j) += rng.cnormal(1.0);

        std::vector<MimoDevice> devs = {{3, amp * h.row(0).transpose(), il0},
                                        {200, amp * h.row(1).transpose(), il1}};
        auto res = run_ldpc_sic(cfg, code, y, devs);
        std::vector<BitVec> got;
        for (const auto& e : res.decoded) {
            CHECK(parity_check(code, e.codeword));
            got.push_back(e.message);
        }
        const bool ok0 = std::find(got.begin(), got.end(), m0) != got.end();
        const bool ok1 = std::find(got.begin(), got.end(), m1) != got.end();
        if (ok0 && ok1) ++both;
        // cancellation rounds never un-decode anything
        for (size_t i = 1; i < res.decoded.size(); ++i)
            CHECK(res.decoded[i].round >= res.decoded[i - 1].round);
    }
    CHECK(both >= 9);
}

TEST_CASE("no devices returns immediately") {
    auto cfg = data_cfg(Modulation::bpsk, 24, 16, 64, 2, 1.0);
    auto code = build_ldpc(5, 24);
    auto res = run_ldpc_sic(cfg, code, Eigen::MatrixXcd::Zero(64, 2), {});
    CHECK(res.decoded.empty());
    CHECK(res.rounds == 0);
}

TEST_CASE("waterfall sanity: errors vanish with snr, perfect csi") {
    auto code = build_ldpc(6, 24);
    auto run_ber = [&](double ebn0) {
        auto cfg = data_cfg(Modulation::bpsk, 24, 16, 48, 2, 1.0, ebn0);
        int failures = 0;
        for (int trial = 0; trial < 20; ++trial) {
            Rng rng(900 + static_cast<uint64_t>(trial));
            const BitVec msg = rng.bits(24);
            const Interleaver il = build_interleaver(5, cfg.lc, cfg.interleaver_seed());
            Eigen::MatrixXcd h = sample_channels(rng, 1, 2);
            const double amp = std::sqrt(cfg.power);
            Eigen::MatrixXcd y = amp * placed_symbols(cfg, il, ldpc_encode(code, msg)) * h.row(0);
            for (int i = 0; i < cfg.lc; ++i)
                for (int j = 0; j < 2; ++j) y(i, j) += rng.cnormal(1.0);
            auto res = run_ldpc_sic(cfg, code, y, {{5, amp * h.row(0).transpose(), il}});
            if (res.decoded.empty() || res.decoded[0].message != msg) ++failures;
        }
        return failures;
    };
    CHECK(run_ber(18.0) == 0);
    CHECK(run_ber(18.0) <= run_ber(2.0));
}

TEST_CASE("qpsk real decisions match the equivalent bpsk experiment") {
    const int m = 2, lc = 64;
    auto qcfg = data_cfg(Modulation::qpsk, 24, 16, lc, m, 0.5);
    auto bcfg = data_cfg(Modulation::bpsk, 16, 16, lc, m, 1.0); // doubled noise
    auto qcode = build_ldpc(1, 24); // n = 48, 24 symbols
    auto bcode = build_ldpc(1, 16); // n = 32; only the first 24 slots carry signal
    REQUIRE(bcfg.n_sym >= qcfg.n_sym);

    for (int trial = 0; trial < 5; ++trial) {
        Rng rng(40 + static_cast<uint64_t>(trial));
        const BitVec word = rng.bits(48);
        const Interleaver il = build_interleaver(11, lc, qcfg.interleaver_seed());
        Eigen::MatrixXcd h = sample_channels(rng, 1, m);
        Eigen::VectorXcd placed = placed_symbols(qcfg, il, word);
        Eigen::MatrixXcd yq = placed * h.row(0);
        for (int i = 0; i < lc; ++i)
            for (int j = 0; j < m; ++j) yq(i, j) += rng.cnormal(0.5);

        // remove the imaginary branch with ground truth, rescale to unit bpsk
        Eigen::VectorXcd imag_branch(lc);
        for (int i = 0; i < lc; ++i)
            imag_branch[i] = cplx(0.0, placed[i].imag());
        Eigen::MatrixXcd yb = std::sqrt(2.0) * (yq - imag_branch * h.row(0));

        MimoDevice dq{11, h.row(0).transpose(), il};
        MimoLdpcDecoder qdec(qcfg, qcode, yq, {dq});
        qdec.lambda_update();
        auto qfresh = qdec.decide_all();

        MimoDevice db{11, h.row(0).transpose(), il};
        MimoLdpcDecoder bdec(bcfg, bcode, yb, {db});
        bdec.lambda_update();
        auto bfresh = bdec.decide_all();

        for (int p = 0; p < 24; ++p)
            CHECK(qdec.hard_[0][static_cast<size_t>(2 * p)] == bdec.hard_[0][static_cast<size_t>(p)]);
    }
}

TEST_CASE("qpsk end to end single device") {
    auto cfg = data_cfg(Modulation::qpsk, 24, 16, 48, 2, 1.0, 14.0);
    auto code = build_ldpc(7, 24);
    int ok = 0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(77 + static_cast<uint64_t>(trial));
        const BitVec msg = rng.bits(24);
        const Interleaver il = build_interleaver(13, cfg.lc, cfg.interleaver_seed());
        Eigen::MatrixXcd h = sample_channels(rng, 1, 2);
        const double amp = std::sqrt(cfg.power);
        Eigen::MatrixXcd y = amp * placed_symbols(cfg, il, ldpc_encode(code, msg)) * h.row(0);
        for (int i = 0; i < cfg.lc; ++i)
            for (int j = 0; j < 2; ++j) y(i, j) += rng.cnormal(1.0);
        auto res = run_ldpc_sic(cfg, code, y, {{13, amp * h.row(0).transpose(), il}});
        if (!res.decoded.empty() && res.decoded[0].message == msg) ++ok;
    }
    CHECK(ok >= 9);
}
