#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "ura/channel.hpp"
#include "ura/codebook.hpp"
#include "ura/config.hpp"
#include "ura/framing.hpp"
#include "ura/ldpc.hpp"
#include "ura/rng.hpp"

using namespace ura;

TEST_CASE("rng determinism and moments") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(7);
    double sum = 0, sum2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum2 / n - 1.0) < 0.03);

    double e2 = 0;
    for (int i = 0; i < n; ++i) e2 += std::norm(r.cnormal(1.0));
    CHECK(e2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("config validation and derived quantities") {
    SystemConfig c;
    c.b = 96;
    c.bp = 12;
    c.bc = 84;
    c.lp = 100;
    c.l = 268;
    auto v = validate(c);
    CHECK(v.lc == 168);
    CHECK(v.rc == doctest::Approx(96.0 / 268.0));

    SystemConfig bad = c;
    bad.bc = 85;
    CHECK_THROWS_AS(validate(bad), InvalidConfig);

    bad = c;
    bad.b0 = 12; // must stay below bp
    CHECK_THROWS_AS(validate(bad), InvalidConfig);

    bad = c;
    bad.gamma = 2.0; // eta > gamma required
    CHECK_THROWS_AS(validate(bad), InvalidConfig);

    bad = c;
    bad.sic = false; // joint defaults on
    CHECK_THROWS_AS(validate(bad), InvalidConfig);

    // same config gives bit-identical derived values
    auto v2 = validate(c);
    CHECK(v.power == v2.power);
    CHECK(v.rc == v2.rc);
    CHECK(v.spectral_eff == v2.spectral_eff);
}

TEST_CASE("ebn0_to_power") {
    CHECK(ebn0_to_power(0.0, 200, 100) == doctest::Approx(1.0));
    CHECK(ebn0_to_power(10.0, 1600, 96) == doctest::Approx(1.2));
    CHECK(ebn0_to_power(10.0, 268, 96) == doctest::Approx(1920.0 / 268.0));
    CHECK(ebn0_to_power(10.0, 268, 96) == doctest::Approx(7.164).epsilon(1e-3));

    // monotone in ebn0 and b, antitone in l
    CHECK(ebn0_to_power(11.0, 268, 96) > ebn0_to_power(10.0, 268, 96));
    CHECK(ebn0_to_power(10.0, 268, 97) > ebn0_to_power(10.0, 268, 96));
    CHECK(ebn0_to_power(10.0, 269, 96) < ebn0_to_power(10.0, 268, 96));
}

TEST_CASE("config file and kv overrides") {
    SystemConfig c;
    CHECK(apply_kv(c, "ebn0_db", "12.5"));
    CHECK(c.ebn0_db == doctest::Approx(12.5));
    CHECK(apply_kv(c, "modulation", "qpsk"));
    CHECK(c.modulation == Modulation::qpsk);
    CHECK(apply_kv(c, "diag_approx", "off"));
    CHECK_FALSE(c.diag_approx);
    CHECK_FALSE(apply_kv(c, "no_such_key", "1"));
    CHECK_THROWS_AS(apply_kv(c, "m", "eight"), InvalidConfig);

    const std::string text = config_to_text(c);
    const std::string path = "test_core_cfg.tmp";
    {
        std::ofstream out(path);
        out << "# comment\n" << text << "\n  ka = 5  # trailing\n";
    }
    SystemConfig back = parse_config_file(path);
    CHECK(back.ebn0_db == doctest::Approx(12.5));
    CHECK(back.modulation == Modulation::qpsk);
    CHECK(back.ka == 5);
    std::remove(path.c_str());
}

TEST_CASE("codebook construction") {
    auto cb = build_codebook(7, 100, 12);
    CHECK(cb.a.rows() == 100);
    CHECK(cb.a.cols() == 4096);
    for (int j = 0; j < 64; ++j) {
        const double e = cb.a.col(j * 64).squaredNorm();
        CHECK(e == doctest::Approx(100.0).epsilon(1e-9));
    }

    auto cb2 = build_codebook(7, 100, 12);
    CHECK(cb.a == cb2.a);

    auto other = build_codebook(8, 100, 12);
    CHECK(cb.a != other.a);

    CHECK_THROWS_AS(build_codebook(7, 100, 12, 1024), SizeOverflow);
}

TEST_CASE("codebook cross correlation stays modest") {
    auto cb = build_codebook(3, 100, 8);
    double worst = 0;
    for (int i = 0; i < cb.cols(); ++i)
        for (int j = i + 1; j < cb.cols(); ++j)
            worst = std::max(worst, std::abs(cb.a.col(i).dot(cb.a.col(j))) / 100.0);
    CHECK(worst < 0.6);
    CHECK(worst > 1e-4); // not orthogonal either
}

TEST_CASE("preamble index mapping") {
    CHECK(cs_encode(BitVec{0, 0, 0}) == 1);
    CHECK(cs_encode(BitVec{1, 1, 1}) == 8);
    BitVec v(12, 0);
    v[11] = 1;
    CHECK(cs_encode(v) == 2);

    for (uint32_t x = 0; x < (1u << 12); ++x) {
        const BitVec bits = value_to_bits(x, 12);
        CHECK(cs_encode(bits) == x + 1);
        CHECK(cs_decode_index(x + 1, 12) == bits);
    }
}

TEST_CASE("codebook dump and load") {
    auto cb = build_codebook(11, 20, 6);
    save_codebook(cb, "test_core_cb.tmp");
    auto back = load_codebook("test_core_cb.tmp");
    CHECK(back.lp == cb.lp);
    CHECK(back.bp == cb.bp);
    CHECK(back.seed == cb.seed);
    CHECK(back.a == cb.a);
    std::remove("test_core_cb.tmp");
}

TEST_CASE("ldpc construction invariants") {
    auto code = build_ldpc(1, 84);
    CHECK(code.n == 168);
    CHECK(code.nchk == 84);
    for (const auto& row : code.rows) CHECK(row.size() == 6);
    for (const auto& col : code.cols) CHECK(col.size() == 3);

    // girth >= 6: no pair of checks shares two variables
    for (int a = 0; a < code.nchk; ++a)
        for (int b = a + 1; b < code.nchk; ++b) {
            int shared = 0;
            size_t i = 0, j = 0;
            const auto& ra = code.rows[static_cast<size_t>(a)];
            const auto& rb = code.rows[static_cast<size_t>(b)];
            while (i < ra.size() && j < rb.size()) {
                if (ra[i] == rb[j]) {
                    ++shared;
                    ++i;
                    ++j;
                } else if (ra[i] < rb[j])
                    ++i;
                else
                    ++j;
            }
            CHECK(shared <= 1);
        }

    CHECK(ldpc_rank(code) == code.nchk);

    auto again = build_ldpc(1, 84);
    CHECK(again.rows == code.rows);

    auto else_ = build_ldpc(2, 84);
    CHECK(else_.rows != code.rows);
}

TEST_CASE("ldpc encode and parity") {
    auto code = build_ldpc(5, 24);
    CHECK(ldpc_rank(code) == 24);

    const BitVec zeros(24, 0);
    const BitVec cw0 = ldpc_encode(code, zeros);
    CHECK(cw0 == BitVec(48, 0));
    CHECK(parity_check(code, cw0));

    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const BitVec msg = rng.bits(24);
        const BitVec cw = ldpc_encode(code, msg);
        CHECK(parity_check(code, cw));
        // systematic extraction returns the message
        CHECK(BitVec(cw.begin(), cw.begin() + 24) == msg);
        // one flipped bit breaks at least one check
        BitVec bad = cw;
        bad[rng.below(bad.size())] ^= 1;
        CHECK_FALSE(parity_check(code, bad));
    }

    // linearity
    Rng rng2(100);
    const BitVec u = rng2.bits(24), w = rng2.bits(24);
    CHECK(ldpc_encode(code, bits_xor(u, w)) == bits_xor(ldpc_encode(code, u), ldpc_encode(code, w)));
}

TEST_CASE("ldpc alist round trip") {
    auto code = build_ldpc(3, 24);
    auto text = to_alist(code);
    auto back = from_alist(text);
    CHECK(back.rows == code.rows);
    CHECK(back.cols == code.cols);
    Rng rng(4);
    const BitVec msg = rng.bits(24);
    CHECK(ldpc_encode(back, msg) == ldpc_encode(code, msg));
}

TEST_CASE("interleaver") {
    auto il = build_interleaver(5, 168, 77);
    auto il2 = build_interleaver(5, 168, 77);
    CHECK(il.perm == il2.perm);
    CHECK(build_interleaver(1, 168, 77).perm != build_interleaver(2, 168, 77).perm);

    std::vector<std::complex<double>> s(168);
    Rng rng(8);
    for (auto& x : s) x = rng.cnormal(1.0);
    auto t = il.apply(s);
    auto back = il.invert(t);
    for (size_t i = 0; i < s.size(); ++i) CHECK(back[i] == s[i]);

    // position_of is consistent with apply
    for (int p = 0; p < 168; ++p) CHECK(t[static_cast<size_t>(il.position_of(p))] == s[static_cast<size_t>(p)]);
}

TEST_CASE("modulation maps") {
    auto b = modulate(BitVec{1, 0, 1}, Modulation::bpsk);
    CHECK(b[0] == std::complex<double>(1, 0));
    CHECK(b[1] == std::complex<double>(-1, 0));
    CHECK(b[2] == std::complex<double>(1, 0));

    const double a = 1.0 / std::sqrt(2.0);
    auto q = modulate(BitVec{1, 1}, Modulation::qpsk);
    CHECK(q[0].real() == doctest::Approx(a));
    CHECK(q[0].imag() == doctest::Approx(a));
    q = modulate(BitVec{0, 1}, Modulation::qpsk);
    CHECK(q[0].real() == doctest::Approx(-a));
    CHECK(q[0].imag() == doctest::Approx(a));

    CHECK_THROWS_AS(modulate(BitVec{1, 0, 1}, Modulation::qpsk), OddLength);
}

namespace {

ValidatedConfig small_cfg(Modulation mod, int l) {
    SystemConfig c;
    c.b = 96;
    c.bp = 12;
    c.bc = 84;
    c.lp = 100;
    c.l = l;
    c.m = 2;
    c.ka = 2;
    c.modulation = mod;
    return validate(c);
}

} // namespace

TEST_CASE("frame layout and energy") {
    auto cfg = small_cfg(Modulation::bpsk, 268);
    CHECK(cfg.pad_zeros == 0);
    CHECK(small_cfg(Modulation::bpsk, 300).pad_zeros == 32);
    auto qcfg = small_cfg(Modulation::qpsk, 268);
    CHECK(qcfg.n_sym == 84);
    CHECK(qcfg.pad_zeros == 168 - 84);

    auto cb = build_codebook(cfg.codebook_seed(), cfg.raw.lp, cfg.raw.bp);
    auto code = build_ldpc(cfg.ldpc_seed(), cfg.raw.bc);
    Rng rng(12);
    const BitVec v = rng.bits(96);
    const Frame f = make_frame(cfg, cb, code, v);

    const uint32_t ik = cs_encode(subrange(v, 0, 12));
    CHECK(f.i_k == ik);
    const double amp = std::sqrt(cfg.power);
    for (int i = 0; i < 100; ++i)
        CHECK(std::abs(f.x[i] - amp * cb.a(i, static_cast<Eigen::Index>(ik) - 1)) < 1e-12);

    // no padding: every data slot carries a unit symbol
    CHECK(f.x.squaredNorm() ==
          doctest::Approx(cfg.power * (100 + 168)).epsilon(1e-9));

    auto cfg300 = small_cfg(Modulation::bpsk, 300);
    auto cb300 = build_codebook(cfg300.codebook_seed(), 100, 12);
    auto code300 = build_ldpc(cfg300.ldpc_seed(), 84);
    const Frame f300 = make_frame(cfg300, cb300, code300, v);
    CHECK(f300.x.squaredNorm() ==
          doctest::Approx(cfg300.power * (100 + 200 - 32)).epsilon(1e-9));

    // de-interleaving the data section yields symbols then zeros
    const Interleaver il = build_interleaver(ik, cfg300.lc, cfg300.interleaver_seed());
    Eigen::VectorXcd data = f300.x.tail(cfg300.lc) / std::sqrt(cfg300.power);
    std::vector<std::complex<double>> datav(data.data(), data.data() + data.size());
    auto depermuted = il.invert(datav);
    const BitVec word = ldpc_encode(code300, subrange(v, 12, 84));
    auto sym = modulate(word, Modulation::bpsk);
    for (size_t i = 0; i < sym.size(); ++i) CHECK(std::abs(depermuted[i] - sym[i]) < 1e-12);
    for (size_t i = sym.size(); i < depermuted.size(); ++i) CHECK(depermuted[i] == std::complex<double>(0, 0));
}

TEST_CASE("channel sampling") {
    Rng rng(21);
    auto h = sample_channels(rng, 3, 4);
    CHECK(h.rows() == 3);
    CHECK(h.cols() == 4);

    Rng r1(22), r2(22);
    CHECK(sample_channels(r1, 5, 5) == sample_channels(r2, 5, 5));

    Rng big(23);
    auto hb = sample_channels(big, 500, 200);
    CHECK(hb.cwiseAbs2().mean() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("transmit superposition") {
    auto cfg = small_cfg(Modulation::bpsk, 268);
    auto cb = build_codebook(cfg.codebook_seed(), 100, 12);
    auto code = build_ldpc(cfg.ldpc_seed(), 84);
    Rng rng(31);
    const Frame f1 = make_frame(cfg, cb, code, rng.bits(96));
    const Frame f2 = make_frame(cfg, cb, code, rng.bits(96));
    auto h = sample_channels(rng, 2, 2);

    // noiseless single device: exact rank-one product
    {
        Rng r(1);
        auto y = transmit({f1}, h.topRows(1), 0.0, r);
        CHECK((y - f1.x * h.row(0)).norm() < 1e-12);
    }
    // zero devices: noise only, at the right variance
    {
        Rng r(2);
        auto y = transmit({}, Eigen::MatrixXcd(0, 2), 2.0, r, 5000);
        CHECK(y.rows() == 5000);
        CHECK(y.cwiseAbs2().mean() == doctest::Approx(2.0).epsilon(0.05));
    }
    // two devices, noiseless: explicit sum
    {
        Rng r(3);
        auto y = transmit({f1, f2}, h, 0.0, r);
        Eigen::MatrixXcd want = f1.x * h.row(0) + f2.x * h.row(1);
        CHECK((y - want).norm() < 1e-10);
    }
    // shared noise draw: transmit(all) = noise + per-device signals
    {
        Rng ra(4), rb(4);
        auto y = transmit({f1, f2}, h, 1.5, ra);
        auto z = transmit({}, Eigen::MatrixXcd(0, 2), 1.5, rb, cfg.raw.l);
        Eigen::MatrixXcd want = z + f1.x * h.row(0) + f2.x * h.row(1);
        CHECK((y - want).norm() < 1e-10);
    }
    // frame count must match channel rows
    {
        Rng r(5);
        CHECK_THROWS_AS(transmit({f1}, h, 1.0, r), DimensionMismatch);
    }
}

TEST_CASE("shared index gives superposed channel rows") {
    auto cfg = small_cfg(Modulation::bpsk, 268);
    auto cb = build_codebook(cfg.codebook_seed(), 100, 12);
    auto code = build_ldpc(cfg.ldpc_seed(), 84);
    Rng rng(41);
    BitVec v1 = rng.bits(96), v2 = rng.bits(96);
    std::copy(v1.begin(), v1.begin() + 12, v2.begin()); // force a collision
    const Frame f1 = make_frame(cfg, cb, code, v1);
    const Frame f2 = make_frame(cfg, cb, code, v2);
    CHECK(f1.i_k == f2.i_k);
    auto h = sample_channels(rng, 2, 3);
    Rng r(6);
    auto y = transmit({f1, f2}, h, 0.0, r);
    const double amp = std::sqrt(cfg.power);
    Eigen::MatrixXcd cs_part = y.topRows(100);
    Eigen::MatrixXcd want =
        amp * cb.a.col(static_cast<Eigen::Index>(f1.i_k) - 1) * (h.row(0) + h.row(1));
    CHECK((cs_part - want).norm() < 1e-10);
}
