#include "ura/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>

#include "ura/errors.hpp"
#include "ura/rng.hpp"

namespace ura {

namespace {

constexpr int kVnDegree = 3;
constexpr int kCnDegree = 6;

using Row = std::vector<uint64_t>; // packed GF(2) row

size_t words_for(int bits) { return (static_cast<size_t>(bits) + 63) / 64; }

bool get_bit(const Row& r, int j) { return (r[static_cast<size_t>(j) / 64] >> (j % 64)) & 1u; }
void flip_bit(Row& r, int j) { r[static_cast<size_t>(j) / 64] ^= uint64_t(1) << (j % 64); }

void xor_rows(Row& dst, const Row& src) {
    for (size_t w = 0; w < dst.size(); ++w) dst[w] ^= src[w];
}

// One construction attempt; empty rows on dead-end.
std::vector<std::vector<int>> try_build(Rng& rng, int bc) {
    const int n = 2 * bc;
    const int nchk = bc;
    std::vector<std::vector<int>> rows(static_cast<size_t>(nchk));
    std::vector<int> deg(static_cast<size_t>(nchk), 0);
    // share[a][b] = number of variables adjacent to both checks; any pair
    // reaching 2 would close a 4-cycle.
    std::vector<std::vector<uint8_t>> share(static_cast<size_t>(nchk),
                                            std::vector<uint8_t>(static_cast<size_t>(nchk), 0));

    std::vector<int> vn_order(static_cast<size_t>(n));
    std::iota(vn_order.begin(), vn_order.end(), 0);
    for (int i = n - 1; i > 0; --i)
        std::swap(vn_order[static_cast<size_t>(i)], vn_order[rng.below(static_cast<uint64_t>(i) + 1)]);

    std::vector<int> chosen;
    std::vector<int> cand;
    for (int v : vn_order) {
        chosen.clear();
        for (int e = 0; e < kVnDegree; ++e) {
            cand.clear();
            int best = kCnDegree + 1;
            for (int c = 0; c < nchk; ++c) {
                if (deg[static_cast<size_t>(c)] >= kCnDegree) continue;
                bool ok = true;
                for (int p : chosen) {
                    if (c == p || share[static_cast<size_t>(c)][static_cast<size_t>(p)] != 0) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) continue;
                if (deg[static_cast<size_t>(c)] < best) {
                    best = deg[static_cast<size_t>(c)];
                    cand.clear();
                }
                if (deg[static_cast<size_t>(c)] == best) cand.push_back(c);
            }
            if (cand.empty()) return {};
            const int pick = cand[rng.below(cand.size())];
            chosen.push_back(pick);
        }
        for (int c : chosen) {
            rows[static_cast<size_t>(c)].push_back(v);
            ++deg[static_cast<size_t>(c)];
        }
        for (size_t i = 0; i < chosen.size(); ++i)
            for (size_t j = i + 1; j < chosen.size(); ++j) {
                ++share[static_cast<size_t>(chosen[i])][static_cast<size_t>(chosen[j])];
                ++share[static_cast<size_t>(chosen[j])][static_cast<size_t>(chosen[i])];
            }
    }
    for (auto& r : rows) std::sort(r.begin(), r.end());
    return rows;
}

std::vector<Row> pack_rows(const std::vector<std::vector<int>>& rows, int n) {
    std::vector<Row> packed(rows.size(), Row(words_for(n), 0));
    for (size_t r = 0; r < rows.size(); ++r)
        for (int j : rows[r]) flip_bit(packed[r], j);
    return packed;
}

// Finds nchk pivot columns (the parity positions) by elimination.
// Returns false when the matrix is rank deficient.
bool find_pivots(std::vector<Row> h, int n, std::vector<int>& pivots) {
    const int nchk = static_cast<int>(h.size());
    pivots.clear();
    int row = 0;
    for (int col = 0; col < n && row < nchk; ++col) {
        int sel = -1;
        for (int r = row; r < nchk; ++r)
            if (get_bit(h[static_cast<size_t>(r)], col)) {
                sel = r;
                break;
            }
        if (sel < 0) continue;
        std::swap(h[static_cast<size_t>(row)], h[static_cast<size_t>(sel)]);
        for (int r = 0; r < nchk; ++r)
            if (r != row && get_bit(h[static_cast<size_t>(r)], col))
                xor_rows(h[static_cast<size_t>(r)], h[static_cast<size_t>(row)]);
        pivots.push_back(col);
        ++row;
    }
    return row == nchk;
}

// Solves H_p X = H_m over GF(2) and fills code.gen_parity with X.
// Returns false when the parity submatrix (columns bc..n-1) is singular.
bool build_encoder(LdpcCode& code) {
    const int nchk = code.nchk;
    const int bc = code.bc;
    const size_t mwords = words_for(bc);
    // augmented rows: [H_p | H_m], parity part packed first
    std::vector<Row> hp(static_cast<size_t>(nchk), Row(words_for(nchk), 0));
    std::vector<Row> hm(static_cast<size_t>(nchk), Row(mwords, 0));
    for (int r = 0; r < nchk; ++r)
        for (int j : code.rows[static_cast<size_t>(r)]) {
            if (j < bc)
                flip_bit(hm[static_cast<size_t>(r)], j);
            else
                flip_bit(hp[static_cast<size_t>(r)], j - bc);
        }
    for (int col = 0; col < nchk; ++col) {
        int sel = -1;
        for (int r = col; r < nchk; ++r)
            if (get_bit(hp[static_cast<size_t>(r)], col)) {
                sel = r;
                break;
            }
        if (sel < 0) return false;
        std::swap(hp[static_cast<size_t>(col)], hp[static_cast<size_t>(sel)]);
        std::swap(hm[static_cast<size_t>(col)], hm[static_cast<size_t>(sel)]);
        for (int r = 0; r < nchk; ++r)
            if (r != col && get_bit(hp[static_cast<size_t>(r)], col)) {
                xor_rows(hp[static_cast<size_t>(r)], hp[static_cast<size_t>(col)]);
                xor_rows(hm[static_cast<size_t>(r)], hm[static_cast<size_t>(col)]);
            }
    }
    code.gen_parity = std::move(hm);
    return true;
}

// Permutes columns so the pivot set lands on the parity tail, then derives
// the systematic encoder. Throws on rank deficiency.
LdpcCode systematize(const std::vector<std::vector<int>>& rows, int n, int nchk, uint64_t seed) {
    std::vector<int> pivots;
    if (!find_pivots(pack_rows(rows, n), n, pivots))
        throw ConstructionFailed("parity matrix is rank deficient");
    std::vector<char> is_pivot(static_cast<size_t>(n), 0);
    for (int p : pivots) is_pivot[static_cast<size_t>(p)] = 1;
    LdpcCode code;
    code.n = n;
    code.bc = n - nchk;
    code.nchk = nchk;
    code.seed = seed;
    code.col_perm.resize(static_cast<size_t>(n));
    std::vector<int> new_pos(static_cast<size_t>(n));
    int msg = 0, par = code.bc;
    for (int j = 0; j < n; ++j) {
        const int pos = is_pivot[static_cast<size_t>(j)] ? par++ : msg++;
        new_pos[static_cast<size_t>(j)] = pos;
        code.col_perm[static_cast<size_t>(pos)] = j;
    }
    code.rows.resize(static_cast<size_t>(nchk));
    for (size_t r = 0; r < rows.size(); ++r) {
        for (int j : rows[r]) code.rows[r].push_back(new_pos[static_cast<size_t>(j)]);
        std::sort(code.rows[r].begin(), code.rows[r].end());
    }
    if (!build_encoder(code))
        throw ConstructionFailed("pivot permutation left a singular parity tail");
    return code;
}

void rebuild_cols(LdpcCode& code) {
    code.cols.assign(static_cast<size_t>(code.n), {});
    for (int r = 0; r < code.nchk; ++r)
        for (int j : code.rows[static_cast<size_t>(r)]) code.cols[static_cast<size_t>(j)].push_back(r);
    for (auto& c : code.cols) std::sort(c.begin(), c.end());
}

} // namespace

LdpcCode build_ldpc(uint64_t seed, int bc) {
    if (bc < 6 || bc % 2 != 0)
        throw InvalidConfig("build_ldpc needs even bc >= 6, got " + std::to_string(bc));
    const int n = 2 * bc;
    constexpr int kAttempts = 500;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        Rng rng = Rng::fork(seed, 0x1d9c0000ull + static_cast<uint64_t>(attempt));
        auto rows = try_build(rng, bc);
        if (rows.empty()) continue;
        try {
            LdpcCode code = systematize(rows, n, bc, seed);
            rebuild_cols(code);
            return code;
        } catch (const ConstructionFailed&) {
            continue; // rank deficient draw, reseed
        }
    }
    throw ConstructionFailed("no 4-cycle-free (3,6)-regular matrix for bc = " + std::to_string(bc) +
                             " within " + std::to_string(kAttempts) + " attempts");
}

BitVec ldpc_encode(const LdpcCode& code, const BitVec& v_c) {
    if (static_cast<int>(v_c.size()) != code.bc)
        throw DimensionMismatch("ldpc_encode: message length " + std::to_string(v_c.size()) +
                                " != bc = " + std::to_string(code.bc));
    Row msg(words_for(code.bc), 0);
    for (int j = 0; j < code.bc; ++j)
        if (v_c[static_cast<size_t>(j)]) flip_bit(msg, j);
    BitVec b(static_cast<size_t>(code.n), 0);
    std::copy(v_c.begin(), v_c.end(), b.begin());
    for (int r = 0; r < code.nchk; ++r) {
        uint64_t acc = 0;
        const Row& g = code.gen_parity[static_cast<size_t>(r)];
        for (size_t w = 0; w < msg.size(); ++w) acc ^= g[w] & msg[w];
        b[static_cast<size_t>(code.bc + r)] = static_cast<uint8_t>(std::popcount(acc) & 1);
    }
    return b;
}

bool parity_check(const LdpcCode& code, const BitVec& b) {
    if (static_cast<int>(b.size()) != code.n)
        throw DimensionMismatch("parity_check: word length " + std::to_string(b.size()) +
                                " != n = " + std::to_string(code.n));
    for (const auto& row : code.rows) {
        int acc = 0;
        for (int j : row) acc ^= b[static_cast<size_t>(j)];
        if (acc & 1) return false;
    }
    return true;
}

int ldpc_rank(const LdpcCode& code) {
    std::vector<std::vector<int>> rows = code.rows;
    auto packed = pack_rows(rows, code.n);
    int rank = 0;
    const int nchk = static_cast<int>(packed.size());
    for (int col = 0; col < code.n && rank < nchk; ++col) {
        int sel = -1;
        for (int r = rank; r < nchk; ++r)
            if (get_bit(packed[static_cast<size_t>(r)], col)) {
                sel = r;
                break;
            }
        if (sel < 0) continue;
        std::swap(packed[static_cast<size_t>(rank)], packed[static_cast<size_t>(sel)]);
        for (int r = 0; r < nchk; ++r)
            if (r != rank && get_bit(packed[static_cast<size_t>(r)], col))
                xor_rows(packed[static_cast<size_t>(r)], packed[static_cast<size_t>(rank)]);
        ++rank;
    }
    return rank;
}

std::string to_alist(const LdpcCode& code) {
    std::ostringstream out;
    out << code.n << " " << code.nchk << "\n";
    size_t max_col = 0, max_row = 0;
    for (const auto& c : code.cols) max_col = std::max(max_col, c.size());
    for (const auto& r : code.rows) max_row = std::max(max_row, r.size());
    out << max_col << " " << max_row << "\n";
    for (const auto& c : code.cols) out << c.size() << " ";
    out << "\n";
    for (const auto& r : code.rows) out << r.size() << " ";
    out << "\n";
    for (const auto& c : code.cols) {
        for (size_t i = 0; i < max_col; ++i) out << (i < c.size() ? c[i] + 1 : 0) << " ";
        out << "\n";
    }
    for (const auto& r : code.rows) {
        for (size_t i = 0; i < max_row; ++i) out << (i < r.size() ? r[i] + 1 : 0) << " ";
        out << "\n";
    }
    return out.str();
}

LdpcCode from_alist(const std::string& text) {
    std::istringstream in(text);
    LdpcCode code;
    size_t max_col = 0, max_row = 0;
    if (!(in >> code.n >> code.nchk >> max_col >> max_row) || code.n <= code.nchk || code.nchk <= 0)
        throw IoError("bad alist header");
    code.bc = code.n - code.nchk;
    std::vector<size_t> cdeg(static_cast<size_t>(code.n)), rdeg(static_cast<size_t>(code.nchk));
    for (auto& d : cdeg)
        if (!(in >> d)) throw IoError("bad alist column degrees");
    for (auto& d : rdeg)
        if (!(in >> d)) throw IoError("bad alist row degrees");
    code.cols.assign(static_cast<size_t>(code.n), {});
    code.rows.assign(static_cast<size_t>(code.nchk), {});
    for (int j = 0; j < code.n; ++j)
        for (size_t i = 0; i < max_col; ++i) {
            int v;
            if (!(in >> v)) throw IoError("bad alist column list");
            if (v > 0) code.cols[static_cast<size_t>(j)].push_back(v - 1);
        }
    for (int r = 0; r < code.nchk; ++r)
        for (size_t i = 0; i < max_row; ++i) {
            int v;
            if (!(in >> v)) throw IoError("bad alist row list");
            if (v > 0) code.rows[static_cast<size_t>(r)].push_back(v - 1);
        }
    for (int j = 0; j < code.n; ++j)
        if (code.cols[static_cast<size_t>(j)].size() != cdeg[static_cast<size_t>(j)])
            throw IoError("alist column degree mismatch");
    for (int r = 0; r < code.nchk; ++r)
        if (code.rows[static_cast<size_t>(r)].size() != rdeg[static_cast<size_t>(r)])
            throw IoError("alist row degree mismatch");
    for (auto& c : code.cols) std::sort(c.begin(), c.end());
    for (auto& r : code.rows) std::sort(r.begin(), r.end());

    // keep the alist bit order when the parity tail happens to be
    // invertible; otherwise fall back to the pivot permutation
    code.col_perm.resize(static_cast<size_t>(code.n));
    std::iota(code.col_perm.begin(), code.col_perm.end(), 0);
    if (!build_encoder(code)) {
        LdpcCode permuted = systematize(code.rows, code.n, code.nchk, 0);
        rebuild_cols(permuted);
        return permuted;
    }
    return code;
}

} // namespace ura
