#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ura/bits.hpp"

namespace ura {

/// Rate-1/2 LDPC code in systematic form: message bits occupy the first bc
/// codeword positions, parity the rest. rows/cols hold the Tanner adjacency
/// of the parity-check matrix (nchk x n).
struct LdpcCode {
    int n = 0;    // codeword length
    int bc = 0;   // message length
    int nchk = 0; // parity checks, n - bc
    std::vector<std::vector<int>> rows; // check -> variable indices, sorted
    std::vector<std::vector<int>> cols; // variable -> check indices, sorted
    std::vector<int> col_perm;          // code position -> construction column
    std::vector<std::vector<uint64_t>> gen_parity; // nchk packed rows over bc message bits
    uint64_t seed = 0;
};

/// Seeded greedy construction of a (3,6)-regular, 4-cycle-free parity matrix
/// of size bc x 2bc with full GF(2) row rank. Re-seeds internally before
/// giving up with ConstructionFailed.
LdpcCode build_ldpc(uint64_t seed, int bc);

BitVec ldpc_encode(const LdpcCode& code, const BitVec& v_c);

/// True iff H b = 0 over GF(2); the decoder stopping test.
bool parity_check(const LdpcCode& code, const BitVec& b);

/// GF(2) rank of the stored parity-check matrix.
int ldpc_rank(const LdpcCode& code);

std::string to_alist(const LdpcCode& code);
LdpcCode from_alist(const std::string& text);

} // namespace ura
