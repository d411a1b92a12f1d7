#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ura/errors.hpp"

namespace ura {

enum class Modulation { bpsk, qpsk };

std::string to_string(Modulation m);
Modulation modulation_from_string(const std::string& s);

/// Per-symbol power from Eb/N0 in dB: Eb/N0 = L*P/(2*B).
double ebn0_to_power(double ebn0_db, int l, int b);

/// Every scenario knob of the simulator. Fields are raw inputs; validate()
/// resolves defaults and produces the derived quantities.
struct SystemConfig {
    int b = 96;              // total message bits
    int bp = 12;             // bits carried by the codeword index
    int bc = 84;             // LDPC-coded bits
    int lp = 100;            // channel uses, first phase
    int l = 268;             // channel uses, total
    int m = 8;               // BS antennas
    int ka = 8;              // active devices
    double ebn0_db = 10.0;
    Modulation modulation = Modulation::bpsk;
    double sigma2 = 1.0;     // noise variance per complex sample
    double pa = 0.0;         // prior activity per index; 0 = auto ka/2^bp
    int n_iter_dadce = 20;
    int n_iter_ldpc = 30;
    int n_iter_joint = 20;
    int t_max = 3;           // retransmission rounds for collision resolution
    int b0 = 0;              // window slide, bits; 0 = auto bp/2
    double eta = 1.5;        // energy-detect upper threshold (per antenna)
    double gamma = 0.5;      // energy-detect lower threshold (per antenna)
    uint64_t seed = 1;
    bool diag_approx = true; // diagonal covariance messages in the first-phase decoder
    bool colli_avoid = true; // run the collision resolution protocol
    bool sic = true;         // successive interference cancellation in data decoding
    bool joint = true;       // data-aided re-estimation loop
    double dadce_damping = 0.5;     // Gaussian message relaxation; 0 = plain flooding
    double dadce_damping_llr = 0.0; // activity message relaxation
    bool colli_ldpc_retransmit = false; // collided devices resend the data phase after resolution
};

/// SystemConfig plus derived quantities; immutable by convention after
/// validate(), freely shared across threads.
struct ValidatedConfig {
    SystemConfig raw;
    int lc = 0;              // channel uses, data phase
    int n_ldpc = 0;          // codeword length (rate-1/2)
    int n_sym = 0;           // modulated symbols per codeword
    int pad_zeros = 0;       // zeros appended before interleaving
    double rc = 0.0;         // code rate b/l
    double power = 0.0;      // per-symbol power
    double spectral_eff = 0.0;
    double pa_eff = 0.0;
    int b0_eff = 0;

    uint64_t codebook_seed() const;
    uint64_t ldpc_seed() const;
    uint64_t interleaver_seed() const;
    uint64_t trial_seed(uint64_t trial) const;
};

/// Checks every invariant and fills in derived fields.
/// Throws InvalidConfig naming the violated constraint.
ValidatedConfig validate(const SystemConfig& cfg);

/// key=value accessors shared by the config-file reader and the CLI flags.
bool apply_kv(SystemConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();
std::string config_to_text(const SystemConfig& cfg);
SystemConfig parse_config_file(const std::string& path, SystemConfig base = {});

} // namespace ura
