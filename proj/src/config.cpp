#include "ura/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ura/rng.hpp"

namespace ura {

std::string to_string(Modulation m) { return m == Modulation::bpsk ? "bpsk" : "qpsk"; }

Modulation modulation_from_string(const std::string& s) {
    std::string t;
    for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "bpsk") return Modulation::bpsk;
    if (t == "qpsk") return Modulation::qpsk;
    throw InvalidConfig("modulation must be bpsk or qpsk, got '" + s + "'");
}

double ebn0_to_power(double ebn0_db, int l, int b) {
    return 2.0 * b * std::pow(10.0, ebn0_db / 10.0) / l;
}

uint64_t ValidatedConfig::codebook_seed() const { return mix_seed(raw.seed, 0xc0debull); }
uint64_t ValidatedConfig::ldpc_seed() const { return mix_seed(raw.seed, 0x1d9cull); }
uint64_t ValidatedConfig::interleaver_seed() const { return mix_seed(raw.seed, 0x17e1ull); }
uint64_t ValidatedConfig::trial_seed(uint64_t trial) const { return mix_seed(raw.seed, 0x7114ull + trial); }

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidConfig(what);
}

} // namespace

ValidatedConfig validate(const SystemConfig& cfg) {
    require(cfg.b > 0, "b must be positive");
    require(cfg.bp > 0, "bp must be positive");
    require(cfg.bc > 0, "bc must be positive");
    require(cfg.lp > 0, "lp must be positive");
    require(cfg.l > 0, "l must be positive");
    require(cfg.m > 0, "m must be positive");
    require(cfg.ka > 0, "ka must be positive");
    require(cfg.bp + cfg.bc == cfg.b, "bp + bc must equal b");
    require(cfg.bp <= 26, "bp too large: codebook would exceed the memory cap");
    require(cfg.l > cfg.lp, "l must exceed lp");
    require(cfg.bc % 2 == 0, "bc must be even for the rate-1/2 code");
    require(cfg.sigma2 > 0.0, "sigma2 must be positive");
    require(cfg.eta > cfg.gamma && cfg.gamma > 0.0, "thresholds must satisfy eta > gamma > 0");
    require(cfg.n_iter_dadce >= 1 && cfg.n_iter_ldpc >= 1 && cfg.n_iter_joint >= 1,
            "iteration caps must be at least 1");
    require(cfg.t_max >= 0, "t_max must be nonnegative");
    require(cfg.dadce_damping >= 0.0 && cfg.dadce_damping < 1.0, "dadce_damping must be in [0,1)");
    require(cfg.dadce_damping_llr >= 0.0 && cfg.dadce_damping_llr < 1.0,
            "dadce_damping_llr must be in [0,1)");
    require(!(cfg.joint && !cfg.sic), "joint update requires sic");

    ValidatedConfig v;
    v.raw = cfg;
    v.lc = cfg.l - cfg.lp;
    v.n_ldpc = 2 * cfg.bc;
    v.n_sym = cfg.modulation == Modulation::bpsk ? v.n_ldpc : v.n_ldpc / 2;
    require(v.n_sym <= v.lc, to_string(cfg.modulation) + " codeword needs " +
                                 std::to_string(v.n_sym) + " channel uses but lc = " +
                                 std::to_string(v.lc));
    v.pad_zeros = v.lc - v.n_sym;
    v.rc = static_cast<double>(cfg.b) / cfg.l;
    v.power = ebn0_to_power(cfg.ebn0_db, cfg.l, cfg.b);
    v.spectral_eff = static_cast<double>(cfg.b) * cfg.ka / (static_cast<double>(cfg.l) * cfg.m);

    v.pa_eff = cfg.pa != 0.0 ? cfg.pa : static_cast<double>(cfg.ka) / std::ldexp(1.0, cfg.bp);
    require(v.pa_eff > 0.0 && v.pa_eff < 1.0, "pa must lie in (0,1)");

    v.b0_eff = cfg.b0 != 0 ? cfg.b0 : cfg.bp / 2;
    require(v.b0_eff > 0 && v.b0_eff < cfg.bp, "b0 must satisfy 0 < b0 < bp");

    return v;
}

namespace {

struct Field {
    std::function<std::string(const SystemConfig&)> get;
    std::function<void(SystemConfig&, const std::string&)> set;
};

int parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InvalidConfig("bad integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InvalidConfig("bad number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw InvalidConfig("bad boolean for " + key + ": '" + v + "'");
}

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

const std::vector<std::pair<std::string, Field>>& fields() {
    auto int_field = [](int SystemConfig::* p) {
        return Field{[p](const SystemConfig& c) { return std::to_string(c.*p); },
                     [p](SystemConfig& c, const std::string& v) { c.*p = parse_int(v, "field"); }};
    };
    auto dbl_field = [](double SystemConfig::* p) {
        return Field{[p](const SystemConfig& c) { return fmt_double(c.*p); },
                     [p](SystemConfig& c, const std::string& v) { c.*p = parse_double(v, "field"); }};
    };
    auto bool_field = [](bool SystemConfig::* p) {
        return Field{[p](const SystemConfig& c) { return std::string(c.*p ? "true" : "false"); },
                     [p](SystemConfig& c, const std::string& v) { c.*p = parse_bool(v, "field"); }};
    };
    static const std::vector<std::pair<std::string, Field>> table = {
        {"b", int_field(&SystemConfig::b)},
        {"bp", int_field(&SystemConfig::bp)},
        {"bc", int_field(&SystemConfig::bc)},
        {"lp", int_field(&SystemConfig::lp)},
        {"l", int_field(&SystemConfig::l)},
        {"m", int_field(&SystemConfig::m)},
        {"ka", int_field(&SystemConfig::ka)},
        {"ebn0_db", dbl_field(&SystemConfig::ebn0_db)},
        {"modulation",
         Field{[](const SystemConfig& c) { return to_string(c.modulation); },
               [](SystemConfig& c, const std::string& v) { c.modulation = modulation_from_string(v); }}},
        {"sigma2", dbl_field(&SystemConfig::sigma2)},
        {"pa", dbl_field(&SystemConfig::pa)},
        {"n_iter_dadce", int_field(&SystemConfig::n_iter_dadce)},
        {"n_iter_ldpc", int_field(&SystemConfig::n_iter_ldpc)},
        {"n_iter_joint", int_field(&SystemConfig::n_iter_joint)},
        {"t_max", int_field(&SystemConfig::t_max)},
        {"b0", int_field(&SystemConfig::b0)},
        {"eta", dbl_field(&SystemConfig::eta)},
        {"gamma", dbl_field(&SystemConfig::gamma)},
        {"seed",
         Field{[](const SystemConfig& c) { return std::to_string(c.seed); },
               [](SystemConfig& c, const std::string& v) { c.seed = std::stoull(v); }}},
        {"diag_approx", bool_field(&SystemConfig::diag_approx)},
        {"colli_avoid", bool_field(&SystemConfig::colli_avoid)},
        {"sic", bool_field(&SystemConfig::sic)},
        {"joint", bool_field(&SystemConfig::joint)},
        {"dadce_damping", dbl_field(&SystemConfig::dadce_damping)},
        {"dadce_damping_llr", dbl_field(&SystemConfig::dadce_damping_llr)},
        {"colli_ldpc_retransmit", bool_field(&SystemConfig::colli_ldpc_retransmit)},
    };
    return table;
}

} // namespace

bool apply_kv(SystemConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            try {
                field.set(cfg, value);
            } catch (const InvalidConfig&) {
                throw;
            } catch (const std::exception&) {
                throw InvalidConfig("bad value for " + key + ": '" + value + "'");
            }
            return true;
        }
    }
    return false;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [name, field] : fields()) keys.push_back(name);
    return keys;
}

std::string config_to_text(const SystemConfig& cfg) {
    std::string out;
    for (const auto& [name, field] : fields()) {
        out += name;
        out += "=";
        out += field.get(cfg);
        out += "\n";
    }
    return out;
}

SystemConfig parse_config_file(const std::string& path, SystemConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto strip = [&](std::string& s) {
            s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
            s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
        };
        strip(key);
        strip(value);
        if (!apply_kv(base, key, value))
            throw InvalidConfig(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return base;
}

} // namespace ura
